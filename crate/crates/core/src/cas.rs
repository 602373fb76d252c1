//! CAS registry number check digit.

/// `true` iff `code` has the form `NN(NNNNN)-NN-N` and its check digit
/// equals `Σ i·d_i mod 10`, where `d_1` is the digit just left of the check
/// digit and `i` grows leftward.
pub fn validate_cas(code: &str) -> bool {
    let mut parts = code.split('-');
    let (Some(head), Some(mid), Some(check), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !(2..=7).contains(&head.len()) || mid.len() != 2 || check.len() != 1 {
        return false;
    }
    if !all_digits(head) || !all_digits(mid) || !all_digits(check) {
        return false;
    }
    let sum: u32 =
        head.bytes().chain(mid.bytes()).rev().enumerate().map(|(i, b)| (i as u32 + 1) * u32::from(b - b'0')).sum();
    sum % 10 == u32::from(check.as_bytes()[0] - b'0')
}
