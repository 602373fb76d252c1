//! Small dense linear algebra: Cholesky solves for the GP and Householder
//! least squares for calibration.

use alloc::vec;
use alloc::vec::Vec;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite;

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix, NotPositiveDefinite> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = j * n;
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.data[lj + k] * l.data[lj + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(NotPositiveDefinite);
        }
        let d = libm::sqrt(d);
        l.data[lj + j] = d;
        for i in j + 1..n {
            let li = i * n;
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.data[li + k] * l.data[lj + k];
            }
            l.data[li + j] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = b.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let mut s = x[i];
        for k in 0..i {
            s -= row[k] * x[k];
        }
        x[i] = s / row[i];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Householder QR of a tall matrix, kept in compact form.
pub struct Qr {
    qr: Matrix,
    diag: Vec<f64>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Qr {
        let (m, n) = (a.rows, a.cols);
        let mut qr = a.clone();
        let mut diag = vec![0.0; n];
        for k in 0..n.min(m) {
            let mut norm = 0.0;
            for i in k..m {
                norm = libm::hypot(norm, qr.get(i, k));
            }
            if norm != 0.0 {
                if qr.get(k, k) < 0.0 {
                    norm = -norm;
                }
                for i in k..m {
                    qr.set(i, k, qr.get(i, k) / norm);
                }
                qr.set(k, k, qr.get(k, k) + 1.0);
                for j in k + 1..n {
                    let mut s = 0.0;
                    for i in k..m {
                        s += qr.get(i, k) * qr.get(i, j);
                    }
                    s = -s / qr.get(k, k);
                    for i in k..m {
                        qr.set(i, j, qr.get(i, j) + s * qr.get(i, k));
                    }
                }
            }
            diag[k] = -norm;
        }
        Qr { qr, diag }
    }

    /// Numerical rank: count of `|R_kk|` above `rel_tol · max |R_kk|`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let max = self.diag.iter().fold(0.0f64, |a, d| a.max(libm::fabs(*d)));
        if max == 0.0 {
            return 0;
        }
        self.diag.iter().filter(|d| libm::fabs(**d) > rel_tol * max).count()
    }

    /// Least-squares solution of `A x ≈ b`. Requires full column rank.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (m, n) = (self.qr.rows, self.qr.cols);
        let mut y = b.to_vec();
        for k in 0..n {
            let mut s = 0.0;
            for i in k..m {
                s += self.qr.get(i, k) * y[i];
            }
            s = -s / self.qr.get(k, k);
            for i in k..m {
                y[i] += s * self.qr.get(i, k);
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = y[k];
            for j in k + 1..n {
                s -= self.qr.get(k, j) * x[j];
            }
            x[k] = s / self.diag[k];
        }
        x
    }
}
