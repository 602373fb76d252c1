#![allow(dead_code)]

use std::path::{Path, PathBuf};

use labloop::campaign::{Campaign, CampaignConfig, SelectionInput, Services, Stage};
use labloop::core::Role;

pub const REAGENT_CAS: [&str; 18] = [
    "25233-30-1",
    "7646-79-9",
    "100-20-9",
    "25852-37-3",
    "9003-39-8",
    "7647-15-6",
    "141-78-6",
    "7732-18-5",
    "7647-14-5",
    "13462-88-9",
    "7718-54-9",
    "79-06-1",
    "79-10-7",
    "9003-05-8",
    "10043-52-4",
    "75-58-1",
    "25322-68-3",
    "9004-57-3",
];

/// The eight-ingredient mixture used in the humidity campaign.
pub const REFERENCE_SELECTION: [(&str, Role); 8] = [
    ("7646-79-9", Role::Colorant),
    ("7718-54-9", Role::Colorant),
    ("13462-88-9", Role::Colorant),
    ("10043-52-4", Role::Additive),
    ("75-58-1", Role::Additive),
    ("25322-68-3", Role::Additive),
    ("9004-57-3", Role::Additive),
    ("67-63-0", Role::Solvent),
];

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/humidity")
}

pub fn fixture_config() -> CampaignConfig {
    CampaignConfig::load(&fixture_dir().join("campaign.json")).unwrap()
}

pub fn reference_picks() -> Vec<SelectionInput> {
    REFERENCE_SELECTION.iter().map(|(cas, role)| SelectionInput { cas: cas.to_string(), role: *role }).collect()
}

pub fn selection_args() -> Vec<String> {
    REFERENCE_SELECTION
        .iter()
        .flat_map(|(cas, role)| ["--cas".to_string(), cas.to_string(), "--role".to_string(), role.as_str().to_string()])
        .collect()
}

/// Creates a campaign and drives it to the selection gate.
pub fn campaign_at_feedback(dir: &Path, config: CampaignConfig) -> Campaign {
    let mut c = Campaign::create(dir, config).unwrap();
    let services = Services::from_config(c.config(), 1).unwrap();
    while c.stage() != Stage::Feedback {
        c.advance(&services).unwrap();
    }
    c
}

pub fn small_config(batch_size: usize, rounds: usize) -> CampaignConfig {
    let mut cfg = fixture_config();
    cfg.batch_size = batch_size;
    cfg.set_rounds(rounds);
    cfg.acquisition.pool_size = 500;
    cfg
}
