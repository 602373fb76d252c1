use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CampaignError;

/// Paths inside a campaign directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignDir {
    root: PathBuf,
}

impl CampaignDir {
    pub fn new(root: &Path) -> CampaignDir {
        CampaignDir { root: root.to_path_buf() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Directory name, used as the campaign id.
    pub fn id(&self) -> String {
        self.root.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "campaign".into())
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn state(&self) -> PathBuf {
        self.root.join("state.json")
    }
    pub fn candidates(&self) -> PathBuf {
        self.root.join("candidates.json")
    }
    pub fn mining_stats(&self) -> PathBuf {
        self.root.join("mining_stats.json")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn round(&self, k: usize) -> PathBuf {
        self.root.join("rounds").join(format!("round_{k}.jsonl"))
    }
    pub fn exchange(&self, k: usize) -> PathBuf {
        self.root.join("exchange").join(format!("round_{k}.json"))
    }
    pub fn lock_path(&self) -> PathBuf {
        self.root.join("campaign.lock")
    }

    /// Takes the single-writer lock. A lock left by a process that no
    /// longer exists is reclaimed.
    pub fn lock(&self) -> Result<LockGuard, CampaignError> {
        let path = self.lock_path();
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let _ = writeln!(f, "{}", std::process::id());
                    return Ok(LockGuard { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let holder = fs::read_to_string(&path).ok().and_then(|s| s.trim().parse::<u32>().ok());
                    if holder.is_some_and(process_gone) {
                        let _ = fs::remove_file(&path);
                        continue;
                    }
                    return Err(CampaignError::Locked { holder });
                }
                Err(e) => return Err(CampaignError::io(&path, e)),
            }
        }
        Err(CampaignError::Locked { holder: None })
    }
}

fn process_gone(pid: u32) -> bool {
    Path::new("/proc/self").exists() && !Path::new(&format!("/proc/{pid}")).exists()
}

/// Releases the lock on drop.
#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CampaignError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CampaignError::io(dir, e))?;
    }
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| CampaignError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| CampaignError::io(&tmp, e))?;
        f.sync_all().map_err(|e| CampaignError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CampaignError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    write_atomic(path, &to_pretty(value))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CampaignError> {
    let text = fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CampaignError::Corrupt { path: path.to_path_buf(), message: e.to_string() })
}
