//! File ingestion and atomic output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use iwf_core::model::{normalize, PhysicalScenario, Scenario};

/// A scenario file holds either a normalized scenario (`gain_sq` present) or
/// a physical one (`raw_gains` present), which is normalized on load.
#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    Normalized(Scenario),
    Physical(PhysicalScenario),
}

pub fn load_scenario(path: &Path) -> Result<Scenario, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read scenario file {}: {e}", path.display()))?;
    let parsed: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| format!("cannot parse scenario file {}: {e}", path.display()))?;
    match parsed {
        ScenarioFile::Normalized(s) => {
            s.validate().map_err(|e| e.to_string())?;
            Ok(s)
        }
        ScenarioFile::Physical(p) => normalize(&p).map_err(|e| e.to_string()),
    }
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {what} file {}: {e}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| format!("cannot parse {what} file {}: {e}", path.display()))
}

/// Writes through a temp file in the same directory and renames on success,
/// so failed runs never leave partial outputs behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let mut tmp: PathBuf = path.to_path_buf();
    let mut name = tmp
        .file_name()
        .map(|n| n.to_os_string())
        .ok_or_else(|| format!("invalid output path {}", path.display()))?;
    name.push(".tmp");
    tmp.set_file_name(name);
    fs::write(&tmp, bytes).map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
    fs::rename(&tmp, path).map_err(|e| format!("cannot finalize {}: {e}", path.display()))
}

/// Sibling path carrying a suffix before the extension:
/// `traces.csv` -> `traces_summary.csv`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}
