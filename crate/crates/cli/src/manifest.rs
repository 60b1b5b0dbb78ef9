//! Suite manifests and the best-known reference table.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// One generated instance with the settings the benchmark tables key
/// on: eligible share, drone speed factor, fleet size, depot code.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub source: String,
    pub el: u32,
    pub sp: String,
    pub drones: usize,
    pub depot: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_known: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub instances: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing manifest {}", path.display()))
    }

    /// Appends an entry, creating the manifest when absent.
    pub fn append(path: &Path, entry: ManifestEntry) -> Result<()> {
        let mut manifest = if path.exists() {
            Self::load(path)?
        } else {
            Self::default()
        };
        manifest.instances.push(entry);
        manifest.save(path)
    }
}

/// Key for joining instances against the reference table.
pub type SettingsKey = (String, u32, String, usize, String);

pub fn settings_key(e: &ManifestEntry) -> SettingsKey {
    (
        e.source.clone(),
        e.el,
        e.sp.clone(),
        e.drones,
        e.depot.clone(),
    )
}

/// Loads `source,el,sp,drones,depot,best_known` rows. The shipped
/// `data/best_known.csv` carries the published best-known costs for the
/// TSPLIB-derived benchmark set; gaps against it are reference points,
/// not reproduction targets, because the original generator is not
/// distributed with the files.
pub fn load_reference(path: &Path) -> Result<BTreeMap<SettingsKey, f64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading reference table {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(
            fields.len() == 6,
            "reference line {} has {} fields, expected 6",
            idx + 1,
            fields.len()
        );
        let key = (
            fields[0].to_string(),
            fields[1].parse()?,
            fields[2].to_string(),
            fields[3].parse()?,
            fields[4].to_string(),
        );
        out.insert(key, fields[5].parse()?);
    }
    Ok(out)
}

pub fn resolve_relative(base: &Path, entry_path: &str) -> PathBuf {
    let p = Path::new(entry_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}
