//! Dataset manifest: a JSON document listing trajectory files with identity,
//! class, split and per-video frame resolution.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_frames, ClassLabel, Trajectory};
use crate::error::{Result, TrajkitError};

pub const MANIFEST_FORMAT: &str = "trajkit-manifest/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: f64,
    pub height: f64,
}

impl Resolution {
    pub fn validate(&self) -> Result<()> {
        if self.width > 0.0
            && self.height > 0.0
            && self.width.is_finite()
            && self.height.is_finite()
        {
            Ok(())
        } else {
            Err(TrajkitError::InvalidArgument(format!(
                "resolution {}x{} must be positive",
                self.width, self.height
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative paths are resolved against the manifest's directory.
    pub path: PathBuf,
    pub video_id: String,
    pub person_id: String,
    pub class_label: ClassLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Person id of the original trajectory for augmented copies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_person_id: Option<String>,
}

impl ManifestEntry {
    /// Identity used to look up trajectory-level labels.
    pub fn label_key(&self) -> (String, String) {
        (
            self.video_id.clone(),
            self.source_person_id
                .clone()
                .unwrap_or_else(|| self.person_id.clone()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub resolutions: BTreeMap<String, Resolution>,
    pub entries: Vec<ManifestEntry>,
    /// Synthetic (SMOTE) segment matrix file, when the manifest was augmented.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smote_segments: Option<PathBuf>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(resolutions: BTreeMap<String, Resolution>, entries: Vec<ManifestEntry>) -> Self {
        DatasetManifest {
            format: MANIFEST_FORMAT.to_string(),
            generator: Some(crate::toolkit_id()),
            resolutions,
            entries,
            smote_segments: None,
            base_dir: PathBuf::new(),
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MANIFEST_FORMAT {
            return Err(TrajkitError::Format(format!(
                "unsupported manifest format `{}` (expected {MANIFEST_FORMAT})",
                self.format
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.path) {
                return Err(TrajkitError::Format(format!(
                    "duplicate manifest path {}",
                    e.path.display()
                )));
            }
            let res = self.resolutions.get(&e.video_id).ok_or_else(|| {
                TrajkitError::Format(format!("no resolution for video `{}`", e.video_id))
            })?;
            res.validate()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| TrajkitError::io(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| TrajkitError::Format(format!("{}: {e}", path.display())))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(|e| TrajkitError::io(dir, e))?;
            }
        }
        fs::write(path, text).map_err(|e| TrajkitError::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_entry(&self, e: &ManifestEntry) -> Result<Trajectory> {
        let res = *self.resolutions.get(&e.video_id).ok_or_else(|| {
            TrajkitError::Format(format!("no resolution for video `{}`", e.video_id))
        })?;
        let frames = read_frames(&self.resolve(&e.path), res)?;
        Trajectory::new(
            e.video_id.clone(),
            e.person_id.clone(),
            e.class_label,
            frames,
        )
    }

    /// Loads every entry, optionally restricted to one split.
    pub fn load_trajectories(
        &self,
        split: Option<Split>,
    ) -> Result<Vec<(ManifestEntry, Trajectory)>> {
        self.entries
            .iter()
            .filter(|e| split.is_none() || e.split == split)
            .map(|e| Ok((e.clone(), self.load_entry(e)?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_paths_are_rejected() {
        let e = ManifestEntry {
            path: "a.csv".into(),
            video_id: "v".into(),
            person_id: "p".into(),
            class_label: ClassLabel::NORMAL,
            split: None,
            source_person_id: None,
        };
        let mut res = BTreeMap::new();
        res.insert(
            "v".to_string(),
            Resolution {
                width: 10.0,
                height: 10.0,
            },
        );
        let m = DatasetManifest::new(res, vec![e.clone(), e]);
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut res = BTreeMap::new();
        res.insert(
            "v".to_string(),
            Resolution {
                width: 640.0,
                height: 480.0,
            },
        );
        let e = ManifestEntry {
            path: "Abuse/v/p.csv".into(),
            video_id: "v".into(),
            person_id: "p".into(),
            class_label: "Abuse".parse().unwrap(),
            split: Some(Split::Train),
            source_person_id: None,
        };
        let m = DatasetManifest::new(res, vec![e]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        m.save(&p).unwrap();
        let back = DatasetManifest::load(&p).unwrap();
        assert_eq!(back.entries, m.entries);
        assert_eq!(back.format, MANIFEST_FORMAT);
        assert_eq!(back.base_dir(), dir.path());
    }
}
