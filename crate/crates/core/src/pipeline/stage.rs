use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::hex;
use crate::error::{Result, TrajkitError};

const STAGE_FILE: &str = "stage.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub cache_hit: bool,
    pub seconds: f64,
    /// SHA-256 of every file the stage wrote, by path relative to the stage
    /// directory.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct StageFile<T> {
    toolkit: String,
    config_hash: String,
    key: String,
    artifacts: BTreeMap<String, String>,
    result: T,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let data = fs::read(path).map_err(|e| TrajkitError::io(path, e))?;
    Ok(hex(&Sha256::digest(&data)))
}

/// Hash of a stage name, its upstream keys and its parameters.
pub fn stage_key(name: &str, upstream: &[&str], params: &impl Serialize) -> String {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    for u in upstream {
        h.update([0u8]);
        h.update(u.as_bytes());
    }
    h.update([1u8]);
    h.update(serde_json::to_vec(params).expect("stage parameters serialize"));
    hex(&h.finalize())
}

fn walk(dir: &Path, base: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| TrajkitError::io(dir, e))?
        .map(|e| {
            e.map(|e| e.path())
                .map_err(|err| TrajkitError::io(dir, err))
        })
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, base, out)?;
        } else {
            out.push(p.strip_prefix(base).unwrap_or(&p).to_path_buf());
        }
    }
    Ok(())
}

/// Content hash of every file below `dir`, by relative path.
pub fn hash_tree(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files
        .into_iter()
        .filter(|p| p != Path::new(STAGE_FILE))
        .map(|rel| {
            let h = sha256_file(&dir.join(&rel))?;
            Ok((rel.to_string_lossy().replace('\\', "/"), h))
        })
        .collect()
}

/// Stage runner with a content-keyed cache below `<root>/<stage>/`.
pub struct StageCache {
    root: PathBuf,
    config_hash: String,
    pub records: Vec<StageRecord>,
}

impl StageCache {
    pub fn new(root: impl Into<PathBuf>, config_hash: impl Into<String>) -> Self {
        StageCache {
            root: root.into(),
            config_hash: config_hash.into(),
            records: Vec::new(),
        }
    }

    pub fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn load_hit<T: DeserializeOwned>(&self, name: &str, key: &str) -> Option<StageFile<T>> {
        let dir = self.dir(name);
        let text = fs::read_to_string(dir.join(STAGE_FILE)).ok()?;
        let file: StageFile<T> = serde_json::from_str(&text).ok()?;
        if file.key != key {
            return None;
        }
        match hash_tree(&dir) {
            Ok(now) if now == file.artifacts => Some(file),
            _ => {
                log::warn!("stage `{name}`: artifacts changed on disk; recomputing");
                None
            }
        }
    }

    /// Runs `f` in a fresh stage directory unless a previous run with the
    /// same key left intact outputs. Errors are tagged with the stage name
    /// and directory; partial outputs stay on disk.
    pub fn run<T, F>(&mut self, name: &str, key: String, f: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce(&Path) -> Result<T>,
    {
        let start = Instant::now();
        let dir = self.dir(name);
        if let Some(hit) = self.load_hit::<T>(name, &key) {
            log::info!("stage `{name}`: cache hit");
            self.records.push(StageRecord {
                name: name.to_string(),
                key,
                cache_hit: true,
                seconds: start.elapsed().as_secs_f64(),
                artifacts: hit.artifacts,
            });
            return Ok(hit.result);
        }
        log::info!("stage `{name}`: running");
        let tag = |e: TrajkitError| TrajkitError::Stage {
            stage: name.to_string(),
            artifact: dir.display().to_string(),
            source: Box::new(e),
        };
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| tag(TrajkitError::io(&dir, e)))?;
        }
        fs::create_dir_all(&dir).map_err(|e| tag(TrajkitError::io(&dir, e)))?;
        let result = f(&dir).map_err(tag)?;
        let artifacts = hash_tree(&dir).map_err(tag)?;
        let file = StageFile {
            toolkit: crate::toolkit_id(),
            config_hash: self.config_hash.clone(),
            key: key.clone(),
            artifacts: artifacts.clone(),
            result,
        };
        let path = dir.join(STAGE_FILE);
        let mut text = serde_json::to_string_pretty(&file).map_err(|e| tag(e.into()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| tag(TrajkitError::io(&path, e)))?;
        self.records.push(StageRecord {
            name: name.to_string(),
            key,
            cache_hit: false,
            seconds: start.elapsed().as_secs_f64(),
            artifacts,
        });
        Ok(file.result)
    }
}
