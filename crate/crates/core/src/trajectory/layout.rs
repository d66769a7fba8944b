//! On-disk dataset layout: `<root>/<class>/<video_id>/<person_id>.csv` plus
//! `<root>/resolutions.csv` with rows `video_id,width,height`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    export_trajectory, read_frames, ClassLabel, DatasetManifest, ManifestEntry, Resolution,
    Trajectory,
};
use crate::error::{Result, TrajkitError};

pub const RESOLUTIONS_FILE: &str = "resolutions.csv";

pub fn read_resolutions(path: &Path) -> Result<BTreeMap<String, Resolution>> {
    let text = fs::read_to_string(path).map_err(|e| TrajkitError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("video_id")) {
            continue;
        }
        let parse_err = |msg: String| TrajkitError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(parse_err(format!("expected 3 columns, found {}", f.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| parse_err(format!("non-numeric resolution `{s}`")))
        };
        let res = Resolution {
            width: num(f[1])?,
            height: num(f[2])?,
        };
        res.validate()?;
        out.insert(f[0].to_string(), res);
    }
    Ok(out)
}

pub fn write_resolutions(path: &Path, res: &BTreeMap<String, Resolution>) -> Result<()> {
    let mut text = String::from("video_id,width,height\n");
    for (v, r) in res {
        text.push_str(&format!("{v},{},{}\n", r.width, r.height));
    }
    fs::write(path, text).map_err(|e| TrajkitError::io(path, e))
}

fn sorted_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| TrajkitError::io(dir, e))?
        .map(|e| {
            e.map(|e| e.path())
                .map_err(|err| TrajkitError::io(dir, err))
        })
        .collect::<Result<_>>()?;
    v.sort();
    Ok(v)
}

/// Scans a dataset directory and builds an (unsplit) manifest. Every file is
/// parsed once so that malformed input fails here rather than mid-pipeline.
pub fn scan_dataset(root: &Path) -> Result<DatasetManifest> {
    if !root.is_dir() {
        return Err(TrajkitError::Config(format!(
            "data directory {} does not exist",
            root.display()
        )));
    }
    let resolutions = read_resolutions(&root.join(RESOLUTIONS_FILE))?;
    let mut entries = Vec::new();
    for class_dir in sorted_dir(root)? {
        if !class_dir.is_dir() {
            continue;
        }
        let name = class_dir
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let Ok(class_label) = name.parse::<ClassLabel>() else {
            log::warn!("skipping directory `{name}`: not a class name");
            continue;
        };
        for video_dir in sorted_dir(&class_dir)? {
            if !video_dir.is_dir() {
                continue;
            }
            let video_id = video_dir
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let res = *resolutions.get(&video_id).ok_or_else(|| {
                TrajkitError::Format(format!(
                    "video `{video_id}` missing from {RESOLUTIONS_FILE}"
                ))
            })?;
            for file in sorted_dir(&video_dir)? {
                if file.extension().and_then(|e| e.to_str()) != Some("csv") {
                    continue;
                }
                read_frames(&file, res)?;
                let person_id = file
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                let rel = file.strip_prefix(root).unwrap_or(&file).to_path_buf();
                entries.push(ManifestEntry {
                    path: rel,
                    video_id: video_id.clone(),
                    person_id,
                    class_label,
                    split: None,
                    source_person_id: None,
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(TrajkitError::Format(format!(
            "no trajectory files found under {}",
            root.display()
        )));
    }
    let used: std::collections::BTreeSet<&String> = entries.iter().map(|e| &e.video_id).collect();
    let resolutions = resolutions
        .iter()
        .filter(|(k, _)| used.contains(k))
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    let mut m = DatasetManifest::new(resolutions, entries);
    m.set_base_dir(root);
    m.validate()?;
    Ok(m)
}

/// Writes trajectories into the dataset layout and returns the manifest
/// describing them (relative paths, base directory `root`).
pub fn write_dataset(
    trajectories: &[Trajectory],
    root: &Path,
    resolution: Resolution,
) -> Result<DatasetManifest> {
    let mut resolutions = BTreeMap::new();
    let mut entries = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        let rel = PathBuf::from(t.class_label.name())
            .join(&t.video_id)
            .join(format!("{}.csv", t.person_id));
        export_trajectory(t, &root.join(&rel), resolution, None)?;
        resolutions.insert(t.video_id.clone(), resolution);
        entries.push(ManifestEntry {
            path: rel,
            video_id: t.video_id.clone(),
            person_id: t.person_id.clone(),
            class_label: t.class_label,
            split: None,
            source_person_id: None,
        });
    }
    write_resolutions(&root.join(RESOLUTIONS_FILE), &resolutions)?;
    let mut m = DatasetManifest::new(resolutions, entries);
    m.set_base_dir(root);
    m.validate()?;
    Ok(m)
}
