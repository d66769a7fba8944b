//! Trajectory CSV files: header-less rows `frame,x1,y1,...,x17,y17` in pixels.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ClassLabel, JointFrame, Resolution, Trajectory, COORDS};
use crate::error::{Result, TrajkitError};

/// Reads and normalizes the frames of one trajectory file.
///
/// Rows are sorted by frame index; duplicated indices are a format error.
/// Coordinates outside the frame are clamped into `[0, 1]`.
pub fn read_frames(path: &Path, resolution: Resolution) -> Result<Vec<JointFrame>> {
    resolution.validate()?;
    let text = fs::read_to_string(path).map_err(|e| TrajkitError::io(path, e))?;
    let parse_err = |line: usize, msg: String| TrajkitError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut frames = Vec::new();
    let mut clamped = 0usize;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != COORDS + 1 {
            return Err(parse_err(
                lineno,
                format!("expected {} columns, found {}", COORDS + 1, fields.len()),
            ));
        }
        let frame_index: u64 = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad frame index `{}`", fields[0])))?;
        let mut coords = [0.0; COORDS];
        for (k, field) in fields[1..].iter().enumerate() {
            let px: f64 = field
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric coordinate `{field}`")))?;
            if !px.is_finite() {
                return Err(parse_err(
                    lineno,
                    format!("non-finite coordinate `{field}`"),
                ));
            }
            let scale = if k % 2 == 0 {
                resolution.width
            } else {
                resolution.height
            };
            let v = px / scale;
            if !(0.0..=1.0).contains(&v) {
                clamped += 1;
            }
            coords[k] = v.clamp(0.0, 1.0);
        }
        frames.push(JointFrame {
            frame_index,
            coords,
        });
    }
    if clamped > 0 {
        log::warn!(
            "{}: clamped {clamped} coordinates into the frame",
            path.display()
        );
    }
    frames.sort_by_key(|f| f.frame_index);
    if let Some(w) = frames
        .windows(2)
        .find(|w| w[0].frame_index == w[1].frame_index)
    {
        return Err(TrajkitError::Format(format!(
            "{}: duplicate frame index {}",
            path.display(),
            w[0].frame_index
        )));
    }
    if frames.is_empty() {
        return Err(TrajkitError::Format(format!(
            "{}: no frames",
            path.display()
        )));
    }
    Ok(frames)
}

/// Ingests a trajectory file.
///
/// Identity is taken from the dataset layout `<class>/<video_id>/<person_id>.csv`:
/// the file stem is the person, the parent directory the video and the
/// grandparent the class (normal when it is not a known class name).
/// Manifest-driven loading sets identity from the manifest instead.
pub fn ingest_trajectory(path: &Path, resolution: Resolution) -> Result<Trajectory> {
    let frames = read_frames(path, resolution)?;
    let person_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let video_dir = path.parent();
    let video_id = video_dir
        .and_then(Path::file_name)
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let class_label = video_dir
        .and_then(Path::parent)
        .and_then(Path::file_name)
        .and_then(|s| s.to_str())
        .and_then(|s| s.parse().ok())
        .unwrap_or(ClassLabel::NORMAL);
    Trajectory::new(video_id, person_id, class_label, frames)
}

/// Smallest-magnitude perturbation of `norm * scale` that divides back to
/// exactly `norm`, so that export followed by ingestion is lossless.
fn to_pixels(norm: f64, scale: f64) -> f64 {
    let guess = norm * scale;
    if guess / scale == norm {
        return guess;
    }
    let mut lo = guess;
    let mut hi = guess;
    for _ in 0..8 {
        lo = lo.next_down();
        hi = hi.next_up();
        if lo / scale == norm {
            return lo;
        }
        if hi / scale == norm {
            return hi;
        }
    }
    guess
}

/// Writes a trajectory in pixel coordinates, optionally preceded by a `#`
/// comment line. Values are printed with the shortest representation that
/// parses back to the same `f64`.
pub fn export_trajectory(
    t: &Trajectory,
    path: &Path,
    resolution: Resolution,
    header: Option<&str>,
) -> Result<()> {
    resolution.validate()?;
    let mut out = String::with_capacity(t.frames.len() * 400);
    if let Some(h) = header {
        out.push_str(h);
        out.push('\n');
    }
    for f in &t.frames {
        write!(out, "{}", f.frame_index).expect("writing to String");
        for (k, &c) in f.coords.iter().enumerate() {
            let scale = if k % 2 == 0 {
                resolution.width
            } else {
                resolution.height
            };
            write!(out, ",{}", to_pixels(c, scale)).expect("writing to String");
        }
        out.push('\n');
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| TrajkitError::io(dir, e))?;
        }
    }
    fs::write(path, out).map_err(|e| TrajkitError::io(path, e))
}
