use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use rand::Rng;

use crate::artifact::{csv_error, csv_reader, csv_writer};
use crate::error::{Result, TrajkitError};
use crate::rng::rng_from;
use crate::trajectory::ClassLabel;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest other points of every point (Euclidean,
/// ties broken by index).
pub fn nearest_neighbors(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (sq_dist(p, q), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Oversamples every class to the size of the largest one. Synthetic points
/// are `x + lambda * (nn - x)` with `x` taken round-robin, `nn` one of its `k`
/// nearest same-class neighbours and `lambda ~ U[0, 1]`. Originals come first
/// in each output list.
pub fn smote_oversample(
    by_class: &BTreeMap<ClassLabel, Vec<Vec<f64>>>,
    k: usize,
    seed: u64,
) -> Result<BTreeMap<ClassLabel, Vec<Vec<f64>>>> {
    if k == 0 {
        return Err(TrajkitError::InvalidArgument("SMOTE needs k >= 1".into()));
    }
    let target = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut out = BTreeMap::new();
    for (&class, points) in by_class {
        let mut all = points.clone();
        let need = target - points.len();
        if need > 0 {
            if points.len() < 2 {
                return Err(TrajkitError::InvalidArgument(format!(
                    "class {class} has {} sample(s); SMOTE needs at least 2",
                    points.len()
                )));
            }
            let kk = if k > points.len() - 1 {
                warn!(
                    "class {class}: k = {k} exceeds {} available neighbours; clipped",
                    points.len() - 1
                );
                points.len() - 1
            } else {
                k
            };
            let nn = nearest_neighbors(points, kk);
            let mut rng = rng_from(seed, &format!("smote/{}", class.name()));
            for i in 0..need {
                let x = &points[i % points.len()];
                let n = &points[nn[i % points.len()][rng.random_range(0..kk)]];
                let lambda: f64 = rng.random_range(0.0..=1.0);
                all.push(x.iter().zip(n).map(|(a, b)| a + lambda * (b - a)).collect());
            }
        }
        out.insert(class, all);
    }
    Ok(out)
}

/// Writes flattened segments as `class,v0,v1,...`.
pub fn write_segment_matrix(
    path: &Path,
    rows: &[(ClassLabel, Vec<f64>)],
    config_hash: &str,
) -> Result<()> {
    let mut w = csv_writer(path, config_hash)?;
    let width = rows.first().map_or(0, |r| r.1.len());
    let mut header = vec!["class".to_string()];
    header.extend((0..width).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (class, v) in rows {
        let mut rec = Vec::with_capacity(v.len() + 1);
        rec.push(class.name().to_string());
        rec.extend(v.iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| TrajkitError::io(path, e))
}

pub fn read_segment_matrix(path: &Path) -> Result<Vec<(ClassLabel, Vec<f64>)>> {
    let mut rd = csv_reader(path)?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| TrajkitError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut it = row.iter();
        let class: ClassLabel = it
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e: TrajkitError| bad(e.to_string()))?;
        let v = it
            .map(|s| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push((class, v));
    }
    Ok(out)
}
