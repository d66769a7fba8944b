use super::{decompose, ClassLabel, Trajectory, COORDS};
use crate::error::{Result, TrajkitError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentRef {
    pub video_id: String,
    pub person_id: String,
    pub start_frame: u64,
}

/// A fixed-length window of a trajectory in raw, local and global features.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub source: SegmentRef,
    pub class_label: ClassLabel,
    pub raw: Matrix,
    pub local: Matrix,
    pub global: Matrix,
}

impl Segment {
    pub fn from_raw(source: SegmentRef, class_label: ClassLabel, raw: Matrix) -> Result<Self> {
        if raw.cols() != COORDS {
            return Err(TrajkitError::Shape(format!(
                "segment has {} columns, expected {COORDS}",
                raw.cols()
            )));
        }
        if !raw.is_finite() {
            return Err(TrajkitError::InvalidArgument(
                "non-finite segment coordinate".into(),
            ));
        }
        let (local, global) = decompose(&raw)?;
        Ok(Segment {
            source,
            class_label,
            raw,
            local,
            global,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.rows() == 0
    }
}

/// Cuts a trajectory into windows starting at `0, stride, 2*stride, ...`.
///
/// A trailing remainder shorter than `window` is dropped, so trajectories
/// shorter than one window produce no segments.
pub fn segment_trajectory(t: &Trajectory, window: usize, stride: usize) -> Result<Vec<Segment>> {
    if window == 0 || stride == 0 {
        return Err(TrajkitError::InvalidArgument(format!(
            "window ({window}) and stride ({stride}) must be positive"
        )));
    }
    let n = t.frames.len();
    if n < window {
        log::debug!(
            "{}/{}: {n} frames, shorter than the {window}-frame window",
            t.video_id,
            t.person_id
        );
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity((n - window) / stride + 1);
    let mut start = 0;
    while start + window <= n {
        let mut raw = Matrix::zeros(window, COORDS);
        for (r, f) in t.frames[start..start + window].iter().enumerate() {
            raw.row_mut(r).copy_from_slice(&f.coords);
        }
        let source = SegmentRef {
            video_id: t.video_id.clone(),
            person_id: t.person_id.clone(),
            start_frame: t.frames[start].frame_index,
        };
        out.push(Segment::from_raw(source, t.class_label, raw)?);
        start += stride;
    }
    Ok(out)
}
