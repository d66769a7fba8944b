use std::collections::BTreeMap;
use std::path::Path;

use super::model::ClassifierModel;
use crate::artifact::{csv_error, csv_reader, csv_writer};
use crate::backbone::BackboneModel;
use crate::error::{Result, TrajkitError};
use crate::eval::{confusion, metrics, MetricsReport};
use crate::nn::argmax;
use crate::trajectory::{ClassLabel, Segment, SegmentRef, CRIME_CLASSES};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPrediction {
    pub source: SegmentRef,
    pub probabilities: Vec<f64>,
    pub predicted: usize,
    pub truth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPrediction {
    pub video_id: String,
    pub person_id: String,
    pub predicted: usize,
    pub truth: usize,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<String>,
    pub segments: Vec<SegmentPrediction>,
    /// Majority votes, sorted by (video, person).
    pub trajectories: Vec<TrajectoryPrediction>,
}

/// Index of the most frequent per-row argmax; ties go to the class with the
/// larger summed probability, then to the lower index.
pub fn majority_vote(probabilities: &[Vec<f64>]) -> Result<usize> {
    let c = probabilities
        .first()
        .map(Vec::len)
        .ok_or_else(|| TrajkitError::InvalidArgument("majority vote over no segments".into()))?;
    let mut votes = vec![0usize; c];
    let mut mass = vec![0.0; c];
    for p in probabilities {
        if p.len() != c {
            return Err(TrajkitError::Shape(format!(
                "probability vectors of length {} and {c}",
                p.len()
            )));
        }
        votes[argmax(p)] += 1;
        for (m, v) in mass.iter_mut().zip(p) {
            *m += v;
        }
    }
    let mut best = 0;
    for i in 1..c {
        if votes[i] > votes[best] || (votes[i] == votes[best] && mass[i] > mass[best]) {
            best = i;
        }
    }
    Ok(best)
}

impl Prediction {
    pub fn from_segments(classes: Vec<String>, segments: Vec<SegmentPrediction>) -> Result<Self> {
        let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for (i, s) in segments.iter().enumerate() {
            if s.probabilities.len() != classes.len() || s.truth >= classes.len() {
                return Err(TrajkitError::Shape(format!(
                    "prediction for {}/{} does not fit {} classes",
                    s.source.video_id,
                    s.source.person_id,
                    classes.len()
                )));
            }
            groups
                .entry((s.source.video_id.clone(), s.source.person_id.clone()))
                .or_default()
                .push(i);
        }
        let mut trajectories = Vec::with_capacity(groups.len());
        for ((video_id, person_id), idx) in groups {
            let probs: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| segments[i].probabilities.clone())
                .collect();
            trajectories.push(TrajectoryPrediction {
                video_id,
                person_id,
                predicted: majority_vote(&probs)?,
                truth: segments[idx[0]].truth,
                segments: idx.len(),
            });
        }
        Ok(Prediction {
            classes,
            segments,
            trajectories,
        })
    }

    pub fn segment_metrics(&self) -> Result<MetricsReport> {
        let truth: Vec<usize> = self.segments.iter().map(|s| s.truth).collect();
        let pred: Vec<usize> = self.segments.iter().map(|s| s.predicted).collect();
        let probs: Vec<Vec<f64>> = self
            .segments
            .iter()
            .map(|s| s.probabilities.clone())
            .collect();
        metrics(
            &confusion(&truth, &pred, &self.classes)?,
            Some((&probs, &truth)),
        )
    }

    pub fn trajectory_metrics(&self) -> Result<MetricsReport> {
        let truth: Vec<usize> = self.trajectories.iter().map(|t| t.truth).collect();
        let pred: Vec<usize> = self.trajectories.iter().map(|t| t.predicted).collect();
        metrics(&confusion(&truth, &pred, &self.classes)?, None)
    }

    pub fn segment_confusion(&self) -> Result<crate::eval::ConfusionMatrix> {
        let truth: Vec<usize> = self.segments.iter().map(|s| s.truth).collect();
        let pred: Vec<usize> = self.segments.iter().map(|s| s.predicted).collect();
        confusion(&truth, &pred, &self.classes)
    }
}

fn truth_index(seg: &Segment, classes: usize) -> Result<usize> {
    let i = seg.class_label.index();
    if i >= classes {
        return Err(TrajkitError::InvalidArgument(format!(
            "segment {}/{} has class {} outside the {classes}-class model",
            seg.source.video_id, seg.source.person_id, seg.class_label
        )));
    }
    Ok(i)
}

/// Mean probabilities of one or more models trained on the same backbone.
pub fn predict_ensemble(
    models: &[&ClassifierModel],
    backbone: &BackboneModel,
    segments: &[Segment],
) -> Result<Prediction> {
    let first = models
        .first()
        .ok_or_else(|| TrajkitError::InvalidArgument("no models to predict with".into()))?;
    for m in models {
        m.check_backbone(backbone)?;
        if m.classes != first.classes {
            return Err(TrajkitError::Shape(
                "ensemble members differ in class count".into(),
            ));
        }
    }
    let classes = first.spec.variant.class_names();
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        let mut p = vec![0.0; first.classes];
        for m in models {
            for (a, b) in p.iter_mut().zip(m.predict_proba(backbone, seg)?) {
                *a += b;
            }
        }
        if models.len() > 1 {
            let n = models.len() as f64;
            p.iter_mut().for_each(|v| *v /= n);
        }
        out.push(SegmentPrediction {
            source: seg.source.clone(),
            predicted: argmax(&p),
            truth: truth_index(seg, first.classes)?,
            probabilities: p,
        });
    }
    Prediction::from_segments(classes, out)
}

pub fn predict(
    model: &ClassifierModel,
    backbone: &BackboneModel,
    segments: &[Segment],
) -> Result<Prediction> {
    predict_ensemble(&[model], backbone, segments)
}

/// Columns: `video_id,person_id,start_frame,p_1..p_C,pred,true`, with class
/// names in the last two.
pub fn write_predictions(path: &Path, pred: &Prediction, config_hash: &str) -> Result<()> {
    let mut w = csv_writer(path, config_hash)?;
    let mut header = vec![
        "video_id".to_string(),
        "person_id".into(),
        "start_frame".into(),
    ];
    header.extend((1..=pred.classes.len()).map(|i| format!("p_{i}")));
    header.extend(["pred".to_string(), "true".into()]);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for s in &pred.segments {
        let mut rec = vec![
            s.source.video_id.clone(),
            s.source.person_id.clone(),
            s.source.start_frame.to_string(),
        ];
        rec.extend(s.probabilities.iter().map(|p| format!("{p:e}")));
        rec.push(pred.classes[s.predicted].clone());
        rec.push(pred.classes[s.truth].clone());
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| TrajkitError::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Prediction> {
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let bad_header = |msg: &str| TrajkitError::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: msg.to_string(),
    };
    if header.len() < 7 || &header[0] != "video_id" || &header[header.len() - 1] != "true" {
        return Err(bad_header(
            "expected video_id,person_id,start_frame,p_1..p_C,pred,true",
        ));
    }
    let c = header.len() - 5;
    if c != CRIME_CLASSES.len() && c != ClassLabel::COUNT {
        return Err(bad_header(&format!(
            "{c} probability columns; expected 13 or 14"
        )));
    }
    let classes: Vec<String> = (0..c)
        .map(|i| {
            ClassLabel::from_index(i)
                .expect("in range")
                .name()
                .to_string()
        })
        .collect();
    let mut segments = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| TrajkitError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let class = |s: &str| -> Result<usize> {
            let i = s
                .parse::<ClassLabel>()
                .map_err(|e| bad(e.to_string()))?
                .index();
            if i >= c {
                return Err(bad(format!("class `{s}` outside the {c}-class vocabulary")));
            }
            Ok(i)
        };
        let probabilities = (3..3 + c)
            .map(|j| {
                rec[j]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("invalid probability `{}`", &rec[j])))
            })
            .collect::<Result<Vec<f64>>>()?;
        segments.push(SegmentPrediction {
            source: SegmentRef {
                video_id: rec[0].to_string(),
                person_id: rec[1].to_string(),
                start_frame: rec[2]
                    .parse()
                    .map_err(|_| bad(format!("invalid start frame `{}`", &rec[2])))?,
            },
            probabilities,
            predicted: class(&rec[3 + c])?,
            truth: class(&rec[4 + c])?,
        });
    }
    if segments.is_empty() {
        return Err(TrajkitError::InvalidArgument(format!(
            "{}: no predictions",
            path.display()
        )));
    }
    Prediction::from_segments(classes, segments)
}
