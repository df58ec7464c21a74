use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ap::{average_precision_at, EvalConfig, EvalFrame};
use super::errors::{tp_errors, TpErrors};
use super::matching::{match_detections, IouKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApEntry {
    pub iou_threshold: f64,
    /// Absent when the evaluation set has no ground truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_percent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_frames: usize,
    pub bev_ap: Vec<ApEntry>,
    pub ap_3d: Vec<ApEntry>,
    /// Counts and errors at the TP-error matching threshold.
    pub counts: Counts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tp_errors: Option<TpErrors>,
}

impl EvalReport {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_toml()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// AP at `threshold` from the table of the configured IoU kind.
    pub fn ap(&self, kind: IouKind, threshold: f64) -> Option<f64> {
        let table = match kind {
            IouKind::Bev => &self.bev_ap,
            IouKind::ThreeD => &self.ap_3d,
        };
        table
            .iter()
            .find(|e| e.iou_threshold == threshold)
            .and_then(|e| e.ap_percent)
    }
}

/// BEV and 3D AP at every threshold plus matched-pair errors.
pub fn evaluate(frames: &[EvalFrame], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::Empty("evaluation frames"));
    }
    let table = |kind| -> Result<Vec<ApEntry>> {
        cfg.iou_thresholds
            .iter()
            .map(|&t| {
                Ok(ApEntry {
                    iou_threshold: t,
                    ap_percent: average_precision_at(frames, t, kind, cfg)?,
                })
            })
            .collect()
    };
    let bev_ap = table(IouKind::Bev)?;
    let ap_3d = table(IouKind::ThreeD)?;

    let mut counts = Counts::default();
    let mut pairs = Vec::new();
    for f in frames {
        let kept: Vec<_> = f
            .detections
            .iter()
            .filter(|d| d.score >= cfg.score_floor)
            .copied()
            .collect();
        let m = match_detections(&kept, &f.ground_truth, cfg.tp_error_threshold, cfg.iou_kind)?;
        counts.true_positives += m.true_positives.len();
        counts.false_positives += m.false_positives.len();
        counts.false_negatives += m.false_negatives.len();
        pairs.extend(
            m.true_positives
                .iter()
                .map(|&(d, g, _)| (kept[d].bbox, f.ground_truth[g])),
        );
    }
    let tp_errors = if pairs.is_empty() {
        None
    } else {
        Some(tp_errors(&pairs, cfg.planar_translation)?)
    };
    Ok(EvalReport {
        n_frames: frames.len(),
        bev_ap,
        ap_3d,
        counts,
        tp_errors,
    })
}
