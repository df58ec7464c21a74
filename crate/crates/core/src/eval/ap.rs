use serde::{Deserialize, Serialize};

use super::matching::{match_detections, IouKind};
use crate::detect::{Box3D, Detection};
use crate::error::{Error, Result};

/// Recall sampling used for interpolated precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// `recall_points` levels at `1/N, 2/N, ..., 1` (KITTI R40 with `N = 40`).
    #[default]
    Recall,
    /// Eleven levels at `0, 0.1, ..., 1`; `recall_points` is ignored.
    ElevenPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub iou_kind: IouKind,
    pub recall_points: usize,
    pub interpolation: Interpolation,
    /// Detections scoring below this are dropped before matching.
    pub score_floor: f64,
    /// IoU threshold used to pair boxes for ATE/ASE/AOE.
    pub tp_error_threshold: f64,
    /// Measure ATE in the ground plane only.
    pub planar_translation: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.3, 0.5, 0.7],
            iou_kind: IouKind::Bev,
            recall_points: 40,
            interpolation: Interpolation::Recall,
            score_floor: 0.0,
            tp_error_threshold: 0.3,
            planar_translation: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::Config("iou thresholds must lie in (0, 1)".into()));
        }
        if self.iou_thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("iou thresholds must be sorted ascending".into()));
        }
        if self.recall_points == 0 {
            return Err(Error::Config("recall_points must be positive".into()));
        }
        if !self.score_floor.is_finite() {
            return Err(Error::NonFinite("score_floor"));
        }
        Ok(())
    }

    fn recall_levels(&self) -> Vec<f64> {
        match self.interpolation {
            Interpolation::Recall => {
                let n = self.recall_points;
                (1..=n).map(|i| i as f64 / n as f64).collect()
            }
            Interpolation::ElevenPoint => (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

/// One frame's detections and ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalFrame {
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<Box3D>,
}

/// AP in percent at a single threshold, pooled over frames.
/// Returns `None` when there is no ground truth at all.
pub fn average_precision_at(
    frames: &[EvalFrame],
    threshold: f64,
    kind: IouKind,
    cfg: &EvalConfig,
) -> Result<Option<f64>> {
    let n_gt: usize = frames.iter().map(|f| f.ground_truth.len()).sum();
    if n_gt == 0 {
        return Ok(None);
    }
    let mut ranked: Vec<(f64, bool)> = Vec::new();
    for frame in frames {
        let kept: Vec<Detection> = frame
            .detections
            .iter()
            .filter(|d| d.score >= cfg.score_floor)
            .copied()
            .collect();
        let m = match_detections(&kept, &frame.ground_truth, threshold, kind)?;
        ranked.extend(m.true_positives.iter().map(|&(i, _, _)| (kept[i].score, true)));
        ranked.extend(m.false_positives.iter().map(|&i| (kept[i].score, false)));
    }
    // stable sort keeps per-frame order among equal scores
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut curve = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, &(_, hit)) in ranked.iter().enumerate() {
        tp += hit as usize;
        curve.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    // running max from the right gives max precision at recall >= r
    let mut best = vec![0.0; curve.len()];
    let mut acc: f64 = 0.0;
    for i in (0..curve.len()).rev() {
        acc = acc.max(curve[i].1);
        best[i] = acc;
    }
    let levels = cfg.recall_levels();
    let mut sum = 0.0;
    for &r in &levels {
        if let Some(i) = curve.iter().position(|&(rec, _)| rec >= r) {
            sum += best[i];
        }
    }
    Ok(Some(100.0 * sum / levels.len() as f64))
}

/// AP at each configured threshold, using the configured IoU kind.
pub fn average_precision(frames: &[EvalFrame], cfg: &EvalConfig) -> Result<Vec<Option<f64>>> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::Empty("evaluation frames"));
    }
    cfg.iou_thresholds
        .iter()
        .map(|&t| average_precision_at(frames, t, cfg.iou_kind, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(x: f64) -> Box3D {
        Box3D::new([x, 5.0, 0.0], [4.0, 2.0, 1.5], 0.1).unwrap()
    }

    fn det(score: f64, b: Box3D) -> Detection {
        Detection {
            frame_id: 0,
            class_id: 0,
            score,
            bbox: b,
        }
    }

    #[test]
    fn perfect_detection_scores_100() {
        let f = EvalFrame {
            detections: vec![det(0.9, car(10.0))],
            ground_truth: vec![car(10.0)],
        };
        let ap = average_precision(&[f], &EvalConfig::default()).unwrap();
        assert_eq!(ap, vec![Some(100.0); 3]);
    }

    #[test]
    fn false_positive_ranked_first_halves_ap() {
        let f = EvalFrame {
            detections: vec![det(0.9, car(30.0)), det(0.8, car(10.0))],
            ground_truth: vec![car(10.0)],
        };
        let ap = average_precision(&[f], &EvalConfig::default()).unwrap();
        assert_eq!(ap, vec![Some(50.0); 3]);
    }

    #[test]
    fn no_ground_truth_is_absent() {
        let f = EvalFrame {
            detections: vec![det(0.9, car(30.0))],
            ground_truth: vec![],
        };
        assert_eq!(average_precision(&[f], &EvalConfig::default()).unwrap(), vec![None; 3]);
    }

    #[test]
    fn eleven_point_mode() {
        let f = EvalFrame {
            detections: vec![det(0.9, car(10.0))],
            ground_truth: vec![car(10.0), car(40.0)],
        };
        let cfg = EvalConfig {
            interpolation: Interpolation::ElevenPoint,
            ..EvalConfig::default()
        };
        // precision 1 up to recall 0.5: levels 0..=0.5 are six of eleven
        let ap = average_precision(&[f], &cfg).unwrap()[0].unwrap();
        assert!((ap - 600.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn unsorted_thresholds_rejected() {
        let cfg = EvalConfig {
            iou_thresholds: vec![0.5, 0.3],
            ..EvalConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
