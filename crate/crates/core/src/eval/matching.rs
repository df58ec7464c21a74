use serde::{Deserialize, Serialize};

use super::iou::{iou_3d, rotated_iou_bev};
use crate::detect::{Box3D, Detection};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IouKind {
    #[default]
    Bev,
    #[serde(rename = "3d")]
    ThreeD,
}

impl IouKind {
    pub fn iou(self, a: &Box3D, b: &Box3D) -> Result<f64> {
        match self {
            IouKind::Bev => rotated_iou_bev(a, b),
            IouKind::ThreeD => iou_3d(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    /// `(detection index, gt index, iou)`, in score order.
    pub true_positives: Vec<(usize, usize, f64)>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
}

/// Greedy matching in descending score order: each detection takes the
/// still-free ground truth it overlaps most, and counts as a true positive
/// when that overlap reaches `threshold`. Equal scores keep input order.
pub fn match_detections(dets: &[Detection], gts: &[Box3D], threshold: f64, kind: IouKind) -> Result<MatchResult> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[j].score.total_cmp(&dets[i].score).then(i.cmp(&j)));
    let mut taken = vec![false; gts.len()];
    let mut out = MatchResult::default();
    for i in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let iou = kind.iou(&dets[i].bbox, gt)?;
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        match best {
            Some((g, iou)) if iou >= threshold => {
                taken[g] = true;
                out.true_positives.push((i, g, iou));
            }
            _ => out.false_positives.push(i),
        }
    }
    out.false_negatives = (0..gts.len()).filter(|&g| !taken[g]).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(score: f64, b: Box3D) -> Detection {
        Detection {
            frame_id: 0,
            class_id: 0,
            score,
            bbox: b,
        }
    }

    fn car(x: f64) -> Box3D {
        Box3D::new([x, 0.0, 0.0], [4.0, 2.0, 1.5], 0.0).unwrap()
    }

    #[test]
    fn no_detections_all_missed() {
        let m = match_detections(&[], &[car(0.0), car(10.0)], 0.5, IouKind::Bev).unwrap();
        assert!(m.true_positives.is_empty() && m.false_positives.is_empty());
        assert_eq!(m.false_negatives, vec![0, 1]);
    }

    #[test]
    fn exact_detection_is_tp() {
        let m = match_detections(&[det(0.7, car(5.0))], &[car(5.0)], 0.7, IouKind::ThreeD).unwrap();
        assert_eq!(m.true_positives, vec![(0, 0, 1.0)]);
        assert!(m.false_positives.is_empty() && m.false_negatives.is_empty());
    }

    #[test]
    fn duplicate_detection_loses_to_higher_score() {
        let dets = [det(0.8, car(5.1)), det(0.9, car(5.2))];
        let m = match_detections(&dets, &[car(5.0)], 0.5, IouKind::Bev).unwrap();
        assert_eq!(m.true_positives.len(), 1);
        assert_eq!(m.true_positives[0].0, 1);
        assert_eq!(m.false_positives, vec![0]);
    }
}
