//! Hungarian-matched set loss: focal classification plus L1 on box codes.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::boxes::Box3D;
use super::heads::{encode_box, sigmoid, HeadOutputs, BOX_CODE_LEN};
use super::hungarian::{hungarian_match, Assignment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    pub w_cls: f64,
    pub w_box: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            w_cls: 1.0,
            w_box: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_alpha > 0.0 && self.focal_alpha < 1.0) {
            return Err(Error::Config("focal alpha must lie in (0, 1)".into()));
        }
        if [self.focal_gamma, self.w_cls, self.w_box]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::Config("focal gamma and loss weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Focal loss of one logit and its derivative with respect to the logit.
pub fn focal(logit: f64, positive: bool, alpha: f64, gamma: f64) -> (f64, f64) {
    let p = sigmoid(logit);
    if positive {
        let log_p = -softplus(-logit);
        let q = 1.0 - p;
        let qg = q.powf(gamma);
        (-alpha * qg * log_p, alpha * qg * (gamma * p * log_p - q))
    } else {
        let log_q = -softplus(logit);
        let pg = p.powf(gamma);
        (
            -(1.0 - alpha) * pg * log_q,
            (1.0 - alpha) * pg * (p - gamma * (1.0 - p) * log_q),
        )
    }
}

fn l1(a: ndarray::ArrayView1<f64>, b: &[f64; BOX_CODE_LEN]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `w_cls (1 - score) + w_box L1(code, gt code)` for every (prediction, gt).
pub fn matching_cost(out: &HeadOutputs, gts: &[Box3D], w: &LossWeights) -> Array2<f64> {
    let codes: Vec<_> = gts.iter().map(encode_box).collect();
    let scores = out.scores();
    Array2::from_shape_fn((out.len(), gts.len()), |(i, g)| {
        w.w_cls * (1.0 - scores[i]) + w.w_box * l1(out.boxes.row(i), &codes[g])
    })
}

/// Loss value, its parts and gradients with respect to the head outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SetLoss {
    pub loss: f64,
    pub cls_loss: f64,
    pub box_loss: f64,
    pub assignment: Assignment,
    pub d_logits: Array1<f64>,
    pub d_boxes: Array2<f64>,
}

/// Loss under a given matching.
pub fn set_loss_with_assignment(
    out: &HeadOutputs,
    gts: &[Box3D],
    w: &LossWeights,
    assignment: Assignment,
) -> Result<SetLoss> {
    w.validate()?;
    if out.logits.iter().chain(out.boxes.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("head outputs"));
    }
    let n = out.len();
    let mut positive = vec![false; n];
    for &(pr, _) in &assignment.pairs {
        positive[pr] = true;
    }
    let mut d_logits = Array1::zeros(n);
    let mut cls_loss = 0.0;
    for i in 0..n {
        let (l, d) = focal(out.logits[i], positive[i], w.focal_alpha, w.focal_gamma);
        cls_loss += l;
        d_logits[i] = d;
    }
    let mut d_boxes = Array2::zeros((n, BOX_CODE_LEN));
    let mut box_loss = 0.0;
    for &(pr, g) in &assignment.pairs {
        let code = encode_box(&gts[g]);
        for k in 0..BOX_CODE_LEN {
            let diff = out.boxes[[pr, k]] - code[k];
            box_loss += diff.abs();
            d_boxes[[pr, k]] = w.w_box
                * if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
        }
    }
    Ok(SetLoss {
        loss: cls_loss + w.w_box * box_loss,
        cls_loss,
        box_loss,
        assignment,
        d_logits,
        d_boxes,
    })
}

/// Matches predictions to ground truth, then sums focal loss over all
/// queries and weighted L1 over matched box codes.
pub fn set_loss(out: &HeadOutputs, gts: &[Box3D], w: &LossWeights) -> Result<SetLoss> {
    w.validate()?;
    if out.logits.iter().chain(out.boxes.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("head outputs"));
    }
    let assignment = hungarian_match(&matching_cost(out, gts, w))?;
    set_loss_with_assignment(out, gts, w, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[test]
    fn focal_reduces_to_half_bce() {
        for &z in &[-3.0, -0.2, 0.0, 0.7, 4.0] {
            let p = sigmoid(z);
            let (lp, _) = focal(z, true, 0.5, 0.0);
            let (ln, _) = focal(z, false, 0.5, 0.0);
            assert!((lp - 0.5 * -p.ln()).abs() < 1e-12);
            assert!((ln - 0.5 * -(1.0 - p).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn focal_gradient_matches_difference() {
        for &pos in &[true, false] {
            for &z in &[-2.5, -0.3, 0.0, 1.1, 3.0] {
                let h = 1e-6;
                let fd = (focal(z + h, pos, 0.25, 2.0).0 - focal(z - h, pos, 0.25, 2.0).0) / (2.0 * h);
                let an = focal(z, pos, 0.25, 2.0).1;
                assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{pos} {z}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn focal_nonnegative_and_stable() {
        for &z in &[-1000.0, -10.0, 0.0, 10.0, 1000.0] {
            for &pos in &[true, false] {
                let (l, d) = focal(z, pos, 0.25, 2.0);
                assert!(l >= 0.0 && l.is_finite() && d.is_finite());
            }
        }
    }

    #[test]
    fn perfect_prediction_loss_vanishes() {
        let gt = Box3D::new([10.0, 2.0, -0.3], [4.2, 1.8, 1.5], 0.4).unwrap();
        let code = Array1::from(encode_box(&gt).to_vec());
        let mut last = f64::INFINITY;
        for &z in &[4.0, 8.0, 16.0] {
            let mut boxes = Array2::zeros((3, BOX_CODE_LEN));
            boxes.row_mut(1).assign(&code);
            let out = HeadOutputs {
                logits: array![-z, z, -z],
                boxes,
            };
            let l = set_loss(&out, &[gt], &LossWeights::default()).unwrap();
            assert_eq!(l.assignment.pairs, vec![(1, 0)]);
            assert!(l.loss < last);
            last = l.loss;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn no_ground_truth_is_background_only() {
        let out = HeadOutputs {
            logits: array![0.0, 1.0],
            boxes: Array2::zeros((2, BOX_CODE_LEN)),
        };
        let l = set_loss(&out, &[], &LossWeights::default()).unwrap();
        assert_eq!(l.box_loss, 0.0);
        let expect = focal(0.0, false, 0.25, 2.0).0 + focal(1.0, false, 0.25, 2.0).0;
        assert!((l.loss - expect).abs() < 1e-15);
    }
}
