//! Classification and box-regression heads and the box target encoding.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_chacha::ChaCha8Rng;

use super::boxes::{Box3D, Detection, SEDAN_CLASS};
use crate::error::{Error, Result};
use crate::fusion::{join, Linear, Parameters};

/// Width of the regression output.
pub const BOX_CODE_LEN: usize = 8;
/// Horizontal positions are regressed in units of this many meters.
pub const POSITION_SCALE_M: f64 = 10.0;

/// `(x/s, y/s, z, ln l, ln w, ln h, sin φ, cos φ)`.
pub fn encode_box(b: &Box3D) -> [f64; BOX_CODE_LEN] {
    [
        b.x / POSITION_SCALE_M,
        b.y / POSITION_SCALE_M,
        b.z,
        b.l.ln(),
        b.w.ln(),
        b.h.ln(),
        b.yaw.sin(),
        b.yaw.cos(),
    ]
}

/// Inverse of [`encode_box`]; yaw is `atan2` of the last two entries,
/// which is 0 when both vanish.
pub fn decode_box(code: ArrayView1<f64>) -> Result<Box3D> {
    if code.len() != BOX_CODE_LEN {
        return Err(Error::Shape(format!("box code has {} entries", code.len())));
    }
    if code.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("box code"));
    }
    Box3D::new(
        [code[0] * POSITION_SCALE_M, code[1] * POSITION_SCALE_M, code[2]],
        [code[3].exp(), code[4].exp(), code[5].exp()],
        code[6].atan2(code[7]),
    )
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub cls: Linear,
    pub reg: Linear,
}

impl HeadParams {
    pub fn init(channels: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            cls: Linear::init(channels, 1, rng),
            reg: Linear::init(channels, BOX_CODE_LEN, rng),
        }
    }
}

impl Parameters for HeadParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.cls.visit(&join(prefix, "cls"), f);
        self.reg.visit(&join(prefix, "reg"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.cls.visit_mut(&join(prefix, "cls"), f);
        self.reg.visit_mut(&join(prefix, "reg"), f);
    }
}

/// Raw head outputs per query.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs {
    pub logits: Array1<f64>,
    /// `(n_queries, BOX_CODE_LEN)` box codes.
    pub boxes: Array2<f64>,
}

impl HeadOutputs {
    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn scores(&self) -> Array1<f64> {
        self.logits.mapv(sigmoid)
    }
}

pub fn head_forward(emb: ArrayView2<f64>, p: &HeadParams) -> Result<HeadOutputs> {
    if emb.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("object embeddings"));
    }
    let logits = p.cls.forward(emb).column(0).to_owned();
    Ok(HeadOutputs {
        logits,
        boxes: p.reg.forward(emb),
    })
}

/// Accumulates head gradients; returns `dL/dembeddings`.
pub fn head_backward(
    emb: ArrayView2<f64>,
    p: &HeadParams,
    dlogits: ArrayView1<f64>,
    dboxes: ArrayView2<f64>,
    grad: &mut HeadParams,
) -> Array2<f64> {
    let dl = dlogits.to_owned().insert_axis(ndarray::Axis(1));
    p.cls.backward(emb, dl.view(), &mut grad.cls) + p.reg.backward(emb, dboxes, &mut grad.reg)
}

/// Scored boxes for every query.
pub fn outputs_to_detections(out: &HeadOutputs, frame_id: u64) -> Result<Vec<Detection>> {
    (0..out.len())
        .map(|i| {
            Ok(Detection {
                frame_id,
                class_id: SEDAN_CLASS,
                score: sigmoid(out.logits[i]),
                bbox: decode_box(out.boxes.row(i))?,
            })
        })
        .collect()
}

/// Classification and regression heads applied to object embeddings.
pub fn predict_heads(emb: ArrayView2<f64>, p: &HeadParams, frame_id: u64) -> Result<Vec<Detection>> {
    outputs_to_detections(&head_forward(emb, p)?, frame_id)
}
