//! End-to-end network: fusion, decoder and heads with a joint backward pass.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::boxes::Box3D;
use super::decoder::{decode_objects, decode_objects_backward, DecoderCache, DecoderConfig, DecoderParams};
use super::heads::{head_backward, head_forward, HeadOutputs, HeadParams};
use super::hungarian::Assignment;
use super::loss::{set_loss, set_loss_with_assignment, LossWeights, SetLoss};
use crate::error::Result;
use crate::fusion::{
    fusion_backward, fusion_forward, join, zeros_like, CameraCalib, FusionCache, FusionConfig, FusionInput,
    FusionParams, Parameters,
};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub fusion: FusionConfig,
    pub decoder: DecoderConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.fusion.validate()?;
        self.decoder.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub fusion: FusionParams,
    pub decoder: DecoderParams,
    pub heads: HeadParams,
}

impl ModelParams {
    /// Seeded initialization; biases start at zero.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = cfg.fusion.channels;
        Self {
            fusion: FusionParams::init(&cfg.fusion, &mut rng),
            decoder: DecoderParams::init(&cfg.decoder, c, cfg.fusion.heads, &mut rng),
            heads: HeadParams::init(c, &mut rng),
        }
    }
}

impl Parameters for ModelParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.fusion.visit(&join(prefix, "fusion"), f);
        self.decoder.visit(&join(prefix, "decoder"), f);
        self.heads.visit(&join(prefix, "heads"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.fusion.visit_mut(&join(prefix, "fusion"), f);
        self.decoder.visit_mut(&join(prefix, "decoder"), f);
        self.heads.visit_mut(&join(prefix, "heads"), f);
    }
}

/// Fixed context of a model evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelContext {
    pub config: ModelConfig,
    pub calib: CameraCalib,
    /// BEV range extent; equals the range covered by the radar map rows.
    pub r_max_m: f64,
}

#[derive(Debug, Clone)]
pub struct ModelCache {
    fusion: FusionCache,
    decoder: DecoderCache,
    embeddings: Array2<f64>,
}

pub fn model_forward(ctx: &ModelContext, p: &ModelParams, input: &FusionInput) -> Result<(HeadOutputs, ModelCache)> {
    ctx.config.validate()?;
    let (bev, fusion) = fusion_forward(&ctx.config.fusion, &ctx.calib, ctx.r_max_m, &p.fusion, input)?;
    let (embeddings, decoder) = decode_objects(&bev, &ctx.config.decoder, &p.decoder)?;
    let out = head_forward(embeddings.view(), &p.heads)?;
    Ok((
        out,
        ModelCache {
            fusion,
            decoder,
            embeddings,
        },
    ))
}

/// Accumulates gradients of every parameter given gradients of the head outputs.
pub fn model_backward(cache: &ModelCache, p: &ModelParams, loss: &SetLoss, grad: &mut ModelParams) {
    let demb = head_backward(
        cache.embeddings.view(),
        &p.heads,
        loss.d_logits.view(),
        loss.d_boxes.view(),
        &mut grad.heads,
    );
    let dbev = decode_objects_backward(&cache.decoder, &p.decoder, demb.view(), &mut grad.decoder);
    fusion_backward(&cache.fusion, &p.fusion, &dbev, &mut grad.fusion);
}

/// Set loss of one frame and the gradient of every parameter. With
/// `assignment` given, matching is frozen to it.
pub fn loss_and_grad(
    ctx: &ModelContext,
    p: &ModelParams,
    input: &FusionInput,
    gts: &[Box3D],
    weights: &LossWeights,
    assignment: Option<Assignment>,
) -> Result<(SetLoss, ModelParams)> {
    let (out, cache) = model_forward(ctx, p, input)?;
    let loss = match assignment {
        Some(a) => set_loss_with_assignment(&out, gts, weights, a)?,
        None => set_loss(&out, gts, weights)?,
    };
    let mut grad = zeros_like(p);
    model_backward(&cache, p, &loss, &mut grad);
    Ok((loss, grad))
}
