//! Object-query decoder over the flattened multi-level BEV features.

use ndarray::{concatenate, Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{
    cross_attention, cross_attention_backward, join, AttentionCache, AttentionParams, BevStage, Linear, Parameters,
    PolarBevGrid,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub n_layers: usize,
    pub n_queries: usize,
    pub ffn_hidden: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            n_layers: 3,
            n_queries: 20,
            ffn_hidden: 64,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_queries == 0 || self.ffn_hidden == 0 {
            return Err(Error::Config("decoder needs queries and a hidden width".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer {
    pub attn: AttentionParams,
    pub ffn1: Linear,
    pub ffn2: Linear,
}

impl Parameters for DecoderLayer {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.attn.visit(&join(prefix, "attn"), f);
        self.ffn1.visit(&join(prefix, "ffn1"), f);
        self.ffn2.visit(&join(prefix, "ffn2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.attn.visit_mut(&join(prefix, "attn"), f);
        self.ffn1.visit_mut(&join(prefix, "ffn1"), f);
        self.ffn2.visit_mut(&join(prefix, "ffn2"), f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// Learnable object query embeddings `(n_queries, C)`.
    pub queries: Array2<f64>,
    pub layers: Vec<DecoderLayer>,
}

impl DecoderParams {
    pub fn init(cfg: &DecoderConfig, channels: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            queries: Array2::from_shape_fn((cfg.n_queries, channels), |_| rng.random_range(-1.0..1.0)),
            layers: (0..cfg.n_layers)
                .map(|_| DecoderLayer {
                    attn: AttentionParams::init(channels, heads, rng),
                    ffn1: Linear::init(channels, cfg.ffn_hidden, rng),
                    ffn2: Linear::init(cfg.ffn_hidden, channels, rng),
                })
                .collect(),
        }
    }
}

impl Parameters for DecoderParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.queries.visit(&join(prefix, "queries"), f);
        self.layers.visit(&join(prefix, "layers"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.queries.visit_mut(&join(prefix, "queries"), f);
        self.layers.visit_mut(&join(prefix, "layers"), f);
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    attn: AttentionCache,
    update: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct DecoderCache {
    layers: Vec<LayerCache>,
    level_dims: Vec<(usize, usize, usize)>,
}

/// All BEV cells of every level stacked into one `(cells, C)` memory.
pub fn flatten_bev(bev: &PolarBevGrid) -> Result<Array2<f64>> {
    if bev.levels.is_empty() || bev.levels.iter().any(|l| l.is_empty()) {
        return Err(Error::Empty("BEV levels"));
    }
    let views: Vec<_> = bev
        .levels
        .iter()
        .map(|l| {
            let c = l.dim().2;
            l.view()
                .into_shape_with_order((l.len() / c, c))
                .expect("contiguous BEV")
        })
        .collect();
    Ok(concatenate(Axis(0), &views).expect("equal channel counts"))
}

/// Runs the decoder layers. Each layer is
/// `x1 = CrossAttention(x, M, M)`, `x2 = x1 + FFN(x1 - x)`, so the feed-forward
/// block refines the attention update and all-zero memory with zero biases
/// leaves the queries untouched.
pub fn decode_objects(
    bev: &PolarBevGrid,
    cfg: &DecoderConfig,
    p: &DecoderParams,
) -> Result<(Array2<f64>, DecoderCache)> {
    cfg.validate()?;
    bev.require(BevStage::RadarFused)?;
    let memory = flatten_bev(bev)?;
    let mut x = p.queries.clone();
    let mut layers = Vec::with_capacity(p.layers.len());
    for layer in &p.layers {
        let (x1, attn) = cross_attention(x.view(), memory.view(), memory.view(), &layer.attn)?;
        let update = &x1 - &x;
        let pre = layer.ffn1.forward(update.view());
        let hidden = pre.mapv(|v| v.max(0.0));
        x = x1 + layer.ffn2.forward(hidden.view());
        layers.push(LayerCache {
            attn,
            update,
            pre,
            hidden,
        });
    }
    let cache = DecoderCache {
        layers,
        level_dims: bev.levels.iter().map(|l| l.dim()).collect(),
    };
    Ok((x, cache))
}

/// Accumulates decoder gradients; returns `dL/dBEV` per level.
pub fn decode_objects_backward(
    cache: &DecoderCache,
    p: &DecoderParams,
    demb: ArrayView2<f64>,
    grad: &mut DecoderParams,
) -> Vec<Array3<f64>> {
    let n_cells: usize = cache.level_dims.iter().map(|d| d.0 * d.1).sum();
    let c = demb.ncols();
    let mut dmem = Array2::<f64>::zeros((n_cells, c));
    let mut dx = demb.to_owned();
    for (k, (layer, lc)) in p.layers.iter().zip(&cache.layers).enumerate().rev() {
        let g = &mut grad.layers[k];
        let dhidden = layer.ffn2.backward(lc.hidden.view(), dx.view(), &mut g.ffn2);
        let mut dpre = dhidden;
        dpre.zip_mut_with(&lc.pre, |d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
        let dupdate = layer.ffn1.backward(lc.update.view(), dpre.view(), &mut g.ffn1);
        let dx1 = &dx + &dupdate;
        let (dq, dk, dv) = cross_attention_backward(&lc.attn, &layer.attn, dx1.view(), &mut g.attn);
        dmem += &dk;
        dmem += &dv;
        dx = dq - &dupdate;
    }
    grad.queries += &dx;
    let mut out = Vec::new();
    let mut at = 0;
    for &(r, a, ch) in &cache.level_dims {
        let block = dmem.slice(ndarray::s![at..at + r * a, ..]).to_owned();
        out.push(block.into_shape_with_order((r, a, ch)).expect("contiguous"));
        at += r * a;
    }
    out
}
