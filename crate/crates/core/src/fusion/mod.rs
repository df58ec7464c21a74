//! Feature pyramids and polar-aligned BEV cross-attention fusion.

mod attention;
mod bev;
mod fuse;
mod params;
mod pyramid;

pub use attention::{
    attend, attend_backward, cross_attention, cross_attention_backward, softmax_rows, AttentionCache, AttentionParams,
};
pub use bev::{
    azimuth_bin_sine, azimuth_to_column, encode2, image_row_encoding, init_bev, init_bev_backward, radar_row_encoding,
    ring_coordinate, sinusoid, BevParams, BevStage, CameraCalib, PolarBevGrid,
};
pub use fuse::{
    fuse_image_columns, fuse_image_columns_backward, fuse_radar_rows, fuse_radar_rows_backward, grouped_attention,
    grouped_attention_backward, Group, GroupedCache, PassCache,
};
pub use params::{
    decode_checkpoint, encode_checkpoint, flatten, glorot, join, load_checkpoint, param_count, param_names,
    save_checkpoint, unflatten, zeros_like, Linear, Parameters, PARAM_MAGIC,
};
pub use pyramid::{
    extract_image_pyramid, extract_radar_pyramid, image_pyramid_backward, radar_pyramid_backward, FusionConfig,
    ImageFeatureMap, ImagePyramidCache, ImagePyramidParams, RadarFeatureMap, RadarPyramidCache, RadarPyramidParams,
};

use ndarray::{Array2, Array3};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Every learnable tensor of the fusion stage.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub image: ImagePyramidParams,
    pub radar: RadarPyramidParams,
    pub bev: BevParams,
    pub image_pass: Vec<AttentionParams>,
    pub radar_pass: Vec<AttentionParams>,
}

impl FusionParams {
    pub fn init(cfg: &FusionConfig, rng: &mut ChaCha8Rng) -> Self {
        Self {
            image: ImagePyramidParams::init(cfg, rng),
            radar: RadarPyramidParams::init(cfg, rng),
            bev: BevParams::init(cfg, rng),
            image_pass: (0..cfg.levels)
                .map(|_| AttentionParams::init(cfg.channels, cfg.heads, rng))
                .collect(),
            radar_pass: (0..cfg.levels)
                .map(|_| AttentionParams::init(cfg.channels, cfg.heads, rng))
                .collect(),
        }
    }
}

impl Parameters for FusionParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.image.visit(&join(prefix, "image"), f);
        self.radar.visit(&join(prefix, "radar"), f);
        self.bev.visit(&join(prefix, "bev"), f);
        self.image_pass.visit(&join(prefix, "image_pass"), f);
        self.radar_pass.visit(&join(prefix, "radar_pass"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.image.visit_mut(&join(prefix, "image"), f);
        self.radar.visit_mut(&join(prefix, "radar"), f);
        self.bev.visit_mut(&join(prefix, "bev"), f);
        self.image_pass.visit_mut(&join(prefix, "image_pass"), f);
        self.radar_pass.visit_mut(&join(prefix, "radar_pass"), f);
    }
}

/// Sensor inputs of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput {
    /// `(height, width, 3)` in `[0, 1]`.
    pub rgb: Array3<f64>,
    /// `(height, width, 3)` depth replicated over channels, normalized.
    pub depth3: Array3<f64>,
    /// `(range rows, azimuth columns)` log-compressed, normalized.
    pub ra: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct FusionCache {
    image: ImagePyramidCache,
    radar: RadarPyramidCache,
    image_dims: Vec<(usize, usize, usize)>,
    radar_dims: Vec<(usize, usize, usize)>,
    image_pass: PassCache,
    radar_pass: PassCache,
}

/// Pyramids, BEV initialization and both attention passes.
pub fn fusion_forward(
    cfg: &FusionConfig,
    calib: &CameraCalib,
    r_max_m: f64,
    p: &FusionParams,
    input: &FusionInput,
) -> Result<(PolarBevGrid, FusionCache)> {
    cfg.validate()?;
    calib.validate()?;
    let (img, image) = extract_image_pyramid(input.rgb.view(), input.depth3.view(), &p.image)?;
    let (rad, radar) = extract_radar_pyramid(input.ra.view(), &p.radar)?;
    let bev = init_bev(cfg, r_max_m, &p.bev)?;
    let (bev, image_pass) = fuse_image_columns(&bev, &img, calib, &p.image_pass)?;
    let (bev, radar_pass) = fuse_radar_rows(&bev, &rad, &p.radar_pass, cfg.ra_col_stride)?;
    let cache = FusionCache {
        image,
        radar,
        image_dims: img.levels.iter().map(|l| l.dim()).collect(),
        radar_dims: rad.levels.iter().map(|l| l.dim()).collect(),
        image_pass,
        radar_pass,
    };
    Ok((bev, cache))
}

/// Accumulates gradients of every fusion parameter from `dL/dBEV`.
pub fn fusion_backward(cache: &FusionCache, p: &FusionParams, dbev: &[Array3<f64>], grad: &mut FusionParams) {
    let (d_mid, drad) = fuse_radar_rows_backward(
        &cache.radar_pass,
        &p.radar_pass,
        dbev,
        &mut grad.radar_pass,
        &cache.radar_dims,
    );
    radar_pyramid_backward(&cache.radar, &p.radar, &drad, &mut grad.radar);
    let (d_init, dimg) = fuse_image_columns_backward(
        &cache.image_pass,
        &p.image_pass,
        &d_mid,
        &mut grad.image_pass,
        &cache.image_dims,
    );
    image_pyramid_backward(&cache.image, &p.image, &dimg, &mut grad.image);
    init_bev_backward(&d_init, &mut grad.bev);
}
