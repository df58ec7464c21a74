//! Patch-embedding feature pyramids for the camera (RGB + depth) and the
//! radar range-azimuth map.

use ndarray::{concatenate, s, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{join, Linear, Parameters};
use crate::error::{Error, Result};

/// Network geometry shared by the pyramids, the BEV grid and the decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub channels: usize,
    pub heads: usize,
    pub levels: usize,
    /// Level-0 BEV ring count; level `l` has `bev_rings >> l`.
    pub bev_rings: usize,
    /// Level-0 BEV azimuth cell count.
    pub bev_azimuths: usize,
    pub bev_phi_max_rad: f64,
    pub image_width: usize,
    pub image_height: usize,
    /// Range bins kept from the range-azimuth map.
    pub ra_rows: usize,
    pub ra_cols: usize,
    /// Level-0 azimuth patch width on the range-azimuth map.
    pub ra_col_stride: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            channels: 32,
            heads: 4,
            levels: 3,
            bev_rings: 64,
            bev_azimuths: 64,
            bev_phi_max_rad: 60f64.to_radians(),
            image_width: 128,
            image_height: 64,
            ra_rows: 128,
            ra_cols: 64,
            ra_col_stride: 4,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let c = self.channels;
        if c == 0 || c % 2 != 0 || self.heads == 0 || c % self.heads != 0 {
            return Err(Error::Config(format!(
                "channels {c} must be even and divisible by heads {}",
                self.heads
            )));
        }
        if self.levels == 0 {
            return Err(Error::Config("at least one pyramid level".into()));
        }
        let top = 1usize << (self.levels - 1);
        if self.bev_rings % top != 0 || self.bev_azimuths % top != 0 || self.bev_rings == 0 || self.bev_azimuths == 0 {
            return Err(Error::Config("BEV grid must halve cleanly at every level".into()));
        }
        let img = self.image_stride(self.levels - 1);
        if self.image_width % img != 0
            || self.image_height % img != 0
            || self.image_width == 0
            || self.image_height == 0
        {
            return Err(Error::Config(format!(
                "image must be a multiple of {img} px on each side"
            )));
        }
        if self.ra_rows % self.bev_rings != 0 || self.ra_rows == 0 {
            return Err(Error::Config(
                "range-azimuth rows must be a multiple of the BEV ring count".into(),
            ));
        }
        let (_, col) = self.radar_stride(self.levels - 1);
        if self.ra_col_stride == 0 || self.ra_cols % col != 0 || self.ra_cols == 0 {
            return Err(Error::Config(format!(
                "range-azimuth columns must be a multiple of {col}"
            )));
        }
        if !(self.bev_phi_max_rad > 0.0 && self.bev_phi_max_rad < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("BEV azimuth extent must lie in (0, π/2)".into()));
        }
        Ok(())
    }

    pub fn image_stride(&self, level: usize) -> usize {
        1 << (level + 2)
    }

    /// `(range rows, azimuth columns)` per radar patch at `level`.
    pub fn radar_stride(&self, level: usize) -> (usize, usize) {
        ((self.ra_rows / self.bev_rings) << level, self.ra_col_stride << level)
    }

    pub fn bev_shape(&self, level: usize) -> (usize, usize) {
        (self.bev_rings >> level, self.bev_azimuths >> level)
    }
}

/// Cuts `(H, W, ch)` into non-overlapping `sr x sc` patches, one flattened
/// patch per output row. Patches are ordered column-major when `col_major`.
fn patchify(x: ArrayView3<f64>, sr: usize, sc: usize, col_major: bool) -> Array2<f64> {
    let (h, w, ch) = x.dim();
    let (pr, pc) = (h / sr, w / sc);
    let mut out = Array2::zeros((pr * pc, sr * sc * ch));
    for py in 0..pr {
        for px in 0..pc {
            let n = if col_major { px * pr + py } else { py * pc + px };
            let patch = x.slice(s![py * sr..(py + 1) * sr, px * sc..(px + 1) * sc, ..]);
            for (dst, &src) in out.row_mut(n).iter_mut().zip(patch.iter()) {
                *dst = src;
            }
        }
    }
    out
}

/// Per-level image features, each `(columns, rows, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatureMap {
    pub levels: Vec<Array3<f64>>,
}

impl ImageFeatureMap {
    pub fn channels(&self) -> usize {
        self.levels.first().map_or(0, |l| l.dim().2)
    }
}

/// Per-level radar features, each `(range rows, azimuth columns, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFeatureMap {
    pub levels: Vec<Array3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePyramidParams {
    pub rgb_embed: Vec<Linear>,
    pub depth_embed: Vec<Linear>,
    pub mix: Vec<Linear>,
}

impl ImagePyramidParams {
    pub fn init(cfg: &FusionConfig, rng: &mut ChaCha8Rng) -> Self {
        let half = cfg.channels / 2;
        let mut p = Self {
            rgb_embed: vec![],
            depth_embed: vec![],
            mix: vec![],
        };
        for l in 0..cfg.levels {
            let k = cfg.image_stride(l).pow(2) * 3;
            p.rgb_embed.push(Linear::init(k, half, rng));
            p.depth_embed.push(Linear::init(k, half, rng));
            p.mix.push(Linear::init(cfg.channels, cfg.channels, rng));
        }
        p
    }
}

impl Parameters for ImagePyramidParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.rgb_embed.visit(&join(prefix, "rgb_embed"), f);
        self.depth_embed.visit(&join(prefix, "depth_embed"), f);
        self.mix.visit(&join(prefix, "mix"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.rgb_embed.visit_mut(&join(prefix, "rgb_embed"), f);
        self.depth_embed.visit_mut(&join(prefix, "depth_embed"), f);
        self.mix.visit_mut(&join(prefix, "mix"), f);
    }
}

#[derive(Debug, Clone)]
pub struct ImagePyramidCache {
    rgb_patches: Vec<Array2<f64>>,
    depth_patches: Vec<Array2<f64>>,
    /// Pre-mix concatenation `[rgb | depth]` per level.
    pub concat: Vec<Array2<f64>>,
}

/// RGB and 3-channel depth images, both `(height, width, 3)`.
pub fn extract_image_pyramid(
    rgb: ArrayView3<f64>,
    depth3: ArrayView3<f64>,
    p: &ImagePyramidParams,
) -> Result<(ImageFeatureMap, ImagePyramidCache)> {
    if rgb.dim() != depth3.dim() {
        return Err(Error::Shape(format!(
            "rgb {:?} and depth {:?} differ",
            rgb.dim(),
            depth3.dim()
        )));
    }
    let (h, w, ch) = rgb.dim();
    if ch != 3 {
        return Err(Error::Shape(format!("expected 3 channels, got {ch}")));
    }
    if rgb.iter().chain(depth3.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("image"));
    }
    let mut levels = Vec::new();
    let mut cache = ImagePyramidCache {
        rgb_patches: vec![],
        depth_patches: vec![],
        concat: vec![],
    };
    for l in 0..p.mix.len() {
        let s = 1usize << (l + 2);
        if h % s != 0 || w % s != 0 || p.rgb_embed[l].n_in() != s * s * 3 {
            return Err(Error::Shape(format!("image {h}x{w} does not tile into {s}-px patches")));
        }
        let pr = patchify(rgb, s, s, true);
        let pd = patchify(depth3, s, s, true);
        let cat = concatenate![
            Axis(1),
            p.rgb_embed[l].forward(pr.view()),
            p.depth_embed[l].forward(pd.view())
        ];
        let feat = p.mix[l].forward(cat.view());
        let c = feat.ncols();
        levels.push(
            feat.into_shape_with_order((w / s, h / s, c))
                .expect("contiguous features"),
        );
        cache.rgb_patches.push(pr);
        cache.depth_patches.push(pd);
        cache.concat.push(cat);
    }
    Ok((ImageFeatureMap { levels }, cache))
}

/// Accumulates parameter gradients from per-level feature gradients.
pub fn image_pyramid_backward(
    cache: &ImagePyramidCache,
    p: &ImagePyramidParams,
    dfeat: &[Array3<f64>],
    grad: &mut ImagePyramidParams,
) {
    for (l, d) in dfeat.iter().enumerate() {
        let c = d.dim().2;
        let d2 = d
            .view()
            .into_shape_with_order((d.len() / c, c))
            .expect("contiguous gradient");
        let dcat = p.mix[l].backward(cache.concat[l].view(), d2, &mut grad.mix[l]);
        let half = c / 2;
        p.rgb_embed[l].accumulate(
            cache.rgb_patches[l].view(),
            dcat.slice(s![.., ..half]),
            &mut grad.rgb_embed[l],
        );
        p.depth_embed[l].accumulate(
            cache.depth_patches[l].view(),
            dcat.slice(s![.., half..]),
            &mut grad.depth_embed[l],
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarPyramidParams {
    pub embed: Vec<Linear>,
    pub mix: Vec<Linear>,
    /// `(range rows, azimuth columns)` per level-0 patch.
    pub stride0: (usize, usize),
}

impl RadarPyramidParams {
    pub fn init(cfg: &FusionConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self {
            embed: vec![],
            mix: vec![],
            stride0: cfg.radar_stride(0),
        };
        for l in 0..cfg.levels {
            let (sr, sc) = cfg.radar_stride(l);
            p.embed.push(Linear::init(sr * sc, cfg.channels, rng));
            p.mix.push(Linear::init(cfg.channels, cfg.channels, rng));
        }
        p
    }
}

impl Parameters for RadarPyramidParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.embed.visit(&join(prefix, "embed"), f);
        self.mix.visit(&join(prefix, "mix"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.embed.visit_mut(&join(prefix, "embed"), f);
        self.mix.visit_mut(&join(prefix, "mix"), f);
    }
}

#[derive(Debug, Clone)]
pub struct RadarPyramidCache {
    patches: Vec<Array2<f64>>,
    pub embedded: Vec<Array2<f64>>,
}

/// Range-azimuth map `(range rows, azimuth columns)` to radar features.
pub fn extract_radar_pyramid(
    ra: ArrayView2<f64>,
    p: &RadarPyramidParams,
) -> Result<(RadarFeatureMap, RadarPyramidCache)> {
    if ra.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("range-azimuth map"));
    }
    let (h, w) = ra.dim();
    let ra3 = ra.insert_axis(Axis(2));
    let mut levels = Vec::new();
    let mut cache = RadarPyramidCache {
        patches: vec![],
        embedded: vec![],
    };
    for l in 0..p.mix.len() {
        let (sr, sc) = (p.stride0.0 << l, p.stride0.1 << l);
        if h % sr != 0 || w % sc != 0 || p.embed[l].n_in() != sr * sc {
            return Err(Error::Shape(format!(
                "range-azimuth map {h}x{w} does not tile into {sr}x{sc} patches"
            )));
        }
        let patches = patchify(ra3, sr, sc, false);
        let e = p.embed[l].forward(patches.view());
        let feat = p.mix[l].forward(e.view());
        let c = feat.ncols();
        levels.push(
            feat.into_shape_with_order((h / sr, w / sc, c))
                .expect("contiguous features"),
        );
        cache.patches.push(patches);
        cache.embedded.push(e);
    }
    Ok((RadarFeatureMap { levels }, cache))
}

pub fn radar_pyramid_backward(
    cache: &RadarPyramidCache,
    p: &RadarPyramidParams,
    dfeat: &[Array3<f64>],
    grad: &mut RadarPyramidParams,
) {
    for (l, d) in dfeat.iter().enumerate() {
        let c = d.dim().2;
        let d2 = d
            .view()
            .into_shape_with_order((d.len() / c, c))
            .expect("contiguous gradient");
        let de = p.mix[l].backward(cache.embedded[l].view(), d2, &mut grad.mix[l]);
        p.embed[l].accumulate(cache.patches[l].view(), de.view(), &mut grad.embed[l]);
    }
}
