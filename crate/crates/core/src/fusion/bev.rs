//! Polar bird's-eye-view query grid, camera geometry and fixed encodings.

use std::f64::consts::FRAC_PI_2;

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{join, Parameters};
use super::pyramid::FusionConfig;
use crate::detect::wrap_angle;
use crate::error::{Error, Result};

/// Which attention passes a BEV grid has been through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BevStage {
    Initial,
    ImageFused,
    RadarFused,
}

/// Pinhole front camera. Image columns grow with azimuth (toward +y) and
/// rows grow downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraCalib {
    pub focal_px: f64,
    pub cx_px: f64,
    pub cy_px: f64,
    pub width_px: usize,
    pub height_px: usize,
    /// Camera forward axis azimuth in the radar frame.
    pub yaw_offset_rad: f64,
    /// Camera mounting height above the radar.
    pub height_offset_m: f64,
}

impl Default for CameraCalib {
    fn default() -> Self {
        Self {
            focal_px: 64.0,
            cx_px: 64.0,
            cy_px: 32.0,
            width_px: 128,
            height_px: 64,
            yaw_offset_rad: 0.0,
            height_offset_m: 0.0,
        }
    }
}

impl CameraCalib {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.focal_px,
            self.cx_px,
            self.cy_px,
            self.yaw_offset_rad,
            self.height_offset_m,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("camera calibration"));
        }
        if self.focal_px <= 0.0 {
            return Err(Error::Config("focal length must be positive".into()));
        }
        let inside = |c: f64, n: usize| c >= 0.0 && c <= n as f64;
        if !inside(self.cx_px, self.width_px) || !inside(self.cy_px, self.height_px) {
            return Err(Error::Config("principal point must lie inside the image".into()));
        }
        Ok(())
    }

    /// Radar-frame point to camera frame `(forward, left, up)`.
    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw_offset_rad.sin_cos();
        [c * p[0] + s * p[1], -s * p[0] + c * p[1], p[2] - self.height_offset_m]
    }

    pub fn from_camera(&self, q: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw_offset_rad.sin_cos();
        [c * q[0] - s * q[1], s * q[0] + c * q[1], q[2] + self.height_offset_m]
    }

    /// `(u, v, depth)` for points in front of the camera.
    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64, f64)> {
        let [x, y, z] = self.to_camera(p);
        if x <= 0.0 {
            return None;
        }
        Some((
            self.cx_px + self.focal_px * y / x,
            self.cy_px - self.focal_px * z / x,
            x,
        ))
    }

    /// Inverse of [`CameraCalib::project`].
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> [f64; 3] {
        let y = (u - self.cx_px) * depth / self.focal_px;
        let z = (self.cy_px - v) * depth / self.focal_px;
        self.from_camera([depth, y, z])
    }
}

/// Image feature column seen at azimuth `phi` on pyramid `level`, or `None`
/// when the direction is behind the image plane.
pub fn azimuth_to_column(phi: f64, calib: &CameraCalib, level: usize, n_cols: usize) -> Option<usize> {
    let d = wrap_angle(phi - calib.yaw_offset_rad);
    if d.abs() >= FRAC_PI_2 || n_cols == 0 {
        return None;
    }
    let stride = (1usize << (level + 2)) as f64;
    let x = ((calib.cx_px + calib.focal_px * d.tan()) / stride).round();
    Some(x.clamp(0.0, (n_cols - 1) as f64) as usize)
}

/// Writes `[sin(ω_k u), cos(ω_k u)]` pairs with half-octave frequencies
/// starting at π/2, for `u` roughly in `[-1, 1]`.
pub fn sinusoid(u: f64, out: &mut [f64]) {
    for (k, pair) in out.chunks_mut(2).enumerate() {
        let w = FRAC_PI_2 * 2f64.powf(k as f64 / 2.0);
        pair[0] = (w * u).sin();
        if pair.len() > 1 {
            pair[1] = (w * u).cos();
        }
    }
}

/// Two-coordinate encoding: first half of the channels from `a`, second from `b`.
pub fn encode2(a: f64, b: f64, channels: usize) -> Array1<f64> {
    let mut e = Array1::zeros(channels);
    let s = e.as_slice_mut().unwrap();
    let (lo, hi) = s.split_at_mut(channels / 2);
    sinusoid(a, lo);
    sinusoid(b, hi);
    e
}

/// Normalized ring coordinate in `[-1, 1]` for cell `i` of `n`.
pub fn ring_coordinate(i: usize, n: usize) -> f64 {
    2.0 * (i as f64 + 0.5) / n as f64 - 1.0
}

/// Direction sine at the center of `width` consecutive fft-shifted azimuth
/// bins starting at `start`, for a half-wavelength array with `n_bins` bins.
pub fn azimuth_bin_sine(start: usize, width: usize, n_bins: usize) -> f64 {
    let center = start as f64 + 0.5 * (width as f64 - 1.0);
    2.0 * (center - 0.5 * n_bins as f64) / n_bins as f64
}

/// Key encoding for the rows of one image feature column: `(rows, C)`.
pub fn image_row_encoding(rows: usize, channels: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, channels));
    for y in 0..rows {
        out.row_mut(y).assign(&encode2(ring_coordinate(y, rows), 0.0, channels));
    }
    out
}

/// Key encoding for the cells of one radar feature row: `(n_cols, C)` where
/// the first half encodes the ring and the second half the direction sine.
pub fn radar_row_encoding(
    ring: usize,
    n_rings: usize,
    n_cols: usize,
    col_stride: usize,
    channels: usize,
) -> Array2<f64> {
    let mut out = Array2::zeros((n_cols, channels));
    let n_bins = n_cols * col_stride;
    for a in 0..n_cols {
        let u = azimuth_bin_sine(a * col_stride, col_stride, n_bins);
        out.row_mut(a)
            .assign(&encode2(ring_coordinate(ring, n_rings), u, channels));
    }
    out
}

/// Per-level polar query grid, each level `(rings, azimuths, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarBevGrid {
    pub levels: Vec<Array3<f64>>,
    pub r_max_m: f64,
    pub phi_max_rad: f64,
    pub stage: BevStage,
}

impl PolarBevGrid {
    pub fn shape(&self, level: usize) -> (usize, usize) {
        let (r, a, _) = self.levels[level].dim();
        (r, a)
    }

    pub fn channels(&self) -> usize {
        self.levels.first().map_or(0, |l| l.dim().2)
    }

    pub fn ring_center_m(&self, level: usize, i: usize) -> f64 {
        let n = self.shape(level).0;
        (i as f64 + 0.5) * self.r_max_m / n as f64
    }

    pub fn azimuth_center_rad(&self, level: usize, j: usize) -> f64 {
        let n = self.shape(level).1;
        -self.phi_max_rad + (j as f64 + 0.5) * 2.0 * self.phi_max_rad / n as f64
    }

    pub fn require(&self, stage: BevStage) -> Result<()> {
        if self.stage == stage {
            Ok(())
        } else {
            Err(Error::Stage {
                expected: stage,
                found: self.stage,
            })
        }
    }

    /// Fixed encoding of every cell's `(r, φ)` for `level`.
    pub fn position_encoding(&self, level: usize) -> Array3<f64> {
        let (nr, na) = self.shape(level);
        let c = self.channels();
        let mut out = Array3::zeros((nr, na, c));
        for i in 0..nr {
            for j in 0..na {
                let e = encode2(ring_coordinate(i, nr), self.azimuth_center_rad(level, j).sin(), c);
                out.slice_mut(ndarray::s![i, j, ..]).assign(&e);
            }
        }
        out
    }
}

/// Learnable per-level BEV query embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct BevParams {
    pub embed: Vec<Array1<f64>>,
}

impl BevParams {
    pub fn init(cfg: &FusionConfig, rng: &mut ChaCha8Rng) -> Self {
        Self {
            embed: (0..cfg.levels)
                .map(|_| Array1::from_shape_fn(cfg.channels, |_| rng.random_range(-0.1..0.1)))
                .collect(),
        }
    }
}

impl Parameters for BevParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.embed.visit(&join(prefix, "embed"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.embed.visit_mut(&join(prefix, "embed"), f);
    }
}

/// Uniform polar grid whose queries are the learnable level embedding plus
/// the fixed `(r, φ)` encoding.
pub fn init_bev(cfg: &FusionConfig, r_max_m: f64, p: &BevParams) -> Result<PolarBevGrid> {
    cfg.validate()?;
    if !(r_max_m > 0.0 && r_max_m.is_finite()) {
        return Err(Error::Config("BEV range extent must be positive".into()));
    }
    let mut grid = PolarBevGrid {
        levels: (0..cfg.levels)
            .map(|l| {
                let (r, a) = cfg.bev_shape(l);
                Array3::zeros((r, a, cfg.channels))
            })
            .collect(),
        r_max_m,
        phi_max_rad: cfg.bev_phi_max_rad,
        stage: BevStage::Initial,
    };
    for l in 0..cfg.levels {
        let enc = grid.position_encoding(l);
        grid.levels[l] = enc + &p.embed[l];
    }
    Ok(grid)
}

/// Gradient of [`init_bev`] with respect to the level embeddings.
pub fn init_bev_backward(dbev: &[Array3<f64>], grad: &mut BevParams) {
    for (l, d) in dbev.iter().enumerate() {
        let c = d.dim().2;
        let flat = d
            .view()
            .into_shape_with_order((d.len() / c, c))
            .expect("contiguous gradient");
        grad.embed[l] += &flat.sum_axis(ndarray::Axis(0));
    }
}
