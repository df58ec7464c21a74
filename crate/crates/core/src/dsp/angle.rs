use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::rd::{fft_shift, RdMapSet};
use crate::error::{Error, Result};
use crate::io::binfmt;
use crate::sim::RadarConfig;

/// Virtual array arranged as a full, uniformly spaced (horizontal x vertical) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub n_horizontal: usize,
    pub n_vertical: usize,
    pub spacing_h: f64,
    pub spacing_v: f64,
    /// `(column, row)` of each virtual element, in array order.
    pub cells: Vec<(usize, usize)>,
}

fn axis_grid(values: &[f64]) -> Option<(Vec<usize>, usize, f64)> {
    const TOL: f64 = 1e-9;
    let mut uniq: Vec<f64> = values.to_vec();
    uniq.sort_by(|a, b| a.total_cmp(b));
    uniq.dedup_by(|a, b| (*a - *b).abs() < TOL);
    if uniq.len() == 1 {
        return Some((vec![0; values.len()], 1, 0.0));
    }
    let step = uniq[1] - uniq[0];
    for (i, u) in uniq.iter().enumerate() {
        if (u - (uniq[0] + i as f64 * step)).abs() > 1e-6 * step.max(TOL) {
            return None;
        }
    }
    let idx = values.iter().map(|v| ((v - uniq[0]) / step).round() as usize).collect();
    Some((idx, uniq.len(), step))
}

/// Factorizes `elements` into a grid; anything else must go through the
/// RD-CFAR + beamforming branch.
pub fn grid_layout(elements: &[[f64; 2]]) -> Result<GridLayout> {
    if elements.is_empty() {
        return Err(Error::Layout("empty virtual array".into()));
    }
    let xs: Vec<f64> = elements.iter().map(|e| e[0]).collect();
    let ys: Vec<f64> = elements.iter().map(|e| e[1]).collect();
    let not_grid = || {
        Error::Layout(
            "virtual array is not a uniform full grid; use the rd-dbf branch (CFAR on RD maps + beamforming)".into(),
        )
    };
    let (ix, nh, dh) = axis_grid(&xs).ok_or_else(not_grid)?;
    let (iy, nv, dv) = axis_grid(&ys).ok_or_else(not_grid)?;
    if nh * nv != elements.len() {
        return Err(not_grid());
    }
    let mut seen = vec![false; nh * nv];
    for (&c, &r) in ix.iter().zip(&iy) {
        if std::mem::replace(&mut seen[r * nh + c], true) {
            return Err(not_grid());
        }
    }
    Ok(GridLayout {
        n_horizontal: nh,
        n_vertical: nv,
        spacing_h: dh,
        spacing_v: dv,
        cells: ix.into_iter().zip(iy).collect(),
    })
}

/// Physical meaning of every spectrum bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumAxes {
    pub range_m: Vec<f64>,
    pub velocity_mps: Vec<f64>,
    /// `x·sinφ·cosθ / d_h`-type direction sine per azimuth bin (before elevation correction).
    pub azimuth_sine: Vec<f64>,
    pub elevation_sine: Vec<f64>,
    pub azimuth_rad: Vec<f64>,
    pub elevation_rad: Vec<f64>,
}

fn direction_sines(n_fft: usize, spacing: f64, lambda: f64) -> Vec<f64> {
    (0..n_fft)
        .map(|j| {
            if spacing > 0.0 {
                (j as f64 - (n_fft / 2) as f64) / n_fft as f64 * lambda / spacing
            } else {
                0.0
            }
        })
        .collect()
}

impl SpectrumAxes {
    pub fn new(config: &RadarConfig, layout: &GridLayout, dims: [usize; 4]) -> Self {
        let lambda = config.wavelength();
        let dr = config.range_resolution();
        let dv = config.velocity_resolution();
        let az_sine = direction_sines(dims[2], layout.spacing_h, lambda);
        let el_sine = direction_sines(dims[3], layout.spacing_v, lambda);
        Self {
            range_m: (0..dims[0]).map(|r| r as f64 * dr).collect(),
            velocity_mps: (0..dims[1]).map(|d| (d as f64 - (dims[1] / 2) as f64) * dv).collect(),
            azimuth_rad: az_sine.iter().map(|s| s.clamp(-1.0, 1.0).asin()).collect(),
            elevation_rad: el_sine.iter().map(|s| s.clamp(-1.0, 1.0).asin()).collect(),
            azimuth_sine: az_sine,
            elevation_sine: el_sine,
        }
    }

    /// Azimuth of an (azimuth bin, elevation bin) pair, undoing the cosθ
    /// factor folded into the horizontal phase.
    pub fn azimuth_at(&self, az_bin: usize, el_bin: usize) -> f64 {
        let cos_el = self.elevation_rad[el_bin].cos().max(1e-9);
        (self.azimuth_sine[az_bin] / cos_el).clamp(-1.0, 1.0).asin()
    }
}

/// Power over (range, Doppler, azimuth, elevation), C-ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum4D {
    pub power: Vec<f32>,
    pub dims: [usize; 4],
    pub axes: SpectrumAxes,
}

impl Spectrum4D {
    #[inline]
    pub fn index(&self, r: usize, d: usize, a: usize, e: usize) -> usize {
        ((r * self.dims[1] + d) * self.dims[2] + a) * self.dims[3] + e
    }

    pub fn get(&self, r: usize, d: usize, a: usize, e: usize) -> f32 {
        self.power[self.index(r, d, a, e)]
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().map(|&p| p as f64).sum()
    }

    pub fn angle_cells(&self) -> usize {
        self.dims[2] * self.dims[3]
    }

    pub fn scaled(&self, factor: f32) -> Self {
        Self {
            power: self.power.iter().map(|p| p * factor).collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.power.len() != self.dims.iter().product::<usize>() {
            return Err(Error::Shape("spectrum length".into()));
        }
        if self.power.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite("spectrum power"));
        }
        Ok(())
    }

    /// Writes the `SPC4` container.
    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &binfmt::encode(binfmt::SPECTRUM_MAGIC, &self.dims, &self.power))
    }

    /// Reads an `SPC4` container; axes are rebuilt from `config`.
    pub fn read(path: &Path, config: &RadarConfig) -> Result<Self> {
        let (dims, power) = binfmt::decode_file(path, binfmt::SPECTRUM_MAGIC, 4)?;
        let dims = [dims[0], dims[1], dims[2], dims[3]];
        let layout = grid_layout(&config.virtual_array()?)?;
        let spec = Self {
            power,
            dims,
            axes: SpectrumAxes::new(config, &layout, dims),
        };
        spec.validate().map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(spec)
    }
}

/// Zero-padded azimuth/elevation FFTs over the virtual grid of each RD cell.
///
/// Power is normalized by the element count, so total power equals
/// `Σ|rd|² · n_az·n_el / (n_h·n_v)`.
pub fn angle_fft(rd: &RdMapSet, layout: &GridLayout, n_az: usize, n_el: usize) -> Result<Spectrum4D> {
    if layout.cells.len() != rd.n_virtual {
        return Err(Error::Layout(format!(
            "layout has {} elements, RD maps have {} antennas",
            layout.cells.len(),
            rd.n_virtual
        )));
    }
    if n_az < layout.n_horizontal || n_el < layout.n_vertical {
        return Err(Error::Config(format!(
            "angle FFT sizes ({n_az}, {n_el}) smaller than the array ({}, {})",
            layout.n_horizontal, layout.n_vertical
        )));
    }
    let (nr, nd) = (rd.n_range, rd.n_doppler);
    let dims = [nr, nd, n_az, n_el];
    let mut planner = FftPlanner::<f64>::new();
    let fft_az = planner.plan_fft_forward(n_az);
    let fft_el = planner.plan_fft_forward(n_el);
    let norm = 1.0 / rd.n_virtual as f64;

    let mut power = vec![0f32; nr * nd * n_az * n_el];
    // grid[e][a], azimuth contiguous
    let mut grid = vec![Complex64::new(0.0, 0.0); n_el * n_az];
    let mut col = vec![Complex64::new(0.0, 0.0); n_el];
    for r in 0..nr {
        for d in 0..nd {
            grid.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (n, &(c, row)) in layout.cells.iter().enumerate() {
                grid[row * n_az + c] = rd.get(n, d, r);
            }
            for row in 0..layout.n_vertical {
                let line = &mut grid[row * n_az..(row + 1) * n_az];
                fft_az.process(line);
                fft_shift(line);
            }
            let base = ((r * nd + d) * n_az) * n_el;
            for a in 0..n_az {
                for (e, z) in col.iter_mut().enumerate() {
                    *z = grid[e * n_az + a];
                }
                fft_el.process(&mut col);
                fft_shift(&mut col);
                let out = &mut power[base + a * n_el..base + (a + 1) * n_el];
                for (o, z) in out.iter_mut().zip(&col) {
                    *o = (z.norm_sqr() * norm) as f32;
                }
            }
        }
    }
    Ok(Spectrum4D {
        power,
        dims,
        axes: SpectrumAxes::new(&rd.config, layout, dims),
    })
}
