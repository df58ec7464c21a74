use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cfar::TargetCell;
use super::pointcloud::{RadarPoint, RadarPointCloud};
use crate::error::{Error, Result};

/// Scan grid for the steering-vector search, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AngularGrid {
    pub azimuth_min_rad: f64,
    pub azimuth_max_rad: f64,
    pub azimuth_step_rad: f64,
    pub elevation_min_rad: f64,
    pub elevation_max_rad: f64,
    pub elevation_step_rad: f64,
}

impl Default for AngularGrid {
    fn default() -> Self {
        Self {
            azimuth_min_rad: -80f64.to_radians(),
            azimuth_max_rad: 80f64.to_radians(),
            azimuth_step_rad: 1f64.to_radians(),
            elevation_min_rad: -30f64.to_radians(),
            elevation_max_rad: 30f64.to_radians(),
            elevation_step_rad: 1f64.to_radians(),
        }
    }
}

fn steps(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && hi >= lo) {
        return Err(Error::Config(format!("bad angular grid [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo + i as f64 * step).collect())
}

impl AngularGrid {
    pub fn azimuths(&self) -> Result<Vec<f64>> {
        steps(self.azimuth_min_rad, self.azimuth_max_rad, self.azimuth_step_rad)
    }

    pub fn elevations(&self) -> Result<Vec<f64>> {
        steps(self.elevation_min_rad, self.elevation_max_rad, self.elevation_step_rad)
    }
}

/// Digital beamforming: for every target cell, the grid angle maximizing
/// `|aᴴx|²` with `a_n = exp(j2π(x_n·sinφ·cosθ + z_n·sinθ)/λ)`.
pub fn dbf_angles(
    cells: &[TargetCell],
    elements: &[[f64; 2]],
    wavelength: f64,
    grid: &AngularGrid,
) -> Result<RadarPointCloud> {
    let azs = grid.azimuths()?;
    let els = grid.elevations()?;
    let n = elements.len();
    // conj steering vectors, one row per (el, az) grid point
    let mut steer = Vec::with_capacity(azs.len() * els.len() * n);
    for &el in &els {
        let (se, ce) = el.sin_cos();
        for &az in &azs {
            let sa = az.sin();
            for e in elements {
                steer.push(Complex64::from_polar(
                    1.0,
                    -2.0 * PI * (e[0] * sa * ce + e[1] * se) / wavelength,
                ));
            }
        }
    }

    let mut points = Vec::with_capacity(cells.len());
    for cell in cells {
        if cell.snapshot.is_empty() {
            return Err(Error::Empty("beamforming snapshot"));
        }
        if cell.snapshot.len() != n {
            return Err(Error::Shape(format!(
                "snapshot has {} antennas, array has {n}",
                cell.snapshot.len()
            )));
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (g, a) in steer.chunks_exact(n).enumerate() {
            let y: Complex64 = a.iter().zip(&cell.snapshot).map(|(w, x)| w * x).sum();
            let p = y.norm_sqr();
            if p > best.1 {
                best = (g, p);
            }
        }
        let (ei, ai) = (best.0 / azs.len(), best.0 % azs.len());
        points.push(RadarPoint {
            range_m: cell.range_m,
            velocity_mps: cell.velocity_mps,
            azimuth_rad: azs[ai],
            elevation_rad: els[ei],
            intensity: best.1,
        });
    }
    Ok(RadarPointCloud { points })
}
