//! Cell-averaging CFAR over the range and Doppler axes.
//!
//! Training windows are truncated at the tensor borders, and the scale factor
//! is recomputed from the surviving training-cell count, so every cell of the
//! tensor is tested.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::angle::Spectrum4D;
use super::rd::RdMapSet;
use crate::error::{Error, Result};

/// Window sizes are per windowed axis, ordered (range, Doppler).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfarConfig {
    pub guard_cells: [usize; 2],
    pub training_cells: [usize; 2],
    pub false_alarm_rate: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            guard_cells: [2, 2],
            training_cells: [8, 8],
            false_alarm_rate: 1e-3,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.false_alarm_rate > 0.0 && self.false_alarm_rate < 1.0) {
            return Err(Error::Config(format!(
                "false alarm rate {} outside (0, 1)",
                self.false_alarm_rate
            )));
        }
        if self.training_cells == [0, 0] {
            return Err(Error::Config("CFAR training window is empty".into()));
        }
        Ok(())
    }

    /// CA-CFAR scale `N·(Pfa^(-1/N) - 1)` for `n` training cells.
    pub fn alpha(&self, n: usize) -> f64 {
        let n = n as f64;
        n * (self.false_alarm_rate.powf(-1.0 / n) - 1.0)
    }

    fn outer(&self) -> [usize; 2] {
        [
            self.guard_cells[0] + self.training_cells[0],
            self.guard_cells[1] + self.training_cells[1],
        ]
    }
}

/// Clamped `[lo, hi)` span of `center ± half` inside `0..len`.
fn span(center: usize, half: usize, len: usize) -> (usize, usize) {
    (center.saturating_sub(half), (center + half + 1).min(len))
}

/// Row-major 2D power map with a summed-area table for window sums.
struct Integral {
    cols: usize,
    table: Vec<f64>,
}

impl Integral {
    fn new(map: &[f64], rows: usize, cols: usize) -> Self {
        let mut table = vec![0.0; (rows + 1) * (cols + 1)];
        for r in 0..rows {
            let mut run = 0.0;
            for c in 0..cols {
                run += map[r * cols + c];
                table[(r + 1) * (cols + 1) + c + 1] = table[r * (cols + 1) + c + 1] + run;
            }
        }
        Self { cols, table }
    }

    fn sum(&self, (r0, r1): (usize, usize), (c0, c1): (usize, usize)) -> f64 {
        let w = self.cols + 1;
        self.table[r1 * w + c1] - self.table[r0 * w + c1] - self.table[r1 * w + c0] + self.table[r0 * w + c0]
    }
}

/// Training sum and count around `(r, d)` using an arbitrary cell accessor.
fn training_stats(
    cfg: &CfarConfig,
    shape: [usize; 2],
    r: usize,
    d: usize,
    window_sum: impl Fn((usize, usize), (usize, usize)) -> f64,
) -> Result<(f64, usize)> {
    let outer = cfg.outer();
    let (or, od) = (span(r, outer[0], shape[0]), span(d, outer[1], shape[1]));
    let (ir, id) = (
        span(r, cfg.guard_cells[0], shape[0]),
        span(d, cfg.guard_cells[1], shape[1]),
    );
    let n = (or.1 - or.0) * (od.1 - od.0) - (ir.1 - ir.0) * (id.1 - id.0);
    if n == 0 {
        return Err(Error::Config(format!(
            "CFAR window at ({r}, {d}) has no training cells"
        )));
    }
    Ok((window_sum(or, od) - window_sum(ir, id), n))
}

/// CA-CFAR decision for every cell of a row-major (range, Doppler) map.
pub fn cfar_mask_2d(map: &[f64], rows: usize, cols: usize, cfg: &CfarConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    let integral = Integral::new(map, rows, cols);
    let mut mask = vec![false; rows * cols];
    for r in 0..rows {
        for d in 0..cols {
            let (sum, n) = training_stats(cfg, [rows, cols], r, d, |a, b| integral.sum(a, b))?;
            let p = map[r * cols + d];
            mask[r * cols + d] = p > cfg.alpha(n) * (sum / n as f64);
        }
    }
    Ok(mask)
}

/// Full 4D CFAR decision tensor (range/Doppler windows per angle cell),
/// laid out like `spec.power`.
pub fn cfar_mask_4d(spec: &Spectrum4D, cfg: &CfarConfig) -> Result<Vec<bool>> {
    let [nr, nd, na, ne] = spec.dims;
    let mut mask = vec![false; spec.power.len()];
    let mut slice = vec![0.0; nr * nd];
    for a in 0..na {
        for e in 0..ne {
            for r in 0..nr {
                for d in 0..nd {
                    slice[r * nd + d] = spec.get(r, d, a, e) as f64;
                }
            }
            let m = cfar_mask_2d(&slice, nr, nd, cfg)?;
            for r in 0..nr {
                for d in 0..nd {
                    mask[spec.index(r, d, a, e)] = m[r * nd + d];
                }
            }
        }
    }
    Ok(mask)
}

/// True when `map[r][d]` is the strongest cell of its 3x3 neighborhood.
/// Both axes come out of a DFT and are periodic, so the neighborhood wraps.
/// Ties go to the first cell in raster order.
fn is_local_peak(map: &[f64], rows: usize, cols: usize, r: usize, d: usize) -> bool {
    let p = map[r * cols + d];
    if p <= 0.0 {
        return false;
    }
    for dr in [rows - 1, 0, 1] {
        for dd in [cols - 1, 0, 1] {
            let (rr, cc) = ((r + dr) % rows, (d + dd) % cols);
            if (rr, cc) == (r, d) {
                continue;
            }
            let q = map[rr * cols + cc];
            if q > p || ((rr, cc) < (r, d) && q == p) {
                return false;
            }
        }
    }
    true
}

/// Spectrum cell kept by the 4D branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumDetection {
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub azimuth_bin: usize,
    pub elevation_bin: usize,
    pub power: f64,
}

/// CFAR + peak grouping on the 4D spectrum.
///
/// Each (range, Doppler) cell is represented by its strongest angle cell.
/// CA-CFAR runs over range and Doppler on that angle-maximum map, and a
/// kept cell must also be the maximum of its 3x3 neighborhood.
pub fn cfar_detect_4d_cells(spec: &Spectrum4D, cfg: &CfarConfig) -> Result<Vec<SpectrumDetection>> {
    cfg.validate()?;
    let [nr, nd, na, ne] = spec.dims;
    let n_ang = na * ne;
    let mut best = vec![0.0; nr * nd];
    let mut best_cell = vec![0usize; nr * nd];
    for rd in 0..nr * nd {
        let cells = &spec.power[rd * n_ang..(rd + 1) * n_ang];
        let (i, p) = cells.iter().enumerate().fold(
            (0, f32::NEG_INFINITY),
            |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
        );
        best[rd] = p as f64;
        best_cell[rd] = i;
    }

    let mask = cfar_mask_2d(&best, nr, nd, cfg)?;
    let mut out = Vec::new();
    for r in 0..nr {
        for d in 0..nd {
            if !mask[r * nd + d] || !is_local_peak(&best, nr, nd, r, d) {
                continue;
            }
            let cell = best_cell[r * nd + d];
            out.push(SpectrumDetection {
                range_bin: r,
                doppler_bin: d,
                azimuth_bin: cell / ne,
                elevation_bin: cell % ne,
                power: best[r * nd + d],
            });
        }
    }
    Ok(out)
}

/// CA-CFAR on the 4D spectrum, returned as a physical point cloud.
pub fn cfar_detect_4d(spec: &Spectrum4D, cfg: &CfarConfig) -> Result<super::RadarPointCloud> {
    let cells = cfar_detect_4d_cells(spec, cfg)?;
    let ax = &spec.axes;
    Ok(super::RadarPointCloud {
        points: cells
            .iter()
            .map(|c| super::RadarPoint {
                range_m: ax.range_m[c.range_bin],
                velocity_mps: ax.velocity_mps[c.doppler_bin],
                azimuth_rad: ax.azimuth_at(c.azimuth_bin, c.elevation_bin),
                elevation_rad: ax.elevation_rad[c.elevation_bin],
                intensity: c.power,
            })
            .collect(),
    })
}

/// RD cell surviving CFAR, carrying its per-antenna snapshot for beamforming.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCell {
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub power: f64,
    pub snapshot: Vec<Complex64>,
}

/// CA-CFAR + local peak grouping on the antenna-averaged RD power map.
pub fn cfar_on_rd(rd: &RdMapSet, cfg: &CfarConfig) -> Result<Vec<TargetCell>> {
    let (nr, nd) = (rd.n_range, rd.n_doppler);
    let power = rd.mean_power();
    let mask = cfar_mask_2d(&power, nr, nd, cfg)?;
    let mut out = Vec::new();
    for r in 0..nr {
        for d in 0..nd {
            if mask[r * nd + d] && is_local_peak(&power, nr, nd, r, d) {
                out.push(TargetCell {
                    range_bin: r,
                    doppler_bin: d,
                    range_m: rd.range_of_bin(r),
                    velocity_mps: rd.velocity_of_bin(d),
                    power: power[r * nd + d],
                    snapshot: (0..rd.n_virtual).map(|n| rd.get(n, d, r)).collect(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_matches_closed_form() {
        let cfg = CfarConfig::default();
        let n = 416;
        let expect = 416.0 * (1e-3f64.powf(-1.0 / 416.0) - 1.0);
        assert!((cfg.alpha(n) - expect).abs() < 1e-12);
        // large-N limit is -ln(Pfa)
        assert!((cfg.alpha(1_000_000) + 1e-3f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn degenerate_windows_are_errors() {
        let bad = CfarConfig {
            training_cells: [0, 0],
            ..CfarConfig::default()
        };
        assert!(matches!(cfar_mask_2d(&[1.0; 4], 2, 2, &bad), Err(Error::Config(_))));
        let pfa = CfarConfig {
            false_alarm_rate: 1.0,
            ..CfarConfig::default()
        };
        assert!(pfa.validate().is_err());
        // a 1x1 map leaves no training cells at all
        assert!(cfar_mask_2d(&[1.0], 1, 1, &CfarConfig::default()).is_err());
    }

    #[test]
    fn integral_sums_match_brute_force() {
        let map: Vec<f64> = (0..35).map(|i| (i * 7 % 11) as f64).collect();
        let it = Integral::new(&map, 5, 7);
        let brute: f64 = (1..4)
            .flat_map(|r| (2..6).map(move |c| (r, c)))
            .map(|(r, c)| map[r * 7 + c])
            .sum();
        assert_eq!(it.sum((1, 4), (2, 6)), brute);
    }

    #[test]
    fn single_spike_detected_in_flat_map() {
        let (rows, cols) = (40, 30);
        let mut map = vec![1.0; rows * cols];
        map[20 * cols + 15] = 100.0;
        let mask = cfar_mask_2d(&map, rows, cols, &CfarConfig::default()).unwrap();
        let hits: Vec<_> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        assert_eq!(hits, vec![20 * cols + 15]);
    }

    #[test]
    fn local_peak_tie_breaking() {
        let map = vec![0.0, 5.0, 5.0, 0.0];
        assert!(is_local_peak(&map, 1, 4, 0, 1));
        assert!(!is_local_peak(&map, 1, 4, 0, 2));
        assert!(!is_local_peak(&map, 1, 4, 0, 0));
    }

    #[test]
    fn local_peak_wraps_around_edges() {
        let map = vec![3.0, 1.0, 0.5, 4.0];
        assert!(!is_local_peak(&map, 1, 4, 0, 0));
        assert!(is_local_peak(&map, 1, 4, 0, 3));
    }
}
