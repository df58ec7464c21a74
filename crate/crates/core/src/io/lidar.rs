//! Synthetic scanning LiDAR: rays on a quantized elevation/azimuth lattice
//! intersected with the ground-truth boxes.

use serde::{Deserialize, Serialize};

use crate::detect::Box3D;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarConfig {
    /// Number of scan lines spread uniformly over the vertical field of view.
    pub lines: usize,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub azimuth_fov_deg: f64,
    pub azimuth_step_deg: f64,
    pub max_range_m: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            lines: 64,
            elevation_min_deg: -15.0,
            elevation_max_deg: 5.0,
            azimuth_fov_deg: 120.0,
            azimuth_step_deg: 0.2,
            max_range_m: 80.0,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lines >= 1
            && self.elevation_min_deg <= self.elevation_max_deg
            && self.azimuth_fov_deg > 0.0
            && self.azimuth_step_deg > 0.0
            && self.max_range_m > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid lidar config {self:?}")))
        }
    }

    pub fn elevations_rad(&self) -> Vec<f64> {
        if self.lines == 1 {
            return vec![(0.5 * (self.elevation_min_deg + self.elevation_max_deg)).to_radians()];
        }
        let step = (self.elevation_max_deg - self.elevation_min_deg) / (self.lines - 1) as f64;
        (0..self.lines)
            .map(|i| (self.elevation_min_deg + step * i as f64).to_radians())
            .collect()
    }

    pub fn azimuths_rad(&self) -> Vec<f64> {
        let n = (self.azimuth_fov_deg / self.azimuth_step_deg).floor() as usize;
        let start = -0.5 * n as f64 * self.azimuth_step_deg;
        (0..=n)
            .map(|i| (start + self.azimuth_step_deg * i as f64).to_radians())
            .collect()
    }
}

/// Distance along the unit ray `dir` from the origin to the first hit on `b`.
pub fn ray_box_distance(dir: [f64; 3], b: &Box3D) -> Option<f64> {
    let (s, c) = b.yaw.sin_cos();
    let o = [-b.x, -b.y, -b.z];
    // rotate origin and direction into the box frame
    let lo = [c * o[0] + s * o[1], -s * o[0] + c * o[1], o[2]];
    let ld = [c * dir[0] + s * dir[1], -s * dir[0] + c * dir[1], dir[2]];
    let half = [0.5 * b.l, 0.5 * b.w, 0.5 * b.h];
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        if ld[k].abs() < 1e-15 {
            if lo[k].abs() > half[k] {
                return None;
            }
            continue;
        }
        let (a, bnd) = ((-half[k] - lo[k]) / ld[k], (half[k] - lo[k]) / ld[k]);
        t0 = t0.max(a.min(bnd));
        t1 = t1.min(a.max(bnd));
        if t0 > t1 {
            return None;
        }
    }
    (t0 > 0.0).then_some(t0)
}

/// One return per ray: the nearest box surface within range.
pub fn scan_boxes(boxes: &[Box3D], cfg: &LidarConfig) -> Result<Vec<[f64; 3]>> {
    cfg.validate()?;
    let mut points = Vec::new();
    for el in cfg.elevations_rad() {
        let (se, ce) = el.sin_cos();
        for az in cfg.azimuths_rad() {
            let (sa, ca) = az.sin_cos();
            let dir = [ce * ca, ce * sa, se];
            let hit = boxes
                .iter()
                .filter_map(|b| ray_box_distance(dir, b))
                .fold(f64::INFINITY, f64::min);
            if hit <= cfg.max_range_m {
                points.push([hit * dir[0], hit * dir[1], hit * dir[2]]);
            }
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car() -> Box3D {
        Box3D::new([20.0, 0.0, -0.25], [4.5, 1.8, 1.5], 0.3).unwrap()
    }

    #[test]
    fn axis_ray_hits_front_face() {
        let b = Box3D::new([20.0, 0.0, 0.0], [4.0, 2.0, 2.0], 0.0).unwrap();
        assert!((ray_box_distance([1.0, 0.0, 0.0], &b).unwrap() - 18.0).abs() < 1e-12);
        assert!(ray_box_distance([0.0, 1.0, 0.0], &b).is_none());
        assert!(ray_box_distance([-1.0, 0.0, 0.0], &b).is_none());
    }

    #[test]
    fn returns_lie_on_the_box_surface() {
        let b = car();
        let pts = scan_boxes(&[b], &LidarConfig::default()).unwrap();
        assert!(pts.len() > 50);
        for p in pts {
            let q = b.to_local(p);
            let excess = [q[0].abs() - 0.5 * b.l, q[1].abs() - 0.5 * b.w, q[2].abs() - 0.5 * b.h];
            let m = excess.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(m.abs() < 1e-9, "{excess:?}");
        }
    }

    #[test]
    fn more_lines_more_returns() {
        let b = [car()];
        let n64 = scan_boxes(&b, &LidarConfig::default()).unwrap().len();
        let n128 = scan_boxes(
            &b,
            &LidarConfig {
                lines: 128,
                ..Default::default()
            },
        )
        .unwrap()
        .len();
        assert!(n128 > n64 * 3 / 2, "{n64} {n128}");
    }

    #[test]
    fn nearest_box_occludes() {
        let near = Box3D::new([10.0, 0.0, 0.0], [2.0, 2.0, 2.0], 0.0).unwrap();
        let far = Box3D::new([20.0, 0.0, 0.0], [2.0, 2.0, 2.0], 0.0).unwrap();
        let cfg = LidarConfig {
            lines: 1,
            elevation_min_deg: 0.0,
            elevation_max_deg: 0.0,
            azimuth_fov_deg: 0.2,
            ..Default::default()
        };
        let pts = scan_boxes(&[far, near], &cfg).unwrap();
        assert!(pts.iter().all(|p| (p[0] - 9.0).abs() < 1e-9));
    }
}
