use serde::{Deserialize, Serialize};

use crate::detect::{wrap_angle, Box3D};
use crate::error::{Error, Result};

/// Mean translation (m), scale (%) and orientation (deg) errors over matched pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpErrors {
    pub ate_m: f64,
    pub ase_pct: f64,
    pub aoe_deg: f64,
}

/// `pairs` holds `(prediction, ground truth)`.
pub fn tp_errors(pairs: &[(Box3D, Box3D)], planar_translation: bool) -> Result<TpErrors> {
    if pairs.is_empty() {
        return Err(Error::Empty("matched pairs"));
    }
    let n = pairs.len() as f64;
    let (mut ate, mut ase, mut aoe) = (0.0, 0.0, 0.0);
    for (p, g) in pairs {
        let dz = if planar_translation { 0.0 } else { p.z - g.z };
        ate += ((p.x - g.x).powi(2) + (p.y - g.y).powi(2) + dz * dz).sqrt();
        ase += (1.0 - p.diagonal() / g.diagonal()).abs();
        aoe += wrap_angle(p.yaw - g.yaw).abs();
    }
    Ok(TpErrors {
        ate_m: ate / n,
        ase_pct: 100.0 * ase / n,
        aoe_deg: (aoe / n).to_degrees(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b() -> Box3D {
        Box3D::new([12.0, -3.0, 0.1], [4.4, 1.8, 1.5], 0.7).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let e = tp_errors(&[(b(), b())], false).unwrap();
        assert_eq!((e.ate_m, e.ase_pct, e.aoe_deg), (0.0, 0.0, 0.0));
    }

    #[test]
    fn offset_345() {
        let p = Box3D {
            x: b().x + 0.3,
            y: b().y + 0.4,
            ..b()
        };
        assert!((tp_errors(&[(p, b())], false).unwrap().ate_m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn uniform_scale_ten_percent() {
        let g = b();
        let p = Box3D {
            l: g.l * 1.1,
            w: g.w * 1.1,
            h: g.h * 1.1,
            ..g
        };
        assert!((tp_errors(&[(p, g)], false).unwrap().ase_pct - 10.0).abs() < 1e-9);
    }

    #[test]
    fn orientation_wraps() {
        let g = Box3D { yaw: 3.1, ..b() };
        let p = Box3D { yaw: -3.1, ..b() };
        let e = tp_errors(&[(p, g)], false).unwrap();
        assert!((e.aoe_deg - (2.0 * std::f64::consts::PI - 6.2).to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn empty_is_error() {
        assert!(tp_errors(&[], false).is_err());
    }
}
