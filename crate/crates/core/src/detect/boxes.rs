use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// 7-DoF box in the radar frame: x forward, y left, z up. `l` runs along the
/// heading `yaw`, `w` across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
}

impl Box3D {
    /// Builds a box, normalizing the yaw and rejecting non-positive extents.
    pub fn new(center: [f64; 3], extents: [f64; 3], yaw: f64) -> Result<Self> {
        let b = Self {
            x: center[0],
            y: center[1],
            z: center[2],
            l: extents[0],
            w: extents[1],
            h: extents[2],
            yaw: wrap_angle(yaw),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.x, self.y, self.z, self.l, self.w, self.h, self.yaw];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("box"));
        }
        if self.l <= 0.0 || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::DegenerateBox(format!(
                "extents ({}, {}, {}) must be positive",
                self.l, self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn diagonal(&self) -> f64 {
        (self.l * self.l + self.w * self.w + self.h * self.h).sqrt()
    }

    pub fn bev_area(&self) -> f64 {
        self.l * self.w
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    pub fn z_min(&self) -> f64 {
        self.z - 0.5 * self.h
    }

    pub fn z_max(&self) -> f64 {
        self.z + 0.5 * self.h
    }

    /// Footprint corners, counter-clockwise.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (0.5 * self.l, 0.5 * self.w);
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[u, v]| [self.x + c * u - s * v, self.y + s * u + c * v])
    }

    /// Point in box-local coordinates (along heading, across, up).
    pub fn to_local(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        let (dx, dy) = (p[0] - self.x, p[1] - self.y);
        [c * dx + s * dy, -s * dx + c * dy, p[2] - self.z]
    }

    pub fn from_local(&self, q: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        [
            self.x + c * q[0] - s * q[1],
            self.y + s * q[0] + c * q[1],
            self.z + q[2],
        ]
    }

    pub fn contains_bev(&self, p: [f64; 2]) -> bool {
        let q = self.to_local([p[0], p[1], self.z]);
        q[0].abs() <= 0.5 * self.l && q[1].abs() <= 0.5 * self.w
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let q = self.to_local(p);
        q[0].abs() <= 0.5 * self.l && q[1].abs() <= 0.5 * self.w && q[2].abs() <= 0.5 * self.h
    }

    /// All eight corners.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let mut out = [[0.0; 3]; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { 0.5 } else { -0.5 };
            let sy = if i & 2 == 0 { 0.5 } else { -0.5 };
            let sz = if i & 4 == 0 { 0.5 } else { -0.5 };
            *c = self.from_local([sx * self.l, sy * self.w, sz * self.h]);
        }
        out
    }

    /// Same box moved by `t`.
    pub fn translated(&self, t: [f64; 3]) -> Self {
        Self {
            x: self.x + t[0],
            y: self.y + t[1],
            z: self.z + t[2],
            ..*self
        }
    }

    /// Same box rotated by `angle` about the vertical axis through `pivot`.
    pub fn rotated_about(&self, pivot: [f64; 2], angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let (dx, dy) = (self.x - pivot[0], self.y - pivot[1]);
        Self {
            x: pivot[0] + c * dx - s * dy,
            y: pivot[1] + s * dx + c * dy,
            yaw: wrap_angle(self.yaw + angle),
            ..*self
        }
    }
}

/// Scored box emitted by the detection head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_id: u64,
    pub class_id: u32,
    pub score: f64,
    pub bbox: Box3D,
}

/// The only class trained and evaluated at desk scale.
pub const SEDAN_CLASS: u32 = 0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn rejects_degenerate_extents() {
        assert!(Box3D::new([0.0; 3], [1.0, 0.0, 1.0], 0.0).is_err());
        assert!(Box3D::new([0.0; 3], [1.0, 1.0, -1.0], 0.0).is_err());
        assert!(Box3D::new([f64::NAN, 0.0, 0.0], [1.0; 3], 0.0).is_err());
    }

    #[test]
    fn local_round_trip_and_containment() {
        let b = Box3D::new([3.0, -2.0, 0.5], [4.0, 2.0, 1.5], 0.7).unwrap();
        let p = b.from_local([1.9, -0.9, 0.7]);
        let q = b.to_local(p);
        assert!((q[0] - 1.9).abs() < 1e-12 && (q[1] + 0.9).abs() < 1e-12);
        assert!(b.contains(p));
        assert!(!b.contains(b.from_local([2.1, 0.0, 0.0])));
        for c in b.bev_corners() {
            assert!(b.contains_bev([c[0] * (1.0 - 1e-12) + b.x * 1e-12, c[1] * (1.0 - 1e-12) + b.y * 1e-12]));
        }
    }
}
