//! Sparse depth images from 3D points and their 3-channel expansion.

use ndarray::{Array2, Array3, Axis};

use crate::fusion::CameraCalib;

/// Per-pixel metric depth, `(height, width)`; 0 marks a pixel without a return.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub data: Array2<f64>,
}

impl DepthImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            data: Array2::zeros((height, width)),
        }
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[[v, u]]
    }

    pub fn is_valid(&self) -> bool {
        self.data.iter().all(|d| d.is_finite() && *d >= 0.0)
    }

    pub fn n_returns(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }

    /// Camera-frame 3D points of every nonzero pixel, taken at pixel centers.
    pub fn unproject(&self, calib: &CameraCalib) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        for ((v, u), &d) in self.data.indexed_iter() {
            if d > 0.0 {
                out.push(calib.unproject(u as f64 + 0.5, v as f64 + 0.5, d));
            }
        }
        out
    }

    /// Depth divided by `scale_m`, clamped to `[0, 1]`.
    pub fn normalized(&self, scale_m: f64) -> Array2<f64> {
        self.data.mapv(|d| (d / scale_m).clamp(0.0, 1.0))
    }
}

/// Pinhole projection with a z-buffer: the nearest point per pixel wins.
/// Points behind the camera or outside the image are dropped.
pub fn project_points_to_depth(points: &[[f64; 3]], calib: &CameraCalib, width: usize, height: usize) -> DepthImage {
    let mut img = DepthImage::zeros(width, height);
    for &p in points {
        if p.iter().any(|c| !c.is_finite()) {
            continue;
        }
        let Some((u, v, depth)) = calib.project(p) else {
            continue;
        };
        let (uf, vf) = (u.floor(), v.floor());
        if uf < 0.0 || vf < 0.0 || uf >= width as f64 || vf >= height as f64 {
            continue;
        }
        let cell = &mut img.data[[vf as usize, uf as usize]];
        if *cell == 0.0 || depth < *cell {
            *cell = depth;
        }
    }
    img
}

/// `(height, width)` map repeated into three identical channels.
pub fn expand_depth_channels(depth: &Array2<f64>) -> Array3<f64> {
    let d = depth.view().insert_axis(Axis(2));
    ndarray::concatenate![Axis(2), d, d, d]
}
