use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarPoint {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RadarPointCloud {
    pub points: Vec<RadarPoint>,
}

pub const POINT_CLOUD_HEADER: &str = "range_m,velocity_mps,azimuth_rad,elevation_rad,intensity";

impl RadarPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(POINT_CLOUD_HEADER);
        s.push('\n');
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                p.range_m, p.velocity_mps, p.azimuth_rad, p.elevation_rad, p.intensity
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(POINT_CLOUD_HEADER) {
            return Err("missing point cloud header".into());
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", i + 2))?;
            if v.len() != 5 {
                return Err(format!("line {}: expected 5 fields, got {}", i + 2, v.len()));
            }
            points.push(RadarPoint {
                range_m: v[0],
                velocity_mps: v[1],
                azimuth_rad: v[2],
                elevation_rad: v[3],
                intensity: v[4],
            });
        }
        Ok(Self { points })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_csv(&std::fs::read_to_string(path)?).map_err(|reason| Error::Format {
            path: path.to_path_buf(),
            reason,
        })
    }
}
