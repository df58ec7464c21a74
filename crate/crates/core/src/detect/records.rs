//! Detection records as comma-separated text.

use std::path::Path;

use super::boxes::{Box3D, Detection};
use crate::error::{Error, Result};

pub const DETECTION_HEADER: &str = "frame_id,class_id,score,x,y,z,l,w,h,yaw";

pub fn detections_to_csv(dets: &[Detection]) -> String {
    let mut s = String::from(DETECTION_HEADER);
    s.push('\n');
    for d in dets {
        let b = &d.bbox;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            d.frame_id, d.class_id, d.score, b.x, b.y, b.z, b.l, b.w, b.h, b.yaw
        ));
    }
    s
}

pub fn detections_from_csv(text: &str) -> std::result::Result<Vec<Detection>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(DETECTION_HEADER) {
        return Err(format!("expected header {DETECTION_HEADER}"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(format!("line {}: expected 10 fields, got {}", i + 2, f.len()));
            }
            let num = |k: usize| {
                f[k].parse::<f64>()
                    .map_err(|e| format!("line {}: field {}: {e}", i + 2, k + 1))
            };
            let score = num(2)?;
            if !(0.0..=1.0).contains(&score) {
                return Err(format!("line {}: score {score} outside [0, 1]", i + 2));
            }
            let bbox = Box3D {
                x: num(3)?,
                y: num(4)?,
                z: num(5)?,
                l: num(6)?,
                w: num(7)?,
                h: num(8)?,
                yaw: num(9)?,
            };
            bbox.validate().map_err(|e| format!("line {}: {e}", i + 2))?;
            Ok(Detection {
                frame_id: f[0].parse().map_err(|e| format!("line {}: frame_id: {e}", i + 2))?,
                class_id: f[1].parse().map_err(|e| format!("line {}: class_id: {e}", i + 2))?,
                score,
                bbox,
            })
        })
        .collect()
}

pub fn write_detections(dets: &[Detection], path: &Path) -> Result<()> {
    crate::io::write_atomic(path, detections_to_csv(dets).as_bytes())
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    detections_from_csv(&std::fs::read_to_string(path)?).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
