//! File formats, depth construction, scene rendering and pipeline orchestration.

pub mod binfmt;
mod config;
mod depth;
mod figures;
mod lidar;
mod pipeline;
mod render;
mod sample;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use config::{Paths, PipelineConfig, SceneSetup, Seeds};
pub use depth::{expand_depth_channels, project_points_to_depth, DepthImage};
pub use figures::{bev_figure_svg, DRAW_SCORE_MIN};
pub use lidar::{ray_box_distance, scan_boxes, LidarConfig};
pub use pipeline::{frame_dir, group_frames, predict_samples, run_pipeline, Branch, Manifest, Mode, RunSummary};
pub use render::{background_color, encode_ppm, render_scene_image};
pub use sample::{build_sample, fusion_input, radar_ra_input, scene_depth};

/// Writes `bytes` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}
