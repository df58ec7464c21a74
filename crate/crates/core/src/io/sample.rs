//! Assembly of network inputs from a simulated scene.

use ndarray::Array2;

use super::config::PipelineConfig;
use super::depth::{expand_depth_channels, project_points_to_depth, DepthImage};
use super::lidar::scan_boxes;
use super::render::render_scene_image;
use crate::detect::TrainSample;
use crate::dsp::{adc_to_spectrum, collapse_to_ra, Spectrum4D};
use crate::error::{Error, Result};
use crate::fusion::FusionInput;
use crate::sim::{synthesize_adc, AdcCube, SceneFrame};

/// Range-azimuth network input: the first `rows` range bins of the
/// log-compressed map, scaled so the frame maximum is 1.
pub fn radar_ra_input(spec: &Spectrum4D, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let ra = collapse_to_ra(spec);
    if ra.n_range < rows || ra.n_azimuth != cols {
        return Err(Error::Shape(format!(
            "range-azimuth map {}x{} cannot feed a {rows}x{cols} input",
            ra.n_range, ra.n_azimuth
        )));
    }
    let ra = ra.crop_range(rows);
    let peak = ra.data.iter().cloned().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    Ok(Array2::from_shape_vec((rows, cols), ra.data.iter().map(|v| v * scale).collect()).expect("cropped map size"))
}

/// LiDAR-projected depth of the scene boxes.
pub fn scene_depth(scene: &SceneFrame, cfg: &PipelineConfig) -> Result<DepthImage> {
    let pts = scan_boxes(&scene.boxes, &cfg.lidar)?;
    Ok(project_points_to_depth(
        &pts,
        &cfg.calib,
        cfg.calib.width_px,
        cfg.calib.height_px,
    ))
}

/// Network input from an already synthesized ADC cube.
pub fn fusion_input(scene: &SceneFrame, adc: &AdcCube, cfg: &PipelineConfig) -> Result<FusionInput> {
    let spec = adc_to_spectrum(adc, &cfg.chain)?;
    let f = &cfg.model.fusion;
    let depth = scene_depth(scene, cfg)?;
    Ok(FusionInput {
        rgb: render_scene_image(scene, &cfg.calib),
        depth3: expand_depth_channels(&depth.normalized(cfg.r_max_m())),
        ra: radar_ra_input(&spec, f.ra_rows, f.ra_cols)?,
    })
}

pub fn build_sample(scene: &SceneFrame, cfg: &PipelineConfig) -> Result<TrainSample> {
    let adc = synthesize_adc(scene, &cfg.radar)?;
    Ok(TrainSample {
        frame_id: scene.frame_id,
        input: fusion_input(scene, &adc, cfg)?,
        gts: scene.boxes.clone(),
    })
}
