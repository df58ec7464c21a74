//! Pipeline configuration document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::lidar::LidarConfig;
use crate::detect::{LossWeights, ModelConfig, ModelContext, TrainHyper};
use crate::dsp::ChainConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::fusion::CameraCalib;
use crate::sim::{PolarSector, RadarConfig};

/// Explicit seeds of every random stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    /// Frame `i` uses scene seed `scene + i`; radar noise derives from it.
    pub scene: u64,
    pub model: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { scene: 1, model: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSetup {
    pub n_frames: usize,
    pub objects_per_frame: usize,
    pub sector: PolarSector,
}

impl Default for SceneSetup {
    fn default() -> Self {
        Self {
            n_frames: 4,
            objects_per_frame: 1,
            sector: PolarSector::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("run"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seeds: Seeds,
    pub scene: SceneSetup,
    pub radar: RadarConfig,
    pub chain: ChainConfig,
    pub calib: CameraCalib,
    pub lidar: LidarConfig,
    pub model: ModelConfig,
    pub loss: LossWeights,
    pub train: TrainHyper,
    pub eval: EvalConfig,
    pub paths: Paths,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.chain.cfar.validate()?;
        self.calib.validate()?;
        self.lidar.validate()?;
        self.model.validate()?;
        self.loss.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        let f = &self.model.fusion;
        if f.image_width != self.calib.width_px || f.image_height != self.calib.height_px {
            return Err(Error::Config(
                "camera image size differs from the fusion image size".into(),
            ));
        }
        if f.ra_cols != self.chain.angle_fft.azimuth {
            return Err(Error::Config(format!(
                "range-azimuth columns {} differ from azimuth FFT size {}",
                f.ra_cols, self.chain.angle_fft.azimuth
            )));
        }
        if f.ra_rows > self.radar.n_samples {
            return Err(Error::Config("range-azimuth rows exceed the range bins".into()));
        }
        Ok(())
    }

    /// Range covered by the radar input rows, which is also the BEV extent.
    pub fn r_max_m(&self) -> f64 {
        self.model.fusion.ra_rows as f64 * self.radar.range_resolution()
    }

    pub fn model_context(&self) -> ModelContext {
        ModelContext {
            config: self.model.clone(),
            calib: self.calib,
            r_max_m: self.r_max_m(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
