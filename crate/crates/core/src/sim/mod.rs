//! Synthetic FMCW MIMO radar: waveform/array configuration, point-scatterer
//! scenes and raw ADC cube synthesis.

mod config;
mod scene;
mod synth;

pub use config::{build_virtual_array, RadarConfig, SPEED_OF_LIGHT};
pub use scene::{generate_random_scene, PolarSector, Scatterer, SceneFrame};
pub use synth::{synthesize_adc, AdcCube};
