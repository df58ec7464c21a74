//! Camera + 4D radar fusion for 3D object detection at desk scale: FMCW
//! simulation, radar signal processing, polar BEV attention fusion, a
//! set-prediction detection head and rotated-box evaluation.

pub mod detect;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod sim;

pub use detect::{Box3D, Detection};
pub use dsp::{RadarPoint, RadarPointCloud, RdMapSet, Spectrum4D};
pub use error::{Error, Result};
pub use sim::{AdcCube, RadarConfig, Scatterer, SceneFrame};
