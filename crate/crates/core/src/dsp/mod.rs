//! Radar processing chain: range-Doppler FFT, angle FFT to a 4D spectrum,
//! CA-CFAR on either the spectrum or the RD maps, and digital beamforming.

mod angle;
mod cfar;
mod dbf;
mod pointcloud;
mod ra;
mod rd;

pub use angle::{angle_fft, grid_layout, GridLayout, Spectrum4D, SpectrumAxes};
pub use cfar::{
    cfar_detect_4d, cfar_detect_4d_cells, cfar_mask_2d, cfar_mask_4d, cfar_on_rd, CfarConfig, SpectrumDetection,
    TargetCell,
};
pub use dbf::{dbf_angles, AngularGrid};
pub use pointcloud::{RadarPoint, RadarPointCloud, POINT_CLOUD_HEADER};
pub use ra::{collapse_to_ra, RaMap};
pub use rd::{doppler_fft, range_doppler_fft, range_doppler_fft_windowed, range_fft, RangeProfiles, RdMapSet, Window};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::AdcCube;

/// Angle FFT sizes used by the spectrum branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AngleFftSize {
    pub azimuth: usize,
    pub elevation: usize,
}

impl Default for AngleFftSize {
    fn default() -> Self {
        Self {
            azimuth: 64,
            elevation: 16,
        }
    }
}

/// Processing-chain settings shared by both branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// Range/Doppler taper. Hann keeps range and Doppler sidelobe ridges of
    /// strong targets under the CFAR threshold.
    pub window: Window,
    pub angle_fft: AngleFftSize,
    pub cfar: CfarConfig,
    pub dbf_grid: AngularGrid,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            window: Window::Hann,
            angle_fft: AngleFftSize::default(),
            cfar: CfarConfig::default(),
            dbf_grid: AngularGrid::default(),
        }
    }
}

/// Steps 4 and 5a: ADC cube to 4D power spectrum.
pub fn adc_to_spectrum(adc: &AdcCube, chain: &ChainConfig) -> Result<Spectrum4D> {
    let rd = range_doppler_fft_windowed(adc, chain.window)?;
    let layout = grid_layout(&adc.config.virtual_array()?)?;
    angle_fft(&rd, &layout, chain.angle_fft.azimuth, chain.angle_fft.elevation)
}

/// Steps 4, 5a and 6a: ADC cube to CFAR point cloud.
pub fn adc_to_points_spectrum(adc: &AdcCube, chain: &ChainConfig) -> Result<RadarPointCloud> {
    cfar_detect_4d(&adc_to_spectrum(adc, chain)?, &chain.cfar)
}

/// Steps 4, 5b and 6b: ADC cube to beamformed point cloud.
pub fn adc_to_points_rd_dbf(adc: &AdcCube, chain: &ChainConfig) -> Result<RadarPointCloud> {
    let rd = range_doppler_fft_windowed(adc, chain.window)?;
    let cells = cfar_on_rd(&rd, &chain.cfar)?;
    dbf_angles(
        &cells,
        &adc.config.virtual_array()?,
        adc.config.wavelength(),
        &chain.dbf_grid,
    )
}
