use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// FMCW waveform and MIMO array parameters.
///
/// Antenna offsets are `[horizontal, vertical]` in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConfig {
    pub carrier_freq_hz: f64,
    pub chirp_slope_hz_per_s: f64,
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    pub n_chirps: usize,
    pub chirp_interval_s: f64,
    pub tx_positions_m: Vec<[f64; 2]>,
    pub rx_positions_m: Vec<[f64; 2]>,
    pub noise_std: f64,
}

impl Default for RadarConfig {
    /// 77 GHz, 256 samples x 64 chirps, 300 MHz sweep, 8x4 half-wavelength
    /// virtual array (4 TX stacked vertically, 8 RX in a row).
    fn default() -> Self {
        let lambda = SPEED_OF_LIGHT / 77e9;
        let d = 0.5 * lambda;
        let sample_rate = 10e6;
        let n_samples = 256;
        let sweep = n_samples as f64 / sample_rate;
        Self {
            carrier_freq_hz: 77e9,
            chirp_slope_hz_per_s: 300e6 / sweep,
            sample_rate_hz: sample_rate,
            n_samples,
            n_chirps: 64,
            chirp_interval_s: 40e-6,
            tx_positions_m: (0..4).map(|k| [0.0, k as f64 * d]).collect(),
            rx_positions_m: (0..8).map(|k| [k as f64 * d, 0.0]).collect(),
            noise_std: 10f64.powf(-30.0 / 20.0),
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("chirp_slope_hz_per_s", self.chirp_slope_hz_per_s),
            ("sample_rate_hz", self.sample_rate_hz),
            ("chirp_interval_s", self.chirp_interval_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_samples == 0 || self.n_chirps == 0 {
            return Err(Error::Config("n_samples and n_chirps must be positive".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if self.chirp_interval_s < self.sweep_time_s() {
            return Err(Error::Config(format!(
                "chirp interval {} s shorter than sampling window {} s",
                self.chirp_interval_s,
                self.sweep_time_s()
            )));
        }
        build_virtual_array(&self.tx_positions_m, &self.rx_positions_m)?;
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Duration of the sampled part of a chirp.
    pub fn sweep_time_s(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.chirp_slope_hz_per_s * self.sweep_time_s()
    }

    /// c / 2B.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz())
    }

    /// c·fs / 4S.
    pub fn max_range(&self) -> f64 {
        SPEED_OF_LIGHT * self.sample_rate_hz / (4.0 * self.chirp_slope_hz_per_s)
    }

    /// λ / 4Tc.
    pub fn max_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_interval_s)
    }

    /// λ / (2·N·Tc).
    pub fn velocity_resolution(&self) -> f64 {
        self.wavelength() / (2.0 * self.n_chirps as f64 * self.chirp_interval_s)
    }

    pub fn n_virtual(&self) -> usize {
        self.tx_positions_m.len() * self.rx_positions_m.len()
    }

    pub fn virtual_array(&self) -> Result<Vec<[f64; 2]>> {
        build_virtual_array(&self.tx_positions_m, &self.rx_positions_m)
    }

    /// Beat frequency 2·S·R/c.
    pub fn beat_frequency(&self, range_m: f64) -> f64 {
        2.0 * self.chirp_slope_hz_per_s * range_m / SPEED_OF_LIGHT
    }

    /// Doppler frequency 2v/λ.
    pub fn doppler_frequency(&self, velocity_mps: f64) -> f64 {
        2.0 * velocity_mps / self.wavelength()
    }
}

/// Virtual MIMO aperture: every TX+RX sum, TX-major.
pub fn build_virtual_array(tx: &[[f64; 2]], rx: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    if tx.is_empty() || rx.is_empty() {
        return Err(Error::Config("need at least one TX and one RX antenna".into()));
    }
    Ok(tx
        .iter()
        .flat_map(|t| rx.iter().map(move |r| [t[0] + r[0], t[1] + r[1]]))
        .collect())
}
