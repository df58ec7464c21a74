use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::{AdcCube, RadarConfig};

/// Taper applied along fast and slow time before the FFTs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n < 2 => vec![1.0; n],
            // periodic form: an off-grid tone then decays monotonically
            // away from its peak bin, with no sampled sidelobe maxima
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Per-antenna range-Doppler maps, C-ordered as (antenna, Doppler, range).
/// The Doppler axis is fft-shifted: bin `n_doppler / 2` is zero velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct RdMapSet {
    pub data: Vec<Complex64>,
    pub n_virtual: usize,
    pub n_doppler: usize,
    pub n_range: usize,
    /// Meters per range bin.
    pub range_resolution: f64,
    /// m/s per Doppler bin.
    pub velocity_resolution: f64,
    pub config: RadarConfig,
}

impl RdMapSet {
    #[inline]
    pub fn index(&self, antenna: usize, doppler: usize, range: usize) -> usize {
        (antenna * self.n_doppler + doppler) * self.n_range + range
    }

    pub fn get(&self, antenna: usize, doppler: usize, range: usize) -> Complex64 {
        self.data[self.index(antenna, doppler, range)]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn range_of_bin(&self, bin: usize) -> f64 {
        bin as f64 * self.range_resolution
    }

    pub fn velocity_of_bin(&self, bin: usize) -> f64 {
        (bin as f64 - (self.n_doppler / 2) as f64) * self.velocity_resolution
    }

    /// Antenna-averaged power map, row-major (range, Doppler).
    pub fn mean_power(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.n_range * self.n_doppler];
        for n in 0..self.n_virtual {
            for d in 0..self.n_doppler {
                for r in 0..self.n_range {
                    p[r * self.n_doppler + d] += self.get(n, d, r).norm_sqr();
                }
            }
        }
        let scale = 1.0 / self.n_virtual as f64;
        p.iter_mut().for_each(|v| *v *= scale);
        p
    }
}

/// Circular shift so that index `n / 2` holds the DC term.
pub(crate) fn fft_shift<T: Copy>(buf: &mut [T]) {
    let n = buf.len();
    buf.rotate_right(n / 2);
}

/// Fast-time spectra, C-ordered as (antenna, chirp, range bin).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfiles {
    pub data: Vec<Complex64>,
    pub n_virtual: usize,
    pub n_chirps: usize,
    pub n_range: usize,
    pub config: RadarConfig,
}

impl RangeProfiles {
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Range FFT over fast time for every (antenna, chirp). Arbitrary lengths
/// go through rustfft's mixed-radix/Bluestein plans.
pub fn range_fft(adc: &AdcCube, window: Window) -> Result<RangeProfiles> {
    adc.validate()?;
    let (nv, nc, ns) = (adc.n_virtual, adc.n_chirps, adc.n_samples);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(ns);
    let w = window.coefficients(ns);
    let mut data: Vec<Complex64> = adc
        .data
        .iter()
        .enumerate()
        .map(|(i, z)| Complex64::new(z.re as f64, z.im as f64) * w[i % ns])
        .collect();
    for row in data.chunks_exact_mut(ns) {
        fft.process(row);
    }
    Ok(RangeProfiles {
        data,
        n_virtual: nv,
        n_chirps: nc,
        n_range: ns,
        config: adc.config.clone(),
    })
}

/// Doppler FFT over slow time for every (antenna, range bin), fft-shifted.
pub fn doppler_fft(profiles: &RangeProfiles, window: Window) -> RdMapSet {
    let (nv, nc, ns) = (profiles.n_virtual, profiles.n_chirps, profiles.n_range);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nc);
    let w = window.coefficients(nc);
    let mut out = vec![Complex64::new(0.0, 0.0); nv * nc * ns];
    let mut column = vec![Complex64::new(0.0, 0.0); nc];
    for n in 0..nv {
        for r in 0..ns {
            for k in 0..nc {
                column[k] = profiles.data[(n * nc + k) * ns + r] * w[k];
            }
            fft.process(&mut column);
            fft_shift(&mut column);
            for d in 0..nc {
                out[(n * nc + d) * ns + r] = column[d];
            }
        }
    }
    RdMapSet {
        data: out,
        n_virtual: nv,
        n_doppler: nc,
        n_range: ns,
        range_resolution: profiles.config.range_resolution(),
        velocity_resolution: profiles.config.velocity_resolution(),
        config: profiles.config.clone(),
    }
}

/// Range FFT then Doppler FFT with a rectangular window.
pub fn range_doppler_fft(adc: &AdcCube) -> Result<RdMapSet> {
    range_doppler_fft_windowed(adc, Window::Rectangular)
}

pub fn range_doppler_fft_windowed(adc: &AdcCube, window: Window) -> Result<RdMapSet> {
    Ok(doppler_fft(&range_fft(adc, window)?, window))
}
