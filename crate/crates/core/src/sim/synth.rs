use std::f64::consts::PI;
use std::path::Path;

use num_complex::{Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::RadarConfig;
use super::scene::SceneFrame;
use crate::error::{Error, Result};
use crate::io::binfmt;

/// Raw ADC samples, C-ordered as (virtual antenna, chirp, fast-time sample).
#[derive(Debug, Clone, PartialEq)]
pub struct AdcCube {
    pub data: Vec<Complex32>,
    pub n_virtual: usize,
    pub n_chirps: usize,
    pub n_samples: usize,
    pub config: RadarConfig,
}

impl AdcCube {
    pub fn zeros(config: &RadarConfig) -> Self {
        let (v, c, s) = (config.n_virtual(), config.n_chirps, config.n_samples);
        Self {
            data: vec![Complex32::new(0.0, 0.0); v * c * s],
            n_virtual: v,
            n_chirps: c,
            n_samples: s,
            config: config.clone(),
        }
    }

    #[inline]
    pub fn index(&self, antenna: usize, chirp: usize, sample: usize) -> usize {
        (antenna * self.n_chirps + chirp) * self.n_samples + sample
    }

    pub fn get(&self, antenna: usize, chirp: usize, sample: usize) -> Complex32 {
        self.data[self.index(antenna, chirp, sample)]
    }

    /// Σ|x|² accumulated in f64.
    pub fn energy(&self) -> f64 {
        self.data
            .iter()
            .map(|z| (z.re as f64).powi(2) + (z.im as f64).powi(2))
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_virtual != self.config.n_virtual()
            || self.n_chirps != self.config.n_chirps
            || self.n_samples != self.config.n_samples
        {
            return Err(Error::Shape(format!(
                "cube ({}, {}, {}) does not match radar config",
                self.n_virtual, self.n_chirps, self.n_samples
            )));
        }
        if self.data.len() != self.n_virtual * self.n_chirps * self.n_samples {
            return Err(Error::Shape("cube data length".into()));
        }
        if self.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("ADC cube"));
        }
        Ok(())
    }

    /// Writes the `ADC4` container.
    pub fn write(&self, path: &Path) -> Result<()> {
        let dims = [self.n_virtual, self.n_chirps, self.n_samples];
        let mut floats = Vec::with_capacity(self.data.len() * 2);
        for z in &self.data {
            floats.push(z.re);
            floats.push(z.im);
        }
        crate::io::write_atomic(path, &binfmt::encode(binfmt::ADC_MAGIC, &dims, &floats))
    }

    /// Reads an `ADC4` container; dims must agree with `config`.
    pub fn read(path: &Path, config: &RadarConfig) -> Result<Self> {
        let (dims, floats) = binfmt::decode_file(path, binfmt::ADC_MAGIC, 3)?;
        let data = floats.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect();
        let cube = Self {
            data,
            n_virtual: dims[0],
            n_chirps: dims[1],
            n_samples: dims[2],
            config: config.clone(),
        };
        cube.validate().map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(cube)
    }
}

/// Seed offset separating the noise stream from the scene-layout stream.
const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Synthesizes the IF/ADC cube for every scatterer in `scene`.
///
/// Each sample is `Σ a·exp(j2π[f_b·t + f_d·k·Tc + (x·sinφ·cosθ + z·sinθ)/λ])`
/// plus circular complex Gaussian noise of total std `noise_std`.
pub fn synthesize_adc(scene: &SceneFrame, config: &RadarConfig) -> Result<AdcCube> {
    config.validate()?;
    for s in &scene.scatterers {
        s.check(config)?;
    }
    let elements = config.virtual_array()?;
    let lambda = config.wavelength();
    let mut cube = AdcCube::zeros(config);
    let (nv, nc, ns) = (cube.n_virtual, cube.n_chirps, cube.n_samples);

    let mut acc = vec![Complex64::new(0.0, 0.0); nv * nc * ns];
    let mut fast = vec![Complex64::new(0.0, 0.0); ns];
    let mut slow = vec![Complex64::new(0.0, 0.0); nc];
    let mut spatial = vec![Complex64::new(0.0, 0.0); nv];
    for s in &scene.scatterers {
        let f_beat = config.beat_frequency(s.range_m);
        let f_dopp = config.doppler_frequency(s.radial_velocity_mps);
        let (sa, _) = s.azimuth_rad.sin_cos();
        let (se, ce) = s.elevation_rad.sin_cos();
        for (t, z) in fast.iter_mut().enumerate() {
            *z = Complex64::from_polar(1.0, 2.0 * PI * f_beat * t as f64 / config.sample_rate_hz);
        }
        for (k, z) in slow.iter_mut().enumerate() {
            *z = Complex64::from_polar(1.0, 2.0 * PI * f_dopp * k as f64 * config.chirp_interval_s);
        }
        for (n, z) in spatial.iter_mut().enumerate() {
            let [dx, dz] = elements[n];
            *z = Complex64::from_polar(s.amplitude, 2.0 * PI * (dx * sa * ce + dz * se) / lambda);
        }
        for n in 0..nv {
            for k in 0..nc {
                let coef = spatial[n] * slow[k];
                let row = &mut acc[(n * nc + k) * ns..(n * nc + k + 1) * ns];
                for (a, f) in row.iter_mut().zip(&fast) {
                    *a += coef * f;
                }
            }
        }
    }

    if config.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed ^ NOISE_STREAM);
        let sigma = config.noise_std / 2f64.sqrt();
        for a in acc.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *a += Complex64::new(sigma * re, sigma * im);
        }
    }

    for (dst, src) in cube.data.iter_mut().zip(&acc) {
        *dst = Complex32::new(src.re as f32, src.im as f32);
    }
    Ok(cube)
}
