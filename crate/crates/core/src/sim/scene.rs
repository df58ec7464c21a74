use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RadarConfig;
use crate::detect::Box3D;
use crate::error::{Error, Result};
use crate::eval::rotated_iou_bev;

/// Ideal point reflector, in radar spherical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    pub radial_velocity_mps: f64,
    pub amplitude: f64,
}

impl Scatterer {
    pub fn from_cartesian(p: [f64; 3], radial_velocity_mps: f64, amplitude: f64) -> Self {
        let range = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        Self {
            range_m: range,
            azimuth_rad: p[1].atan2(p[0]),
            elevation_rad: (p[2] / range).asin(),
            radial_velocity_mps,
            amplitude,
        }
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let (se, ce) = self.elevation_rad.sin_cos();
        let (sa, ca) = self.azimuth_rad.sin_cos();
        [self.range_m * ce * ca, self.range_m * ce * sa, self.range_m * se]
    }

    /// Checks the geometric bounds and the unambiguous range/velocity of `config`.
    pub fn check(&self, config: &RadarConfig) -> Result<()> {
        let vals = [
            self.range_m,
            self.azimuth_rad,
            self.elevation_rad,
            self.radial_velocity_mps,
            self.amplitude,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scatterer"));
        }
        if self.amplitude <= 0.0 {
            return Err(Error::Rejected(format!(
                "amplitude {} must be positive",
                self.amplitude
            )));
        }
        if self.azimuth_rad.abs() >= FRAC_PI_2 || self.elevation_rad.abs() >= FRAC_PI_4 {
            return Err(Error::Rejected(format!(
                "angles (az {}, el {}) outside field of view",
                self.azimuth_rad, self.elevation_rad
            )));
        }
        if self.range_m <= 0.0 || self.range_m >= config.max_range() {
            return Err(Error::Rejected(format!(
                "range {} m outside (0, {}) m",
                self.range_m,
                config.max_range()
            )));
        }
        if self.radial_velocity_mps.abs() >= config.max_velocity() {
            return Err(Error::Rejected(format!(
                "|velocity| {} m/s exceeds unambiguous {} m/s",
                self.radial_velocity_mps.abs(),
                config.max_velocity()
            )));
        }
        Ok(())
    }
}

/// One synthetic frame: ground-truth boxes and the reflectors that populate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFrame {
    pub frame_id: u64,
    pub rng_seed: u64,
    #[serde(default)]
    pub boxes: Vec<Box3D>,
    #[serde(default)]
    pub scatterers: Vec<Scatterer>,
}

impl SceneFrame {
    pub fn empty(frame_id: u64, rng_seed: u64) -> Self {
        Self {
            frame_id,
            rng_seed,
            boxes: Vec::new(),
            scatterers: Vec::new(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_toml()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Polar sector in which random objects are placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolarSector {
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub azimuth_min_rad: f64,
    pub azimuth_max_rad: f64,
    /// Height of the road surface in the radar frame.
    pub ground_z_m: f64,
}

impl Default for PolarSector {
    fn default() -> Self {
        Self {
            range_min_m: 8.0,
            range_max_m: 55.0,
            azimuth_min_rad: -40f64.to_radians(),
            azimuth_max_rad: 40f64.to_radians(),
            ground_z_m: -1.0,
        }
    }
}

impl PolarSector {
    fn validate(&self) -> Result<()> {
        let ok = self.range_min_m > 0.0
            && self.range_max_m > self.range_min_m
            && self.azimuth_min_rad < self.azimuth_max_rad
            && self.azimuth_min_rad > -FRAC_PI_2
            && self.azimuth_max_rad < FRAC_PI_2;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid polar sector {self:?}")))
        }
    }
}

const MAX_PLACEMENT_TRIES: usize = 2000;
/// Extra footprint kept free around each placed object.
const CLEARANCE_M: f64 = 1.0;

/// Places `n_objects` sedan-sized boxes with disjoint footprints inside
/// `bounds`, each carrying 3 to 8 reflectors on its surface.
pub fn generate_random_scene(n_objects: usize, bounds: &PolarSector, rng_seed: u64) -> Result<SceneFrame> {
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut scene = SceneFrame::empty(0, rng_seed);

    for obj in 0..n_objects {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let l: f64 = rng.random_range(3.8..4.8);
            let w: f64 = rng.random_range(1.6..2.0);
            let h: f64 = rng.random_range(1.4..1.7);
            let margin = 0.5 * (l * l + w * w).sqrt();
            let (r_lo, r_hi) = (bounds.range_min_m + margin, bounds.range_max_m - margin);
            if r_lo >= r_hi {
                return Err(Error::Generation("sector too shallow for a sedan".into()));
            }
            let r = rng.random_range(r_lo..r_hi);
            let az = rng.random_range(bounds.azimuth_min_rad..bounds.azimuth_max_rad);
            let yaw = rng.random_range(-PI..PI);
            let cand = Box3D::new(
                [r * az.cos(), r * az.sin(), bounds.ground_z_m + 0.5 * h],
                [l, w, h],
                yaw,
            )?;
            let inflated = Box3D {
                l: l + CLEARANCE_M,
                w: w + CLEARANCE_M,
                ..cand
            };
            let clear = scene.boxes.iter().all(|b| {
                let other = Box3D {
                    l: b.l + CLEARANCE_M,
                    w: b.w + CLEARANCE_M,
                    ..*b
                };
                rotated_iou_bev(&inflated, &other).map(|v| v == 0.0).unwrap_or(false)
            });
            if clear {
                placed = Some(cand);
                break;
            }
        }
        let bbox = placed.ok_or_else(|| {
            Error::Generation(format!(
                "could not place object {obj} after {MAX_PLACEMENT_TRIES} tries"
            ))
        })?;

        let speed = rng.random_range(0.0..8.0);
        let vel = [speed * bbox.yaw.cos(), speed * bbox.yaw.sin(), 0.0];
        let n_scat = rng.random_range(3..=8);
        for _ in 0..n_scat {
            let p = bbox.from_local(random_face_point(&mut rng, &bbox));
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let radial = (vel[0] * p[0] + vel[1] * p[1] + vel[2] * p[2]) / norm;
            let amp = rng.random_range(0.5..1.5);
            scene.scatterers.push(Scatterer::from_cartesian(p, radial, amp));
        }
        scene.boxes.push(bbox);
    }
    Ok(scene)
}

/// Uniform point on one of the four sides or the roof, pulled slightly inside.
fn random_face_point(rng: &mut ChaCha8Rng, b: &Box3D) -> [f64; 3] {
    const INSET: f64 = 0.98;
    let (hl, hw, hh) = (0.5 * b.l * INSET, 0.5 * b.w * INSET, 0.5 * b.h * INSET);
    let u: f64 = rng.random_range(-1.0..1.0);
    let v: f64 = rng.random_range(-1.0..1.0);
    match rng.random_range(0..5) {
        0 => [hl, u * hw, v * hh],
        1 => [-hl, u * hw, v * hh],
        2 => [u * hl, hw, v * hh],
        3 => [u * hl, -hw, v * hh],
        _ => [u * hl, v * hw, hh],
    }
}
