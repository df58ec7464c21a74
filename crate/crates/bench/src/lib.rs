//! Deterministic fixtures shared by the benchmarks.

use ndarray::Array2;
use polarfuse::detect::Box3D;
use polarfuse::sim::{synthesize_adc, AdcCube, RadarConfig, Scatterer, SceneFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default-config cube holding three scatterers.
pub fn three_target_cube() -> AdcCube {
    let scene = SceneFrame {
        scatterers: vec![
            Scatterer {
                range_m: 12.0,
                azimuth_rad: 0.2,
                elevation_rad: 0.0,
                radial_velocity_mps: 3.0,
                amplitude: 1.0,
            },
            Scatterer {
                range_m: 31.5,
                azimuth_rad: -0.4,
                elevation_rad: 0.1,
                radial_velocity_mps: -6.0,
                amplitude: 0.8,
            },
            Scatterer {
                range_m: 50.2,
                azimuth_rad: 0.7,
                elevation_rad: -0.05,
                radial_velocity_mps: 0.0,
                amplitude: 1.2,
            },
        ],
        ..SceneFrame::empty(0, 11)
    };
    synthesize_adc(&scene, &RadarConfig::default()).expect("valid fixture scene")
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub fn random_boxes(n: usize, seed: u64) -> Vec<Box3D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Box3D::new(
                [
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-0.5..0.5),
                ],
                [
                    rng.random_range(1.0..5.0),
                    rng.random_range(1.0..3.0),
                    rng.random_range(1.0..2.0),
                ],
                rng.random_range(-3.14..3.14),
            )
            .expect("positive extents")
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
