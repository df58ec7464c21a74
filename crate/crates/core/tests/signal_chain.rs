//! Both radar processing branches against injected truth and each other.

mod common;

use polarfuse::dsp::{adc_to_points_rd_dbf, adc_to_points_spectrum, ChainConfig};
use polarfuse::sim::{synthesize_adc, RadarConfig, Scatterer, SceneFrame};
use polarfuse::RadarPoint;
use rand::Rng;

fn scene(s: Vec<Scatterer>, seed: u64) -> SceneFrame {
    SceneFrame {
        scatterers: s,
        ..SceneFrame::empty(0, seed)
    }
}

/// Direction sines `(sin az · cos el, sin el)`, the angle FFT's native axes.
fn sines(az: f64, el: f64) -> (f64, f64) {
    (az.sin() * el.cos(), el.sin())
}

/// Within one bin in range and Doppler, one angle FFT bin in each sine.
fn near(p: &RadarPoint, s: &Scatterer, cfg: &RadarConfig, chain: &ChainConfig) -> bool {
    let (pu, pw) = sines(p.azimuth_rad, p.elevation_rad);
    let (su, sw) = sines(s.azimuth_rad, s.elevation_rad);
    (p.range_m - s.range_m).abs() <= cfg.range_resolution()
        && (p.velocity_mps - s.radial_velocity_mps).abs() <= cfg.velocity_resolution()
        && (pu - su).abs() <= 2.0 / chain.angle_fft.azimuth as f64
        && (pw - sw).abs() <= 2.0 / chain.angle_fft.elevation as f64
}

#[test]
fn single_target_gives_exactly_one_point_per_branch() {
    let cfg = RadarConfig::default();
    let chain = ChainConfig::default();
    let mut r = common::rng(17);
    for i in 0..10 {
        let s = Scatterer {
            range_m: r.random_range(5.0..55.0),
            azimuth_rad: r.random_range(-1.0..1.0),
            elevation_rad: r.random_range(-0.25..0.25),
            radial_velocity_mps: r.random_range(-15.0..15.0),
            amplitude: 1.0,
        };
        let adc = synthesize_adc(&scene(vec![s], 100 + i), &cfg).unwrap();
        let a = adc_to_points_spectrum(&adc, &chain).unwrap();
        let b = adc_to_points_rd_dbf(&adc, &chain).unwrap();
        assert_eq!(a.len(), 1, "spectrum branch, target {s:?}: {:?}", a.points);
        assert_eq!(b.len(), 1, "beamforming branch, target {s:?}: {:?}", b.points);
        assert!(near(&a.points[0], &s, &cfg, &chain), "{:?} vs {s:?}", a.points[0]);
        assert!(near(&b.points[0], &s, &cfg, &chain), "{:?} vs {s:?}", b.points[0]);
    }
}

#[test]
fn dbf_recovers_twenty_degrees_within_a_grid_step() {
    let cfg = RadarConfig::default();
    let chain = ChainConfig::default();
    let s = Scatterer {
        range_m: 25.0,
        azimuth_rad: 20f64.to_radians(),
        elevation_rad: 0.0,
        radial_velocity_mps: 0.0,
        amplitude: 1.0,
    };
    let cloud = adc_to_points_rd_dbf(&synthesize_adc(&scene(vec![s], 1), &cfg).unwrap(), &chain).unwrap();
    assert_eq!(cloud.len(), 1);
    assert!((cloud.points[0].azimuth_rad.to_degrees() - 20.0).abs() <= 1.0);
}

#[test]
fn branches_agree_on_well_separated_targets() {
    let cfg = RadarConfig::default();
    let chain = ChainConfig::default();
    let mut r = common::rng(23);
    for trial in 0..6 {
        let k = r.random_range(1..=5);
        // ranges at least 10 m apart keep the targets isolated in range
        let targets: Vec<Scatterer> = (0..k)
            .map(|i| Scatterer {
                range_m: 6.0 + 11.0 * i as f64 + r.random_range(0.0..2.0),
                azimuth_rad: r.random_range(-1.0..1.0),
                elevation_rad: r.random_range(-0.25..0.25),
                radial_velocity_mps: r.random_range(-15.0..15.0),
                amplitude: r.random_range(0.7..1.5),
            })
            .collect();
        let adc = synthesize_adc(&scene(targets.clone(), 300 + trial), &cfg).unwrap();
        let a = adc_to_points_spectrum(&adc, &chain).unwrap();
        let b = adc_to_points_rd_dbf(&adc, &chain).unwrap();
        assert_eq!(a.len(), k, "spectrum branch: {:?}", a.points);
        assert_eq!(b.len(), k, "beamforming branch: {:?}", b.points);
        for t in &targets {
            let pa = a
                .points
                .iter()
                .find(|p| near(p, t, &cfg, &chain))
                .expect("spectrum branch misses a target");
            let pb = b
                .points
                .iter()
                .find(|p| near(p, t, &cfg, &chain))
                .expect("beamforming branch misses a target");
            assert!((pa.range_m - pb.range_m).abs() <= cfg.range_resolution());
            assert!((pa.velocity_mps - pb.velocity_mps).abs() <= cfg.velocity_resolution());
        }
    }
}
