//! Property-based invariants across the crate.

mod common;

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use polarfuse::detect::{
    detections_from_csv, detections_to_csv, set_loss, wrap_angle, Box3D, Detection, HeadOutputs, LossWeights,
    ModelConfig, ModelParams,
};
use polarfuse::dsp::{adc_to_spectrum, cfar_mask_4d, CfarConfig, ChainConfig, RadarPoint, RadarPointCloud, Spectrum4D};
use polarfuse::eval::{average_precision, iou_3d, rotated_iou_bev, EvalConfig, EvalFrame};
use polarfuse::fusion::{decode_checkpoint, encode_checkpoint, softmax_rows, CameraCalib};
use polarfuse::io::{project_points_to_depth, PipelineConfig};
use polarfuse::sim::{synthesize_adc, AdcCube, RadarConfig, Scatterer, SceneFrame};
use proptest::prelude::*;

fn arb_box() -> impl Strategy<Value = Box3D> {
    (
        -20.0..20.0f64,
        -20.0..20.0f64,
        -2.0..2.0f64,
        0.3..6.0f64,
        0.3..3.0f64,
        0.3..3.0f64,
        -PI..PI,
    )
        .prop_map(|(x, y, z, l, w, h, yaw)| Box3D::new([x, y, z], [l, w, h], yaw).unwrap())
}

/// Pairs near each other, so that most of them overlap.
fn arb_close_pair() -> impl Strategy<Value = (Box3D, Box3D)> {
    (
        arb_box(),
        -2.0..2.0f64,
        -2.0..2.0f64,
        -1.0..1.0f64,
        0.3..6.0f64,
        0.3..3.0f64,
        0.3..3.0f64,
        -PI..PI,
    )
        .prop_map(|(a, dx, dy, dz, l, w, h, yaw)| {
            (a, Box3D::new([a.x + dx, a.y + dy, a.z + dz], [l, w, h], yaw).unwrap())
        })
}

fn small_radar() -> RadarConfig {
    RadarConfig {
        n_samples: 64,
        n_chirps: 16,
        ..RadarConfig::default()
    }
}

fn arb_scatterer() -> impl Strategy<Value = Scatterer> {
    (0.05..0.9f64, -1.0..1.0f64, -0.25..0.25f64, -0.9..0.9f64, 0.1..2.0f64).prop_map(|(r, az, el, v, a)| {
        let cfg = small_radar();
        Scatterer {
            range_m: r * cfg.max_range(),
            azimuth_rad: az,
            elevation_rad: el,
            radial_velocity_mps: v * cfg.max_velocity(),
            amplitude: a,
        }
    })
}

fn arb_frames() -> impl Strategy<Value = Vec<EvalFrame>> {
    let frame = (
        prop::collection::vec(arb_box(), 1..4),
        prop::collection::vec((arb_box(), 0.0..1.0f64), 0..5),
        prop::collection::vec((-0.8..0.8f64, 0.0..1.0f64), 3),
    )
        .prop_map(|(gts, extra, jitter)| {
            let mut dets: Vec<Detection> = gts
                .iter()
                .zip(jitter.iter().cycle())
                .map(|(g, &(d, s))| Detection {
                    frame_id: 0,
                    class_id: 0,
                    score: s,
                    bbox: g.translated([d, -d / 2.0, 0.0]),
                })
                .collect();
            dets.extend(extra.into_iter().map(|(b, s)| Detection {
                frame_id: 0,
                class_id: 0,
                score: s,
                bbox: b,
            }));
            EvalFrame {
                detections: dets,
                ground_truth: gts,
            }
        });
    prop::collection::vec(frame, 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn iou_is_symmetric_and_bounded((a, b) in arb_close_pair()) {
        let ab = rotated_iou_bev(&a, &b).unwrap();
        let ba = rotated_iou_bev(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        let v = iou_3d(&a, &b).unwrap();
        prop_assert!((v - iou_3d(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn iou_invariant_under_rigid_motion((a, b) in arb_close_pair(), t in prop::array::uniform3(-50.0..50.0f64), angle in -PI..PI) {
        let base = rotated_iou_bev(&a, &b).unwrap();
        let moved = rotated_iou_bev(&a.translated(t), &b.translated(t)).unwrap();
        let pivot = [t[0], t[1]];
        let turned = rotated_iou_bev(&a.rotated_about(pivot, angle), &b.rotated_about(pivot, angle)).unwrap();
        prop_assert!((base - moved).abs() < 1e-9, "{base} vs {moved}");
        prop_assert!((base - turned).abs() < 1e-9, "{base} vs {turned}");
        let v = iou_3d(&a, &b).unwrap();
        prop_assert!((v - iou_3d(&a.translated(t), &b.translated(t)).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn self_iou_is_one(a in arb_box()) {
        prop_assert!((rotated_iou_bev(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((iou_3d(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_lands_in_half_open_interval(a in -1e3..1e3f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        let turns = (a - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn ap_non_increasing_in_threshold(frames in arb_frames()) {
        let ap: Vec<f64> = average_precision(&frames, &EvalConfig::default()).unwrap().into_iter().map(|a| a.unwrap()).collect();
        prop_assert!(ap.iter().all(|a| (0.0..=100.0).contains(a)));
        prop_assert!(ap.windows(2).all(|w| w[1] <= w[0]), "{ap:?}");
    }

    #[test]
    fn softmax_rows_are_distributions(vals in prop::collection::vec(-30.0..30.0f64, 12)) {
        let mut m = Array2::from_shape_vec((3, 4), vals).unwrap();
        softmax_rows(&mut m);
        for row in m.rows() {
            prop_assert!(row.iter().all(|p| *p > 0.0));
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn camera_projection_round_trip(x in 1.0..60.0f64, y in -20.0..20.0f64, z in -2.0..2.0f64) {
        let calib = CameraCalib::default();
        let (u, v, d) = calib.project([x, y, z]).unwrap();
        let back = calib.unproject(u, v, d);
        prop_assert!(back.iter().zip([x, y, z]).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn depth_pixel_reprojects_within_one_pixel(x in 2.0..60.0f64, y in -20.0..20.0f64, z in -2.0..1.0f64) {
        let calib = CameraCalib::default();
        let (u, v, _) = calib.project([x, y, z]).unwrap();
        prop_assume!(u >= 0.0 && v >= 0.0 && u < calib.width_px as f64 && v < calib.height_px as f64);
        let img = project_points_to_depth(&[[x, y, z]], &calib, calib.width_px, calib.height_px);
        let pts = img.unproject(&calib);
        prop_assert_eq!(pts.len(), 1);
        let (u2, v2, _) = calib.project(pts[0]).unwrap();
        prop_assert!((u2 - u).abs() <= 1.0 && (v2 - v).abs() <= 1.0, "({u}, {v}) -> ({u2}, {v2})");
    }

    #[test]
    fn detections_csv_round_trip(boxes in prop::collection::vec((arb_box(), 0.0..=1.0f64, 0u64..100), 0..10)) {
        let dets: Vec<Detection> = boxes.into_iter().map(|(bbox, score, frame_id)| Detection { frame_id, class_id: 0, score, bbox }).collect();
        let text = detections_to_csv(&dets);
        let back = detections_from_csv(&text).unwrap();
        prop_assert_eq!(&back, &dets);
        prop_assert_eq!(detections_to_csv(&back), text);
    }

    #[test]
    fn point_cloud_csv_round_trip(pts in prop::collection::vec((0.0..64.0f64, -20.0..20.0f64, -1.5..1.5f64, -0.5..0.5f64, 1e-6..1e6f64), 0..20)) {
        let cloud = RadarPointCloud {
            points: pts
                .into_iter()
                .map(|(range_m, velocity_mps, azimuth_rad, elevation_rad, intensity)| RadarPoint { range_m, velocity_mps, azimuth_rad, elevation_rad, intensity })
                .collect(),
        };
        let text = cloud.to_csv();
        let back = RadarPointCloud::from_csv(&text).unwrap();
        prop_assert_eq!(&back, &cloud);
        prop_assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn set_loss_invariant_to_query_order(seed in 0u64..10_000) {
        let mut r = common::rng(seed);
        let n = 6;
        let out = HeadOutputs {
            logits: Array1::from(common::random_array2((n, 1), &mut r).into_raw_vec_and_offset().0),
            boxes: common::random_array2((n, 8), &mut r),
        };
        let gts = vec![
            Box3D::new([12.0, -3.0, -0.2], [4.4, 1.8, 1.5], 0.4).unwrap(),
            Box3D::new([25.0, 6.0, -0.1], [4.1, 1.7, 1.6], -2.0).unwrap(),
        ];
        let w = LossWeights::default();
        let base = set_loss(&out, &gts, &w).unwrap();
        let perm: Vec<usize> = (0..n).rev().collect();
        let shuffled = HeadOutputs {
            logits: Array1::from_shape_fn(n, |i| out.logits[perm[i]]),
            boxes: Array2::from_shape_fn((n, 8), |(i, k)| out.boxes[[perm[i], k]]),
        };
        let s = set_loss(&shuffled, &gts, &w).unwrap();
        prop_assert!((s.loss - base.loss).abs() <= 1e-12 * base.loss.abs().max(1.0));
        let flipped: Vec<Box3D> = gts.iter().rev().cloned().collect();
        let f = set_loss(&out, &flipped, &w).unwrap();
        prop_assert!((f.loss - base.loss).abs() <= 1e-12 * base.loss.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthesis_is_linear_without_noise(a in prop::collection::vec(arb_scatterer(), 1..4), b in prop::collection::vec(arb_scatterer(), 1..4)) {
        let cfg = RadarConfig { noise_std: 0.0, ..small_radar() };
        let scene = |s: Vec<Scatterer>| SceneFrame { scatterers: s, ..SceneFrame::empty(0, 3) };
        let both = synthesize_adc(&scene([a.clone(), b.clone()].concat()), &cfg).unwrap();
        let ya = synthesize_adc(&scene(a), &cfg).unwrap();
        let yb = synthesize_adc(&scene(b), &cfg).unwrap();
        let worst = both.data.iter().zip(ya.data.iter().zip(&yb.data)).map(|(s, (p, q))| (s - (p + q)).norm()).fold(0.0f32, f32::max);
        // per-sample amplitudes are O(1) and stored as f32
        prop_assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn synthesis_deterministic_per_seed(s in prop::collection::vec(arb_scatterer(), 0..4), seed in any::<u64>()) {
        let cfg = small_radar();
        let scene = SceneFrame { scatterers: s, ..SceneFrame::empty(0, seed) };
        let x = synthesize_adc(&scene, &cfg).unwrap();
        let y = synthesize_adc(&scene, &cfg).unwrap();
        prop_assert_eq!(x.data, y.data);
    }

    #[test]
    fn cfar_mask_invariant_to_power_of_two_scaling(s in prop::collection::vec(arb_scatterer(), 0..3), k in -8i32..8) {
        let cfg = small_radar();
        let adc = synthesize_adc(&SceneFrame { scatterers: s, ..SceneFrame::empty(0, 11) }, &cfg).unwrap();
        let chain = ChainConfig::default();
        let spec = adc_to_spectrum(&adc, &chain).unwrap();
        let cfar = CfarConfig::default();
        let scaled = spec.scaled(2f32.powi(k));
        prop_assert_eq!(cfar_mask_4d(&spec, &cfar).unwrap(), cfar_mask_4d(&scaled, &cfar).unwrap());
    }

    #[test]
    fn binary_containers_rewrite_byte_identically(s in prop::collection::vec(arb_scatterer(), 0..3), seed in any::<u64>()) {
        let cfg = small_radar();
        let dir = tempfile::tempdir().unwrap();
        let adc = synthesize_adc(&SceneFrame { scatterers: s, ..SceneFrame::empty(0, seed) }, &cfg).unwrap();
        let (a1, a2) = (dir.path().join("a1.bin"), dir.path().join("a2.bin"));
        adc.write(&a1).unwrap();
        AdcCube::read(&a1, &cfg).unwrap().write(&a2).unwrap();
        prop_assert_eq!(std::fs::read(&a1).unwrap(), std::fs::read(&a2).unwrap());

        let spec = adc_to_spectrum(&adc, &ChainConfig::default()).unwrap();
        let (s1, s2) = (dir.path().join("s1.bin"), dir.path().join("s2.bin"));
        spec.write(&s1).unwrap();
        Spectrum4D::read(&s1, &cfg).unwrap().write(&s2).unwrap();
        prop_assert_eq!(std::fs::read(&s1).unwrap(), std::fs::read(&s2).unwrap());
    }

    #[test]
    fn checkpoint_rewrites_byte_identically(seed in any::<u64>()) {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(&cfg, seed);
        let bytes = encode_checkpoint(&p);
        let mut q = ModelParams::init(&cfg, seed.wrapping_add(1));
        decode_checkpoint(&bytes, &mut q).unwrap();
        prop_assert_eq!(encode_checkpoint(&q), bytes);
    }

    #[test]
    fn config_toml_rewrites_identically(scene_seed in any::<u32>(), model_seed in any::<u32>(), steps in 0usize..1000, lr in 1e-5..1e-1f64) {
        let mut cfg = PipelineConfig::default();
        cfg.seeds.scene = scene_seed as u64;
        cfg.seeds.model = model_seed as u64;
        cfg.train.steps = steps;
        cfg.train.learning_rate = lr;
        let text = cfg.to_toml().unwrap();
        let back = PipelineConfig::from_toml(&text).unwrap();
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}
