//! Synthetic camera frames: shaded box faces painted over a sky/road gradient.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detect::Box3D;
use crate::fusion::CameraCalib;
use crate::sim::SceneFrame;

const SKY_TOP: [f64; 3] = [0.55, 0.70, 0.90];
const SKY_HORIZON: [f64; 3] = [0.85, 0.88, 0.92];
const ROAD_NEAR: [f64; 3] = [0.25, 0.25, 0.27];
const ROAD_HORIZON: [f64; 3] = [0.50, 0.50, 0.50];
/// Direction toward the light, radar frame.
const LIGHT: [f64; 3] = [-0.5, 0.3, 0.81];
/// Faces with a corner closer than this to the image plane are skipped.
const NEAR_PLANE_M: f64 = 0.1;

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

/// Background pixel at image row `v`.
pub fn background_color(v: usize, calib: &CameraCalib) -> [f64; 3] {
    let y = v as f64 + 0.5;
    let h = calib.height_px as f64;
    if y < calib.cy_px {
        lerp(SKY_TOP, SKY_HORIZON, (y / calib.cy_px.max(1e-9)).clamp(0.0, 1.0))
    } else {
        lerp(
            ROAD_HORIZON,
            ROAD_NEAR,
            ((y - calib.cy_px) / (h - calib.cy_px).max(1e-9)).clamp(0.0, 1.0),
        )
    }
}

struct Face {
    corners: [[f64; 3]; 4],
    normal: [f64; 3],
    color: [f64; 3],
}

fn box_faces(b: &Box3D, color: [f64; 3]) -> Vec<Face> {
    let (hl, hw, hh) = (0.5 * b.l, 0.5 * b.w, 0.5 * b.h);
    let (s, c) = b.yaw.sin_cos();
    let rot = |n: [f64; 3]| [c * n[0] - s * n[1], s * n[0] + c * n[1], n[2]];
    // (local normal, four local corners in cyclic order)
    let faces: [([f64; 3], [[f64; 3]; 4]); 6] = [
        (
            [1.0, 0.0, 0.0],
            [[hl, -hw, -hh], [hl, hw, -hh], [hl, hw, hh], [hl, -hw, hh]],
        ),
        (
            [-1.0, 0.0, 0.0],
            [[-hl, -hw, -hh], [-hl, hw, -hh], [-hl, hw, hh], [-hl, -hw, hh]],
        ),
        (
            [0.0, 1.0, 0.0],
            [[-hl, hw, -hh], [hl, hw, -hh], [hl, hw, hh], [-hl, hw, hh]],
        ),
        (
            [0.0, -1.0, 0.0],
            [[-hl, -hw, -hh], [hl, -hw, -hh], [hl, -hw, hh], [-hl, -hw, hh]],
        ),
        (
            [0.0, 0.0, 1.0],
            [[-hl, -hw, hh], [hl, -hw, hh], [hl, hw, hh], [-hl, hw, hh]],
        ),
        (
            [0.0, 0.0, -1.0],
            [[-hl, -hw, -hh], [hl, -hw, -hh], [hl, hw, -hh], [-hl, hw, -hh]],
        ),
    ];
    faces
        .iter()
        .map(|(n, q)| Face {
            corners: q.map(|p| b.from_local(p)),
            normal: rot(*n),
            color,
        })
        .collect()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn inside_convex(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut sign = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let cross = (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
        if cross != 0.0 {
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
    }
    true
}

/// `(height, width, 3)` RGB in `[0, 1]`. Object colors are drawn from the
/// scene seed, so equal scenes render identically.
pub fn render_scene_image(scene: &SceneFrame, calib: &CameraCalib) -> Array3<f64> {
    let (w, h) = (calib.width_px, calib.height_px);
    let mut img = Array3::zeros((h, w, 3));
    for v in 0..h {
        let bg = background_color(v, calib);
        for u in 0..w {
            for k in 0..3 {
                img[[v, u, k]] = bg[k];
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
    let camera = calib.from_camera([0.0, 0.0, 0.0]);
    let mut faces: Vec<(f64, Face)> = Vec::new();
    for b in &scene.boxes {
        let color = [
            rng.random_range(0.1..0.9),
            rng.random_range(0.1..0.9),
            rng.random_range(0.1..0.9),
        ];
        for f in box_faces(b, color) {
            let centroid = f.corners.iter().fold([0.0; 3], |acc, p| {
                [acc[0] + 0.25 * p[0], acc[1] + 0.25 * p[1], acc[2] + 0.25 * p[2]]
            });
            let to_face = [
                centroid[0] - camera[0],
                centroid[1] - camera[1],
                centroid[2] - camera[2],
            ];
            if dot(f.normal, to_face) < 0.0 {
                faces.push((dot(to_face, to_face), f));
            }
        }
    }
    // painter's order: farthest first
    faces.sort_by(|a, b| b.0.total_cmp(&a.0));
    let norm = dot(LIGHT, LIGHT).sqrt();
    for (_, f) in faces {
        let proj: Option<Vec<(f64, f64)>> = f
            .corners
            .iter()
            .map(|p| {
                calib
                    .project(*p)
                    .filter(|(_, _, d)| *d > NEAR_PLANE_M)
                    .map(|(u, v, _)| (u, v))
            })
            .collect();
        let Some(poly) = proj else { continue };
        let shade = 0.4 + 0.6 * (dot(f.normal, LIGHT) / norm).abs();
        let (u0, u1) = poly
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let (v0, v1) = poly
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let cols = (u0.floor().max(0.0) as usize)..((u1.ceil().min(w as f64)).max(0.0) as usize);
        let rows = (v0.floor().max(0.0) as usize)..((v1.ceil().min(h as f64)).max(0.0) as usize);
        for v in rows {
            for u in cols.clone() {
                if inside_convex(&poly, u as f64 + 0.5, v as f64 + 0.5) {
                    for k in 0..3 {
                        img[[v, u, k]] = f.color[k] * shade;
                    }
                }
            }
        }
    }
    img
}

/// Binary PPM (P6) encoding of an image in `[0, 1]`.
pub fn encode_ppm(img: &Array3<f64>) -> Vec<u8> {
    let (h, w, _) = img.dim();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend(img.iter().map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}
