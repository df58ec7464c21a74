//! Independent oracles shared by the integration tests: scalar attention
//! fusion, exhaustive assignment, sampled IoU and finite differences.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array2, Array3};
use polarfuse::detect::Box3D;
use polarfuse::fusion::{flatten, param_names, unflatten, AttentionParams, CameraCalib, Linear, Parameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_array3(dims: (usize, usize, usize), rng: &mut ChaCha8Rng) -> Array3<f64> {
    Array3::from_shape_fn(dims, |_| rng.random_range(-1.0..1.0))
}

pub fn random_array2(dims: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn(dims, |_| rng.random_range(-1.0..1.0))
}

/// Overwrites every parameter with `U(-scale, scale)`.
pub fn randomize<P: Parameters + ?Sized>(p: &mut P, scale: f64, rng: &mut ChaCha8Rng) {
    p.visit_mut("", &mut |_, _, v| {
        v.iter_mut().for_each(|x| *x = rng.random_range(-scale..scale))
    });
}

// ---------------------------------------------------------------------------
// scalar attention fusion

fn linear(x: &[f64], l: &Linear) -> Vec<f64> {
    let (n_in, n_out) = l.w.dim();
    assert_eq!(x.len(), n_in);
    (0..n_out)
        .map(|j| {
            let mut s = l.b[j];
            for i in 0..n_in {
                s += x[i] * l.w[[i, j]];
            }
            s
        })
        .collect()
}

/// One query against explicit key/value lists, residual included.
pub fn attention_scalar(q: &[f64], keys: &[Vec<f64>], values: &[Vec<f64>], p: &AttentionParams) -> Vec<f64> {
    let c = q.len();
    let d = c / p.heads;
    let qp = linear(q, &p.q);
    let kp: Vec<Vec<f64>> = keys.iter().map(|k| linear(k, &p.k)).collect();
    let vp: Vec<Vec<f64>> = values.iter().map(|v| linear(v, &p.v)).collect();
    let mut concat = vec![0.0; c];
    for h in 0..p.heads {
        let lo = h * d;
        let scores: Vec<f64> = kp
            .iter()
            .map(|k| (lo..lo + d).map(|t| qp[t] * k[t]).sum::<f64>() / (d as f64).sqrt())
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = e.iter().sum();
        for (t, v) in vp.iter().enumerate() {
            for ch in lo..lo + d {
                concat[ch] += e[t] / z * v[ch];
            }
        }
    }
    let o = linear(&concat, &p.o);
    q.iter().zip(o).map(|(a, b)| a + b).collect()
}

fn sinusoid_scalar(u: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while out.len() < n {
        let w = FRAC_PI_2 * 2f64.powf(k as f64 / 2.0);
        out.push((w * u).sin());
        if out.len() < n {
            out.push((w * u).cos());
        }
        k += 1;
    }
    out
}

pub fn encode2_scalar(a: f64, b: f64, c: usize) -> Vec<f64> {
    let mut e = sinusoid_scalar(a, c / 2);
    e.extend(sinusoid_scalar(b, c - c / 2));
    e
}

fn cell_coordinate(i: usize, n: usize) -> f64 {
    2.0 * (i as f64 + 0.5) / n as f64 - 1.0
}

/// Image feature column for BEV azimuth column `j` of `n_az`, level 0.
fn column_for(j: usize, n_az: usize, phi_max: f64, calib: &CameraCalib, n_cols: usize) -> Option<usize> {
    let phi = -phi_max + (j as f64 + 0.5) * 2.0 * phi_max / n_az as f64;
    let mut d = phi - calib.yaw_offset_rad;
    while d > PI {
        d -= 2.0 * PI;
    }
    while d <= -PI {
        d += 2.0 * PI;
    }
    if d.abs() >= FRAC_PI_2 {
        return None;
    }
    let x = ((calib.cx_px + calib.focal_px * d.tan()) / 4.0).round();
    Some(x.max(0.0).min((n_cols - 1) as f64) as usize)
}

/// Both passes on a single level, one query at a time.
/// `bev (R, A, C)`, `img (columns, rows, C)`, `rad (R, columns, C)`.
pub fn fusion_scalar(
    bev: &Array3<f64>,
    phi_max: f64,
    img: &Array3<f64>,
    calib: &CameraCalib,
    rad: &Array3<f64>,
    radar_col_stride: usize,
    p_img: &AttentionParams,
    p_rad: &AttentionParams,
) -> Array3<f64> {
    let (nr, na, c) = bev.dim();
    let (ncols, nrows, _) = img.dim();
    let mut mid = bev.clone();
    for i in 0..nr {
        for j in 0..na {
            let Some(x) = column_for(j, na, phi_max, calib, ncols) else {
                continue;
            };
            let q: Vec<f64> = (0..c).map(|ch| bev[[i, j, ch]]).collect();
            let mut keys = Vec::new();
            let mut values = Vec::new();
            for y in 0..nrows {
                let enc = encode2_scalar(cell_coordinate(y, nrows), 0.0, c);
                values.push((0..c).map(|ch| img[[x, y, ch]]).collect::<Vec<f64>>());
                keys.push((0..c).map(|ch| img[[x, y, ch]] + enc[ch]).collect::<Vec<f64>>());
            }
            let o = attention_scalar(&q, &keys, &values, p_img);
            for ch in 0..c {
                mid[[i, j, ch]] = o[ch];
            }
        }
    }
    let (_, rcols, _) = rad.dim();
    let n_bins = rcols * radar_col_stride;
    let mut out = mid.clone();
    for i in 0..nr {
        let mut keys = Vec::new();
        let mut values = Vec::new();
        for a in 0..rcols {
            let center = (a * radar_col_stride) as f64 + 0.5 * (radar_col_stride as f64 - 1.0);
            let sine = 2.0 * (center - 0.5 * n_bins as f64) / n_bins as f64;
            let enc = encode2_scalar(cell_coordinate(i, nr), sine, c);
            values.push((0..c).map(|ch| rad[[i, a, ch]]).collect::<Vec<f64>>());
            keys.push((0..c).map(|ch| rad[[i, a, ch]] + enc[ch]).collect::<Vec<f64>>());
        }
        for j in 0..na {
            let q: Vec<f64> = (0..c).map(|ch| mid[[i, j, ch]]).collect();
            let o = attention_scalar(&q, &keys, &values, p_rad);
            for ch in 0..c {
                out[[i, j, ch]] = o[ch];
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// exhaustive assignment

/// Minimum total cost over all matchings that pair every element of the
/// smaller side of `cost (n_pred, n_gt)`.
pub fn brute_force_assignment(cost: &Array2<f64>) -> f64 {
    let (np, ng) = cost.dim();
    let transpose = np < ng;
    let (rows, cols) = if transpose { (ng, np) } else { (np, ng) };
    let at = |r: usize, c: usize| if transpose { cost[[c, r]] } else { cost[[r, c]] };
    // assign every column (smaller side) a distinct row
    fn rec(
        col: usize,
        cols: usize,
        rows: usize,
        used: &mut Vec<bool>,
        acc: f64,
        best: &mut f64,
        at: &dyn Fn(usize, usize) -> f64,
    ) {
        if col == cols {
            *best = best.min(acc);
            return;
        }
        for r in 0..rows {
            if !used[r] {
                used[r] = true;
                rec(col + 1, cols, rows, used, acc + at(r, col), best, at);
                used[r] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    if cols == 0 {
        return 0.0;
    }
    rec(0, cols, rows, &mut vec![false; rows], 0.0, &mut best, &at);
    best
}

// ---------------------------------------------------------------------------
// sampled IoU

fn aabb(b: &Box3D) -> [f64; 4] {
    let cs = b.bev_corners();
    let xs = cs.iter().map(|c| c[0]);
    let ys = cs.iter().map(|c| c[1]);
    [
        xs.clone().fold(f64::INFINITY, f64::min),
        xs.fold(f64::NEG_INFINITY, f64::max),
        ys.clone().fold(f64::INFINITY, f64::min),
        ys.fold(f64::NEG_INFINITY, f64::max),
    ]
}

fn inside_bev(b: &Box3D, x: f64, y: f64) -> bool {
    let (s, c) = b.yaw.sin_cos();
    let (dx, dy) = (x - b.x, y - b.y);
    (c * dx + s * dy).abs() <= 0.5 * b.l && (-s * dx + c * dy).abs() <= 0.5 * b.w
}

/// BEV IoU from an `n x n` midpoint grid over the overlap of the two
/// axis-aligned footprints; areas of the single boxes are `l * w`.
pub fn grid_iou_bev(a: &Box3D, b: &Box3D, n: usize) -> f64 {
    let (ra, rb) = (aabb(a), aabb(b));
    let (x0, x1) = (ra[0].max(rb[0]), ra[1].min(rb[1]));
    let (y0, y1) = (ra[2].max(rb[2]), ra[3].min(rb[3]));
    let mut inter = 0.0;
    if x1 > x0 && y1 > y0 {
        let (dx, dy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
        let mut hits = 0usize;
        for i in 0..n {
            let x = x0 + (i as f64 + 0.5) * dx;
            for j in 0..n {
                let y = y0 + (j as f64 + 0.5) * dy;
                if inside_bev(a, x, y) && inside_bev(b, x, y) {
                    hits += 1;
                }
            }
        }
        inter = hits as f64 * dx * dy;
    }
    inter / (a.l * a.w + b.l * b.w - inter)
}

/// 3D IoU from stratified random samples (`n^2 * nz` strata, one jittered
/// sample each) over the overlap of the axis-aligned bounding volumes.
pub fn mc_iou_3d(a: &Box3D, b: &Box3D, n: usize, nz: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (ra, rb) = (aabb(a), aabb(b));
    let (x0, x1) = (ra[0].max(rb[0]), ra[1].min(rb[1]));
    let (y0, y1) = (ra[2].max(rb[2]), ra[3].min(rb[3]));
    let (z0, z1) = (
        (a.z - 0.5 * a.h).max(b.z - 0.5 * b.h),
        (a.z + 0.5 * a.h).min(b.z + 0.5 * b.h),
    );
    let mut inter = 0.0;
    if x1 > x0 && y1 > y0 && z1 > z0 {
        let (dx, dy, dz) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64, (z1 - z0) / nz as f64);
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                for k in 0..nz {
                    let x = x0 + (i as f64 + rng.random::<f64>()) * dx;
                    let y = y0 + (j as f64 + rng.random::<f64>()) * dy;
                    let z = z0 + (k as f64 + rng.random::<f64>()) * dz;
                    let in_a = inside_bev(a, x, y) && (z - a.z).abs() <= 0.5 * a.h;
                    if in_a && inside_bev(b, x, y) && (z - b.z).abs() <= 0.5 * b.h {
                        hits += 1;
                    }
                }
            }
        }
        inter = hits as f64 * dx * dy * dz;
    }
    inter / (a.l * a.w * a.h + b.l * b.w * b.h - inter)
}

// ---------------------------------------------------------------------------
// finite differences

/// Denominator floor of the relative error, so gradients that vanish
/// analytically are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel: f64,
}

/// Central differences `(f(θ+h) - f(θ-h)) / 2h` for up to `per_tensor`
/// coordinates of every tensor (all of them when the tensor is smaller),
/// compared with `analytic`.
pub fn finite_difference_check<P: Parameters + Clone>(
    p: &P,
    analytic: &P,
    loss: &dyn Fn(&P) -> f64,
    per_tensor: usize,
    h: f64,
    seed: u64,
) -> Vec<TensorCheck> {
    let theta = flatten(p);
    let grad = flatten(analytic);
    let mut work = p.clone();
    let mut r = rng(seed);
    let mut at = 0;
    let mut out = Vec::new();
    for (name, shape) in param_names(p) {
        let n: usize = shape.iter().product();
        let idx: Vec<usize> = if n <= per_tensor {
            (0..n).collect()
        } else {
            (0..per_tensor).map(|_| r.random_range(0..n)).collect()
        };
        let mut max_rel: f64 = 0.0;
        for &i in &idx {
            let k = at + i;
            let mut t = theta.clone();
            t[k] = theta[k] + h;
            unflatten(&mut work, &t).unwrap();
            let up = loss(&work);
            t[k] = theta[k] - h;
            unflatten(&mut work, &t).unwrap();
            let down = loss(&work);
            max_rel = max_rel.max(rel_err(grad[k], (up - down) / (2.0 * h)));
        }
        out.push(TensorCheck {
            name,
            checked: idx.len(),
            max_rel,
        });
        at += n;
    }
    out
}

pub fn worst(checks: &[TensorCheck]) -> &TensorCheck {
    checks
        .iter()
        .max_by(|a, b| a.max_rel.total_cmp(&b.max_rel))
        .expect("at least one tensor")
}
