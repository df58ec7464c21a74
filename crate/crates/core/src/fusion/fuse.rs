//! The two polar-aligned attention passes: BEV azimuth columns attend to
//! the matching image column, then BEV range rings attend to the matching
//! radar row.

use std::ops::Range;

use ndarray::{Array2, Array3, ArrayView2, Axis};

use super::attention::{attend, attend_backward, check_finite, AttentionParams};
use super::bev::{azimuth_to_column, image_row_encoding, radar_row_encoding, BevStage, CameraCalib, PolarBevGrid};
use super::pyramid::{ImageFeatureMap, RadarFeatureMap};
use crate::error::{Error, Result};

/// One attention group: a set of query rows and a contiguous key range.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub queries: Vec<usize>,
    pub keys: Range<usize>,
}

/// Forward state of [`grouped_attention`].
#[derive(Debug, Clone)]
pub struct GroupedCache {
    pub groups: Vec<Group>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    qp: Array2<f64>,
    kp: Array2<f64>,
    vp: Array2<f64>,
    /// Softmax weights per group and head.
    pub weights: Vec<Vec<Array2<f64>>>,
    concat: Array2<f64>,
    active: Vec<bool>,
}

fn gather(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Cross-attention applied independently per group, sharing projections.
/// Query rows outside every group pass through unchanged.
pub fn grouped_attention(
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    groups: Vec<Group>,
    p: &AttentionParams,
) -> Result<(Array2<f64>, GroupedCache)> {
    p.validate()?;
    check_finite(q.view(), "BEV queries")?;
    check_finite(k.view(), "attention keys")?;
    check_finite(v.view(), "attention values")?;
    let qp = p.q.forward(q.view());
    let kp = p.k.forward(k.view());
    let vp = p.v.forward(v.view());
    let mut concat = Array2::zeros(q.raw_dim());
    let mut active = vec![false; q.nrows()];
    let mut weights = Vec::with_capacity(groups.len());
    for g in &groups {
        if g.keys.is_empty() {
            return Err(Error::Empty("attention keys"));
        }
        let qg = gather(&qp, &g.queries);
        let kg = kp.slice(ndarray::s![g.keys.clone(), ..]);
        let vg = vp.slice(ndarray::s![g.keys.clone(), ..]);
        let (w, cat) = attend(qg.view(), kg, vg, p.heads);
        for (row, &qi) in g.queries.iter().enumerate() {
            concat.row_mut(qi).assign(&cat.row(row));
            active[qi] = true;
        }
        weights.push(w);
    }
    let mut out = q.clone();
    let y = p.o.forward(concat.view());
    for (i, &a) in active.iter().enumerate() {
        if a {
            let mut row = out.row_mut(i);
            row += &y.row(i);
        }
    }
    let cache = GroupedCache {
        groups,
        q,
        k,
        v,
        qp,
        kp,
        vp,
        weights,
        concat,
        active,
    };
    Ok((out, cache))
}

/// Returns `(dQ, dK, dV)` and accumulates parameter gradients.
pub fn grouped_attention_backward(
    cache: &GroupedCache,
    p: &AttentionParams,
    dout: ArrayView2<f64>,
    grad: &mut AttentionParams,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let mut dy = dout.to_owned();
    for (i, &a) in cache.active.iter().enumerate() {
        if !a {
            dy.row_mut(i).fill(0.0);
        }
    }
    let dconcat = p.o.backward(cache.concat.view(), dy.view(), &mut grad.o);
    let mut dqp = Array2::zeros(cache.qp.raw_dim());
    let mut dkp = Array2::zeros(cache.kp.raw_dim());
    let mut dvp = Array2::zeros(cache.vp.raw_dim());
    for (g, w) in cache.groups.iter().zip(&cache.weights) {
        let qg = gather(&cache.qp, &g.queries);
        let dcat = gather(&dconcat, &g.queries);
        let kg = cache.kp.slice(ndarray::s![g.keys.clone(), ..]);
        let vg = cache.vp.slice(ndarray::s![g.keys.clone(), ..]);
        let (dq, dk, dv) = attend_backward(qg.view(), kg, vg, w, dcat.view());
        for (row, &qi) in g.queries.iter().enumerate() {
            let mut r = dqp.row_mut(qi);
            r += &dq.row(row);
        }
        let mut sk = dkp.slice_mut(ndarray::s![g.keys.clone(), ..]);
        sk += &dk;
        let mut sv = dvp.slice_mut(ndarray::s![g.keys.clone(), ..]);
        sv += &dv;
    }
    let dq = p.q.backward(cache.q.view(), dqp.view(), &mut grad.q) + dout;
    let dk = p.k.backward(cache.k.view(), dkp.view(), &mut grad.k);
    let dv = p.v.backward(cache.v.view(), dvp.view(), &mut grad.v);
    (dq, dk, dv)
}

fn flat(x: &Array3<f64>) -> Array2<f64> {
    let c = x.dim().2;
    x.clone().into_shape_with_order((x.len() / c, c)).expect("contiguous")
}

fn unflat(x: Array2<f64>, dims: (usize, usize, usize)) -> Array3<f64> {
    x.into_shape_with_order(dims).expect("contiguous")
}

/// Per-level state of a fusion pass.
#[derive(Debug, Clone)]
pub struct PassCache {
    pub levels: Vec<GroupedCache>,
}

fn check_levels(bev: &PolarBevGrid, n_feat: usize, n_params: usize) -> Result<()> {
    if bev.levels.is_empty() {
        return Err(Error::Empty("BEV levels"));
    }
    if n_feat != bev.levels.len() || n_params != bev.levels.len() {
        return Err(Error::Shape(format!(
            "{} BEV levels, {n_feat} feature levels, {n_params} attention blocks",
            bev.levels.len()
        )));
    }
    Ok(())
}

/// Pass 1: each BEV azimuth column attends to the full image column seen at
/// that azimuth. Columns behind the image plane are left unchanged.
pub fn fuse_image_columns(
    bev: &PolarBevGrid,
    img: &ImageFeatureMap,
    calib: &CameraCalib,
    params: &[AttentionParams],
) -> Result<(PolarBevGrid, PassCache)> {
    bev.require(BevStage::Initial)?;
    check_levels(bev, img.levels.len(), params.len())?;
    let mut out = bev.clone();
    let mut caches = Vec::new();
    for l in 0..bev.levels.len() {
        let (nr, na, c) = bev.levels[l].dim();
        let (ncols, nrows, fc) = img.levels[l].dim();
        if fc != c {
            return Err(Error::Shape(format!("image features have {fc} channels, BEV has {c}")));
        }
        let v = flat(&img.levels[l]);
        let mut k = v.clone();
        let enc = image_row_encoding(nrows, c);
        for x in 0..ncols {
            let mut block = k.slice_mut(ndarray::s![x * nrows..(x + 1) * nrows, ..]);
            block += &enc;
        }
        let groups = (0..na)
            .filter_map(|j| {
                azimuth_to_column(bev.azimuth_center_rad(l, j), calib, l, ncols).map(|x| Group {
                    queries: (0..nr).map(|i| i * na + j).collect(),
                    keys: x * nrows..(x + 1) * nrows,
                })
            })
            .collect();
        let (o, cache) = grouped_attention(flat(&bev.levels[l]), k, v, groups, &params[l])?;
        out.levels[l] = unflat(o, (nr, na, c));
        caches.push(cache);
    }
    out.stage = BevStage::ImageFused;
    Ok((out, PassCache { levels: caches }))
}

/// Gradients of pass 1: `(dBEV, dImageFeatures)` per level.
pub fn fuse_image_columns_backward(
    cache: &PassCache,
    params: &[AttentionParams],
    dout: &[Array3<f64>],
    grad: &mut [AttentionParams],
    img_dims: &[(usize, usize, usize)],
) -> (Vec<Array3<f64>>, Vec<Array3<f64>>) {
    let mut dbev = Vec::new();
    let mut dimg = Vec::new();
    for l in 0..cache.levels.len() {
        let (dq, dk, dv) =
            grouped_attention_backward(&cache.levels[l], &params[l], flat(&dout[l]).view(), &mut grad[l]);
        dbev.push(unflat(dq, dout[l].dim()));
        dimg.push(unflat(dk + dv, img_dims[l]));
    }
    (dbev, dimg)
}

/// Pass 2: each BEV range ring attends to the radar feature row covering
/// the same range interval.
pub fn fuse_radar_rows(
    bev: &PolarBevGrid,
    rad: &RadarFeatureMap,
    params: &[AttentionParams],
    col_stride0: usize,
) -> Result<(PolarBevGrid, PassCache)> {
    bev.require(BevStage::ImageFused)?;
    check_levels(bev, rad.levels.len(), params.len())?;
    let mut out = bev.clone();
    let mut caches = Vec::new();
    for l in 0..bev.levels.len() {
        let (nr, na, c) = bev.levels[l].dim();
        let (rows, cols, fc) = rad.levels[l].dim();
        if rows != nr {
            return Err(Error::Shape(format!("level {l}: {rows} radar rows for {nr} BEV rings")));
        }
        if fc != c {
            return Err(Error::Shape(format!("radar features have {fc} channels, BEV has {c}")));
        }
        let v = flat(&rad.levels[l]);
        let mut k = v.clone();
        for r in 0..rows {
            let mut block = k.slice_mut(ndarray::s![r * cols..(r + 1) * cols, ..]);
            block += &radar_row_encoding(r, rows, cols, col_stride0 << l, c);
        }
        let groups = (0..nr)
            .map(|i| Group {
                queries: (i * na..(i + 1) * na).collect(),
                keys: i * cols..(i + 1) * cols,
            })
            .collect();
        let (o, cache) = grouped_attention(flat(&bev.levels[l]), k, v, groups, &params[l])?;
        out.levels[l] = unflat(o, (nr, na, c));
        caches.push(cache);
    }
    out.stage = BevStage::RadarFused;
    Ok((out, PassCache { levels: caches }))
}

/// Gradients of pass 2: `(dBEV, dRadarFeatures)` per level.
pub fn fuse_radar_rows_backward(
    cache: &PassCache,
    params: &[AttentionParams],
    dout: &[Array3<f64>],
    grad: &mut [AttentionParams],
    rad_dims: &[(usize, usize, usize)],
) -> (Vec<Array3<f64>>, Vec<Array3<f64>>) {
    let mut dbev = Vec::new();
    let mut drad = Vec::new();
    for l in 0..cache.levels.len() {
        let (dq, dk, dv) =
            grouped_attention_backward(&cache.levels[l], &params[l], flat(&dout[l]).view(), &mut grad[l]);
        dbev.push(unflat(dq, dout[l].dim()));
        drad.push(unflat(dk + dv, rad_dims[l]));
    }
    (dbev, drad)
}
