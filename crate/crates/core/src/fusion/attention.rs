//! Multi-head scaled dot-product cross-attention with a residual connection.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;

use super::params::{join, Linear, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub heads: usize,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

impl AttentionParams {
    pub fn zeros(channels: usize, heads: usize) -> Self {
        Self {
            heads,
            q: Linear::zeros(channels, channels),
            k: Linear::zeros(channels, channels),
            v: Linear::zeros(channels, channels),
            o: Linear::zeros(channels, channels),
        }
    }

    pub fn init(channels: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            heads,
            q: Linear::init(channels, channels, rng),
            k: Linear::init(channels, channels, rng),
            v: Linear::init(channels, channels, rng),
            o: Linear::init(channels, channels, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.q.n_in()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        if self.heads == 0 || c % self.heads != 0 {
            return Err(Error::Config(format!(
                "{c} channels not divisible by {} heads",
                self.heads
            )));
        }
        for l in [&self.q, &self.k, &self.v, &self.o] {
            if l.n_in() != c || l.n_out() != c {
                return Err(Error::Shape("attention projections must be square".into()));
            }
        }
        Ok(())
    }
}

impl Parameters for AttentionParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.q.visit(&join(prefix, "q"), f);
        self.k.visit(&join(prefix, "k"), f);
        self.v.visit(&join(prefix, "v"), f);
        self.o.visit(&join(prefix, "o"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.q.visit_mut(&join(prefix, "q"), f);
        self.k.visit_mut(&join(prefix, "k"), f);
        self.v.visit_mut(&join(prefix, "v"), f);
        self.o.visit_mut(&join(prefix, "o"), f);
    }
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - m).exp());
        let z = row.sum();
        row /= z;
    }
}

/// Per-head attention on already projected queries, keys and values.
/// Returns the softmax weights of each head and the concatenated outputs.
pub fn attend(
    qp: ArrayView2<f64>,
    kp: ArrayView2<f64>,
    vp: ArrayView2<f64>,
    heads: usize,
) -> (Vec<Array2<f64>>, Array2<f64>) {
    let c = qp.ncols();
    let dh = c / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut concat = Array2::zeros((qp.nrows(), c));
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut a = qp.slice(cols).dot(&kp.slice(cols).t()) * scale;
        softmax_rows(&mut a);
        concat.slice_mut(cols).assign(&a.dot(&vp.slice(cols)));
        weights.push(a);
    }
    (weights, concat)
}

/// Gradients of [`attend`] with respect to its projected inputs.
pub fn attend_backward(
    qp: ArrayView2<f64>,
    kp: ArrayView2<f64>,
    vp: ArrayView2<f64>,
    weights: &[Array2<f64>],
    dconcat: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let heads = weights.len();
    let c = qp.ncols();
    let dh = c / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dqp = Array2::zeros(qp.raw_dim());
    let mut dkp = Array2::zeros(kp.raw_dim());
    let mut dvp = Array2::zeros(vp.raw_dim());
    for (h, a) in weights.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let dout = dconcat.slice(cols);
        dvp.slice_mut(cols).assign(&a.t().dot(&dout));
        let da = dout.dot(&vp.slice(cols).t());
        let row_dot = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = a * &(da - &row_dot) * scale;
        dqp.slice_mut(cols).assign(&ds.dot(&kp.slice(cols)));
        dkp.slice_mut(cols).assign(&ds.t().dot(&qp.slice(cols)));
    }
    (dqp, dkp, dvp)
}

/// Forward intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    pub qp: Array2<f64>,
    pub kp: Array2<f64>,
    pub vp: Array2<f64>,
    pub weights: Vec<Array2<f64>>,
    pub concat: Array2<f64>,
}

pub(crate) fn check_finite(x: ArrayView2<f64>, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `Q + concat_h softmax(Qh Khᵀ / √(C/H)) Vh · Wo + bo`, with the per-head
/// blocks taken from the projections `Q Wq + bq`, `K Wk + bk`, `V Wv + bv`.
pub fn cross_attention(
    q: ArrayView2<f64>,
    k: ArrayView2<f64>,
    v: ArrayView2<f64>,
    p: &AttentionParams,
) -> Result<(Array2<f64>, AttentionCache)> {
    p.validate()?;
    let c = p.channels();
    if q.ncols() != c || k.ncols() != c || v.ncols() != c {
        return Err(Error::Shape(format!("attention inputs must have {c} channels")));
    }
    if k.nrows() != v.nrows() {
        return Err(Error::Shape("keys and values differ in length".into()));
    }
    if k.nrows() == 0 {
        return Err(Error::Empty("attention keys"));
    }
    check_finite(q, "attention queries")?;
    check_finite(k, "attention keys")?;
    check_finite(v, "attention values")?;
    let qp = p.q.forward(q);
    let kp = p.k.forward(k);
    let vp = p.v.forward(v);
    let (weights, concat) = attend(qp.view(), kp.view(), vp.view(), p.heads);
    let out = p.o.forward(concat.view()) + q;
    let cache = AttentionCache {
        q: q.to_owned(),
        k: k.to_owned(),
        v: v.to_owned(),
        qp,
        kp,
        vp,
        weights,
        concat,
    };
    Ok((out, cache))
}

/// Accumulates parameter gradients into `grad`; returns `(dQ, dK, dV)`.
pub fn cross_attention_backward(
    cache: &AttentionCache,
    p: &AttentionParams,
    dout: ArrayView2<f64>,
    grad: &mut AttentionParams,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let dconcat = p.o.backward(cache.concat.view(), dout, &mut grad.o);
    let (dqp, dkp, dvp) = attend_backward(
        cache.qp.view(),
        cache.kp.view(),
        cache.vp.view(),
        &cache.weights,
        dconcat.view(),
    );
    let dq = p.q.backward(cache.q.view(), dqp.view(), &mut grad.q) + dout;
    let dk = p.k.backward(cache.k.view(), dkp.view(), &mut grad.k);
    let dv = p.v.backward(cache.v.view(), dvp.view(), &mut grad.v);
    (dq, dk, dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn single_key_gets_full_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = AttentionParams::init(8, 2, &mut rng);
        let q = rand_mat(3, 8, &mut rng);
        let kv = rand_mat(1, 8, &mut rng);
        let (out, cache) = cross_attention(q.view(), kv.view(), kv.view(), &p).unwrap();
        assert!(cache.weights.iter().all(|w| w.iter().all(|&x| x == 1.0)));
        let expect = p.o.forward(p.v.forward(kv.view()).view());
        for i in 0..3 {
            for j in 0..8 {
                assert!((out[[i, j]] - q[[i, j]] - expect[[0, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rows_sum_to_one_and_duplicates_tie() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = AttentionParams::init(8, 4, &mut rng);
        let q = rand_mat(5, 8, &mut rng);
        let mut kv = rand_mat(4, 8, &mut rng);
        let row = kv.row(1).to_owned();
        kv.row_mut(3).assign(&row);
        let (_, cache) = cross_attention(q.view(), kv.view(), kv.view(), &p).unwrap();
        for w in &cache.weights {
            for r in w.rows() {
                assert!((r.sum() - 1.0).abs() < 1e-9);
                assert_eq!(r[1], r[3]);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = AttentionParams::zeros(8, 3);
        let x = Array2::zeros((2, 8));
        assert!(cross_attention(x.view(), x.view(), x.view(), &p).is_err());
        let p = AttentionParams::zeros(8, 2);
        let mut bad = Array2::zeros((2, 8));
        bad[[0, 0]] = f64::NAN;
        assert!(matches!(
            cross_attention(bad.view(), x.view(), x.view(), &p),
            Err(Error::NonFinite(_))
        ));
        let empty = Array2::zeros((0, 8));
        assert!(cross_attention(x.view(), empty.view(), empty.view(), &p).is_err());
    }
}
