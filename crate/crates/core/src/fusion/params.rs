//! Learnable tensors: a named visitor over every parameter, a dense layer,
//! seeded initialization and the PRM1 checkpoint container.

use std::path::Path;

use ndarray::{Array, Array1, Array2, ArrayView2, Axis, Dimension};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const PARAM_MAGIC: &[u8; 4] = b"PRM1";

/// Walks every learnable tensor in a fixed order with a dotted name.
pub trait Parameters {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64]));
}

pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl<D: Dimension> Parameters for Array<f64, D> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f(
            prefix,
            self.shape(),
            self.as_slice().expect("parameters are contiguous"),
        );
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        let shape = self.shape().to_vec();
        f(prefix, &shape, self.as_slice_mut().expect("parameters are contiguous"));
    }
}

impl<T: Parameters> Parameters for Vec<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (i, p) in self.iter().enumerate() {
            p.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        for (i, p) in self.iter_mut().enumerate() {
            p.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}

/// Total number of scalars.
pub fn param_count<P: Parameters + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.visit("", &mut |_, _, v| n += v.len());
    n
}

/// All scalars in visiting order.
pub fn flatten<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::new();
    p.visit("", &mut |_, _, v| out.extend_from_slice(v));
    out
}

/// Overwrites all scalars from a flat vector in visiting order.
pub fn unflatten<P: Parameters + ?Sized>(p: &mut P, values: &[f64]) -> Result<()> {
    if values.len() != param_count(p) {
        return Err(Error::Shape(format!(
            "expected {} values, got {}",
            param_count(p),
            values.len()
        )));
    }
    let mut at = 0;
    p.visit_mut("", &mut |_, _, v| {
        v.copy_from_slice(&values[at..at + v.len()]);
        at += v.len();
    });
    Ok(())
}

/// Same structure with every scalar set to zero.
pub fn zeros_like<P: Parameters + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.visit_mut("", &mut |_, _, v| v.fill(0.0));
    z
}

/// Names and shapes in visiting order.
pub fn param_names<P: Parameters + ?Sized>(p: &P) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    p.visit("", &mut |n, s, _| out.push((n.to_string(), s.to_vec())));
    out
}

/// Uniform Glorot initialization.
pub fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}

/// Affine map `y = x W + b` applied to row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `(in, out)`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            w: Array2::zeros((n_in, n_out)),
            b: Array1::zeros(n_out),
        }
    }

    pub fn init(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            w: glorot(n_in, n_out, rng),
            b: Array1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>, grad: &mut Linear) -> Array2<f64> {
        self.accumulate(x, dy, grad);
        dy.dot(&self.w.t())
    }

    /// Parameter gradients only, for layers whose input is a constant.
    pub fn accumulate(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>, grad: &mut Linear) {
        grad.w += &x.t().dot(&dy);
        grad.b += &dy.sum_axis(Axis(0));
    }
}

impl Parameters for Linear {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.w.visit(&join(prefix, "w"), f);
        self.b.visit(&join(prefix, "b"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.w.visit_mut(&join(prefix, "w"), f);
        self.b.visit_mut(&join(prefix, "b"), f);
    }
}

/// Serializes every tensor as `(name, shape, f64 data)`, little-endian.
pub fn encode_checkpoint<P: Parameters + ?Sized>(p: &P) -> Vec<u8> {
    let mut out = PARAM_MAGIC.to_vec();
    let names = param_names(p);
    out.extend_from_slice(&(names.len() as u32).to_le_bytes());
    p.visit("", &mut |name, shape, data| {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    });
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or("truncated checkpoint")?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

/// Loads tensors into `p`, which must have exactly the stored names and shapes.
pub fn decode_checkpoint<P: Parameters + ?Sized>(bytes: &[u8], p: &mut P) -> std::result::Result<(), String> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4)? != PARAM_MAGIC {
        return Err("bad magic, expected PRM1".into());
    }
    let count = c.u32()?;
    let expected = param_names(p);
    if count != expected.len() {
        return Err(format!(
            "checkpoint holds {count} tensors, model has {}",
            expected.len()
        ));
    }
    let mut stored = Vec::with_capacity(count);
    for _ in 0..count {
        let n = c.u32()?;
        let name = String::from_utf8(c.take(n)?.to_vec()).map_err(|_| "tensor name is not utf-8")?;
        let nd = c.u32()?;
        let shape = (0..nd).map(|_| c.u32()).collect::<std::result::Result<Vec<_>, _>>()?;
        let len: usize = shape.iter().product();
        let data: Vec<f64> = c
            .take(len * 8)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        stored.push((name, shape, data));
    }
    if c.at != bytes.len() {
        return Err("trailing bytes after last tensor".into());
    }
    for ((name, shape, _), (en, es)) in stored.iter().zip(&expected) {
        if name != en || shape != es {
            return Err(format!(
                "tensor {name} {shape:?} does not match model tensor {en} {es:?}"
            ));
        }
    }
    let mut it = stored.into_iter();
    p.visit_mut("", &mut |_, _, v| v.copy_from_slice(&it.next().unwrap().2));
    Ok(())
}

pub fn save_checkpoint<P: Parameters + ?Sized>(p: &P, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &encode_checkpoint(p))
}

pub fn load_checkpoint<P: Parameters + ?Sized>(p: &mut P, path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    decode_checkpoint(&std::fs::read(path)?, p).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
