//! Full-batch toy training with Adam and global gradient-norm clipping.
//!
//! With a fixed step size the L1 box loss never lets the iterates settle:
//! they circle the optimum with an amplitude set by the learning rate. An
//! exponential moving average of the iterates sits near the center of that
//! cycle, so the averaged weights are what training hands back.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::boxes::Box3D;
use super::loss::LossWeights;
use super::model::{loss_and_grad, ModelContext, ModelParams};
use crate::error::{Error, Result};
use crate::fusion::{flatten, unflatten, FusionInput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub steps: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decay of the weight average returned by [`toy_train`]; 0 returns
    /// the last iterate.
    pub ema_decay: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            steps: 300,
            learning_rate: 3e-3,
            clip_norm: 10.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            ema_decay: 0.95,
            seed: 7,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be finite and nonnegative".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip norm must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config("invalid Adam moments".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config("weight-average decay must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One training frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub frame_id: u64,
    pub input: FusionInput,
    pub gts: Vec<Box3D>,
}

/// Mean set loss over `samples` and its gradient, flattened.
pub fn batch_loss_and_grad(
    ctx: &ModelContext,
    p: &ModelParams,
    samples: &[TrainSample],
    w: &LossWeights,
) -> Result<(f64, Vec<f64>)> {
    let mut total = 0.0;
    let mut grad = vec![0.0; crate::fusion::param_count(p)];
    for s in samples {
        let (loss, g) = loss_and_grad(ctx, p, &s.input, &s.gts, w, None)?;
        total += loss.loss;
        for (a, b) in grad.iter_mut().zip(flatten(&g)) {
            *a += b;
        }
    }
    let n = samples.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Trains `params` in place. The returned log holds the batch loss of the
/// iterate before each of the `steps` updates followed by the loss after the
/// last one; `params` ends up holding the bias-corrected weight average.
pub fn toy_train(
    ctx: &ModelContext,
    params: &mut ModelParams,
    samples: &[TrainSample],
    w: &LossWeights,
    hyper: &TrainHyper,
) -> Result<Vec<f64>> {
    hyper.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("training samples"));
    }
    let mut theta = flatten(params);
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut avg = vec![0.0; theta.len()];
    let mut log = Vec::with_capacity(hyper.steps + 1);
    for step in 0..=hyper.steps {
        let (loss, mut g) = batch_loss_and_grad(ctx, params, samples, w)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        log.push(loss);
        log::debug!("step {step} loss {loss:.6}");
        if step == hyper.steps {
            break;
        }
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > hyper.clip_norm {
            let s = hyper.clip_norm / norm;
            g.iter_mut().for_each(|x| *x *= s);
        }
        let t = (step + 1) as i32;
        let (c1, c2) = (1.0 - hyper.beta1.powi(t), 1.0 - hyper.beta2.powi(t));
        for i in 0..theta.len() {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            theta[i] -= hyper.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + hyper.epsilon);
            avg[i] = hyper.ema_decay * avg[i] + (1.0 - hyper.ema_decay) * theta[i];
        }
        unflatten(params, &theta)?;
    }
    if hyper.steps > 0 {
        let c = 1.0 - hyper.ema_decay.powi(hyper.steps as i32);
        avg.iter_mut().for_each(|a| *a /= c);
        unflatten(params, &avg)?;
    }
    Ok(log)
}

/// `step,loss` rows with a header.
pub fn loss_log_csv(log: &[f64]) -> String {
    let mut s = String::from("step,loss\n");
    for (i, l) in log.iter().enumerate() {
        s.push_str(&format!("{i},{l}\n"));
    }
    s
}

pub fn parse_loss_log(text: &str) -> std::result::Result<Vec<f64>, String> {
    let mut lines = text.lines();
    if lines.next() != Some("step,loss") {
        return Err("missing step,loss header".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (step, loss) = line
                .split_once(',')
                .ok_or(format!("line {}: expected two fields", i + 2))?;
            if step.parse::<usize>().ok() != Some(i) {
                return Err(format!("line {}: step out of order", i + 2));
            }
            loss.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2))
        })
        .collect()
}

pub fn write_loss_log(log: &[f64], path: &Path) -> Result<()> {
    crate::io::write_atomic(path, loss_log_csv(log).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyper_validation() {
        assert!(TrainHyper::default().validate().is_ok());
        for bad in [
            TrainHyper {
                ema_decay: 1.0,
                ..TrainHyper::default()
            },
            TrainHyper {
                learning_rate: -1.0,
                ..TrainHyper::default()
            },
            TrainHyper {
                clip_norm: 0.0,
                ..TrainHyper::default()
            },
            TrainHyper {
                beta2: 1.0,
                ..TrainHyper::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn loss_log_round_trip() {
        let log = vec![11.5, 0.25, 1e-3];
        assert_eq!(parse_loss_log(&loss_log_csv(&log)).unwrap(), log);
    }
}
