//! The learning task: l2-regularized softmax regression.
//!
//! Parameters are a flat vector of dimension `C * (d_in + 1)` holding the
//! per-class weight rows with the bias appended as a constant-1 feature, so
//! the regularizer covers the bias too and the loss is uniformly
//! `reg`-strongly convex.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Result, SimError};
use crate::linalg;

/// Flat parameter vector of one agent's model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub params: Vec<f64>,
    pub n_classes: usize,
    pub d_in: usize,
}

impl ModelState {
    pub fn zeros(n_classes: usize, d_in: usize) -> Self {
        ModelState {
            params: vec![0.0; n_classes * (d_in + 1)],
            n_classes,
            d_in,
        }
    }

    pub fn constant(n_classes: usize, d_in: usize, value: f64) -> Self {
        ModelState {
            params: vec![value; n_classes * (d_in + 1)],
            n_classes,
            d_in,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_classes * (self.d_in + 1)
    }

    fn check(&self, s: &Sample) -> Result<()> {
        if s.features.len() != self.d_in {
            return Err(SimError::DimensionMismatch(format!(
                "sample has {} features, model expects {}",
                s.features.len(),
                self.d_in
            )));
        }
        if s.label >= self.n_classes {
            return Err(SimError::DimensionMismatch(format!(
                "label {} out of range for {} classes",
                s.label, self.n_classes
            )));
        }
        Ok(())
    }
}

/// Curvature constants of the task.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossProfile {
    /// Strong-convexity constant (equals the regularization weight).
    pub mu: f64,
    /// Smoothness bound.
    pub l_smooth: f64,
    pub reg: f64,
}

/// Logits for one sample: `w_c . x + b_c` per class.
fn logits(x: &ModelState, s: &Sample) -> Vec<f64> {
    let stride = x.d_in + 1;
    (0..x.n_classes)
        .map(|c| {
            let row = &x.params[c * stride..(c + 1) * stride];
            linalg::dot(&row[..x.d_in], &s.features) + row[x.d_in]
        })
        .collect()
}

/// Softmax probabilities with max-subtraction for stability.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}

/// Cross-entropy of the softmax prediction plus `(reg/2) ||params||^2`.
pub fn loss(x: &ModelState, s: &Sample, reg: f64) -> Result<f64> {
    x.check(s)?;
    let lg = logits(x, s);
    let m = lg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + lg.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    Ok(lse - lg[s.label] + 0.5 * reg * linalg::norm_sq(&x.params))
}

/// Analytic gradient: `(softmax(logits) - onehot(label)) ⊗ [features; 1] + reg * params`.
pub fn grad(x: &ModelState, s: &Sample, reg: f64) -> Result<Vec<f64>> {
    x.check(s)?;
    let p = softmax(&logits(x, s));
    let stride = x.d_in + 1;
    let mut g = vec![0.0; x.dim()];
    for c in 0..x.n_classes {
        let coef = p[c] - if c == s.label { 1.0 } else { 0.0 };
        let row = &mut g[c * stride..(c + 1) * stride];
        for d in 0..x.d_in {
            row[d] = coef * s.features[d];
        }
        row[x.d_in] = coef;
    }
    linalg::axpy(&mut g, reg, &x.params);
    Ok(g)
}

/// Mean loss over a sample list, summed in index order.
pub fn batch_loss(x: &ModelState, samples: &[Sample], reg: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(SimError::EmptyBatch);
    }
    let mut total = 0.0;
    for s in samples {
        total += loss(x, s, reg)?;
    }
    Ok(total / samples.len() as f64)
}

/// Mean gradient over a sample list, summed in index order.
pub fn batch_grad(x: &ModelState, samples: &[Sample], reg: f64) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(SimError::EmptyBatch);
    }
    let mut total = vec![0.0; x.dim()];
    for s in samples {
        let g = grad(x, s, reg)?;
        linalg::axpy(&mut total, 1.0, &g);
    }
    linalg::scale(&mut total, 1.0 / samples.len() as f64);
    Ok(total)
}

/// Certified curvature constants over a sample pool.
///
/// The per-sample softmax Hessian has spectral norm at most
/// `||[features; 1]||^2 / 2`, so `l_smooth = max ||[f;1]||^2 / 2 + reg` and
/// `mu = reg`.
pub fn smoothness_bound(pool: &[Sample], reg: f64) -> LossProfile {
    assert!(!pool.is_empty(), "empty pool");
    let max_sq = pool
        .iter()
        .map(|s| linalg::norm_sq(&s.features) + 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    LossProfile {
        mu: reg,
        l_smooth: 0.5 * max_sq + reg,
        reg,
    }
}

/// Iteration cap for the full-batch minimizer.
const MINIMIZER_CAP: usize = 2_000_000;

/// Minimize the mean loss over `samples` to gradient norm `tol`.
///
/// Full-batch first-order descent with momentum chosen for the strongly
/// convex regime; the returned point always satisfies `||grad|| <= tol`,
/// which is the contract callers rely on.
pub fn solve_empirical_minimizer(
    samples: &[Sample],
    n_classes: usize,
    d_in: usize,
    reg: f64,
    tol: f64,
) -> Result<ModelState> {
    assert!(reg > 0.0, "regularization must be positive for a unique minimizer");
    if samples.is_empty() {
        return Err(SimError::EmptyBatch);
    }
    let profile = smoothness_bound(samples, reg);
    let l = profile.l_smooth;
    let mu = profile.mu;
    let step = 1.0 / l;
    let kappa = (l / mu).sqrt();
    let momentum = (kappa - 1.0) / (kappa + 1.0);

    let mut x = ModelState::zeros(n_classes, d_in);
    let mut y = x.params.clone();
    let mut reached = f64::INFINITY;
    for _ in 0..MINIMIZER_CAP {
        let probe = ModelState {
            params: y.clone(),
            n_classes,
            d_in,
        };
        let g = batch_grad(&probe, samples, reg)?;
        let gn = linalg::norm(&g);
        reached = gn;
        if gn <= tol {
            return Ok(probe);
        }
        let mut x_next = y.clone();
        linalg::axpy(&mut x_next, -step, &g);
        let mut y_next = x_next.clone();
        for i in 0..y_next.len() {
            y_next[i] += momentum * (x_next[i] - x.params[i]);
        }
        x.params = x_next;
        y = y_next;
    }
    Err(SimError::NoConvergence {
        tol,
        cap: MINIMIZER_CAP,
        reached,
    })
}
