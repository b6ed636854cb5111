//! Linear softmax classifier trained by full-batch gradient descent.
//!
//! Inputs are standardized per column (z-score fit on the training rows),
//! then mapped to class probabilities by `softmax(x W + b)`. Training
//! minimizes the mean multinomial cross-entropy starting from zero weights
//! and stops when the largest absolute gradient component drops below
//! `gradient_tolerance` or after `max_epochs` full passes.

use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SoftmaxError {
    #[error("softmax input contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("softmax input is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("{samples} samples cannot train {classes} classes")]
    TooFewSamples { samples: usize, classes: usize },
    #[error("{labels} labels for {rows} rows")]
    LabelCount { labels: usize, rows: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite input value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("input has {actual} columns, model expects {expected}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub actual: usize,
}

/// Numerically safe softmax (the maximum is subtracted before exponentiating).
pub fn softmax(z: &[f64]) -> Result<Vec<f64>, SoftmaxError> {
    if z.is_empty() {
        return Err(SoftmaxError::Empty);
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(SoftmaxError::NonFinite(i));
    }
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Overwrites finite logits with their softmax and returns the log of the
/// normalizer relative to the maximum, so that `log p_i = z_i - max - ret`.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    libm::log(sum)
}

/// Per-column affine standardization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocess {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Preprocess {
    /// Fits column means and population standard deviations. Constant
    /// columns get scale 1.
    pub fn fit<T: Copy + Into<f64>>(x: &Matrix<T>) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut mean = vec![0.0; d];
        for row in x.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v.into();
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for row in x.iter_rows() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let dv = v.into() - m;
                *s += dv * dv;
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n as f64);
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply<T: Copy + Into<f64>>(&self, x: &Matrix<T>) -> Matrix<f64> {
        let mut out = Vec::with_capacity(x.rows() * x.cols());
        for row in x.iter_rows() {
            out.extend(row.iter().zip(&self.mean).zip(&self.scale).map(|((&v, m), s)| (v.into() - m) / s));
        }
        Matrix::from_vec(x.rows(), x.cols(), out).expect("same shape")
    }
}

/// Weights and bias of a linear softmax model in standardized input space.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// d × K.
    pub weights: Matrix<f64>,
    /// K.
    pub bias: Vec<f64>,
}

impl Params {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self { weights: Matrix::zeros(d, k), bias: vec![0.0; k] }
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.as_slice().iter().chain(&self.bias)
    }

    /// Largest absolute component.
    pub fn inf_norm(&self) -> f64 {
        self.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.iter().map(|v| v * v).sum())
    }

    /// `self - step * dir`, component-wise.
    fn stepped(&self, step: f64, dir: &Params) -> Params {
        let weights = self.weights.as_slice().iter().zip(dir.weights.as_slice()).map(|(w, g)| w - step * g).collect();
        Params {
            weights: Matrix::from_vec(self.weights.rows(), self.weights.cols(), weights).expect("same shape"),
            bias: self.bias.iter().zip(&dir.bias).map(|(b, g)| b - step * g).collect(),
        }
    }

    /// Flat view `[weights row-major..., bias...]`, handy for finite differences.
    pub fn to_flat(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }

    pub fn from_flat(d: usize, k: usize, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), d * k + k, "flat parameter length");
        Self { weights: Matrix::from_vec(d, k, flat[..d * k].to_vec()).expect("shape"), bias: flat[d * k..].to_vec() }
    }
}

fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Dot product with eight independent partial sums, which lets the
/// compiler vectorize the loop.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            lanes[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    lanes.iter().sum::<f64>() + tail
}

/// Mean multinomial cross-entropy over a fixed design matrix.
pub struct Objective<'a> {
    x: &'a Matrix<f64>,
    labels: &'a [usize],
    k: usize,
    /// `x` transposed (d × N) for the gradient product.
    xt: Vec<f64>,
}

impl<'a> Objective<'a> {
    /// Panics if `x` has no rows, or if `labels` does not match the row count
    /// or holds a label ≥ `k`.
    pub fn new(x: &'a Matrix<f64>, labels: &'a [usize], k: usize) -> Self {
        assert!(x.rows() > 0, "at least one row");
        assert_eq!(x.rows(), labels.len(), "one label per row");
        assert!(labels.iter().all(|&l| l < k), "labels in range");
        let xt = transpose(x.as_slice(), x.rows(), x.cols());
        Self { x, labels, k, xt }
    }

    fn logits(&self, p: &Params) -> Matrix<f64> {
        let (d, k) = (self.x.cols(), self.k);
        let wt = transpose(p.weights.as_slice(), d, k);
        let mut out = vec![0.0; self.x.rows() * k];
        for (row, acc) in self.x.iter_rows().zip(out.chunks_exact_mut(k)) {
            for (c, a) in acc.iter_mut().enumerate() {
                *a = p.bias[c] + dot(row, &wt[c * d..(c + 1) * d]);
            }
        }
        Matrix::from_vec(self.x.rows(), k, out).expect("N x K")
    }

    /// Converts logits to probabilities in place and returns the mean loss.
    fn loss_from_logits(&self, logits: &mut Matrix<f64>) -> f64 {
        let mut total = 0.0;
        for (i, &y) in self.labels.iter().enumerate() {
            let row = logits.row_mut(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let shifted_true = row[y] - max;
            let log_norm = softmax_in_place(row);
            total += log_norm - shifted_true;
        }
        total / self.labels.len() as f64
    }

    pub fn loss(&self, p: &Params) -> f64 {
        let mut logits = self.logits(p);
        self.loss_from_logits(&mut logits)
    }

    fn gradient_from_probs(&self, probs: &Matrix<f64>) -> Params {
        let (n, d, k) = (self.x.rows(), self.x.cols(), self.k);
        // Residuals stored K x N so each weight gradient is one dot product.
        let mut resid = transpose(probs.as_slice(), n, k);
        for (i, &y) in self.labels.iter().enumerate() {
            resid[y * n + i] -= 1.0;
        }
        let inv_n = 1.0 / n as f64;
        let bias = resid.chunks_exact(n).map(|r| r.iter().sum::<f64>() * inv_n).collect();
        let mut weights = vec![0.0; d * k];
        for (w, xcol) in weights.chunks_exact_mut(k).zip(self.xt.chunks_exact(n)) {
            for (wv, r) in w.iter_mut().zip(resid.chunks_exact(n)) {
                *wv = dot(xcol, r) * inv_n;
            }
        }
        Params { weights: Matrix::from_vec(d, k, weights).expect("d x K"), bias }
    }

    pub fn loss_and_gradient(&self, p: &Params) -> (f64, Params) {
        let mut probs = self.logits(p);
        let loss = self.loss_from_logits(&mut probs);
        (loss, self.gradient_from_probs(&probs))
    }
}

/// Step-size policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepSchedule {
    /// Halve the rate whenever a step would increase the loss, and retry.
    #[default]
    Backtracking,
    /// Fixed rate, every step accepted.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub gradient_tolerance: f64,
    pub learning_rate: f64,
    pub schedule: StepSchedule,
    /// Echoed into reports. Initialization is all-zero, so training itself
    /// does not draw random numbers.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 2000,
            gradient_tolerance: 1e-6,
            learning_rate: 0.1,
            schedule: StepSchedule::Backtracking,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.max_epochs == 0 {
            return Err(TrainError::InvalidConfig("max_epochs must be at least 1"));
        }
        if self.gradient_tolerance.is_nan() || self.gradient_tolerance <= 0.0 {
            return Err(TrainError::InvalidConfig("gradient_tolerance must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Record of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub initial_loss: f64,
    /// Loss after each accepted epoch.
    pub losses: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
    /// Largest absolute gradient component at the returned parameters.
    pub final_gradient_inf_norm: f64,
    pub final_gradient_l2_norm: f64,
    pub final_learning_rate: f64,
    /// Classes with no training samples.
    pub empty_classes: Vec<usize>,
    /// Worker threads used by the inner loops (always 1 here).
    pub threads: usize,
    /// Wall-clock training time; filled in by callers that have a clock.
    pub wall_seconds: Option<f64>,
}

impl TrainTrace {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(self.initial_loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    pub params: Params,
    pub preprocess: Preprocess,
}

impl SoftmaxModel {
    pub fn input_dim(&self) -> usize {
        self.preprocess.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.params.num_classes()
    }

    /// A model with all-zero parameters and identity preprocessing.
    pub fn zeroed(d: usize, k: usize) -> Self {
        Self { params: Params::zeros(d, k), preprocess: Preprocess { mean: vec![0.0; d], scale: vec![1.0; d] } }
    }
}

// Stop halving once the step is this small relative to the initial rate.
const MIN_RATE_FACTOR: f64 = 1e-12;

/// Trains a `num_classes`-way softmax model on `x` (N × d) and `labels`.
pub fn train<T: Copy + Into<f64>>(
    x: &Matrix<T>,
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<(SoftmaxModel, TrainTrace), TrainError> {
    cfg.validate()?;
    let (n, d, k) = (x.rows(), x.cols(), num_classes);
    if d == 0 {
        return Err(TrainError::Degenerate("design matrix has no columns"));
    }
    if k < 2 {
        return Err(TrainError::Degenerate("need at least two classes"));
    }
    if labels.len() != n {
        return Err(TrainError::LabelCount { labels: labels.len(), rows: n });
    }
    if n < k {
        return Err(TrainError::TooFewSamples { samples: n, classes: k });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(TrainError::LabelOutOfRange { label, classes: k });
    }
    if let Some(pos) = x.as_slice().iter().position(|&v| !v.into().is_finite()) {
        return Err(TrainError::NonFiniteInput { row: pos / d, col: pos % d });
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let empty_classes = (0..k).filter(|&c| counts[c] == 0).collect();

    let preprocess = Preprocess::fit(x);
    let xs = preprocess.apply(x);
    let objective = Objective::new(&xs, labels, k);

    let mut params = Params::zeros(d, k);
    let mut probs = objective.logits(&params);
    let mut loss = objective.loss_from_logits(&mut probs);
    let initial_loss = loss;
    let mut rate = cfg.learning_rate;
    let mut losses = Vec::new();
    let mut epochs = 0;
    let mut converged = false;
    let mut stalled = false;

    let grad = loop {
        let grad = objective.gradient_from_probs(&probs);
        if grad.inf_norm() < cfg.gradient_tolerance {
            converged = true;
            break grad;
        }
        if epochs == cfg.max_epochs || stalled {
            break grad;
        }
        epochs += 1;
        loop {
            let trial = params.stepped(rate, &grad);
            let mut trial_probs = objective.logits(&trial);
            let trial_loss = objective.loss_from_logits(&mut trial_probs);
            let accept = match cfg.schedule {
                StepSchedule::Constant => {
                    if !trial_loss.is_finite() {
                        return Err(TrainError::Divergence { epoch: epochs });
                    }
                    true
                }
                StepSchedule::Backtracking => trial_loss.is_finite() && trial_loss <= loss,
            };
            if accept {
                params = trial;
                probs = trial_probs;
                loss = trial_loss;
                break;
            }
            rate *= 0.5;
            if rate < cfg.learning_rate * MIN_RATE_FACTOR {
                // No descent step exists at this precision; keep current params.
                stalled = true;
                break;
            }
        }
        losses.push(loss);
    };

    let trace = TrainTrace {
        initial_loss,
        losses,
        epochs,
        converged,
        final_gradient_inf_norm: grad.inf_norm(),
        final_gradient_l2_norm: grad.l2_norm(),
        final_learning_rate: rate,
        empty_classes,
        threads: 1,
        wall_seconds: None,
    };
    Ok((SoftmaxModel { params, preprocess }, trace))
}

/// Row-wise class probabilities for raw (unstandardized) inputs.
pub fn predict_proba<T: Copy + Into<f64>>(
    model: &SoftmaxModel,
    x: &Matrix<T>,
) -> Result<Matrix<f64>, DimensionMismatch> {
    if x.cols() != model.input_dim() {
        return Err(DimensionMismatch { expected: model.input_dim(), actual: x.cols() });
    }
    let xs = model.preprocess.apply(x);
    let labels = vec![0; xs.rows()];
    let objective = Objective::new(&xs, &labels, model.num_classes());
    let mut probs = objective.logits(&model.params);
    for i in 0..probs.rows() {
        softmax_in_place(probs.row_mut(i));
    }
    Ok(probs)
}

/// Row-wise argmax with ties going to the lowest class index.
pub fn argmax_rows(probs: &Matrix<f64>) -> Vec<usize> {
    probs
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (c, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn predict<T: Copy + Into<f64>>(model: &SoftmaxModel, x: &Matrix<T>) -> Result<Vec<usize>, DimensionMismatch> {
    predict_proba(model, x).map(|p| argmax_rows(&p))
}
