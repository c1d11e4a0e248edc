// SPDX-License-Identifier: Apache-2.0

//! Fully connected regression network over the technology features:
//! Xavier initialization, inputs rescaled to [−1, 1], labels normalized to
//! [0, 1], full-batch Adam with L2 regularization.

pub mod analysis;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::dataset::{FeatureRow, N_FEATURES};

pub const DEFAULT_SIZES: [usize; 4] = [N_FEATURES, 40, 20, 1];
/// Share of rows held out for validation.
pub const VAL_FRACTION: f64 = 0.2;
pub const MIN_ROWS: usize = 100;

/// ln(1 + eˣ) without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    if x >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softplus,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => softplus(x),
            Activation::Relu => x.max(0.0),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid(x),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Softplus => "softplus",
            Activation::Relu => "relu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softplus" => Ok(Activation::Softplus),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Which label a model regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Energy,
    Area,
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(Target::Energy),
            "area" => Ok(Target::Area),
            other => Err(Error::Config(format!("unknown target `{other}`, expected energy or area"))),
        }
    }
}

/// Features and one label per row, raw units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dataset(format!("{} feature rows but {} labels", x.nrows(), y.len())));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Dataset("non-finite value".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn from_rows(rows: &[FeatureRow], target: Target) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(N_FEATURES, |r| r.features.len());
        let mut x = Array2::zeros((n, m));
        for (i, r) in rows.iter().enumerate() {
            if r.features.len() != m {
                return Err(Error::Dataset(format!("row {} has {} features, expected {m}", i + 1, r.features.len())));
            }
            x.row_mut(i).assign(&Array1::from(r.features.clone()));
        }
        let y = rows
            .iter()
            .map(|r| match target {
                Target::Energy => r.energy,
                Target::Area => r.area,
            })
            .collect();
        Dataset::new(x, y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn select(&self, idx: &[usize]) -> Dataset {
        Dataset { x: self.x.select(Axis(0), idx), y: self.y.select(Axis(0), idx) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    /// `weights[l]` maps layer l to l + 1, shape (out, in).
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// Per-feature training range mapped onto [−1, 1].
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    /// Label range mapped onto [0, 1].
    pub y_lo: f64,
    pub y_hi: f64,
    pub seed: u64,
}

/// Xavier-uniform weights, zero biases, identity rescaling.
pub fn build_mlp(sizes: &[usize], activation: Activation, seed: u64) -> Result<Mlp> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Config(format!("bad layer sizes {sizes:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let a = (6.0 / (n_in + n_out) as f64).sqrt();
        weights.push(Array2::from_shape_fn((n_out, n_in), |_| rng.random_range(-a..a)));
        biases.push(Array1::zeros(n_out));
    }
    Ok(Mlp {
        sizes: sizes.to_vec(),
        activation,
        weights,
        biases,
        x_lo: vec![-1.0; sizes[0]],
        x_hi: vec![1.0; sizes[0]],
        y_lo: 0.0,
        y_hi: 1.0,
        seed,
    })
}

/// Pre-activations and activations of every layer for a batch.
pub(crate) struct Trace {
    pub z: Vec<Array2<f64>>,
    pub a: Vec<Array2<f64>>,
}

pub(crate) struct Grads {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Mlp {
    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn rescale_x(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.x_lo[j], self.x_hi[j]);
            if hi > lo {
                col.mapv_inplace(|v| 2.0 * (v - lo) / (hi - lo) - 1.0);
            } else {
                col.fill(0.0);
            }
        }
        out
    }

    fn y_span(&self) -> f64 {
        if self.y_hi > self.y_lo {
            self.y_hi - self.y_lo
        } else {
            1.0
        }
    }

    pub fn normalize_y(&self, y: f64) -> f64 {
        (y - self.y_lo) / self.y_span()
    }

    pub fn denormalize_y(&self, y: f64) -> f64 {
        self.y_lo + y * self.y_span()
    }

    /// Whether feature `j` varied over the training set.
    pub fn feature_active(&self, j: usize) -> bool {
        self.x_hi[j] > self.x_lo[j]
    }

    pub(crate) fn forward_trace(&self, xn: ArrayView2<f64>) -> Trace {
        let mut z = Vec::with_capacity(self.n_layers());
        let mut a = vec![xn.to_owned()];
        for l in 0..self.n_layers() {
            let mut zl = a[l].dot(&self.weights[l].t());
            zl += &self.biases[l];
            let al = if l + 1 < self.n_layers() {
                let act = self.activation;
                zl.mapv(|v| act.apply(v))
            } else {
                zl.clone()
            };
            z.push(zl);
            a.push(al);
        }
        Trace { z, a }
    }

    /// Normalized outputs for normalized inputs.
    pub fn forward_normalized(&self, xn: ArrayView2<f64>) -> Array1<f64> {
        let t = self.forward_trace(xn);
        t.a[self.n_layers()].column(0).to_owned()
    }

    /// Mean squared error on normalized labels and its gradients, with
    /// `l2·Σw²` added to the weight gradients only.
    pub(crate) fn gradients(&self, xn: ArrayView2<f64>, yn: &Array1<f64>, l2: f64) -> (f64, Grads) {
        let n = xn.nrows() as f64;
        let t = self.forward_trace(xn);
        let out = t.a[self.n_layers()].column(0).to_owned();
        let err = &out - yn;
        let mse = err.dot(&err) / n;
        let mut delta = (err * (2.0 / n)).insert_axis(Axis(1));
        let mut gw = vec![Array2::zeros((0, 0)); self.n_layers()];
        let mut gb = vec![Array1::zeros(0); self.n_layers()];
        for l in (0..self.n_layers()).rev() {
            let mut w = delta.t().dot(&t.a[l]);
            if l2 > 0.0 {
                w.scaled_add(2.0 * l2, &self.weights[l]);
            }
            gw[l] = w;
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut d = delta.dot(&self.weights[l]);
                let act = self.activation;
                Zip::from(&mut d).and(&t.z[l - 1]).for_each(|d, &z| *d *= act.derivative(z));
                delta = d;
            }
        }
        (mse, Grads { w: gw, b: gb })
    }

    /// Prediction in label units.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        Ok(self.predict_batch(&[features.to_vec()])?[0])
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let m = self.n_inputs();
        let mut x = Array2::zeros((rows.len(), m));
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::Dataset(format!("row {} has {} features, model expects {m}", i + 1, r.len())));
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {} feature {} is not finite", i + 1, j + 1)));
            }
            x.row_mut(i).assign(&ndarray::ArrayView1::from(r.as_slice()));
        }
        let xn = self.rescale_x(x.view());
        Ok(self.forward_normalized(xn.view()).iter().map(|&v| self.denormalize_y(v)).collect())
    }

    /// Outputs of every hidden layer for one raw feature vector.
    pub fn hidden_outputs(&self, features: &[f64]) -> Result<Vec<Vec<f64>>> {
        if features.len() != self.n_inputs() {
            return Err(Error::Dataset(format!("model expects {} features", self.n_inputs())));
        }
        let x = Array2::from_shape_vec((1, features.len()), features.to_vec()).map_err(|e| Error::Dataset(e.to_string()))?;
        let t = self.forward_trace(self.rescale_x(x.view()).view());
        Ok(t.a[1..self.n_layers()].iter().map(|a| a.row(0).to_vec()).collect())
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2: f64,
    pub epochs: usize,
    /// Seeds the train/validation split.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, l2: 1e-4, epochs: 50_000, seed: 42 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.eps > 0.0 && self.l2 >= 0.0 && self.epochs > 0) {
            return Err(Error::Config("lr, eps and epochs must be positive, l2 non-negative".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Loss history on normalized labels and error statistics of the returned
/// (best-validation) weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub best_train_mse: f64,
    /// Mean |prediction − label| / |label| over the validation rows.
    pub val_rel_error: f64,
    pub n_train: usize,
    pub n_val: usize,
}

impl TrainReport {
    /// Validation RMSE relative to the training label range.
    pub fn val_rel_rmse(&self) -> f64 {
        self.best_val_mse.sqrt()
    }
}

/// Seeded 80/20 split of row indices.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (n as f64 * VAL_FRACTION).round() as usize;
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Weights below this magnitude are set to zero; products of smaller
/// weights with gradients fall into the (very slow) subnormal range.
const WEIGHT_FLOOR: f64 = 1e-150;

fn flush(x: f64, floor: f64) -> f64 {
    if x.abs() < floor {
        0.0
    } else {
        x
    }
}

struct Adam {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: i32,
}

impl Adam {
    fn new(mlp: &Mlp) -> Self {
        Adam {
            m_w: mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_w: mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_b: mlp.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            v_b: mlp.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, mlp: &mut Mlp, g: &Grads, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.lr, cfg.eps);
        let upd = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = flush(b1 * *m + (1.0 - b1) * g, f64::MIN_POSITIVE);
            *v = flush(b2 * *v + (1.0 - b2) * g * g, f64::MIN_POSITIVE);
            *p = flush(*p - lr * (*m / c1) / ((*v / c2).sqrt() + eps), WEIGHT_FLOOR);
        };
        for l in 0..mlp.weights.len() {
            Zip::from(&mut mlp.weights[l])
                .and(&mut self.m_w[l])
                .and(&mut self.v_w[l])
                .and(&g.w[l])
                .for_each(|p, m, v, &g| upd(p, m, v, g));
            Zip::from(&mut mlp.biases[l])
                .and(&mut self.m_b[l])
                .and(&mut self.v_b[l])
                .and(&g.b[l])
                .for_each(|p, m, v, &g| upd(p, m, v, g));
        }
    }
}

fn column_bounds(x: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    x.axis_iter(Axis(1))
        .map(|c| {
            c.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        })
        .unzip()
}

/// Full-batch Adam on the 80% split; returns the weights of the epoch with
/// the lowest validation loss.
pub fn train(mlp: &Mlp, data: &Dataset, cfg: &TrainConfig) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    if data.len() < MIN_ROWS {
        return Err(Error::Dataset(format!("{} rows, need at least {MIN_ROWS}", data.len())));
    }
    if data.x.ncols() != mlp.n_inputs() {
        return Err(Error::Dataset(format!("{} features, model expects {}", data.x.ncols(), mlp.n_inputs())));
    }
    let (tr_idx, va_idx) = split_indices(data.len(), cfg.seed);
    let (tr, va) = (data.select(&tr_idx), data.select(&va_idx));

    let mut m = mlp.clone();
    (m.x_lo, m.x_hi) = column_bounds(&tr.x);
    m.y_lo = tr.y.iter().copied().fold(f64::INFINITY, f64::min);
    m.y_hi = tr.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xt = m.rescale_x(tr.x.view());
    let xv = m.rescale_x(va.x.view());
    let yt = tr.y.mapv(|v| m.normalize_y(v));
    let yv = va.y.mapv(|v| m.normalize_y(v));

    let mut adam = Adam::new(&m);
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0, f64::INFINITY, m.clone());
    for epoch in 0..cfg.epochs {
        let (mse, g) = m.gradients(xt.view(), &yt, cfg.l2);
        let pv = m.forward_normalized(xv.view());
        let e = &pv - &yv;
        let vmse = e.dot(&e) / yv.len().max(1) as f64;
        if !(mse.is_finite() && vmse.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        train_loss.push(mse);
        val_loss.push(vmse);
        if vmse < best.0 {
            best = (vmse, epoch, mse, m.clone());
        }
        adam.step(&mut m, &g, cfg);
    }
    let (best_val_mse, best_epoch, best_train_mse, model) = best;
    let pv = model.forward_normalized(xv.view());
    let val_rel_error = pv
        .iter()
        .zip(va.y.iter())
        .map(|(&p, &y)| (model.denormalize_y(p) - y).abs() / y.abs().max(f64::MIN_POSITIVE))
        .sum::<f64>()
        / va.len().max(1) as f64;
    Ok((
        model,
        TrainReport {
            train_loss,
            val_loss,
            best_epoch,
            best_val_mse,
            best_train_mse,
            val_rel_error,
            n_train: tr.len(),
            n_val: va.len(),
        },
    ))
}

pub const MODEL_FORMAT: &str = "dispel-mlp";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    sizes: Vec<usize>,
    activation: Activation,
    seed: u64,
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
    y_lo: f64,
    y_hi: f64,
    /// Row-major (out, in) per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn to_json(&self) -> Result<String> {
        let f = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            sizes: self.sizes.clone(),
            activation: self.activation,
            seed: self.seed,
            x_lo: self.x_lo.clone(),
            x_hi: self.x_hi.clone(),
            y_lo: self.y_lo,
            y_hi: self.y_hi,
            weights: self.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
        };
        serde_json::to_string_pretty(&f).map_err(|e| Error::Dataset(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
            return Err(Error::Dataset(format!("unsupported model format {} v{}", f.format, f.version)));
        }
        let mut m = build_mlp(&f.sizes, f.activation, f.seed)?;
        let n_in = f.sizes[0];
        if f.weights.len() != m.weights.len() || f.biases.len() != m.biases.len() || f.x_lo.len() != n_in || f.x_hi.len() != n_in {
            return Err(Error::Dataset("model arrays do not match layer sizes".into()));
        }
        for l in 0..m.weights.len() {
            let dim = m.weights[l].raw_dim();
            m.weights[l] = Array2::from_shape_vec(dim, f.weights[l].clone()).map_err(|e| Error::Dataset(format!("layer {l}: {e}")))?;
            if f.biases[l].len() != m.biases[l].len() {
                return Err(Error::Dataset(format!("layer {l}: bias length mismatch")));
            }
            m.biases[l] = Array1::from(f.biases[l].clone());
        }
        (m.x_lo, m.x_hi, m.y_lo, m.y_hi) = (f.x_lo, f.x_hi, f.y_lo, f.y_hi);
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_identities() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(softplus(50.0) - 50.0 < 1e-20);
        assert!(softplus(800.0).is_finite() && softplus(-800.0) >= 0.0);
        for x in [0.5, 3.0, 10.0] {
            assert!((softplus(x) - softplus(-x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_is_softplus_slope() {
        for x in [-30.0, -2.0, 0.0, 0.7, 25.0] {
            let h = 1e-6;
            let fd = (softplus(x + h) - softplus(x - h)) / (2.0 * h);
            assert!((fd - sigmoid(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn split_is_eighty_twenty_and_disjoint() {
        let (a, b) = split_indices(1000, 3);
        assert_eq!((a.len(), b.len()), (800, 200));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }
}
