// SPDX-License-Identifier: Apache-2.0

//! Gradient checking, input-weight reports, hidden-neuron activation traces
//! along the frequency feature and the Softplus/ReLU comparison.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{build_mlp, train, Activation, Dataset, Mlp, TrainConfig, TrainReport};
use crate::error::{Error, Result};

/// Finite-difference step.
pub const GRAD_CHECK_H: f64 = 1e-5;
/// Gradients below this magnitude are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-7;

fn sample_loss(m: &Mlp, xn: &Array2<f64>, yn: &Array1<f64>) -> f64 {
    let e = &m.forward_normalized(xn.view()) - yn;
    e.dot(&e)
}

/// Largest relative difference between backpropagated gradients and
/// central differences over every weight and bias, for the squared error of
/// one raw sample.
pub fn grad_check(mlp: &Mlp, features: &[f64], label: f64) -> Result<f64> {
    if features.len() != mlp.n_inputs() {
        return Err(Error::Dataset(format!("model expects {} features", mlp.n_inputs())));
    }
    let x = Array2::from_shape_vec((1, features.len()), features.to_vec()).map_err(|e| Error::Dataset(e.to_string()))?;
    let xn = mlp.rescale_x(x.view());
    let yn = Array1::from(vec![mlp.normalize_y(label)]);
    let (_, g) = mlp.gradients(xn.view(), &yn, 0.0);
    let mut m = mlp.clone();
    let h = GRAD_CHECK_H;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(GRAD_CHECK_FLOOR);
    let mut worst: f64 = 0.0;
    for l in 0..m.weights.len() {
        for idx in 0..m.weights[l].len() {
            let (r, c) = (idx / m.weights[l].ncols(), idx % m.weights[l].ncols());
            let p0 = m.weights[l][[r, c]];
            m.weights[l][[r, c]] = p0 + h;
            let up = sample_loss(&m, &xn, &yn);
            m.weights[l][[r, c]] = p0 - h;
            let dn = sample_loss(&m, &xn, &yn);
            m.weights[l][[r, c]] = p0;
            worst = worst.max(rel(g.w[l][[r, c]], (up - dn) / (2.0 * h)));
        }
        for i in 0..m.biases[l].len() {
            let p0 = m.biases[l][i];
            m.biases[l][i] = p0 + h;
            let up = sample_loss(&m, &xn, &yn);
            m.biases[l][i] = p0 - h;
            let dn = sample_loss(&m, &xn, &yn);
            m.biases[l][i] = p0;
            worst = worst.max(rel(g.b[l][i], (up - dn) / (2.0 * h)));
        }
    }
    Ok(worst)
}

/// Analytic gradients of one sample's squared error, for inspection.
pub fn sample_gradients(mlp: &Mlp, features: &[f64], label: f64) -> Result<(Vec<Array2<f64>>, Vec<Array1<f64>>)> {
    let x = Array2::from_shape_vec((1, features.len()), features.to_vec()).map_err(|e| Error::Dataset(e.to_string()))?;
    let xn = mlp.rescale_x(x.view());
    let yn = Array1::from(vec![mlp.normalize_y(label)]);
    let (_, g) = mlp.gradients(xn.view(), &yn, 0.0);
    Ok((g.w, g.b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureGroup {
    Logic,
    Interconnect,
    Operating,
}

pub fn feature_group(name: &str) -> FeatureGroup {
    if name == "v_dd" || name == "f_ach" {
        FeatureGroup::Operating
    } else if name.starts_with("R_") || name.starts_with("C_") {
        FeatureGroup::Interconnect
    } else {
        FeatureGroup::Logic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronWeights {
    pub neuron: usize,
    /// (feature, weight), by decreasing |weight|; features constant over the
    /// training set come last since they never reach the neuron.
    pub ranked: Vec<(String, f64)>,
    pub logic_mean_abs: f64,
    pub interconnect_mean_abs: f64,
    pub dominant: FeatureGroup,
    /// Σ|w| over features that varied in training.
    pub responsiveness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub neurons: Vec<NeuronWeights>,
    /// Over logic-dominated neurons: share of (drive current, delay) weight
    /// pairs of the same gate with opposite signs.
    pub ion_delay_opposite_share: f64,
    pub most_responsive: usize,
}

fn mean_abs(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
    }
}

/// Per first-hidden-layer neuron: input weights ranked by magnitude and
/// whether interconnect or logic features dominate.
pub fn analyze_weights(model: &Mlp, names: &[String]) -> Result<WeightReport> {
    let w = &model.weights[0];
    if names.len() != w.ncols() {
        return Err(Error::Dataset(format!("{} names for {} inputs", names.len(), w.ncols())));
    }
    let mut neurons = Vec::with_capacity(w.nrows());
    let (mut opposite, mut pairs) = (0usize, 0usize);
    for (i, row) in w.outer_iter().enumerate() {
        let mut ranked: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| {
            model
                .feature_active(b.0)
                .cmp(&model.feature_active(a.0))
                .then(b.1.abs().total_cmp(&a.1.abs()))
                .then(a.0.cmp(&b.0))
        });
        let pick = |g: FeatureGroup| -> Vec<f64> {
            (0..names.len())
                .filter(|&j| feature_group(&names[j]) == g && model.feature_active(j))
                .map(|j| row[j])
                .collect()
        };
        let logic = mean_abs(&pick(FeatureGroup::Logic));
        let itc = mean_abs(&pick(FeatureGroup::Interconnect));
        let dominant = if itc > logic { FeatureGroup::Interconnect } else { FeatureGroup::Logic };
        if dominant == FeatureGroup::Logic {
            for (j, n) in names.iter().enumerate() {
                for (ion, delay) in [("_ion_up_uA", "_rise_ps"), ("_ion_down_uA", "_fall_ps")] {
                    if let Some(gate) = n.strip_suffix(ion) {
                        if let Some(k) = names.iter().position(|m| *m == format!("{gate}{delay}")) {
                            if model.feature_active(j) && model.feature_active(k) {
                                pairs += 1;
                                if row[j] * row[k] < 0.0 {
                                    opposite += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        let responsiveness = (0..names.len()).filter(|&j| model.feature_active(j)).map(|j| row[j].abs()).sum();
        neurons.push(NeuronWeights {
            neuron: i,
            ranked: ranked.into_iter().map(|(j, v)| (names[j].clone(), v)).collect(),
            logic_mean_abs: logic,
            interconnect_mean_abs: itc,
            dominant,
            responsiveness,
        });
    }
    let most_responsive = neurons
        .iter()
        .max_by(|a, b| a.responsiveness.total_cmp(&b.responsiveness).then(b.neuron.cmp(&a.neuron)))
        .map_or(0, |n| n.neuron);
    Ok(WeightReport {
        neurons,
        ion_delay_opposite_share: if pairs == 0 { 0.0 } else { opposite as f64 / pairs as f64 },
        most_responsive,
    })
}

/// `base` with the feature at `index` replaced by each grid value.
pub fn feature_sweep(base: &[f64], index: usize, grid: &[f64]) -> Vec<Vec<f64>> {
    grid.iter()
        .map(|&v| {
            let mut x = base.to_vec();
            x[index] = v;
            x
        })
        .collect()
}

/// Model output along the last feature (achieved frequency).
pub fn predict_curve(model: &Mlp, base: &[f64], f_grid: &[f64]) -> Result<Vec<f64>> {
    model.predict_batch(&feature_sweep(base, model.n_inputs() - 1, f_grid))
}

pub fn second_differences(curve: &[f64]) -> Vec<f64> {
    curve.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect()
}

/// Mean |second difference|; zero for a straight line.
pub fn smoothness(curve: &[f64]) -> f64 {
    mean_abs(&second_differences(curve))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveShape {
    /// Index of the minimum.
    pub knee: usize,
    pub monotone_after_knee: bool,
    /// Sign changes of the second difference after the knee, ignoring
    /// values within `tolerance` of the largest |second difference|.
    pub curvature_flips: usize,
}

pub fn curve_shape(curve: &[f64], tolerance: f64) -> CurveShape {
    let knee = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let tail = &curve[knee..];
    let monotone_after_knee = tail.windows(2).all(|w| w[1] >= w[0]);
    let d2 = second_differences(tail);
    let big = d2.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let signs: Vec<bool> = d2.iter().filter(|v| v.abs() > tolerance * big).map(|v| *v > 0.0).collect();
    let curvature_flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
    CurveShape { knee, monotone_after_knee, curvature_flips }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeuronClass {
    Inactive,
    Active,
    Transitioning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotReport {
    pub f_grid: Vec<f64>,
    /// Per second-hidden-layer neuron, output along the grid.
    pub traces: Vec<Vec<f64>>,
    pub classes: Vec<NeuronClass>,
    pub transitioning: Vec<usize>,
}

pub const THETA_LO: f64 = 0.05;
pub const THETA_HI: f64 = 0.5;

/// Sweeps the frequency feature and classifies each neuron of the second
/// hidden layer against thresholds relative to the largest trace value.
pub fn find_pivot(model: &Mlp, base: &[f64], f_grid: &[f64], theta_lo: f64, theta_hi: f64) -> Result<PivotReport> {
    if model.sizes.len() < 4 {
        return Err(Error::Config("model has no second hidden layer".into()));
    }
    let rows = feature_sweep(base, model.n_inputs() - 1, f_grid);
    let n2 = model.sizes[2];
    let mut traces = vec![Vec::with_capacity(rows.len()); n2];
    for r in &rows {
        let h = model.hidden_outputs(r)?;
        for (k, v) in h[1].iter().enumerate() {
            traces[k].push(*v);
        }
    }
    let top = traces.iter().flatten().fold(0.0_f64, |m, v| m.max(*v));
    let classes: Vec<NeuronClass> = traces
        .iter()
        .map(|t| {
            let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
            if !(top > 0.0) || hi < theta_lo * top {
                NeuronClass::Inactive
            } else if lo > theta_hi * top {
                NeuronClass::Active
            } else {
                NeuronClass::Transitioning
            }
        })
        .collect();
    let transitioning = classes
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == NeuronClass::Transitioning)
        .map(|(i, _)| i)
        .collect();
    Ok(PivotReport { f_grid: f_grid.to_vec(), traces, classes, transitioning })
}

#[derive(Debug, Clone)]
pub struct ReluComparison {
    pub softplus: Mlp,
    pub relu: Mlp,
    pub softplus_report: TrainReport,
    pub relu_report: TrainReport,
    pub curve_softplus: Vec<f64>,
    pub curve_relu: Vec<f64>,
    pub smooth_softplus: f64,
    pub smooth_relu: f64,
}

impl ReluComparison {
    /// smoothness(ReLU) / smoothness(Softplus).
    pub fn ratio(&self) -> f64 {
        self.smooth_relu / self.smooth_softplus
    }
}

/// Trains both activations from the same seeds and compares their
/// predicted curves along the frequency feature.
pub fn relu_compare(data: &Dataset, sizes: &[usize], cfg: &TrainConfig, base: &[f64], f_grid: &[f64]) -> Result<ReluComparison> {
    let run = |a: Activation| -> Result<(Mlp, TrainReport)> { train(&build_mlp(sizes, a, cfg.seed)?, data, cfg) };
    let (softplus, softplus_report) = run(Activation::Softplus)?;
    let (relu, relu_report) = run(Activation::Relu)?;
    let curve_softplus = predict_curve(&softplus, base, f_grid)?;
    let curve_relu = predict_curve(&relu, base, f_grid)?;
    Ok(ReluComparison {
        smooth_softplus: smoothness(&curve_softplus),
        smooth_relu: smoothness(&curve_relu),
        softplus,
        relu,
        softplus_report,
        relu_report,
        curve_softplus,
        curve_relu,
    })
}

/// Evenly spaced grid with `n` points from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
