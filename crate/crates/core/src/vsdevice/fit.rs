// SPDX-License-Identifier: Apache-2.0

//! Levenberg–Marquardt extraction of {v, μ, V_T0, δ, β} from I-V samples.
//!
//! The objective is the sum of squared relative current errors so that
//! subthreshold decades carry as much weight as on-state points.

use nalgebra::{DMatrix, DVector};

use super::{solve_spd, IvPoint, Polarity, VsModel, VsParams, ROOM_TEMPERATURE};
use crate::error::{Error, Result};

/// Parameters held fixed during extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitFixed {
    pub polarity: Polarity,
    pub l_gate: f64,
    pub c_inv: f64,
    pub ss: f64,
}

impl FitFixed {
    /// Reads `polarity`, `l_gate` (nm), `c_inv` (µF/cm²) and `ss` (mV/dec).
    pub fn from_kv(text: &str) -> Result<Self> {
        let m = crate::kv::KvMap::parse(text, &["polarity", "l_gate", "c_inv", "ss"])?;
        let f = FitFixed {
            polarity: m.require::<String>("polarity")?.parse()?,
            l_gate: m.require("l_gate")?,
            c_inv: m.require("c_inv")?,
            ss: m.require("ss")?,
        };
        if !(f.l_gate > 0.0 && f.c_inv > 0.0 && f.ss > 0.0) {
            return Err(Error::ParameterDomain("l_gate, c_inv and ss must be positive".into()));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IvFit {
    pub params: VsParams,
    pub rms_rel_error: f64,
    pub iterations: usize,
}

const MIN_POINTS: usize = 10;
const MAX_ITER: usize = 300;
const STARTS: [(f64, f64); 3] = [(0.5e7, 100.0), (1.0e7, 300.0), (2.0e7, 600.0)];

fn params_from(theta: &DVector<f64>, fixed: &FitFixed) -> VsParams {
    VsParams {
        polarity: fixed.polarity,
        v: theta[0].exp(),
        mu: theta[1].exp(),
        l_gate: fixed.l_gate,
        c_inv: fixed.c_inv,
        ss: fixed.ss,
        v_t0: theta[2],
        dibl: theta[3].max(0.0),
        beta: theta[4].exp(),
        temperature: ROOM_TEMPERATURE,
    }
}

fn residuals(theta: &DVector<f64>, fixed: &FitFixed, pts: &[IvPoint]) -> Option<DVector<f64>> {
    let m = VsModel::new(params_from(theta, fixed)).ok()?;
    let r = DVector::from_iterator(
        pts.len(),
        pts.iter().map(|p| m.current_normalized(p.v_gs, p.v_ds) / p.i_d - 1.0),
    );
    r.iter().all(|x| x.is_finite()).then_some(r)
}

fn levenberg_marquardt(
    mut theta: DVector<f64>,
    fixed: &FitFixed,
    pts: &[IvPoint],
) -> Option<(DVector<f64>, f64, usize)> {
    let n = theta.len();
    let mut r = residuals(&theta, fixed, pts)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iter = 0;
    while iter < MAX_ITER {
        iter += 1;
        let mut jac = DMatrix::zeros(pts.len(), n);
        for k in 0..n {
            let h = 1e-6 * theta[k].abs().max(1e-2);
            let mut tp = theta.clone();
            tp[k] += h;
            let mut tm = theta.clone();
            tm[k] -= h;
            let (rp, rm) = (residuals(&tp, fixed, pts)?, residuals(&tm, fixed, pts)?);
            jac.set_column(k, &((rp - rm) / (2.0 * h)));
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = solve_spd(a, -&g) else {
                lambda *= 10.0;
                continue;
            };
            let mut cand = &theta + &step;
            cand[3] = cand[3].max(0.0);
            match residuals(&cand, fixed, pts) {
                Some(rc) if rc.norm_squared() < cost => {
                    let new_cost = rc.norm_squared();
                    let rel_drop = (cost - new_cost) / cost.max(1e-300);
                    theta = cand;
                    r = rc;
                    cost = new_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if rel_drop < 1e-14 {
                        return Some((theta, cost, iter));
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !improved || cost < 1e-28 {
            break;
        }
    }
    Some((theta, cost, iter))
}

/// Fits the free VS parameters to `points` (n-normalized frame).
pub fn fit_iv(points: &[IvPoint], fixed: FitFixed) -> Result<IvFit> {
    let usable: Vec<IvPoint> = points
        .iter()
        .copied()
        .filter(|p| p.i_d > 0.0 && p.v_ds > 0.0 && p.i_d.is_finite())
        .collect();
    if usable.len() < MIN_POINTS {
        return Err(Error::Fit(format!(
            "need at least {MIN_POINTS} forward-bias points, got {}",
            usable.len()
        )));
    }
    let distinct = |f: fn(&IvPoint) -> f64| {
        let mut v: Vec<f64> = usable.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    if distinct(|p| p.v_gs) < 2 || distinct(|p| p.v_ds) < 2 {
        return Err(Error::Fit(
            "degenerate bias set: need at least two distinct v_gs and v_ds".into(),
        ));
    }

    let mut best: Option<(DVector<f64>, f64, usize)> = None;
    for &(v0, mu0) in &STARTS {
        // coarse scan for a threshold start
        let mut start = DVector::from_vec(vec![v0.ln(), mu0.ln(), 0.0, 0.1, 1.8f64.ln()]);
        let mut best_scan = f64::INFINITY;
        let mut vt_best = 0.3;
        for k in 0..=30 {
            let vt = -0.5 + 0.05 * k as f64;
            start[2] = vt;
            if let Some(r) = residuals(&start, &fixed, &usable) {
                let c = r.iter().map(|x| (1.0 + x).abs().max(1e-30).ln().powi(2)).sum::<f64>();
                if c < best_scan {
                    best_scan = c;
                    vt_best = vt;
                }
            }
        }
        start[2] = vt_best;
        if let Some(res) = levenberg_marquardt(start, &fixed, &usable) {
            if best.as_ref().is_none_or(|b| res.1 < b.1) {
                best = Some(res);
            }
        }
    }
    let (theta, cost, iterations) =
        best.ok_or_else(|| Error::Fit("no start produced a finite model".into()))?;
    let params = params_from(&theta, &fixed);
    params.validate()?;
    Ok(IvFit {
        params,
        rms_rel_error: (cost / usable.len() as f64).sqrt(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synth(p: &VsParams) -> Vec<IvPoint> {
        let m = p.model().unwrap();
        let mut pts = Vec::new();
        for &vds in &[0.05, 0.1, 0.3, 0.5, 0.7] {
            for k in 0..15 {
                let vgs = 0.05 * k as f64;
                pts.push(IvPoint { v_gs: vgs, v_ds: vds, i_d: m.current_normalized(vgs, vds) });
            }
        }
        pts
    }

    fn fixed_for(p: &VsParams) -> FitFixed {
        FitFixed { polarity: p.polarity, l_gate: p.l_gate, c_inv: p.c_inv, ss: p.ss }
    }

    #[test]
    fn noiseless_round_trip_recovers_v_and_mu() {
        let truth = VsParams { v_t0: 0.32, dibl: 0.08, beta: 1.6, ..VsParams::mos2_n() };
        let fit = fit_iv(&synth(&truth), fixed_for(&truth)).unwrap();
        assert!(((fit.params.v - truth.v) / truth.v).abs() < 0.02, "{:?}", fit.params);
        assert!(((fit.params.mu - truth.mu) / truth.mu).abs() < 0.02, "{:?}", fit.params);
        assert!(fit.rms_rel_error < 1e-3);
    }

    #[test]
    fn noisy_round_trip_within_ten_percent() {
        let truth = VsParams::si_finfet(Polarity::N);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<IvPoint> = synth(&truth)
            .into_iter()
            .map(|p| IvPoint { i_d: p.i_d * (1.0 + rng.random_range(-0.03..0.03)), ..p })
            .collect();
        let fit = fit_iv(&pts, fixed_for(&truth)).unwrap();
        assert!(((fit.params.v - truth.v) / truth.v).abs() < 0.10, "{:?}", fit.params);
    }

    #[test]
    fn duplicated_point_is_degenerate() {
        let p = IvPoint { v_gs: 0.5, v_ds: 0.5, i_d: 100.0 };
        let pts = vec![p; 20];
        let fixed = fixed_for(&VsParams::mos2_n());
        assert!(matches!(fit_iv(&pts, fixed), Err(Error::Fit(_))));
        assert!(matches!(fit_iv(&pts[..3], fixed), Err(Error::Fit(_))));
    }
}
