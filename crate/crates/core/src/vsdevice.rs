// SPDX-License-Identifier: Apache-2.0

//! Virtual-source compact FET model.
//!
//! Currents are expressed per unit gate width in µA/µm. Biases are given in
//! the device's own frame; p-type devices are evaluated with negated biases
//! so that every formula below works on n-type-normalized voltages. The
//! threshold `v_t0` is stored as a magnitude for both polarities.
//!
//! ```text
//! I_D / W = Q_ix0 · v · F_sat
//! Q_ix0   = C_inv · n·φt · ln(1 + exp((V_GS − V_T0 + δ·V_DS) / (n·φt)))
//! F_sat   = (V_DS/V_DSAT) / (1 + (V_DS/V_DSAT)^β)^(1/β),  V_DSAT = v·L_gate/μ
//! n       = SS / (φt · ln 10)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod fit;

pub use fit::{fit_iv, FitFixed, IvFit};

/// Boltzmann constant over elementary charge, V/K.
const K_OVER_Q: f64 = 1.380_649e-23 / 1.602_176_634e-19;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_8128e-12;
/// Relative permittivity of SiO2.
pub const K_SIO2: f64 = 3.9;

const BIAS_LIMIT: f64 = 2.0;

pub fn thermal_voltage(temperature: f64) -> f64 {
    K_OVER_Q * temperature
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    N,
    P,
}

impl Polarity {
    fn sign(self) -> f64 {
        match self {
            Polarity::N => 1.0,
            Polarity::P => -1.0,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::N => "n",
            Polarity::P => "p",
        })
    }
}

impl FromStr for Polarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Polarity::N),
            "p" => Ok(Polarity::P),
            other => Err(Error::domain(format!("unknown polarity `{other}`"))),
        }
    }
}

/// Compact-model parameters for one FET polarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VsParams {
    pub polarity: Polarity,
    /// Injection velocity, cm/s.
    pub v: f64,
    /// Apparent mobility, cm²/V·s.
    pub mu: f64,
    /// Gate length, nm.
    pub l_gate: f64,
    /// Inversion capacitance, µF/cm².
    pub c_inv: f64,
    /// Subthreshold swing, mV/dec.
    pub ss: f64,
    /// Threshold magnitude at zero drain bias, V.
    pub v_t0: f64,
    /// Drain-induced barrier lowering, V/V.
    pub dibl: f64,
    /// Saturation smoothing exponent.
    pub beta: f64,
    /// Lattice temperature, K.
    pub temperature: f64,
}

pub const DEFAULT_BETA: f64 = 1.8;
pub const DEFAULT_DIBL: f64 = 0.1;
pub const DEFAULT_VT0: f64 = 0.3;
pub const ROOM_TEMPERATURE: f64 = 300.0;

impl VsParams {
    fn table_row(polarity: Polarity, v: f64, mu: f64, l_gate: f64, c_inv: f64) -> Self {
        VsParams {
            polarity,
            v,
            mu,
            l_gate,
            c_inv,
            ss: 70.0,
            v_t0: DEFAULT_VT0,
            dibl: DEFAULT_DIBL,
            beta: DEFAULT_BETA,
            temperature: ROOM_TEMPERATURE,
        }
    }

    /// Theoretical monolayer n-MoS2 FET.
    pub fn mos2_n() -> Self {
        Self::table_row(Polarity::N, 1.17e7, 200.0, 10.0, 4.36)
    }

    /// Theoretical monolayer p-type black phosphorus FET.
    pub fn bp_p() -> Self {
        Self::table_row(Polarity::P, 1.7e7, 350.0, 10.0, 4.26)
    }

    /// Projected Si FinFET; the same parameters are used for both polarities.
    pub fn si_finfet(polarity: Polarity) -> Self {
        Self::table_row(polarity, 0.97e7, 253.0, 18.0, 3.14)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.v,
            self.mu,
            self.l_gate,
            self.c_inv,
            self.ss,
            self.v_t0,
            self.dibl,
            self.beta,
            self.temperature,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::domain("non-finite VS parameter"));
        }
        if self.v <= 0.0 || self.mu <= 0.0 || self.c_inv <= 0.0 || self.l_gate <= 0.0 {
            return Err(Error::domain("v, mu, c_inv and l_gate must be positive"));
        }
        if self.temperature <= 0.0 {
            return Err(Error::domain("temperature must be positive"));
        }
        let ss_min = 59.5 * self.temperature / 300.0;
        if self.ss < ss_min {
            return Err(Error::domain(format!(
                "ss = {} mV/dec below the thermal limit {ss_min:.2}",
                self.ss
            )));
        }
        if self.beta <= 0.0 {
            return Err(Error::domain("beta must be positive"));
        }
        if self.dibl < 0.0 {
            return Err(Error::domain("dibl must be non-negative"));
        }
        Ok(())
    }

    /// Body factor n = SS / (φt · ln 10).
    pub fn body_factor(&self) -> f64 {
        self.ss * 1e-3 / (thermal_voltage(self.temperature) * std::f64::consts::LN_10)
    }

    /// Saturation voltage v·L_gate/μ in V.
    pub fn v_dsat(&self) -> f64 {
        self.v * self.l_gate * 1e-7 / self.mu
    }

    /// Scales injection velocity and mobility together (ballistic projection).
    pub fn with_transport_scale(mut self, factor: f64) -> Self {
        self.v *= factor;
        self.mu *= factor;
        self
    }

    pub fn model(&self) -> Result<VsModel> {
        VsModel::new(*self)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "polarity={}\nv={:e}\nmu={}\nl_gate={}\nc_inv={}\nss={}\nv_t0={}\ndibl={}\nbeta={}\ntemperature={}\n",
            self.polarity,
            self.v,
            self.mu,
            self.l_gate,
            self.c_inv,
            self.ss,
            self.v_t0,
            self.dibl,
            self.beta,
            self.temperature
        )
    }

    /// Parses the `key=value` device file. Every field is required and unknown
    /// keys are rejected.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Parse {
                line: idx + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            if map.insert(k.trim().to_string(), (idx + 1, v.trim().to_string())).is_some() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("duplicate key `{}`", k.trim()),
                });
            }
        }
        const KEYS: [&str; 10] = [
            "polarity",
            "v",
            "mu",
            "l_gate",
            "c_inv",
            "ss",
            "v_t0",
            "dibl",
            "beta",
            "temperature",
        ];
        if let Some((k, (line, _))) = map.iter().find(|(k, _)| !KEYS.contains(&k.as_str())) {
            return Err(Error::Parse {
                line: *line,
                msg: format!("unknown key `{k}`"),
            });
        }
        let num = |key: &str| -> Result<f64> {
            let (line, s) = map.get(key).ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing key `{key}`"),
            })?;
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: *line,
                msg: format!("`{key}` is not a number: `{s}`"),
            })
        };
        let polarity = map
            .get("polarity")
            .ok_or_else(|| Error::Parse {
                line: 0,
                msg: "missing key `polarity`".into(),
            })?
            .1
            .parse()?;
        let p = VsParams {
            polarity,
            v: num("v")?,
            mu: num("mu")?,
            l_gate: num("l_gate")?,
            c_inv: num("c_inv")?,
            ss: num("ss")?,
            v_t0: num("v_t0")?,
            dibl: num("dibl")?,
            beta: num("beta")?,
            temperature: num("temperature")?,
        };
        p.validate()?;
        Ok(p)
    }
}

/// A validated parameter set with the per-evaluation constants hoisted.
#[derive(Debug, Clone, Copy)]
pub struct VsModel {
    params: VsParams,
    n_phit: f64,
    v_dsat: f64,
    /// C_inv·v in A/cm per volt of charge potential, times 100 for µA/µm.
    drive: f64,
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl VsModel {
    pub fn new(params: VsParams) -> Result<Self> {
        params.validate()?;
        let phit = thermal_voltage(params.temperature);
        Ok(VsModel {
            params,
            n_phit: params.body_factor() * phit,
            v_dsat: params.v_dsat(),
            // µF/cm² → F/cm², A/cm → µA/µm (×100)
            drive: params.c_inv * 1e-6 * params.v * 100.0,
        })
    }

    pub fn params(&self) -> &VsParams {
        &self.params
    }

    /// Current and its gate derivative in the n-normalized frame with v_ds ≥ 0.
    #[inline]
    fn forward(&self, vgs: f64, vds: f64) -> (f64, f64) {
        let p = &self.params;
        let z = (vgs - p.v_t0 + p.dibl * vds) / self.n_phit;
        let q = self.n_phit * softplus(z);
        let dq = sigmoid(z);
        let x = vds / self.v_dsat;
        let fsat = if x <= 0.0 {
            0.0
        } else {
            x / (1.0 + x.powf(p.beta)).powf(1.0 / p.beta)
        };
        (self.drive * q * fsat, self.drive * dq * fsat)
    }

    /// Current, gm and gds (per µm) for v_ds ≥ 0 in the normalized frame.
    #[inline]
    pub fn forward_with_derivatives(&self, vgs: f64, vds: f64) -> (f64, f64, f64) {
        let p = &self.params;
        let z = (vgs - p.v_t0 + p.dibl * vds) / self.n_phit;
        let q = self.n_phit * softplus(z);
        let sg = sigmoid(z);
        let x = vds / self.v_dsat;
        if x <= 0.0 {
            // F_sat'(0) = 1
            return (0.0, 0.0, self.drive * q / self.v_dsat);
        }
        let xb = x.powf(p.beta);
        let base = (1.0 + xb).powf(-1.0 / p.beta);
        let fsat = x * base;
        let dfsat = base / (1.0 + xb);
        (
            self.drive * q * fsat,
            self.drive * sg * fsat,
            self.drive * (sg * p.dibl * fsat + q * dfsat / self.v_dsat),
        )
    }

    /// Drain current (µA/µm) in the n-normalized frame, signed: negative when
    /// v_ds < 0 (source and drain swap roles).
    #[inline]
    pub fn current_normalized(&self, vgs: f64, vds: f64) -> f64 {
        if vds >= 0.0 {
            self.forward(vgs, vds).0
        } else {
            -self.forward(vgs - vds, -vds).0
        }
    }

    /// Gate transconductance per width, µA/µm/V, normalized frame.
    #[inline]
    pub fn gm_normalized(&self, vgs: f64, vds: f64) -> f64 {
        if vds >= 0.0 {
            self.forward(vgs, vds).1
        } else {
            -self.forward(vgs - vds, -vds).1
        }
    }

    /// Drain current (µA/µm) with biases in the device frame. For p-type
    /// devices the returned value is the magnitude flowing source→drain in
    /// forward operation.
    #[inline]
    pub fn current(&self, vgs: f64, vds: f64) -> f64 {
        let s = self.params.polarity.sign();
        self.current_normalized(s * vgs, s * vds)
    }
}

/// Drain current per width in µA/µm. Biases are in the device frame and must
/// lie within ±2 V.
pub fn drain_current(p: &VsParams, v_gs: f64, v_ds: f64) -> Result<f64> {
    if !(v_gs.abs() <= BIAS_LIMIT && v_ds.abs() <= BIAS_LIMIT) {
        return Err(Error::domain(format!(
            "bias ({v_gs}, {v_ds}) V outside ±{BIAS_LIMIT} V"
        )));
    }
    Ok(p.model()?.current(v_gs, v_ds))
}

const TUNE_MAX_ITER: usize = 200;

/// Adjusts `v_t0` so that the off current at V_GS = 0, |V_DS| = v_dd equals
/// `i_off_target` (nA/µm). All other fields are left unchanged.
pub fn tune_vt(p: &VsParams, i_off_target: f64, v_dd: f64) -> Result<VsParams> {
    if !(i_off_target > 0.0 && i_off_target.is_finite()) {
        return Err(Error::domain("i_off_target must be positive"));
    }
    if !(v_dd > 0.0 && v_dd <= BIAS_LIMIT) {
        return Err(Error::domain("v_dd must lie in (0, 2] V"));
    }
    p.validate()?;
    let target = i_off_target * 1e-3; // µA/µm
    let log_err = |vt: f64| -> (f64, f64) {
        let m = VsModel::new(VsParams { v_t0: vt, ..*p }).expect("validated");
        let i = m.current_normalized(0.0, v_dd);
        let g = m.gm_normalized(0.0, v_dd);
        // d ln I / d v_t0 = −gm/I
        ((i / target).ln(), -g / i)
    };

    let mut lo = -BIAS_LIMIT;
    let mut hi = BIAS_LIMIT;
    let mut vt = p.v_t0.clamp(lo, hi);
    for _ in 0..TUNE_MAX_ITER {
        let (f, df) = log_err(vt);
        if !f.is_finite() {
            return Err(Error::Convergence("non-finite off current".into()));
        }
        if f.abs() < 1e-12 {
            return Ok(VsParams { v_t0: vt, ..*p });
        }
        // ln I decreases with v_t0
        if f > 0.0 {
            lo = vt;
        } else {
            hi = vt;
        }
        let newton = vt - f / df;
        let next = if df < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - vt).abs() < 1e-15 {
            return Ok(VsParams { v_t0: next, ..*p });
        }
        vt = next;
    }
    Err(Error::Convergence(format!(
        "threshold tuning did not reach {i_off_target} nA/µm in {TUNE_MAX_ITER} iterations"
    )))
}

/// Series combination of oxide and quantum capacitance, µF/cm².
pub fn c_inv_series(eot_nm: f64, c_q: f64) -> Result<f64> {
    if !(eot_nm > 0.0 && c_q > 0.0) {
        return Err(Error::domain("eot and c_q must be positive"));
    }
    let c_ox = oxide_capacitance(eot_nm);
    Ok(c_ox * c_q / (c_ox + c_q))
}

/// ε_SiO2/EOT in µF/cm².
pub fn oxide_capacitance(eot_nm: f64) -> f64 {
    // F/m² → µF/cm² is ×100
    K_SIO2 * EPS0 / (eot_nm * 1e-9) * 100.0
}

/// Intrinsic gate capacitance C_inv·L_gate per µm of width, fF/µm.
pub fn gate_cap_per_width(p: &VsParams) -> Result<f64> {
    p.validate()?;
    // µF/cm² = 10 fF/µm², nm = 1e-3 µm
    Ok(p.c_inv * 10.0 * p.l_gate * 1e-3)
}

/// One measured or simulated I-V sample in the n-normalized frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    pub v_gs: f64,
    pub v_ds: f64,
    /// µA/µm
    pub i_d: f64,
}

/// Reads `v_gs,v_ds,i_d_uA_per_um` CSV text.
pub fn read_iv_csv(text: &str) -> Result<Vec<IvPoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let expected = ["v_gs", "v_ds", "i_d_uA_per_um"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected columns {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let val = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("column {} is not a number", expected[i]),
                })
        };
        out.push(IvPoint {
            v_gs: val(0)?,
            v_ds: val(1)?,
            i_d: val(2)?,
        });
    }
    Ok(out)
}

/// Solves the small normal-equation systems of the fitter.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    a.cholesky().map(|c| c.solve(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zero_drain_bias_gives_zero_current() {
        for p in [VsParams::mos2_n(), VsParams::bp_p(), VsParams::si_finfet(Polarity::N)] {
            assert_eq!(drain_current(&p, 0.6, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn mos2_on_current_matches_scalar_oracle() {
        // Independent scalar evaluation of the VS equations with v_t0 = 0.3,
        // δ = 0.1, β = 1.8 at 300 K.
        let i = drain_current(&VsParams::mos2_n(), 0.7, 0.7).unwrap();
        assert!(rel(i, 2382.416333654435) < 1e-9, "{i}");
    }

    #[test]
    fn decade_per_swing_below_threshold() {
        let p = VsParams::mos2_n();
        let vds = 0.6;
        let vt_eff = p.v_t0 - p.dibl * vds;
        let a = drain_current(&p, vt_eff - 0.14, vds).unwrap();
        let b = drain_current(&p, vt_eff - 0.07, vds).unwrap();
        assert!(rel(a / b, 0.1) < 0.05, "{}", a / b);

        let p0 = VsParams { dibl: 0.0, ..p };
        let a = drain_current(&p0, p0.v_t0 - 0.14, vds).unwrap();
        let b = drain_current(&p0, p0.v_t0 - 0.07, vds).unwrap();
        assert!(rel(a / b, 0.1) < 0.05);
    }

    #[test]
    fn p_type_uses_negated_biases() {
        let p = VsParams::bp_p();
        let m = p.model().unwrap();
        let n_equiv = VsParams { polarity: Polarity::N, ..p }.model().unwrap();
        assert_eq!(m.current(-0.6, -0.6), n_equiv.current(0.6, 0.6));
        assert!(m.current(-0.6, -0.6) > 0.0);
    }

    #[test]
    fn reverse_drain_bias_is_antisymmetric_by_swap() {
        let m = VsParams::mos2_n().model().unwrap();
        let fwd = m.current_normalized(0.5, 0.2);
        let rev = m.current_normalized(0.3, -0.2);
        assert_eq!(rev, -fwd);
    }

    #[test]
    fn bias_domain_enforced() {
        assert!(drain_current(&VsParams::mos2_n(), 2.5, 0.1).is_err());
        let bad = VsParams { ss: 50.0, ..VsParams::mos2_n() };
        assert!(matches!(drain_current(&bad, 0.5, 0.5), Err(Error::ParameterDomain(_))));
        let bad = VsParams { mu: 0.0, ..VsParams::mos2_n() };
        assert!(drain_current(&bad, 0.5, 0.5).is_err());
    }

    #[test]
    fn analytic_gm_matches_central_difference() {
        let m = VsParams::mos2_n().model().unwrap();
        let h = 1e-6;
        for &vds in &[0.05, 0.3, 0.7] {
            for k in 0..=20 {
                let vgs = -0.2 + 0.05 * k as f64;
                let fd = (m.current_normalized(vgs + h, vds) - m.current_normalized(vgs - h, vds))
                    / (2.0 * h);
                let g = m.gm_normalized(vgs, vds);
                assert!(rel(g, fd) < 1e-4, "vgs={vgs} vds={vds} {g} {fd}");
            }
        }
    }

    #[test]
    fn analytic_gds_matches_central_difference() {
        let m = VsParams::bp_p().model().unwrap();
        let h = 1e-7;
        for &vgs in &[0.1, 0.4, 0.7] {
            for k in 1..=14 {
                let vds = 0.05 * k as f64;
                let fd = (m.current_normalized(vgs, vds + h) - m.current_normalized(vgs, vds - h))
                    / (2.0 * h);
                let (_, gm, gds) = m.forward_with_derivatives(vgs, vds);
                assert!(rel(gds, fd) < 1e-5, "vgs={vgs} vds={vds} {gds} {fd}");
                assert!(rel(gm, m.gm_normalized(vgs, vds)) < 1e-12);
            }
        }
    }

    #[test]
    fn tune_vt_hits_target_and_is_idempotent() {
        let p = VsParams::mos2_n();
        let t = tune_vt(&p, 1.0, 0.6).unwrap();
        let i_off = t.model().unwrap().current(0.0, 0.6) * 1e3;
        assert!(rel(i_off, 1.0) < 1e-6, "{i_off}");
        let t2 = tune_vt(&t, 1.0, 0.6).unwrap();
        assert!((t2.v_t0 - t.v_t0).abs() < 1e-9);
        assert_eq!(VsParams { v_t0: 0.0, ..t }, VsParams { v_t0: 0.0, ..p });
    }

    #[test]
    fn tune_vt_halving_target_shifts_by_swing_log2() {
        let p = VsParams::bp_p();
        let a = tune_vt(&p, 1.0, 0.7).unwrap();
        let b = tune_vt(&p, 0.5, 0.7).unwrap();
        let shift = b.v_t0 - a.v_t0;
        let expect = 0.070 * 2f64.log10();
        assert!((shift - expect).abs() < 0.3e-3, "{shift} vs {expect}");
    }

    #[test]
    fn tune_vt_rejects_bad_target() {
        assert!(tune_vt(&VsParams::mos2_n(), 0.0, 0.6).is_err());
    }

    #[test]
    fn series_inversion_capacitance() {
        let c_ox = c_inv_series(0.7, 1e9).unwrap();
        assert!(rel(c_ox, 4.933_047_495_702_858_5) < 1e-6);
        let c = c_inv_series(0.7, 37.5).unwrap();
        assert!((c - 4.36).abs() < 0.005, "{c}");
        let cox = oxide_capacitance(0.7);
        assert!(rel(c_inv_series(0.7, cox).unwrap(), cox / 2.0) < 1e-14);
        assert!(c_inv_series(0.0, 1.0).is_err());
    }

    #[test]
    fn gate_capacitance_per_width() {
        let c = gate_cap_per_width(&VsParams::mos2_n()).unwrap();
        assert!(rel(c, 0.436) < 1e-12);
        let p2 = VsParams { l_gate: 20.0, ..VsParams::mos2_n() };
        assert!(rel(gate_cap_per_width(&p2).unwrap(), 2.0 * c) < 1e-12);
        let si = gate_cap_per_width(&VsParams::si_finfet(Polarity::N)).unwrap();
        assert!((si - 0.565).abs() < 1e-3);
    }

    #[test]
    fn kv_round_trip_and_rejects_unknown() {
        let p = tune_vt(&VsParams::bp_p(), 1.0, 0.6).unwrap();
        let back = VsParams::from_kv(&p.to_kv()).unwrap();
        assert_eq!(p, back);
        let mut text = p.to_kv();
        text.push_str("gamma=1\n");
        assert!(matches!(VsParams::from_kv(&text), Err(Error::Parse { line: 11, .. })));
        let missing: String = p.to_kv().lines().filter(|l| !l.starts_with("mu=")).map(|l| format!("{l}\n")).collect();
        assert!(VsParams::from_kv(&missing).is_err());
    }

    #[test]
    fn iv_csv_parses_and_names_bad_line() {
        let text = "v_gs,v_ds,i_d_uA_per_um\n0.1,0.2,3.0\n0.2,0.2,4.5\n";
        let pts = read_iv_csv(text).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].i_d, 4.5);
        let bad = "v_gs,v_ds,i_d_uA_per_um\n0.1,0.2,3.0\n0.2,x,4.5\n";
        assert!(matches!(read_iv_csv(bad), Err(Error::Parse { line: 3, .. })));
        assert!(read_iv_csv("a,b,c\n1,2,3\n").is_err());
    }
}
