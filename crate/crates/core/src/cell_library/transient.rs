// SPDX-License-Identifier: Apache-2.0

//! Fixed-step RK4 transient engine for chains of inverting CMOS stages.
//!
//! Each stage is a pull-up and a pull-down network, each reduced to one
//! equivalent VS device (width, series-stack depth, source/drain series
//! resistance). Node `i` is the output of stage `i`; node 0 is an ideal
//! saturated ramp. Gate-to-drain coupling of stage `i` ties node `i − 1` to
//! node `i`, which gives a tridiagonal capacitance matrix.

use crate::vsdevice::VsModel;

/// One conducting network reduced to an equivalent device in the
/// n-normalized frame.
#[derive(Debug, Clone, Copy)]
pub struct Network {
    pub model: VsModel,
    /// Total parallel width, µm.
    pub width: f64,
    /// Series stack depth (≥ 1).
    pub stack: f64,
    /// Series resistance at the rail side, Ω.
    pub r_source: f64,
    /// Series resistance at the output side, Ω.
    pub r_drain: f64,
}

impl Network {
    fn scale(&self) -> f64 {
        self.width / self.stack
    }

    /// Current in µA for (vgs, vds) applied across the network terminals,
    /// resolving the series resistances by Newton iteration. `guess` is the
    /// previous solution and is updated.
    pub fn current(&self, vgs: f64, vds: f64, guess: &mut f64) -> f64 {
        if vds < 0.0 {
            let mirrored = Network {
                r_source: self.r_drain,
                r_drain: self.r_source,
                ..*self
            };
            let mut g = -*guess;
            let i = mirrored.forward(vgs - vds, -vds, &mut g);
            *guess = -i;
            return -i;
        }
        self.forward(vgs, vds, guess)
    }

    fn forward(&self, vgs: f64, vds: f64, guess: &mut f64) -> f64 {
        let k = self.scale();
        let rs = self.r_source * 1e-6;
        let rt = (self.r_source + self.r_drain) * 1e-6;
        if rt == 0.0 {
            let i = k * self.model.forward_with_derivatives(vgs, vds).0;
            *guess = i;
            return i;
        }
        // g(I) = I − k·f(vgs − I·rs, vds − I·rt) is increasing in I with
        // g(0) ≤ 0, so the root is bracketed from below by zero.
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        let mut i = guess.max(0.0);
        for _ in 0..100 {
            let vg = vgs - i * rs;
            let vd = (vds - i * rt).max(0.0);
            let (f, gm, gds) = self.model.forward_with_derivatives(vg, vd);
            let g = i - k * f;
            if g > 0.0 {
                hi = i;
            } else {
                lo = i;
            }
            let dg = 1.0 + k * (gm * rs + gds * rt);
            let mut next = i - g / dg;
            if !(next > lo && next < hi) {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo + 1e-9 };
            }
            let done = (next - i).abs() <= 1e-9 * next.abs() + 1e-12;
            i = next;
            if done || (hi.is_finite() && hi - lo <= 1e-13 * hi) {
                break;
            }
        }
        *guess = i;
        i
    }

    /// Largest small-signal output conductance for gate drive `vgs`, µA/V.
    /// It occurs at zero drain bias, where it is limited by the series
    /// resistances.
    pub fn max_conductance(&self, vgs: f64) -> f64 {
        let g_dev = self.scale() * self.model.forward_with_derivatives(vgs, 0.0).2;
        let rt = (self.r_source + self.r_drain) * 1e-6;
        g_dev / (1.0 + g_dev * rt)
    }

    /// On-current at full gate and drain bias, µA.
    pub fn on_current(&self, v_dd: f64) -> f64 {
        let mut g = 0.0;
        self.current(v_dd, v_dd, &mut g)
    }
}

/// An inverting stage.
#[derive(Debug, Clone, Copy)]
pub struct Stage {
    pub up: Network,
    pub down: Network,
    /// Grounded capacitance at the stage output, fF.
    pub c_ground: f64,
    /// Coupling between the stage input and its output, fF.
    pub c_miller: f64,
}

/// Saturated input ramp: `v0` until `t0`, then linear to `v1` over `dur`.
#[derive(Debug, Clone, Copy)]
pub struct Ramp {
    pub v0: f64,
    pub v1: f64,
    pub t0: f64,
    pub dur: f64,
}

impl Ramp {
    /// Ramp whose 10–90 % transition time equals `slew` ps.
    pub fn from_slew(rising: bool, v_dd: f64, slew: f64, t0: f64) -> Self {
        let (v0, v1) = if rising { (0.0, v_dd) } else { (v_dd, 0.0) };
        Ramp { v0, v1, t0, dur: (slew / 0.8).max(1e-6) }
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = ((t - self.t0) / self.dur).clamp(0.0, 1.0);
        self.v0 + (self.v1 - self.v0) * x
    }

    pub fn slope(&self, t: f64) -> f64 {
        if t >= self.t0 && t < self.t0 + self.dur {
            (self.v1 - self.v0) / self.dur
        } else {
            0.0
        }
    }

    pub fn t50(&self) -> f64 {
        self.t0 + 0.5 * self.dur
    }
}

/// Crossing times (ps) of one node for its switching direction.
#[derive(Debug, Clone, Copy, Default)]
pub struct Crossings {
    pub t10: Option<f64>,
    pub t50: Option<f64>,
    pub t90: Option<f64>,
}

impl Crossings {
    /// 10–90 % transition time.
    pub fn slew(&self) -> Option<f64> {
        Some((self.t90? - self.t10?).abs())
    }
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub crossings: Vec<Crossings>,
    /// Supply energy of each stage over the whole window, fJ.
    pub supply_energy: Vec<f64>,
    pub steps: usize,
    pub t_end: f64,
    /// Base step used, ps.
    pub dt: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Upper bound on the step, ps.
    pub dt_max: f64,
    /// Give up after this much simulated time, ps.
    pub t_max: f64,
    /// Settling band as a fraction of v_dd.
    pub settle_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { dt_max: 0.5, t_max: 50_000.0, settle_tol: 1e-3 }
    }
}

/// Fraction of the explicit RK4 stability limit (2.78/λ) used as step bound.
const STABILITY: f64 = 2.0;

struct Chain<'a> {
    stages: &'a [Stage],
    ramp: Ramp,
    v_dd: f64,
    diag: Vec<f64>,
    guesses: Vec<(f64, f64)>,
    cprime: Vec<f64>,
    dprime: Vec<f64>,
}

impl Chain<'_> {
    /// dV/dt (V/ps) and supply power (fJ/ps) for every stage.
    fn deriv(&mut self, t: f64, v: &[f64], dv: &mut [f64], dp: &mut [f64], scratch: &mut [f64]) {
        let n = self.stages.len();
        let vin0 = self.ramp.value(t);
        // charge-balance right-hand side, µA = fF·V/ns → scaled to fF·V/ps below
        for i in 0..n {
            let s = &self.stages[i];
            let vin = if i == 0 { vin0 } else { v[i - 1] };
            let vout = v[i];
            let (gu, gd) = &mut self.guesses[i];
            let i_up = s.up.current(self.v_dd - vin, self.v_dd - vout, gu);
            let i_dn = s.down.current(vin, vout, gd);
            // µA / fF = 1e9 V/s = 1e-3 V/ps
            scratch[i] = (i_up - i_dn) * 1e-3;
            dp[i] = i_up * self.v_dd * 1e-3;
        }
        scratch[0] += self.stages[0].c_miller * self.ramp.slope(t);
        // Thomas algorithm: a_i = c_b_i = −C_m(i+1) coupling i and i+1
        let (cprime, dprime) = (&mut self.cprime, &mut self.dprime);
        for i in 0..n {
            let lower = if i > 0 { -self.stages[i].c_miller } else { 0.0 };
            let upper = if i + 1 < n { -self.stages[i + 1].c_miller } else { 0.0 };
            let denom = self.diag[i] - lower * if i > 0 { cprime[i - 1] } else { 0.0 };
            cprime[i] = upper / denom;
            dprime[i] = (scratch[i] - lower * if i > 0 { dprime[i - 1] } else { 0.0 }) / denom;
        }
        for i in (0..n).rev() {
            dv[i] = dprime[i] - if i + 1 < n { cprime[i] * dv[i + 1] } else { 0.0 };
        }
    }
}

fn record(cross: &mut Crossings, rising: bool, v_dd: f64, t0: f64, v0: f64, t1: f64, v1: f64) {
    let hit = |level: f64, slot: &mut Option<f64>| {
        if slot.is_some() {
            return;
        }
        let th = level * v_dd;
        let crossed = if rising { v0 < th && v1 >= th } else { v0 > th && v1 <= th };
        if crossed {
            *slot = Some(t0 + (t1 - t0) * (th - v0) / (v1 - v0));
        }
    };
    hit(0.1, &mut cross.t10);
    hit(0.5, &mut cross.t50);
    hit(0.9, &mut cross.t90);
}

/// Simulates the chain until every node has settled at its final rail.
///
/// Returns `None` when the chain fails to settle within `opts.t_max`.
pub fn simulate_chain(stages: &[Stage], ramp: Ramp, v_dd: f64, opts: SimOptions) -> Option<ChainResult> {
    let n = stages.len();
    if n == 0 {
        return None;
    }
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            stages[i].c_ground + stages[i].c_miller + stages.get(i + 1).map_or(0.0, |s| s.c_miller)
        })
        .collect();
    // stability bound for explicit RK4 from the largest small-signal rate
    let mut rate: f64 = 0.0;
    for (i, s) in stages.iter().enumerate() {
        // µA/V = 1e-3 fF/ps
        let g = (s.up.max_conductance(v_dd) + s.down.max_conductance(v_dd)) * 1e-3;
        rate = rate.max(g / (diag[i] - s.c_miller.min(diag[i] * 0.5)));
    }
    let dt = opts.dt_max.min(STABILITY / rate.max(1e-12));

    let rising_in = ramp.v1 > ramp.v0;
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let in_high = (i % 2 == 0) == !rising_in;
            if in_high { 0.0 } else { v_dd }
        })
        .collect();
    // settle the initial DC state: start exactly at the rails, which are the
    // fixed points of an inverter chain up to leakage
    let target: Vec<f64> = v.iter().map(|&x| v_dd - x).collect();
    let rising_node: Vec<bool> = v.iter().map(|&x| x == 0.0).collect();

    let mut chain = Chain {
        stages,
        ramp,
        v_dd,
        diag,
        guesses: vec![(0.0, 0.0); n],
        cprime: vec![0.0; n],
        dprime: vec![0.0; n],
    };
    let mut e = vec![0.0; n];
    let mut cross = vec![Crossings::default(); n];
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut p = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut t = 0.0;
    let mut steps = 0;
    let t_ramp_end = ramp.t0 + ramp.dur;
    loop {
        // land exactly on the ramp corners
        let mut h = dt;
        if t < ramp.t0 && t + h > ramp.t0 {
            h = ramp.t0 - t;
        } else if t < t_ramp_end && t + h > t_ramp_end {
            h = t_ramp_end - t;
        }
        let (k1, rest) = k.split_at_mut(1);
        let (k2, rest) = rest.split_at_mut(1);
        let (k3, k4) = rest.split_at_mut(1);
        let (p1, prest) = p.split_at_mut(1);
        let (p2, prest) = prest.split_at_mut(1);
        let (p3, p4) = prest.split_at_mut(1);
        chain.deriv(t, &v, &mut k1[0], &mut p1[0], &mut scratch);
        for i in 0..n {
            tmp[i] = v[i] + 0.5 * h * k1[0][i];
        }
        chain.deriv(t + 0.5 * h, &tmp, &mut k2[0], &mut p2[0], &mut scratch);
        for i in 0..n {
            tmp[i] = v[i] + 0.5 * h * k2[0][i];
        }
        chain.deriv(t + 0.5 * h, &tmp, &mut k3[0], &mut p3[0], &mut scratch);
        for i in 0..n {
            tmp[i] = v[i] + h * k3[0][i];
        }
        chain.deriv(t + h, &tmp, &mut k4[0], &mut p4[0], &mut scratch);
        let t_next = t + h;
        let mut settled = t_next > t_ramp_end;
        for i in 0..n {
            let vn = v[i] + h / 6.0 * (k1[0][i] + 2.0 * k2[0][i] + 2.0 * k3[0][i] + k4[0][i]);
            e[i] += h / 6.0 * (p1[0][i] + 2.0 * p2[0][i] + 2.0 * p3[0][i] + p4[0][i]);
            record(&mut cross[i], rising_node[i], v_dd, t, v[i], t_next, vn);
            v[i] = vn;
            if (vn - target[i]).abs() > opts.settle_tol * v_dd || cross[i].t90.is_none() && rising_node[i] || cross[i].t10.is_none() && !rising_node[i] {
                settled = false;
            }
        }
        t = t_next;
        steps += 1;
        if !v.iter().all(|x| x.is_finite()) {
            return None;
        }
        if settled {
            break;
        }
        if t > opts.t_max {
            return None;
        }
    }
    Some(ChainResult { crossings: cross, supply_energy: e, steps, t_end: t, dt })
}
