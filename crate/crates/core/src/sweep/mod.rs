// SPDX-License-Identifier: Apache-2.0

//! Energy-frequency sweeps over supply and target frequency, Pareto
//! frontiers, device-structure and wire-resistance studies.

pub mod dataset;

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell_library::{build_library, fo3_features, CellLibrary, DeviceDims, FO3_LEN};
use crate::design_flow::netlist::{generate_netlist, Netlist};
use crate::design_flow::optimize::optimize;
use crate::design_flow::place::{self, Floorplan};
use crate::design_flow::sta::analyze;
use crate::design_flow::{
    cell_widths, evaluate, initial_floorplan, routed_design, target_t_cp, Design, DesignResult, FlowConfig,
};
use crate::error::{Error, Result};
use crate::interconnect::{wire_rc_per_um, TechStack};
use crate::vsdevice::{tune_vt, VsParams};

/// Device, geometry and interconnect description of one technology.
#[derive(Debug, Clone, PartialEq)]
pub struct Technology {
    pub dims: DeviceDims,
    pub stack: TechStack,
    pub vs_n: VsParams,
    pub vs_p: VsParams,
}

impl Technology {
    pub fn mos2_bp() -> Self {
        Technology {
            dims: DeviceDims::mos2_bp_default(),
            stack: TechStack::default_5nm(),
            vs_n: VsParams::mos2_n(),
            vs_p: VsParams::bp_p(),
        }
    }

    pub fn si_finfet() -> Self {
        use crate::vsdevice::Polarity;
        Technology {
            dims: DeviceDims::finfet_default(),
            stack: TechStack::default_5nm(),
            vs_n: VsParams::si_finfet(Polarity::N),
            vs_p: VsParams::si_finfet(Polarity::P),
        }
    }

    /// Threshold-tuned library at `v_dd`.
    pub fn library(&self, v_dd: f64, i_off: f64) -> Result<CellLibrary> {
        let n = tune_vt(&self.vs_n, i_off, v_dd)?;
        let p = tune_vt(&self.vs_p, i_off, v_dd)?;
        build_library(&self.dims, &self.stack, &n, &p, v_dd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub v_dd: Vec<f64>,
    pub f_coarse: Vec<f64>,
    /// Fine-loop step and half width around the best coarse f_ach, GHz.
    pub fine_step: f64,
    pub fine_half_width: f64,
    /// Die resize and fine loop after the coarse loop.
    pub refine: bool,
    /// Off-current target for threshold tuning, nA/µm.
    pub i_off: f64,
    pub l_spa: Vec<f64>,
    pub x_rw: Vec<f64>,
    pub seed: u64,
    pub flow: FlowConfig,
}

/// `start, start + step, …, stop` with the endpoints included.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(Error::Config(format!("bad grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            v_dd: grid(0.5, 0.9, 0.1).expect("static grid"),
            f_coarse: grid(1.0, 3.0, 0.2).expect("static grid"),
            fine_step: 0.02,
            fine_half_width: 0.1,
            refine: true,
            i_off: 1.0,
            l_spa: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            x_rw: vec![0.5, 1.0, 2.0, 4.0],
            seed: 42,
            flow: FlowConfig::default(),
        }
    }
}

fn check_grid(name: &str, g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if g.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Config(format!("{name} grid must be positive")));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid("v_dd", &self.v_dd)?;
        check_grid("f_coarse", &self.f_coarse)?;
        check_grid("l_spa", &self.l_spa)?;
        check_grid("x_rw", &self.x_rw)?;
        if !(self.fine_step > 0.0 && self.fine_half_width >= 0.0 && self.i_off > 0.0) {
            return Err(Error::Config("fine_step and i_off must be positive".into()));
        }
        if !(self.flow.utilization > 0.0 && self.flow.utilization <= 1.0) {
            return Err(Error::Config("utilization must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Fine-loop targets around `center`, on the lattice of `fine_step`
    /// multiples nearest to it.
    pub fn fine_grid(&self, center: f64) -> Vec<f64> {
        let k = (self.fine_half_width / self.fine_step + 1e-9).floor() as i64;
        let c = (center / self.fine_step).round();
        (-k..=k)
            .map(|i| (((c + i as f64) * self.fine_step) * 1e9).round() / 1e9)
            .filter(|f| *f > 0.0)
            .collect()
    }

    /// Parses `key=value` lines; lists are `a,b,c` or `start:stop:step`.
    pub fn parse_kv(text: &str) -> Result<Self> {
        let mut c = SweepConfig::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: ln + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err(format!("`{s}` is not a number")));
            let list = |s: &str| -> Result<Vec<f64>> {
                let parts: Vec<&str> = s.split(':').collect();
                if parts.len() == 3 {
                    grid(num(parts[0])?, num(parts[1])?, num(parts[2])?).map_err(|e| err(e.to_string()))
                } else {
                    s.split(',').map(num).collect()
                }
            };
            let int = |s: &str| s.parse::<u64>().map_err(|_| err(format!("`{s}` is not an integer")));
            match k {
                "vdd" => c.v_dd = list(v)?,
                "f_coarse" => c.f_coarse = list(v)?,
                "fine_step" => c.fine_step = num(v)?,
                "fine_half_width" => c.fine_half_width = num(v)?,
                "i_off" => c.i_off = num(v)?,
                "refine" => {
                    c.refine = v.parse().map_err(|_| err(format!("`{v}` is not true or false")))?;
                }
                "l_spa" => c.l_spa = list(v)?,
                "x_rw" => c.x_rw = list(v)?,
                "seed" => c.seed = int(v)?,
                "utilization" => c.flow.utilization = num(v)?,
                "aspect" => c.flow.aspect = num(v)?,
                "activity" => c.flow.activity = num(v)?,
                "n_gates" => c.flow.synth.n_gates = int(v)? as usize,
                "depth" => c.flow.synth.depth = int(v)? as usize,
                "fanout_mean" => c.flow.synth.fanout_mean = num(v)?,
                "rent_exponent" => c.flow.synth.rent_exponent = num(v)?,
                "register_ratio" => c.flow.synth.register_ratio = num(v)?,
                "moves_per_cell" => c.flow.place.moves_per_cell = int(v)? as usize,
                "uncertainty" => c.flow.sta.uncertainty = num(v)?,
                "top_k" => c.flow.top_k = int(v)? as usize,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        c.flow.synth.seed = c.seed;
        c.flow.place.seed = c.seed;
        c.validate()?;
        Ok(c)
    }

    pub fn netlist(&self) -> Result<Netlist> {
        generate_netlist(&self.flow.synth)
    }
}

/// One implementation on the energy-frequency plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EFPoint {
    pub f_ach: f64,
    /// pJ per cycle.
    pub energy: f64,
    /// Cell area, µm².
    pub area: f64,
    pub v_dd: f64,
    pub provenance: String,
}

impl EFPoint {
    pub fn from_result(r: &DesignResult) -> Self {
        EFPoint { f_ach: r.f_ach, energy: r.energy, area: r.cell_area, v_dd: r.v_dd, provenance: r.config_hash.clone() }
    }
}

fn better_tie(a: &EFPoint, b: &EFPoint) -> std::cmp::Ordering {
    b.f_ach
        .total_cmp(&a.f_ach)
        .then(a.energy.total_cmp(&b.energy))
        .then(a.area.total_cmp(&b.area))
        .then(a.v_dd.total_cmp(&b.v_dd))
}

/// Non-dominated points under (maximize f_ach, minimize energy), sorted by
/// f_ach. Identical (f, E) pairs keep the lower area, then lower V_DD.
pub fn pareto_frontier(points: &[EFPoint]) -> Vec<EFPoint> {
    let mut sorted: Vec<&EFPoint> = points.iter().collect();
    sorted.sort_by(|a, b| better_tie(a, b));
    let mut best_e = f64::INFINITY;
    let mut out = Vec::new();
    for p in sorted {
        if p.energy < best_e {
            best_e = p.energy;
            out.push(p.clone());
        }
    }
    out.reverse();
    out
}

pub fn sha_hex(text: &str) -> String {
    crate::design_flow::netlist::hex(&Sha256::digest(text.as_bytes()))
}

/// Hash of everything that determines a sweep's results apart from the
/// per-point supply and frequency.
pub fn context_hash(cfg: &SweepConfig, tech: &Technology, route_stack: &TechStack, nl: &Netlist) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:?}|{:?}|{:?}|{:?}|{:?}", tech.dims, tech.stack, tech.vs_n, tech.vs_p, route_stack);
    let _ = write!(s, "|{:?}|{}|{}|{}|{}", cfg.flow, cfg.fine_step, cfg.fine_half_width, cfg.refine, cfg.i_off);
    let _ = write!(s, "|{}", nl.hash());
    sha_hex(&s)
}

fn point_hash(ctx: &str, phase: &str, v_dd: f64, f_tar: f64) -> String {
    sha_hex(&format!("{ctx}|{phase}|{v_dd:?}|{f_tar:?}"))
}

/// Runs one optimization to the hardest target, then reports every target
/// from the matching prefix of the move sequence.
fn run_grid(base: &Design, lib: &CellLibrary, flow: &FlowConfig, fs: &[f64], ctx: &str, phase: &str) -> Result<Vec<(Design, DesignResult)>> {
    let wrap = |f: f64, e: Error| Error::Flow { v_dd: lib.v_dd, f_tar: f, source: Box::new(e) };
    let hardest = fs.iter().copied().fold(0.0, f64::max);
    let mut scratch = base.clone();
    let (_, trace) = optimize(&mut scratch, lib, &flow.sta, &flow.opt, target_t_cp(hardest, &flow.sta)).map_err(|e| wrap(hardest, e))?;
    fs.iter()
        .map(|&f| {
            let mut d = base.clone();
            trace.replay(&mut d, target_t_cp(f, &flow.sta));
            let t = analyze(&d, lib, &flow.sta).map_err(|e| wrap(f, e))?;
            let r = evaluate(&d, lib, flow, &t, f, &point_hash(ctx, phase, lib.v_dd, f)).map_err(|e| wrap(f, e))?;
            Ok((d, r))
        })
        .collect()
}

/// Placed and routed unit-drive design at the target utilization.
pub fn base_design(nl: &Arc<Netlist>, lib: &CellLibrary, route_stack: &TechStack, flow: &FlowConfig) -> Result<Design> {
    let fp = initial_floorplan(nl, lib, flow.utilization, flow.aspect)?;
    let widths = cell_widths(nl, lib)?;
    let p = place::place(nl, fp, &widths, flow.place)?;
    routed_design(nl.clone(), lib, route_stack, p)
}

/// Coarse loop, die resize to the target utilization at the fastest
/// coarse design, then the fine loop on the resized die.
pub fn vdd_sweep(cfg: &SweepConfig, lib: &CellLibrary, route_stack: &TechStack, base: &Design, ctx: &str) -> Result<Vec<DesignResult>> {
    Ok(vdd_sweep_designs(cfg, lib, route_stack, base, ctx)?.into_iter().map(|(_, r)| r).collect())
}

/// As [`vdd_sweep`], keeping the implementation behind every result.
pub fn vdd_sweep_designs(
    cfg: &SweepConfig,
    lib: &CellLibrary,
    route_stack: &TechStack,
    base: &Design,
    ctx: &str,
) -> Result<Vec<(Design, DesignResult)>> {
    let flow = &cfg.flow;
    let mut out = run_grid(base, lib, flow, &cfg.f_coarse, ctx, "coarse")?;
    if !cfg.refine {
        return Ok(out);
    }
    let best = out
        .iter()
        .map(|(_, r)| r)
        .fold(None::<&DesignResult>, |b, r| match b {
            Some(b) if b.f_ach >= r.f_ach => Some(b),
            _ => Some(r),
        })
        .expect("coarse grid is non-empty");
    let fp = Floorplan::for_cell_area(best.cell_area, flow.utilization, flow.aspect, base.placement.floorplan.row_height)?;
    let fine = cfg.fine_grid(best.f_ach);
    let resized = routed_design(base.netlist.clone(), lib, route_stack, base.placement.rescaled(fp))?;
    out.extend(run_grid(&resized, lib, flow, &fine, ctx, "fine")?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub results: Vec<DesignResult>,
    pub points: Vec<EFPoint>,
    /// FO3 features of the library at each supply, in grid order.
    pub fo3: Vec<(f64, [f64; FO3_LEN])>,
}

impl SweepOutput {
    /// Per-supply frontier rows in the dataset schema.
    pub fn features(&self, stack: &TechStack) -> Result<Vec<dataset::FeatureRow>> {
        let mut rows = Vec::new();
        for (v, fo3) in &self.fo3 {
            let rs: Vec<DesignResult> = self.results.iter().filter(|r| r.v_dd == *v).cloned().collect();
            rows.extend(dataset::emit_dataset(&[dataset::DatasetSource { fo3, stack, results: &rs }])?);
        }
        Ok(rows)
    }
}

/// Full sweep over the supply grid, libraries built per supply.
pub fn ef_sweep(cfg: &SweepConfig, tech: &Technology, nl: &Netlist) -> Result<SweepOutput> {
    cfg.validate()?;
    let nl = Arc::new(nl.clone());
    let ctx = context_hash(cfg, tech, &tech.stack, &nl);
    let per_vdd: Vec<(Vec<DesignResult>, [f64; FO3_LEN])> = cfg
        .v_dd
        .par_iter()
        .map(|&v| {
            let lib = tech.library(v, cfg.i_off)?;
            let fo3 = fo3_features(&lib)?;
            let base = base_design(&nl, &lib, &tech.stack, &cfg.flow)?;
            Ok((vdd_sweep(cfg, &lib, &tech.stack, &base, &ctx)?, fo3))
        })
        .collect::<Result<_>>()?;
    let fo3 = cfg.v_dd.iter().zip(&per_vdd).map(|(v, (_, f))| (*v, *f)).collect();
    let results: Vec<DesignResult> = per_vdd.into_iter().flat_map(|(r, _)| r).collect();
    let points = results.iter().map(EFPoint::from_result).collect();
    Ok(SweepOutput { results, points, fo3 })
}

/// Minimum energy-delay product over a set of results, pJ·ns, with the
/// index of the minimizing result.
pub fn min_edp(results: &[DesignResult]) -> Option<(f64, usize)> {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| (r.energy / r.f_ach, i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdpRow {
    pub l_spa: f64,
    pub l_con: f64,
    pub min_edp: f64,
    pub f_ach: f64,
    pub energy: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceOpt {
    pub rows: Vec<EdpRow>,
    pub argmin_l_spa: f64,
}

/// Minimum EDP per spacer length at fixed CGP and gate length; routing uses
/// `route_stack` while MEOL extraction uses the technology stack.
pub fn device_opt(cfg: &SweepConfig, tech: &Technology, nl: &Netlist, v_dd: f64, route_stack: &TechStack) -> Result<DeviceOpt> {
    cfg.validate()?;
    let nl = Arc::new(nl.clone());
    let rows: Vec<EdpRow> = cfg
        .l_spa
        .par_iter()
        .map(|&l| {
            let t = Technology { dims: tech.dims.with_l_spa(l), ..tech.clone() };
            let lib = t.library(v_dd, cfg.i_off)?;
            let ctx = context_hash(cfg, &t, route_stack, &nl);
            let base = base_design(&nl, &lib, route_stack, &cfg.flow)?;
            let rs = vdd_sweep(cfg, &lib, route_stack, &base, &ctx)?;
            let (edp, i) = min_edp(&rs).expect("sweep yields results");
            Ok(EdpRow { l_spa: l, l_con: t.dims.l_con, min_edp: edp, f_ach: rs[i].f_ach, energy: rs[i].energy, area: rs[i].cell_area })
        })
        .collect::<Result<_>>()?;
    let best = rows
        .iter()
        .min_by(|a, b| a.min_edp.total_cmp(&b.min_edp))
        .expect("non-empty grid");
    Ok(DeviceOpt { argmin_l_spa: best.l_spa, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XrwRow {
    pub x_rw: f64,
    /// Minimum EDP over the shared implementation pool, pJ·ns.
    pub min_edp: f64,
    pub f_ach: f64,
    /// Cell area of the minimum-EDP design, µm².
    pub area: f64,
    pub buffer_count: u32,
    /// Minimum EDP of this multiplier's own sweep alone.
    pub own_min_edp: f64,
    /// Ring-oscillator reference EDP, fJ·ps per stage.
    pub ro_edp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XrwTable {
    pub rows: Vec<XrwRow>,
    /// Wire load of the ring-oscillator reference, µm.
    pub ro_wire_len: f64,
}

/// Fanout-of-3 inverter ring stage with a fixed M2 wire of `len` µm:
/// energy per transition times stage delay. Linear in the wire resistance.
pub fn ro_edp(lib: &CellLibrary, stack: &TechStack, len: f64) -> Result<f64> {
    let inv = lib
        .by_name("INV_X1")
        .ok_or_else(|| Error::Config("library lacks INV_X1".into()))?;
    let (r_w, c_w) = wire_rc_per_um(stack.layer("M2")?, stack)?;
    let pins = 3.0 * inv.table.pin_cap;
    let c_wire = c_w * len;
    let slew = inv.table.slews[1];
    let gate = inv.table.worst(0, slew, pins + c_wire).delay;
    let wire = r_w * len * (0.5 * c_wire + pins) * 1e-3;
    let energy = (pins + c_wire + inv.table.c_out) * lib.v_dd * lib.v_dd;
    Ok(energy * (gate + wire))
}

/// Re-times an implementation on another routing stack.
fn reevaluate(d: &Design, lib: &CellLibrary, stack: &TechStack, flow: &FlowConfig, r: &DesignResult, hash: &str) -> Result<DesignResult> {
    let mut e = routed_design(d.netlist.clone(), lib, stack, (*d.placement).clone())?;
    e.cells.clone_from(&d.cells);
    e.repeaters.clone_from(&d.repeaters);
    let t = analyze(&e, lib, &flow.sta)?;
    evaluate(&e, lib, flow, &t, r.f_tar, hash)
}

/// Minimum EDP and its area per wire-resistance multiplier at one supply.
/// MEOL does not depend on the routing multiplier, so one library serves
/// every point. Every implementation found at any multiplier is also timed
/// at every other one, and each row minimizes over that shared pool.
pub fn xrw_sweep(cfg: &SweepConfig, tech: &Technology, nl: &Netlist, v_dd: f64, scale_vias: bool) -> Result<XrwTable> {
    cfg.validate()?;
    let nl = Arc::new(nl.clone());
    let lib = tech.library(v_dd, cfg.i_off)?;
    let base_fp = initial_floorplan(&nl, &lib, cfg.flow.utilization, cfg.flow.aspect)?;
    let widths = cell_widths(&nl, &lib)?;
    let placement = place::place(&nl, base_fp, &widths, cfg.flow.place)?;
    let ro_len = {
        let d = routed_design(nl.clone(), &lib, &tech.stack, placement.clone())?;
        d.avg_net_len()
    };
    let runs: Vec<(TechStack, String, Vec<(Design, DesignResult)>)> = cfg
        .x_rw
        .par_iter()
        .map(|&x| {
            let stack = tech.stack.scale_wire_resistance(x)?.with_scale_vias(scale_vias);
            let ctx = context_hash(cfg, tech, &stack, &nl);
            let base = routed_design(nl.clone(), &lib, &stack, placement.clone())?;
            let rs = vdd_sweep_designs(cfg, &lib, &stack, &base, &ctx)?;
            Ok((stack, ctx, rs))
        })
        .collect::<Result<_>>()?;
    let rows = cfg
        .x_rw
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let (stack, ctx, own) = &runs[i];
            let own_results: Vec<DesignResult> = own.iter().map(|(_, r)| r.clone()).collect();
            let (own_edp, _) = min_edp(&own_results).expect("sweep yields results");
            let mut pool = own_results;
            for (j, (_, _, other)) in runs.iter().enumerate() {
                if j == i {
                    continue;
                }
                for (k, (d, r)) in other.iter().enumerate() {
                    let hash = sha_hex(&format!("{ctx}|pool|{j}|{k}"));
                    pool.push(reevaluate(d, &lib, stack, &cfg.flow, r, &hash)?);
                }
            }
            let (edp, m) = min_edp(&pool).expect("pool is non-empty");
            Ok(XrwRow {
                x_rw: x,
                min_edp: edp,
                f_ach: pool[m].f_ach,
                area: pool[m].cell_area,
                buffer_count: pool[m].buffer_count,
                own_min_edp: own_edp,
                ro_edp: ro_edp(&lib, stack, ro_len)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(XrwTable { rows, ro_wire_len: ro_len })
}

pub const RESULT_COLUMNS: [&str; 13] = [
    "config_hash",
    "v_dd_V",
    "f_tar_GHz",
    "f_ach_GHz",
    "t_slack_ns",
    "energy_pJ",
    "power_mW",
    "cell_area_um2",
    "die_area_um2",
    "buffer_count",
    "avg_net_len_um",
    "shareR",
    "shareC",
];

/// Result rows in the frozen column order; `header` is prepended verbatim.
pub fn results_csv(results: &[DesignResult], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str(&RESULT_COLUMNS.join(","));
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.config_hash,
            r.v_dd,
            r.f_tar,
            r.f_ach,
            r.t_slack,
            r.energy,
            r.power,
            r.cell_area,
            r.die_area,
            r.buffer_count,
            r.avg_net_len,
            r.share_r,
            r.share_c
        );
    }
    s
}

pub const FRONTIER_COLUMNS: [&str; 5] = ["f_ach_GHz", "energy_pJ", "area_um2", "v_dd_V", "config_hash"];

pub fn frontier_csv(points: &[EFPoint], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str(&FRONTIER_COLUMNS.join(","));
    s.push('\n');
    for p in points {
        let _ = writeln!(s, "{},{},{},{},{}", p.f_ach, p.energy, p.area, p.v_dd, p.provenance);
    }
    s
}
