// SPDX-License-Identifier: Apache-2.0

//! Simplified physical design: netlist, placement, route estimation,
//! optimization, timing and power/area reporting.

pub mod netlist;
pub mod optimize;
pub mod place;
pub mod route;
pub mod sta;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cell_library::{CellDef, CellLibrary, GateKind};
use crate::error::{Error, Result};
use crate::interconnect::TechStack;
use netlist::{Driver, Netlist, SynthConfig};
use optimize::{OptConfig, OptTrace};
use place::{Floorplan, PlaceOptions, Placement};
use route::NetRoute;
use sta::{net_elec, slack_ns, time_path, StaConfig, Timing};

/// Cell used for inserted repeaters.
pub const REPEATER: CellDef = CellDef { kind: GateKind::Buf, size: 4 };

/// A placed and routed design with its current sizing and repeaters.
#[derive(Debug, Clone)]
pub struct Design {
    pub netlist: Arc<Netlist>,
    pub placement: Arc<Placement>,
    pub routes: Arc<Vec<NetRoute>>,
    /// Library index of each instance's cell.
    pub cells: Vec<usize>,
    /// Repeaters inserted on each net.
    pub repeaters: Vec<u32>,
    pub repeater_cell: usize,
}

fn lib_index(lib: &CellLibrary, def: CellDef) -> Result<usize> {
    lib.index(def)
        .ok_or_else(|| Error::Netlist(format!("cell {} not in library", def.name())))
}

impl Design {
    pub fn new(netlist: Arc<Netlist>, placement: Arc<Placement>, routes: Arc<Vec<NetRoute>>, lib: &CellLibrary) -> Result<Self> {
        if routes.len() != netlist.n_nets() || placement.x.len() != netlist.instances.len() {
            return Err(Error::Netlist("placement or routes do not match the netlist".into()));
        }
        let cells = netlist
            .instances
            .iter()
            .map(|i| lib_index(lib, i.cell))
            .collect::<Result<Vec<_>>>()?;
        let n = netlist.n_nets();
        Ok(Design { netlist, placement, routes, cells, repeaters: vec![0; n], repeater_cell: lib_index(lib, REPEATER)? })
    }

    /// Instances plus repeaters, µm².
    pub fn cell_area(&self, lib: &CellLibrary) -> f64 {
        let cells: f64 = self.cells.iter().map(|&c| lib.cells[c].area()).sum();
        cells + f64::from(self.buffer_count()) * lib.cells[self.repeater_cell].area()
    }

    pub fn buffer_count(&self) -> u32 {
        self.repeaters.iter().sum()
    }

    pub fn avg_net_len(&self) -> f64 {
        self.routes.iter().map(|r| r.length).sum::<f64>() / self.routes.len().max(1) as f64
    }

    /// Instances above unit drive.
    pub fn upsized_count(&self, lib: &CellLibrary) -> usize {
        self.cells.iter().filter(|&&c| lib.cells[c].def.size > 1).count()
    }
}

/// Footprint widths of the instances, µm.
pub fn cell_widths(nl: &Netlist, lib: &CellLibrary) -> Result<Vec<f64>> {
    nl.instances
        .iter()
        .map(|i| Ok(lib.cells[lib_index(lib, i.cell)?].geometry.width * 1e-3))
        .collect()
}

/// Die for the unit-drive netlist at `utilization`.
pub fn initial_floorplan(nl: &Netlist, lib: &CellLibrary, utilization: f64, aspect: f64) -> Result<Floorplan> {
    let area: f64 = nl
        .instances
        .iter()
        .map(|i| Ok(lib.cells[lib_index(lib, i.cell)?].area()))
        .sum::<Result<f64>>()?;
    Floorplan::for_cell_area(area, utilization, aspect, lib.dims.cell_height() * 1e-3)
}

/// Places and routes a netlist on `fp`.
pub fn placed_design(nl: Arc<Netlist>, lib: &CellLibrary, stack: &TechStack, fp: Floorplan, opts: PlaceOptions) -> Result<Design> {
    let widths = cell_widths(&nl, lib)?;
    let p = place::place(&nl, fp, &widths, opts)?;
    routed_design(nl, lib, stack, p)
}

/// Routes an existing placement.
pub fn routed_design(nl: Arc<Netlist>, lib: &CellLibrary, stack: &TechStack, p: Placement) -> Result<Design> {
    let routes = route::route_estimate(&nl, &p, stack, lib.dims.cgp)?;
    Design::new(nl, Arc::new(p), Arc::new(routes), lib)
}

/// `1/f_ach = 1/f_tar − t_slack`, GHz and ns.
pub fn f_ach(f_tar: f64, t_slack: f64) -> Result<f64> {
    if !(f_tar > 0.0) {
        return Err(Error::domain(format!("f_tar = {f_tar} GHz must be positive")));
    }
    let period = 1.0 / f_tar - t_slack;
    if !(period > 0.0) {
        return Err(Error::Domain(format!("effective period {period} ns is not positive")));
    }
    Ok(1.0 / period)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub switching_mw: f64,
    pub internal_mw: f64,
    pub clock_mw: f64,
    pub leakage_mw: f64,
}

impl PowerReport {
    pub fn total_mw(&self) -> f64 {
        self.switching_mw + self.internal_mw + self.clock_mw + self.leakage_mw
    }

    pub fn dynamic_mw(&self) -> f64 {
        self.switching_mw + self.internal_mw + self.clock_mw
    }
}

/// Power at `f_ghz`. `activity` is the probability that a net charges in a
/// cycle; the clock charges every cycle.
pub fn power(d: &Design, lib: &CellLibrary, sta: &StaConfig, timing: &Timing, v_dd: f64, f_ghz: f64, activity: f64) -> PowerReport {
    let nl = &d.netlist;
    let v2 = v_dd * v_dd;
    let buf = &lib.cells[d.repeater_cell].table;
    let (mut sw, mut internal) = (0.0, 0.0);
    // per cycle: one rise and one fall of every switching event
    let internal_of = |t: &crate::cell_library::characterize::CharTable, arc: usize, s: f64, load: f64| {
        (2.0 * t.worst(arc, s, load).energy - load * v2).max(0.0)
    };
    for net in 0..nl.n_nets() {
        let e = net_elec(d, lib, sta, net);
        sw += e.switched_cap() * v2;
        match nl.drivers[net] {
            Driver::Instance(i) => {
                let inst = &nl.instances[i];
                let t = &lib.cells[d.cells[i]].table;
                let s = if inst.is_register() { sta.clock_slew } else { timing.slew[inst.inputs[0]] };
                internal += internal_of(t, 0, s, e.driver_load());
            }
            Driver::Pin(_) => {}
        }
        for j in 1..e.segments {
            internal += internal_of(buf, 0, sta.input_slew, e.seg_load(j));
        }
    }
    let clock: f64 = nl.registers().map(|i| lib.cells[d.cells[i]].table.pin_cap * v2).sum();
    let leak: f64 = d.cells.iter().map(|&c| lib.cells[c].table.leakage).sum::<f64>()
        + f64::from(d.buffer_count()) * buf.leakage;
    // fJ·GHz = µW
    PowerReport {
        switching_mw: activity * f_ghz * sw * 1e-3,
        internal_mw: activity * f_ghz * internal * 1e-3,
        clock_mw: f_ghz * clock * 1e-3,
        leakage_mw: leak * 1e-3,
    }
}

/// Fractions of the critical-path delay removed by zeroing interconnect R
/// and then C on that path.
pub fn rc_contribution(d: &Design, lib: &CellLibrary, sta: &StaConfig, timing: &Timing) -> (f64, f64) {
    let path = timing.critical_path(d);
    let t0 = time_path(d, lib, sta, &path);
    let tr = time_path(d, lib, &StaConfig { r_scale: 0.0, ..*sta }, &path);
    let tc = time_path(d, lib, &StaConfig { c_scale: 0.0, ..*sta }, &path);
    ((1.0 - tr / t0).max(0.0), (1.0 - tc / t0).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerStat {
    pub level: usize,
    pub nets: usize,
    /// Mean per-net run length on this level, µm.
    pub avg_len_um: f64,
}

/// Per-level wire statistics over the nets of the given paths.
pub fn layer_stats(d: &Design, paths: &[sta::TimingPath]) -> Vec<LayerStat> {
    let mut nets: Vec<usize> = paths.iter().flat_map(|p| p.nets.iter().copied()).collect();
    nets.sort_unstable();
    nets.dedup();
    let mut acc: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for n in nets {
        let r = &d.routes[n];
        if r.h_level == r.v_level {
            let e = acc.entry(r.h_level).or_default();
            e.0 += 1;
            e.1 += r.length;
        } else {
            for (lvl, len) in [(r.h_level, r.dx), (r.v_level, r.dy)] {
                let e = acc.entry(lvl).or_default();
                e.0 += 1;
                e.1 += len;
            }
        }
    }
    acc.into_iter()
        .map(|(level, (nets, total))| LayerStat { level, nets, avg_len_um: total / nets as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub config_hash: String,
    pub v_dd: f64,
    pub f_tar: f64,
    pub f_ach: f64,
    /// ns.
    pub t_slack: f64,
    pub t_cp_ns: f64,
    /// pJ per cycle.
    pub energy: f64,
    /// mW.
    pub power: f64,
    pub power_detail: PowerReport,
    pub cell_area: f64,
    pub die_area: f64,
    pub buffer_count: u32,
    pub upsized_cells: usize,
    pub avg_net_len: f64,
    pub layer_stats: Vec<LayerStat>,
    pub share_r: f64,
    pub share_c: f64,
    /// Instance and net names along the critical path.
    pub critical_path: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub synth: SynthConfig,
    pub utilization: f64,
    /// Die height over width.
    pub aspect: f64,
    pub place: PlaceOptions,
    pub sta: StaConfig,
    pub opt: OptConfig,
    pub activity: f64,
    /// Paths summarized in the layer statistics.
    pub top_k: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            synth: SynthConfig::default(),
            utilization: 0.6,
            aspect: 1.0,
            place: PlaceOptions::default(),
            sta: StaConfig::default(),
            opt: OptConfig::default(),
            activity: 0.1,
            top_k: 20,
        }
    }
}

/// Critical delay (ps) that meets `f_tar` with the configured uncertainty.
pub fn target_t_cp(f_tar: f64, sta: &StaConfig) -> f64 {
    (1.0 - sta.uncertainty) * 1e3 / f_tar
}

/// Reports timing, power and area of an optimized design at `f_tar`.
pub fn evaluate(d: &Design, lib: &CellLibrary, cfg: &FlowConfig, timing: &Timing, f_tar: f64, config_hash: &str) -> Result<DesignResult> {
    let t_slack = slack_ns(timing.t_cp, f_tar, cfg.sta.uncertainty);
    let f_ach = f_ach(f_tar, t_slack)?;
    let pw = power(d, lib, &cfg.sta, timing, lib.v_dd, f_ach, cfg.activity);
    let (share_r, share_c) = rc_contribution(d, lib, &cfg.sta, timing);
    let paths = timing.top_paths(d, cfg.top_k);
    let nl = &d.netlist;
    let crit = &paths[0];
    let mut names = Vec::new();
    names.push(nl.net_names[crit.nets[0]].clone());
    for (k, &(g, _)) in crit.gates.iter().enumerate() {
        names.push(format!("{}({})", nl.instances[g].name, lib.cells[d.cells[g]].name));
        names.push(nl.net_names[crit.nets[k + 1]].clone());
    }
    let power_mw = pw.total_mw();
    Ok(DesignResult {
        config_hash: config_hash.to_string(),
        v_dd: lib.v_dd,
        f_tar,
        f_ach,
        t_slack,
        t_cp_ns: timing.t_cp * 1e-3,
        energy: power_mw / f_ach,
        power: power_mw,
        power_detail: pw,
        cell_area: d.cell_area(lib),
        die_area: d.placement.floorplan.area(),
        buffer_count: d.buffer_count(),
        upsized_cells: d.upsized_count(lib),
        avg_net_len: d.avg_net_len(),
        layer_stats: layer_stats(d, &paths),
        share_r,
        share_c,
        critical_path: names,
    })
}

/// Optimizes a copy of `base` for `f_tar` and reports it.
pub fn run_flow(base: &Design, lib: &CellLibrary, cfg: &FlowConfig, f_tar: f64, config_hash: &str) -> Result<(Design, OptTrace, DesignResult)> {
    let mut d = base.clone();
    let (timing, trace) = optimize::optimize(&mut d, lib, &cfg.sta, &cfg.opt, target_t_cp(f_tar, &cfg.sta))?;
    let r = evaluate(&d, lib, cfg, &timing, f_tar, config_hash)?;
    Ok((d, trace, r))
}
