// SPDX-License-Identifier: Apache-2.0

//! Timing-driven repeater insertion and gate upsizing on the critical path.

use super::sta::{analyze, net_elec, time_path, StaConfig, Timing};
use super::netlist::Driver;
use super::Design;
use crate::cell_library::{CellDef, CellLibrary};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptConfig {
    /// Wire-induced delay (load-dependent driver delay plus Elmore) over
    /// driving-stage delay above which a net gets repeaters.
    pub wire_threshold: f64,
    /// Cell area may not exceed this fraction of the die.
    pub max_utilization: f64,
    pub max_moves: usize,
    /// Consecutive rounds without improvement before giving up.
    pub max_stalls: usize,
    pub max_repeaters: u32,
    /// Full timing checks per round.
    pub tries_per_round: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            wire_threshold: 0.3,
            max_utilization: 0.95,
            max_moves: 4000,
            max_stalls: 3,
            max_repeaters: 64,
            tries_per_round: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Upsize { inst: usize, from: usize, to: usize },
    Repeat { net: usize, from: u32, to: u32 },
}

impl Move {
    pub fn apply(&self, d: &mut Design) {
        match *self {
            Move::Upsize { inst, to, .. } => d.cells[inst] = to,
            Move::Repeat { net, to, .. } => d.repeaters[net] = to,
        }
    }

    pub fn revert(&self, d: &mut Design) {
        match *self {
            Move::Upsize { inst, from, .. } => d.cells[inst] = from,
            Move::Repeat { net, from, .. } => d.repeaters[net] = from,
        }
    }

    fn area_delta(&self, lib: &CellLibrary, d: &Design) -> f64 {
        match *self {
            Move::Upsize { from, to, .. } => lib.cells[to].area() - lib.cells[from].area(),
            Move::Repeat { from, to, .. } => f64::from(to - from) * lib.cells[d.repeater_cell].area(),
        }
    }
}

/// Accepted moves and the critical delay before and after each, ps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptTrace {
    pub moves: Vec<Move>,
    pub t_cp: Vec<f64>,
}

impl OptTrace {
    /// Number of leading moves needed to reach `t_stop`, or all of them.
    pub fn prefix_for(&self, t_stop: f64) -> usize {
        self.t_cp.iter().position(|&t| t <= t_stop).unwrap_or(self.moves.len())
    }

    /// Applies the shortest prefix that meets `t_stop`.
    pub fn replay(&self, d: &mut Design, t_stop: f64) -> usize {
        let m = self.prefix_for(t_stop);
        for mv in &self.moves[..m] {
            mv.apply(d);
        }
        m
    }
}

/// Optimal repeater spacing, µm, for wire RC per µm and a repeater's drive
/// resistance (Ω) and input capacitance (fF).
pub fn optimal_spacing(r_buf: f64, c_buf: f64, r_w: f64, c_w: f64) -> f64 {
    (2.0 * r_buf * c_buf / (r_w * c_w)).sqrt()
}

/// Drive resistance of a cell from the load slope of its first arc, Ω.
pub fn drive_resistance(lib: &CellLibrary, cell: usize) -> f64 {
    let t = &lib.cells[cell].table;
    let (l0, l1) = (t.loads[1], t.loads[3]);
    let s = t.slews[1];
    (t.worst(0, s, l1).delay - t.worst(0, s, l0).delay) / (l1 - l0) * 1e3
}

fn upsized(lib: &CellLibrary, cell: usize, steps: usize) -> Option<usize> {
    let def = lib.cells[cell].def;
    let sizes = def.kind.sizes();
    let pos = sizes.iter().position(|&s| s == def.size)?;
    let to = (pos + steps).min(sizes.len() - 1);
    if to == pos {
        return None;
    }
    lib.index(CellDef::new(def.kind, sizes[to]))
}

fn candidates(d: &Design, lib: &CellLibrary, sta: &StaConfig, cfg: &OptConfig, timing: &Timing, level: usize) -> Vec<Move> {
    let path = timing.critical_path(d);
    let mut out = Vec::new();
    for &(g, _) in &path.gates {
        if let Some(to) = upsized(lib, d.cells[g], level + 1) {
            out.push(Move::Upsize { inst: g, from: d.cells[g], to });
        }
    }
    let buf = d.repeater_cell;
    let r_buf = drive_resistance(lib, buf);
    let c_buf = lib.cells[buf].table.pin_cap;
    for (idx, &net) in path.nets.iter().enumerate() {
        let e = net_elec(d, lib, sta, net);
        // driving-stage delay with and without the wire load
        let bare = e.seg_load(0) - e.c_seg;
        let (stage, stage_bare) = if idx == 0 {
            match d.netlist.drivers[net] {
                Driver::Instance(i) => {
                    let t = &lib.cells[d.cells[i]].table;
                    (t.worst(0, sta.clock_slew, e.driver_load()).delay, t.worst(0, sta.clock_slew, bare).delay)
                }
                Driver::Pin(_) => (0.0, 0.0),
            }
        } else {
            let (g, k) = path.gates[idx - 1];
            let s_in = timing.slew[d.netlist.instances[g].inputs[k]];
            let t = &lib.cells[d.cells[g]].table;
            (t.worst(k, s_in, e.driver_load()).delay, t.worst(k, s_in, bare).delay)
        };
        let wire = stage - stage_bare + e.wire_delay();
        if wire <= cfg.wire_threshold * stage.max(0.0) {
            continue;
        }
        let r = &d.routes[net];
        let cur = d.repeaters[net];
        let by_length = if r.r_per_um > 0.0 && r.c_per_um > 0.0 {
            (r.length / optimal_spacing(r_buf, c_buf, r.r_per_um * sta.r_scale, r.c_per_um * sta.c_scale)).floor() as u32
        } else {
            0
        };
        let to = (cur + 1 + level as u32).max(by_length).min(cfg.max_repeaters);
        if to > cur {
            out.push(Move::Repeat { net, from: cur, to });
        }
    }
    out
}

/// Greedy critical-path optimization until `t_cp ≤ t_stop` (ps) or no move
/// helps for `max_stalls` rounds. Never accepts a move that does not lower
/// the critical delay, so the trajectory is independent of `t_stop` up to
/// where it stops.
pub fn optimize(d: &mut Design, lib: &CellLibrary, sta: &StaConfig, cfg: &OptConfig, t_stop: f64) -> Result<(Timing, OptTrace)> {
    let mut timing = analyze(d, lib, sta)?;
    let mut trace = OptTrace { moves: Vec::new(), t_cp: vec![timing.t_cp] };
    let area_cap = cfg.max_utilization * d.placement.floorplan.area();
    let mut area = d.cell_area(lib);
    let mut stalls = 0;
    while timing.t_cp > t_stop && trace.moves.len() < cfg.max_moves && stalls < cfg.max_stalls {
        let path = timing.critical_path(d);
        let base = time_path(d, lib, sta, &path);
        let mut ranked = Vec::new();
        for m in candidates(d, lib, sta, cfg, &timing, stalls) {
            if area + m.area_delta(lib, d) > area_cap {
                continue;
            }
            m.apply(d);
            let t = time_path(d, lib, sta, &path);
            m.revert(d);
            if t < base {
                ranked.push((t - base, m));
            }
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut accepted = false;
        for &(_, m) in ranked.iter().take(cfg.tries_per_round) {
            m.apply(d);
            let t = analyze(d, lib, sta)?;
            if t.t_cp < timing.t_cp {
                area += m.area_delta(lib, d);
                trace.moves.push(m);
                trace.t_cp.push(t.t_cp);
                timing = t;
                accepted = true;
                break;
            }
            m.revert(d);
        }
        stalls = if accepted { 0 } else { stalls + 1 };
    }
    Ok((timing, trace))
}
