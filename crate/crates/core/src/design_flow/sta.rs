// SPDX-License-Identifier: Apache-2.0

//! Static timing: table lookups for cells, Elmore π-ladders for wires and
//! repeater chains, single-transition worst-case propagation.

use super::netlist::{Driver, NetId, Sink};
use super::route::segment_elmore;
use super::Design;
use crate::cell_library::characterize::CharTable;
use crate::cell_library::CellLibrary;
use crate::error::{Error, Result};

const LN9: f64 = 2.197_224_577_336_219_6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaConfig {
    /// Transition at primary inputs, ps.
    pub input_slew: f64,
    /// Transition of the ideal clock at register pins, ps.
    pub clock_slew: f64,
    /// Load on each primary output, fF.
    pub output_load: f64,
    /// Clock uncertainty as a fraction of the period.
    pub uncertainty: f64,
    /// Multipliers on interconnect resistance and capacitance.
    pub r_scale: f64,
    pub c_scale: f64,
}

impl Default for StaConfig {
    fn default() -> Self {
        StaConfig {
            input_slew: 4.0,
            clock_slew: 4.0,
            output_load: 0.5,
            uncertainty: 0.05,
            r_scale: 1.0,
            c_scale: 1.0,
        }
    }
}

/// Electrical view of one net after repeater splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetElec {
    pub segments: u32,
    pub r_seg: f64,
    pub c_seg: f64,
    pub r_via: f64,
    /// Total pin and output load at the far end, fF.
    pub pin_load: f64,
    pub buf_pin: f64,
}

impl NetElec {
    fn seg_sink(&self, j: u32) -> f64 {
        if j + 1 == self.segments {
            self.pin_load
        } else {
            self.buf_pin
        }
    }

    /// Load seen by the driver of segment `j`.
    pub fn seg_load(&self, j: u32) -> f64 {
        self.c_seg + self.seg_sink(j)
    }

    pub fn driver_load(&self) -> f64 {
        self.seg_load(0)
    }

    /// Interconnect capacitance plus far-end pins, repeaters included.
    pub fn switched_cap(&self) -> f64 {
        f64::from(self.segments) * self.c_seg + self.pin_load + f64::from(self.segments - 1) * self.buf_pin
    }

    /// Sum of the segment Elmore delays, ps.
    pub fn wire_delay(&self) -> f64 {
        (0..self.segments)
            .map(|j| segment_elmore(self.r_seg, self.c_seg, self.r_via, self.seg_sink(j)))
            .sum()
    }

    /// Carries an arrival and slew from the driver output to the sinks.
    pub fn propagate(&self, buf: &CharTable, mut a: f64, mut s: f64) -> (f64, f64) {
        for j in 0..self.segments {
            if j > 0 {
                let t = buf.worst(0, s, self.seg_load(j));
                a += t.delay;
                s = t.slew;
            }
            let e = segment_elmore(self.r_seg, self.c_seg, self.r_via, self.seg_sink(j));
            a += e;
            s = degrade(s, e);
        }
        (a, s)
    }
}

/// Ramp transition after an RC stage with Elmore delay `elmore`.
pub fn degrade(slew: f64, elmore: f64) -> f64 {
    slew.hypot(LN9 * elmore)
}

fn table<'a>(lib: &'a CellLibrary, design: &Design, inst: usize) -> &'a CharTable {
    &lib.cells[design.cells[inst]].table
}

/// Electrical view of `net` under the wire scaling of `cfg`.
pub fn net_elec(design: &Design, lib: &CellLibrary, cfg: &StaConfig, net: NetId) -> NetElec {
    let nl = &design.netlist;
    let r = &design.routes[net];
    let segments = design.repeaters[net] + 1;
    let k = f64::from(segments);
    let pin_load = nl.sinks[net]
        .iter()
        .map(|s| match *s {
            Sink::Instance(i, _) => {
                let t = table(lib, design, i);
                if nl.instances[i].is_register() {
                    t.data_pin_cap
                } else {
                    t.pin_cap
                }
            }
            Sink::Pin(_) => cfg.output_load,
        })
        .sum();
    NetElec {
        segments,
        r_seg: r.r_wire / k * cfg.r_scale,
        c_seg: r.c_wire / k * cfg.c_scale,
        r_via: r.r_via_end * cfg.r_scale,
        pin_load,
        buf_pin: lib.cells[design.repeater_cell].table.pin_cap,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Register(usize),
    Pin(usize),
}

/// One register-to-register (or I/O) path.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingPath {
    /// Nets from the launching net to the captured net.
    pub nets: Vec<NetId>,
    /// Combinational instance and arc between consecutive nets.
    pub gates: Vec<(usize, usize)>,
    pub endpoint: Endpoint,
    /// Required-side arrival at the endpoint (setup included), ps.
    pub arrival: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    /// Longest path delay, ps.
    pub t_cp: f64,
    /// Arrival and slew at the sinks of every net.
    pub arrival: Vec<f64>,
    pub slew: Vec<f64>,
    /// Arc index of the latest input of each instance.
    pub from: Vec<usize>,
    pub endpoints: Vec<(Endpoint, f64)>,
}

/// Clock-to-output launch of a register or ideal primary input.
fn launch(design: &Design, lib: &CellLibrary, cfg: &StaConfig, elec: &NetElec, net: NetId) -> (f64, f64) {
    match design.netlist.drivers[net] {
        Driver::Pin(_) => (0.0, cfg.input_slew),
        Driver::Instance(i) => {
            let t = table(lib, design, i).worst(0, cfg.clock_slew, elec.driver_load());
            (t.delay, t.slew)
        }
    }
}

fn endpoint_arrival(design: &Design, lib: &CellLibrary, e: Endpoint, a: f64) -> f64 {
    match e {
        Endpoint::Register(i) => a + table(lib, design, i).setup,
        Endpoint::Pin(_) => a,
    }
}

fn endpoints_of(design: &Design) -> Vec<(Endpoint, NetId)> {
    let nl = &design.netlist;
    let mut out: Vec<(Endpoint, NetId)> = nl.registers().map(|i| (Endpoint::Register(i), nl.instances[i].inputs[0])).collect();
    out.extend(
        nl.pins
            .iter()
            .enumerate()
            .filter(|(_, p)| p.dir == super::netlist::PinDir::Out)
            .map(|(k, p)| (Endpoint::Pin(k), p.net)),
    );
    out
}

/// Full-graph timing of a design.
pub fn analyze(design: &Design, lib: &CellLibrary, cfg: &StaConfig) -> Result<Timing> {
    let nl = &design.netlist;
    let n = nl.n_nets();
    let elec: Vec<NetElec> = (0..n).map(|k| net_elec(design, lib, cfg, k)).collect();
    let buf = &lib.cells[design.repeater_cell].table;
    let mut arrival = vec![f64::NAN; n];
    let mut slew = vec![f64::NAN; n];
    let mut from = vec![0; nl.instances.len()];
    for net in 0..n {
        let launched = match nl.drivers[net] {
            Driver::Pin(_) => true,
            Driver::Instance(i) => nl.instances[i].is_register(),
        };
        if launched {
            let (a, s) = launch(design, lib, cfg, &elec[net], net);
            (arrival[net], slew[net]) = elec[net].propagate(buf, a, s);
        }
    }
    for &g in &nl.topo {
        let inst = &nl.instances[g];
        let t = table(lib, design, g);
        let load = elec[inst.output].driver_load();
        let (mut a, mut s, mut arg) = (f64::NEG_INFINITY, 0.0_f64, 0);
        for (k, &inp) in inst.inputs.iter().enumerate() {
            let at = t.worst(k, slew[inp], load);
            let cand = arrival[inp] + at.delay;
            if cand > a {
                a = cand;
                arg = k;
            }
            s = s.max(at.slew);
        }
        from[g] = arg;
        (arrival[inst.output], slew[inst.output]) = elec[inst.output].propagate(buf, a, s);
    }
    let endpoints: Vec<(Endpoint, f64)> = endpoints_of(design)
        .into_iter()
        .map(|(e, net)| (e, endpoint_arrival(design, lib, e, arrival[net])))
        .collect();
    let t_cp = endpoints.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    if !t_cp.is_finite() {
        return Err(Error::Timing("design has no timed endpoint".into()));
    }
    Ok(Timing { t_cp, arrival, slew, from, endpoints })
}

impl Timing {
    fn trace(&self, design: &Design, e: Endpoint, arrival: f64) -> TimingPath {
        let nl = &design.netlist;
        let mut net = match e {
            Endpoint::Register(i) => nl.instances[i].inputs[0],
            Endpoint::Pin(k) => nl.pins[k].net,
        };
        let mut nets = vec![net];
        let mut gates = Vec::new();
        while let Driver::Instance(g) = nl.drivers[net] {
            if nl.instances[g].is_register() {
                break;
            }
            let k = self.from[g];
            gates.push((g, k));
            net = nl.instances[g].inputs[k];
            nets.push(net);
        }
        nets.reverse();
        gates.reverse();
        TimingPath { nets, gates, endpoint: e, arrival }
    }

    /// Worst path into the latest endpoint.
    pub fn critical_path(&self, design: &Design) -> TimingPath {
        self.top_paths(design, 1).remove(0)
    }

    /// Worst path into each of the `k` latest endpoints.
    pub fn top_paths(&self, design: &Design, k: usize) -> Vec<TimingPath> {
        let mut eps = self.endpoints.clone();
        eps.sort_by(|a, b| b.1.total_cmp(&a.1));
        eps.into_iter().take(k.max(1)).map(|(e, a)| self.trace(design, e, a)).collect()
    }
}

/// Re-times one path with path-local slews and the wire scaling of `cfg`.
pub fn time_path(design: &Design, lib: &CellLibrary, cfg: &StaConfig, path: &TimingPath) -> f64 {
    let buf = &lib.cells[design.repeater_cell].table;
    let e0 = net_elec(design, lib, cfg, path.nets[0]);
    let (a, s) = launch(design, lib, cfg, &e0, path.nets[0]);
    let (mut a, mut s) = e0.propagate(buf, a, s);
    for (idx, &(g, k)) in path.gates.iter().enumerate() {
        let out = net_elec(design, lib, cfg, path.nets[idx + 1]);
        let t = table(lib, design, g).worst(k, s, out.driver_load());
        (a, s) = out.propagate(buf, a + t.delay, t.slew);
    }
    endpoint_arrival(design, lib, path.endpoint, a)
}

/// Longest path by explicit enumeration of every launch-to-capture path,
/// using the graph slews. Exponential; meant for small netlists.
pub fn t_cp_by_enumeration(design: &Design, lib: &CellLibrary, cfg: &StaConfig) -> Result<f64> {
    let nl = &design.netlist;
    let graph = analyze(design, lib, cfg)?;
    let elec: Vec<NetElec> = (0..nl.n_nets()).map(|k| net_elec(design, lib, cfg, k)).collect();
    let buf = &lib.cells[design.repeater_cell].table;
    let mut worst = f64::NEG_INFINITY;
    let mut stack: Vec<(NetId, f64)> = Vec::new();
    for net in 0..nl.n_nets() {
        let launched = match nl.drivers[net] {
            Driver::Pin(_) => true,
            Driver::Instance(i) => nl.instances[i].is_register(),
        };
        if launched {
            let (a, s) = launch(design, lib, cfg, &elec[net], net);
            stack.push((net, elec[net].propagate(buf, a, s).0));
        }
    }
    while let Some((net, a)) = stack.pop() {
        for s in &nl.sinks[net] {
            match *s {
                Sink::Pin(k) => worst = worst.max(endpoint_arrival(design, lib, Endpoint::Pin(k), a)),
                Sink::Instance(i, _) if nl.instances[i].is_register() => {
                    worst = worst.max(endpoint_arrival(design, lib, Endpoint::Register(i), a));
                }
                Sink::Instance(i, k) => {
                    let out = nl.instances[i].output;
                    let d = table(lib, design, i).worst(k, graph.slew[net], elec[out].driver_load()).delay;
                    // the output slew is path-independent, so only the arrival is carried
                    let s_drv = nl.instances[i]
                        .inputs
                        .iter()
                        .enumerate()
                        .map(|(kk, &inp)| table(lib, design, i).worst(kk, graph.slew[inp], elec[out].driver_load()).slew)
                        .fold(0.0_f64, f64::max);
                    stack.push((out, elec[out].propagate(buf, a + d, s_drv).0));
                }
            }
        }
    }
    Ok(worst)
}

/// Slack in ns for a target frequency in GHz.
pub fn slack_ns(t_cp_ps: f64, f_tar_ghz: f64, uncertainty: f64) -> f64 {
    let period = 1.0 / f_tar_ghz;
    period - uncertainty * period - t_cp_ps * 1e-3
}
