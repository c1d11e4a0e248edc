// SPDX-License-Identifier: Apache-2.0

//! Slew × load characterization tables built with the transient engine.

use serde::{Deserialize, Serialize};

use super::geometry::CellGeometry;
use super::meol::{finger_contact_resistances, MeolParasitics};
use super::transient::{simulate_chain, Network, Ramp, SimOptions, Stage};
use super::{CellDef, GateKind};
use crate::error::{Error, Result};
use crate::vsdevice::{gate_cap_per_width, VsModel, VsParams};

/// Input transition times of the table rows, ps.
pub const SLEW_GRID: [f64; 5] = [0.5, 4.0, 12.0, 30.0, 80.0];
/// Output loads of the table columns per unit drive, fF.
pub const LOAD_GRID_X1: [f64; 5] = [0.02, 0.1, 0.4, 1.5, 5.0];

const RAMP_START: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// `values[slew][load]`.
    pub values: Vec<Vec<f64>>,
}

impl Grid {
    fn new() -> Self {
        Grid { values: vec![vec![0.0; LOAD_GRID_X1.len()]; SLEW_GRID.len()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTables {
    pub delay: Grid,
    pub slew: Grid,
    /// Supply energy per event, fJ.
    pub energy: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcTables {
    pub pin: String,
    /// Output rising.
    pub rise: TimingTables,
    /// Output falling.
    pub fall: TimingTables,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharTable {
    pub slews: Vec<f64>,
    pub loads: Vec<f64>,
    pub arcs: Vec<ArcTables>,
    /// Static power, µW.
    pub leakage: f64,
    /// Capacitance of each input pin, fF (the clock pin for a flop).
    pub pin_cap: f64,
    /// Capacitance of the data pin of a flop, fF; equal to `pin_cap` otherwise.
    pub data_pin_cap: f64,
    /// Self capacitance at the output node, fF.
    pub c_out: f64,
    /// Setup time of a flop, ps.
    pub setup: f64,
    pub i_on_up: f64,
    pub i_on_down: f64,
}

/// Result of one table lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcTiming {
    pub delay: f64,
    pub slew: f64,
    pub energy: f64,
}

fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    let mut i = 0;
    while i + 2 < n && x > axis[i + 1] {
        i += 1;
    }
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

impl Grid {
    /// Bilinear interpolation with linear extrapolation off the grid.
    pub fn lookup(&self, slews: &[f64], loads: &[f64], slew: f64, load: f64) -> f64 {
        let (i, u) = bracket(slews, slew);
        let (j, w) = bracket(loads, load);
        let v = &self.values;
        let a = v[i][j] + (v[i][j + 1] - v[i][j]) * w;
        let b = v[i + 1][j] + (v[i + 1][j + 1] - v[i + 1][j]) * w;
        a + (b - a) * u
    }
}

impl CharTable {
    pub fn timing(&self, arc: usize, rising: bool, slew: f64, load: f64) -> ArcTiming {
        let a = &self.arcs[arc];
        let t = if rising { &a.rise } else { &a.fall };
        ArcTiming {
            delay: t.delay.lookup(&self.slews, &self.loads, slew, load),
            slew: t.slew.lookup(&self.slews, &self.loads, slew, load).max(0.0),
            energy: t.energy.lookup(&self.slews, &self.loads, slew, load),
        }
    }

    /// Worst of the rise and fall lookups, used by the single-transition timer.
    pub fn worst(&self, arc: usize, slew: f64, load: f64) -> ArcTiming {
        let r = self.timing(arc, true, slew, load);
        let f = self.timing(arc, false, slew, load);
        ArcTiming {
            delay: r.delay.max(f.delay),
            slew: r.slew.max(f.slew),
            energy: 0.5 * (r.energy + f.energy),
        }
    }
}

/// Per-finger electrical view of the devices of one library.
#[derive(Debug, Clone, Copy)]
pub struct DeviceKit {
    pub n: VsModel,
    pub p: VsModel,
    /// Width per finger, µm.
    pub width: f64,
    pub c_fet_n: f64,
    pub c_fet_p: f64,
    pub meol: MeolParasitics,
    pub v_dd: f64,
}

impl DeviceKit {
    pub fn new(geom: &CellGeometry, meol: MeolParasitics, vs_n: &VsParams, vs_p: &VsParams, v_dd: f64) -> Result<Self> {
        let width = geom.device_width * 1e-3;
        Ok(DeviceKit {
            n: vs_n.model()?,
            p: vs_p.model()?,
            width,
            c_fet_n: gate_cap_per_width(vs_n)? * width,
            c_fet_p: gate_cap_per_width(vs_p)? * width,
            meol,
            v_dd,
        })
    }

    /// Capacitance presented by one n/p finger pair on a gate, fF.
    pub fn finger_pair_cap(&self) -> f64 {
        self.c_fet_n + self.c_fet_p + 2.0 * self.meol.c_gate_parasitic()
    }

    /// Drain-side coupling of one finger, fF.
    fn drain_coupling(&self) -> f64 {
        0.5 * self.meol.c_gate_parasitic()
    }

    fn network(&self, model: VsModel, fingers: f64, stack: f64) -> Network {
        let k = fingers.max(1.0);
        let (rs, rd) = finger_contact_resistances(self.meol.r_con, k.round() as usize);
        Network {
            model,
            width: k * self.width,
            stack,
            r_source: rs / k,
            r_drain: rd / k + self.meol.r_meol_series,
        }
    }

    /// Off-state current of one finger pair, µA.
    fn off_current(&self) -> f64 {
        self.width
            * (self.n.current_normalized(0.0, self.v_dd) + self.p.current_normalized(0.0, self.v_dd))
    }
}

/// Conducting topology of one input-to-output arc of a single-stage gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcTopology {
    pub stack_n: usize,
    pub stack_p: usize,
    /// Devices driven by this pin whose drain is the output node.
    pub miller_devices: usize,
}

/// Stage for one arc of a single-stage gate with `fingers` per device and no load.
pub fn gate_stage(kit: &DeviceKit, kind: GateKind, fingers: f64, topo: ArcTopology) -> Stage {
    let par = kit.drain_coupling() * fingers;
    let out_devices = kind.output_devices() as f64;
    Stage {
        up: kit.network(kit.p, fingers, topo.stack_p as f64),
        down: kit.network(kit.n, fingers, topo.stack_n as f64),
        c_ground: kit.meol.c_meol_other + (out_devices - topo.miller_devices as f64) * par,
        c_miller: topo.miller_devices as f64 * par,
    }
}

fn inverter(kit: &DeviceKit, fingers: f64) -> Stage {
    gate_stage(kit, GateKind::Inv, fingers, GateKind::Inv.arcs()[0].1)
}

/// Builds the stage chain of one arc of `cell`, without the external load.
/// The flop clock path is an inverter triple with latch-feedback loading.
fn arc_chain(kit: &DeviceKit, cell: &CellDef, arc: usize) -> Vec<Stage> {
    let k = f64::from(cell.size);
    match cell.kind {
        GateKind::Buf => {
            let first = cell.kind.buf_first_stage(cell.size) as f64;
            let mut s1 = inverter(kit, first);
            let s2 = inverter(kit, k);
            s1.c_ground += k * kit.finger_pair_cap() - s2.c_miller;
            vec![s1, s2]
        }
        GateKind::Dff => {
            let mut s1 = inverter(kit, 1.0);
            let mut s2 = inverter(kit, 1.0);
            let s3 = inverter(kit, k);
            // each internal node also drives a feedback inverter
            s1.c_ground += 2.0 * kit.finger_pair_cap() - s2.c_miller;
            s2.c_ground += kit.finger_pair_cap() + k * kit.finger_pair_cap() - s3.c_miller;
            vec![s1, s2, s3]
        }
        kind => vec![gate_stage(kit, kind, k, kind.arcs()[arc].1)],
    }
}

pub(crate) fn pin_caps(kit: &DeviceKit, cell: &CellDef) -> (f64, f64) {
    let pair = kit.finger_pair_cap();
    match cell.kind {
        GateKind::Buf => {
            let c = cell.kind.buf_first_stage(cell.size) as f64 * pair;
            (c, c)
        }
        // clock drives both latches, data one transmission pair
        GateKind::Dff => (2.0 * pair, pair),
        _ => {
            let c = f64::from(cell.size) * pair;
            (c, c)
        }
    }
}

fn run(
    stages: &[Stage],
    load: f64,
    rising_in: bool,
    slew: f64,
    v_dd: f64,
    arc_id: &str,
) -> Result<(Option<f64>, Option<f64>, f64, Vec<f64>)> {
    let mut st = stages.to_vec();
    let last = st.len() - 1;
    st[last].c_ground += load;
    let ramp = Ramp::from_slew(rising_in, v_dd, slew, RAMP_START);
    let res = simulate_chain(&st, ramp, v_dd, SimOptions::default()).ok_or_else(|| Error::Characterization {
        arc: arc_id.to_string(),
        msg: format!("transient did not settle (slew {slew} ps, load {load} fF)"),
    })?;
    let out = res.crossings[last];
    let t50: Vec<f64> = res.crossings.iter().map(|c| c.t50.unwrap_or(f64::NAN) - ramp.t50()).collect();
    Ok((out.t50.map(|t| t - ramp.t50()), out.slew(), res.supply_energy.iter().sum(), t50))
}

/// Characterizes one cell from its geometry, MEOL parasitics and tuned devices.
pub fn characterize_cell(
    cell: &CellDef,
    geom: &CellGeometry,
    meol: &MeolParasitics,
    vs_n: &VsParams,
    vs_p: &VsParams,
    v_dd: f64,
) -> Result<CharTable> {
    let kit = DeviceKit::new(geom, *meol, vs_n, vs_p, v_dd)?;
    let k = f64::from(cell.size);
    let loads: Vec<f64> = LOAD_GRID_X1.iter().map(|l| l * k).collect();
    let n_stages_inverting = cell.kind.stages() % 2 == 1;
    let mut arcs = Vec::new();
    let mut setup: f64 = 0.0;
    for (idx, (pin, _)) in cell.kind.arcs().iter().enumerate() {
        let chain = arc_chain(&kit, cell, idx);
        let mut rise = TimingTables { delay: Grid::new(), slew: Grid::new(), energy: Grid::new() };
        let mut fall = rise.clone();
        for out_rising in [true, false] {
            let rising_in = out_rising != n_stages_inverting;
            let tables = if out_rising { &mut rise } else { &mut fall };
            for (i, &s) in SLEW_GRID.iter().enumerate() {
                for (j, &l) in loads.iter().enumerate() {
                    let arc_id = format!("{}/{}->Z/{}", cell.name(), pin, if out_rising { "rise" } else { "fall" });
                    let (d, sl, e, nodes) = run(&chain, l, rising_in, s, v_dd, &arc_id)?;
                    let (Some(d), Some(sl)) = (d, sl) else {
                        return Err(Error::Characterization { arc: arc_id, msg: "output never crossed".into() });
                    };
                    tables.delay.values[i][j] = d;
                    tables.slew.values[i][j] = sl;
                    tables.energy.values[i][j] = e;
                    if cell.kind == GateKind::Dff && i == 1 && j == 0 {
                        setup = setup.max(nodes[1]);
                    }
                }
            }
        }
        arcs.push(ArcTables { pin: pin.to_string(), rise, fall });
    }

    let first = arc_chain(&kit, cell, 0);
    let last = first.last().expect("non-empty chain");
    let (pin_cap, data_pin_cap) = pin_caps(&kit, cell);
    let fingers = f64::from(cell.kind.device_pairs(cell.size));
    Ok(CharTable {
        slews: SLEW_GRID.to_vec(),
        loads,
        arcs,
        leakage: kit.off_current() * fingers * v_dd,
        pin_cap,
        data_pin_cap,
        c_out: last.c_ground + last.c_miller,
        setup,
        i_on_up: last.up.on_current(v_dd),
        i_on_down: last.down.on_current(v_dd),
    })
}
