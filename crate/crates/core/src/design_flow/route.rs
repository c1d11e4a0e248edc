// SPDX-License-Identifier: Apache-2.0

//! Route estimation: per-net HPWL, layer assignment by length and RC from the
//! interconnect stack.

use super::netlist::Netlist;
use super::place::{net_bbox, net_terminals, Placement};
use crate::error::Result;
use crate::interconnect::{via_resistance, wire_rc_per_um, TechStack};

/// Length thresholds in contacted gate pitches for the M2/M3 and M4/M5 pairs.
pub const SHORT_NET_CGP: f64 = 20.0;
pub const MEDIUM_NET_CGP: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetRoute {
    /// HPWL, µm.
    pub length: f64,
    pub dx: f64,
    pub dy: f64,
    /// Metal level of horizontal and vertical runs.
    pub h_level: usize,
    pub v_level: usize,
    pub vias: u32,
    /// Wire resistance (Ω) and capacitance (fF) of the full run.
    pub r_wire: f64,
    pub c_wire: f64,
    /// Via-stack resistance of one end, Ω.
    pub r_via_end: f64,
    /// Per-µm resistance and capacitance along the net (length-weighted).
    pub r_per_um: f64,
    pub c_per_um: f64,
}

impl NetRoute {
    /// A net without interconnect parasitics.
    pub fn ideal() -> Self {
        NetRoute {
            length: 0.0,
            dx: 0.0,
            dy: 0.0,
            h_level: 2,
            v_level: 3,
            vias: 0,
            r_wire: 0.0,
            c_wire: 0.0,
            r_via_end: 0.0,
            r_per_um: 0.0,
            c_per_um: 0.0,
        }
    }
}

/// Metal levels used for a net of `length` µm.
pub fn assign_layers(length: f64, cgp_um: f64) -> (usize, usize) {
    if length <= SHORT_NET_CGP * cgp_um {
        (2, 3)
    } else if length <= MEDIUM_NET_CGP * cgp_um {
        (4, 5)
    } else {
        (6, 6)
    }
}

/// Per-level wire RC and cumulative via-stack resistance, from M1 upward.
#[derive(Debug, Clone)]
pub struct LayerTable {
    /// Index by metal level (0 unused).
    pub rc: Vec<(f64, f64)>,
    /// `via_stack[k]` = V1 + … + Vk resistance.
    pub via_stack: Vec<f64>,
}

impl LayerTable {
    pub fn new(stack: &TechStack) -> Result<Self> {
        let mut rc = vec![(0.0, 0.0)];
        let mut via_stack = vec![0.0];
        for k in 1..=6 {
            rc.push(wire_rc_per_um(stack.layer(&format!("M{k}"))?, stack)?);
        }
        for k in 1..=5 {
            let r = via_resistance(stack.layer(&format!("V{k}"))?, stack)?;
            via_stack.push(via_stack[k - 1] + r);
        }
        Ok(LayerTable { rc, via_stack })
    }

    pub fn route(&self, dx: f64, dy: f64, cgp_um: f64) -> NetRoute {
        let length = dx + dy;
        let (h, v) = assign_layers(length, cgp_um);
        let top = h.max(v);
        let hops = top - 1;
        let (rh, ch) = self.rc[h];
        let (rv, cv) = self.rc[v];
        let r_wire = rh * dx + rv * dy;
        let c_wire = ch * dx + cv * dy;
        let (r_per_um, c_per_um) = if length > 0.0 {
            (r_wire / length, c_wire / length)
        } else {
            (rh, ch)
        };
        NetRoute {
            length,
            dx,
            dy,
            h_level: h,
            v_level: v,
            vias: 2 * hops as u32,
            r_wire,
            c_wire,
            r_via_end: self.via_stack[hops],
            r_per_um,
            c_per_um,
        }
    }
}

/// Routes every net of a placed design.
pub fn route_estimate(nl: &Netlist, p: &Placement, stack: &TechStack, cgp_nm: f64) -> Result<Vec<NetRoute>> {
    let table = LayerTable::new(stack)?;
    let cgp_um = cgp_nm * 1e-3;
    Ok(net_terminals(nl)
        .iter()
        .map(|t| {
            let (dx, dy) = net_bbox(p, t);
            table.route(dx, dy, cgp_um)
        })
        .collect())
}

/// Elmore delay to the far end of a ladder: resistor `i` feeds node `i`
/// which carries `cs[i]`. Ω·fF gives ps after the 1e-3 factor.
pub fn elmore_ladder(rs: &[f64], cs: &[f64]) -> f64 {
    let mut downstream = 0.0;
    let mut t = 0.0;
    for i in (0..rs.len()).rev() {
        downstream += cs[i];
        t += rs[i] * downstream;
    }
    t * 1e-3
}

/// Elmore delay (ps) of one wire segment modeled as three π sections between
/// two via stacks, driving `c_load` fF at the far end.
pub fn segment_elmore(r_wire: f64, c_wire: f64, r_via_end: f64, c_load: f64) -> f64 {
    let r3 = r_wire / 3.0;
    let c6 = c_wire / 6.0;
    elmore_ladder(
        &[r_via_end, r3, r3, r3, r_via_end],
        &[c6, 2.0 * c6, 2.0 * c6, c6, c_load],
    )
}
