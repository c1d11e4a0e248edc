// SPDX-License-Identifier: Apache-2.0

//! Fan-out-of-3 chain features: drive currents, delays and switching energy
//! of each logic gate.

use super::characterize::{gate_stage, pin_caps, DeviceKit};
use super::transient::{simulate_chain, Ramp, SimOptions};
use super::{CellDef, CellLibrary, LOGIC_GATES};
use crate::error::{Error, Result};

pub const FO3_QUANTITIES: [&str; 5] = ["ion_up_uA", "ion_down_uA", "rise_ps", "fall_ps", "energy_fJ"];
pub const FO3_LEN: usize = 30;

const CHAIN_STAGES: usize = 4;
/// Measured stage (0-based).
const PROBE: usize = 2;
const FANOUT: f64 = 3.0;
const INPUT_SLEW: f64 = 4.0;

/// Column names in gate-major, quantity-minor order.
pub fn feature_names() -> Vec<String> {
    LOGIC_GATES
        .iter()
        .flat_map(|g| FO3_QUANTITIES.iter().map(move |q| format!("{}_{q}", g.base_name())))
        .collect()
}

/// Per-gate FO3 measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fo3Gate {
    pub ion_up: f64,
    pub ion_down: f64,
    pub rise: f64,
    pub fall: f64,
    pub energy: f64,
}

pub fn fo3_gate(lib: &CellLibrary, def: CellDef) -> Result<Fo3Gate> {
    let cell = lib
        .get(def)
        .ok_or_else(|| Error::Feature(format!("library has no {}", def.name())))?;
    let kit = DeviceKit::new(&cell.geometry, cell.meol, &lib.vs_n, &lib.vs_p, lib.v_dd)?;
    let k = f64::from(def.size);
    let stage = gate_stage(&kit, def.kind, k, def.kind.arcs()[0].1);
    let (pin, _) = pin_caps(&kit, &def);
    let mut chain = vec![stage; CHAIN_STAGES];
    for i in 0..CHAIN_STAGES {
        chain[i].c_ground += if i + 1 < CHAIN_STAGES {
            (FANOUT - 1.0) * pin + pin - chain[i + 1].c_miller
        } else {
            FANOUT * pin
        };
    }
    let mut rise = 0.0;
    let mut fall = 0.0;
    let mut energy = 0.0;
    for rising_in in [true, false] {
        let ramp = Ramp::from_slew(rising_in, lib.v_dd, INPUT_SLEW, 1.0);
        let res = simulate_chain(&chain, ramp, lib.v_dd, SimOptions::default()).ok_or_else(|| {
            Error::Feature(format!("{} FO3 chain did not settle", def.name()))
        })?;
        let t = |i: usize| res.crossings[i].t50.ok_or_else(|| Error::Feature(format!("{} FO3 node {i} never switched", def.name())));
        let d = t(PROBE)? - t(PROBE - 1)?;
        // an odd number of inversions after a rising input leaves the probe falling
        if rising_in == (PROBE % 2 == 0) {
            fall = d;
        } else {
            rise = d;
        }
        energy += 0.5 * res.supply_energy[PROBE];
    }
    Ok(Fo3Gate {
        ion_up: stage.up.on_current(lib.v_dd),
        ion_down: stage.down.on_current(lib.v_dd),
        rise,
        fall,
        energy,
    })
}

/// The 30 FO3 features of the six logic gates at unit drive.
pub fn fo3_features(lib: &CellLibrary) -> Result<[f64; FO3_LEN]> {
    let mut out = [0.0; FO3_LEN];
    for (g, kind) in LOGIC_GATES.iter().enumerate() {
        let m = fo3_gate(lib, CellDef::new(*kind, 1))?;
        out[5 * g..5 * g + 5].copy_from_slice(&[m.ion_up, m.ion_down, m.rise, m.fall, m.energy]);
    }
    Ok(out)
}
