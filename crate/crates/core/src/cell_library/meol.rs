// SPDX-License-Identifier: Apache-2.0

//! Cell-level middle-of-line parasitics.

use serde::{Deserialize, Serialize};

use super::geometry::{CellGeometry, DeviceDims, DeviceStructure};
use crate::error::Result;
use crate::interconnect::{contact_resistance, cu_resistivity, wire_rc_per_um, TechStack};

/// ε0 in fF/nm.
const EPS0_FF_PER_NM: f64 = 8.854_187_8128e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeolParasitics {
    /// One S/D contact of one finger, Ω.
    pub r_con: f64,
    /// Local interconnect (TS + MA + MB) in series with a finger's drain, Ω.
    pub r_meol_series: f64,
    /// Gate-to-contact coupling of one finger, both flanks, fF.
    pub c_g2c: f64,
    /// Gate-to-epi coupling of one finger (FinFET only), fF.
    pub c_epi: f64,
    /// Output-node local interconnect capacitance, fF.
    pub c_meol_other: f64,
}

impl MeolParasitics {
    /// Total gate-to-S/D parasitic coupling per finger, fF.
    pub fn c_gate_parasitic(&self) -> f64 {
        self.c_g2c + self.c_epi
    }
}

/// Effective per-finger source and drain contact resistance for `n_fingers`
/// parallel fingers with alternating S/D contacts; interior contacts carry the
/// current of two fingers.
pub fn finger_contact_resistances(r_con: f64, n_fingers: usize) -> (f64, f64) {
    let n = n_fingers.max(1);
    let contacts = n + 1;
    let n_source = contacts.div_ceil(2);
    let n_drain = contacts / 2;
    (
        r_con * n as f64 / n_source as f64,
        r_con * n as f64 / n_drain as f64,
    )
}

pub fn extract_meol(geom: &CellGeometry, stack: &TechStack, dims: &DeviceDims) -> Result<MeolParasitics> {
    let w_um = geom.device_width * 1e-3;
    let r_con = contact_resistance(stack.rho_con, geom.l_con, w_um)?;

    let footprint = geom.structure.footprint();
    let ts = stack.layer("TS")?;
    let ma = stack.layer("MA")?;
    let mb = stack.layer("MB")?;
    // µΩ·cm · nm / nm² = 10 Ω
    let seg = |w: f64, t: f64, len: f64| -> Result<f64> {
        Ok(cu_resistivity(w, t, stack)? * 10.0 * len / (w * t))
    };
    let r_meol_series = seg(geom.l_con, ts.thickness, 0.5 * footprint)?
        + seg(ma.min_width, ma.thickness, 0.25 * geom.height)?
        + seg(mb.min_width, mb.thickness, geom.cgp)?;

    let flank = dims.gate_height * footprint;
    let c_g2c = 2.0 * EPS0_FF_PER_NM * dims.k_spacer * flank / geom.l_spa;
    let c_epi = match geom.structure {
        DeviceStructure::Planar { .. } => 0.0,
        DeviceStructure::FinFet { fin, .. } => {
            2.0 * EPS0_FF_PER_NM * dims.k_spacer * footprint * fin.height / geom.l_spa
        }
    };

    let ma_couple =
        stack.fringe * 2.0 * EPS0_FF_PER_NM * ma.k_ild * ma.thickness * 0.25 * geom.height / ma.min_spacing;
    let (_, c_m1) = wire_rc_per_um(stack.layer("M1")?, stack)?;
    let c_meol_other = ma_couple + c_m1 * 0.5 * geom.height * 1e-3;

    Ok(MeolParasitics {
        r_con,
        r_meol_series,
        c_g2c,
        c_epi,
        c_meol_other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell_library::geometry::{scale_layout, CellTemplate};

    const INV: CellTemplate<'static> = CellTemplate { name: "INV_X1", gate_columns: 1 };

    fn extract(dims: &DeviceDims) -> MeolParasitics {
        let g = scale_layout(INV, dims).unwrap();
        extract_meol(&g, &TechStack::default_5nm(), dims).unwrap()
    }

    #[test]
    fn coupling_halves_when_spacer_doubles() {
        let a = extract(&DeviceDims { l_spa: 4.0, l_con: 18.0, ..DeviceDims::mos2_bp_default() });
        let b = extract(&DeviceDims { l_spa: 8.0, l_con: 10.0, ..DeviceDims::mos2_bp_default() });
        assert!(((a.c_g2c / b.c_g2c) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn planar_has_no_epi_term() {
        let planar = DeviceDims {
            structure: DeviceStructure::Planar { width: 63.0 },
            ..DeviceDims::finfet_default()
        };
        let p = extract(&planar);
        let f = extract(&DeviceDims::finfet_default());
        assert_eq!(p.c_epi, 0.0);
        assert_eq!(p.c_g2c, f.c_g2c);
        assert!(p.c_gate_parasitic() < f.c_gate_parasitic());
    }

    #[test]
    fn spacer_sweep_trades_coupling_for_contact_resistance() {
        let mut prev: Option<MeolParasitics> = None;
        for l_spa in [4.0, 6.0, 8.0, 10.0, 12.0] {
            let m = extract(&DeviceDims::mos2_bp_default().with_l_spa(l_spa));
            if let Some(p) = prev {
                assert!(m.c_g2c < p.c_g2c);
                assert!(m.r_con > p.r_con);
            }
            prev = Some(m);
        }
    }

    #[test]
    fn shared_contact_doubles_per_finger_resistance() {
        // Two parallel fingers S-D-S: each source contact carries one finger,
        // the shared drain carries both. With current I per finger the shared
        // drain drops 2·I·R, i.e. an effective 2R per finger.
        let r = 100.0;
        let i = 1e-5;
        let drop_shared = (2.0 * i) * r;
        let (rs, rd) = finger_contact_resistances(r, 2);
        assert_eq!(rs, r);
        assert!((rd - drop_shared / i).abs() < 1e-9);
        assert_eq!(finger_contact_resistances(r, 1), (r, r));
    }
}
