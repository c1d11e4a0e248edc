// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use std::sync::OnceLock;

use dispel_core::cell_library::{build_library, CellLibrary, DeviceDims};
use dispel_core::interconnect::TechStack;
use dispel_core::vsdevice::{tune_vt, VsParams};

pub fn mos2_library(v_dd: f64) -> CellLibrary {
    let n = tune_vt(&VsParams::mos2_n(), 1.0, v_dd).unwrap();
    let p = tune_vt(&VsParams::bp_p(), 1.0, v_dd).unwrap();
    build_library(&DeviceDims::mos2_bp_default(), &TechStack::default_5nm(), &n, &p, v_dd).unwrap()
}

/// MoS2/BP library at 0.7 V, built once per test binary.
pub fn lib07() -> &'static CellLibrary {
    static LIB: OnceLock<CellLibrary> = OnceLock::new();
    LIB.get_or_init(|| mos2_library(0.7))
}
