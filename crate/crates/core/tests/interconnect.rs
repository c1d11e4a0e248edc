// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use proptest::prelude::*;

use dispel_core::interconnect::{contact_resistance, cu_resistivity, via_resistance, wire_rc_per_um, TechStack};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn resistivity_never_rises_with_either_dimension(w in 5.0f64..2000.0, t in 5.0f64..2000.0, k in 1.0f64..4.0) {
        let s = TechStack::default_5nm();
        let base = cu_resistivity(w, t, &s).unwrap();
        prop_assert!(base >= s.rho_bulk);
        prop_assert!(cu_resistivity(w * k, t, &s).unwrap() <= base * (1.0 + 1e-12));
        prop_assert!(cu_resistivity(w, t * k, &s).unwrap() <= base * (1.0 + 1e-12));
    }

    #[test]
    fn contact_resistance_is_bilinear(rho in 1e-9f64..1e-7, l in 2.0f64..30.0, w in 0.01f64..2.0, a in 0.5f64..4.0) {
        let r = contact_resistance(rho, l, w).unwrap();
        let close = |x: f64, y: f64| ((x - y) / y).abs() < 1e-12;
        prop_assert!(close(contact_resistance(a * rho, l, w).unwrap(), a * r));
        prop_assert!(close(contact_resistance(rho, a * l, w).unwrap(), r / a));
        prop_assert!(close(contact_resistance(rho, l, a * w).unwrap(), r / a));
    }

    #[test]
    fn itf_round_trips(rho in 1.5f64..3.0, mfp in 20.0f64..60.0, grain in 0.1f64..0.6, x in 0.1f64..4.0, vias in any::<bool>()) {
        let mut s = TechStack::default_5nm().with_scale_vias(vias);
        s.rho_bulk = rho;
        s.mfp_lambda = mfp;
        s.grain_r = grain;
        let s = s.scale_wire_resistance(x).unwrap();
        prop_assert_eq!(TechStack::parse_itf(&s.to_itf()).unwrap(), s);
    }
}

#[test]
fn contact_resistance_grid() {
    let want = |rho: f64, l: f64, w: f64| rho / (l * 1e-7 * w * 1e-4);
    for rho in [1e-8, 2e-8, 5e-8] {
        for l in [5.0, 10.0, 20.0] {
            for w in [0.5, 1.0, 2.0] {
                let r = contact_resistance(rho, l, w).unwrap();
                assert!((r / want(rho, l, w) - 1.0).abs() < 1e-12, "{rho} {l} {w}");
            }
        }
    }
    assert!((contact_resistance(1e-8, 10.0, 1.0).unwrap() - 100.0).abs() < 1e-10);
}

#[test]
fn routing_resistance_falls_with_level_faster_than_capacitance_changes() {
    let s = TechStack::default_5nm();
    let rc: Vec<(f64, f64)> = ["M2", "M3", "M4", "M5", "M6"]
        .iter()
        .map(|n| wire_rc_per_um(s.layer(n).unwrap(), &s).unwrap())
        .collect();
    for pair in [(0, 2), (2, 4)] {
        let (lo, hi) = (rc[pair.0], rc[pair.1]);
        assert!(hi.0 < lo.0);
        assert!((hi.1 / lo.1 - 1.0).abs() < (lo.0 / hi.0 - 1.0));
    }
    for i in 0..4 {
        assert!(rc[i + 1].0 <= rc[i].0);
    }
    let vias: Vec<f64> = ["V1", "V2", "V3", "V4", "V5"]
        .iter()
        .map(|n| via_resistance(s.layer(n).unwrap(), &s).unwrap())
        .collect();
    assert!(vias[0] > vias[3]);
}

#[test]
fn scaling_leaves_the_original_untouched() {
    let s = TechStack::default_5nm();
    let before = s.clone();
    let scaled = s.scale_wire_resistance(3.0).unwrap();
    assert_eq!(s, before);
    assert_eq!(scaled.x_rw, 3.0);
}

#[test]
fn shipped_stack_file_loads_as_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default_5nm.itf");
    assert_eq!(TechStack::load_itf(&path).unwrap(), TechStack::default_5nm());
}
