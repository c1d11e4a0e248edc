// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::Arc;

use dispel_core::design_flow::netlist::{generate_netlist, Netlist, SynthConfig};
use dispel_core::design_flow::optimize::{optimal_spacing, drive_resistance, optimize, OptConfig};
use dispel_core::design_flow::place::{random_placement, Floorplan, Placement};
use dispel_core::design_flow::route::{elmore_ladder, NetRoute};
use dispel_core::design_flow::sta::{analyze, slack_ns, t_cp_by_enumeration, StaConfig};
use dispel_core::design_flow::*;
use dispel_core::interconnect::TechStack;
use dispel_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ideal_design(nl: Netlist) -> Design {
    let lib = common::lib07();
    let nl = Arc::new(nl);
    let fp = Floorplan::for_cell_area(10.0, 0.5, 1.0, lib.dims.cell_height() * 1e-3).unwrap();
    let widths = cell_widths(&nl, lib).unwrap();
    let p = random_placement(&nl, fp, &widths, 1).unwrap();
    let routes = vec![NetRoute::ideal(); nl.n_nets()];
    Design::new(nl, Arc::new(p), Arc::new(routes), lib).unwrap()
}

fn small_random_design(seed: u64) -> Design {
    let lib = common::lib07();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=6);
    let n_gates = rng.random_range(depth..=20);
    let nl = Arc::new(
        generate_netlist(&SynthConfig {
            n_gates,
            depth,
            register_ratio: 0.2,
            seed,
            ..Default::default()
        })
        .unwrap(),
    );
    let fp = initial_floorplan(&nl, lib, 0.3, 1.0).unwrap();
    // stretch the die so that some nets reach the upper layers
    let fp = Floorplan::for_cell_area(fp.area() * 400.0, 1.0, 1.0, fp.row_height).unwrap();
    let widths = cell_widths(&nl, lib).unwrap();
    let p = random_placement(&nl, fp, &widths, seed).unwrap();
    let mut d = routed_design(nl, lib, &TechStack::default_5nm(), p).unwrap();
    for r in d.repeaters.iter_mut() {
        *r = rng.random_range(0..3);
    }
    for c in d.cells.iter_mut() {
        let def = lib.cells[*c].def;
        let sizes = def.kind.sizes();
        *c = lib.index(dispel_core::cell_library::CellDef::new(def.kind, sizes[rng.random_range(0..sizes.len())])).unwrap();
    }
    d
}

#[test]
fn f_ach_examples() {
    assert_eq!(f_ach(2.0, 0.0).unwrap(), 2.0);
    assert!((f_ach(2.0, 0.1).unwrap() - 2.5).abs() < 2.5e-12);
    assert!((f_ach(2.0, -0.1).unwrap() - 1.0 / 0.6).abs() < 1.7e-12);
    assert!(matches!(f_ach(2.0, 0.5), Err(Error::Domain(_))));
    assert!(matches!(f_ach(2.0, 0.7), Err(Error::Domain(_))));
}

proptest! {
    #[test]
    fn f_ach_increases_with_slack(f in 0.2f64..5.0, a in -1.0f64..0.19, b in -1.0f64..0.19) {
        prop_assume!(a < b);
        prop_assert!(f_ach(f, a).unwrap() < f_ach(f, b).unwrap());
    }

    #[test]
    fn ladder_elmore_matches_shared_resistance_sum(
        rs in prop::collection::vec(0.0f64..1e3, 1..8),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cs: Vec<f64> = rs.iter().map(|_| rng.random_range(0.0..2.0)).collect();
        // node k sees the far end through the resistance shared with it
        let far = rs.len() - 1;
        let mut oracle = 0.0;
        for k in 0..rs.len() {
            let shared: f64 = rs[..=k.min(far)].iter().sum();
            oracle += shared * cs[k];
        }
        let t = elmore_ladder(&rs, &cs);
        prop_assert!((t - oracle * 1e-3).abs() <= 1e-12 * (1.0 + t.abs()));
    }
}

#[test]
fn single_inverter_between_registers_uses_the_table() {
    let lib = common::lib07();
    let nl = Netlist::parse("reg r0 d=y q=a\ngate g0 INV_X1 in=a out=y\n").unwrap();
    let d = ideal_design(nl);
    let cfg = StaConfig::default();
    let t = analyze(&d, lib, &cfg).unwrap();
    let dff = lib.by_name("DFF_X1").unwrap();
    let inv = lib.by_name("INV_X1").unwrap();
    let q = dff.table.worst(0, cfg.clock_slew, inv.table.pin_cap);
    let g = inv.table.worst(0, q.slew, dff.table.data_pin_cap);
    assert_eq!(t.t_cp, q.delay + g.delay + dff.table.setup);
}

#[test]
fn slack_changes_sign_at_the_period_budget() {
    let t_cp = 400.0;
    let unc = 0.05;
    let f_star = (1.0 - unc) * 1e3 / t_cp;
    assert!(slack_ns(t_cp, f_star * 0.999, unc) > 0.0);
    assert!(slack_ns(t_cp, f_star * 1.001, unc) < 0.0);
    assert!(slack_ns(t_cp, f_star, unc).abs() < 1e-12);
}

#[test]
fn sta_equals_path_enumeration_on_small_netlists() {
    let lib = common::lib07();
    let cfg = StaConfig::default();
    for seed in 0..50 {
        let d = small_random_design(seed);
        let graph = analyze(&d, lib, &cfg).unwrap().t_cp;
        let brute = t_cp_by_enumeration(&d, lib, &cfg).unwrap();
        assert_eq!(graph.to_bits(), brute.to_bits(), "seed {seed}");
    }
}

#[test]
fn wire_free_design_has_no_rc_share() {
    let lib = common::lib07();
    let nl = generate_netlist(&SynthConfig { n_gates: 30, depth: 5, seed: 3, ..Default::default() }).unwrap();
    let d = ideal_design(nl);
    let cfg = StaConfig::default();
    let t = analyze(&d, lib, &cfg).unwrap();
    assert_eq!(rc_contribution(&d, lib, &cfg, &t), (0.0, 0.0));
}

#[test]
fn doubling_wire_resistance_raises_its_share() {
    let lib = common::lib07();
    let d = small_random_design(7);
    let base = StaConfig::default();
    let doubled = StaConfig { r_scale: 2.0, ..base };
    let t1 = analyze(&d, lib, &base).unwrap();
    let t2 = analyze(&d, lib, &doubled).unwrap();
    let (r1, _) = rc_contribution(&d, lib, &base, &t1);
    let (r2, _) = rc_contribution(&d, lib, &doubled, &t2);
    assert!(r1 > 0.0 && r2 > r1, "{r1} {r2}");
}

fn long_wire_design(l_factor: f64) -> (Design, f64) {
    let lib = common::lib07();
    let stack = TechStack::default_5nm();
    let nl = Arc::new(Netlist::parse("reg r0 d=y q=a\ngate g0 INV_X1 in=a out=y\n").unwrap());
    let table = route::LayerTable::new(&stack).unwrap();
    let (rw, cw) = table.rc[6];
    let buf = lib.index(REPEATER).unwrap();
    let l_opt = optimal_spacing(drive_resistance(lib, buf), lib.cells[buf].table.pin_cap, rw, cw);
    let len = l_factor * l_opt;
    let fp = Floorplan::for_cell_area(len * len * 0.01, 0.01, 1.0, lib.dims.cell_height() * 1e-3).unwrap();
    let p = Placement { floorplan: fp, x: vec![0.0, len], y: vec![0.0, 0.0], io: vec![] };
    (routed_design(nl, lib, &stack, p).unwrap(), len)
}

#[test]
fn long_wire_gets_repeaters() {
    let lib = common::lib07();
    let (mut d, len) = long_wire_design(10.0);
    let cfg = StaConfig::default();
    let y = d.netlist.instances[1].output;
    assert!(d.routes[y].length >= len * 0.999);
    let before = analyze(&d, lib, &cfg).unwrap().t_cp;
    let (after, trace) = optimize(&mut d, lib, &cfg, &OptConfig { max_utilization: 1.0, ..Default::default() }, 0.0).unwrap();
    assert!(d.buffer_count() >= 1, "{:?}", trace.moves);
    assert!(after.t_cp < before);
}

#[test]
fn met_target_leaves_design_unchanged() {
    let lib = common::lib07();
    let d0 = small_random_design(11);
    let mut d = d0.clone();
    let (t, trace) = optimize(&mut d, lib, &StaConfig::default(), &OptConfig::default(), 1e9).unwrap();
    assert!(trace.moves.is_empty());
    assert_eq!(d.cells, d0.cells);
    assert_eq!(d.repeaters, d0.repeaters);
    assert_eq!(trace.t_cp, vec![t.t_cp]);
}

#[test]
fn power_identities() {
    let lib = common::lib07();
    let d = small_random_design(5);
    let cfg = FlowConfig::default();
    let t = analyze(&d, lib, &cfg.sta).unwrap();
    let r = evaluate(&d, lib, &cfg, &t, 1.0, "h").unwrap();
    assert!((r.energy * r.f_ach - r.power).abs() <= 1e-15 * r.power);
    // V² law of the capacitive terms
    let p1 = power(&d, lib, &cfg.sta, &t, 0.7, 2.0, 0.1);
    let p2 = power(&d, lib, &cfg.sta, &t, 0.35, 2.0, 0.1);
    assert!((p2.switching_mw - p1.switching_mw / 4.0).abs() < 1e-12 * p1.switching_mw);
    assert!((p2.clock_mw - p1.clock_mw / 4.0).abs() < 1e-12 * p1.clock_mw);
    // leakage makes energy per cycle grow without bound as f falls
    let mut prev = 0.0;
    for f in [2.0, 1.0, 0.1, 0.01, 0.001] {
        let p = power(&d, lib, &cfg.sta, &t, 0.7, f, 0.1);
        let e = p.total_mw() / f;
        assert!(e > prev);
        prev = e;
    }
}

#[test]
fn default_design_flow_trends() {
    let lib = common::lib07();
    let cfg = FlowConfig::default();
    let nl = Arc::new(generate_netlist(&SynthConfig { n_gates: 1500, depth: 16, ..Default::default() }).unwrap());
    let fp = initial_floorplan(&nl, lib, cfg.utilization, cfg.aspect).unwrap();
    let base = placed_design(nl, lib, &TechStack::default_5nm(), fp, cfg.place).unwrap();
    let mut prev: Option<DesignResult> = None;
    for f in [1.0, 2.0, 3.0, 4.0, 5.0] {
        let (_, trace, r) = run_flow(&base, lib, &cfg, f, "h").unwrap();
        assert!(trace.t_cp.windows(2).all(|w| w[1] < w[0]));
        assert!(r.cell_area <= r.die_area * cfg.opt.max_utilization + 1e-9);
        if let Some(p) = prev {
            assert!(r.buffer_count >= p.buffer_count);
            assert!(r.cell_area >= p.cell_area);
        }
        assert!(r.share_c > r.share_r && r.share_r > 0.0 && r.share_c < 0.7, "{} {}", r.share_r, r.share_c);
        prev = Some(r);
    }
    let r = prev.unwrap();
    let m2 = r.layer_stats.iter().find(|l| l.level == 2).map(|l| l.avg_len_um);
    let m6 = r.layer_stats.iter().find(|l| l.level == 6).map(|l| l.avg_len_um);
    if let (Some(a), Some(b)) = (m2, m6) {
        assert!(a < b);
    }
}

#[test]
fn flow_is_deterministic() {
    let lib = common::lib07();
    let cfg = FlowConfig::default();
    let run = || {
        let nl = Arc::new(generate_netlist(&SynthConfig { n_gates: 400, depth: 8, ..Default::default() }).unwrap());
        let fp = initial_floorplan(&nl, lib, cfg.utilization, cfg.aspect).unwrap();
        let base = placed_design(nl, lib, &TechStack::default_5nm(), fp, cfg.place).unwrap();
        run_flow(&base, lib, &cfg, 4.0, "h").unwrap().2
    };
    let (a, b) = (run(), run());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
