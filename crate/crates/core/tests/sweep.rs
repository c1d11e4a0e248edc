// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::OnceLock;

use dispel_core::design_flow::netlist::Netlist;
use dispel_core::design_flow::{run_flow, FlowConfig};
use dispel_core::error::Error;
use dispel_core::sweep::dataset::*;
use dispel_core::sweep::*;
use proptest::prelude::*;

fn pt(f: f64, e: f64) -> EFPoint {
    EFPoint { f_ach: f, energy: e, area: 1.0, v_dd: 0.7, provenance: format!("{f}/{e}") }
}

fn dominated(p: &EFPoint, by: &EFPoint) -> bool {
    by.f_ach >= p.f_ach && by.energy <= p.energy && (by.f_ach > p.f_ach || by.energy < p.energy)
}

fn brute_force(points: &[EFPoint]) -> Vec<(f64, f64)> {
    let mut keep: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominated(p, q)))
        .map(|p| (p.f_ach, p.energy))
        .collect();
    keep.sort_by(|a, b| a.0.total_cmp(&b.0));
    keep.dedup();
    keep
}

#[test]
fn frontier_examples() {
    let one = pareto_frontier(&[pt(1.0, 2.0)]);
    assert_eq!(one, vec![pt(1.0, 2.0)]);
    let f = pareto_frontier(&[pt(1.0, 2.0), pt(1.0, 3.0), pt(2.0, 2.5)]);
    let fe: Vec<(f64, f64)> = f.iter().map(|p| (p.f_ach, p.energy)).collect();
    assert_eq!(fe, vec![(1.0, 2.0), (2.0, 2.5)]);
}

#[test]
fn frontier_ties_prefer_lower_area_then_lower_supply() {
    let mut a = pt(1.0, 1.0);
    a.area = 5.0;
    let mut b = pt(1.0, 1.0);
    b.area = 4.0;
    b.v_dd = 0.9;
    let mut c = pt(1.0, 1.0);
    c.area = 4.0;
    c.v_dd = 0.6;
    let f = pareto_frontier(&[a, b, c.clone()]);
    assert_eq!(f, vec![c]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn frontier_matches_brute_force(raw in prop::collection::vec((1u8..30, 1u8..30), 1..40)) {
        let points: Vec<EFPoint> = raw.iter().map(|&(f, e)| pt(f64::from(f) * 0.1, f64::from(e) * 0.1)).collect();
        let front = pareto_frontier(&points);
        let got: Vec<(f64, f64)> = front.iter().map(|p| (p.f_ach, p.energy)).collect();
        prop_assert_eq!(&got, &brute_force(&points));
        prop_assert_eq!(pareto_frontier(&front), front.clone());
        prop_assert!(front.windows(2).all(|w| w[0].f_ach < w[1].f_ach && w[0].energy < w[1].energy));
    }
}

#[test]
fn grids_are_inclusive() {
    let c = SweepConfig::default();
    assert_eq!(c.v_dd, vec![0.5, 0.6, 0.7, 0.8, 0.9]);
    assert_eq!(c.f_coarse.len(), 11);
    assert_eq!(c.f_coarse[10], 3.0);
    let fine = c.fine_grid(2.0);
    assert_eq!(fine.len(), 11);
    assert_eq!((fine[0], fine[10]), (1.9, 2.1));
    assert_eq!(c.fine_grid(2.004), fine);
    assert!(grid(1.0, 0.5, 0.1).is_err());
    assert!(grid(1.0, 2.0, 0.0).is_err());
}

#[test]
fn config_parsing() {
    let c = SweepConfig::parse_kv("# demo\nvdd=0.5:0.7:0.1\nf_coarse = 1, 2\nn_gates=300\nrefine=false\nseed=7\n").unwrap();
    assert_eq!(c.v_dd, vec![0.5, 0.6, 0.7]);
    assert_eq!(c.f_coarse, vec![1.0, 2.0]);
    assert_eq!(c.flow.synth.n_gates, 300);
    assert!(!c.refine);
    assert_eq!((c.flow.synth.seed, c.flow.place.seed), (7, 7));
    match SweepConfig::parse_kv("vdd=0.5\nbogus=1\n") {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(line, 2);
            assert!(msg.contains("bogus"));
        }
        other => panic!("{other:?}"),
    }
    assert!(SweepConfig::parse_kv("vdd=0.7,0.5\n").is_err());
}

fn small_cfg() -> SweepConfig {
    let mut c = SweepConfig::default();
    c.flow.synth.n_gates = 300;
    c.flow.synth.depth = 12;
    c.v_dd = vec![0.7];
    c
}

fn small_netlist() -> &'static Netlist {
    static NL: OnceLock<Netlist> = OnceLock::new();
    NL.get_or_init(|| small_cfg().netlist().unwrap())
}

#[test]
fn one_supply_one_target_gives_one_point() {
    let mut c = small_cfg();
    c.f_coarse = vec![1.0];
    c.refine = false;
    let out = ef_sweep(&c, &Technology::mos2_bp(), small_netlist()).unwrap();
    assert_eq!(out.points.len(), 1);
    assert_eq!(pareto_frontier(&out.points).len(), 1);
}

#[test]
fn sweep_counts_resolvable_frontier_and_determinism() {
    let c = small_cfg();
    let tech = Technology::mos2_bp();
    let a = ef_sweep(&c, &tech, small_netlist()).unwrap();
    assert_eq!(a.points.len(), c.v_dd.len() * (c.f_coarse.len() + 11));
    let front = pareto_frontier(&a.points);
    for p in &front {
        assert_eq!(a.results.iter().filter(|r| r.config_hash == p.provenance).count(), 1);
        assert!(p.f_ach > 0.0 && p.energy > 0.0 && p.area > 0.0);
    }
    assert!(front.windows(2).all(|w| w[1].energy >= w[0].energy));
    let b = ef_sweep(&c, &tech, small_netlist()).unwrap();
    assert_eq!(results_csv(&a.results, "# h\n"), results_csv(&b.results, "# h\n"));
    let csv = frontier_csv(&front, "");
    assert_eq!(csv.lines().count(), front.len() + 1);
}

#[test]
fn results_csv_schema() {
    let c = small_cfg();
    let lib = common::lib07();
    let nl = std::sync::Arc::new(small_netlist().clone());
    let base = base_design(&nl, lib, &Technology::mos2_bp().stack, &c.flow).unwrap();
    let (_, _, r) = run_flow(&base, lib, &c.flow, 1.0, "abc").unwrap();
    let csv = results_csv(&[r], "# manifest x\n");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# manifest x");
    assert_eq!(
        lines[1],
        "config_hash,v_dd_V,f_tar_GHz,f_ach_GHz,t_slack_ns,energy_pJ,power_mW,cell_area_um2,die_area_um2,buffer_count,avg_net_len_um,shareR,shareC"
    );
    assert_eq!(lines[2].split(',').count(), 13);
    assert!(lines[2].starts_with("abc,0.7,1,"));
}

#[test]
fn energy_at_fixed_target_rises_with_supply_above_optimum() {
    let tech = Technology::mos2_bp();
    let flow = FlowConfig { synth: small_cfg().flow.synth, ..FlowConfig::default() };
    let nl = std::sync::Arc::new(small_netlist().clone());
    let mut energies = Vec::new();
    for v in [0.7, 0.8, 0.9] {
        let lib = tech.library(v, 1.0).unwrap();
        let base = base_design(&nl, &lib, &tech.stack, &flow).unwrap();
        let (_, _, r) = run_flow(&base, &lib, &flow, 1.0, "e").unwrap();
        energies.push(r.energy);
    }
    assert!(energies.windows(2).all(|w| w[1] > w[0]), "{energies:?}");
}

#[test]
fn single_point_spacer_grid_is_its_own_argmin() {
    let mut c = small_cfg();
    c.l_spa = vec![8.0];
    c.f_coarse = vec![1.0, 2.0];
    let tech = Technology::mos2_bp();
    let d = device_opt(&c, &tech, small_netlist(), 0.7, &tech.stack).unwrap();
    assert_eq!(d.argmin_l_spa, 8.0);
    assert_eq!(d.rows.len(), 1);
    assert_eq!(d.rows[0].l_con, 10.0);
}

#[test]
fn unit_multiplier_matches_the_baseline_sweep() {
    let mut c = small_cfg();
    c.x_rw = vec![1.0];
    c.f_coarse = vec![1.0, 2.0, 3.0];
    let tech = Technology::mos2_bp();
    assert_eq!(tech.stack.scale_wire_resistance(1.0).unwrap(), tech.stack);
    let base = ef_sweep(&c, &tech, small_netlist()).unwrap();
    let x = xrw_sweep(&c, &tech, small_netlist(), 0.7, false).unwrap();
    let (edp, i) = min_edp(&base.results).unwrap();
    assert_eq!(x.rows[0].own_min_edp.to_bits(), edp.to_bits());
    assert_eq!(x.rows[0].min_edp.to_bits(), edp.to_bits());
    assert_eq!(x.rows[0].area.to_bits(), base.results[i].cell_area.to_bits());
}

#[test]
fn ring_oscillator_reference_is_linear_in_wire_resistance() {
    let tech = Technology::mos2_bp();
    let lib = common::lib07();
    let e: Vec<f64> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&x| ro_edp(lib, &tech.stack.scale_wire_resistance(x).unwrap(), 2.0).unwrap())
        .collect();
    assert!(e[1] > e[0]);
    assert!(((e[2] - e[1]) - (e[1] - e[0])).abs() < 1e-9 * e[2]);
}

#[test]
fn dataset_columns_are_frozen() {
    let cols = dataset_columns();
    assert_eq!(cols.len(), 43);
    assert_eq!(feature_columns().len(), N_FEATURES);
    assert_eq!(N_FEATURES, 41);
    assert_eq!(&cols[30..39], &INTERCONNECT_COLUMNS.map(String::from)[..]);
    assert_eq!(&cols[39..], &["v_dd", "f_ach", "label_energy", "label_area"]);
    assert!(cols.iter().all(|c| !c.starts_with("C_V")));
    assert_eq!(cols[F_ACH_INDEX], "f_ach");
    for i in R_WIRE_INDICES {
        assert!(cols[i].starts_with("R_M"));
    }
}

#[test]
fn emitted_rows_are_exactly_the_frontier() {
    let c = small_cfg();
    let tech = Technology::mos2_bp();
    let out = ef_sweep(&c, &tech, small_netlist()).unwrap();
    let lib = common::lib07();
    let fo3 = dispel_core::cell_library::fo3_features(lib).unwrap();
    let rows = emit_dataset(&[DatasetSource { fo3: &fo3, stack: &tech.stack, results: &out.results }]).unwrap();
    let front = pareto_frontier(&out.points);
    assert_eq!(rows.len(), front.len());
    for (r, p) in rows.iter().zip(&front) {
        assert_eq!(r.features.len(), 41);
        assert_eq!(r.features[..30], fo3[..]);
        assert_eq!(r.features[40], p.f_ach);
        assert_eq!(r.energy, p.energy);
        assert_eq!(r.area, p.area);
    }
    let itc = interconnect_features(&tech.stack).unwrap();
    assert_eq!(rows[0].features[30..39], itc[..]);

    let text = dataset_csv(&rows, "# manifest m\n");
    assert_eq!(parse_dataset_csv(&text).unwrap(), rows);
}

#[test]
fn dataset_parse_errors_name_line_and_column() {
    let header = dataset_columns().join(",");
    let bad_header = header.replace("R_M4", "R_M5");
    match parse_dataset_csv(&format!("# c\n{bad_header}\n")) {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(line, 2);
            assert!(msg.contains("R_M5") && msg.contains("R_M4"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
    let mut vals = vec!["1"; 43];
    vals[40] = "x";
    match parse_dataset_csv(&format!("{header}\n{}\n", vals.join(","))) {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(line, 2);
            assert!(msg.contains("f_ach"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
    assert!(parse_dataset_csv(&format!("{header}\n1,2\n")).is_err());
    assert!(parse_dataset_csv("").is_err());
}

#[test]
fn dataset_generation_shares_libraries_across_multipliers() {
    let mut c = small_cfg();
    c.f_coarse = vec![1.0, 2.0, 3.0];
    c.fine_half_width = 0.04;
    let vars = [
        DatasetVariation { transport: 1.0, rho_con: 1.0, k_spacer: 4.5, x_rw: 1.0 },
        DatasetVariation { transport: 1.0, rho_con: 1.0, k_spacer: 4.5, x_rw: 4.0 },
    ];
    let rows = generate_dataset(&c, &Technology::mos2_bp(), small_netlist(), &vars).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.features.len() == N_FEATURES));
    let r_m2: Vec<f64> = rows.iter().map(|r| r.features[R_WIRE_INDICES[0]]).collect();
    let lo = r_m2.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r_m2.iter().copied().fold(0.0, f64::max);
    assert!((hi / lo - 4.0).abs() < 1e-9);
    assert!(rows.iter().all(|r| r.features[..30] == rows[0].features[..30]));
}
