// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use dispel_core::vsdevice::{
    drain_current, fit_iv, thermal_voltage, tune_vt, FitFixed, IvPoint, Polarity, VsParams,
};
use dispel_core::Error;

fn table_devices() -> [VsParams; 4] {
    [
        VsParams::mos2_n(),
        VsParams::bp_p(),
        VsParams::si_finfet(Polarity::N),
        VsParams::si_finfet(Polarity::P),
    ]
}

/// Biases in the n-normalized frame for any polarity.
fn id(p: &VsParams, vgs: f64, vds: f64) -> f64 {
    match p.polarity {
        Polarity::N => drain_current(p, vgs, vds).unwrap(),
        Polarity::P => drain_current(p, -vgs, -vds).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn current_is_monotone_in_both_biases(dev in 0usize..4, vgs in -0.3f64..1.2, vds in 0.001f64..1.0, dv in 0.001f64..0.2) {
        let p = tune_vt(&table_devices()[dev], 1.0, 0.7).unwrap();
        let base = id(&p, vgs, vds);
        prop_assert!(base > 0.0);
        prop_assert!(id(&p, vgs + dv, vds) > base);
        prop_assert!(id(&p, vgs, vds + dv) >= base);
    }

    #[test]
    fn current_is_smooth_in_gate_bias(vgs in -0.2f64..1.0, vds in 0.01f64..0.9) {
        let p = VsParams::mos2_n();
        let d = |h: f64| (id(&p, vgs + h, vds) - id(&p, vgs - h, vds)) / (2.0 * h);
        let (coarse, fine) = (d(2e-4), d(1e-4));
        prop_assert!((coarse - fine).abs() <= 1e-4 * fine.abs(), "{coarse} {fine}");
    }

    #[test]
    fn subthreshold_slope_is_the_configured_swing(dev in 0usize..4, ss in 62.0f64..110.0, depth in 0.0f64..0.15) {
        let mut p = table_devices()[dev];
        p.ss = ss;
        let n_phi = p.body_factor() * thermal_voltage(p.temperature);
        let vds = 0.05;
        let v_top = p.v_t0 - p.dibl * vds - 3.0 * n_phi - depth;
        let h = 0.01;
        let slope = (id(&p, v_top, vds).log10() - id(&p, v_top - h, vds).log10()) / h;
        let want = 1.0 / (ss * 1e-3);
        prop_assert!((slope / want - 1.0).abs() < 0.05, "{slope} vs {want}");
    }

    #[test]
    fn tune_vt_hits_target_and_is_idempotent(dev in 0usize..4, i_off in 0.05f64..50.0, v_dd in 0.4f64..0.9) {
        let p = table_devices()[dev];
        let t = tune_vt(&p, i_off, v_dd).unwrap();
        let leak = id(&t, 0.0, v_dd) * 1e3;
        prop_assert!((leak / i_off - 1.0).abs() < 1e-6, "{leak} {i_off}");
        let again = tune_vt(&t, i_off, v_dd).unwrap();
        prop_assert!((again.v_t0 - t.v_t0).abs() < 1e-9);
        prop_assert_eq!(VsParams { v_t0: p.v_t0, ..t }, p);
    }

    #[test]
    fn device_file_round_trips(v in 0.5e7f64..3e7, mu in 50.0f64..800.0, vt in 0.1f64..0.6, dibl in 0.0f64..0.2) {
        let p = VsParams { v, mu, v_t0: vt, dibl, ..VsParams::mos2_n() };
        prop_assert_eq!(VsParams::from_kv(&p.to_kv()).unwrap(), p);
    }
}

fn iv_grid(p: &VsParams) -> Vec<IvPoint> {
    let mut pts = Vec::new();
    for vds in [0.05, 0.2, 0.45, 0.7] {
        for k in 0..=14 {
            let vgs = 0.05 * k as f64;
            pts.push(IvPoint { v_gs: vgs, v_ds: vds, i_d: id(p, vgs, vds) });
        }
    }
    pts
}

#[test]
fn fit_recovers_every_table_device() {
    for dev in table_devices() {
        let truth = tune_vt(&dev, 1.0, 0.7).unwrap();
        let fixed = FitFixed { polarity: Polarity::N, l_gate: truth.l_gate, c_inv: truth.c_inv, ss: truth.ss };
        let fit = fit_iv(&iv_grid(&truth), fixed).unwrap();
        assert!((fit.params.v / truth.v - 1.0).abs() < 0.02, "{dev:?}: v {}", fit.params.v);
        assert!((fit.params.mu / truth.mu - 1.0).abs() < 0.02, "{dev:?}: mu {}", fit.params.mu);
        assert!(fit.rms_rel_error < 1e-3);
    }
}

#[test]
fn fixed_parameter_file() {
    let f = FitFixed::from_kv("# fixed\npolarity=p\nl_gate=10\nc_inv=4.26\nss=70\n").unwrap();
    assert_eq!(f, FitFixed { polarity: Polarity::P, l_gate: 10.0, c_inv: 4.26, ss: 70.0 });
    assert!(matches!(FitFixed::from_kv("polarity=n\nl_gate=10\nc_inv=4\n"), Err(Error::Parse { .. })));
    assert!(matches!(FitFixed::from_kv("polarity=n\nl_gate=10\nc_inv=4\nss=70\nv=1"), Err(Error::Parse { line: 5, .. })));
    assert!(FitFixed::from_kv("polarity=n\nl_gate=-1\nc_inv=4\nss=70").is_err());
}
