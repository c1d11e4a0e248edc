// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dispel_core::sweep::dataset::dataset_columns;
use dispel_core::vsdevice::VsParams;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dispel"));
    c.env_remove("DISPEL_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest_hash(text: &str) -> &str {
    text.lines().next().and_then(|l| l.strip_prefix("# manifest ")).expect("manifest header")
}

/// Exit code and the single stderr line of a failed run.
fn failure(args: &[&str]) -> (i32, String) {
    let o = run(args);
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("dispel: error code="), "{err}");
    (o.status.code().unwrap(), err)
}

#[test]
fn sweep_on_the_example_config_emits_three_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    ok(&["sweep", "--config", p(&configs().join("example_sweep.kv")), "--out-dir", p(&out)]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    assert_eq!(manifest["seeds"][0], 42);
    for name in ["results.csv", "frontier.csv", "features.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(manifest_hash(&text), hash, "{name}");
        assert!(text.lines().count() > 2, "{name}");
    }
    let features = fs::read_to_string(out.join("features.csv")).unwrap();
    let header = features.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, dataset_columns().join(","));

    let again = dir.path().join("b");
    ok(&["sweep", "--config", p(&configs().join("example_sweep.kv")), "--out-dir", p(&again)]);
    for name in ["results.csv", "frontier.csv", "features.csv"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }

    let svg_path = dir.path().join("ef.svg");
    ok(&["plot", "--in", p(&out.join("frontier.csv")), "--kind", "ef", "--out", p(&svg_path)]);
    check_svg(&fs::read_to_string(svg_path).unwrap());
    let area = dir.path().join("area.svg");
    ok(&["plot", "--in", p(&out.join("results.csv")), "--kind", "area-f", "--out", p(&area)]);
    check_svg(&fs::read_to_string(area).unwrap());
}

#[test]
fn seed_flag_changes_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.kv");
    fs::write(&cfg, "vdd=0.7\nf_coarse=2\nrefine=false\nn_gates=60\ndepth=6\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["sweep", "--config", p(&cfg), "--out-dir", p(&a)]);
    ok(&["--seed", "7", "sweep", "--config", p(&cfg), "--out-dir", p(&b)]);
    let ha = manifest_hash(&fs::read_to_string(a.join("results.csv")).unwrap()).to_string();
    let hb = manifest_hash(&fs::read_to_string(b.join("results.csv")).unwrap()).to_string();
    assert_ne!(ha, hb);
}

/// Tags are balanced and x tick positions increase.
fn check_svg(svg: &str) {
    assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<svg").count(), 1);
    let opens = svg.matches('<').count();
    let closes = svg.matches('>').count();
    assert_eq!(opens, closes);
    let ticks: Vec<f64> = svg
        .lines()
        .filter(|l| l.contains("class=\"xtick\""))
        .map(|l| {
            let s = l.split("x1=\"").nth(1).unwrap();
            s[..s.find('"').unwrap()].parse().unwrap()
        })
        .collect();
    assert!(ticks.len() >= 2);
    assert!(ticks.windows(2).all(|w| w[1] > w[0]), "{ticks:?}");
    assert!(svg.contains("<polyline"));
}

#[test]
fn plot_ef_on_a_frontier_is_valid_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    fs::write(
        &csv,
        "# manifest x\nf_ach_GHz,energy_pJ,area_um2,v_dd_V,config_hash\n1.0,2.0,1,0.5,a\n1.5,2.4,1,0.5,b\n2.0,3.1,1,0.6,c\n2.6,4.0,1,0.6,d\n",
    )
    .unwrap();
    let svg = dir.path().join("f.svg");
    ok(&["plot", "--in", p(&csv), "--kind", "ef", "--out", p(&svg)]);
    let text = fs::read_to_string(&svg).unwrap();
    check_svg(&text);
    assert!(text.contains("VDD = 0.5 V") && text.contains("VDD = 0.6 V") && text.contains("Pareto"));
}

/// Smooth synthetic labels in the dataset schema.
fn synthetic_dataset(path: &Path, n: usize) {
    let mut s = String::from("# manifest synthetic\n");
    s.push_str(&dataset_columns().join(","));
    s.push('\n');
    for i in 0..n {
        let t = i as f64 / n as f64;
        let mut f: Vec<f64> = (0..41).map(|j| 1.0 + 0.1 * j as f64 + ((i * (j + 3)) % 17) as f64 * 0.01).collect();
        f[39] = 0.5 + 0.4 * ((i * 7) % 5) as f64 / 4.0;
        f[40] = 1.0 + 2.0 * t;
        let e = 0.02 * f[39] * f[39] * (1.0 + 0.2 * f[40]) + 0.001 * f[3];
        let a = 100.0 + 10.0 * f[40];
        for v in &f {
            s.push_str(&format!("{v},"));
        }
        s.push_str(&format!("{e},{a}\n"));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn predict_reproduces_training_labels_within_the_validation_band() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    synthetic_dataset(&data, 200);
    let model = dir.path().join("m.json");
    let o = ok(&["train-nn", "--data", p(&data), "--target", "energy", "--out", p(&model), "--epochs", "3000"]);
    let line = String::from_utf8(o.stdout).unwrap();
    let val_err: f64 = line
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("val_rel_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(val_err < 0.05, "{line}");
    let loss = fs::read_to_string(dir.path().join("m.loss.csv")).unwrap();
    assert!(loss.starts_with("# manifest "));

    let pred = dir.path().join("p.csv");
    ok(&["predict", "--model", p(&model), "--features", p(&data), "--out", p(&pred)]);
    let text = fs::read_to_string(&pred).unwrap();
    let errs: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(3).unwrap().parse::<f64>().unwrap().abs())
        .collect();
    assert_eq!(errs.len(), 200);
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    assert!(mean <= 2.0 * val_err + 1e-3, "mean {mean} band {val_err}");

    let again = dir.path().join("m2.json");
    ok(&["train-nn", "--data", p(&data), "--target", "energy", "--out", p(&again), "--epochs", "3000"]);
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());

    let report = dir.path().join("w.json");
    ok(&["analyze-nn", "--model", p(&model), "--mode", "weights", "--out", p(&report)]);
    let w: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(w["neurons"].as_array().unwrap().len(), 40);
    let piv = dir.path().join("pv.json");
    ok(&["analyze-nn", "--model", p(&model), "--mode", "pivot", "--data", p(&data), "--out", p(&piv)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(piv).unwrap()).unwrap();
    assert_eq!(v["pivot"]["classes"].as_array().unwrap().len(), 20);
    assert_eq!(v["curve"].as_array().unwrap().len(), 41);
}

#[test]
fn fit_characterize_and_run_flow_chain() {
    let dir = tempfile::tempdir().unwrap();
    let fitted = dir.path().join("n.dev");
    ok(&[
        "fit-device",
        "--iv",
        p(&configs().join("mos2_n_iv.csv")),
        "--fixed",
        p(&configs().join("mos2_n.fixed")),
        "--out",
        p(&fitted),
    ]);
    let got = VsParams::from_kv(&fs::read_to_string(&fitted).unwrap()).unwrap();
    let want = VsParams::from_kv(&fs::read_to_string(configs().join("mos2_n.dev")).unwrap()).unwrap();
    assert!((got.v / want.v - 1.0).abs() < 0.02, "{} {}", got.v, want.v);
    assert!((got.mu / want.mu - 1.0).abs() < 0.02, "{} {}", got.mu, want.mu);
    assert!(dir.path().join("n.dev.manifest.json").exists());

    let lib = dir.path().join("lib");
    ok(&[
        "characterize",
        "--tech",
        p(&configs().join("default_5nm.itf")),
        "--ndev",
        p(&fitted),
        "--pdev",
        p(&configs().join("bp_p.dev")),
        "--dims",
        p(&configs().join("planar.dims")),
        "--vdd",
        "0.7",
        "--out",
        p(&lib),
    ]);
    for f in ["library.json", "manifest.csv", "fo3.csv", "manifest.json", "cells/INV_X1.csv"] {
        assert!(lib.join(f).exists(), "{f}");
    }
    let inv = fs::read_to_string(lib.join("cells/INV_X1.csv")).unwrap();
    assert!(inv.starts_with("# manifest ") && inv.contains("delay_ps") && inv.contains("energy_fJ"));

    let synth = dir.path().join("synth.kv");
    fs::write(&synth, "n_gates=80\ndepth=6\n").unwrap();
    let nl = dir.path().join("n.net");
    let row = dir.path().join("row.csv");
    ok(&[
        "run-flow", "--synth", p(&synth), "--lib", p(&lib), "--ftar", "2", "--out", p(&row), "--emit-netlist", p(&nl),
    ]);
    let text = fs::read_to_string(&row).unwrap();
    assert_eq!(text.lines().count(), 3);
    let o = ok(&["run-flow", "--netlist", p(&nl), "--lib", p(&lib), "--ftar", "2"]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    let cols = |t: &str| t.lines().nth(2).unwrap().split(',').skip(1).map(str::to_string).collect::<Vec<_>>();
    assert_eq!(cols(&stdout), cols(&text));
}

#[test]
fn errors_are_single_lines_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.kv");
    let (code, err) = failure(&["sweep", "--config", p(&missing), "--out-dir", p(dir.path())]);
    assert_eq!(code, 4, "{err}");
    assert!(err.contains("kind=io") && err.contains("nope.kv"));

    let bad = dir.path().join("bad.kv");
    fs::write(&bad, "vdd=0.7\nbogus=1\n").unwrap();
    let (code, err) = failure(&["sweep", "--config", p(&bad), "--out-dir", p(dir.path())]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2") && err.contains("bogus"), "{err}");

    let (code, _) = failure(&["sweep", "--no-such-flag"]);
    assert_eq!(code, 2);

    let o = bin().env("DISPEL_THREADS", "zero").args(["plot", "--in", "x", "--kind", "ef", "--out", "y"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let data = dir.path().join("d.csv");
    synthetic_dataset(&data, 120);
    let (code, err) = failure(&[
        "train-nn", "--data", p(&data), "--target", "area", "--out", p(&dir.path().join("m.json")), "--epochs", "50", "--lr",
        "1e150",
    ]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("diverged"));

    let short = dir.path().join("s.csv");
    fs::write(&short, "INV_ion_up_uA,oops\n1,2\n").unwrap();
    let model = dir.path().join("m.json");
    let (code, err) = failure(&["predict", "--model", p(&model), "--features", p(&short)]);
    assert_eq!(code, 4, "{err}");
    let (code, err) = failure(&["train-nn", "--data", p(&short), "--target", "energy", "--out", p(&model)]);
    assert_eq!(code, 2);
    assert!(err.contains("kind=config"), "{err}");

    let (code, err) = failure(&["analyze-nn", "--model", p(&model), "--mode", "pivot"]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn threads_env_var_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    fs::write(&csv, "x_rw,min_edp_pJns,ro_edp_fJps\n0.5,1,1\n1,1.2,2\n2,1.5,4\n").unwrap();
    let o = bin()
        .env("DISPEL_THREADS", "1")
        .args(["plot", "--in", p(&csv), "--kind", "edp-xrw", "--out", p(&dir.path().join("x.svg"))])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
