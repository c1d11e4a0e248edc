// SPDX-License-Identifier: Apache-2.0

//! `dispel`: device-to-system evaluation pipeline.

mod figures;
mod io;
mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dispel_core::cell_library::{build_library, fo3_features, CellLibrary, DeviceDims};
use dispel_core::design_flow::netlist::Netlist;
use dispel_core::design_flow::{run_flow, FlowConfig};
use dispel_core::interconnect::TechStack;
use dispel_core::nn_predictor::analysis::{
    analyze_weights, curve_shape, find_pivot, linspace, predict_curve, relu_compare, CurveShape, PivotReport,
    THETA_HI, THETA_LO,
};
use dispel_core::nn_predictor::{build_mlp, train, Activation, Dataset, Mlp, Target, TrainConfig, TrainReport, DEFAULT_SIZES};
use dispel_core::sweep::dataset::{
    dataset_csv, default_variations, feature_columns, generate_dataset, parse_dataset_csv, FeatureRow, F_ACH_INDEX,
    LABEL_COLUMNS, N_FEATURES,
};
use dispel_core::sweep::{
    base_design, device_opt, ef_sweep, frontier_csv, pareto_frontier, results_csv, xrw_sweep, EFPoint, SweepConfig,
    Technology,
};
use dispel_core::vsdevice::{fit_iv, read_iv_csv, tune_vt, FitFixed, VsParams};
use dispel_core::{Error, Result};

use crate::figures::{figure, PlotKind};
use crate::io::{create_dir, Table};
use crate::manifest::{manifest_path_for_file, Recorder};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "dispel", version, about = "Device-to-system performance evaluation")]
struct Cli {
    /// Seed for every random choice; overrides a seed given in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extracts compact-model parameters from I-V samples.
    FitDevice {
        #[arg(long)]
        iv: PathBuf,
        /// key=value file with polarity, l_gate, c_inv, ss.
        #[arg(long)]
        fixed: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Builds and characterizes a cell library.
    Characterize {
        #[arg(long)]
        tech: PathBuf,
        #[arg(long)]
        ndev: PathBuf,
        #[arg(long)]
        pdev: PathBuf,
        #[arg(long)]
        dims: PathBuf,
        #[arg(long)]
        vdd: f64,
        /// Retunes both thresholds to this off-current, nA/um.
        #[arg(long)]
        i_off: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Places, routes and optimizes one netlist at one target frequency.
    RunFlow {
        #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
        netlist: Option<PathBuf>,
        /// Sweep-style config whose generator and flow keys are used.
        #[arg(long)]
        synth: Option<PathBuf>,
        /// Flow keys for a netlist file, in the sweep config syntax.
        #[arg(long, conflicts_with = "synth")]
        flow: Option<PathBuf>,
        /// Library dump directory.
        #[arg(long)]
        lib: PathBuf,
        /// Routing stack; the built-in stack when absent.
        #[arg(long)]
        itf: Option<PathBuf>,
        #[arg(long)]
        ftar: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes the generated netlist here.
        #[arg(long, requires = "synth")]
        emit_netlist: Option<PathBuf>,
    },
    /// Energy-frequency sweep with optional device and wire studies.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        tech: TechArgs,
        #[arg(long, value_enum)]
        study: Vec<Study>,
        /// Supply of the studies, V.
        #[arg(long, default_value_t = 0.7)]
        study_vdd: f64,
        /// Wire-resistance multiplier of the low-resistance stack in the
        /// spacer study.
        #[arg(long, default_value_t = 0.1)]
        study_low_rw: f64,
        /// Scales via resistance along with wires in the studies.
        #[arg(long)]
        scale_vias: bool,
    },
    /// Generates a training set from perturbed technologies.
    Dataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tech: TechArgs,
    },
    /// Trains the surrogate network.
    TrainNn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        target: TargetArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        epochs: usize,
        #[arg(long, value_enum, default_value_t = ActArg::Softplus)]
        activation: ActArg,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
    },
    /// Predicts labels for feature rows.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Label column compared against, when present.
        #[arg(long, value_enum, default_value_t = TargetArg::Energy)]
        target: TargetArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weight, pivot-neuron or activation-function report.
    AnalyzeNn {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Feature CSV; required by pivot and relu-compare.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TargetArg::Energy)]
        target: TargetArg,
        #[arg(long, default_value_t = 50_000)]
        epochs: usize,
        /// Supply of the base row for curves, V.
        #[arg(long, default_value_t = 0.7)]
        vdd: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Renders a CSV as an SVG chart.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct TechArgs {
    #[arg(long = "tech", value_enum, default_value_t = TechKind::Mos2Bp)]
    kind: TechKind,
    #[arg(long)]
    itf: Option<PathBuf>,
    #[arg(long)]
    ndev: Option<PathBuf>,
    #[arg(long)]
    pdev: Option<PathBuf>,
    #[arg(long)]
    dims: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TechKind {
    Mos2Bp,
    SiFinfet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Study {
    /// Minimum EDP against spacer length.
    Lspa,
    /// Minimum EDP against wire-resistance multiplier.
    Xrw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Energy,
    Area,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Target {
        match t {
            TargetArg::Energy => Target::Energy,
            TargetArg::Area => Target::Area,
        }
    }
}

impl TargetArg {
    fn label_column(self) -> &'static str {
        match self {
            TargetArg::Energy => LABEL_COLUMNS[0],
            TargetArg::Area => LABEL_COLUMNS[1],
        }
    }

    fn unit(self) -> &'static str {
        match self {
            TargetArg::Energy => "pJ",
            TargetArg::Area => "um2",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ActArg {
    Softplus,
    Relu,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Weights,
    Pivot,
    ReluCompare,
}

/// Exit code and kind tag of an error.
fn classify(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Io(_) => (4, "io"),
        Error::Convergence(_) | Error::Fit(_) | Error::Divergence { .. } | Error::Characterization { .. } => {
            (3, "numeric")
        }
        Error::Flow { source, .. } => classify(source),
        Error::Parse { .. } | Error::Config(_) | Error::Dataset(_) => (2, "config"),
        _ => (2, "domain"),
    }
}

fn report(code: u8, kind: &str, msg: &str) -> ExitCode {
    let msg = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("dispel: error code={code} kind={kind} msg={}", serde_json::to_string(&msg).expect("string serializes"));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            return report(2, "usage", &first);
        }
    };
    if let Err(e) = init_threads() {
        let (c, k) = classify(&e);
        return report(c, k, &e.to_string());
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (c, k) = classify(&e);
            report(c, k, &e.to_string())
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("DISPEL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("DISPEL_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.cmd {
        Command::FitDevice { iv, fixed, out } => cmd_fit_device(&iv, &fixed, &out),
        Command::Characterize { tech, ndev, pdev, dims, vdd, i_off, out } => {
            cmd_characterize(&tech, &ndev, &pdev, &dims, vdd, i_off, &out)
        }
        Command::RunFlow { netlist, synth, flow, lib, itf, ftar, out, emit_netlist } => cmd_run_flow(
            seed,
            netlist.as_deref(),
            synth.as_deref(),
            flow.as_deref(),
            &lib,
            itf.as_deref(),
            ftar,
            out.as_deref(),
            emit_netlist.as_deref(),
        ),
        Command::Sweep { config, out_dir, tech, study, study_vdd, study_low_rw, scale_vias } => {
            cmd_sweep(seed, &config, &out_dir, &tech, &study, study_vdd, study_low_rw, scale_vias)
        }
        Command::Dataset { config, out, tech } => cmd_dataset(seed, &config, &out, &tech),
        Command::TrainNn { data, target, out, epochs, activation, lr } => {
            cmd_train(seed.unwrap_or(DEFAULT_SEED), &data, target, &out, epochs, activation, lr)
        }
        Command::Predict { model, features, target, out } => cmd_predict(&model, &features, target, out.as_deref()),
        Command::AnalyzeNn { model, mode, data, target, epochs, vdd, out } => cmd_analyze(
            seed.unwrap_or(DEFAULT_SEED),
            &model,
            mode,
            data.as_deref(),
            target,
            epochs,
            vdd,
            out.as_deref(),
        ),
        Command::Plot { input, kind, out } => cmd_plot(&input, kind, &out),
    }
}

fn cmd_fit_device(iv: &Path, fixed: &Path, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("fit-device");
    let points = read_iv_csv(&rec.read(iv)?)?;
    let fixed = FitFixed::from_kv(&rec.read(fixed)?)?;
    let fit = fit_iv(&points, fixed)?;
    let text = format!(
        "{}# rms_rel_error={} iterations={}\n{}",
        rec.header(),
        fit.rms_rel_error,
        fit.iterations,
        fit.params.to_kv()
    );
    rec.output(out, &text)?;
    rec.finish(&manifest_path_for_file(out))?;
    println!("rms_rel_error={} iterations={}", fit.rms_rel_error, fit.iterations);
    Ok(())
}

fn cmd_characterize(itf: &Path, ndev: &Path, pdev: &Path, dims: &Path, vdd: f64, i_off: Option<f64>, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("characterize");
    let stack = TechStack::parse_itf(&rec.read(itf)?)?;
    let mut n = VsParams::from_kv(&rec.read(ndev)?)?;
    let mut p = VsParams::from_kv(&rec.read(pdev)?)?;
    let dims = DeviceDims::from_kv(&rec.read(dims)?)?;
    rec.param("vdd", vdd);
    if let Some(i) = i_off {
        rec.param("i_off", i);
        n = tune_vt(&n, i, vdd)?;
        p = tune_vt(&p, i, vdd)?;
    }
    let lib = build_library(&dims, &stack, &n, &p, vdd)?;
    create_dir(out)?;
    lib.write_dump(out, &rec.header())?;
    let fo3 = fo3_features(&lib)?;
    let mut f = rec.header();
    f.push_str(&dispel_core::cell_library::feature_names().join(","));
    f.push('\n');
    f.push_str(&fo3.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    f.push('\n');
    rec.output(&out.join("fo3.csv"), &f)?;
    for name in ["library.json", "manifest.csv"] {
        rec.output(&out.join(name), &io::read_text(&out.join(name))?)?;
    }
    rec.finish(&out.join("manifest.json"))?;
    println!("cells={} out={}", lib.cells.len(), out.display());
    Ok(())
}

fn sweep_config(rec: &mut Recorder, path: &Path, seed: Option<u64>) -> Result<SweepConfig> {
    let mut cfg = SweepConfig::parse_kv(&rec.read(path)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.flow.synth.seed = s;
        cfg.flow.place.seed = s;
    }
    rec.seed(cfg.seed);
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run_flow(
    seed: Option<u64>,
    netlist: Option<&Path>,
    synth: Option<&Path>,
    flow: Option<&Path>,
    lib_dir: &Path,
    itf: Option<&Path>,
    ftar: f64,
    out: Option<&Path>,
    emit: Option<&Path>,
) -> Result<()> {
    let mut rec = Recorder::new("run-flow");
    let lib_text = rec.read(&lib_dir.join("library.json"))?;
    let lib = CellLibrary::from_json(&lib_text)?;
    let stack = match itf {
        Some(p) => TechStack::parse_itf(&rec.read(p)?)?,
        None => TechStack::default_5nm(),
    };
    let (nl, flow_cfg): (Netlist, FlowConfig) = match (netlist, synth) {
        (Some(p), _) => {
            let nl = Netlist::parse(&rec.read(p)?)?;
            let mut f = match flow {
                Some(fp) => sweep_config(&mut rec, fp, seed)?.flow,
                None => FlowConfig::default(),
            };
            if flow.is_none() {
                let s = seed.unwrap_or(DEFAULT_SEED);
                f.place.seed = s;
                rec.seed(s);
            }
            (nl, f)
        }
        (None, Some(p)) => {
            let cfg = sweep_config(&mut rec, p, seed)?;
            (cfg.netlist()?, cfg.flow)
        }
        (None, None) => return Err(Error::Config("one of --netlist or --synth is required".into())),
    };
    if !(ftar > 0.0 && ftar.is_finite()) {
        return Err(Error::Config(format!("--ftar must be positive, got {ftar}")));
    }
    rec.param("ftar", ftar);
    let hash = rec.hash();
    let base = base_design(&Arc::new(nl.clone()), &lib, &stack, &flow_cfg)?;
    let (_, _, r) = run_flow(&base, &lib, &flow_cfg, ftar, &hash)?;
    let csv = results_csv(std::slice::from_ref(&r), &rec.header());
    if let Some(p) = emit {
        rec.output(p, &nl.to_text())?;
    }
    match out {
        Some(p) => {
            rec.output(p, &csv)?;
            rec.finish(&manifest_path_for_file(p))?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn technology(rec: &mut Recorder, t: &TechArgs) -> Result<Technology> {
    let mut tech = match t.kind {
        TechKind::Mos2Bp => Technology::mos2_bp(),
        TechKind::SiFinfet => Technology::si_finfet(),
    };
    rec.param("tech", format!("{:?}", t.kind));
    if let Some(p) = &t.itf {
        tech.stack = TechStack::parse_itf(&rec.read(p)?)?;
    }
    if let Some(p) = &t.ndev {
        tech.vs_n = VsParams::from_kv(&rec.read(p)?)?;
    }
    if let Some(p) = &t.pdev {
        tech.vs_p = VsParams::from_kv(&rec.read(p)?)?;
    }
    if let Some(p) = &t.dims {
        tech.dims = DeviceDims::from_kv(&rec.read(p)?)?;
    }
    Ok(tech)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    seed: Option<u64>,
    config: &Path,
    out_dir: &Path,
    targs: &TechArgs,
    studies: &[Study],
    study_vdd: f64,
    low_rw: f64,
    scale_vias: bool,
) -> Result<()> {
    let mut rec = Recorder::new("sweep");
    let cfg = sweep_config(&mut rec, config, seed)?;
    let tech = technology(&mut rec, targs)?;
    let mut studies = studies.to_vec();
    studies.sort_by_key(|s| *s as u8);
    studies.dedup();
    rec.param("studies", format!("{studies:?}"));
    if !studies.is_empty() {
        rec.param("study_vdd", study_vdd);
        rec.param("study_low_rw", low_rw);
        rec.param("scale_vias", scale_vias);
    }
    let nl = cfg.netlist()?;
    create_dir(out_dir)?;
    let header = rec.header();

    let out = ef_sweep(&cfg, &tech, &nl)?;
    rec.output(&out_dir.join("results.csv"), &results_csv(&out.results, &header))?;
    let mut frontier: Vec<EFPoint> = Vec::new();
    for (v, _) in &out.fo3 {
        let pts: Vec<EFPoint> = out.points.iter().filter(|p| p.v_dd == *v).cloned().collect();
        frontier.extend(pareto_frontier(&pts));
    }
    rec.output(&out_dir.join("frontier.csv"), &frontier_csv(&frontier, &header))?;
    rec.output(&out_dir.join("features.csv"), &dataset_csv(&out.features(&tech.stack)?, &header))?;

    if studies.contains(&Study::Lspa) {
        let mut s = header.clone();
        s.push_str("route,l_spa_nm,l_con_nm,min_edp_pJns,f_ach_GHz,energy_pJ,area_um2\n");
        let low = tech.stack.scale_wire_resistance(low_rw)?.with_scale_vias(scale_vias);
        for (name, stack) in [("cu".to_string(), tech.stack.clone()), (format!("x_rw={low_rw}"), low)] {
            let d = device_opt(&cfg, &tech, &nl, study_vdd, &stack)?;
            for r in &d.rows {
                s.push_str(&format!("{name},{},{},{},{},{},{}\n", r.l_spa, r.l_con, r.min_edp, r.f_ach, r.energy, r.area));
            }
        }
        rec.output(&out_dir.join("edp_lspa.csv"), &s)?;
    }
    if studies.contains(&Study::Xrw) {
        let t = xrw_sweep(&cfg, &tech, &nl, study_vdd, scale_vias)?;
        let mut s = header.clone();
        s.push_str(&format!("# ro_wire_len_um={}\n", t.ro_wire_len));
        s.push_str("x_rw,min_edp_pJns,own_min_edp_pJns,f_ach_GHz,area_um2,buffer_count,ro_edp_fJps\n");
        for r in &t.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.x_rw, r.min_edp, r.own_min_edp, r.f_ach, r.area, r.buffer_count, r.ro_edp
            ));
        }
        rec.output(&out_dir.join("edp_xrw.csv"), &s)?;
    }
    let m = rec.finish(&out_dir.join("manifest.json"))?;
    println!("results={} frontier={} manifest={}", out.results.len(), frontier.len(), m.config_hash);
    Ok(())
}

fn cmd_dataset(seed: Option<u64>, config: &Path, out: &Path, targs: &TechArgs) -> Result<()> {
    let mut rec = Recorder::new("dataset");
    let cfg = sweep_config(&mut rec, config, seed)?;
    let tech = technology(&mut rec, targs)?;
    let nl = cfg.netlist()?;
    let rows = generate_dataset(&cfg, &tech, &nl, &default_variations())?;
    rec.output(out, &dataset_csv(&rows, &rec.header()))?;
    rec.finish(&manifest_path_for_file(out))?;
    println!("rows={}", rows.len());
    Ok(())
}

fn cmd_train(seed: u64, data: &Path, target: TargetArg, out: &Path, epochs: usize, act: ActArg, lr: f64) -> Result<()> {
    let mut rec = Recorder::new("train-nn");
    let rows = parse_dataset_csv(&rec.read(data)?)?;
    rec.seed(seed);
    rec.param("target", target.label_column());
    rec.param("epochs", epochs);
    rec.param("activation", format!("{act:?}"));
    rec.param("lr", lr);
    let ds = Dataset::from_rows(&rows, target.into())?;
    let cfg = TrainConfig { epochs, lr, seed, ..TrainConfig::default() };
    let activation = match act {
        ActArg::Softplus => Activation::Softplus,
        ActArg::Relu => Activation::Relu,
    };
    let (model, rep) = train(&build_mlp(&DEFAULT_SIZES, activation, seed)?, &ds, &cfg)?;
    rec.output(out, &model.to_json()?)?;
    let mut loss = rec.header();
    loss.push_str(&format!(
        "# best_epoch={} best_val_mse={} val_rel_rmse={} val_rel_error={} n_train={} n_val={}\n",
        rep.best_epoch,
        rep.best_val_mse,
        rep.val_rel_rmse(),
        rep.val_rel_error,
        rep.n_train,
        rep.n_val
    ));
    loss.push_str("epoch,train_mse_norm,val_mse_norm\n");
    for (i, (t, v)) in rep.train_loss.iter().zip(&rep.val_loss).enumerate() {
        loss.push_str(&format!("{i},{t},{v}\n"));
    }
    let loss_path = out.with_extension("loss.csv");
    rec.output(&loss_path, &loss)?;
    rec.finish(&manifest_path_for_file(out))?;
    println!(
        "best_epoch={} val_rel_rmse={} val_rel_error={}",
        rep.best_epoch,
        rep.val_rel_rmse(),
        rep.val_rel_error
    );
    Ok(())
}

/// Feature rows with optional label columns after the 41 features.
fn read_features(text: &str) -> Result<(Vec<Vec<f64>>, Table)> {
    let t = Table::parse(text)?;
    let names = feature_columns();
    for (i, want) in names.iter().enumerate() {
        match t.columns.get(i) {
            Some(c) if c == want => {}
            Some(c) => {
                return Err(Error::Parse { line: 1, msg: format!("column {} is `{c}`, expected `{want}`", i + 1) })
            }
            None => return Err(Error::Parse { line: 1, msg: format!("missing column `{want}`") }),
        }
    }
    let rows = (0..t.rows.len())
        .map(|r| {
            if t.rows[r].1.len() < N_FEATURES {
                return Err(Error::Parse { line: t.rows[r].0, msg: "short row".into() });
            }
            (0..N_FEATURES).map(|c| t.f64_at(r, c)).collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok((rows, t))
}

fn cmd_predict(model: &Path, features: &Path, target: TargetArg, out: Option<&Path>) -> Result<()> {
    let mut rec = Recorder::new("predict");
    let m = Mlp::from_json(&rec.read(model)?)?;
    let (rows, t) = read_features(&rec.read(features)?)?;
    rec.param("target", target.label_column());
    let labels = t.index(target.label_column()).ok().map(|_| t.column_f64(target.label_column())).transpose()?;
    let unit = target.unit();
    let mut s = rec.header();
    match labels {
        Some(_) => s.push_str(&format!("row,prediction_{unit},label_{unit},rel_error\n")),
        None => s.push_str(&format!("row,prediction_{unit}\n")),
    }
    for (i, x) in rows.iter().enumerate() {
        let p = m.predict(x)?;
        match &labels {
            Some(l) => s.push_str(&format!("{i},{p},{},{}\n", l[i], (p - l[i]) / l[i])),
            None => s.push_str(&format!("{i},{p}\n")),
        }
    }
    match out {
        Some(p) => {
            rec.output(p, &s)?;
            rec.finish(&manifest_path_for_file(p))?;
        }
        None => print!("{s}"),
    }
    Ok(())
}

/// First row at the supply nearest `vdd` and the frequency span of the set.
fn curve_base(rows: &[FeatureRow], vdd: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let v_idx = F_ACH_INDEX - 1;
    let base = rows
        .iter()
        .min_by(|a, b| (a.features[v_idx] - vdd).abs().total_cmp(&(b.features[v_idx] - vdd).abs()))
        .ok_or_else(|| Error::Dataset("feature CSV has no rows".into()))?;
    let f = rows.iter().map(|r| r.features[F_ACH_INDEX]);
    let lo = f.clone().fold(f64::INFINITY, f64::min);
    let hi = f.fold(f64::NEG_INFINITY, f64::max);
    Ok((base.features.clone(), linspace(lo, hi, 41)))
}

#[derive(Serialize)]
struct PivotOut {
    curve: Vec<f64>,
    shape: CurveShape,
    pivot: PivotReport,
}

#[derive(Serialize)]
struct TrainSummary {
    best_epoch: usize,
    best_val_mse: f64,
    val_rel_rmse: f64,
    val_rel_error: f64,
}

impl From<&TrainReport> for TrainSummary {
    fn from(r: &TrainReport) -> Self {
        TrainSummary {
            best_epoch: r.best_epoch,
            best_val_mse: r.best_val_mse,
            val_rel_rmse: r.val_rel_rmse(),
            val_rel_error: r.val_rel_error,
        }
    }
}

#[derive(Serialize)]
struct ReluOut {
    f_grid: Vec<f64>,
    curve_softplus: Vec<f64>,
    curve_relu: Vec<f64>,
    smoothness_softplus: f64,
    smoothness_relu: f64,
    ratio: f64,
    softplus: TrainSummary,
    relu: TrainSummary,
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    seed: u64,
    model: &Path,
    mode: Mode,
    data: Option<&Path>,
    target: TargetArg,
    epochs: usize,
    vdd: f64,
    out: Option<&Path>,
) -> Result<()> {
    let mut rec = Recorder::new("analyze-nn");
    let m = Mlp::from_json(&rec.read(model)?)?;
    rec.param("mode", format!("{mode:?}"));
    let rows = match data {
        Some(p) => Some(parse_dataset_csv(&rec.read(p)?)?),
        None => None,
    };
    let need_rows = || rows.as_deref().ok_or_else(|| Error::Config("--data is required for this mode".into()));
    let json = match mode {
        Mode::Weights => serde_json::to_string_pretty(&analyze_weights(&m, &feature_columns())?),
        Mode::Pivot => {
            rec.param("vdd", vdd);
            let (base, grid) = curve_base(need_rows()?, vdd)?;
            let curve = predict_curve(&m, &base, &grid)?;
            let shape = curve_shape(&curve, 0.05);
            let pivot = find_pivot(&m, &base, &grid, THETA_LO, THETA_HI)?;
            serde_json::to_string_pretty(&PivotOut { curve, shape, pivot })
        }
        Mode::ReluCompare => {
            rec.seed(seed);
            rec.param("vdd", vdd);
            rec.param("epochs", epochs);
            rec.param("target", target.label_column());
            let rows = need_rows()?;
            let (base, grid) = curve_base(rows, vdd)?;
            let ds = Dataset::from_rows(rows, target.into())?;
            let cfg = TrainConfig { epochs, seed, ..TrainConfig::default() };
            let c = relu_compare(&ds, &m.sizes, &cfg, &base, &grid)?;
            serde_json::to_string_pretty(&ReluOut {
                ratio: c.ratio(),
                f_grid: grid,
                smoothness_softplus: c.smooth_softplus,
                smoothness_relu: c.smooth_relu,
                softplus: (&c.softplus_report).into(),
                relu: (&c.relu_report).into(),
                curve_softplus: c.curve_softplus,
                curve_relu: c.curve_relu,
            })
        }
    }
    .map_err(|e| Error::Dataset(e.to_string()))?;
    match out {
        Some(p) => {
            rec.output(p, &json)?;
            rec.finish(&manifest_path_for_file(p))?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_plot(input: &Path, kind: PlotKind, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("plot");
    let t = Table::parse(&rec.read(input)?)?;
    rec.param("kind", format!("{kind:?}"));
    let svg = figure(kind, &t)?.to_svg()?;
    rec.output(out, &svg)?;
    rec.finish(&manifest_path_for_file(out))?;
    Ok(())
}
