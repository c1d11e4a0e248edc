// SPDX-License-Identifier: Apache-2.0

//! Feature dataset: FO3 logic features, interconnect features, supply and
//! achieved frequency of per-supply frontier designs, labeled with energy
//! and area.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{base_design, context_hash, pareto_frontier, vdd_sweep, EFPoint, SweepConfig, Technology};
use crate::cell_library::{feature_names, fo3_features, FO3_LEN};
use crate::design_flow::netlist::Netlist;
use crate::design_flow::{routed_design, DesignResult};
use crate::error::{Error, Result};
use crate::interconnect::{via_resistance, wire_rc_per_um, TechStack};

pub const INTERCONNECT_COLUMNS: [&str; 9] = ["R_M2", "C_M2", "R_M4", "C_M4", "R_M6", "C_M6", "R_V1", "R_V3", "R_V5"];
pub const N_FEATURES: usize = FO3_LEN + 9 + 2;
pub const LABEL_COLUMNS: [&str; 2] = ["label_energy", "label_area"];
/// Units of the feature CSV columns, written as a comment line.
pub const UNITS_COMMENT: &str =
    "# units: logic uA|ps|fJ per FO3 stage; R_M* ohm/um; C_M* fF/um; R_V* ohm; v_dd V; f_ach GHz; label_energy pJ; label_area um2\n";

/// The 41 feature names in dataset order.
pub fn feature_columns() -> Vec<String> {
    let mut c = feature_names();
    c.extend(INTERCONNECT_COLUMNS.iter().map(|s| s.to_string()));
    c.push("v_dd".into());
    c.push("f_ach".into());
    c
}

/// Features then labels.
pub fn dataset_columns() -> Vec<String> {
    let mut c = feature_columns();
    c.extend(LABEL_COLUMNS.iter().map(|s| s.to_string()));
    c
}

/// Index of the f_ach feature.
pub const F_ACH_INDEX: usize = N_FEATURES - 1;
/// Indices of the routing-wire resistance features.
pub const R_WIRE_INDICES: [usize; 3] = [FO3_LEN, FO3_LEN + 2, FO3_LEN + 4];

/// R and C per µm of M2/M4/M6 and the resistance of V1/V3/V5.
pub fn interconnect_features(stack: &TechStack) -> Result<[f64; 9]> {
    let mut out = [0.0; 9];
    for (k, m) in ["M2", "M4", "M6"].iter().enumerate() {
        let (r, c) = wire_rc_per_um(stack.layer(m)?, stack)?;
        out[2 * k] = r;
        out[2 * k + 1] = c;
    }
    for (k, v) in ["V1", "V3", "V5"].iter().enumerate() {
        out[6 + k] = via_resistance(stack.layer(v)?, stack)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub features: Vec<f64>,
    /// pJ per cycle.
    pub energy: f64,
    /// µm².
    pub area: f64,
}

/// Results of one library (one supply) on one routing stack.
#[derive(Debug, Clone, Copy)]
pub struct DatasetSource<'a> {
    pub fo3: &'a [f64; FO3_LEN],
    pub stack: &'a TechStack,
    pub results: &'a [DesignResult],
}

/// One row per frontier design of each source.
pub fn emit_dataset(sources: &[DatasetSource<'_>]) -> Result<Vec<FeatureRow>> {
    let mut rows = Vec::new();
    for src in sources {
        let itc = interconnect_features(src.stack)?;
        let points: Vec<EFPoint> = src.results.iter().map(EFPoint::from_result).collect();
        let by_hash: HashMap<&str, &DesignResult> = src.results.iter().map(|r| (r.config_hash.as_str(), r)).collect();
        for p in pareto_frontier(&points) {
            let r = by_hash
                .get(p.provenance.as_str())
                .ok_or_else(|| Error::Dataset(format!("frontier point {} has no result", p.provenance)))?;
            let mut f = Vec::with_capacity(N_FEATURES);
            f.extend_from_slice(src.fo3);
            f.extend_from_slice(&itc);
            f.push(r.v_dd);
            f.push(r.f_ach);
            rows.push(FeatureRow { features: f, energy: r.energy, area: r.cell_area });
        }
    }
    Ok(rows)
}

pub fn dataset_csv(rows: &[FeatureRow], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str(UNITS_COMMENT);
    s.push_str(&dataset_columns().join(","));
    s.push('\n');
    for r in rows {
        for v in &r.features {
            let _ = write!(s, "{v},");
        }
        let _ = writeln!(s, "{},{}", r.energy, r.area);
    }
    s
}

/// Parses the feature CSV, checking the header against the frozen schema.
pub fn parse_dataset_csv(text: &str) -> Result<Vec<FeatureRow>> {
    let cols = dataset_columns();
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            if fields.len() != cols.len() {
                return Err(Error::Parse { line: line_no, msg: format!("expected {} columns, found {}", cols.len(), fields.len()) });
            }
            if let Some((i, (got, want))) = fields.iter().zip(&cols).enumerate().find(|(_, (g, w))| *g != w) {
                return Err(Error::Parse { line: line_no, msg: format!("column {} is `{got}`, expected `{want}`", i + 1) });
            }
            header_seen = true;
            continue;
        }
        if fields.len() != cols.len() {
            return Err(Error::Parse { line: line_no, msg: format!("expected {} values, found {}", cols.len(), fields.len()) });
        }
        let mut vals = Vec::with_capacity(cols.len());
        for (i, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("column `{}`: `{f}` is not a finite number", cols[i]) })?;
            vals.push(v);
        }
        let area = vals.pop().expect("43 values");
        let energy = vals.pop().expect("42 values");
        rows.push(FeatureRow { features: vals, energy, area });
    }
    if !header_seen {
        return Err(Error::Dataset("no header row".into()));
    }
    Ok(rows)
}

/// One technology perturbation for dataset generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetVariation {
    /// Multiplier on injection velocity and mobility of both devices.
    pub transport: f64,
    /// Multiplier on the specific contact resistivity.
    pub rho_con: f64,
    /// Gate-spacer relative permittivity.
    pub k_spacer: f64,
    /// Routing-wire resistance multiplier.
    pub x_rw: f64,
}

/// Device variants crossed with wire-resistance multipliers.
pub fn default_variations() -> Vec<DatasetVariation> {
    let devices = [
        (1.0, 1.0, 4.5),
        (0.7, 1.0, 4.5),
        (1.3, 1.0, 4.5),
        (1.0, 0.5, 4.5),
        (1.0, 2.0, 4.5),
        (1.0, 1.0, 3.0),
        (1.0, 1.0, 7.0),
        (0.7, 2.0, 7.0),
        (1.3, 0.5, 3.0),
    ];
    let mut out = Vec::new();
    for (transport, rho_con, k_spacer) in devices {
        for x_rw in [0.25, 0.5, 1.0, 2.0, 4.0] {
            out.push(DatasetVariation { transport, rho_con, k_spacer, x_rw });
        }
    }
    out
}

impl DatasetVariation {
    fn device_key(&self) -> [u64; 3] {
        [self.transport.to_bits(), self.rho_con.to_bits(), self.k_spacer.to_bits()]
    }

    pub fn apply(&self, tech: &Technology) -> Technology {
        let mut t = tech.clone();
        t.vs_n = t.vs_n.with_transport_scale(self.transport);
        t.vs_p = t.vs_p.with_transport_scale(self.transport);
        t.stack.rho_con *= self.rho_con;
        t.dims.k_spacer = self.k_spacer;
        t
    }
}

/// Sweeps every variation over the supply grid and keeps the per-supply
/// frontier designs. Libraries are shared between variations that differ
/// only in wire resistance.
pub fn generate_dataset(cfg: &SweepConfig, tech: &Technology, nl: &Netlist, variations: &[DatasetVariation]) -> Result<Vec<FeatureRow>> {
    cfg.validate()?;
    let nl = Arc::new(nl.clone());
    let mut devices: Vec<[u64; 3]> = Vec::new();
    for v in variations {
        if !devices.contains(&v.device_key()) {
            devices.push(v.device_key());
        }
    }
    let jobs: Vec<(usize, f64)> = (0..devices.len()).flat_map(|d| cfg.v_dd.iter().map(move |&v| (d, v))).collect();
    let per_job: Vec<Vec<FeatureRow>> = jobs
        .par_iter()
        .map(|&(d, v_dd)| {
            let group: Vec<&DatasetVariation> = variations.iter().filter(|v| v.device_key() == devices[d]).collect();
            let t = group[0].apply(tech);
            let lib = t.library(v_dd, cfg.i_off)?;
            let fo3 = fo3_features(&lib)?;
            let base = base_design(&nl, &lib, &t.stack, &cfg.flow)?;
            let mut rows = Vec::new();
            for var in group {
                let stack = t.stack.scale_wire_resistance(var.x_rw)?;
                let ctx = context_hash(cfg, &t, &stack, &nl);
                let b = routed_design(nl.clone(), &lib, &stack, (*base.placement).clone())?;
                let rs = vdd_sweep(cfg, &lib, &stack, &b, &ctx)?;
                rows.extend(emit_dataset(&[DatasetSource { fo3: &fo3, stack: &stack, results: &rs }])?);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}
