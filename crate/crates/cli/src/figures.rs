// SPDX-License-Identifier: Apache-2.0

//! CSV tables to charts for each plot kind.

use clap::ValueEnum;

use dispel_core::sweep::{pareto_frontier, EFPoint};
use dispel_core::{Error, Result};

use crate::io::Table;
use crate::plot::{Chart, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Frontier energy against achieved frequency, per supply.
    Ef,
    /// Minimum EDP against spacer length, per routing stack.
    EdpLspa,
    /// Normalized minimum EDP against wire-resistance multiplier.
    EdpXrw,
    /// Cell area against achieved frequency, per supply.
    AreaF,
}

/// Groups (x, y) by a key column, keys in first-seen order.
fn grouped(keys: &[String], xs: &[f64], ys: &[f64]) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for ((k, x), y) in keys.iter().zip(xs).zip(ys) {
        match out.iter_mut().find(|(g, _)| g == k) {
            Some((_, pts)) => pts.push((*x, *y)),
            None => out.push((k.clone(), vec![(*x, *y)])),
        }
    }
    out
}

fn per_vdd(t: &Table, x: &str, y: &str) -> Result<Vec<Series>> {
    let v = t.column_f64("v_dd_V")?;
    let keys: Vec<String> = v.iter().map(|v| format!("VDD = {v} V")).collect();
    Ok(grouped(&keys, &t.column_f64(x)?, &t.column_f64(y)?)
        .into_iter()
        .map(|(label, points)| Series { label, points, dashed: false })
        .collect())
}

pub fn figure(kind: PlotKind, t: &Table) -> Result<Chart> {
    if t.rows.is_empty() {
        return Err(Error::Dataset("input table has no rows".into()));
    }
    match kind {
        PlotKind::Ef => {
            let mut series = per_vdd(t, "f_ach_GHz", "energy_pJ")?;
            let (f, e, v) = (t.column_f64("f_ach_GHz")?, t.column_f64("energy_pJ")?, t.column_f64("v_dd_V")?);
            let pts: Vec<EFPoint> = (0..f.len())
                .map(|i| EFPoint { f_ach: f[i], energy: e[i], area: 0.0, v_dd: v[i], provenance: i.to_string() })
                .collect();
            let env = pareto_frontier(&pts).iter().map(|p| (p.f_ach, p.energy)).collect();
            series.push(Series { label: "Pareto".into(), points: env, dashed: true });
            Ok(Chart {
                title: "Energy-frequency frontier".into(),
                x_label: "achieved frequency (GHz)".into(),
                y_label: "energy per cycle (pJ)".into(),
                series,
            })
        }
        PlotKind::AreaF => Ok(Chart {
            title: "Cell area against frequency".into(),
            x_label: "achieved frequency (GHz)".into(),
            y_label: "cell area (um^2)".into(),
            series: per_vdd(t, "f_ach_GHz", "cell_area_um2")?,
        }),
        PlotKind::EdpLspa => {
            let series = grouped(&t.column_str("route")?, &t.column_f64("l_spa_nm")?, &t.column_f64("min_edp_pJns")?)
                .into_iter()
                .map(|(label, points)| Series { label, points, dashed: false })
                .collect();
            Ok(Chart {
                title: "Minimum EDP against spacer length".into(),
                x_label: "L_SPA (nm)".into(),
                y_label: "min EDP (pJ ns)".into(),
                series,
            })
        }
        PlotKind::EdpXrw => {
            let x = t.column_f64("x_rw")?;
            let norm = |col: &str| -> Result<Vec<(f64, f64)>> {
                let y = t.column_f64(col)?;
                let i = x
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
                    .map(|(i, _)| i)
                    .expect("non-empty");
                if !(y[i] > 0.0) {
                    return Err(Error::Dataset(format!("column `{col}` has no positive reference value")));
                }
                Ok(x.iter().zip(&y).map(|(a, b)| (*a, b / y[i])).collect())
            };
            Ok(Chart {
                title: "EDP against wire-resistance multiplier".into(),
                x_label: "wire resistance multiplier".into(),
                y_label: "EDP / EDP(x = 1)".into(),
                series: vec![
                    Series { label: "design".into(), points: norm("min_edp_pJns")?, dashed: false },
                    Series { label: "RO reference".into(), points: norm("ro_edp_fJps")?, dashed: true },
                ],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ef_has_one_series_per_supply_plus_envelope() {
        let t = Table::parse("f_ach_GHz,energy_pJ,area_um2,v_dd_V,config_hash\n1,2,0,0.5,a\n2,3,0,0.5,b\n2.5,5,0,0.7,c\n")
            .unwrap();
        let c = figure(PlotKind::Ef, &t).unwrap();
        assert_eq!(c.series.len(), 3);
        assert_eq!(c.series[2].points, vec![(1.0, 2.0), (2.0, 3.0), (2.5, 5.0)]);
    }

    #[test]
    fn xrw_is_normalized_at_unity() {
        let t = Table::parse("x_rw,min_edp_pJns,ro_edp_fJps\n0.5,1,2\n1,2,4\n2,3,8\n").unwrap();
        let c = figure(PlotKind::EdpXrw, &t).unwrap();
        assert_eq!(c.series[0].points[1], (1.0, 1.0));
        assert_eq!(c.series[1].points[2], (2.0, 2.0));
    }

    #[test]
    fn missing_column_is_named() {
        let t = Table::parse("a,b\n1,2\n").unwrap();
        let e = figure(PlotKind::AreaF, &t).unwrap_err().to_string();
        assert!(e.contains("v_dd_V"), "{e}");
    }
}
