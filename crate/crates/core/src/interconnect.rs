// SPDX-License-Identifier: Apache-2.0

//! Interconnect technology stack: size-dependent copper resistivity, per-layer
//! wire RC, via and contact resistance, and the ITF-like stack file.
//!
//! Units: geometry in nm, resistivity in µΩ·cm, specific contact resistivity
//! in Ω·cm², wire resistance in Ω/µm and capacitance in fF/µm.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ε0 expressed in fF/µm.
const EPS0_FF_PER_UM: f64 = 8.854_187_8128e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Wire,
    Via,
    Meol,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Wire => "wire",
            LayerKind::Via => "via",
            LayerKind::Meol => "meol",
        }
    }
}

impl FromStr for LayerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "wire" => Ok(LayerKind::Wire),
            "via" => Ok(LayerKind::Via),
            "meol" => Ok(LayerKind::Meol),
            _ => Err(format!("unknown layer kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResistivityModel {
    Bulk,
    Steinhogl,
}

impl ResistivityModel {
    fn as_str(self) -> &'static str {
        match self {
            ResistivityModel::Bulk => "bulk",
            ResistivityModel::Steinhogl => "steinhogl",
        }
    }
}

impl FromStr for ResistivityModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bulk" => Ok(ResistivityModel::Bulk),
            "steinhogl" => Ok(ResistivityModel::Steinhogl),
            _ => Err(format!("unknown resistivity model `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub min_width: f64,
    pub min_spacing: f64,
    /// Wire thickness or via height, nm.
    pub thickness: f64,
    pub resistivity_model: ResistivityModel,
    pub k_ild: f64,
    /// Dielectric height to the neighbouring layers; defaults to `thickness`.
    pub ild_height: f64,
}

impl LayerSpec {
    pub fn new(name: &str, kind: LayerKind, width: f64, spacing: f64, thickness: f64) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind,
            min_width: width,
            min_spacing: spacing,
            thickness,
            resistivity_model: ResistivityModel::Steinhogl,
            k_ild: DEFAULT_K_ILD,
            ild_height: thickness,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.min_width, self.min_spacing, self.thickness, self.k_ild, self.ild_height]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0);
        if !ok {
            return Err(Error::domain(format!(
                "layer {}: dimensions and k_ild must be positive",
                self.name
            )));
        }
        if !valid_layer_name(&self.name) {
            return Err(Error::domain(format!("unknown layer name `{}`", self.name)));
        }
        Ok(())
    }

    /// Metal index for `M<k>` / `V<k>` layers.
    pub fn level(&self) -> Option<usize> {
        layer_level(&self.name)
    }
}

fn layer_level(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('M').or_else(|| name.strip_prefix('V'))?;
    rest.parse().ok()
}

fn valid_layer_name(name: &str) -> bool {
    matches!(name, "MA" | "MB" | "TS") || layer_level(name).is_some_and(|k| k >= 1)
}

pub const DEFAULT_K_ILD: f64 = 3.0;
pub const DEFAULT_FRINGE: f64 = 1.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechStack {
    pub layers: Vec<LayerSpec>,
    /// Bulk resistivity, µΩ·cm.
    pub rho_bulk: f64,
    /// Electron mean free path, nm.
    pub mfp_lambda: f64,
    /// Grain-boundary reflection coefficient in [0, 1).
    pub grain_r: f64,
    /// Surface specularity in [0, 1].
    pub specularity: f64,
    /// Specific contact resistivity, Ω·cm².
    pub rho_con: f64,
    /// Wire resistance multiplier applied to routing wires (M2 and up).
    pub x_rw: f64,
    /// Whether `x_rw` also scales via resistance.
    pub scale_vias: bool,
    /// Fringe factor on the two-plate wire capacitance.
    pub fringe: f64,
}

impl TechStack {
    /// Projected 5-nm stack: M1–M3 12 nm, M4–M5 18 nm, M6 24 nm, vias matching
    /// their lower metal, aspect ratio 2, plus local MEOL layers.
    pub fn default_5nm() -> Self {
        let mut layers = Vec::new();
        let width = |k: usize| match k {
            1..=3 => 12.0,
            4 | 5 => 18.0,
            _ => 24.0,
        };
        for k in 1..=6 {
            let w = width(k);
            layers.push(LayerSpec::new(&format!("M{k}"), LayerKind::Wire, w, w, 2.0 * w));
        }
        for k in 1..=5 {
            let w = width(k);
            layers.push(LayerSpec::new(&format!("V{k}"), LayerKind::Via, w, w, 2.0 * w));
        }
        layers.push(LayerSpec::new("TS", LayerKind::Meol, 10.0, 10.0, 30.0));
        layers.push(LayerSpec::new("MA", LayerKind::Meol, 12.0, 12.0, 20.0));
        layers.push(LayerSpec::new("MB", LayerKind::Meol, 12.0, 12.0, 20.0));
        TechStack {
            layers,
            rho_bulk: 1.9,
            mfp_lambda: 39.0,
            grain_r: 0.43,
            specularity: 0.0,
            rho_con: 1e-8,
            x_rw: 1.0,
            scale_vias: false,
            fringe: DEFAULT_FRINGE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for l in &self.layers {
            l.validate()?;
        }
        let mut names: Vec<&str> = self.layers.iter().map(|l| l.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("duplicate layer name"));
        }
        if !(self.rho_bulk > 0.0 && self.mfp_lambda >= 0.0 && self.rho_con > 0.0) {
            return Err(Error::domain("rho_bulk and rho_con must be positive"));
        }
        if !(0.0..1.0).contains(&self.grain_r) || !(0.0..=1.0).contains(&self.specularity) {
            return Err(Error::domain("grain_R must be in [0,1), specularity in [0,1]"));
        }
        if !(self.x_rw > 0.0 && self.x_rw.is_finite()) {
            return Err(Error::domain("x_rw must be positive"));
        }
        if !(self.fringe > 0.0) {
            return Err(Error::domain("fringe factor must be positive"));
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Result<&LayerSpec> {
        self.layers
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::domain(format!("stack has no layer `{name}`")))
    }

    /// Signal-routing wires: every metal wire layer above M1.
    pub fn is_routing(&self, layer: &LayerSpec) -> bool {
        layer.kind == LayerKind::Wire && layer.level().is_some_and(|k| k >= 2)
    }

    /// Returns a copy with the wire-resistance multiplier scaled by `factor`.
    pub fn scale_wire_resistance(&self, factor: f64) -> Result<TechStack> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::domain("x_rw factor must be positive"));
        }
        let mut s = self.clone();
        s.x_rw *= factor;
        Ok(s)
    }

    pub fn with_scale_vias(mut self, on: bool) -> Self {
        self.scale_vias = on;
        self
    }

    /// Resistivity of a layer at its drawn dimensions.
    pub fn layer_resistivity(&self, layer: &LayerSpec) -> f64 {
        match layer.resistivity_model {
            ResistivityModel::Bulk => self.rho_bulk,
            ResistivityModel::Steinhogl => {
                cu_resistivity_unchecked(layer.min_width, layer.thickness, self)
            }
        }
    }
}

fn cu_resistivity_unchecked(width: f64, thickness: f64, stack: &TechStack) -> f64 {
    let lambda = stack.mfp_lambda;
    let r = stack.grain_r;
    // grain size equals wire width
    let alpha = lambda * r / (width * (1.0 - r));
    let grain = if alpha == 0.0 {
        1.0
    } else {
        let bracket =
            1.0 / 3.0 - alpha / 2.0 + alpha * alpha - alpha.powi(3) * (1.0 + 1.0 / alpha).ln();
        (1.0 / 3.0) / bracket
    };
    let surface =
        0.375 * (1.0 - stack.specularity) * lambda * (width + thickness) / (width * thickness);
    stack.rho_bulk * (grain + surface)
}

/// Size-dependent copper resistivity (µΩ·cm) combining grain-boundary and
/// surface scattering.
pub fn cu_resistivity(width: f64, thickness: f64, stack: &TechStack) -> Result<f64> {
    if !(width > 0.0 && thickness > 0.0) {
        return Err(Error::domain("width and thickness must be positive"));
    }
    Ok(cu_resistivity_unchecked(width, thickness, stack))
}

fn expect_kind(layer: &LayerSpec, kind: LayerKind) -> Result<()> {
    if layer.kind != kind {
        return Err(Error::LayerKind {
            layer: layer.name.clone(),
            found: layer.kind.as_str(),
            expected: kind.as_str(),
        });
    }
    Ok(())
}

/// Per-µm resistance (Ω/µm) and capacitance (fF/µm) of a wire layer.
pub fn wire_rc_per_um(layer: &LayerSpec, stack: &TechStack) -> Result<(f64, f64)> {
    expect_kind(layer, LayerKind::Wire)?;
    let rho = stack.layer_resistivity(layer);
    let mult = if stack.is_routing(layer) { stack.x_rw } else { 1.0 };
    // µΩ·cm · 1 µm / nm² = 1e-8 Ω·m · 1e-6 m / 1e-18 m² = 1e4 Ω
    let r = mult * rho * 1e4 / (layer.min_width * layer.thickness);
    let c = stack.fringe
        * 2.0
        * EPS0_FF_PER_UM
        * layer.k_ild
        * (layer.thickness / layer.min_spacing + layer.min_width / layer.ild_height);
    Ok((r, c))
}

/// Resistance of a single square via, Ω.
pub fn via_resistance(layer: &LayerSpec, stack: &TechStack) -> Result<f64> {
    expect_kind(layer, LayerKind::Via)?;
    let size = layer.min_width;
    let rho = match layer.resistivity_model {
        ResistivityModel::Bulk => stack.rho_bulk,
        ResistivityModel::Steinhogl => cu_resistivity_unchecked(size, size, stack),
    };
    let mult = if stack.scale_vias { stack.x_rw } else { 1.0 };
    // µΩ·cm · nm / nm² = 1e-8 Ω·m / 1e-9 m = 10 Ω
    Ok(mult * rho * 10.0 * layer.thickness / (size * size))
}

/// Contact resistance ρ_CON/(L_CON·W) in Ω for `l_con` in nm and `w` in µm.
pub fn contact_resistance(rho_con: f64, l_con: f64, w: f64) -> Result<f64> {
    if !(rho_con > 0.0 && l_con > 0.0 && w > 0.0) {
        return Err(Error::domain("rho_con, l_con and w must be positive"));
    }
    // nm·µm = 1e-7 cm · 1e-4 cm
    Ok(rho_con / (l_con * w * 1e-11))
}

// ---------------------------------------------------------------------------
// ITF-like text format

impl fmt::Display for TechStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "stack rho_bulk_uohm_cm={} mfp_nm={} grain_R={} specularity={} rho_con_ohm_cm2={:e} x_rw={} fringe={} scale_vias={}",
            self.rho_bulk,
            self.mfp_lambda,
            self.grain_r,
            self.specularity,
            self.rho_con,
            self.x_rw,
            self.fringe,
            self.scale_vias
        )?;
        for l in &self.layers {
            writeln!(
                f,
                "layer {} kind={} min_width_nm={} min_spacing_nm={} thickness_nm={} k_ild={} resistivity={} ild_nm={}",
                l.name,
                l.kind.as_str(),
                l.min_width,
                l.min_spacing,
                l.thickness,
                l.k_ild,
                l.resistivity_model.as_str(),
                l.ild_height
            )?;
        }
        Ok(())
    }
}

impl TechStack {
    pub fn to_itf(&self) -> String {
        let mut s = String::from("# interconnect technology stack\n");
        let _ = write!(s, "{self}");
        s
    }

    /// Parses the ITF-like text. Unknown keys are rejected.
    pub fn parse_itf(text: &str) -> Result<TechStack> {
        let mut header: Option<TechStack> = None;
        let mut layers = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let head = tokens.next().unwrap_or("");
            match head {
                "stack" => {
                    if header.is_some() {
                        return Err(perr("duplicate stack header".into()));
                    }
                    let mut s = TechStack::default_5nm();
                    s.layers.clear();
                    let mut seen = Vec::new();
                    for tok in tokens {
                        let (k, v) = tok
                            .split_once('=')
                            .ok_or_else(|| perr(format!("expected key=value, got `{tok}`")))?;
                        let num = || v.parse::<f64>().map_err(|_| perr(format!("`{k}`: bad number `{v}`")));
                        match k {
                            "rho_bulk_uohm_cm" => s.rho_bulk = num()?,
                            "mfp_nm" => s.mfp_lambda = num()?,
                            "grain_R" => s.grain_r = num()?,
                            "specularity" => s.specularity = num()?,
                            "rho_con_ohm_cm2" => s.rho_con = num()?,
                            "x_rw" => s.x_rw = num()?,
                            "fringe" => s.fringe = num()?,
                            "scale_vias" => {
                                s.scale_vias = v
                                    .parse()
                                    .map_err(|_| perr(format!("scale_vias: bad bool `{v}`")))?
                            }
                            _ => return Err(perr(format!("unknown stack key `{k}`"))),
                        }
                        seen.push(k);
                    }
                    for req in [
                        "rho_bulk_uohm_cm",
                        "mfp_nm",
                        "grain_R",
                        "specularity",
                        "rho_con_ohm_cm2",
                    ] {
                        if !seen.contains(&req) {
                            return Err(perr(format!("stack header missing `{req}`")));
                        }
                    }
                    header = Some(s);
                }
                "layer" => {
                    let name = tokens
                        .next()
                        .ok_or_else(|| perr("layer line without a name".into()))?;
                    let mut kind = None;
                    let (mut w, mut sp, mut t, mut k_ild) = (None, None, None, None);
                    let mut model = None;
                    let mut ild = None;
                    for tok in tokens {
                        let (k, v) = tok
                            .split_once('=')
                            .ok_or_else(|| perr(format!("expected key=value, got `{tok}`")))?;
                        let num = || v.parse::<f64>().map_err(|_| perr(format!("`{k}`: bad number `{v}`")));
                        match k {
                            "kind" => kind = Some(v.parse::<LayerKind>().map_err(perr)?),
                            "min_width_nm" => w = Some(num()?),
                            "min_spacing_nm" => sp = Some(num()?),
                            "thickness_nm" => t = Some(num()?),
                            "k_ild" => k_ild = Some(num()?),
                            "resistivity" => model = Some(v.parse::<ResistivityModel>().map_err(perr)?),
                            "ild_nm" => ild = Some(num()?),
                            _ => return Err(perr(format!("unknown layer key `{k}`"))),
                        }
                    }
                    let missing = |what: &str| perr(format!("layer {name}: missing `{what}`"));
                    let thickness = t.ok_or_else(|| missing("thickness_nm"))?;
                    let layer = LayerSpec {
                        name: name.to_string(),
                        kind: kind.ok_or_else(|| missing("kind"))?,
                        min_width: w.ok_or_else(|| missing("min_width_nm"))?,
                        min_spacing: sp.ok_or_else(|| missing("min_spacing_nm"))?,
                        thickness,
                        resistivity_model: model.unwrap_or(ResistivityModel::Steinhogl),
                        k_ild: k_ild.ok_or_else(|| missing("k_ild"))?,
                        ild_height: ild.unwrap_or(thickness),
                    };
                    layer.validate().map_err(|e| perr(e.to_string()))?;
                    layers.push(layer);
                }
                other => return Err(perr(format!("unknown record `{other}`"))),
            }
        }
        let mut stack = header.ok_or(Error::Parse {
            line: 0,
            msg: "missing stack header".into(),
        })?;
        stack.layers = layers;
        stack.validate()?;
        Ok(stack)
    }

    pub fn load_itf(path: &std::path::Path) -> Result<TechStack> {
        Self::parse_itf(&std::fs::read_to_string(path)?)
    }
}
