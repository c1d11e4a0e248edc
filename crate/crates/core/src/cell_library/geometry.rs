// SPDX-License-Identifier: Apache-2.0

//! Parametric cell layout: CGP decomposition, footprint scaling and the
//! relaxed same-layer overlap check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinGeometry {
    pub width: f64,
    pub height: f64,
    pub pitch: f64,
}

impl FinGeometry {
    pub const PROJECTED_5NM: FinGeometry = FinGeometry {
        width: 5.0,
        height: 30.0,
        pitch: 21.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeviceStructure {
    /// Planar thin-body channel with the given active width (nm).
    Planar { width: f64 },
    FinFet { fin: FinGeometry, n_fins: u32 },
}

impl DeviceStructure {
    /// Gated width per finger that carries current, nm.
    pub fn effective_width(&self) -> f64 {
        match *self {
            DeviceStructure::Planar { width } => width,
            DeviceStructure::FinFet { fin, n_fins } => {
                f64::from(n_fins) * (2.0 * fin.height + fin.width)
            }
        }
    }

    /// Layout footprint of the active region across the cell height, nm.
    pub fn footprint(&self) -> f64 {
        match *self {
            DeviceStructure::Planar { width } => width,
            DeviceStructure::FinFet { fin, n_fins } => f64::from(n_fins) * fin.pitch,
        }
    }

    pub fn is_finfet(&self) -> bool {
        matches!(self, DeviceStructure::FinFet { .. })
    }
}

/// Front-end dimensions shared by every cell in a library.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceDims {
    pub cgp: f64,
    pub l_gate: f64,
    pub l_spa: f64,
    pub l_con: f64,
    pub m2_pitch: f64,
    /// Cell height in M2 tracks.
    pub tracks: f64,
    pub structure: DeviceStructure,
    /// Relative permittivity of the gate spacer.
    pub k_spacer: f64,
    /// Height over which gate and S/D contact face each other, nm.
    pub gate_height: f64,
}

pub const DEFAULT_TRACKS: f64 = 6.5;
pub const DEFAULT_K_SPACER: f64 = 4.5;
pub const DEFAULT_GATE_HEIGHT: f64 = 20.0;

impl DeviceDims {
    /// Planar 2D-channel device at CGP 36 nm, M2 pitch 24 nm.
    pub fn planar(cgp: f64, l_gate: f64, l_spa: f64) -> Self {
        DeviceDims {
            cgp,
            l_gate,
            l_spa,
            l_con: cgp - l_gate - 2.0 * l_spa,
            m2_pitch: 24.0,
            tracks: DEFAULT_TRACKS,
            structure: DeviceStructure::Planar { width: 63.0 },
            k_spacer: DEFAULT_K_SPACER,
            gate_height: DEFAULT_GATE_HEIGHT,
        }
    }

    pub fn mos2_bp_default() -> Self {
        Self::planar(36.0, 10.0, 8.0)
    }

    /// Three-fin device with the projected fin geometry.
    pub fn finfet(cgp: f64, l_gate: f64, l_spa: f64) -> Self {
        DeviceDims {
            structure: DeviceStructure::FinFet {
                fin: FinGeometry::PROJECTED_5NM,
                n_fins: 3,
            },
            ..Self::planar(cgp, l_gate, l_spa)
        }
    }

    pub fn finfet_default() -> Self {
        DeviceDims {
            l_con: 5.0,
            ..Self::finfet(36.0, 18.0, 6.5)
        }
    }

    pub fn with_l_spa(self, l_spa: f64) -> Self {
        DeviceDims {
            l_spa,
            l_con: self.cgp - self.l_gate - 2.0 * l_spa,
            ..self
        }
    }

    /// Reads a dims file. `structure` (planar or finfet) picks the defaults,
    /// other keys override them; `l_con` follows the CGP decomposition
    /// unless given.
    pub fn from_kv(text: &str) -> Result<Self> {
        const KEYS: [&str; 14] = [
            "structure", "cgp", "l_gate", "l_spa", "l_con", "m2_pitch", "tracks", "width", "n_fins", "fin_width",
            "fin_height", "fin_pitch", "k_spacer", "gate_height",
        ];
        let m = crate::kv::KvMap::parse(text, &KEYS)?;
        let structure: String = m.get("structure")?.unwrap_or_else(|| "planar".into());
        let mut d = match structure.as_str() {
            "planar" => Self::mos2_bp_default(),
            "finfet" => Self::finfet_default(),
            other => return Err(Error::Parse { line: 0, msg: format!("unknown structure `{other}`") }),
        };
        let set = |v: &mut f64, key: &str| -> Result<()> {
            if let Some(x) = m.get(key)? {
                *v = x;
            }
            Ok(())
        };
        set(&mut d.cgp, "cgp")?;
        set(&mut d.l_gate, "l_gate")?;
        set(&mut d.l_spa, "l_spa")?;
        set(&mut d.m2_pitch, "m2_pitch")?;
        set(&mut d.tracks, "tracks")?;
        set(&mut d.k_spacer, "k_spacer")?;
        set(&mut d.gate_height, "gate_height")?;
        d.l_con = match m.get("l_con")? {
            Some(l) => l,
            None if m.contains("cgp") || m.contains("l_gate") || m.contains("l_spa") => d.cgp - d.l_gate - 2.0 * d.l_spa,
            None => d.l_con,
        };
        match &mut d.structure {
            DeviceStructure::Planar { width } => {
                set(width, "width")?;
                if let Some(k) = ["n_fins", "fin_width", "fin_height", "fin_pitch"].iter().find(|k| m.contains(k)) {
                    return Err(Error::Parse { line: 0, msg: format!("`{k}` needs structure=finfet") });
                }
            }
            DeviceStructure::FinFet { fin, n_fins } => {
                if m.contains("width") {
                    return Err(Error::Parse { line: 0, msg: "`width` needs structure=planar".into() });
                }
                if let Some(n) = m.get("n_fins")? {
                    *n_fins = n;
                }
                set(&mut fin.width, "fin_width")?;
                set(&mut fin.height, "fin_height")?;
                set(&mut fin.pitch, "fin_pitch")?;
            }
        }
        d.validate()?;
        Ok(d)
    }

    pub fn cell_height(&self) -> f64 {
        self.tracks * self.m2_pitch
    }

    /// Checks the CGP decomposition `cgp = l_gate + 2·l_spa + l_con`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cgp", self.cgp),
            ("l_gate", self.l_gate),
            ("l_spa", self.l_spa),
            ("l_con", self.l_con),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Decomposition(format!("{name} = {v} must be positive")));
            }
        }
        let sum = self.l_gate + 2.0 * self.l_spa + self.l_con;
        if (sum - self.cgp).abs() > 1e-9 * self.cgp {
            return Err(Error::Decomposition(format!(
                "l_gate + 2·l_spa + l_con = {sum} ≠ cgp = {}",
                self.cgp
            )));
        }
        if !(self.m2_pitch > 0.0 && self.tracks > 0.0) {
            return Err(Error::domain("m2_pitch and tracks must be positive"));
        }
        if !(self.k_spacer > 0.0 && self.gate_height > 0.0) {
            return Err(Error::domain("k_spacer and gate_height must be positive"));
        }
        if self.structure.effective_width() <= 0.0 {
            return Err(Error::domain("device width must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    Active,
    Gate,
    Spacer,
    Contact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub layer: Layer,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    /// Closed-interval intersection: touching edges count.
    fn touches(&self, o: &Rect) -> bool {
        self.layer == o.layer
            && self.x0 <= o.x1
            && o.x0 <= self.x1
            && self.y0 <= o.y1
            && o.y0 <= self.y1
    }
}

/// Gate columns and finger count of a cell template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellTemplate<'a> {
    pub name: &'a str,
    /// Poly columns in the cell (inputs × drive).
    pub gate_columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub cell_name: String,
    pub n_fingers: usize,
    pub cgp: f64,
    pub m2_pitch: f64,
    pub tracks: f64,
    pub l_gate: f64,
    pub l_spa: f64,
    pub l_con: f64,
    /// Effective gated width per finger, nm.
    pub device_width: f64,
    pub structure: DeviceStructure,
    pub width: f64,
    pub height: f64,
    pub rects: Vec<Rect>,
}

impl CellGeometry {
    /// Area in µm².
    pub fn area_um2(&self) -> f64 {
        self.width * self.height * 1e-6
    }
}

/// Edge allowance added to `n_fingers · cgp`, in units of CGP (half a pitch
/// of diffusion break on each side).
pub const EDGE_ALLOWANCE_CGP: f64 = 1.0;

const ACTIVE_MARGIN: f64 = 6.0;

/// Scales a cell template to the given dimensions and runs the relaxed
/// same-layer overlap check.
pub fn scale_layout(template: CellTemplate<'_>, dims: &DeviceDims) -> Result<CellGeometry> {
    dims.validate()?;
    let n = template.gate_columns.max(1);
    let width = (n as f64 + EDGE_ALLOWANCE_CGP) * dims.cgp;
    let height = dims.cell_height();
    let x_start = 0.5 * dims.cgp * EDGE_ALLOWANCE_CGP;
    let mut rects = Vec::new();

    // n active at the bottom, p active at the top
    let mut actives = Vec::new();
    match dims.structure {
        DeviceStructure::Planar { width: w } => {
            actives.push((ACTIVE_MARGIN, ACTIVE_MARGIN + w));
            actives.push((height - ACTIVE_MARGIN - w, height - ACTIVE_MARGIN));
        }
        DeviceStructure::FinFet { fin, n_fins } => {
            for k in 0..n_fins {
                let y = ACTIVE_MARGIN + f64::from(k) * fin.pitch;
                actives.push((y, y + fin.width));
                let yt = height - ACTIVE_MARGIN - f64::from(k) * fin.pitch;
                actives.push((yt - fin.width, yt));
            }
        }
    }
    for (y0, y1) in actives {
        rects.push(Rect {
            layer: Layer::Active,
            x0: 0.0,
            y0,
            x1: width,
            y1,
        });
    }

    // gates sit at x_start + (i + 1/2)·cgp with contacts between them
    for i in 0..n {
        let xc = x_start + (i as f64 + 0.5) * dims.cgp;
        let g0 = xc - 0.5 * dims.l_gate;
        let g1 = xc + 0.5 * dims.l_gate;
        rects.push(Rect { layer: Layer::Gate, x0: g0, y0: 0.0, x1: g1, y1: height });
        rects.push(Rect {
            layer: Layer::Spacer,
            x0: g0 - dims.l_spa,
            y0: 0.0,
            x1: g0,
            y1: height,
        });
        rects.push(Rect {
            layer: Layer::Spacer,
            x0: g1,
            y0: 0.0,
            x1: g1 + dims.l_spa,
            y1: height,
        });
    }
    for i in 0..=n {
        let xc = x_start + i as f64 * dims.cgp;
        rects.push(Rect {
            layer: Layer::Contact,
            x0: xc - 0.5 * dims.l_con,
            y0: ACTIVE_MARGIN,
            x1: xc + 0.5 * dims.l_con,
            y1: height - ACTIVE_MARGIN,
        });
    }

    for (i, a) in rects.iter().enumerate() {
        if let Some(b) = rects[i + 1..].iter().find(|b| a.touches(b)) {
            return Err(Error::Drc {
                cell: template.name.to_string(),
                msg: format!(
                    "{:?} shapes touch at x=[{:.2},{:.2}]/[{:.2},{:.2}] y=[{:.2},{:.2}]/[{:.2},{:.2}]",
                    a.layer, a.x0, a.x1, b.x0, b.x1, a.y0, a.y1, b.y0, b.y1
                ),
            });
        }
    }

    Ok(CellGeometry {
        cell_name: template.name.to_string(),
        n_fingers: n,
        cgp: dims.cgp,
        m2_pitch: dims.m2_pitch,
        tracks: dims.tracks,
        l_gate: dims.l_gate,
        l_spa: dims.l_spa,
        l_con: dims.l_con,
        device_width: dims.structure.effective_width(),
        structure: dims.structure,
        width,
        height,
        rects,
    })
}
