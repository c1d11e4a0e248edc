// SPDX-License-Identifier: Apache-2.0

//! Parametric standard-cell library: layout scaling, MEOL extraction,
//! transient characterization and FO3 logic features.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interconnect::TechStack;
use crate::vsdevice::VsParams;

pub mod characterize;
pub mod features;
pub mod geometry;
pub mod meol;
pub mod transient;

pub use characterize::{characterize_cell, ArcTiming, CharTable, DeviceKit, SLEW_GRID};
pub use features::{fo3_features, feature_names, FO3_LEN};
pub use geometry::{scale_layout, CellGeometry, CellTemplate, DeviceDims, DeviceStructure, FinGeometry};
pub use meol::{extract_meol, MeolParasitics};

use characterize::ArcTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Inv,
    Nand2,
    Nand3,
    Nor2,
    Nor3,
    Aoi21,
    Buf,
    Dff,
}

/// Logic gates in canonical feature order.
pub const LOGIC_GATES: [GateKind; 6] = [
    GateKind::Inv,
    GateKind::Nand2,
    GateKind::Nand3,
    GateKind::Nor2,
    GateKind::Nor3,
    GateKind::Aoi21,
];

pub const DRIVE_SIZES: [u32; 4] = [1, 2, 4, 8];

const fn topo(stack_n: usize, stack_p: usize, miller_devices: usize) -> ArcTopology {
    ArcTopology { stack_n, stack_p, miller_devices }
}

impl GateKind {
    pub fn base_name(self) -> &'static str {
        match self {
            GateKind::Inv => "INV",
            GateKind::Nand2 => "NAND2",
            GateKind::Nand3 => "NAND3",
            GateKind::Nor2 => "NOR2",
            GateKind::Nor3 => "NOR3",
            GateKind::Aoi21 => "AOI21",
            GateKind::Buf => "BUF",
            GateKind::Dff => "DFF",
        }
    }

    /// Input pins with their conducting topology. The first pin sits next to
    /// the output in series stacks.
    pub fn arcs(self) -> &'static [(&'static str, ArcTopology)] {
        type Arcs<const N: usize> = [(&'static str, ArcTopology); N];
        const INV: Arcs<1> = [("A", topo(1, 1, 2))];
        const NAND2: Arcs<2> = [("A", topo(2, 1, 2)), ("B", topo(2, 1, 1))];
        const NAND3: Arcs<3> = [("A", topo(3, 1, 2)), ("B", topo(3, 1, 1)), ("C", topo(3, 1, 1))];
        const NOR2: Arcs<2> = [("A", topo(1, 2, 2)), ("B", topo(1, 2, 1))];
        const NOR3: Arcs<3> = [("A", topo(1, 3, 2)), ("B", topo(1, 3, 1)), ("C", topo(1, 3, 1))];
        // Z = !(A·B + C)
        const AOI21: Arcs<3> = [("A", topo(2, 2, 1)), ("B", topo(2, 2, 0)), ("C", topo(1, 2, 2))];
        const CK: Arcs<1> = [("CK", topo(1, 1, 2))];
        match self {
            GateKind::Inv | GateKind::Buf => &INV,
            GateKind::Nand2 => &NAND2,
            GateKind::Nand3 => &NAND3,
            GateKind::Nor2 => &NOR2,
            GateKind::Nor3 => &NOR3,
            GateKind::Aoi21 => &AOI21,
            GateKind::Dff => &CK,
        }
    }

    pub fn n_inputs(self) -> usize {
        match self {
            GateKind::Dff => 1,
            k => k.arcs().len(),
        }
    }

    /// Devices whose drain is the output node.
    pub fn output_devices(self) -> usize {
        match self {
            GateKind::Inv | GateKind::Buf | GateKind::Dff => 2,
            GateKind::Nand2 | GateKind::Nor2 | GateKind::Aoi21 => 3,
            GateKind::Nand3 | GateKind::Nor3 => 4,
        }
    }

    /// Inverting stages between input and output.
    pub fn stages(self) -> usize {
        match self {
            GateKind::Buf => 2,
            GateKind::Dff => 3,
            _ => 1,
        }
    }

    pub(crate) fn buf_first_stage(self, size: u32) -> u32 {
        (size / 4).max(1)
    }

    /// n/p finger pairs in the cell.
    pub fn device_pairs(self, size: u32) -> u32 {
        match self {
            GateKind::Buf => self.buf_first_stage(size) + size,
            GateKind::Dff => 11 + size,
            k => k.n_inputs() as u32 * size,
        }
    }

    pub fn sizes(self) -> &'static [u32] {
        match self {
            GateKind::Dff => &[1],
            _ => &DRIVE_SIZES,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base_name())
    }
}

/// A library cell: gate kind and drive size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellDef {
    pub kind: GateKind,
    pub size: u32,
}

impl CellDef {
    pub fn new(kind: GateKind, size: u32) -> Self {
        CellDef { kind, size }
    }

    pub fn name(&self) -> String {
        format!("{}_X{}", self.kind.base_name(), self.size)
    }
}

impl FromStr for CellDef {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (base, size) = s
            .rsplit_once("_X")
            .ok_or_else(|| Error::Netlist(format!("bad cell name `{s}`")))?;
        let kind = [LOGIC_GATES.as_slice(), &[GateKind::Buf, GateKind::Dff]]
            .concat()
            .into_iter()
            .find(|k| k.base_name() == base)
            .ok_or_else(|| Error::Netlist(format!("unknown cell `{s}`")))?;
        let size: u32 = size.parse().map_err(|_| Error::Netlist(format!("bad drive in `{s}`")))?;
        if !kind.sizes().contains(&size) {
            return Err(Error::Netlist(format!("no drive X{size} for {kind}")));
        }
        Ok(CellDef { kind, size })
    }
}

/// Every cell of the library in canonical order.
pub fn library_cells() -> Vec<CellDef> {
    let mut v = Vec::new();
    for k in LOGIC_GATES.iter().chain(&[GateKind::Buf, GateKind::Dff]) {
        for &s in k.sizes() {
            v.push(CellDef::new(*k, s));
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub def: CellDef,
    pub name: String,
    pub geometry: CellGeometry,
    pub meol: MeolParasitics,
    pub table: CharTable,
}

impl Cell {
    pub fn area(&self) -> f64 {
        self.geometry.area_um2()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLibrary {
    pub dims: DeviceDims,
    pub v_dd: f64,
    pub vs_n: VsParams,
    pub vs_p: VsParams,
    pub cells: Vec<Cell>,
}

impl CellLibrary {
    pub fn index(&self, def: CellDef) -> Option<usize> {
        self.cells.iter().position(|c| c.def == def)
    }

    pub fn get(&self, def: CellDef) -> Option<&Cell> {
        self.cells.iter().find(|c| c.def == def)
    }

    pub fn by_name(&self, name: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }

    /// Writes `library.json`, `manifest.csv` and one table CSV per cell.
    pub fn write_dump(&self, dir: &Path, header: &str) -> Result<()> {
        fs::create_dir_all(dir.join("cells"))?;
        fs::write(dir.join("library.json"), self.to_json()?)?;
        let mut m = String::from(header);
        m.push_str(
            "cell,n_fingers,cgp_nm,m2_pitch_nm,tracks,l_gate_nm,l_spa_nm,l_con_nm,device_width_nm,width_nm,height_nm,area_um2,r_con_ohm,r_meol_ohm,c_g2c_fF,c_epi_fF,c_meol_fF,pin_cap_fF,leakage_uW\n",
        );
        for c in &self.cells {
            let g = &c.geometry;
            m.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.name,
                g.n_fingers,
                g.cgp,
                g.m2_pitch,
                g.tracks,
                g.l_gate,
                g.l_spa,
                g.l_con,
                g.device_width,
                g.width,
                g.height,
                c.area(),
                c.meol.r_con,
                c.meol.r_meol_series,
                c.meol.c_g2c,
                c.meol.c_epi,
                c.meol.c_meol_other,
                c.table.pin_cap,
                c.table.leakage
            ));
            let mut t = String::from(header);
            t.push_str("arc,dir,slew_ps,load_fF,delay_ps,out_slew_ps,energy_fJ\n");
            for a in &c.table.arcs {
                for (dir, tab) in [("rise", &a.rise), ("fall", &a.fall)] {
                    for (i, s) in c.table.slews.iter().enumerate() {
                        for (j, l) in c.table.loads.iter().enumerate() {
                            t.push_str(&format!(
                                "{}->Z,{dir},{s},{l},{},{},{}\n",
                                a.pin, tab.delay.values[i][j], tab.slew.values[i][j], tab.energy.values[i][j]
                            ));
                        }
                    }
                }
            }
            fs::write(dir.join("cells").join(format!("{}.csv", c.name)), t)?;
        }
        fs::write(dir.join("manifest.csv"), m)?;
        Ok(())
    }

    pub fn load_dump(dir: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(dir.join("library.json"))?)
    }
}

/// Scales, extracts and characterizes one cell.
pub fn build_cell(
    def: CellDef,
    dims: &DeviceDims,
    stack: &TechStack,
    vs_n: &VsParams,
    vs_p: &VsParams,
    v_dd: f64,
) -> Result<Cell> {
    let name = def.name();
    let template = CellTemplate {
        name: &name,
        gate_columns: def.kind.device_pairs(def.size) as usize,
    };
    let geometry = scale_layout(template, dims)?;
    let meol = extract_meol(&geometry, stack, dims)?;
    let table = characterize_cell(&def, &geometry, &meol, vs_n, vs_p, v_dd)?;
    Ok(Cell { def, name, geometry, meol, table })
}

/// Builds and characterizes the full library at `v_dd`.
pub fn build_library(
    dims: &DeviceDims,
    stack: &TechStack,
    vs_n: &VsParams,
    vs_p: &VsParams,
    v_dd: f64,
) -> Result<CellLibrary> {
    dims.validate()?;
    stack.validate()?;
    vs_n.validate()?;
    vs_p.validate()?;
    if !(v_dd > 0.0 && v_dd <= 2.0) {
        return Err(Error::domain(format!("v_dd = {v_dd} V out of range")));
    }
    let cells = library_cells()
        .into_par_iter()
        .map(|d| build_cell(d, dims, stack, vs_n, vs_p, v_dd))
        .collect::<Result<Vec<_>>>()?;
    Ok(CellLibrary { dims: *dims, v_dd, vs_n: *vs_n, vs_p: *vs_p, cells })
}
