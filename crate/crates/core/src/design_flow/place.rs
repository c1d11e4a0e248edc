// SPDX-License-Identifier: Apache-2.0

//! Row-based placement by simulated annealing over bins, followed by
//! in-bin packing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::netlist::{Driver, Netlist, Sink};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floorplan {
    /// Die width and height, µm.
    pub width: f64,
    pub height: f64,
    /// Height over width.
    pub aspect: f64,
    /// Standard-cell row height, µm.
    pub row_height: f64,
    pub utilization: f64,
}

impl Floorplan {
    /// Die with the given aspect whose area is `cell_area / utilization`.
    /// The height is rounded to whole rows and the width absorbs the
    /// rounding so that the utilization is met exactly.
    pub fn for_cell_area(cell_area: f64, utilization: f64, aspect: f64, row_height: f64) -> Result<Self> {
        if !(utilization > 0.0 && utilization <= 1.0) {
            return Err(Error::Capacity(format!("utilization {utilization} not in (0, 1]")));
        }
        if !(cell_area > 0.0 && aspect > 0.0 && row_height > 0.0) {
            return Err(Error::domain("cell area, aspect and row height must be positive"));
        }
        let area = cell_area / utilization;
        let rows = ((area * aspect).sqrt() / row_height).round().max(1.0);
        let height = rows * row_height;
        Ok(Floorplan { width: area / height, height, aspect, row_height, utilization })
    }

    pub fn rows(&self) -> usize {
        (self.height / self.row_height).round() as usize
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Positions of `n` I/O pins spread along the top edge.
    pub fn io_positions(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| ((i as f64 + 0.5) / n as f64 * self.width, self.height))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub floorplan: Floorplan,
    /// Instance centers, µm.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub io: Vec<(f64, f64)>,
}

impl Placement {
    /// Uniformly rescales coordinates onto a new die of the same aspect.
    pub fn rescaled(&self, fp: Floorplan) -> Placement {
        let sx = fp.width / self.floorplan.width;
        let sy = fp.height / self.floorplan.height;
        Placement {
            floorplan: fp,
            x: self.x.iter().map(|x| x * sx).collect(),
            y: self.y.iter().map(|y| y * sy).collect(),
            io: fp.io_positions(self.io.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Cell(usize),
    Io(usize),
}

/// Terminals of every net: driver first, then sinks.
pub fn net_terminals(nl: &Netlist) -> Vec<Vec<Terminal>> {
    (0..nl.n_nets())
        .map(|n| {
            let mut t = vec![match nl.drivers[n] {
                Driver::Instance(i) => Terminal::Cell(i),
                Driver::Pin(p) => Terminal::Io(p),
            }];
            for s in &nl.sinks[n] {
                t.push(match *s {
                    Sink::Instance(i, _) => Terminal::Cell(i),
                    Sink::Pin(p) => Terminal::Io(p),
                });
            }
            t
        })
        .collect()
}

/// Half-perimeter of one net's bounding box, plus its x and y extents.
pub fn net_bbox(p: &Placement, terms: &[Terminal]) -> (f64, f64) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &t in terms {
        let (x, y) = match t {
            Terminal::Cell(i) => (p.x[i], p.y[i]),
            Terminal::Io(k) => p.io[k],
        };
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    (x1 - x0, y1 - y0)
}

pub fn hpwl(nl: &Netlist, p: &Placement) -> f64 {
    net_terminals(nl)
        .iter()
        .map(|t| {
            let (dx, dy) = net_bbox(p, t);
            dx + dy
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaceOptions {
    /// Annealing moves per instance.
    pub moves_per_cell: usize,
    pub seed: u64,
}

impl Default for PlaceOptions {
    fn default() -> Self {
        PlaceOptions { moves_per_cell: 1000, seed: 42 }
    }
}

struct Bins {
    nx: usize,
    ny: usize,
    bw: f64,
    rh: f64,
    used: Vec<f64>,
    cap: f64,
}

impl Bins {
    fn center(&self, b: usize) -> (f64, f64) {
        ((b % self.nx) as f64 * self.bw + 0.5 * self.bw, (b / self.nx) as f64 * self.rh + 0.5 * self.rh)
    }
}

fn make_bins(fp: &Floorplan, widths: &[f64]) -> Result<Bins> {
    let wmax = widths.iter().copied().fold(0.0, f64::max);
    let ny = fp.rows().max(1);
    let nx = ((fp.width / (2.0 * wmax)).floor() as usize).max(1);
    let bw = fp.width / nx as f64;
    if wmax > bw {
        return Err(Error::Capacity(format!("cell width {wmax:.3} µm exceeds die width {:.3} µm", fp.width)));
    }
    let total: f64 = widths.iter().sum();
    if total > fp.width * ny as f64 {
        return Err(Error::Capacity(format!(
            "cells need {total:.2} µm of row length, die offers {:.2}",
            fp.width * ny as f64
        )));
    }
    Ok(Bins { nx, ny, bw, rh: fp.row_height, used: vec![0.0; nx * ny], cap: bw })
}

fn initial_bins(bins: &mut Bins, widths: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let nb = bins.nx * bins.ny;
    let mut order: Vec<usize> = (0..widths.len()).collect();
    // largest first so that packing cannot strand a wide cell
    order.sort_by(|&a, &b| widths[b].total_cmp(&widths[a]).then(a.cmp(&b)));
    let mut bin_of = vec![0; widths.len()];
    for c in order {
        let start = rng.random_range(0..nb);
        let b = (0..nb)
            .map(|k| (start + k) % nb)
            .find(|&b| bins.used[b] + widths[c] <= bins.cap)
            .ok_or_else(|| Error::Capacity("bins full while seeding placement".into()))?;
        bins.used[b] += widths[c];
        bin_of[c] = b;
    }
    Ok(bin_of)
}

fn legalize(nl: &Netlist, fp: Floorplan, bins: &Bins, bin_of: &[usize], widths: &[f64]) -> Placement {
    let n = widths.len();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut cursor = vec![0.0; bins.nx * bins.ny];
    for c in 0..n {
        let b = bin_of[c];
        let left = (b % bins.nx) as f64 * bins.bw;
        x[c] = left + cursor[b] + 0.5 * widths[c];
        y[c] = (b / bins.nx) as f64 * bins.rh + 0.5 * bins.rh;
        cursor[b] += widths[c];
    }
    Placement { floorplan: fp, x, y, io: fp.io_positions(nl.pins.len()) }
}

/// A legal placement with instances dropped uniformly at random.
pub fn random_placement(nl: &Netlist, fp: Floorplan, widths: &[f64], seed: u64) -> Result<Placement> {
    let mut bins = make_bins(&fp, widths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bin_of = initial_bins(&mut bins, widths, &mut rng)?;
    Ok(legalize(nl, fp, &bins, &bin_of, widths))
}

/// Anneals bin assignments to minimize total HPWL, then packs each bin.
pub fn place(nl: &Netlist, fp: Floorplan, widths: &[f64], opts: PlaceOptions) -> Result<Placement> {
    if widths.len() != nl.instances.len() {
        return Err(Error::domain("one width per instance required"));
    }
    let mut bins = make_bins(&fp, widths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut bin_of = initial_bins(&mut bins, widths, &mut rng)?;
    let n = widths.len();
    let terms = net_terminals(nl);
    let mut cell_nets: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (net, ts) in terms.iter().enumerate() {
        for t in ts {
            if let Terminal::Cell(c) = *t {
                if cell_nets[c].last() != Some(&net) {
                    cell_nets[c].push(net);
                }
            }
        }
    }
    let io = fp.io_positions(nl.pins.len());
    let mut px: Vec<f64> = bin_of.iter().map(|&b| bins.center(b).0).collect();
    let mut py: Vec<f64> = bin_of.iter().map(|&b| bins.center(b).1).collect();
    let net_len = |net: usize, px: &[f64], py: &[f64]| -> f64 {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &t in &terms[net] {
            let (x, y) = match t {
                Terminal::Cell(i) => (px[i], py[i]),
                Terminal::Io(k) => io[k],
            };
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        (x1 - x0) + (y1 - y0)
    };
    let mut len: Vec<f64> = (0..terms.len()).map(|k| net_len(k, &px, &py)).collect();
    let total_moves = opts.moves_per_cell.saturating_mul(n);
    if n < 2 || total_moves == 0 {
        return Ok(legalize(nl, fp, &bins, &bin_of, widths));
    }

    let nb = bins.nx * bins.ny;
    let mut touched: Vec<usize> = Vec::new();
    let mut stamp = vec![usize::MAX; terms.len()];
    let mut saved: Vec<(usize, f64)> = Vec::new();
    let mut t0 = 0.0;
    {
        // starting temperature: mean uphill step of a random move
        let mut acc = 0.0;
        let mut cnt = 0;
        for _ in 0..200.min(total_moves) {
            let c = rng.random_range(0..n);
            let (cx, cy) = bins.center(rng.random_range(0..nb));
            let mut d = 0.0;
            let (ox, oy) = (px[c], py[c]);
            px[c] = cx;
            py[c] = cy;
            for &k in &cell_nets[c] {
                d += net_len(k, &px, &py) - len[k];
            }
            px[c] = ox;
            py[c] = oy;
            if d > 0.0 {
                acc += d;
                cnt += 1;
            }
        }
        if cnt > 0 {
            t0 = 2.0 * acc / cnt as f64;
        }
    }
    let t_end = t0 * 1e-4;
    let decay = if t0 > 0.0 { (t_end / t0).ln() / total_moves as f64 } else { 0.0 };

    for step in 0..total_moves {
        let temp = t0 * (decay * step as f64).exp();
        let frac = (temp / t0.max(1e-300)).sqrt().max(0.02);
        let rx = ((bins.nx as f64 * frac).ceil() as i64).max(1);
        let ry = ((bins.ny as f64 * frac).ceil() as i64).max(1);
        let a = rng.random_range(0..n);
        let ba = bin_of[a];
        let bx = (ba % bins.nx) as i64 + rng.random_range(-rx..=rx);
        let by = (ba / bins.nx) as i64 + rng.random_range(-ry..=ry);
        if bx < 0 || by < 0 || bx >= bins.nx as i64 || by >= bins.ny as i64 {
            continue;
        }
        let bb = by as usize * bins.nx + bx as usize;
        if bb == ba {
            continue;
        }
        // move if it fits, else swap with a random cell of the target bin
        let partner = if bins.used[bb] + widths[a] <= bins.cap {
            None
        } else {
            let c = rng.random_range(0..n);
            if bin_of[c] != bb
                || bins.used[bb] - widths[c] + widths[a] > bins.cap
                || bins.used[ba] - widths[a] + widths[c] > bins.cap
            {
                continue;
            }
            Some(c)
        };
        touched.clear();
        saved.clear();
        for &c in std::iter::once(&a).chain(partner.as_ref()) {
            for &k in &cell_nets[c] {
                if stamp[k] != step {
                    stamp[k] = step;
                    touched.push(k);
                }
            }
        }
        let (ax, ay) = (px[a], py[a]);
        let (nx_, ny_) = bins.center(bb);
        px[a] = nx_;
        py[a] = ny_;
        if let Some(c) = partner {
            px[c] = ax;
            py[c] = ay;
        }
        let mut delta = 0.0;
        for &k in &touched {
            let l = net_len(k, &px, &py);
            saved.push((k, l));
            delta += l - len[k];
        }
        let accept = delta <= 0.0 || (temp > 0.0 && rng.random::<f64>() < (-delta / temp).exp());
        if accept {
            for &(k, l) in &saved {
                len[k] = l;
            }
            bins.used[ba] -= widths[a];
            bins.used[bb] += widths[a];
            bin_of[a] = bb;
            if let Some(c) = partner {
                bins.used[bb] -= widths[c];
                bins.used[ba] += widths[c];
                bin_of[c] = ba;
            }
        } else {
            if let Some(c) = partner {
                px[c] = px[a];
                py[c] = py[a];
            }
            px[a] = ax;
            py[a] = ay;
        }
    }
    Ok(legalize(nl, fp, &bins, &bin_of, widths))
}

/// True when no two cells in a row overlap and all lie inside the die.
pub fn is_legal(p: &Placement, widths: &[f64]) -> bool {
    let fp = &p.floorplan;
    let mut rows: Vec<Vec<(f64, f64)>> = vec![Vec::new(); fp.rows().max(1)];
    for i in 0..widths.len() {
        let r = (p.y[i] / fp.row_height).floor() as usize;
        if r >= rows.len() {
            return false;
        }
        let (l, h) = (p.x[i] - 0.5 * widths[i], p.x[i] + 0.5 * widths[i]);
        if l < -1e-9 || h > fp.width + 1e-9 {
            return false;
        }
        rows[r].push((l, h));
    }
    rows.iter_mut().all(|r| {
        r.sort_by(|a, b| a.0.total_cmp(&b.0));
        r.windows(2).all(|w| w[0].1 <= w[1].0 + 1e-9)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_flow::netlist::{generate_netlist, SynthConfig};

    fn widths(nl: &Netlist) -> Vec<f64> {
        nl.instances
            .iter()
            .map(|i| (i.cell.kind.device_pairs(i.cell.size) + 1) as f64 * 0.036)
            .collect()
    }

    #[test]
    fn floorplan_meets_utilization_exactly() {
        let fp = Floorplan::for_cell_area(100.0, 0.6, 1.0, 0.156).unwrap();
        assert!((100.0 / fp.area() - 0.6).abs() < 1e-12);
        assert!((fp.height / fp.width - 1.0).abs() < 0.05);
        assert!(Floorplan::for_cell_area(100.0, 1.5, 1.0, 0.156).is_err());
    }

    #[test]
    fn two_connected_cells_end_up_adjacent() {
        let nl = Netlist::parse("pin a dir=in net=x\ngate g0 INV_X1 in=x out=y\ngate g1 INV_X1 in=y out=z\npin b dir=out net=z\n").unwrap();
        let w = widths(&nl);
        let fp = Floorplan::for_cell_area(0.2, 0.05, 1.0, 0.156).unwrap();
        let p = place(&nl, fp, &w, PlaceOptions::default()).unwrap();
        assert!(is_legal(&p, &w));
        assert_eq!(p.y[0], p.y[1]);
        assert!(((p.x[0] - p.x[1]).abs() - 0.5 * (w[0] + w[1])).abs() < 1e-9);
    }

    #[test]
    fn annealing_beats_random_and_stays_legal() {
        let nl = generate_netlist(&SynthConfig { n_gates: 400, depth: 8, ..Default::default() }).unwrap();
        let w = widths(&nl);
        let area: f64 = w.iter().sum::<f64>() * 0.156;
        let fp = Floorplan::for_cell_area(area, 0.6, 1.0, 0.156).unwrap();
        let p = place(&nl, fp, &w, PlaceOptions { moves_per_cell: 200, seed: 1 }).unwrap();
        assert!(is_legal(&p, &w));
        let best_random = (0..20)
            .map(|s| hpwl(&nl, &random_placement(&nl, fp, &w, s).unwrap()))
            .fold(f64::INFINITY, f64::min);
        assert!(hpwl(&nl, &p) < best_random);
    }
}
