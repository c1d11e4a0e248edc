// SPDX-License-Identifier: Apache-2.0

//! Gate-level netlists: the structural text format and a seeded synthetic
//! generator with levelized logic between register boundaries.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use sha2::{Digest, Sha256};

use crate::cell_library::{CellDef, GateKind};
use crate::error::{Error, Result};

pub type NetId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub cell: CellDef,
    /// Input nets in pin order; the D net for a register.
    pub inputs: Vec<NetId>,
    pub output: NetId,
}

impl Instance {
    pub fn is_register(&self) -> bool {
        self.cell.kind == GateKind::Dff
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinDir {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoPin {
    pub name: String,
    pub dir: PinDir,
    pub net: NetId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Instance(usize),
    Pin(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sink {
    /// Instance index and input position.
    Instance(usize, usize),
    Pin(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub net_names: Vec<String>,
    pub instances: Vec<Instance>,
    pub pins: Vec<IoPin>,
    pub drivers: Vec<Driver>,
    pub sinks: Vec<Vec<Sink>>,
    /// Combinational instances in topological order.
    pub topo: Vec<usize>,
    /// Longest combinational chain, in gates.
    pub depth: usize,
}

impl Netlist {
    /// Resolves connectivity and checks the structural invariants.
    pub fn new(net_names: Vec<String>, instances: Vec<Instance>, pins: Vec<IoPin>) -> Result<Self> {
        let n = net_names.len();
        let mut drivers: Vec<Option<Driver>> = vec![None; n];
        let mut sinks = vec![Vec::new(); n];
        let mut set_driver = |net: NetId, d: Driver, who: &str| -> Result<()> {
            if net >= n {
                return Err(Error::Netlist(format!("{who}: net index {net} out of range")));
            }
            if drivers[net].replace(d).is_some() {
                return Err(Error::Netlist(format!("net `{}` has more than one driver", net_names[net])));
            }
            Ok(())
        };
        for (i, inst) in instances.iter().enumerate() {
            set_driver(inst.output, Driver::Instance(i), &inst.name)?;
            let want = if inst.is_register() { 1 } else { inst.cell.kind.n_inputs() };
            if inst.inputs.len() != want {
                return Err(Error::Netlist(format!(
                    "{} ({}) has {} inputs, expected {want}",
                    inst.name,
                    inst.cell.name(),
                    inst.inputs.len()
                )));
            }
        }
        for (i, p) in pins.iter().enumerate() {
            if p.dir == PinDir::In {
                set_driver(p.net, Driver::Pin(i), &p.name)?;
            }
        }
        for (i, inst) in instances.iter().enumerate() {
            for (k, &net) in inst.inputs.iter().enumerate() {
                if net >= n {
                    return Err(Error::Netlist(format!("{}: net index {net} out of range", inst.name)));
                }
                sinks[net].push(Sink::Instance(i, k));
            }
        }
        for (i, p) in pins.iter().enumerate() {
            if p.dir == PinDir::Out {
                sinks[p.net].push(Sink::Pin(i));
            }
        }
        let drivers = drivers
            .into_iter()
            .enumerate()
            .map(|(i, d)| d.ok_or_else(|| Error::Netlist(format!("net `{}` has no driver", net_names[i]))))
            .collect::<Result<Vec<_>>>()?;

        // Kahn over combinational instances; register outputs and input pins
        // are sources
        let comb: Vec<usize> = (0..instances.len()).filter(|&i| !instances[i].is_register()).collect();
        let mut pending = vec![0usize; instances.len()];
        for &i in &comb {
            pending[i] = instances[i]
                .inputs
                .iter()
                .filter(|&&net| matches!(drivers[net], Driver::Instance(d) if !instances[d].is_register()))
                .count();
        }
        let mut level = vec![0usize; instances.len()];
        let mut queue: Vec<usize> = comb.iter().copied().filter(|&i| pending[i] == 0).collect();
        let mut topo = Vec::with_capacity(comb.len());
        let mut head = 0;
        while head < queue.len() {
            let g = queue[head];
            head += 1;
            topo.push(g);
            level[g] += 1;
            for s in &sinks[instances[g].output] {
                if let Sink::Instance(j, _) = *s {
                    if !instances[j].is_register() {
                        level[j] = level[j].max(level[g]);
                        pending[j] -= 1;
                        if pending[j] == 0 {
                            queue.push(j);
                        }
                    }
                }
            }
        }
        if topo.len() != comb.len() {
            return Err(Error::Netlist("combinational loop".into()));
        }
        let depth = topo.iter().map(|&g| level[g]).max().unwrap_or(0);
        Ok(Netlist { net_names, instances, pins, drivers, sinks, topo, depth })
    }

    pub fn n_nets(&self) -> usize {
        self.net_names.len()
    }

    pub fn registers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.instances.len()).filter(|&i| self.instances[i].is_register())
    }

    pub fn n_gates(&self) -> usize {
        self.instances.len() - self.registers().count()
    }

    /// Mean number of sinks per net.
    pub fn mean_fanout(&self) -> f64 {
        self.sinks.iter().map(Vec::len).sum::<usize>() as f64 / self.n_nets().max(1) as f64
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.pins {
            let dir = if p.dir == PinDir::In { "in" } else { "out" };
            let _ = writeln!(s, "pin {} dir={dir} net={}", p.name, self.net_names[p.net]);
        }
        for inst in &self.instances {
            if inst.is_register() {
                let _ = writeln!(
                    s,
                    "reg {} d={} q={}",
                    inst.name, self.net_names[inst.inputs[0]], self.net_names[inst.output]
                );
            } else {
                let ins: Vec<&str> = inst.inputs.iter().map(|&n| self.net_names[n].as_str()).collect();
                let _ = writeln!(
                    s,
                    "gate {} {} in={} out={}",
                    inst.name,
                    inst.cell.name(),
                    ins.join(","),
                    self.net_names[inst.output]
                );
            }
        }
        s
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, NetId> = HashMap::new();
        let mut net = |name: &str| -> NetId {
            if let Some(&i) = index.get(name) {
                return i;
            }
            names.push(name.to_string());
            index.insert(name.to_string(), names.len() - 1);
            names.len() - 1
        };
        let mut instances = Vec::new();
        let mut pins = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let kv = |tok: &str, key: &str| -> Result<String> {
                tok.strip_prefix(key)
                    .and_then(|r| r.strip_prefix('='))
                    .filter(|v| !v.is_empty())
                    .map(str::to_string)
                    .ok_or_else(|| err(format!("expected `{key}=<value>`, got `{tok}`")))
            };
            match toks.as_slice() {
                ["gate", id, cell, ins, out] => {
                    let cell: CellDef = cell.parse().map_err(|e: Error| err(e.to_string()))?;
                    if cell.kind == GateKind::Dff {
                        return Err(err("flops are declared with `reg`".into()));
                    }
                    let inputs = kv(ins, "in")?.split(',').map(&mut net).collect();
                    let output = net(&kv(out, "out")?);
                    instances.push(Instance { name: id.to_string(), cell, inputs, output });
                }
                ["reg", id, d, q] => {
                    let d = net(&kv(d, "d")?);
                    let q = net(&kv(q, "q")?);
                    instances.push(Instance {
                        name: id.to_string(),
                        cell: CellDef::new(GateKind::Dff, 1),
                        inputs: vec![d],
                        output: q,
                    });
                }
                ["pin", name, dir, n] => {
                    let dir = match kv(dir, "dir")?.as_str() {
                        "in" => PinDir::In,
                        "out" => PinDir::Out,
                        other => return Err(err(format!("pin direction `{other}`"))),
                    };
                    let id = net(&kv(n, "net")?);
                    pins.push(IoPin { name: name.to_string(), dir, net: id });
                }
                _ => return Err(err(format!("unrecognized statement `{line}`"))),
            }
        }
        Netlist::new(names, instances, pins)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_gates: usize,
    pub depth: usize,
    /// Target mean sinks per net.
    pub fanout_mean: f64,
    /// Rent exponent controlling connection locality (higher is more global).
    pub rent_exponent: f64,
    /// Flops per combinational gate.
    pub register_ratio: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_gates: 5000,
            depth: 24,
            fanout_mean: 2.2,
            rent_exponent: 0.65,
            register_ratio: 0.08,
            seed: 42,
        }
    }
}

const ARITY_CLASSES: [(usize, f64, &[GateKind]); 3] = [
    (1, 0.15, &[GateKind::Inv]),
    (2, 0.50, &[GateKind::Nand2, GateKind::Nor2]),
    (3, 0.35, &[GateKind::Nand3, GateKind::Nor3, GateKind::Aoi21]),
];

/// Arity probabilities tilted so their mean equals `mean` (clamped to the
/// feasible range).
fn arity_weights(mean: f64) -> [f64; 3] {
    let m = mean.clamp(1.02, 2.98);
    let weights = |theta: f64| {
        let w: Vec<f64> = ARITY_CLASSES.iter().map(|(a, b, _)| b * (theta * *a as f64).exp()).collect();
        let z: f64 = w.iter().sum();
        [w[0] / z, w[1] / z, w[2] / z]
    };
    let mean_of = |w: [f64; 3]| w[0] + 2.0 * w[1] + 3.0 * w[2];
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of(weights(mid)) < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    weights(0.5 * (lo + hi))
}

/// Generates a levelized netlist: `depth` levels of gates between a register
/// bank and itself, with locality-biased connections.
pub fn generate_netlist(cfg: &SynthConfig) -> Result<Netlist> {
    if cfg.depth == 0 || cfg.n_gates < cfg.depth {
        return Err(Error::domain(format!(
            "need n_gates ≥ depth ≥ 1, got n_gates = {}, depth = {}",
            cfg.n_gates, cfg.depth
        )));
    }
    if !(cfg.fanout_mean >= 1.0 && cfg.rent_exponent > 0.0 && cfg.rent_exponent < 1.0) {
        return Err(Error::domain("fanout_mean ≥ 1 and rent exponent in (0, 1) required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_regs = ((cfg.n_gates as f64 * cfg.register_ratio).round() as usize).max(1);
    let n_pi = (n_regs / 8).max(1);

    let mut names = Vec::new();
    let new_net = |names: &mut Vec<String>| {
        names.push(format!("n{}", names.len()));
        names.len() - 1
    };
    let mut pins = Vec::new();
    let mut instances = Vec::new();

    // level 0 sources: register outputs then primary inputs
    let mut levels: Vec<Vec<NetId>> = vec![Vec::new()];
    let mut reg_q = Vec::new();
    for _ in 0..n_regs {
        let q = new_net(&mut names);
        reg_q.push(q);
        levels[0].push(q);
    }
    for i in 0..n_pi {
        let net = new_net(&mut names);
        pins.push(IoPin { name: format!("in{i}"), dir: PinDir::In, net });
        levels[0].push(net);
    }

    // gates per level, spread evenly
    let per_level: Vec<usize> = (0..cfg.depth)
        .map(|l| (cfg.n_gates * (l + 1)) / cfg.depth - (cfg.n_gates * l) / cfg.depth)
        .collect();
    // sinks per net counts register D pins too, so solve for the gate arity
    let nets = (cfg.n_gates + n_regs + n_pi) as f64;
    let aw = arity_weights((cfg.fanout_mean * nets - n_regs as f64) / cfg.n_gates as f64);
    let mut fanout = vec![0usize; names.len()];
    // Donath length distribution P(l) ∝ l^(2p - 4), in gate positions
    let tail = 1.0 / (3.0 - 2.0 * cfg.rent_exponent);
    let poisson = Poisson::new(0.5).map_err(|e| Error::domain(e.to_string()))?;

    let mut gate_id = 0;
    for (l, &count) in per_level.iter().enumerate() {
        let mut this_level = Vec::with_capacity(count);
        for g in 0..count {
            let x = (g as f64 + 0.5) / count as f64;
            let u: f64 = rng.random();
            let class = if u < aw[0] { 0 } else if u < aw[0] + aw[1] { 1 } else { 2 };
            let (arity, _, kinds) = ARITY_CLASSES[class];
            let kind = *kinds.choose(&mut rng).expect("non-empty");
            let mut inputs: Vec<NetId> = Vec::with_capacity(arity);
            for k in 0..arity {
                // the first input comes from the previous level; others reach
                // back a Poisson number of levels
                let back = if k == 0 { 1 } else { 1 + poisson.sample(&mut rng) as usize };
                let src = &levels[(l + 1).saturating_sub(back)];
                let u: f64 = 1.0 - rng.random::<f64>();
                let len = (u.powf(-tail) - 1.0).min(0.5 * src.len() as f64);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let xs = (x + sign * len / src.len() as f64).rem_euclid(1.0);
                let mut pick = ((xs * src.len() as f64) as usize).min(src.len() - 1);
                // prefer an unused net nearby so that every net gets a sink
                for off in 0..4usize {
                    let j = (pick + off) % src.len();
                    if fanout[src[j]] == 0 && !inputs.contains(&src[j]) {
                        pick = j;
                        break;
                    }
                }
                let mut net = src[pick];
                let mut guard = 0;
                while inputs.contains(&net) && guard < src.len() {
                    pick = (pick + 1) % src.len();
                    net = src[pick];
                    guard += 1;
                }
                if inputs.contains(&net) {
                    break;
                }
                inputs.push(net);
                fanout[net] += 1;
            }
            // a gate may end up with fewer distinct candidates than its arity
            let kind = match (kind.n_inputs(), inputs.len()) {
                (a, b) if a == b => kind,
                (_, 1) => GateKind::Inv,
                (_, 2) => GateKind::Nand2,
                _ => kind,
            };
            let out = new_net(&mut names);
            fanout.push(0);
            instances.push(Instance {
                name: format!("g{gate_id}"),
                cell: CellDef::new(kind, 1),
                inputs,
                output: out,
            });
            gate_id += 1;
            this_level.push(out);
        }
        levels.push(this_level);
    }

    // relative position of every net within its level
    let mut pos = vec![0.0; names.len()];
    for lv in &levels {
        for (i, &n) in lv.iter().enumerate() {
            pos[n] = (i as f64 + 0.5) / lv.len() as f64;
        }
    }
    // endpoints: dangling nets first, then the deepest level; registers
    // capture nets at matching positions
    let mut dangling: Vec<NetId> = (0..names.len()).filter(|&n| fanout[n] == 0).collect();
    let deepest = levels.last().expect("at least one level").clone();
    let mut captured: Vec<NetId> = dangling.iter().copied().take(n_regs).collect();
    let rest = dangling.split_off(captured.len());
    dangling = rest;
    while captured.len() < n_regs {
        captured.push(deepest[rng.random_range(0..deepest.len())]);
    }
    captured.sort_by(|&a, &b| pos[a].total_cmp(&pos[b]).then(a.cmp(&b)));
    // register r launches from position (r + 0.5) / n_regs of level 0
    let mut d_nets = vec![0; n_regs];
    let mut reg_order: Vec<usize> = (0..n_regs).collect();
    reg_order.sort_by(|&a, &b| pos[reg_q[a]].total_cmp(&pos[reg_q[b]]).then(a.cmp(&b)));
    for (r, net) in reg_order.into_iter().zip(captured) {
        d_nets[r] = net;
        fanout[net] += 1;
    }
    for (i, net) in dangling.into_iter().enumerate() {
        pins.push(IoPin { name: format!("out{i}"), dir: PinDir::Out, net });
        fanout[net] += 1;
    }
    if !pins.iter().any(|p| p.dir == PinDir::Out) {
        let net = deepest[0];
        pins.push(IoPin { name: "out0".into(), dir: PinDir::Out, net });
    }
    for (r, (&q, &d)) in reg_q.iter().zip(&d_nets).enumerate() {
        instances.push(Instance {
            name: format!("r{r}"),
            cell: CellDef::new(GateKind::Dff, 1),
            inputs: vec![d],
            output: q,
        });
    }
    let built = Netlist::new(names, instances, pins)?;
    // renumber nets as a reload of the written file would
    Netlist::parse(&built.to_text())
}
