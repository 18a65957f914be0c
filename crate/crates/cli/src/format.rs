//! Instance and report file formats: line-oriented UTF-8 text with exact
//! rational "num/den" encoding for positions.

use twoweight::grid::{AtomicMeasure, Dyadic, Grid, MeasurePair};
use twoweight::instance::{ExperimentConfig, MassDistribution};
use twoweight::{Error, Result};

pub const INSTANCE_HEADER: &str = "# twoweight instance v1";
pub const REPORT_HEADER: &str = "# twoweight report v1";

/// Serialize an instance deterministically: configuration scalars first,
/// then the two atom lists with exact positions.
pub fn write_instance(config: &ExperimentConfig, pair: &MeasurePair) -> String {
    let mut out = String::new();
    out.push_str(INSTANCE_HEADER);
    out.push('\n');
    let grid = &pair.grid;
    out.push_str(&format!("m = {}\n", grid.m));
    out.push_str(&format!("l = {}\n", grid.l));
    out.push_str(&format!("r = {}\n", grid.r));
    out.push_str(&format!("eps = {}/{}\n", grid.eps_num, grid.eps_den));
    out.push_str(&format!("tau = {}\n", grid.tau));
    out.push_str(&format!("seed = {}\n", config.seed));
    out.push_str(&format!("masses = {}\n", config.masses.as_str()));
    out.push_str(&format!("adversarial = {}\n", config.adversarial));
    out.push_str("[sigma]\n");
    for (pos, mass) in pair.sigma.atoms() {
        out.push_str(&format!("atom = {pos} {mass}\n"));
    }
    out.push_str("[omega]\n");
    for (pos, mass) in pair.omega.atoms() {
        out.push_str(&format!("atom = {pos} {mass}\n"));
    }
    out
}

pub struct LoadedInstance {
    pub pair: MeasurePair,
    pub seed: u64,
    pub masses: MassDistribution,
    pub adversarial: bool,
}

pub fn parse_instance(text: &str) -> Result<LoadedInstance> {
    let mut m = None;
    let mut l = None;
    let mut r = None;
    let mut eps = None;
    let mut tau = None;
    let mut seed = 0u64;
    let mut masses = MassDistribution::Unit;
    let mut adversarial = false;
    let mut section = "";
    let mut sigma_atoms: Vec<(Dyadic, f64)> = Vec::new();
    let mut omega_atoms: Vec<(Dyadic, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[sigma]" {
            section = "sigma";
            continue;
        }
        if line == "[omega]" {
            section = "omega";
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| Error::InvalidInput(format!("line {}: bad {what}: {value}", lineno + 1));
        match key {
            "m" => m = Some(value.parse::<u32>().map_err(|_| bad("m"))?),
            "l" => l = Some(value.parse::<u32>().map_err(|_| bad("l"))?),
            "r" => r = Some(value.parse::<u32>().map_err(|_| bad("r"))?),
            "tau" => tau = Some(value.parse::<u32>().map_err(|_| bad("tau"))?),
            "eps" => {
                let (n, d) = value.split_once('/').ok_or_else(|| bad("eps"))?;
                eps = Some((
                    n.trim().parse::<u32>().map_err(|_| bad("eps"))?,
                    d.trim().parse::<u32>().map_err(|_| bad("eps"))?,
                ));
            }
            "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
            "masses" => masses = MassDistribution::parse(value)?,
            "adversarial" => adversarial = value.parse().map_err(|_| bad("adversarial"))?,
            "atom" => {
                let (pos_s, mass_s) = value
                    .split_once(' ')
                    .ok_or_else(|| bad("atom (expected \"num/den mass\")"))?;
                let pos = Dyadic::parse(pos_s.trim())?;
                let mass: f64 = mass_s.trim().parse().map_err(|_| bad("atom mass"))?;
                match section {
                    "sigma" => sigma_atoms.push((pos, mass)),
                    "omega" => omega_atoms.push((pos, mass)),
                    _ => return Err(Error::InvalidInput(format!("line {}: atom outside a section", lineno + 1))),
                }
            }
            other => return Err(Error::InvalidInput(format!("line {}: unknown key {other}", lineno + 1))),
        }
    }
    let (m, l, r, (en, ed), tau) = match (m, l, r, eps, tau) {
        (Some(m), Some(l), Some(r), Some(e), Some(t)) => (m, l, r, e, t),
        _ => return Err(Error::InvalidInput("missing grid parameters".into())),
    };
    let grid = Grid::new(m, l, r, en, ed, tau)?;
    let pair = MeasurePair::new(
        grid,
        AtomicMeasure::new(sigma_atoms)?,
        AtomicMeasure::new(omega_atoms)?,
    )?;
    Ok(LoadedInstance { pair, seed, masses, adversarial })
}

/// Canonical short float formatting (shortest round-trip).
pub fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}
