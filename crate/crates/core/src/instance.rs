//! Deterministic instance generation from a seeded configuration.

use crate::chars::AscentConfig;
use crate::error::{Error, Result};
use crate::grid::{AtomicMeasure, Dyadic, Grid, MeasurePair};
use crate::haar::FunctionOnAtoms;
use crate::rng::SplitMix64;
use std::sync::Arc;

/// Dyadic position `numerator / 2^{l - m + shift}` of a sub-cell point,
/// valid for any relation between m and l.
fn cell_point(grid: &Grid, numerator: u64, shift: i64) -> Dyadic {
    let exp = grid.l as i64 - grid.m as i64 + shift;
    if exp >= 0 {
        Dyadic::new(numerator as i64, exp as u32)
    } else {
        Dyadic::new((numerator as i64) << (-exp), 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassDistribution {
    Unit,
    /// Log-uniform on [1e-2, 1e2].
    LogUniform,
}

impl MassDistribution {
    pub fn as_str(&self) -> &'static str {
        match self {
            MassDistribution::Unit => "unit",
            MassDistribution::LogUniform => "log_uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(MassDistribution::Unit),
            "log_uniform" => Ok(MassDistribution::LogUniform),
            other => Err(Error::InvalidInput(format!("unknown mass distribution: {other}"))),
        }
    }
}

/// Everything a run needs to be reproducible.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub m: u32,
    pub l: u32,
    pub r: u32,
    pub eps_num: u32,
    pub eps_den: u32,
    pub tau: u32,
    pub sigma_atoms: usize,
    pub omega_atoms: usize,
    pub masses: MassDistribution,
    pub p_list: Vec<f64>,
    pub gamma: f64,
    pub restarts: u32,
    pub iterations: u32,
    pub tolerance: f64,
    pub exhaustive_intervals: bool,
    pub rational_identities: bool,
    pub adversarial: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            m: 3,
            l: 8,
            r: 4,
            eps_num: 1,
            eps_den: 5,
            tau: 5,
            sigma_atoms: 8,
            omega_atoms: 8,
            masses: MassDistribution::Unit,
            p_list: vec![1.5, 2.0, 3.0],
            gamma: 10.0,
            restarts: 32,
            iterations: 10_000,
            tolerance: 1e-10,
            exhaustive_intervals: false,
            rational_identities: false,
            adversarial: false,
        }
    }
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<Grid> {
        for p in &self.p_list {
            if !(*p > 1.0 && p.is_finite()) {
                return Err(Error::InvalidInput(format!("p must lie in (1, inf), got {p}")));
            }
        }
        if self.sigma_atoms == 0 || self.omega_atoms == 0 {
            return Err(Error::InvalidInput("atom counts must be at least 1".into()));
        }
        Grid::new(self.m, self.l, self.r, self.eps_num, self.eps_den, self.tau)
    }

    pub fn ascent(&self) -> AscentConfig {
        AscentConfig {
            restarts: self.restarts,
            max_iterations: self.iterations,
            tolerance: self.tolerance,
            seed: self.seed,
        }
    }
}

fn draw_mass(rng: &mut SplitMix64, dist: MassDistribution) -> f64 {
    match dist {
        MassDistribution::Unit => 1.0,
        MassDistribution::LogUniform => {
            let lo = (1e-2f64).ln();
            let hi = (1e2f64).ln();
            (lo + (hi - lo) * rng.next_f64()).exp()
        }
    }
}

/// Deterministic measure pair from the configuration.  Atoms occupy centers
/// of distinct resolution cells; adversarial mode puts a sigma atom at the
/// quarter point and an omega atom at the three-quarter point of shared
/// cells.
pub fn generate(config: &ExperimentConfig) -> Result<MeasurePair> {
    let grid = config.grid()?;
    let cells = 1u64 << grid.l;
    let mut rng = SplitMix64::new(config.seed);
    if config.adversarial {
        let wanted = config.sigma_atoms.max(config.omega_atoms);
        if (wanted as u64) > cells {
            return Err(Error::TooManyAtoms { requested: wanted, cells });
        }
        let picked = rng.sample_distinct(cells, wanted);
        let mut s_atoms = Vec::new();
        let mut o_atoms = Vec::new();
        for (k, cell) in picked.iter().enumerate() {
            // Quarter points: (4 cell + 1) / 2^{l-m+2} and (4 cell + 3) / ...
            if k < config.sigma_atoms {
                let pos = cell_point(&grid, 4 * cell + 1, 2);
                s_atoms.push((pos, draw_mass(&mut rng, config.masses)));
            }
            if k < config.omega_atoms {
                let pos = cell_point(&grid, 4 * cell + 3, 2);
                o_atoms.push((pos, draw_mass(&mut rng, config.masses)));
            }
        }
        let sigma = AtomicMeasure::new(s_atoms)?;
        let omega = AtomicMeasure::new(o_atoms)?;
        return MeasurePair::new(grid, sigma, omega);
    }
    let total = config.sigma_atoms + config.omega_atoms;
    if (total as u64) > cells {
        return Err(Error::TooManyAtoms { requested: total, cells });
    }
    let picked = rng.sample_distinct(cells, total);
    let mut s_atoms = Vec::new();
    let mut o_atoms = Vec::new();
    for (k, cell) in picked.iter().enumerate() {
        // Cell centers.
        let pos = cell_point(&grid, 2 * cell + 1, 1);
        let mass = draw_mass(&mut rng, config.masses);
        if k < config.sigma_atoms {
            s_atoms.push((pos, mass));
        } else {
            o_atoms.push((pos, mass));
        }
    }
    let sigma = AtomicMeasure::new(s_atoms)?;
    let omega = AtomicMeasure::new(o_atoms)?;
    MeasurePair::new(grid, sigma, omega)
}

/// Seeded test functions on the two measures: standard gaussians per atom,
/// drawn after the atoms so that the pair and the functions share the seed.
pub fn generate_functions(
    config: &ExperimentConfig,
    pair: &MeasurePair,
) -> (FunctionOnAtoms, FunctionOnAtoms) {
    let mut rng = SplitMix64::new(config.seed ^ 0xf00d_f00d);
    let f = FunctionOnAtoms::new(
        Arc::clone(&pair.sigma),
        (0..pair.sigma.len()).map(|_| rng.next_gaussian()).collect(),
    );
    let g = FunctionOnAtoms::new(
        Arc::clone(&pair.omega),
        (0..pair.omega.len()).map(|_| rng.next_gaussian()).collect(),
    );
    (f, g)
}
