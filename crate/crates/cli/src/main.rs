//! Command line driver: instance generation, characteristic reports,
//! invariant verification, parameter sweeps, and adversarial ratio search.

mod format;

use clap::{Args, Parser, Subcommand};
use format::{fmt_f64, parse_instance, write_instance, LoadedInstance, REPORT_HEADER};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use twoweight::chars::{
    energy_characteristic, muckenhoupt, operator_norm, refined_functional_energy,
    stopping_energy, testing, wbp, AscentConfig, CharacteristicReport, IntervalMode,
    MuckenhouptKind, NormMethod, Side, TestingKind,
};
use twoweight::corona::build_cz_energy_forest;
use twoweight::forms::{bound_report, decompose, Arithmetic};
use twoweight::grid::MeasurePair;
use twoweight::instance::{generate, generate_functions, ExperimentConfig, MassDistribution};
use twoweight::rng::SplitMix64;
use twoweight::verify;
use twoweight::Error;

#[derive(Parser)]
#[command(name = "twoweight", version, about = "Two-weight dyadic analysis workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Generator seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Top interval exponent: the universe is [0, 2^m).
    #[arg(long, default_value_t = 3)]
    m: u32,
    /// Atom resolution level.
    #[arg(long, default_value_t = 8)]
    l: u32,
    /// Goodness integer.
    #[arg(long, default_value_t = 4)]
    r: u32,
    /// Boundary exponent as "num/den" in (0, 1/4).
    #[arg(long, default_value = "1/5")]
    eps: String,
    /// Comparability threshold; must equal r + 1.
    #[arg(long, default_value_t = 5)]
    tau: u32,
    #[arg(long, default_value_t = 8)]
    sigma_atoms: usize,
    #[arg(long, default_value_t = 8)]
    omega_atoms: usize,
    /// Mass distribution: unit or log_uniform.
    #[arg(long, default_value = "unit")]
    masses: String,
    /// Comma-separated exponents.
    #[arg(long, default_value = "1.5,2,3")]
    p: String,
    /// Stopping-time threshold.
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    /// Ascent restarts.
    #[arg(long, default_value_t = 32)]
    restarts: u32,
    /// Ascent iteration cap.
    #[arg(long, default_value_t = 10000)]
    iterations: u32,
    /// Ascent convergence tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    /// Add all lattice-endpoint intervals to scalar suprema (l <= 6 only).
    #[arg(long)]
    exhaustive_intervals: bool,
    /// Check the partition identities in exact rational arithmetic.
    #[arg(long)]
    rational: bool,
    /// Place sigma/omega atoms at quarter points of shared cells.
    #[arg(long)]
    adversarial: bool,
}

impl ConfigArgs {
    fn to_config(&self) -> Result<ExperimentConfig, Error> {
        let (en, ed) = self
            .eps
            .split_once('/')
            .ok_or_else(|| Error::InvalidInput(format!("bad eps: {}", self.eps)))?;
        let eps_num = en
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad eps: {}", self.eps)))?;
        let eps_den = ed
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad eps: {}", self.eps)))?;
        let mut p_list = Vec::new();
        for part in self.p.split(',') {
            let v: f64 = part
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad p value: {part}")))?;
            p_list.push(v);
        }
        Ok(ExperimentConfig {
            seed: self.seed,
            m: self.m,
            l: self.l,
            r: self.r,
            eps_num,
            eps_den,
            tau: self.tau,
            sigma_atoms: self.sigma_atoms,
            omega_atoms: self.omega_atoms,
            masses: MassDistribution::parse(&self.masses)?,
            p_list,
            gamma: self.gamma,
            restarts: self.restarts,
            iterations: self.iterations,
            tolerance: self.tolerance,
            exhaustive_intervals: self.exhaustive_intervals,
            rational_identities: self.rational,
            adversarial: self.adversarial,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic instance file.
    Gen {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute every characteristic and the form decomposition.
    Report {
        /// Instance file; generated from the configuration when omitted.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every invariant suite; exit 0 only if all checks pass.
    Verify {
        #[arg(long)]
        instance: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// One CSV row per characteristic per axis value.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Axis: p, gamma, eps, or atoms.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values (eps values as num/den).
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Abort with exit code 3 past this many seconds.
        #[arg(long)]
        max_seconds: Option<f64>,
    },
    /// Seeded hill climbing over atom masses and positions.
    Search {
        #[command(flatten)]
        config: ConfigArgs,
        /// Objective: norm_over_charsum or energy_over_testing.
        #[arg(long, default_value = "norm_over_charsum")]
        objective: String,
        /// Number of mutation steps.
        #[arg(long, default_value_t = 200)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_seconds: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Load an instance file, adopting its recorded seed and generation flags
/// so that downstream seeded choices reproduce; otherwise generate from the
/// configuration.
fn load_or_generate(
    instance: &Option<PathBuf>,
    config: &mut ExperimentConfig,
) -> Result<MeasurePair, Error> {
    match instance {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
            let LoadedInstance { pair, seed, masses, adversarial } = parse_instance(&text)?;
            config.seed = seed;
            config.masses = masses;
            config.adversarial = adversarial;
            config.m = pair.grid.m;
            config.l = pair.grid.l;
            config.r = pair.grid.r;
            config.eps_num = pair.grid.eps_num;
            config.eps_den = pair.grid.eps_den;
            config.tau = pair.grid.tau;
            Ok(pair)
        }
        None => generate(config),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Gen { config, out } => {
            let config = config.to_config()?;
            let pair = generate(&config)?;
            emit(&out, &write_instance(&config, &pair))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { instance, config, out } => {
            let mut config = config.to_config()?;
            let pair = load_or_generate(&instance, &mut config)?;
            let text = report_text(&pair, &config)?;
            emit(&out, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { instance, config } => {
            let mut config = config.to_config()?;
            let pair = match load_or_generate(&instance, &mut config) {
                Ok(pair) => pair,
                Err(Error::CommonAtom) => {
                    // A shared atom position is an invariant violation of the
                    // measure pair itself, not a malformed input.
                    println!("FAIL pair.disjoint_atoms measured=1 guard=0");
                    println!("verify: 1 checks, FAILURES");
                    return Ok(ExitCode::from(1));
                }
                Err(e) => return Err(e),
            };
            let (f, g) = generate_functions(&config, &pair);
            let findings = verify::run_on(&pair, &f, &g, &config);
            let mut ok = true;
            for finding in &findings {
                let status = if finding.pass { "pass" } else { "FAIL" };
                println!(
                    "{status} {} measured={} guard={}",
                    finding.check,
                    fmt_f64(finding.measured),
                    fmt_f64(finding.guard)
                );
                ok &= finding.pass;
            }
            println!(
                "verify: {} checks, {}",
                findings.len(),
                if ok { "all pass" } else { "FAILURES" }
            );
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Sweep { config, axis, values, out, max_seconds } => {
            let base = config.to_config()?;
            let start = Instant::now();
            let mut csv = String::from("instance_id,p,name,value,mode,witness_digest,runtime_ms\n");
            let axis_values: Vec<&str> =
                values.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
            for (idx, value) in axis_values.iter().enumerate() {
                if let Some(limit) = max_seconds {
                    if start.elapsed().as_secs_f64() > limit {
                        emit(&out, &csv)?;
                        eprintln!("sweep: budget exceeded after {idx} axis values");
                        return Ok(ExitCode::from(3));
                    }
                }
                let mut config = base.clone();
                match axis.as_str() {
                    "p" => {
                        config.p_list = vec![value
                            .parse()
                            .map_err(|_| Error::InvalidInput(format!("bad p: {value}")))?]
                    }
                    "gamma" => {
                        config.gamma = value
                            .parse()
                            .map_err(|_| Error::InvalidInput(format!("bad gamma: {value}")))?
                    }
                    "eps" => {
                        let (n, d) = value
                            .split_once('/')
                            .ok_or_else(|| Error::InvalidInput(format!("bad eps: {value}")))?;
                        config.eps_num = n
                            .parse()
                            .map_err(|_| Error::InvalidInput(format!("bad eps: {value}")))?;
                        config.eps_den = d
                            .parse()
                            .map_err(|_| Error::InvalidInput(format!("bad eps: {value}")))?;
                    }
                    "atoms" => {
                        let n: usize = value
                            .parse()
                            .map_err(|_| Error::InvalidInput(format!("bad atom count: {value}")))?;
                        config.sigma_atoms = n;
                        config.omega_atoms = n;
                    }
                    other => return Err(Error::InvalidInput(format!("unknown axis: {other}"))),
                }
                let pair = generate(&config)?;
                let instance_id =
                    format!("seed{}_{}{}", config.seed, axis, value.replace('/', "_"));
                sweep_rows(&mut csv, &instance_id, &pair, &config)?;
            }
            emit(&out, &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Search { config, objective, budget, out, max_seconds } => {
            if budget == 0 {
                eprintln!("search: zero budget");
                return Ok(ExitCode::from(3));
            }
            let config = config.to_config()?;
            let start = Instant::now();
            let (trace, exceeded) = search(&config, &objective, budget, max_seconds, start)?;
            emit(&out, &trace)?;
            Ok(if exceeded { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
    }
}

/// The full battery of characteristics for one exponent.
fn characteristic_rows(
    pair: &MeasurePair,
    p: f64,
    config: &ExperimentConfig,
) -> Result<Vec<CharacteristicReport>, Error> {
    let ascent = config.ascent();
    let mode = if config.exhaustive_intervals && pair.grid.l <= 6 {
        IntervalMode::Exhaustive
    } else {
        IntervalMode::Dyadic
    };
    let mut rows = Vec::new();
    if (p - 2.0).abs() < 1e-12 {
        rows.push(operator_norm(pair, p, NormMethod::ExactP2)?);
    }
    if pair.sigma.len() <= 3 && !pair.sigma.is_empty() {
        rows.push(operator_norm(pair, p, NormMethod::BruteSmall)?);
    }
    rows.push(operator_norm(pair, p, NormMethod::Ascent { restarts: ascent.restarts })?);
    for side in [Side::Forward, Side::Dual] {
        for kind in [
            TestingKind::ScalarLocal,
            TestingKind::ScalarGlobal,
            TestingKind::QuadLocal,
            TestingKind::QuadGlobal,
        ] {
            rows.push(testing(pair, p, kind, side, mode, &ascent));
        }
        for kind in [
            MuckenhouptKind::TailedScalar,
            MuckenhouptKind::OffsetQuad,
            MuckenhouptKind::TripleQuad,
            MuckenhouptKind::GlobalQuad,
            MuckenhouptKind::PlainQuad,
            MuckenhouptKind::PuncturedScalar,
        ] {
            rows.push(muckenhoupt(pair, p, kind, side, mode, &ascent));
        }
    }
    rows.push(wbp(pair, p, pair.grid.r, &ascent));
    rows.push(energy_characteristic(pair, p));
    Ok(rows)
}

fn report_text(pair: &MeasurePair, config: &ExperimentConfig) -> Result<String, Error> {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    let (f, g) = generate_functions(config, pair);
    for &p in &config.p_list {
        let rows = characteristic_rows(pair, p, config)?;
        let mut by_name = BTreeMap::new();
        for row in &rows {
            out.push_str(&format!(
                "char name={} p={} value={} mode={} witness={:016x}{}\n",
                row.name,
                fmt_f64(p),
                fmt_f64(row.value),
                row.mode.as_str(),
                row.witness_digest(),
                if row.flags.is_empty() {
                    String::new()
                } else {
                    format!(" flags={}", row.flags.join("+"))
                }
            ));
            by_name.insert(row.name.clone(), row.clone());
        }
        // Forest-bound characteristics and the form decomposition.
        let forest = build_cz_energy_forest(pair, &f, p, config.gamma, pair.grid.top())?;
        let stop = stopping_energy(pair, p, &forest);
        out.push_str(&format!(
            "char name={} p={} value={} mode={} witness={:016x}\n",
            stop.name,
            fmt_f64(p),
            fmt_f64(stop.value),
            stop.mode.as_str(),
            stop.witness_digest()
        ));
        if let Ok((rfe, kernel)) =
            refined_functional_energy(pair, p, &forest, 16.0, &config.ascent())
        {
            out.push_str(&format!(
                "char name={} p={} value={} mode={} witness={:016x}\n",
                rfe.name,
                fmt_f64(p),
                fmt_f64(rfe.value),
                rfe.mode.as_str(),
                rfe.witness_digest()
            ));
            out.push_str(&format!(
                "kernel p={} forward={} backward={} monotone={} hole={} plug={}\n",
                fmt_f64(p),
                fmt_f64(kernel.forward_testing),
                fmt_f64(kernel.backward_testing),
                kernel.monotonicity_ok,
                fmt_f64(kernel.hole_energy),
                fmt_f64(kernel.plug_energy)
            ));
        }
        let arithmetic = if config.rational_identities {
            Arithmetic::Rational
        } else {
            Arithmetic::Float
        };
        let decomp = decompose(pair, &f, &g, &forest, arithmetic)?;
        for (name, value) in [
            ("total", decomp.total),
            ("below", decomp.b_below),
            ("above", decomp.b_above),
            ("disjoint", decomp.b_disj),
            ("disjoint_long", decomp.b_disj_long),
            ("disjoint_mid", decomp.b_disj_mid),
            ("disjoint_dual", decomp.b_disj_dual),
            ("comparable", decomp.b_comp),
            ("comparable_dual", decomp.b_comp_dual),
            ("home", decomp.b_home),
            ("neighbour", decomp.b_neigh),
            ("diagonal", decomp.b_diag),
            ("far", decomp.b_far),
            ("paraproduct", decomp.b_para),
            ("stopping", decomp.b_stop),
            ("intertwining", decomp.b_inter),
        ] {
            out.push_str(&format!(
                "form p={} name={name} value={}\n",
                fmt_f64(p),
                fmt_f64(value)
            ));
        }
        out.push_str(&format!(
            "projection p={} f_defect={} g_defect={}\n",
            fmt_f64(p),
            fmt_f64(decomp.projection_defect_f),
            fmt_f64(decomp.projection_defect_g)
        ));
        out.push_str(&format!(
            "residuals p={} six_way={} home_neigh={} diag_far={} para_stop={} far_inter={} exact_zero={}\n",
            fmt_f64(p),
            fmt_f64(decomp.residuals.six_way),
            fmt_f64(decomp.residuals.home_neigh),
            fmt_f64(decomp.residuals.diag_far),
            fmt_f64(decomp.residuals.para_stop),
            fmt_f64(decomp.residuals.far_inter),
            decomp.residuals.exact_zero
        ));
        // Bound table when every referenced characteristic is present.
        let needed = [
            "testing.scalar_local",
            "testing.quad_local",
            "testing.quad_global",
            "muckenhoupt.offset_quad",
            "muckenhoupt.triple_quad",
            "muckenhoupt.punctured_scalar",
            "wbp",
        ];
        if needed.iter().all(|n| by_name.contains_key(*n)) {
            let f_norm = f.lp_norm(p);
            let g_norm = g.lp_norm(twoweight::conjugate(p));
            let rows = bound_report(&decomp, &by_name, f_norm, g_norm)?;
            for row in rows {
                out.push_str(&format!(
                    "bound p={} index={} form={} ratio={} upper_estimate={}\n",
                    fmt_f64(p),
                    row.index,
                    row.form,
                    fmt_f64(row.ratio),
                    row.upper_estimate
                ));
            }
        }
    }
    Ok(out)
}

fn sweep_rows(
    csv: &mut String,
    instance_id: &str,
    pair: &MeasurePair,
    config: &ExperimentConfig,
) -> Result<(), Error> {
    for &p in &config.p_list {
        let started = Instant::now();
        let rows = characteristic_rows(pair, p, config)?;
        let (f, _) = generate_functions(config, pair);
        let forest = build_cz_energy_forest(pair, &f, p, config.gamma, pair.grid.top())?;
        let stop = stopping_energy(pair, p, &forest);
        let elapsed = started.elapsed().as_millis();
        for row in rows.iter().chain(std::iter::once(&stop)) {
            csv.push_str(&format!(
                "{instance_id},{},{},{},{},{:016x},{}\n",
                fmt_f64(p),
                row.name,
                fmt_f64(row.value),
                row.mode.as_str(),
                row.witness_digest(),
                elapsed
            ));
        }
        // Forest size, for the gamma-axis monotonicity record.
        csv.push_str(&format!(
            "{instance_id},{},forest.tops,{},exact,{:016x},{}\n",
            fmt_f64(p),
            forest.tops().len(),
            0u64,
            elapsed
        ));
    }
    Ok(())
}

fn objective_value(
    pair: &MeasurePair,
    objective: &str,
    config: &ExperimentConfig,
) -> Result<f64, Error> {
    let ascent = AscentConfig::light(config.seed);
    match objective {
        "norm_over_charsum" => {
            let norm = operator_norm(pair, 2.0, NormMethod::ExactP2)?.value;
            let t_fwd = testing(pair, 2.0, TestingKind::ScalarLocal, Side::Forward, IntervalMode::Dyadic, &ascent)
                .value;
            let t_dual = testing(pair, 2.0, TestingKind::ScalarLocal, Side::Dual, IntervalMode::Dyadic, &ascent)
                .value;
            let muck = muckenhoupt(
                pair,
                2.0,
                MuckenhouptKind::TailedScalar,
                Side::Forward,
                IntervalMode::Dyadic,
                &ascent,
            )
            .value;
            let denom = t_fwd + t_dual + muck;
            Ok(if denom > 0.0 { norm / denom } else { 0.0 })
        }
        "energy_over_testing" => {
            let energy = energy_characteristic(pair, 2.0).value;
            let t = testing(pair, 2.0, TestingKind::ScalarLocal, Side::Forward, IntervalMode::Dyadic, &ascent)
                .value;
            Ok(if t > 0.0 { energy / t } else { 0.0 })
        }
        other => Err(Error::InvalidInput(format!("unknown objective: {other}"))),
    }
}

/// Hill climbing over atom masses and free-cell moves; the trace of
/// best-so-far values is nondecreasing by construction.
fn search(
    config: &ExperimentConfig,
    objective: &str,
    budget: u64,
    max_seconds: Option<f64>,
    start: Instant,
) -> Result<(String, bool), Error> {
    let mut rng = SplitMix64::new(config.seed ^ 0x5ea2c4);
    let mut pair = generate(config)?;
    let mut best = objective_value(&pair, objective, config)?;
    let mut trace = String::new();
    trace.push_str("step,best_value\n");
    trace.push_str(&format!("0,{}\n", fmt_f64(best)));
    let cells = 1u64 << config.l;
    for step in 1..=budget {
        if let Some(limit) = max_seconds {
            if start.elapsed().as_secs_f64() > limit {
                trace.push_str(&format!("# aborted at step {step}\n"));
                return Ok((trace, true));
            }
        }
        // Mutate: scale one mass or move one atom to another cell center.
        let sigma_atoms: Vec<(twoweight::grid::Dyadic, f64)> = pair.sigma.atoms().collect();
        let omega_atoms: Vec<(twoweight::grid::Dyadic, f64)> = pair.omega.atoms().collect();
        let mutate_sigma = rng.next_below(2) == 0;
        let mut s = sigma_atoms.clone();
        let mut o = omega_atoms.clone();
        {
            let target = if mutate_sigma { &mut s } else { &mut o };
            let idx = rng.next_below(target.len() as u64) as usize;
            if rng.next_below(2) == 0 {
                let factor = (rng.next_gaussian() * 0.5).exp();
                target[idx].1 = (target[idx].1 * factor).clamp(1e-6, 1e6);
            } else {
                let cell = rng.next_below(cells);
                let pos =
                    twoweight::grid::Dyadic::new((2 * cell + 1) as i64, (config.l - config.m) + 1);
                target[idx].0 = pos;
            }
        }
        let (Ok(sm), Ok(om)) = (
            twoweight::grid::AtomicMeasure::new(s),
            twoweight::grid::AtomicMeasure::new(o),
        ) else {
            trace.push_str(&format!("{step},{}\n", fmt_f64(best)));
            continue;
        };
        let Ok(cand_pair) = MeasurePair::new(pair.grid, sm, om) else {
            trace.push_str(&format!("{step},{}\n", fmt_f64(best)));
            continue;
        };
        let value = objective_value(&cand_pair, objective, config)?;
        if value > best {
            best = value;
            pair = cand_pair;
        }
        trace.push_str(&format!("{step},{}\n", fmt_f64(best)));
    }
    trace.push_str("# final instance\n");
    for line in write_instance(config, &pair).lines() {
        trace.push_str(&format!("# {line}\n"));
    }
    Ok((trace, false))
}
