//! Calibration sweep: measures every guarded ratio over seeded instances and
//! prints the observed maxima.  Run explicitly with `-- --ignored`.

use std::collections::BTreeMap;
use twoweight::instance::{ExperimentConfig, MassDistribution};
use twoweight::verify;

#[test]
#[ignore = "calibration sweep; run on demand"]
fn calibrate() {
    let mut maxima: BTreeMap<String, f64> = BTreeMap::new();
    let mut failures = 0usize;
    let count: u64 = std::env::var("CALIBRATE_COUNT")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);
    for seed in 1..=count {
        let l = if seed % 11 == 0 { 8 } else if seed % 13 == 0 { 7 } else { 6 };
        let (r, tau) = if l >= 8 { (4, 5) } else { (3, 4) };
        let config = ExperimentConfig {
            seed,
            l,
            r,
            tau,
            sigma_atoms: 2 + (seed as usize * 7) % 31,
            omega_atoms: 2 + (seed as usize * 11) % 31,
            masses: if seed % 2 == 0 { MassDistribution::Unit } else { MassDistribution::LogUniform },
            adversarial: seed % 7 == 0,
            restarts: 2,
            iterations: 300,
            rational_identities: seed % 10 == 0,
            ..Default::default()
        };
        match verify::run(&config) {
            Ok(findings) => {
                for f in &findings {
                    if !f.pass {
                        println!("seed {seed} FAIL {} measured={} guard={}", f.check, f.measured, f.guard);
                        failures += 1;
                    }
                    // Strip per-instance detail for aggregation.
                    let key: String = f
                        .check
                        .split('.')
                        .take(2)
                        .collect::<Vec<_>>()
                        .join(".");
                    let slot = maxima.entry(key).or_insert(0.0);
                    if f.measured.is_finite() {
                        *slot = slot.max(f.measured);
                    }
                }
            }
            Err(e) => {
                println!("seed {seed} generation error: {e}");
                failures += 1;
            }
        }
    }
    println!("--- observed maxima over {count} seeds ---");
    for (k, v) in &maxima {
        println!("{k}: {v:.6}");
    }
    assert_eq!(failures, 0, "{failures} guard failures");
}
