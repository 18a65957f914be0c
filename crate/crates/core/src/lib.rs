//! Dyadic two-weight analysis for the Hilbert transform on finite atomic
//! measure pairs.
//!
//! Everything lives on a truncated dyadic grid over a top interval
//! `[0, 2^m)`: weighted Haar systems and martingale differences, the
//! truncated Hilbert transform and its bilinear form, Poisson integrals,
//! the full family of testing / Muckenhoupt / weak-boundedness / energy
//! characteristics, Calderon-Zygmund and dual-tree stopping-time
//! constructions, and the exact hierarchical decomposition of the bilinear
//! form into named pieces.  All interval geometry is exact integer
//! arithmetic; measure masses and function values are `f64` with an
//! optional exact-rational mode for the bilinear partition identities.

pub mod chars;
pub mod corona;
pub mod dual_tree;
pub mod error;
pub mod exact;
pub mod forms;
pub mod grid;
pub mod guards;
pub mod haar;
pub mod hilbert;
pub mod instance;
pub mod linalg;
pub mod rng;
pub mod verify;

pub use chars::{CharacteristicReport, Mode, Witness};
pub use error::{Error, Result};
pub use forms::FormDecomposition;
pub use grid::{AtomicMeasure, Dyadic, DyadicInterval, Grid, MeasurePair};
pub use haar::FunctionOnAtoms;
pub use instance::ExperimentConfig;

/// Holder conjugate exponent `p' = p / (p - 1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `L^p(mu)` norm of values given atomwise, summed in atom order.
pub fn lp_norm(values: &[f64], masses: &[f64], p: f64) -> f64 {
    debug_assert_eq!(values.len(), masses.len());
    let mut acc = 0.0;
    for (v, m) in values.iter().zip(masses) {
        acc += v.abs().powf(p) * m;
    }
    acc.powf(1.0 / p)
}
