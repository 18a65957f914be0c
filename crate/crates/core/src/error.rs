use std::fmt;

/// Errors surfaced by grid, measure and characteristic operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Navigation past the top interval or below the atom resolution level.
    OutOfGrid,
    /// An average was requested over a set of zero measure.
    ZeroMass,
    /// The two measures of a pair share an atom position.
    CommonAtom,
    /// Dense search requested above its size cap.
    TooLarge { atoms: usize, cap: usize },
    /// More atoms requested than distinct grid cells available.
    TooManyAtoms { requested: usize, cells: u64 },
    /// Stopping-time recursion exceeded its step bound.
    GammaTooSmall,
    /// Inner forests do not sit inside the claimed outer coronas.
    MismatchedTops,
    /// A forest failed its Carleson-norm bound.
    NotCarleson { norm: f64, bound: f64 },
    /// Ratio with an identically zero denominator.
    ZeroDenominator,
    /// A bound table referenced a characteristic that was not supplied.
    MissingCharacteristic(String),
    /// The supplied forest does not control the averages of the function.
    NotAForestForF,
    /// Malformed input file or configuration.
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfGrid => write!(f, "interval navigation left the grid"),
            Error::ZeroMass => write!(f, "average over a set of zero measure"),
            Error::CommonAtom => write!(f, "measures share an atom position"),
            Error::TooLarge { atoms, cap } => {
                write!(f, "dense search supports at most {cap} atoms, got {atoms}")
            }
            Error::TooManyAtoms { requested, cells } => {
                write!(f, "requested {requested} atoms but only {cells} grid cells exist")
            }
            Error::GammaTooSmall => write!(f, "stopping-time recursion failed to terminate"),
            Error::MismatchedTops => write!(f, "inner forest does not match its outer corona"),
            Error::NotCarleson { norm, bound } => {
                write!(f, "forest Carleson norm {norm} exceeds bound {bound}")
            }
            Error::ZeroDenominator => write!(f, "zero denominator in ratio"),
            Error::MissingCharacteristic(name) => {
                write!(f, "missing characteristic report: {name}")
            }
            Error::NotAForestForF => {
                write!(f, "forest does not control corona averages of the function")
            }
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
