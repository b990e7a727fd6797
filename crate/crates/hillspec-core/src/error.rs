use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for every failure path in the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("duplicate Fourier frequency {0} in coefficient table")]
    DuplicateFrequency(i64),
    #[error("mean coefficient q_0 must vanish, got {0}")]
    NonzeroMean(Complex64),
    #[error("coefficient at frequency {0} is not finite")]
    NonFiniteCoefficient(i64),
    #[error("empty coefficient table (only the `free` preset may be empty)")]
    EmptyTable,
    #[error("potential file, line {line}: {msg}")]
    PotentialParse { line: usize, msg: String },
    #[error("invalid potential preset `{0}`")]
    PresetParse(String),
    #[error(
        "condition range needs Fourier index {needed} but the table ends at {have} and no decay law is attached"
    )]
    InsufficientSupport { needed: i64, have: i64 },

    #[error("step size underflow at x = {x}")]
    StepSizeUnderflow { x: f64 },
    #[error("ODE integration failed at x = {x}: {msg}")]
    OdeFailure { x: f64, msg: String },
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("derivative breakdown: |dF/dlambda| = {df:.3e} at lambda = {lambda} away from any root")]
    DerivativeBreakdown { lambda: Complex64, df: f64 },
    #[error("contour too close to a root: min |F - 2cos t| = {min_modulus:.3e} < floor {floor:.3e}")]
    ContourNearRoot { min_modulus: f64, floor: f64 },
    #[error("winding quadrature did not round cleanly to an integer: {value}")]
    WindingNotInteger { value: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("truncation certification failed for index {index}: |delta| = {delta:.3e} > {tol:.3e}")]
    CertificationFailure { index: i64, delta: f64, tol: f64 },
    #[error("index {index} outside the certified window |n| <= {max}")]
    IndexOutsideCertified { index: i64, max: i64 },
    #[error("eigenvalue of index {index} at t = {t} is defective (geometric < algebraic multiplicity)")]
    DefectiveEigenvalue { index: i64, t: f64 },
    #[error("eigenvalue {lambda} within {distance:.3e} of the region boundary")]
    BoundaryEigenvalue { lambda: Complex64, distance: f64 },

    #[error("resonant denominator at partial sum {partial_sum}: modulus {modulus:.3e} below floor {floor:.3e}")]
    ResonantDenominator { partial_sum: i64, modulus: f64, floor: f64 },
    #[error("series enumeration budget exceeded: {tuples} tuples > {budget}")]
    BudgetExceeded { tuples: u64, budget: u64 },
    #[error("conditions violated at index {index}: leading denominator modulus {modulus:.3e} below floor")]
    DenominatorFloor { index: i64, modulus: f64 },
    #[error("branch ambiguity: Re sqrt(D) vanishes to machine precision at index {index}")]
    BranchAmbiguity { index: i64 },

    #[error("alpha below floor at index {index}, t = {t}: |alpha| = {alpha:.3e}")]
    AlphaFloor { index: i64, t: f64, alpha: f64 },
    #[error("singular arc point inside the projection interval at t = {t}")]
    SingularArcPoint { t: f64 },
    #[error("pairing conflict at index {index}, t = {t}")]
    PairingConflict { index: i64, t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
