use thiserror::Error;

/// Errors raised by the numerical routines and the file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |h - h^dagger| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("chemical potential {mu} lies inside band {band} (closest approach at k = ({kx:.6}, {ky:.6}))")]
    MuInsideBand { mu: f64, band: usize, kx: f64, ky: f64 },

    #[error("gap closes at k = ({kx:.6}, {ky:.6}): eigenvalue within {tol:e} of {level}")]
    Gapless { kx: f64, ky: f64, level: f64, tol: f64 },

    #[error("fictitious spectrum within {margin:e} of 1/2 at k = ({kx:.6}, {ky:.6}) (occupation {occupation})")]
    FictitiousGapViolation { kx: f64, ky: f64, occupation: f64, margin: f64 },

    #[error("ill-conditioned loop: overlap determinant {modulus:.3e} at link {link} (grid too coarse or gap closing)")]
    IllConditionedLoop { link: usize, modulus: f64 },

    #[error("Chern sum {value:.9} is {residue:.3e} away from an integer")]
    NonIntegerChern { value: f64, residue: f64 },

    #[error("phase profile under-resolved: jump {jump:.4} rad between samples {index} and {next}; refine the loop to at least {suggested} samples")]
    UnderResolved { jump: f64, index: usize, next: usize, suggested: usize },

    #[error("EGP undefined (zero amplitude) at transverse k = {transverse_k:.6}: singular-value ratio {ratio:.3e}")]
    ZeroAmplitude { transverse_k: f64, ratio: f64 },

    #[error("EGP Chern inconsistency: C_x = {cx}, C_y = {cy}")]
    EgpChernInconsistency { cx: i64, cy: i64 },

    #[error("density matrix is rank deficient (smallest eigenvalue {min_eigenvalue:e})")]
    RankDeficient { min_eigenvalue: f64 },

    #[error("Uhlmann link {link} is not near identity (|V - 1| = {norm:.3}); refine the path")]
    LinkNotNearIdentity { link: usize, norm: f64 },

    #[error("Uhlmann phase undefined: |Tr[rho H]| = {modulus:.3e}")]
    UhlmannUndefined { modulus: f64 },

    #[error("path refinement did not converge: phase still moves by {delta:.3e} at M = {samples}")]
    RefinementNotConverged { delta: f64, samples: usize },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
