//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, ScarError>;

#[derive(Debug, Error)]
pub enum ScarError {
    /// A small divisor fell below the guard threshold `κ/(10·Δ(|γ|₁))`,
    /// i.e. the frequency fails its declared non-resonance class at the
    /// cutoff actually needed.
    #[error("divisor too small: |<omega,gamma>| = {divisor:.3e} at gamma = {gamma:?} (guard {guard:.3e})")]
    DivisorTooSmall {
        gamma: Vec<i32>,
        divisor: f64,
        guard: f64,
    },

    /// Fixed-point inversion of a canonical map did not reach the requested
    /// residual within the iteration cap (t_max too large for the step).
    #[error("canonical map inversion diverged: residual {residual:.3e} after {iterations} iterations (tol {tol:.3e})")]
    InversionDiverged {
        residual: f64,
        iterations: usize,
        tol: f64,
    },

    /// The quasimode phase `t·sup|ψ|/h` left its validity regime.
    #[error("quasimode phase too large: t*sup|psi|/h = {value:.3e} exceeds bound {bound:.3e}")]
    PhaseTooLarge { value: f64, bound: f64 },

    /// Two energy windows intersect; the separation hypothesis failed.
    #[error("energy windows overlap: mu_{{{m:?}}} = {mu_a:.6e} and mu_{{{m_prime:?}}} = {mu_b:.6e} with half-width {half_width:.3e}")]
    WindowsOverlap {
        m: Vec<i64>,
        m_prime: Vec<i64>,
        mu_a: f64,
        mu_b: f64,
        half_width: f64,
    },

    /// Evaluation requested outside the declared Taylor validity box.
    #[error("action {action:?} outside validity box around {base:?} (radius {radius:?})")]
    OutOfActionBox {
        action: Vec<f64>,
        base: Vec<f64>,
        radius: Vec<f64>,
    },

    /// Near-identity composition with maps too large for the Taylor margin.
    #[error("composition map too large: sup estimate {sup:.3e} exceeds margin {margin:.3e}")]
    MapTooLarge { sup: f64, margin: f64 },

    /// Spectral basis box does not isolate the requested energy band.
    #[error("basis box margin insufficient: boundary Gershgorin disc [{lo:.4}, {hi:.4}] meets band [{a:.4}, {b:.4}]")]
    BoxMarginInsufficient { lo: f64, hi: f64, a: f64, b: f64 },

    /// Model construction rejected (e.g. zero-mean amplitude in the example
    /// family, which would make the leading normal-form coefficient vanish).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Approximation-function parameters violate a structural requirement.
    #[error("invalid approximation function: {0}")]
    InvalidApproximation(String),

    /// Configuration rejected before any computation.
    #[error("config error: {0}")]
    Config(String),

    /// A scientific invariant failed on real data; reported, not silent.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl ScarError {
    /// Process exit code the CLI maps this error to.
    ///
    /// 2 = configuration rejected, 3 = numeric failure, 4 = invariant
    /// violation (a finding), 1 = everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScarError::Config(_) | ScarError::InvalidModel(_) | ScarError::InvalidApproximation(_) => 2,
            ScarError::DivisorTooSmall { .. }
            | ScarError::InversionDiverged { .. }
            | ScarError::PhaseTooLarge { .. }
            | ScarError::MapTooLarge { .. }
            | ScarError::OutOfActionBox { .. }
            | ScarError::BoxMarginInsufficient { .. } => 3,
            ScarError::WindowsOverlap { .. } | ScarError::InvariantViolation(_) => 4,
            _ => 1,
        }
    }
}
