use thiserror::Error;

/// Every failure the numerical pipeline can report.
///
/// Variants carry enough context to print a useful diagnostic; the CLI
/// serializes `kind()` plus the display string as its error JSON.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("potential is not positive: min sample {min} at phase {at}")]
    NonPositivePotential { min: f64, at: f64 },

    #[error("periodicity violation: seam jump {jump} exceeds {allowed}")]
    PeriodicityViolation { jump: f64, allowed: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("quadrature failed to converge: estimated relative error {estimate}")]
    QuadratureFailure { estimate: f64 },

    #[error("root bracket failure in {context}: f(lo={lo})={f_lo}, f(hi={hi})={f_hi}")]
    BracketFailure {
        context: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("root bracket failure while inverting the corrector primitive at z={z}")]
    RootBracketFailure { z: f64 },

    #[error("trajectory never reached h={target} (slope vanished at z={z})")]
    NoHit { target: f64, z: f64 },

    #[error("step budget of {budget} exhausted at z={z}")]
    StepLimit { budget: usize, z: f64 },

    #[error("cell residual {residual} exceeds tolerance {tol} at z={z}")]
    ResidualTooLarge { residual: f64, tol: f64, z: f64 },

    #[error("effective speed decreases between p={p_lo} ({c_lo}) and p={p_hi} ({c_hi})")]
    MonotonicityViolation {
        p_lo: f64,
        p_hi: f64,
        c_lo: f64,
        c_hi: f64,
    },

    #[error("time step {dt} violates the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("solution overflowed (|u| = {value})")]
    Overflow { value: f64 },

    #[error("profile is not in class L: {reason}")]
    NotInClassL { reason: String },

    #[error("epoch budget exceeded ({0} epochs)")]
    EpochOverflow(usize),

    #[error("initial data does not match declared kind {kind}: {reason}")]
    KindMismatch { kind: String, reason: String },

    #[error("domain too small: kernel mass {mass} outside padding")]
    DomainTooSmall { mass: f64 },

    #[error("observation window violates the influence margin: {0}")]
    WindowViolation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io failure on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositivePotential { .. } => "NonPositivePotential",
            Error::PeriodicityViolation { .. } => "PeriodicityViolation",
            Error::InvalidPotential(_) => "InvalidPotential",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::RootBracketFailure { .. } => "RootBracketFailure",
            Error::NoHit { .. } => "NoHit",
            Error::StepLimit { .. } => "StepLimit",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::MonotonicityViolation { .. } => "MonotonicityViolation",
            Error::CflViolation { .. } => "CflViolation",
            Error::Overflow { .. } => "Overflow",
            Error::NotInClassL { .. } => "NotInClassL",
            Error::EpochOverflow(_) => "EpochOverflow",
            Error::KindMismatch { .. } => "KindMismatch",
            Error::DomainTooSmall { .. } => "DomainTooSmall",
            Error::WindowViolation(_) => "WindowViolation",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io { .. } => "IoFailure",
        }
    }

    /// Configuration and IO problems, as opposed to failures of the mathematics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::Io { .. } | Error::InvalidPotential(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
