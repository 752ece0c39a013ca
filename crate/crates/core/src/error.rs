use num_complex::Complex64;
use thiserror::Error;

use crate::poly::PolyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Poly(#[from] PolyError),

    #[error("invalid background: {0}")]
    InvalidBackground(String),

    #[error("background not a valid Jacobi period: {0}")]
    BandBreakdown(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("Dirichlet pole at λ = {0}")]
    DirichletPole(Complex64),

    #[error("λ = {0} is not in the absolutely continuous spectrum")]
    NotInBand(f64),

    #[error("ill-conditioned point λ = {lambda}: {reason}")]
    IllConditioned { lambda: f64, reason: String },

    #[error("λ = {0} is at a state (ξ vanishes)")]
    AtState(Complex64),

    #[error(
        "ambiguous sheet for gap root λ = {lambda}: residuals physical {physical:e}, nonphysical {nonphysical:e}"
    )]
    AmbiguousSheet {
        lambda: f64,
        physical: f64,
        nonphysical: f64,
    },

    #[error("state count violation: located {located}, expected {expected}")]
    StateCountViolation { located: usize, expected: usize },

    #[error("numerical defect: {0}")]
    NumericalDefect(String),

    #[error("gap {0} is closed")]
    ClosedGap(usize),

    #[error("no finite gap with index {0}")]
    NoSuchGap(usize),

    #[error("theorem requires u = 0")]
    RequiresZeroU,

    #[error("small-coupling analysis inconclusive: {0}")]
    Inconclusive(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
