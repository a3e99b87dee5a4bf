use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A `LayerStack` failed validation; one message per violated invariant.
    #[error("invalid layer stack: {}", .0.join("; "))]
    InvalidStack(Vec<String>),

    /// Degenerate interface denominator for the given in-plane wavenumber.
    #[error("degenerate plane-wave state at k_parallel = {k_parallel} nm^-1")]
    DegeneratePlaneWave { k_parallel: f64 },

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature not converged: residual {residual:.3e} after {panels} panels")]
    QuadratureNotConverged { residual: f64, panels: usize },

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    /// Spectra passed together do not describe the same stack.
    #[error("mismatched spectra: {0}")]
    MismatchedSpectra(String),

    /// The angular spectrum does not cover the requested range.
    #[error("spectrum coverage: {0}")]
    SpectrumCoverage(String),

    /// Instrument resolution applied twice to the same profile.
    #[error("profile is already smoothed")]
    AlreadySmoothed,

    /// No feasible (t, h) cell in the requested region.
    #[error("infeasible domain: {0}")]
    InfeasibleDomain(String),

    /// k23 > 0 with k31 = 0: the triplet absorbs all population.
    #[error("absorbing triplet state: k23 > 0 with k31 = 0 has no steady state")]
    AbsorbingTriplet,

    /// Photon budget with zero emitted power.
    #[error("undefined efficiency: emitted rate is zero")]
    UndefinedEfficiency,

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
}
