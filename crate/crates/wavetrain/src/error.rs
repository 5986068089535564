//! Error taxonomy for the asymptotic pipeline.
//!
//! Variants are structured so callers can distinguish contract violations
//! (bad input) from genuine analytic obstructions (flat bands, caustics,
//! degenerate stationary points) that the asymptotic theory itself excludes.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract arguments (non-positive coefficient,
    /// empty grids, inconsistent shapes, unsupported parameter ranges).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The dense Hermitian eigensolver did not meet its residual contract.
    #[error("eigensolver residual {residual:.3e} exceeds {tolerance:.3e} at xi = {xi}")]
    Eigensolver {
        xi: f64,
        residual: f64,
        tolerance: f64,
    },

    /// Frequency-parametrized quantities are undefined where the band is
    /// locally flat: the map xi -> Omega folds and cannot be inverted.
    #[error("flat-band derivative undefined at xi = {xi}: |Omega(xi+d) - Omega(xi-d)| = {delta:.3e} < {threshold:.3e}")]
    FlatBand { xi: f64, delta: f64, threshold: f64 },

    /// A (band, wavenumber) query bracketed no dispersion root. Within a
    /// true band this cannot happen, so it signals a gap query or a
    /// bracketing bug; the bracket searched is reported.
    #[error("band-gap query: no dispersion root for band {band} at kappa = {kappa} in [{lo}, {hi}]")]
    BandGapQuery {
        band: usize,
        kappa: f64,
        lo: f64,
        hi: f64,
    },

    /// Root scanning exhausted its search range without the requested count.
    #[error("scan exhausted at Omega = {ceiling}: found {found} of {requested} requested items")]
    RangeExhausted {
        ceiling: f64,
        found: usize,
        requested: usize,
    },

    /// A closed-form evaluation hit a point where its defining expressions
    /// degenerate (vanishing normalization, zero frequency, ...).
    #[error("degenerate point: {0}")]
    DegeneratePoint(String),

    /// Stationary-phase second derivative below the resolvable threshold;
    /// the quadratic (Gaussian) local model does not apply.
    #[error("degenerate stationary phase at kappa = {kappa}: |phase''| = {second:.3e} < {threshold:.3e}")]
    DegenerateStationaryPhase {
        kappa: f64,
        second: f64,
        threshold: f64,
    },

    /// A degenerate stationary point sits inside the reconstruction set;
    /// the field there needs a cubic (Airy) local model, which is out of
    /// scope.
    #[error("Airy-regime point at kappa = {kappa}: stationary phase is cubic to leading order")]
    AiryRegime { kappa: f64 },

    /// The ray map sigma -> x stopped being invertible: characteristics
    /// cross inside the reported interval.
    #[error("characteristic crossing: ray map folds for sigma in [{lo}, {hi}]")]
    CausticCrossing { lo: f64, hi: f64 },

    /// Wavenumber left the fundamental interval [-pi, pi). No wrapping is
    /// performed: silently reducing would conflate distinct branches.
    #[error("wavenumber {xi} outside the fundamental interval [-pi, pi)")]
    OutsideBrillouin { xi: f64 },

    /// Group velocity vanished along a ray of a time-dependent medium,
    /// where the amplitude exponent is parametrized by the frequency.
    #[error("degenerate transport exponent: group velocity {group_velocity:.3e} at t = {t} too small to parametrize the amplitude by frequency")]
    DegenerateTransportExponent { t: f64, group_velocity: f64 },

    /// Spatial window invalid or too small for the requested measurement.
    #[error("window error: {0}")]
    Window(String),

    /// The time stepper blew up; reports where and the CFL numbers needed
    /// to diagnose the failure.
    #[error("time stepping unstable at step {step} (t = {t:.6}): max |u| = {max_abs:.3e}, dt = {dt:.3e}, CFL limit {dt_cfl:.3e}")]
    Instability {
        step: usize,
        t: f64,
        max_abs: f64,
        dt: f64,
        dt_cfl: f64,
    },

    /// Catch-all for numerical failures with context.
    #[error("numerical failure: {0}")]
    Numerical(String),
}
