//! Lower and upper distortion bounds for dense sensor networks observing an
//! Ornstein-Uhlenbeck process under a sum power constraint.
//!
//! The lower bound combines the sampling distortion `D_s` with the
//! distortion-rate function evaluated at the cut-set capacity; the upper bound
//! is the distortion of a separation-based scheme at the achievable
//! cooperative rate.

pub mod achievable;
pub mod capacity;
pub mod error;
pub mod linalg;
pub mod mmse;
pub mod ou;
pub mod quadrature;
pub mod rate_distortion;
pub mod report;
pub mod validate;

pub use achievable::{
    distortion_achievable, distortion_second_term, rate_achievable_of_theta, scaled_spectrum, theta_achievable_of_rate,
    upper_bound_distortion, ScaledSpectrum, UpperBound, ValidityWindow,
};
pub use capacity::{
    beta_constant, capacity_achievable, capacity_upper, classify_regime, AchievableRate, NetworkConfig, PowerLaw,
    RegimeLabel,
};
pub use error::{BoundsError, Result};
pub use mmse::{
    build_covariance, distortion_from_samples, monte_carlo_distortion, CovarianceSystem, MonteCarloEstimate,
    SampleGeometry, Solver, DEFAULT_QUAD_ORDER,
};
pub use ou::{Bracket, EigenSequence, OuParams, SequenceKind, TailLaw};
pub use rate_distortion::{
    distortion_of_theta, lower_bound_distortion, rate_of_theta, theta_of_rate, WaterfillPoint, DEFAULT_TOL,
};
pub use report::{fit_scaling, regime_table, sweep, BoundsRow, FitTarget, ScalingFit, SweepRow, SweepSpec};

/// `n` points spaced evenly in `ln x` from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}
