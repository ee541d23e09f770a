//! Reverse water-filling on an eigenvalue sequence.
//!
//! A water level `θ` splits the spectrum: components with `λ_k > θ` are coded
//! at rate `½ ln(λ_k/θ)` and contribute distortion `θ`; the rest are dropped
//! and contribute `λ_k`. Rates are in nats.

use std::f64::consts::PI;

use crate::error::{positive, BoundsError, Result};
use crate::ou::{Bracket, EigenSequence, OuParams, SequenceKind};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_BISECTION_ITERS: usize = 200;
/// Absolute rate resolution in nats. Near `θ = λ₀` a rate is resolved only to
/// about one ulp of `ln(λ₀/θ)`, so tiny targets cannot meet a purely relative tolerance.
pub const RATE_ABS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterfillPoint {
    pub theta: f64,
    pub rate: f64,
    pub distortion: f64,
}

/// `R(θ) = Σ_k max(0, ½ ln(λ_k/θ))`.
pub fn rate_of_theta(seq: &EigenSequence, theta: f64) -> Result<f64> {
    positive("theta", theta)?;
    Ok(0.5 * seq.partition(theta).log_sum)
}

/// `D(θ) = T₀⁻¹ Σ_k min(θ, λ_k)` as a bracket; the width comes only from the
/// analytic tail estimate.
pub fn distortion_bracket(seq: &EigenSequence, theta: f64, t0: f64) -> Result<Bracket> {
    positive("theta", theta)?;
    positive("t0", t0)?;
    if seq.kind() != SequenceKind::Empirical && seq.tail().is_none() {
        return Err(BoundsError::MissingTail);
    }
    let part = seq.partition(theta);
    Ok(part.inactive_sum.shift(theta * part.active as f64).scale(1.0 / t0))
}

/// Midpoint of [`distortion_bracket`].
pub fn distortion_of_theta(seq: &EigenSequence, theta: f64, t0: f64) -> Result<f64> {
    distortion_bracket(seq, theta, t0).map(|b| b.value())
}

pub fn waterfill_point(seq: &EigenSequence, theta: f64, t0: f64) -> Result<WaterfillPoint> {
    Ok(WaterfillPoint {
        theta,
        rate: rate_of_theta(seq, theta)?,
        distortion: distortion_of_theta(seq, theta, t0)?,
    })
}

/// Inverse of [`rate_of_theta`]: the water level at which the sequence needs `rate` nats.
pub fn theta_of_rate(seq: &EigenSequence, rate: f64, tol: f64) -> Result<f64> {
    positive("rate", rate)?;
    positive("tol", tol)?;
    let hi = seq.max_value();
    let rate_at = |theta: f64| 0.5 * seq.partition(theta).log_sum;
    let mut lo = hi;
    // Halve until the bracket straddles the target; R(θ) grows like 1/√θ, so this is short.
    while rate_at(lo) <= rate {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(BoundsError::NonConvergence {
                iterations: 0,
                residual: rate,
            });
        }
    }
    invert_decreasing(rate_at, rate, lo, hi, tol)
}

/// Bisection in `ln θ` for a decreasing `f` with `f(lo) > target ≥ f(hi)`.
/// Stops once `|f(θ) − target| ≤ max(tol·target, RATE_ABS_FLOOR)`.
pub(crate) fn invert_decreasing<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = (lo * hi).sqrt();
        let v = f(mid);
        residual = (v - target).abs();
        if residual <= (tol * target).max(RATE_ABS_FLOOR) {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(BoundsError::NonConvergence {
        iterations: MAX_BISECTION_ITERS,
        residual,
    })
}

/// `D'_p(C)`: distortion-rate of the lower sequence `λ'` evaluated at rate `capacity`.
pub fn lower_bound_distortion(p: &OuParams, capacity: f64) -> Result<f64> {
    lower_bound_distortion_on(&p.lower_sequence(), p.t0(), capacity)
}

/// Same as [`lower_bound_distortion`] on an arbitrary sequence, e.g. `λ''`.
pub fn lower_bound_distortion_on(seq: &EigenSequence, t0: f64, capacity: f64) -> Result<f64> {
    let theta = theta_of_rate(seq, capacity, DEFAULT_TOL)?;
    distortion_of_theta(seq, theta, t0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaPoint {
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Pointwise check of an asymptotic inequality on a grid, with the empirical
/// threshold past which it holds everywhere on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaScan {
    pub points: Vec<LemmaPoint>,
    pub threshold: Option<f64>,
}

impl LemmaScan {
    pub fn all_hold(&self) -> bool {
        self.points.iter().all(|p| p.holds)
    }
}

/// `θ(R) ≥ (σT₀/(2πR))²` on the `λ'` sequence for each rate. The threshold is the
/// smallest grid rate from which the inequality holds at every larger grid rate.
pub fn lemma_theta_lower_scan(p: &OuParams, rates: &[f64]) -> Result<LemmaScan> {
    let seq = p.lower_sequence();
    let mut points = Vec::with_capacity(rates.len());
    for &r in rates {
        let theta = theta_of_rate(&seq, r, DEFAULT_TOL)?;
        let bound = (p.sigma() * p.t0() / (2.0 * PI * r)).powi(2);
        points.push(LemmaPoint {
            x: r,
            lhs: theta,
            rhs: bound,
            holds: theta >= bound,
        });
    }
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    let threshold = points.iter().rev().take_while(|pt| pt.holds).last().map(|pt| pt.x);
    Ok(LemmaScan { points, threshold })
}

/// `D(θ) ≥ (σ/π)√θ` on the `λ'` sequence. The threshold is the largest grid level
/// up to which the inequality holds at every smaller grid level.
pub fn lemma_distortion_lower_scan(p: &OuParams, thetas: &[f64]) -> Result<LemmaScan> {
    let seq = p.lower_sequence();
    let mut points = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let d = distortion_bracket(&seq, theta, p.t0())?;
        let bound = p.sigma() / PI * theta.sqrt();
        points.push(LemmaPoint {
            x: theta,
            lhs: d.value(),
            rhs: bound,
            // Conservative: the low end of the tail bracket must clear the bound.
            holds: d.lower >= bound,
        });
    }
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    let threshold = points.iter().take_while(|pt| pt.holds).last().map(|pt| pt.x);
    Ok(LemmaScan { points, threshold })
}
