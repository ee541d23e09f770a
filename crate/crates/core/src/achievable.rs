//! The separation-based upper bound.
//!
//! Sensors run distributed rate-distortion coding at sum rate
//! `R_a(θ') = Σ ½ ln(1 + μ_k/θ')` over the eigenvalues `μ_k` of
//! `Σ'_N = T₀/(N−1) · Σ_N`, and the collector reconstructs with the
//! regularized estimator behind `D_a(θ')`. Matching `R_a` to the cooperative
//! channel rate `C_a^N` fixes `θ'` and hence `D_u^N`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::capacity::{capacity_achievable, classify_regime, NetworkConfig, RegimeLabel};
use crate::error::{positive, BoundsError, Result};
use crate::linalg::markov_precision;
use crate::mmse::{CovarianceSystem, SampleGeometry, Solver};
use crate::ou::{EigenSequence, OuParams};
use crate::rate_distortion::{invert_decreasing, LemmaPoint, LemmaScan, DEFAULT_TOL};

/// Eigenvalues of `Σ'_N`, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSpectrum {
    mu: Vec<f64>,
    scale: f64,
}

impl ScaledSpectrum {
    fn from_unsorted(mut mu: Vec<f64>, scale: f64) -> Result<Self> {
        if mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(BoundsError::Eigensolver);
        }
        mu.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { mu, scale })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `T₀/(N−1)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sum(&self) -> f64 {
        self.mu.iter().sum()
    }

    pub fn to_sequence(&self) -> EigenSequence {
        EigenSequence::empirical(self.mu.clone()).expect("spectrum is positive by construction")
    }
}

/// Spectrum of `Σ'_N` from the tridiagonal precision matrix: `μ_k = s / q_k` where
/// `q_k` are the eigenvalues of `Σ_N⁻¹`. `O(N²)` and no dense matrix.
pub fn scaled_spectrum(p: &OuParams, g: &SampleGeometry) -> Result<ScaledSpectrum> {
    p.check_grid(g.positions())?;
    let scale = p.t0() / (g.n() - 1) as f64;
    let q = markov_precision(p, g.positions())?.eigenvalues()?;
    if q.iter().any(|&v| v <= 0.0) {
        return Err(BoundsError::Eigensolver);
    }
    ScaledSpectrum::from_unsorted(q.iter().map(|v| scale / v).collect(), scale)
}

/// Same spectrum from a dense symmetric eigendecomposition of `Σ'_N`. `O(N³)`;
/// kept as an independent route for cross-checks.
pub fn scaled_spectrum_dense(p: &OuParams, g: &SampleGeometry) -> Result<ScaledSpectrum> {
    p.check_grid(g.positions())?;
    let n = g.n();
    let scale = p.t0() / (n - 1) as f64;
    let pos = g.positions();
    let m = DMatrix::from_fn(n, n, |i, j| scale * p.autocorrelation(pos[i] - pos[j]));
    let eig = m
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(BoundsError::Eigensolver)?;
    ScaledSpectrum::from_unsorted(eig.eigenvalues.iter().copied().collect(), scale)
}

/// `R_a^N(θ') = Σ_k ½ ln(1 + μ_k/θ')`.
pub fn rate_achievable_of_theta(spec: &ScaledSpectrum, theta_prime: f64) -> Result<f64> {
    positive("theta_prime", theta_prime)?;
    Ok(rate_at(spec, theta_prime))
}

fn rate_at(spec: &ScaledSpectrum, theta: f64) -> f64 {
    0.5 * spec.mu.iter().map(|m| (m / theta).ln_1p()).sum::<f64>()
}

/// `D_b^N(θ') = T₀⁻¹ Σ_k (1/θ' + 1/μ_k)⁻¹`, summed over all `N` eigenvalues.
pub fn distortion_second_term(spec: &ScaledSpectrum, theta_prime: f64, t0: f64) -> Result<f64> {
    positive("theta_prime", theta_prime)?;
    positive("t0", t0)?;
    let s: f64 = spec.mu.iter().map(|&m| theta_prime * m / (theta_prime + m)).sum();
    Ok(s / t0)
}

/// Inverse of [`rate_achievable_of_theta`].
pub fn theta_achievable_of_rate(spec: &ScaledSpectrum, rate: f64, tol: f64) -> Result<f64> {
    positive("rate", rate)?;
    positive("tol", tol)?;
    let top = spec.mu[0];
    let mut hi = top;
    while rate_at(spec, hi) > rate {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(BoundsError::NonConvergence {
                iterations: 0,
                residual: rate,
            });
        }
    }
    let mut lo = hi;
    while rate_at(spec, lo) <= rate {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(BoundsError::NonConvergence {
                iterations: 0,
                residual: rate,
            });
        }
    }
    invert_decreasing(|t| rate_at(spec, t), rate, lo, hi, tol)
}

/// `D_a^N(θ')` by gap-wise quadrature with the automatic solver choice.
pub fn distortion_achievable(p: &OuParams, g: &SampleGeometry, theta_prime: f64, quad_order: usize) -> Result<f64> {
    CovarianceSystem::with_solver(p, g, Solver::Auto)?.achievable_distortion(theta_prime, quad_order)
}

/// Window `[ϑ_L, ϑ_U]` of water levels and the matching rate interval
/// `[8σT₀/(π√ϑ_U), σT₀/(4π√ϑ_L)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityWindow {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl ValidityWindow {
    pub fn new(p: &OuParams, theta_lo: f64, theta_hi: f64) -> Self {
        let st = p.sigma() * p.t0();
        Self {
            theta_lo,
            theta_hi,
            r_lo: 8.0 * st / (PI * theta_hi.sqrt()),
            r_hi: st / (4.0 * PI * theta_lo.sqrt()),
        }
    }

    /// `ϑ_L = N^(−1/2)`, `ϑ_U = 1/ln N`.
    pub fn for_n(p: &OuParams, n: usize) -> Self {
        let nf = n as f64;
        Self::new(p, nf.powf(-0.5), 1.0 / nf.ln())
    }

    pub fn theta_interval_nonempty(&self) -> bool {
        self.theta_lo < self.theta_hi
    }

    /// The rate interval only opens up once `ϑ_U > 1024 ϑ_L`, which for the default
    /// sequences needs `N` in the hundreds of millions.
    pub fn rate_interval_nonempty(&self) -> bool {
        self.r_lo < self.r_hi
    }

    pub fn contains_theta(&self, theta: f64) -> bool {
        self.theta_interval_nonempty() && (self.theta_lo..=self.theta_hi).contains(&theta)
    }

    /// `[R_a(ϑ_U), R_a(ϑ_L)]`: the rates whose water level falls inside the window.
    pub fn induced_rates(&self, spec: &ScaledSpectrum) -> (f64, f64) {
        (rate_at(spec, self.theta_hi), rate_at(spec, self.theta_lo))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBound {
    pub d_u: f64,
    pub c_a: f64,
    pub beta: f64,
    /// `θ_a^N(C_a^N)`; infinite when the achievable rate is zero.
    pub theta_prime: f64,
    pub d_b: f64,
    /// The `N⁻¹` term of the two-term decomposition.
    pub n_inv_term: f64,
    /// `max(N⁻¹, D_b^N(θ'))`.
    pub surrogate: f64,
    pub window: ValidityWindow,
    /// Whether `θ'` fell inside `[ϑ_L, ϑ_U]`.
    pub window_valid: bool,
}

/// `D_u^N = D_a^N(θ_a^N(C_a^N))` together with the decomposition terms.
///
/// Only the Medium regime satisfies both growth conditions the bound needs;
/// every other regime yields [`BoundsError::NotApplicable`].
pub fn upper_bound_distortion(cfg: &NetworkConfig, p: &OuParams, quad_order: usize) -> Result<UpperBound> {
    let regime = classify_regime(&cfg.power, cfg.alpha);
    if regime != RegimeLabel::Medium {
        return Err(BoundsError::NotApplicable {
            regime: regime.as_str(),
        });
    }
    let g = SampleGeometry::equally_spaced(cfg.n, p.t0())?;
    let spec = scaled_spectrum(p, &g)?;
    let rate = capacity_achievable(cfg);
    let beta = rate.beta.ok_or(BoundsError::RateConditionViolated)?;
    let window = ValidityWindow::for_n(p, cfg.n);

    let (theta_prime, d_u, d_b) = if rate.rate > 0.0 {
        let theta = theta_achievable_of_rate(&spec, rate.rate, DEFAULT_TOL)?;
        let sys = CovarianceSystem::with_solver(p, &g, Solver::Auto)?;
        let d_u = sys.achievable_distortion(theta, quad_order)?;
        (theta, d_u, distortion_second_term(&spec, theta, p.t0())?)
    } else {
        // Zero rate: the collector can only guess the mean.
        (f64::INFINITY, p.variance(), spec.sum() / p.t0())
    };
    let n_inv_term = 1.0 / cfg.n as f64;
    Ok(UpperBound {
        d_u,
        c_a: rate.rate,
        beta,
        theta_prime,
        d_b,
        n_inv_term,
        surrogate: n_inv_term.max(d_b),
        window,
        window_valid: window.contains_theta(theta_prime),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichPoint {
    pub rate: f64,
    pub theta: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

/// `(σT₀/(4πR))² ≤ θ_a^N(R) ≤ (8σT₀/(πR))²` at each rate.
pub fn theta_sandwich_scan(spec: &ScaledSpectrum, p: &OuParams, rates: &[f64]) -> Result<Vec<SandwichPoint>> {
    let st = p.sigma() * p.t0();
    rates
        .iter()
        .map(|&r| {
            let theta = theta_achievable_of_rate(spec, r, DEFAULT_TOL)?;
            let lower = (st / (4.0 * PI * r)).powi(2);
            let upper = (8.0 * st / (PI * r)).powi(2);
            Ok(SandwichPoint {
                rate: r,
                theta,
                lower,
                upper,
                holds: lower <= theta && theta <= upper,
            })
        })
        .collect()
}

/// `D_b^N(θ') ≤ (12σ/π)√θ'` at each level.
pub fn second_term_scan(spec: &ScaledSpectrum, p: &OuParams, thetas: &[f64]) -> Result<LemmaScan> {
    let mut points = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let d_b = distortion_second_term(spec, theta, p.t0())?;
        let bound = 12.0 * p.sigma() / PI * theta.sqrt();
        points.push(LemmaPoint {
            x: theta,
            lhs: d_b,
            rhs: bound,
            holds: d_b <= bound,
        });
    }
    Ok(LemmaScan {
        points,
        threshold: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::PowerLaw;
    use crate::log_grid;
    use crate::mmse::distortion_from_samples;
    use approx::assert_relative_eq;

    fn unit() -> OuParams {
        OuParams::new(1.0, 1.0, 1.0).unwrap()
    }

    fn spectrum(n: usize) -> ScaledSpectrum {
        scaled_spectrum(&unit(), &SampleGeometry::equally_spaced(n, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn trace_identity() {
        let s = spectrum(11);
        assert_relative_eq!(s.sum(), 0.55, max_relative = 1e-12);
        let p = OuParams::new(2.0, 0.3, 3.0).unwrap();
        let g = SampleGeometry::equally_spaced(40, 3.0).unwrap();
        let s = scaled_spectrum(&p, &g).unwrap();
        assert_relative_eq!(s.sum(), 3.0 * 40.0 * p.variance() / 39.0, max_relative = 1e-11);
    }

    #[test]
    fn two_point_closed_form() {
        let p = unit();
        let s = spectrum(2);
        // Σ'_2 = T₀·[[C0, C(T₀)], [C(T₀), C0]].
        let c0 = p.variance();
        let c1 = p.autocorrelation(1.0);
        assert_relative_eq!(s.mu()[0], c0 + c1, max_relative = 1e-12);
        assert_relative_eq!(s.mu()[1], c0 - c1, max_relative = 1e-12);
        let theta = 0.07;
        let want = 0.5 * ((1.0 + (c0 + c1) / theta).ln() + (1.0 + (c0 - c1) / theta).ln());
        assert_relative_eq!(rate_achievable_of_theta(&s, theta).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn banded_and_dense_spectra_agree() {
        let p = OuParams::new(1.3, 2.0, 1.5).unwrap();
        let g = SampleGeometry::equally_spaced(200, 1.5).unwrap();
        let a = scaled_spectrum(&p, &g).unwrap();
        let b = scaled_spectrum_dense(&p, &g).unwrap();
        for (x, y) in a.mu().iter().zip(b.mu()) {
            // Dense eigenvalues are accurate to ε·‖Σ'‖ in absolute terms.
            assert!((x - y).abs() <= 1e-12 * b.mu()[0] + 1e-8 * y, "{x} vs {y}");
        }
    }

    #[test]
    fn eigenvalues_descending_and_positive() {
        let s = spectrum(300);
        assert!(s.mu().windows(2).all(|w| w[0] >= w[1]));
        assert!(*s.mu().last().unwrap() > 0.0);
    }

    #[test]
    fn spectrum_close_to_bound_sequences() {
        let p = unit();
        let s = spectrum(200);
        for k in 0..=10 {
            let lo = p.lambda_prime(k);
            let hi = p.lambda_double_prime(k);
            let eps = 0.05 * hi;
            assert!(s.mu()[k] >= lo - eps && s.mu()[k] <= hi + eps, "k={k}");
        }
    }

    #[test]
    fn rate_limits_and_monotonicity() {
        let s = spectrum(64);
        assert!(rate_achievable_of_theta(&s, 1e12).unwrap() < 1e-10);
        let grid = log_grid(1e-6, 1e3, 40);
        let rates: Vec<f64> = grid.iter().map(|&t| rate_achievable_of_theta(&s, t).unwrap()).collect();
        assert!(rates.windows(2).all(|w| w[0] > w[1]));
        assert!(rate_achievable_of_theta(&s, 0.0).is_err());
    }

    #[test]
    fn second_term_saturation_and_harmonic_bound() {
        let s = spectrum(30);
        let sat = distortion_second_term(&s, 1e14, 1.0).unwrap();
        assert_relative_eq!(sat, 30.0 * 0.5 / 29.0, max_relative = 1e-10);
        for theta in [1e-4, 0.01, 0.3] {
            let d = distortion_second_term(&s, theta, 1.0).unwrap();
            let cap: f64 = s.mu().iter().map(|&m| m.min(theta)).sum();
            assert!(d <= cap);
        }
    }

    #[test]
    fn theta_round_trip() {
        let s = spectrum(128);
        for r in [0.01, 0.5, 5.0, 50.0] {
            let t = theta_achievable_of_rate(&s, r, DEFAULT_TOL).unwrap();
            let back = rate_achievable_of_theta(&s, t).unwrap();
            assert!((back - r).abs() <= DEFAULT_TOL * r, "r={r}");
        }
        let small = theta_achievable_of_rate(&s, 1e-6, DEFAULT_TOL).unwrap();
        assert!(small > 100.0);
        let d_b = distortion_second_term(&s, small, 1.0).unwrap();
        assert_relative_eq!(d_b, s.sum(), max_relative = 1e-3);
    }

    #[test]
    fn achievable_distortion_limits() {
        let p = unit();
        let g = SampleGeometry::equally_spaced(16, 1.0).unwrap();
        let d_s = distortion_from_samples(&p, &g, 16).unwrap();
        let d0 = distortion_achievable(&p, &g, 1e-12, 16).unwrap();
        assert!((d0 - d_s).abs() < 1e-6, "{d0} vs {d_s}");
        let mut prev = 0.0;
        for theta in log_grid(1e-8, 1e4, 25) {
            let d = distortion_achievable(&p, &g, theta, 16).unwrap();
            assert!(d >= prev - 1e-15 && d <= p.variance() + 1e-15, "theta={theta}");
            prev = d;
        }
    }

    #[test]
    fn upper_bound_not_applicable_outside_medium() {
        let p = unit();
        let cfg = NetworkConfig::new(
            64,
            PowerLaw::PowerOfN {
                coefficient: 1.0,
                exponent: -2.0,
            },
            1.0,
            2.0,
        )
        .unwrap();
        assert_eq!(
            upper_bound_distortion(&cfg, &p, 16),
            Err(BoundsError::NotApplicable { regime: "VerySmall" })
        );
    }

    #[test]
    fn upper_bound_medium_components() {
        let p = unit();
        let cfg = NetworkConfig::new(256, PowerLaw::Constant { p_tot: 1.0 }, 1.0, 2.0).unwrap();
        let ub = upper_bound_distortion(&cfg, &p, 16).unwrap();
        assert_relative_eq!(ub.c_a, (256f64).ln() / 6.0, max_relative = 1e-12);
        assert!(ub.d_u > 0.0 && ub.d_u < p.variance());
        assert_eq!(ub.surrogate, ub.d_b.max(1.0 / 256.0));
    }

    #[test]
    fn window_shapes() {
        let w = ValidityWindow::for_n(&unit(), 512);
        assert!(w.theta_interval_nonempty());
        assert!(!w.rate_interval_nonempty());
        let wide = ValidityWindow::new(&unit(), 1e-6, 0.5);
        assert!(wide.rate_interval_nonempty());
    }
}
