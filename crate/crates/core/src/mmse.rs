//! Reconstruction of the process from noiseless samples.
//!
//! For jointly Gaussian data the linear estimator `Ŝ(t) = ρ(t)ᵀ Σ⁻¹ S` is the
//! MMSE estimator, and the integrated error `D_s` follows from the residual
//! variance `C(0) − ρ(t)ᵀ Σ⁻¹ ρ(t)`. The residual is smooth between sensors
//! and kinked at them, so every integral here is split at sensor positions.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{positive, BoundsError, Result};
use crate::linalg::{markov_precision, SymTridiagonal};
use crate::ou::OuParams;
use crate::quadrature::GaussLegendre;

pub const DEFAULT_QUAD_ORDER: usize = 16;

/// Largest `N` for which [`Solver::Auto`] picks the dense Cholesky path.
pub const DENSE_SOLVER_MAX_N: usize = 256;

/// Squared Cholesky pivots below this fraction of `C(0)` mark a singular geometry.
const PIVOT_RTOL: f64 = 1e-13;

/// Sensor positions on `[0, T₀]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGeometry {
    positions: Vec<f64>,
}

impl SampleGeometry {
    /// `tᵢ = (i − 1)T₀/(N − 1)` for `i = 1..N`, with the last point pinned to `T₀`.
    pub fn equally_spaced(n: usize, t0: f64) -> Result<Self> {
        positive("t0", t0)?;
        if n < 2 {
            return Err(BoundsError::InvalidParameter {
                name: "n",
                reason: format!("need at least 2 sensors, got {n}"),
            });
        }
        let step = t0 / (n - 1) as f64;
        let mut positions: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        positions[n - 1] = t0;
        Ok(Self { positions })
    }

    /// Arbitrary sorted positions. Duplicates are accepted here and rejected by the
    /// factorization, which is where they become a problem.
    pub fn from_positions(positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(BoundsError::InvalidParameter {
                name: "n",
                reason: format!("need at least 2 sensors, got {}", positions.len()),
            });
        }
        if let Some(i) = (1..positions.len()).find(|&i| positions[i] < positions[i - 1]) {
            return Err(BoundsError::UnsortedGrid { index: i });
        }
        Ok(Self { positions })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Dense Cholesky of `Σ_N`.
    Dense,
    /// `O(N)` solves through the tridiagonal precision matrix.
    Tridiagonal,
    /// Dense up to [`DENSE_SOLVER_MAX_N`], tridiagonal above.
    #[default]
    Auto,
}

impl Solver {
    fn resolve(self, n: usize) -> Self {
        match self {
            Solver::Auto if n <= DENSE_SOLVER_MAX_N => Solver::Dense,
            Solver::Auto => Solver::Tridiagonal,
            other => other,
        }
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(Cholesky<f64, Dyn>),
    Tridiagonal(SymTridiagonal),
}

/// `Σ_N` together with a factorization that supports repeated solves.
#[derive(Debug, Clone)]
pub struct CovarianceSystem {
    params: OuParams,
    positions: Vec<f64>,
    /// `e^(−η(tᵢ₊₁ − tᵢ))` per gap, used to build `ρ(t)` without `N` exponentials.
    decay: Vec<f64>,
    factor: Factor,
}

impl CovarianceSystem {
    /// Dense Cholesky-backed system.
    pub fn new(p: &OuParams, g: &SampleGeometry) -> Result<Self> {
        Self::with_solver(p, g, Solver::Dense)
    }

    pub fn with_solver(p: &OuParams, g: &SampleGeometry, solver: Solver) -> Result<Self> {
        p.check_grid(g.positions())?;
        let positions = g.positions().to_vec();
        let decay = positions.windows(2).map(|w| (-p.eta() * (w[1] - w[0])).exp()).collect();
        let factor = match solver.resolve(positions.len()) {
            Solver::Dense => {
                let matrix = covariance_matrix(p, &positions);
                let chol = Cholesky::new(matrix).ok_or(BoundsError::Factorization)?;
                // Rounding can leave a tiny positive pivot on a singular matrix.
                let min_pivot = chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .fold(f64::INFINITY, |m, &d| m.min(d * d));
                if min_pivot <= PIVOT_RTOL * p.variance() {
                    return Err(BoundsError::Factorization);
                }
                Factor::Dense(chol)
            }
            _ => Factor::Tridiagonal(markov_precision(p, &positions)?),
        };
        Ok(Self {
            params: *p,
            positions,
            decay,
            factor,
        })
    }

    pub fn params(&self) -> &OuParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.factor, Factor::Dense(_))
    }

    /// Dense `Σ_N`, built on demand.
    pub fn matrix(&self) -> DMatrix<f64> {
        covariance_matrix(&self.params, &self.positions)
    }

    /// `ρ_N(t) = [C(t − t₁), …, C(t − t_N)]`.
    pub fn rho(&self, t: f64) -> Vec<f64> {
        let n = self.n();
        let c0 = self.params.variance();
        let eta = self.params.eta();
        let mut out = vec![0.0; n];
        // Last sensor at or left of t.
        let i = self.positions.partition_point(|&x| x <= t).saturating_sub(1);
        out[i] = c0 * (-eta * (t - self.positions[i]).abs()).exp();
        for j in (0..i).rev() {
            out[j] = out[j + 1] * self.decay[j];
        }
        if i + 1 < n {
            out[i + 1] = c0 * (-eta * (self.positions[i + 1] - t).abs()).exp();
            for j in i + 2..n {
                out[j] = out[j - 1] * self.decay[j - 1];
            }
        }
        out
    }

    /// `Σ_N⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match &self.factor {
            Factor::Dense(chol) => chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec(),
            Factor::Tridiagonal(q) => q.mul_vec(b),
        }
    }

    /// `ρ(t)ᵀ Σ_N⁻¹ ρ(t)`, the variance explained by the samples.
    pub fn explained_variance(&self, t: f64) -> f64 {
        let rho = self.rho(t);
        dot(&rho, &self.solve(&rho))
    }

    /// MMSE residual variance `C(0) − ρ(t)ᵀ Σ_N⁻¹ ρ(t)` at position `t`.
    pub fn residual_variance(&self, t: f64) -> f64 {
        self.params.variance() - self.explained_variance(t)
    }

    /// `D_s^N`: time-averaged residual variance, integrated gap by gap.
    pub fn sample_distortion(&self, quad_order: usize) -> Result<f64> {
        let rule = GaussLegendre::new(quad_order)?;
        let integral = integrate_gaps(&self.positions, &rule, |t| self.residual_variance(t));
        Ok(integral / self.params.t0())
    }

    /// Solver for `(sΣ_N + θI) x = b`.
    pub fn regularized(&self, scale: f64, theta: f64) -> Result<RegularizedSystem<'_>> {
        positive("theta_prime", theta)?;
        let inner = match &self.factor {
            Factor::Dense(_) => {
                let mut m = self.matrix() * scale;
                for i in 0..self.n() {
                    m[(i, i)] += theta;
                }
                Regularized::Dense(Cholesky::new(m).ok_or(BoundsError::Factorization)?)
            }
            // (sΣ + θI)⁻¹ = (sI + θQ)⁻¹ Q with Q = Σ⁻¹; the two factors commute.
            Factor::Tridiagonal(q) => Regularized::Tridiagonal {
                precision: q,
                shifted: q.shifted(scale, theta),
            },
        };
        Ok(RegularizedSystem { inner })
    }

    /// `D_a^N(θ') = C(0) − (1/(N−1)) ∫ ρᵀ (Σ'_N + θ'I)⁻¹ ρ dt` with `Σ'_N = T₀/(N−1) · Σ_N`.
    pub fn achievable_distortion(&self, theta_prime: f64, quad_order: usize) -> Result<f64> {
        let rule = GaussLegendre::new(quad_order)?;
        let t0 = self.params.t0();
        let scale = t0 / (self.n() - 1) as f64;
        let reg = self.regularized(scale, theta_prime)?;
        let c0 = self.params.variance();
        // A failed banded solve surfaces as NaN in the integral.
        let integral = integrate_gaps(&self.positions, &rule, |t| {
            reg.quad_form(&self.rho(t)).map_or(f64::NAN, |v| c0 - scale * v)
        });
        if integral.is_nan() {
            return Err(BoundsError::Factorization);
        }
        Ok(integral / t0)
    }
}

#[derive(Debug)]
enum Regularized<'a> {
    Dense(Cholesky<f64, Dyn>),
    Tridiagonal {
        precision: &'a SymTridiagonal,
        shifted: SymTridiagonal,
    },
}

#[derive(Debug)]
pub struct RegularizedSystem<'a> {
    inner: Regularized<'a>,
}

impl RegularizedSystem<'_> {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.inner {
            Regularized::Dense(chol) => Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec()),
            Regularized::Tridiagonal { precision, shifted } => shifted.solve(&precision.mul_vec(b)),
        }
    }

    /// `bᵀ (sΣ + θI)⁻¹ b`.
    pub fn quad_form(&self, b: &[f64]) -> Result<f64> {
        Ok(dot(b, &self.solve(b)?))
    }
}

pub fn build_covariance(p: &OuParams, g: &SampleGeometry) -> Result<CovarianceSystem> {
    CovarianceSystem::new(p, g)
}

/// `D_s^N` with the automatic solver choice.
pub fn distortion_from_samples(p: &OuParams, g: &SampleGeometry, quad_order: usize) -> Result<f64> {
    GaussLegendre::new(quad_order)?;
    CovarianceSystem::with_solver(p, g, Solver::Auto)?.sample_distortion(quad_order)
}

fn covariance_matrix(p: &OuParams, positions: &[f64]) -> DMatrix<f64> {
    let n = positions.len();
    DMatrix::from_fn(n, n, |i, j| p.autocorrelation(positions[i] - positions[j]))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `∫ f` over `[t₁, t_N]`, one Gauss-Legendre rule per gap. Gaps are evaluated in
/// parallel but summed in order, so the result does not depend on thread count.
pub(crate) fn integrate_gaps<F>(positions: &[f64], rule: &GaussLegendre, f: F) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let per_gap: Vec<f64> = positions
        .par_windows(2)
        .map(|w| rule.integrate(w[0], w[1], &f))
        .collect();
    per_gap.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    /// Largest absolute reconstruction error seen at a sensor position.
    pub max_sensor_error: f64,
}

/// Empirical `D_s^N`: simulate paths, reconstruct with the linear MMSE estimator,
/// and integrate the squared error on the same gap-wise quadrature nodes used by
/// [`CovarianceSystem::sample_distortion`].
///
/// Trial `i` draws from stream `i` of a ChaCha generator keyed by `seed`.
pub fn monte_carlo_distortion(
    p: &OuParams,
    g: &SampleGeometry,
    trials: usize,
    quad_order: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if trials < 100 {
        return Err(BoundsError::TooFewTrials(trials));
    }
    let rule = GaussLegendre::new(quad_order)?;
    let sys = CovarianceSystem::with_solver(p, g, Solver::Auto)?;
    let positions = g.positions();

    // Validation grid: each sensor followed by the quadrature nodes of its gap.
    let mut grid = Vec::new();
    let mut weights = Vec::new();
    let mut sensor_slot = Vec::with_capacity(positions.len());
    for (i, &t) in positions.iter().enumerate() {
        sensor_slot.push(grid.len());
        grid.push(t);
        weights.push(0.0);
        if let Some(&next) = positions.get(i + 1) {
            for (x, w) in rule.mapped(t, next) {
                grid.push(x);
                weights.push(w);
            }
        }
    }
    let estimators: Vec<Vec<f64>> = grid.par_iter().map(|&t| sys.solve(&sys.rho(t))).collect();
    let t0 = p.t0();

    let outcomes: Vec<Result<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let path = p.sample_path_with(&grid, &mut rng)?;
            let samples: Vec<f64> = sensor_slot.iter().map(|&k| path[k]).collect();
            let mut sq = 0.0;
            let mut sensor_err: f64 = 0.0;
            for (k, (est, &w)) in estimators.iter().zip(&weights).enumerate() {
                let err = path[k] - dot(est, &samples);
                sq += w * err * err;
                if w == 0.0 {
                    sensor_err = sensor_err.max(err.abs());
                }
            }
            Ok((sq / t0, sensor_err))
        })
        .collect();

    let mut values = Vec::with_capacity(trials);
    let mut max_sensor_error: f64 = 0.0;
    for o in outcomes {
        let (v, e) = o?;
        values.push(v);
        max_sensor_error = max_sensor_error.max(e);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        trials,
        max_sensor_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> OuParams {
        OuParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn geometry_endpoints_and_spacing() {
        let g = SampleGeometry::equally_spaced(11, 2.5).unwrap();
        assert_eq!(g.positions()[0], 0.0);
        assert_eq!(g.positions()[10], 2.5);
        for w in g.positions().windows(2) {
            assert_relative_eq!(w[1] - w[0], 0.25, max_relative = 1e-14);
        }
        assert!(SampleGeometry::equally_spaced(1, 1.0).is_err());
        assert!(SampleGeometry::from_positions(vec![0.0, 0.6, 0.5]).is_err());
    }

    #[test]
    fn two_point_covariance() {
        let sys = build_covariance(&unit(), &SampleGeometry::equally_spaced(2, 1.0).unwrap()).unwrap();
        let m = sys.matrix();
        let off = 0.5 * (-1.0f64).exp();
        assert_relative_eq!(m[(0, 0)], 0.5);
        assert_relative_eq!(m[(1, 1)], 0.5);
        assert_relative_eq!(m[(0, 1)], off, max_relative = 1e-15);
        assert_relative_eq!(m[(1, 0)], off, max_relative = 1e-15);
    }

    #[test]
    fn diagonal_is_stationary_variance() {
        let sys = build_covariance(&unit(), &SampleGeometry::equally_spaced(17, 1.0).unwrap()).unwrap();
        let m = sys.matrix();
        for i in 0..17 {
            assert_eq!(m[(i, i)], 0.5);
        }
    }

    #[test]
    fn inverse_is_tridiagonal() {
        let sys = build_covariance(&unit(), &SampleGeometry::equally_spaced(50, 1.0).unwrap()).unwrap();
        let inv = sys.matrix().try_inverse().unwrap();
        let scale = inv.amax();
        for i in 0..50usize {
            for j in 0..50usize {
                if i.abs_diff(j) > 1 {
                    assert!(inv[(i, j)].abs() / scale < 1e-8, "({i},{j}) {}", inv[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn duplicate_positions_fail_to_factor() {
        let g = SampleGeometry::from_positions(vec![0.0, 0.5, 0.5, 1.0]).unwrap();
        assert!(matches!(build_covariance(&unit(), &g), Err(BoundsError::Factorization)));
        assert!(matches!(
            CovarianceSystem::with_solver(&unit(), &g, Solver::Tridiagonal),
            Err(BoundsError::Factorization)
        ));
    }

    #[test]
    fn positions_outside_interval_rejected() {
        let g = SampleGeometry::equally_spaced(5, 2.0).unwrap();
        assert!(matches!(
            build_covariance(&unit(), &g),
            Err(BoundsError::GridOutOfRange { .. })
        ));
    }

    #[test]
    fn rho_matches_direct_autocorrelation() {
        let p = OuParams::new(1.2, 2.5, 3.0).unwrap();
        let g = SampleGeometry::equally_spaced(40, 3.0).unwrap();
        let sys = build_covariance(&p, &g).unwrap();
        for t in [0.0, 0.013, 1.0, 1.53846, 2.999, 3.0] {
            let rho = sys.rho(t);
            for (j, &tj) in g.positions().iter().enumerate() {
                assert_relative_eq!(rho[j], p.autocorrelation(t - tj), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn residual_vanishes_at_sensors() {
        let g = SampleGeometry::equally_spaced(9, 1.0).unwrap();
        for solver in [Solver::Dense, Solver::Tridiagonal] {
            let sys = CovarianceSystem::with_solver(&unit(), &g, solver).unwrap();
            for &t in g.positions() {
                assert!(sys.residual_variance(t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integrand_nonnegative_at_nodes() {
        let g = SampleGeometry::equally_spaced(64, 1.0).unwrap();
        let rule = GaussLegendre::new(16).unwrap();
        for solver in [Solver::Dense, Solver::Tridiagonal] {
            let sys = CovarianceSystem::with_solver(&unit(), &g, solver).unwrap();
            for w in g.positions().windows(2) {
                for (t, _) in rule.mapped(w[0], w[1]) {
                    assert!(sys.residual_variance(t) >= -1e-10);
                }
            }
        }
    }

    #[test]
    fn solvers_agree() {
        let p = OuParams::new(0.8, 3.0, 2.0).unwrap();
        let g = SampleGeometry::equally_spaced(120, 2.0).unwrap();
        let dense = CovarianceSystem::with_solver(&p, &g, Solver::Dense).unwrap();
        let tri = CovarianceSystem::with_solver(&p, &g, Solver::Tridiagonal).unwrap();
        assert_relative_eq!(
            dense.sample_distortion(16).unwrap(),
            tri.sample_distortion(16).unwrap(),
            max_relative = 1e-9
        );
        for theta in [1e-6, 1e-3, 0.1, 10.0] {
            assert_relative_eq!(
                dense.achievable_distortion(theta, 16).unwrap(),
                tri.achievable_distortion(theta, 16).unwrap(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn rejects_low_quadrature_order() {
        let g = SampleGeometry::equally_spaced(4, 1.0).unwrap();
        assert_eq!(
            distortion_from_samples(&unit(), &g, 1),
            Err(BoundsError::QuadratureOrder(1))
        );
    }

    #[test]
    fn sample_distortion_within_bounds_and_monotone() {
        let p = unit();
        let mut prev = p.variance();
        for n in [2, 3, 5, 8, 16, 33, 100, 300, 1000] {
            let g = SampleGeometry::equally_spaced(n, 1.0).unwrap();
            let d = distortion_from_samples(&p, &g, 16).unwrap();
            assert!(d > 0.0 && d < p.variance(), "n={n} d={d}");
            assert!(d <= prev * (1.0 + 1e-12), "n={n}");
            prev = d;
        }
    }

    #[test]
    fn monte_carlo_rejects_few_trials() {
        let g = SampleGeometry::equally_spaced(4, 1.0).unwrap();
        assert_eq!(
            monte_carlo_distortion(&unit(), &g, 10, 16, 1),
            Err(BoundsError::TooFewTrials(10))
        );
    }

    #[test]
    fn monte_carlo_is_deterministic_and_exact_at_sensors() {
        let g = SampleGeometry::equally_spaced(8, 1.0).unwrap();
        let a = monte_carlo_distortion(&unit(), &g, 200, 8, 5).unwrap();
        let b = monte_carlo_distortion(&unit(), &g, 200, 8, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.max_sensor_error < 1e-10);
    }
}
