//! The Gauss-Markov (Ornstein-Uhlenbeck) source.
//!
//! The process is stationary with autocorrelation `C(τ) = σ²/(2η) · e^(−η|τ|)`
//! on the interval `[0, T₀]`. Its Karhunen-Loève eigenvalues have no closed
//! form, so this module exposes the two analytic sequences that bracket them
//! from below (`λ'_k`) and above (`λ''_k`). Both decay like `1/k²`, and
//! [`EigenSequence`] stores them as a finite head plus an analytic tail so
//! that infinite sums are never truncated silently.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{positive, BoundsError, Result};

/// Minimum number of explicitly stored terms before switching to the `1/k²` tail.
pub const MIN_HEAD_LEN: usize = 64;

/// Parameters of the Ornstein-Uhlenbeck source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    sigma: f64,
    eta: f64,
    t0: f64,
}

impl OuParams {
    pub fn new(sigma: f64, eta: f64, t0: f64) -> Result<Self> {
        Ok(Self {
            sigma: positive("sigma", sigma)?,
            eta: positive("eta", eta)?,
            t0: positive("t0", t0)?,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Stationary variance `C(0) = σ²/(2η)`.
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.eta)
    }

    pub fn autocorrelation(&self, tau: f64) -> f64 {
        self.variance() * (-self.eta * tau.abs()).exp()
    }

    /// Index where `λ'_k` switches branch: `K₀ = ⌊η²T₀²/π² − 3/4⌋`. May be negative.
    pub fn k0(&self) -> i64 {
        let et = self.eta * self.t0;
        (et * et / (PI * PI) - 0.75).floor() as i64
    }

    /// Lower bounding sequence `λ'_k`.
    pub fn lambda_prime(&self, k: usize) -> f64 {
        let s2t2 = self.sigma * self.sigma * self.t0 * self.t0;
        if (k as i64) <= self.k0() {
            let kh = k as f64 + 0.5;
            let et = self.eta * self.t0;
            s2t2 / (kh * kh * PI * PI + et * et)
        } else {
            let k1 = k as f64 + 1.0;
            s2t2 / (k1 * k1 * PI * PI)
        }
    }

    /// Upper bounding sequence `λ''_k`.
    pub fn lambda_double_prime(&self, k: usize) -> f64 {
        if k <= 1 {
            (self.sigma / self.eta).powi(2)
        } else {
            let km = (k - 1) as f64;
            (self.sigma * self.t0).powi(2) / (km * km * PI * PI)
        }
    }

    /// Number of explicit head terms used by both bounding sequences.
    pub fn head_len(&self) -> usize {
        let k0_next = (self.k0() + 1).max(0) as usize;
        k0_next.max(MIN_HEAD_LEN)
    }

    pub fn lower_sequence(&self) -> EigenSequence {
        let head = (0..self.head_len()).map(|k| self.lambda_prime(k)).collect();
        let tail = TailLaw {
            coefficient: (self.sigma * self.t0 / PI).powi(2),
            shift: 1.0,
        };
        EigenSequence {
            kind: SequenceKind::LowerPrime,
            head,
            tail: Some(tail),
        }
    }

    pub fn upper_sequence(&self) -> EigenSequence {
        let head = (0..self.head_len()).map(|k| self.lambda_double_prime(k)).collect();
        let tail = TailLaw {
            coefficient: (self.sigma * self.t0 / PI).powi(2),
            shift: -1.0,
        };
        EigenSequence {
            kind: SequenceKind::UpperDoublePrime,
            head,
            tail: Some(tail),
        }
    }

    /// Exact draw of the process on `grid` using the AR(1) transition law.
    ///
    /// Deterministic for a fixed `seed`.
    pub fn sample_path(&self, grid: &[f64], seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_path_with(grid, &mut rng)
    }

    pub fn sample_path_with<R: Rng + ?Sized>(&self, grid: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        let var = self.variance();
        let mut out = Vec::with_capacity(grid.len());
        let mut prev: Option<(f64, f64)> = None;
        for &t in grid {
            let z: f64 = rng.sample(StandardNormal);
            let value = match prev {
                None => var.sqrt() * z,
                Some((t_prev, s_prev)) => {
                    let a = (-self.eta * (t - t_prev)).exp();
                    a * s_prev + (var * (1.0 - a * a)).sqrt() * z
                }
            };
            out.push(value);
            prev = Some((t, value));
        }
        Ok(out)
    }

    pub(crate) fn check_grid(&self, grid: &[f64]) -> Result<()> {
        for (i, &t) in grid.iter().enumerate() {
            if !(0.0..=self.t0).contains(&t) {
                return Err(BoundsError::GridOutOfRange {
                    position: t,
                    t0: self.t0,
                });
            }
            if i > 0 && t < grid[i - 1] {
                return Err(BoundsError::UnsortedGrid { index: i });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SequenceKind {
    LowerPrime,
    UpperDoublePrime,
    Empirical,
}

/// Pure inverse-square law `λ_k = coefficient / (k + shift)²` for the terms past the head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailLaw {
    pub coefficient: f64,
    pub shift: f64,
}

impl TailLaw {
    fn at(&self, k: usize) -> f64 {
        let d = k as f64 + self.shift;
        self.coefficient / (d * d)
    }

    /// Bracket on `Σ_{k ≥ start} c/(k+shift)²` from the integral test:
    /// with `m = start + shift`, the sum lies in `[c/m, c/(m−1)]`.
    fn sum_from(&self, start: usize) -> Bracket {
        let m = start as f64 + self.shift;
        debug_assert!(m > 1.0);
        Bracket::new(self.coefficient / m, self.coefficient / (m - 1.0))
    }
}

/// A value known to lie in `[lower, upper]`; `value()` is the midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn exact(value: f64) -> Self {
        Self::new(value, value)
    }

    pub fn value(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn shift(self, x: f64) -> Self {
        Self::new(self.lower + x, self.upper + x)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.lower * s, self.upper * s)
    }
}

/// An eigenvalue sequence: explicit head, optionally followed by an infinite `1/k²` tail.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSequence {
    kind: SequenceKind,
    head: Vec<f64>,
    tail: Option<TailLaw>,
}

/// Split of a sequence around a water level `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partition {
    /// Number of eigenvalues strictly above the level.
    pub active: usize,
    /// `Σ_{λ_k > θ} ln(λ_k/θ)`.
    pub log_sum: f64,
    /// `Σ_{λ_k ≤ θ} λ_k`.
    pub inactive_sum: Bracket,
}

impl EigenSequence {
    /// Finite sequence, e.g. the eigenvalues of a scaled sample covariance.
    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        Self::from_parts(SequenceKind::Empirical, values, None)
    }

    pub fn from_parts(kind: SequenceKind, head: Vec<f64>, tail: Option<TailLaw>) -> Result<Self> {
        if head.is_empty() {
            return Err(BoundsError::InvalidParameter {
                name: "values",
                reason: "eigen sequence needs at least one value".into(),
            });
        }
        if let Some(v) = head.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(BoundsError::InvalidParameter {
                name: "values",
                reason: format!("eigenvalues must be positive, got {v}"),
            });
        }
        if let Some(t) = tail {
            positive("tail.coefficient", t.coefficient)?;
            if head.len() as f64 + t.shift <= 1.0 {
                return Err(BoundsError::InvalidParameter {
                    name: "tail.shift",
                    reason: "tail must start past the singular index".into(),
                });
            }
        }
        Ok(Self { kind, head, tail })
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn tail(&self) -> Option<TailLaw> {
        self.tail
    }

    /// `λ_k`, or `None` past the end of a finite sequence.
    pub fn get(&self, k: usize) -> Option<f64> {
        match self.head.get(k) {
            Some(&v) => Some(v),
            None => self.tail.map(|t| t.at(k)),
        }
    }

    /// Largest eigenvalue. The tail is decreasing and never exceeds the last head term
    /// for the sequences built here, so the head maximum suffices.
    pub fn max_value(&self) -> f64 {
        let head_max = self.head.iter().copied().fold(0.0, f64::max);
        match self.tail {
            Some(t) => head_max.max(t.at(self.head.len())),
            None => head_max,
        }
    }

    /// `Σ_k λ_k`, with the analytic tail bracket when the sequence is infinite.
    pub fn total_sum(&self) -> Bracket {
        let head: f64 = self.head.iter().sum();
        match self.tail {
            Some(t) => t.sum_from(self.head.len()).shift(head),
            None => Bracket::exact(head),
        }
    }

    pub fn partition(&self, theta: f64) -> Partition {
        let mut active = 0usize;
        let mut log_sum = 0.0;
        let mut inactive = 0.0;
        for &v in &self.head {
            if v > theta {
                active += 1;
                log_sum += (v / theta).ln();
            } else {
                inactive += v;
            }
        }
        let inactive_sum = match self.tail {
            None => Bracket::exact(inactive),
            Some(t) => {
                let start = self.head.len();
                // First tail index with λ_k ≤ θ, from k + shift ≥ √(c/θ), then refined.
                let guess = ((t.coefficient / theta).sqrt() - t.shift).ceil();
                let mut end = if guess.is_finite() && guess > start as f64 {
                    guess as usize
                } else {
                    start
                };
                while end > start && t.at(end - 1) <= theta {
                    end -= 1;
                }
                while t.at(end) > theta {
                    end += 1;
                }
                for k in start..end {
                    active += 1;
                    log_sum += (t.at(k) / theta).ln();
                }
                t.sum_from(end).shift(inactive)
            }
        };
        Partition {
            active,
            log_sum,
            inactive_sum,
        }
    }

    /// Scales every eigenvalue by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            kind: self.kind,
            head: self.head.iter().map(|v| v * factor).collect(),
            tail: self.tail.map(|t| TailLaw {
                coefficient: t.coefficient * factor,
                shift: t.shift,
            }),
        }
    }
}
