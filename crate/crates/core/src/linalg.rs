//! Banded linear algebra for the Markov covariance.
//!
//! The covariance of an AR(1)-sampled Ornstein-Uhlenbeck process has a
//! tridiagonal inverse, so solves and eigenvalues can be done in `O(N)` and
//! `O(N²)` without ever forming the dense matrix.

use crate::error::{BoundsError, Result};
use crate::ou::OuParams;

/// Symmetric tridiagonal matrix stored as main diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// `scale·I + weight·self`.
    pub fn shifted(&self, scale: f64, weight: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|d| scale + weight * d).collect(),
            off: self.off.iter().map(|o| weight * o).collect(),
        }
    }

    /// Thomas algorithm. Only valid for matrices that need no pivoting (SPD or
    /// diagonally dominant), which covers every matrix built in this crate.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        if denom == 0.0 || !denom.is_finite() {
            return Err(BoundsError::Factorization);
        }
        if n > 1 {
            c[0] = self.off[0] / denom;
        }
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.off[i - 1] * c[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(BoundsError::Factorization);
            }
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    /// All eigenvalues by implicit QL with Wilkinson-style shifts, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut e = vec![0.0; n];
        e[..n.saturating_sub(1)].copy_from_slice(&self.off);
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 64 {
                    return Err(BoundsError::Eigensolver);
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(f64::total_cmp);
        Ok(d)
    }
}

/// Inverse of the covariance matrix `[C(tᵢ − tⱼ)]` for sorted, distinct positions.
///
/// With `aᵢ = e^(−η(tᵢ₊₁ − tᵢ))` and `gᵢ = 1/(C(0)(1 − aᵢ²))` the precision matrix is
/// tridiagonal with off-diagonal `−aᵢgᵢ` and diagonal `gᵢ₋₁ + aᵢ²gᵢ` (end terms
/// use `1/C(0)` in place of the missing neighbour).
pub fn markov_precision(p: &OuParams, positions: &[f64]) -> Result<SymTridiagonal> {
    let n = positions.len();
    let c0 = p.variance();
    let mut a = Vec::with_capacity(n.saturating_sub(1));
    let mut g = Vec::with_capacity(n.saturating_sub(1));
    for w in positions.windows(2) {
        let gap = w[1] - w[0];
        if gap <= 0.0 {
            return Err(BoundsError::Factorization);
        }
        let ai = (-p.eta() * gap).exp();
        // 1 − a² via expm1 keeps precision for tiny gaps.
        let one_minus = -(-2.0 * p.eta() * gap).exp_m1();
        a.push(ai);
        g.push(1.0 / (c0 * one_minus));
    }
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for i in 0..n {
        let left = if i > 0 { g[i - 1] } else { 1.0 / c0 };
        let right = if i + 1 < n { a[i] * a[i] * g[i] } else { 0.0 };
        diag[i] = left + right;
        if i + 1 < n {
            off[i] = -a[i] * g[i];
        }
    }
    // A single point has precision 1/C(0).
    if n == 1 {
        diag[0] = 1.0 / c0;
    }
    Ok(SymTridiagonal { diag, off })
}
