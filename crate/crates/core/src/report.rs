//! Sweeps over `N`, scaling-law fits and the regime comparison table.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::achievable::upper_bound_distortion;
use crate::capacity::{capacity_achievable, capacity_upper, classify_regime, NetworkConfig, PowerLaw, RegimeLabel};
use crate::error::{BoundsError, Result};
use crate::mmse::{distortion_from_samples, SampleGeometry};
use crate::ou::OuParams;
use crate::rate_distortion::lower_bound_distortion;

pub const CSV_HEADER: &str = "N,P_N,regime,D_s,C_u,D_p_prime,D_l,C_a,D_u,window_valid";

/// `{8, 16, …, 4096}`.
pub fn default_n_grid() -> Vec<usize> {
    (3..=12).map(|e| 1usize << e).collect()
}

/// All computed quantities for one network size.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub n: usize,
    pub p_of_n: f64,
    pub regime: RegimeLabel,
    pub d_s: f64,
    pub c_u: f64,
    pub d_p_prime: f64,
    /// `max(d_s, d_p_prime)`.
    pub d_l: f64,
    pub c_a: Option<f64>,
    pub d_u: Option<f64>,
    pub d_b: Option<f64>,
    pub theta_prime: Option<f64>,
    pub window_valid: bool,
    /// `ln(N·P(N))`.
    pub ln_np: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub outcome: Result<BoundsRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub params: OuParams,
    pub power: PowerLaw,
    pub h: f64,
    pub alpha: f64,
    pub quad_order: usize,
}

pub fn bounds_row(spec: &SweepSpec, n: usize) -> Result<BoundsRow> {
    let p = &spec.params;
    let cfg = NetworkConfig::new(n, spec.power, spec.h, spec.alpha)?;
    let regime = classify_regime(&spec.power, spec.alpha);
    let g = SampleGeometry::equally_spaced(n, p.t0())?;
    let d_s = distortion_from_samples(p, &g, spec.quad_order)?;
    let c_u = capacity_upper(&cfg);
    let d_p_prime = lower_bound_distortion(p, c_u)?;
    let rate = capacity_achievable(&cfg);
    let c_a = rate.condition_holds.then_some(rate.rate);

    let (d_u, d_b, theta_prime, window_valid) = match upper_bound_distortion(&cfg, p, spec.quad_order) {
        Ok(ub) => (Some(ub.d_u), Some(ub.d_b), Some(ub.theta_prime), ub.window_valid),
        Err(BoundsError::NotApplicable { .. }) => (None, None, None, false),
        Err(e) => return Err(e),
    };
    Ok(BoundsRow {
        n,
        p_of_n: spec.power.eval(n),
        regime,
        d_s,
        c_u,
        d_p_prime,
        d_l: d_s.max(d_p_prime),
        c_a,
        d_u,
        d_b,
        theta_prime,
        window_valid,
        ln_np: cfg.ln_total_power(),
    })
}

/// One row per grid point. Rows are independent: they run in parallel, come back
/// in grid order, and a failing row never aborts the others.
pub fn sweep(spec: &SweepSpec, n_grid: &[usize]) -> Result<Vec<SweepRow>> {
    if let Some(w) = n_grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(BoundsError::InvalidParameter {
            name: "n_grid",
            reason: format!("must be strictly ascending, found {} then {}", w[0], w[1]),
        });
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < 2) {
        return Err(BoundsError::InvalidParameter {
            name: "n_grid",
            reason: format!("every N must be at least 2, found {n}"),
        });
    }
    Ok(n_grid
        .par_iter()
        .map(|&n| SweepRow {
            n,
            outcome: bounds_row(spec, n),
        })
        .collect())
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig12).unwrap_or_default()
}

/// Writes the sweep as CSV. Failed rows keep `N` and leave every other field empty.
pub fn write_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        match &row.outcome {
            Ok(r) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                format_sig12(r.p_of_n),
                r.regime,
                format_sig12(r.d_s),
                format_sig12(r.c_u),
                format_sig12(r.d_p_prime),
                format_sig12(r.d_l),
                opt(r.c_a),
                opt(r.d_u),
                r.window_valid
            )?,
            Err(_) => writeln!(out, "{},,,,,,,,,", row.n)?,
        }
    }
    Ok(())
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    /// `ln D_s` against `ln N`; slope near −1 expected.
    SampleVsN,
    /// `ln D_l` against `ln ln(N·P(N))`.
    LowerVsLogNp,
    /// `ln D_u` against `ln ln(N·P(N))`.
    UpperVsLogNp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingModel {
    InversePowerOfN,
    InverseLogNp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub target: FitTarget,
    pub model: ScalingModel,
    pub slope: f64,
    pub intercept: f64,
    /// `None` when the response is constant and `r²` is undefined.
    pub r_squared: Option<f64>,
    pub n_range: (usize, usize),
    /// `max/min` of `d·ln(N·P(N))` for the log-rate targets.
    pub ratio_spread: Option<f64>,
    pub rows_used: usize,
}

impl ScalingFit {
    pub fn is_degenerate(&self) -> bool {
        self.r_squared.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: Option<f64>,
}

/// Ordinary least squares of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let scale = my.abs().max(1.0);
    let r_squared = if syy <= (1e-13 * scale).powi(2) * n || sxx == 0.0 {
        None
    } else {
        Some(((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0))
    };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Fits the scaling law for `target` over the successful rows that carry it.
pub fn fit_scaling(rows: &[BoundsRow], target: FitTarget) -> Result<ScalingFit> {
    let picked: Vec<(&BoundsRow, f64)> = rows
        .iter()
        .filter_map(|r| {
            let d = match target {
                FitTarget::SampleVsN => Some(r.d_s),
                FitTarget::LowerVsLogNp => Some(r.d_l),
                FitTarget::UpperVsLogNp => r.d_u,
            }?;
            let usable = d > 0.0 && (target == FitTarget::SampleVsN || r.ln_np > 0.0);
            usable.then_some((r, d))
        })
        .collect();
    if picked.len() < 4 {
        return Err(BoundsError::InsufficientRows {
            needed: 4,
            got: picked.len(),
        });
    }
    let y: Vec<f64> = picked.iter().map(|(_, d)| d.ln()).collect();
    let (x, model, ratio_spread): (Vec<f64>, _, _) = match target {
        FitTarget::SampleVsN => (
            picked.iter().map(|(r, _)| (r.n as f64).ln()).collect(),
            ScalingModel::InversePowerOfN,
            None,
        ),
        _ => {
            let ratios: Vec<f64> = picked.iter().map(|(r, d)| d * r.ln_np).collect();
            let max = ratios.iter().copied().fold(f64::MIN, f64::max);
            let min = ratios.iter().copied().fold(f64::MAX, f64::min);
            (
                picked.iter().map(|(r, _)| r.ln_np.ln()).collect(),
                ScalingModel::InverseLogNp,
                Some(max / min),
            )
        }
    };
    let fit = ols(&x, &y);
    let ns = picked.iter().map(|(r, _)| r.n);
    Ok(ScalingFit {
        target,
        model,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        n_range: (ns.clone().min().unwrap_or(0), ns.max().unwrap_or(0)),
        ratio_spread,
        rows_used: picked.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsMeet {
    Yes,
    No,
    Unknown,
}

impl BoundsMeet {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundsMeet::Yes => "yes",
            BoundsMeet::No => "no",
            BoundsMeet::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeRow {
    pub power: PowerLaw,
    pub regime: RegimeLabel,
    pub lower_order: &'static str,
    pub upper_order: &'static str,
    pub meet: BoundsMeet,
    pub rationale: &'static str,
}

/// Order-wise comparison of the lower and upper bounds for each power law.
pub fn regime_table(powers: &[PowerLaw], alpha: f64) -> Vec<RegimeRow> {
    powers
        .iter()
        .map(|&power| {
            let regime = classify_regime(&power, alpha);
            let (lower_order, upper_order, meet, rationale) = match regime {
                RegimeLabel::VeryLarge => (
                    "N^-1",
                    "not established",
                    BoundsMeet::Unknown,
                    "channel is effectively perfect; the upper-bound analysis does not cover this growth",
                ),
                RegimeLabel::Large => (
                    "(log(N P(N)))^-1",
                    "not established",
                    BoundsMeet::Unknown,
                    "power grows faster than e^(N^(1/3))/N; the upper-bound analysis does not cover this growth",
                ),
                RegimeLabel::Medium => (
                    "(log(N P(N)))^-1",
                    "(log(N P(N)))^-1",
                    BoundsMeet::Yes,
                    "separation-based scheme is order-optimal",
                ),
                RegimeLabel::Small => (
                    "(log(N P(N)))^-1",
                    "constant",
                    BoundsMeet::No,
                    "achievable cooperative rate stays bounded while the cut-set rate grows",
                ),
                RegimeLabel::VerySmall => (
                    "1",
                    "constant",
                    BoundsMeet::Yes,
                    "N P(N) does not grow; distortion stays at a constant",
                ),
            };
            RegimeRow {
                power,
                regime,
                lower_order,
                upper_order,
                meet,
                rationale,
            }
        })
        .collect()
}
