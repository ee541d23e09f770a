//! Channel-side quantities and the sum-power regimes.
//!
//! Every supported power law has `ln P(N) = a·N^r + q·ln N + ln c`, so growth
//! orders compare symbolically on `(a > 0, r, q)` with the constant `c`
//! ignored. Regime boundaries are asymptotic statements and are evaluated this
//! way, never numerically at a finite `N`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{positive, BoundsError, Result};

/// Tolerance for deciding that two symbolic exponents coincide.
const EXPONENT_EPS: f64 = 1e-12;

/// Sum power constraint `P(N)` shared by all sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum PowerLaw {
    /// `P(N) = P_tot`.
    Constant { p_tot: f64 },
    /// `P(N) = N·P_ind`.
    LinearPerNode { p_ind: f64 },
    /// `P(N) = coefficient · N^exponent`.
    PowerOfN { coefficient: f64, exponent: f64 },
    /// `P(N) = e^(N^root_exponent) / N`.
    ExpRootOverN { root_exponent: f64 },
    /// `P(N) = coefficient · N^n_exponent · e^(N^root_exponent)`.
    ExpRootPower {
        coefficient: f64,
        root_exponent: f64,
        n_exponent: f64,
    },
}

/// Asymptotic growth class of `ln P(N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthOrder {
    /// `r` in `e^(N^r)`, or `None` for sub-exponential laws.
    pub exp_root: Option<f64>,
    /// Exponent of the polynomial factor `N^q`.
    pub power: f64,
}

impl GrowthOrder {
    pub const fn polynomial(power: f64) -> Self {
        Self { exp_root: None, power }
    }

    pub const fn exponential(root: f64, power: f64) -> Self {
        Self {
            exp_root: Some(root),
            power,
        }
    }

    /// Compares growth order; exponents within `1e-12` are ties.
    pub fn compare(&self, other: &Self) -> Ordering {
        let by_exp = match (self.exp_root, other.exp_root) {
            (None, None) => Ordering::Equal,
            (Some(_), None) => Ordering::Greater,
            (None, Some(_)) => Ordering::Less,
            (Some(a), Some(b)) => approx_cmp(a, b),
        };
        by_exp.then_with(|| approx_cmp(self.power, other.power))
    }
}

fn approx_cmp(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= EXPONENT_EPS {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

impl PowerLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PowerLaw::Constant { p_tot } => positive("p_tot", p_tot).map(drop),
            PowerLaw::LinearPerNode { p_ind } => positive("p_ind", p_ind).map(drop),
            PowerLaw::PowerOfN { coefficient, exponent } => {
                positive("coefficient", coefficient)?;
                finite("exponent", exponent)
            }
            PowerLaw::ExpRootOverN { root_exponent } => positive("root_exponent", root_exponent).map(drop),
            PowerLaw::ExpRootPower {
                coefficient,
                root_exponent,
                n_exponent,
            } => {
                positive("coefficient", coefficient)?;
                positive("root_exponent", root_exponent)?;
                finite("n_exponent", n_exponent)
            }
        }
    }

    /// `ln P(N)`, exact and overflow-free for the exponential forms.
    pub fn ln_eval(&self, n: usize) -> f64 {
        let ln_n = (n as f64).ln();
        match *self {
            PowerLaw::Constant { p_tot } => p_tot.ln(),
            PowerLaw::LinearPerNode { p_ind } => ln_n + p_ind.ln(),
            PowerLaw::PowerOfN { coefficient, exponent } => coefficient.ln() + exponent * ln_n,
            PowerLaw::ExpRootOverN { root_exponent } => (n as f64).powf(root_exponent) - ln_n,
            PowerLaw::ExpRootPower {
                coefficient,
                root_exponent,
                n_exponent,
            } => coefficient.ln() + (n as f64).powf(root_exponent) + n_exponent * ln_n,
        }
    }

    /// `P(N)`; may be `+∞` for the exponential forms at large `N`.
    pub fn eval(&self, n: usize) -> f64 {
        self.ln_eval(n).exp()
    }

    pub fn growth(&self) -> GrowthOrder {
        match *self {
            PowerLaw::Constant { .. } => GrowthOrder::polynomial(0.0),
            PowerLaw::LinearPerNode { .. } => GrowthOrder::polynomial(1.0),
            PowerLaw::PowerOfN { exponent, .. } => GrowthOrder::polynomial(exponent),
            PowerLaw::ExpRootOverN { root_exponent } => GrowthOrder::exponential(root_exponent, -1.0),
            PowerLaw::ExpRootPower {
                root_exponent,
                n_exponent,
                ..
            } => GrowthOrder::exponential(root_exponent, n_exponent),
        }
    }

    /// Whether `N·P(N)^(1 + 1/α) → ∞`, the condition for a growing achievable rate.
    pub fn rate_condition_holds(&self, alpha: f64) -> bool {
        let g = self.growth();
        g.exp_root.is_some() || g.power > medium_floor_exponent(alpha) + EXPONENT_EPS
    }

    /// `lim ln P(N) / ln(N·P(N))`, defined whenever `N·P(N) → ∞`.
    pub fn log_ratio_limit(&self) -> Option<f64> {
        let g = self.growth();
        match g.exp_root {
            Some(_) => Some(1.0),
            None if g.power > -1.0 + EXPONENT_EPS => Some(g.power / (1.0 + g.power)),
            None => None,
        }
    }
}

impl fmt::Display for PowerLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PowerLaw::Constant { p_tot } => write!(f, "{p_tot}"),
            PowerLaw::LinearPerNode { p_ind } => write!(f, "{p_ind}*N"),
            PowerLaw::PowerOfN { coefficient, exponent } => write!(f, "{coefficient}*N^{exponent}"),
            PowerLaw::ExpRootOverN { root_exponent } => write!(f, "e^(N^{root_exponent})/N"),
            PowerLaw::ExpRootPower {
                coefficient,
                root_exponent,
                n_exponent,
            } => write!(f, "{coefficient}*N^{n_exponent}*e^(N^{root_exponent})"),
        }
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::InvalidParameter {
            name,
            reason: format!("must be finite, got {v}"),
        })
    }
}

/// Exponent of the Medium/Small boundary `N^(−1/(1+1/α))`.
pub fn medium_floor_exponent(alpha: f64) -> f64 {
    -1.0 / (1.0 + 1.0 / alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeLabel {
    VerySmall,
    Small,
    Medium,
    Large,
    VeryLarge,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::VeryLarge => "VeryLarge",
            RegimeLabel::Large => "Large",
            RegimeLabel::Medium => "Medium",
            RegimeLabel::Small => "Small",
            RegimeLabel::VerySmall => "VerySmall",
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Places `pl` among the boundaries `N⁻¹ < N^(−1/(1+1/α)) < e^(N^(1/3))/N < e^N/N`.
/// A law of the same order as a boundary belongs to the region below it.
pub fn classify_regime(pl: &PowerLaw, alpha: f64) -> RegimeLabel {
    let g = pl.growth();
    let above = |b: GrowthOrder| g.compare(&b) == Ordering::Greater;
    if above(GrowthOrder::exponential(1.0, -1.0)) {
        RegimeLabel::VeryLarge
    } else if above(GrowthOrder::exponential(1.0 / 3.0, -1.0)) {
        RegimeLabel::Large
    } else if above(GrowthOrder::polynomial(medium_floor_exponent(alpha))) {
        RegimeLabel::Medium
    } else if above(GrowthOrder::polynomial(-1.0)) {
        RegimeLabel::Small
    } else {
        RegimeLabel::VerySmall
    }
}

/// Path-loss exponents seen in practice.
pub fn alpha_is_typical(alpha: f64) -> bool {
    (2.0..=6.0).contains(&alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub n: usize,
    pub power: PowerLaw,
    /// Sensor-to-collector channel gain, equal for every sensor.
    pub h: f64,
    /// Path-loss exponent.
    pub alpha: f64,
}

impl NetworkConfig {
    pub fn new(n: usize, power: PowerLaw, h: f64, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(BoundsError::InvalidParameter {
                name: "n",
                reason: format!("need at least 2 sensors, got {n}"),
            });
        }
        power.validate()?;
        positive("h", h)?;
        positive("alpha", alpha)?;
        Ok(Self { n, power, h, alpha })
    }

    /// `ln(N·P(N))`.
    pub fn ln_total_power(&self) -> f64 {
        (self.n as f64).ln() + self.power.ln_eval(self.n)
    }

    pub fn alpha_warning(&self) -> bool {
        !alpha_is_typical(self.alpha)
    }
}

/// `C_u^N = ½ ln(1 + h²·N·P(N))` in nats.
pub fn capacity_upper(cfg: &NetworkConfig) -> f64 {
    let x = 2.0 * cfg.h.ln() + cfg.ln_total_power();
    0.5 * softplus(x)
}

/// `ln(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `β = (1 + L/α) / (4(1 + 1/α))` with `L = lim ln P(N)/ln(N·P(N))`.
pub fn beta_constant(pl: &PowerLaw, alpha: f64) -> Result<f64> {
    positive("alpha", alpha)?;
    if !pl.rate_condition_holds(alpha) {
        return Err(BoundsError::RateConditionViolated);
    }
    let l = pl.log_ratio_limit().ok_or(BoundsError::RateConditionViolated)?;
    Ok((1.0 + l / alpha) / (4.0 * (1.0 + 1.0 / alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AchievableRate {
    /// `β·ln(N·P(N))`, clamped at zero; zero whenever the growth condition fails.
    pub rate: f64,
    pub condition_holds: bool,
    pub beta: Option<f64>,
}

/// Cooperative achievable sum rate `C_a^N = β ln(N·P(N))`.
///
/// When the growth condition fails the rate only tends to an unspecified
/// constant, so the result is `0` with `condition_holds = false`.
pub fn capacity_achievable(cfg: &NetworkConfig) -> AchievableRate {
    match beta_constant(&cfg.power, cfg.alpha) {
        Ok(beta) => AchievableRate {
            rate: (beta * cfg.ln_total_power()).max(0.0),
            condition_holds: true,
            beta: Some(beta),
        },
        Err(_) => AchievableRate {
            rate: 0.0,
            condition_holds: false,
            beta: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const P_TOT: PowerLaw = PowerLaw::Constant { p_tot: 1.0 };
    const P_IND: PowerLaw = PowerLaw::LinearPerNode { p_ind: 1.0 };

    fn cfg(n: usize, power: PowerLaw, h: f64) -> NetworkConfig {
        NetworkConfig::new(n, power, h, 2.0).unwrap()
    }

    #[test]
    fn upper_capacity_examples() {
        // N·P(N) = e² − 1 gives exactly one nat.
        let c = cfg(
            2,
            PowerLaw::Constant {
                p_tot: (std::f64::consts::E.powi(2) - 1.0) / 2.0,
            },
            1.0,
        );
        assert_relative_eq!(capacity_upper(&c), 1.0, max_relative = 1e-14);

        let tiny = cfg(10, PowerLaw::Constant { p_tot: 1e-300 }, 1.0);
        assert!(capacity_upper(&tiny) > 0.0 && capacity_upper(&tiny) < 1e-290);

        let base = cfg(50, P_TOT, 0.7);
        let doubled = cfg(50, P_TOT, 1.4);
        assert_relative_eq!(
            capacity_upper(&doubled),
            0.5 * (1.0 + 4.0 * 0.49 * 50.0f64).ln(),
            max_relative = 1e-14
        );
        assert!(capacity_upper(&doubled) > capacity_upper(&base));
    }

    #[test]
    fn upper_capacity_survives_huge_power() {
        let c = cfg(
            5000,
            PowerLaw::ExpRootPower {
                coefficient: 1.0,
                root_exponent: 1.0,
                n_exponent: 1.0,
            },
            1.0,
        );
        let want = 0.5 * (5000.0 + 2.0 * 5000f64.ln());
        assert_relative_eq!(capacity_upper(&c), want, max_relative = 1e-14);
    }

    #[test]
    fn beta_examples() {
        assert_relative_eq!(beta_constant(&P_TOT, 2.0).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(beta_constant(&P_IND, 2.0).unwrap(), 5.0 / 24.0, epsilon = 1e-15);
        assert_relative_eq!(beta_constant(&P_TOT, 6.0).unwrap(), 3.0 / 14.0, epsilon = 1e-15);
        let p = PowerLaw::PowerOfN {
            coefficient: 1.0,
            exponent: 0.5,
        };
        // L = 1/3.
        assert_relative_eq!(
            beta_constant(&p, 3.0).unwrap(),
            (1.0 + 1.0 / 9.0) / (4.0 * 4.0 / 3.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn beta_rejects_slow_power() {
        let p = PowerLaw::PowerOfN {
            coefficient: 1.0,
            exponent: -1.0,
        };
        assert_eq!(beta_constant(&p, 2.0), Err(BoundsError::RateConditionViolated));
        let boundary = PowerLaw::PowerOfN {
            coefficient: 1.0,
            exponent: medium_floor_exponent(2.0),
        };
        assert!(beta_constant(&boundary, 2.0).is_err());
    }

    #[test]
    fn achievable_rate_examples() {
        // N = e¹² is not an integer; feed ln N through the constant instead.
        let n = 162_755usize;
        let c = cfg(n, P_TOT, 3.3);
        assert_relative_eq!(
            capacity_achievable(&c).rate,
            (n as f64).ln() / 6.0,
            max_relative = 1e-14
        );
        let pc = PowerLaw::Constant {
            p_tot: (12.0 - (n as f64).ln()).exp(),
        };
        assert_relative_eq!(capacity_achievable(&cfg(n, pc, 1.0)).rate, 2.0, max_relative = 1e-12);

        let inv = capacity_achievable(&cfg(
            100,
            PowerLaw::PowerOfN {
                coefficient: 1.0,
                exponent: -1.0,
            },
            1.0,
        ));
        assert_eq!(inv.rate, 0.0);
        assert!(!inv.condition_holds);
    }

    #[test]
    fn achievable_below_upper_on_sweep() {
        let mut n = 8;
        while n <= 100_000 {
            let c = cfg(n, P_TOT, 1.0);
            assert!(capacity_achievable(&c).rate <= capacity_upper(&c), "n={n}");
            n *= 2;
        }
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(&P_TOT, 2.0), RegimeLabel::Medium);
        assert_eq!(classify_regime(&P_IND, 2.0), RegimeLabel::Medium);
        let inv_sq = PowerLaw::PowerOfN {
            coefficient: 1.0,
            exponent: -2.0,
        };
        assert_eq!(classify_regime(&inv_sq, 2.0), RegimeLabel::VerySmall);
        let inv = PowerLaw::PowerOfN {
            coefficient: 3.0,
            exponent: -1.0,
        };
        assert_eq!(classify_regime(&inv, 2.0), RegimeLabel::VerySmall);
        assert_eq!(
            classify_regime(&PowerLaw::ExpRootOverN { root_exponent: 0.5 }, 2.0),
            RegimeLabel::Large
        );
        assert_eq!(
            classify_regime(
                &PowerLaw::ExpRootOverN {
                    root_exponent: 1.0 / 3.0
                },
                2.0
            ),
            RegimeLabel::Medium
        );
        assert_eq!(
            classify_regime(&PowerLaw::ExpRootOverN { root_exponent: 1.0 }, 2.0),
            RegimeLabel::Large
        );
        let small = PowerLaw::PowerOfN {
            coefficient: 1.0,
            exponent: -0.8,
        };
        assert_eq!(classify_regime(&small, 2.0), RegimeLabel::Small);
        // Same law is Medium once α is large enough that the floor drops below −0.8.
        assert_eq!(classify_regime(&small, 6.0), RegimeLabel::Medium);
    }

    #[test]
    fn medium_matches_rate_condition() {
        for e in [-1.5, -0.9, -0.7, -0.6, 0.0, 1.0, 2.5] {
            let p = PowerLaw::PowerOfN {
                coefficient: 1.0,
                exponent: e,
            };
            for alpha in [2.0, 3.0, 6.0] {
                let r = classify_regime(&p, alpha);
                assert_eq!(
                    p.rate_condition_holds(alpha),
                    r >= RegimeLabel::Medium,
                    "e={e} a={alpha}"
                );
            }
        }
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(NetworkConfig::new(1, P_TOT, 1.0, 2.0).is_err());
        assert!(NetworkConfig::new(4, P_TOT, 0.0, 2.0).is_err());
        assert!(NetworkConfig::new(4, P_TOT, 1.0, -1.0).is_err());
        assert!(NetworkConfig::new(4, PowerLaw::Constant { p_tot: -1.0 }, 1.0, 2.0).is_err());
        assert!(NetworkConfig::new(4, P_TOT, 1.0, 8.0).unwrap().alpha_warning());
    }

    #[test]
    fn serde_tagged_form() {
        let p: PowerLaw = serde_json::from_str(r#"{"form":"power_of_n","coefficient":2.0,"exponent":-2.0}"#).unwrap();
        assert_eq!(
            p,
            PowerLaw::PowerOfN {
                coefficient: 2.0,
                exponent: -2.0
            }
        );
        let back = serde_json::to_string(&P_TOT).unwrap();
        assert_eq!(back, r#"{"form":"constant","p_tot":1.0}"#);
    }

    fn arb_power() -> impl Strategy<Value = PowerLaw> {
        prop_oneof![
            (0.01f64..100.0).prop_map(|p_tot| PowerLaw::Constant { p_tot }),
            (0.01f64..100.0).prop_map(|p_ind| PowerLaw::LinearPerNode { p_ind }),
            (0.01f64..100.0, -3.0f64..3.0)
                .prop_map(|(coefficient, exponent)| PowerLaw::PowerOfN { coefficient, exponent }),
            (0.05f64..1.5).prop_map(|root_exponent| PowerLaw::ExpRootOverN { root_exponent }),
        ]
    }

    proptest! {
        #[test]
        fn beta_in_open_unit_half(pl in arb_power(), alpha in 2.0f64..=6.0) {
            if let Ok(beta) = beta_constant(&pl, alpha) {
                prop_assert!(beta > 0.0 && beta < 0.5);
            }
        }

        #[test]
        fn more_power_never_lowers_regime(e1 in -3.0f64..3.0, de in 0.0f64..2.0, alpha in 2.0f64..=6.0) {
            let lo = PowerLaw::PowerOfN { coefficient: 1.0, exponent: e1 };
            let hi = PowerLaw::PowerOfN { coefficient: 1.0, exponent: e1 + de };
            prop_assert!(classify_regime(&hi, alpha) >= classify_regime(&lo, alpha));
        }

        #[test]
        fn exponential_dominates_polynomial(r in 0.05f64..2.0, e in -3.0f64..5.0, alpha in 2.0f64..=6.0) {
            let exp = PowerLaw::ExpRootOverN { root_exponent: r };
            let poly = PowerLaw::PowerOfN { coefficient: 1.0, exponent: e };
            prop_assert!(classify_regime(&exp, alpha) >= classify_regime(&poly, alpha));
        }
    }
}
