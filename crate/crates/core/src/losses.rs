//! Loss families for gradient boosting.
//!
//! Each family provides the loss `ρ(y, f)`, its negative gradient in `f`, the
//! constant offset minimizing the empirical risk, and the inverse link used to
//! report predictions on the response scale.
//!
//! Conventions: binary responses are coded ±1. `Logistic` works on the full
//! log-odds scale, `Exponential` on the half-log-odds scale that AdaBoost's
//! exponential loss induces. `Gamma` uses a log link and drops the shape
//! parameter, so `ρ(y, f) = y·exp(-f) + f`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Response;
use crate::linalg::weighted_median;
use crate::{BoostError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "lowercase")]
pub enum Family {
    L2,
    Laplace,
    /// `delta: None` recomputes δ as the median absolute residual each time
    /// the gradient or risk is evaluated.
    Huber { delta: Option<f64> },
    Exponential,
    Logistic,
    Gamma,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Family {
    type Err = BoostError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "l2" | "gaussian" => Family::L2,
            "laplace" => Family::Laplace,
            "huber" => Family::Huber { delta: None },
            "exponential" => Family::Exponential,
            "logistic" | "binomial" => Family::Logistic,
            "gamma" => Family::Gamma,
            other => return Err(BoostError::InvalidArgument(format!("unknown family '{other}'"))),
        })
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Family {
    pub fn id(&self) -> &'static str {
        match self {
            Family::L2 => "l2",
            Family::Laplace => "laplace",
            Family::Huber { .. } => "huber",
            Family::Exponential => "exponential",
            Family::Logistic => "logistic",
            Family::Gamma => "gamma",
        }
    }

    pub fn link_name(&self) -> &'static str {
        match self {
            Family::L2 | Family::Laplace | Family::Huber { .. } => "identity",
            Family::Logistic => "logit",
            Family::Exponential => "half-logit",
            Family::Gamma => "log",
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Family::Exponential | Family::Logistic)
    }

    /// Extracts the numeric response this family can work with.
    pub fn response_values<'a>(&self, response: &'a Response) -> Result<&'a [f64]> {
        let incompatible = |reason: &str| BoostError::IncompatibleResponse {
            family: self.id().to_string(),
            reason: reason.to_string(),
        };
        match (self, response) {
            (_, Response::Survival { .. }) => Err(incompatible("survival response")),
            (Family::Exponential | Family::Logistic, Response::Binary(y)) => Ok(y),
            (Family::Exponential | Family::Logistic, _) => Err(BoostError::BinaryRequired),
            (Family::Gamma, Response::Continuous(y)) => {
                if y.iter().any(|&v| v <= 0.0) {
                    Err(incompatible("gamma family needs y > 0"))
                } else {
                    Ok(y)
                }
            }
            (Family::Gamma, _) => Err(BoostError::ContinuousRequired),
            (_, Response::Continuous(y) | Response::Binary(y)) => Ok(y),
        }
    }

    fn check_value(&self, y: f64) -> Result<()> {
        let ok = match self {
            Family::Exponential | Family::Logistic => y == 1.0 || y == -1.0,
            Family::Gamma => y > 0.0,
            _ => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(BoostError::IncompatibleResponse {
                family: self.id().to_string(),
                reason: format!("response value {y}"),
            })
        }
    }

    /// Resolves an adaptive Huber δ against the given residuals; other
    /// families are returned unchanged.
    pub fn resolved(&self, y: &[f64], f: &[f64], w: Option<&[f64]>) -> Family {
        match self {
            Family::Huber { delta: None } => {
                let abs: Vec<f64> = y.iter().zip(f).map(|(a, b)| (a - b).abs()).collect();
                let ones;
                let weights = match w {
                    Some(w) => w,
                    None => {
                        ones = vec![1.0; abs.len()];
                        &ones
                    }
                };
                let delta = weighted_median(&abs, weights).max(f64::MIN_POSITIVE);
                Family::Huber { delta: Some(delta) }
            }
            other => *other,
        }
    }

    fn rho(&self, y: f64, f: f64) -> f64 {
        match *self {
            Family::L2 => 0.5 * (y - f).powi(2),
            Family::Laplace => (y - f).abs(),
            Family::Huber { delta } => {
                let d = delta.expect("resolved Huber delta");
                let r = (y - f).abs();
                if r <= d {
                    0.5 * r * r
                } else {
                    d * (r - 0.5 * d)
                }
            }
            Family::Exponential => (-y * f).exp(),
            Family::Logistic => softplus(-y * f),
            Family::Gamma => y * (-f).exp() + f,
        }
    }

    fn ngrad(&self, y: f64, f: f64) -> f64 {
        match *self {
            Family::L2 => y - f,
            Family::Laplace => {
                let r = y - f;
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Family::Huber { delta } => {
                let d = delta.expect("resolved Huber delta");
                let r = y - f;
                if r.abs() <= d {
                    r
                } else {
                    d * r.signum()
                }
            }
            Family::Exponential => y * (-y * f).exp(),
            Family::Logistic => y * sigmoid(-y * f),
            Family::Gamma => y * (-f).exp() - 1.0,
        }
    }

    /// Loss at a single point. Adaptive Huber must be [`resolved`](Self::resolved) first.
    pub fn loss_value(&self, y: f64, f: f64) -> Result<f64> {
        if let Family::Huber { delta: None } = self {
            return Err(BoostError::InvalidArgument(
                "adaptive Huber delta must be resolved against residuals before pointwise evaluation".into(),
            ));
        }
        self.check_value(y)?;
        Ok(self.rho(y, f))
    }

    pub fn negative_gradient(&self, y: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        if y.len() != f.len() {
            return Err(BoostError::Dimension(format!("y has {} entries, f has {}", y.len(), f.len())));
        }
        let fam = self.resolved(y, f, None);
        Ok(y.iter().zip(f).map(|(&yi, &fi)| fam.ngrad(yi, fi)).collect())
    }

    /// Negative gradient with case weights used for resolving an adaptive δ.
    pub(crate) fn negative_gradient_weighted(&self, y: &[f64], f: &[f64], w: &[f64]) -> Vec<f64> {
        let fam = self.resolved(y, f, Some(w));
        y.iter().zip(f).map(|(&yi, &fi)| fam.ngrad(yi, fi)).collect()
    }

    /// Constant minimizing the (weighted) empirical risk.
    pub fn offset_init(&self, y: &[f64], w: Option<&[f64]>) -> Result<f64> {
        if y.is_empty() {
            return Err(BoostError::InvalidDataset("empty response".into()));
        }
        for &v in y {
            self.check_value(v)?;
        }
        let ones = vec![1.0; y.len()];
        let w = w.unwrap_or(&ones);
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(BoostError::InvalidArgument("weights sum to zero".into()));
        }
        let mean = || y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
        Ok(match self {
            Family::L2 => mean(),
            Family::Laplace => weighted_median(y, w),
            Family::Huber { .. } => {
                // δ (when adaptive) is taken from residuals about the median
                let med = weighted_median(y, w);
                let Family::Huber { delta: Some(delta) } = self.resolved(y, &vec![med; y.len()], Some(w)) else {
                    unreachable!("resolved Huber has a delta")
                };
                huber_location(y, w, delta)
            }
            Family::Gamma => mean().ln(),
            Family::Logistic | Family::Exponential => {
                let pos: f64 = y.iter().zip(w).filter(|(v, _)| **v > 0.0).map(|(_, w)| w).sum();
                let p = pos / total;
                if p <= 0.0 || p >= 1.0 {
                    return Err(BoostError::SingleClass);
                }
                let logit = (p / (1.0 - p)).ln();
                if matches!(self, Family::Exponential) {
                    0.5 * logit
                } else {
                    logit
                }
            }
        })
    }

    /// `(1/Σw) Σ w_i ρ(y_i, f_i)`.
    pub fn empirical_risk(&self, y: &[f64], f: &[f64], w: Option<&[f64]>) -> Result<f64> {
        if y.len() != f.len() || w.is_some_and(|w| w.len() != y.len()) {
            return Err(BoostError::Dimension("y, f and weights must have equal length".into()));
        }
        if w.is_some_and(|w| w.iter().any(|&v| v < 0.0)) {
            return Err(BoostError::InvalidArgument("negative weight".into()));
        }
        let fam = self.resolved(y, f, w);
        let (num, den) = match w {
            Some(w) => y.iter().zip(f).zip(w).fold((0.0, 0.0), |(s, t), ((&yi, &fi), &wi)| {
                (s + if wi > 0.0 { wi * fam.rho(yi, fi) } else { 0.0 }, t + wi)
            }),
            None => (y.iter().zip(f).map(|(&yi, &fi)| fam.rho(yi, fi)).sum(), y.len() as f64),
        };
        if !(den > 0.0) {
            return Err(BoostError::InvalidArgument("all weights are zero".into()));
        }
        Ok(num / den)
    }

    /// Maps the additive predictor to the response scale.
    pub fn inverse_link(&self, f: f64) -> f64 {
        match self {
            Family::L2 | Family::Laplace | Family::Huber { .. } => f,
            Family::Logistic => sigmoid(f),
            Family::Exponential => sigmoid(2.0 * f),
            Family::Gamma => f.exp(),
        }
    }
}

/// Minimizer of the weighted Huber risk over constants: the root of the
/// monotone score `Σ w clip(y − c, −δ, δ)`, found by bisection.
fn huber_location(y: &[f64], w: &[f64], delta: f64) -> f64 {
    let score = |c: f64| y.iter().zip(w).map(|(v, w)| w * (v - c).clamp(-delta, delta)).sum::<f64>();
    let mut lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
