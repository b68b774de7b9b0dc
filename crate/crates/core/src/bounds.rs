//! Forecastable envelopes for the sample mean `Z_n = (1/n) sum Y_i`.
//!
//! For each `i` the envelope `[L_i, U_i]` is a function of `Y_1..Y_{i-1}`
//! only and contains `E[Z_n | Y_1..Y_i]`. The accumulated squared width
//! `C_n^2 = sum (U_i - L_i)^2` is the variance proxy of the exponential tail
//! bounds in [`crate::concentration`].
//!
//! Two AR(1) envelopes are provided. [`BoundFormula::PaperPrinted`] is the
//! textbook display with width factor `(1 - theta^{n-i}) / (1 - theta)` and
//! known part `(1/n) sum_{k<i} Y_k + theta Y_{i-1}`. It is reproduced as
//! printed and is *not* a valid envelope (at `i = n` it has zero width while
//! `Y_n` is still random). [`BoundFormula::DerivedExact`] follows the
//! influence of `eta_i` on `E[Z_n | F_i]`, which carries the factor
//! `(1 - theta^{n-i+1}) / (1 - theta)`, and weights the known part
//! geometrically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{geometric_sum, ProcessSpec, SamplePath};

/// Which AR(1) envelope to use. IID and copy envelopes ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFormula {
    #[serde(alias = "paper")]
    PaperPrinted,
    #[default]
    #[serde(alias = "exact")]
    DerivedExact,
}

impl BoundFormula {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundFormula::PaperPrinted => "paper_printed",
            BoundFormula::DerivedExact => "derived_exact",
        }
    }
}

impl std::str::FromStr for BoundFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper_printed" => Ok(BoundFormula::PaperPrinted),
            "exact" | "derived_exact" => Ok(BoundFormula::DerivedExact),
            other => Err(Error::Argument(format!(
                "unknown bound formula {other:?} (expected paper or exact)"
            ))),
        }
    }
}

/// Predictable envelopes `L_i <= E[Z_n | F_i] <= U_i` and their `C_n^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBoundSeq {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `sum_i (U_i - L_i)^2`, summed in index order.
    pub c2: f64,
    pub formula: BoundFormula,
}

impl ForecastBoundSeq {
    fn from_envelopes(lower: Vec<f64>, upper: Vec<f64>, formula: BoundFormula) -> Self {
        let c2 = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum();
        Self {
            lower,
            upper,
            c2,
            formula,
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }
}

/// Envelopes for the sample mean of `path`, which must come from `spec`.
pub fn forecast_bounds(
    spec: &ProcessSpec,
    path: &SamplePath,
    formula: BoundFormula,
) -> Result<ForecastBoundSeq> {
    spec.validate()?;
    path.check_consistent(spec)?;
    let y = &path.values;
    let n = y.len();
    let nf = n as f64;
    let (a, b) = spec.range();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    // sum of Y_1..Y_{i-1}
    let mut past = 0.0;

    match *spec {
        ProcessSpec::Iid { .. } => {
            let mu = spec.innovation_mean();
            for i in 1..=n {
                let rest = (n - i) as f64 * mu;
                lower.push((past + a + rest) / nf);
                upper.push((past + b + rest) / nf);
                past += y[i - 1];
            }
        }
        ProcessSpec::Copy { .. } => {
            lower.push(a);
            upper.push(b);
            lower.extend(std::iter::repeat_n(y[0], n - 1));
            upper.extend(std::iter::repeat_n(y[0], n - 1));
        }
        ProcessSpec::Ar1 {
            theta, burn_in, ..
        } => match formula {
            BoundFormula::PaperPrinted => {
                let mut prev = 0.0;
                for i in 1..=n {
                    let g = geometric_sum(theta, n - i);
                    let known = past / nf + theta * prev;
                    lower.push(a / nf * g + known);
                    upper.push(b / nf * g + known);
                    past += y[i - 1];
                    prev = y[i - 1];
                }
            }
            BoundFormula::DerivedExact => {
                let mu = spec.innovation_mean();
                let initial = geometric_sum(theta, burn_in + 1);
                for i in 1..=n {
                    // E[Z_n | F_i] = (past + G_i Y_i + future) / n,
                    // with Y_i = theta Y_{i-1} + eta_i
                    let g = geometric_sum(theta, n - i + 1);
                    let future: f64 = (1..=n - i).map(|j| mu * geometric_sum(theta, j)).sum();
                    let (known, lo, hi) = if i == 1 {
                        (future, a * initial, b * initial)
                    } else {
                        (past + g * theta * y[i - 2] + future, a, b)
                    };
                    lower.push((known + g * lo) / nf);
                    upper.push((known + g * hi) / nf);
                    past += y[i - 1];
                }
            }
        },
    }
    Ok(ForecastBoundSeq::from_envelopes(lower, upper, formula))
}

/// `C_n^2` in closed form, without a path.
///
/// Agrees with `forecast_bounds(..).c2` to rounding. The AR(1)
/// `PaperPrinted` variant evaluates the polynomial
/// `(b-a)^2 / (n^2 (1-theta)^2 (theta^2-1)) * (theta^{2n} - 2 theta^{n+1} - 2 theta^n + n theta^2 + 2 theta - n + 1)`.
pub fn cn2_closed_form(spec: &ProcessSpec, n: usize, formula: BoundFormula) -> Result<f64> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let (a, b) = spec.range();
    let w2 = (b - a) * (b - a);
    let nf = n as f64;
    Ok(match *spec {
        ProcessSpec::Iid { .. } => w2 / nf,
        ProcessSpec::Copy { .. } => w2,
        ProcessSpec::Ar1 {
            theta, burn_in, ..
        } => {
            let scale = w2 / (nf * nf * (1.0 - theta) * (1.0 - theta));
            match formula {
                BoundFormula::PaperPrinted => scale * squared_gap_sum(theta, n),
                BoundFormula::DerivedExact => {
                    // sum_{j=1}^{n} (1 - theta^j)^2, with the i = 1 term
                    // widened by the burn-in range of Y_1
                    let r = geometric_sum(theta, burn_in + 1);
                    let first = (1.0 - theta.powi(n as i32)).powi(2);
                    scale * (squared_gap_sum(theta, n + 1) + (r * r - 1.0) * first)
                }
            }
        }
    })
}

/// `sum_{j=0}^{k-1} (1 - theta^j)^2` via the printed polynomial, grouped so
/// that `k = 1` cancels to exactly zero.
fn squared_gap_sum(theta: f64, k: usize) -> f64 {
    let kf = k as f64;
    let t2 = theta * theta;
    let tk = theta.powi(k as i32);
    let poly = (tk * tk - 2.0 * tk * theta + kf * t2) + (2.0 * theta - 2.0 * tk) + (1.0 - kf);
    poly / (t2 - 1.0)
}

/// The AR(1) dominating value `(b-a)^2 / (n (1-theta)^2)`.
///
/// Dominates [`cn2_closed_form`] under both formulas for the anchored chain
/// (`burn_in = 0`). With burn-in the widened first increment can exceed it
/// when `n < 1 / (1 - theta)^2`.
pub fn cn2_upper_bound(spec: &ProcessSpec, n: usize) -> Result<f64> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    match *spec {
        ProcessSpec::Ar1 { a, b, theta, .. } => {
            Ok((b - a) * (b - a) / (n as f64 * (1.0 - theta) * (1.0 - theta)))
        }
        _ => Err(Error::Unsupported(format!(
            "the geometric upper bound is defined for AR(1), not {}",
            spec.name()
        ))),
    }
}

/// `(1 - theta)^2`: the factor by which AR(1) dependence shrinks the tail
/// exponent relative to IID data.
pub fn effective_sample_factor(theta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::Argument(format!("theta must lie in [0, 1), got {theta}")));
    }
    Ok((1.0 - theta) * (1.0 - theta))
}
