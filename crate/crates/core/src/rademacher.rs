//! Rademacher complexity of predictor and loss classes, and Monte Carlo
//! checks of `E[Q_n] <= R_n(H)`, where
//! `Q_n = sup_h (R(h) - empirical risk of h)`.
//!
//! The empirical complexity of a class on a path is
//! `2 E_sigma[ sup_g |(1/m) sum_i sigma_i v_i(g)| ]` over the `m` evaluable
//! indices, with `v_i(g)` the prediction `g(Y_1..Y_i)` (predictor class) or
//! the loss `loss(Y_{i+h}, g(Y_1..Y_i))` (loss class). Sign vectors are
//! enumerated exhaustively when `2^m <= 4096` and sampled otherwise.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{
    ball_grid, evaluable_count, evaluable_indices, losses, losses_against, predictions, risk_oracle, sub_seed,
    BallNorm, ClassVariant, HypothesisClass, Predictor,
};
use crate::process::{simulate, tangent_sequence, ProcessSpec, SamplePath};
use crate::rng::{label, RngStream};
use crate::stats::mean_stderr;

/// Largest `m` for which [`SigmaMode::Auto`] enumerates all sign vectors.
pub const EXHAUSTIVE_MAX_M: usize = 12;
/// Hard cap on `m` for [`SigmaMode::Exhaustive`].
const EXHAUSTIVE_HARD_MAX_M: usize = 24;

/// Which function values enter the correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityTarget {
    /// Predictions `g(Y_1..Y_i)`.
    Predictions,
    /// Losses `loss(Y_{i+h}, g(Y_1..Y_i))`.
    #[default]
    Losses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Exhaustive when `m <= 12`, Monte Carlo otherwise.
    #[default]
    Auto,
    Exhaustive,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherSettings {
    pub target: ComplexityTarget,
    pub sigma_draws: u64,
    pub sigma_mode: SigmaMode,
    pub horizon: usize,
    /// Grid resolution for loss-class suprema over linear balls.
    pub grid_points: usize,
}

impl Default for RademacherSettings {
    fn default() -> Self {
        Self {
            target: ComplexityTarget::Losses,
            sigma_draws: 1000,
            sigma_mode: SigmaMode::Auto,
            horizon: 1,
            grid_points: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Sign vectors per path (`2^m` when enumerated).
    pub sigma_draws: u64,
    /// Paths averaged over; 0 for an empirical (single-path) estimate.
    pub path_draws: u64,
}

/// Values `v_i(g)` of a class on one path, ready for repeated sign vectors.
enum Evaluations {
    /// One row per member.
    Rows { rows: Vec<Vec<f64>> },
    /// Linear ball on predictions: `sup_w |c s + w . u| = |c s| + B ||u||_*`.
    Ball {
        features: Vec<Vec<f64>>,
        intercept: f64,
        radius: f64,
        norm: BallNorm,
    },
}

impl Evaluations {
    fn build(class: &HypothesisClass, path: &SamplePath, target: ComplexityTarget, horizon: usize, grid_points: usize) -> Result<(Self, usize)> {
        class.validate()?;
        if horizon == 0 {
            return Err(Error::Argument("horizon must be at least 1".into()));
        }
        let order = class.order();
        let values = &path.values;
        let m = evaluable_count(values.len(), order, horizon);
        if m == 0 {
            return Err(Error::InsufficientData(format!(
                "path of length {} has no evaluable index for order {order} and horizon {horizon}",
                values.len()
            )));
        }
        let row = |g: &Predictor| match target {
            ComplexityTarget::Predictions => predictions(g, values, order, horizon),
            ComplexityTarget::Losses => losses(g, &class.loss, values, order, horizon),
        };
        let ev = match (&class.variant, target) {
            (ClassVariant::Finite { members }, _) => Evaluations::Rows {
                rows: members.iter().map(row).collect(),
            },
            (
                ClassVariant::LinearBall {
                    order,
                    radius,
                    norm,
                    intercept,
                },
                ComplexityTarget::Predictions,
            ) => Evaluations::Ball {
                features: evaluable_indices(values.len(), *order, horizon)
                    .map(|i| (0..*order).map(|j| values[i - 1 - j]).collect())
                    .collect(),
                intercept: *intercept,
                radius: *radius,
                norm: *norm,
            },
            (
                ClassVariant::LinearBall {
                    order,
                    radius,
                    norm,
                    intercept,
                },
                ComplexityTarget::Losses,
            ) => {
                if *order > 2 {
                    return Err(Error::Unsupported(format!(
                        "loss-class supremum over a linear ball is grid-evaluated for order <= 2, got {order}"
                    )));
                }
                let rows = ball_grid(*order, *radius, *norm, grid_points)
                    .into_iter()
                    .map(|w| Predictor::new(w, *intercept).map(|g| row(&g)))
                    .collect::<Result<Vec<_>>>()?;
                Evaluations::Rows { rows }
            }
        };
        Ok((ev, m))
    }

    fn sup(&self, sigma: &[f64]) -> f64 {
        let m = sigma.len() as f64;
        match self {
            Evaluations::Rows { rows } => rows
                .iter()
                .map(|r| (r.iter().zip(sigma).map(|(v, s)| v * s).sum::<f64>() / m).abs())
                .fold(0.0, f64::max),
            Evaluations::Ball {
                features,
                intercept,
                radius,
                norm,
            } => {
                let p = features[0].len();
                let mut u = vec![0.0; p];
                for (x, s) in features.iter().zip(sigma) {
                    for (uj, xj) in u.iter_mut().zip(x) {
                        *uj += s * xj;
                    }
                }
                let s_bar = sigma.iter().sum::<f64>() / m;
                let dual = match norm {
                    BallNorm::L1 => u.iter().map(|v| (v / m).abs()).fold(0.0, f64::max),
                    BallNorm::L2 => u.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt(),
                };
                (intercept * s_bar).abs() + radius * dual
            }
        }
    }
}

/// `sup_g |(1/m) sum_i sigma_i v_i(g)|` for one sign vector.
///
/// Finite classes are enumerated. For linear balls the prediction-class value
/// is exact by norm duality; the loss-class value is a grid maximum.
pub fn sup_correlation(
    class: &HypothesisClass,
    path: &SamplePath,
    sigma: &[i8],
    horizon: usize,
    target: ComplexityTarget,
) -> Result<f64> {
    let (ev, m) = Evaluations::build(class, path, target, horizon, RademacherSettings::default().grid_points)?;
    if sigma.len() != m {
        return Err(Error::Argument(format!("sign vector has length {}, expected m = {m}", sigma.len())));
    }
    if sigma.iter().any(|s| *s != 1 && *s != -1) {
        return Err(Error::Argument("sign vector entries must be +1 or -1".into()));
    }
    let sigma: Vec<f64> = sigma.iter().map(|s| *s as f64).collect();
    Ok(ev.sup(&sigma))
}

fn sign_vector(mask: u64, m: usize, out: &mut [f64]) {
    for (i, s) in out.iter_mut().enumerate().take(m) {
        *s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
    }
}

/// Empirical Rademacher complexity on one path.
///
/// Sign vectors come from `stream` re-keyed for sign draws; exhaustive
/// enumeration is exact and reports a zero standard error.
pub fn empirical_rademacher(
    class: &HypothesisClass,
    path: &SamplePath,
    settings: &RademacherSettings,
    stream: RngStream,
) -> Result<RademacherEstimate> {
    let (ev, m) = Evaluations::build(class, path, settings.target, settings.horizon, settings.grid_points)?;
    let exhaustive = match settings.sigma_mode {
        SigmaMode::Auto => m <= EXHAUSTIVE_MAX_M,
        SigmaMode::Exhaustive => {
            if m > EXHAUSTIVE_HARD_MAX_M {
                return Err(Error::Argument(format!(
                    "exhaustive sign enumeration needs m <= {EXHAUSTIVE_HARD_MAX_M}, got {m}"
                )));
            }
            true
        }
        SigmaMode::MonteCarlo => false,
    };
    let mut sigma = vec![0.0; m];
    if exhaustive {
        let count = 1u64 << m;
        let mut total = 0.0;
        for mask in 0..count {
            sign_vector(mask, m, &mut sigma);
            total += ev.sup(&sigma);
        }
        return Ok(RademacherEstimate {
            mean: 2.0 * total / count as f64,
            stderr: 0.0,
            sigma_draws: count,
            path_draws: 0,
        });
    }
    if settings.sigma_draws == 0 {
        return Err(Error::Argument("sigma_draws must be at least 1".into()));
    }
    let mut rng = stream.derive(label::SIGMA).rng();
    let draws: Vec<f64> = (0..settings.sigma_draws)
        .map(|_| {
            for s in sigma.iter_mut() {
                *s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
            2.0 * ev.sup(&sigma)
        })
        .collect();
    let (mean, stderr) = mean_stderr(&draws);
    Ok(RademacherEstimate {
        mean,
        stderr,
        sigma_draws: settings.sigma_draws,
        path_draws: 0,
    })
}

/// Rademacher complexity averaged over independently simulated paths.
///
/// Path `t` uses stream `(root_seed, t)`. The standard error is taken across
/// path draws and so includes the sign-sampling noise.
pub fn expected_rademacher(
    class: &HypothesisClass,
    spec: &ProcessSpec,
    n: usize,
    path_draws: u64,
    settings: &RademacherSettings,
    root_seed: u64,
) -> Result<RademacherEstimate> {
    spec.validate()?;
    if path_draws == 0 {
        return Err(Error::Argument("path_draws must be at least 1".into()));
    }
    let per_path = (0..path_draws)
        .into_par_iter()
        .map(|t| {
            let s = RngStream::new(root_seed, t);
            let path = simulate(spec, n, s.derive(label::PATH))?;
            empirical_rademacher(class, &path, settings, s)
        })
        .collect::<Result<Vec<RademacherEstimate>>>()?;
    let means: Vec<f64> = per_path.iter().map(|e| e.mean).collect();
    let (mean, stderr) = mean_stderr(&means);
    Ok(RademacherEstimate {
        mean,
        stderr,
        sigma_draws: per_path[0].sigma_draws,
        path_draws,
    })
}

/// Contraction: a `phi`-Lipschitz loss gives `R(H) <= 2 phi R(G)`.
pub fn lipschitz_contract(r_g: f64, phi: f64) -> Result<f64> {
    if !(r_g >= 0.0 && r_g.is_finite()) {
        return Err(Error::Argument(format!("complexity must be non-negative, got {r_g}")));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::Argument(format!("Lipschitz constant must be positive, got {phi}")));
    }
    Ok(2.0 * phi * r_g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QnEstimate {
    pub mean: f64,
    /// Trial standard error combined in quadrature with the largest
    /// per-member oracle standard error, when an oracle was used.
    pub stderr: f64,
    pub trials: u64,
    /// Samples per member behind the risk oracle; `None` when no oracle is
    /// involved.
    pub risk_oracle_trials: Option<u64>,
}

fn finite_members(class: &HypothesisClass) -> Result<&[Predictor]> {
    class.validate()?;
    class
        .members()
        .ok_or_else(|| Error::Unsupported("exact suprema need a finite class".into()))
}

/// Estimates `E[Q_n(H)] = E[sup_g (R(g) - training error of g)]`.
///
/// Each member's `R(g)` comes once from [`risk_oracle`] with
/// `risk_oracle_trials` samples; each trial then takes the exact supremum on
/// a fresh path.
pub fn expected_qn_mc(
    class: &HypothesisClass,
    spec: &ProcessSpec,
    n: usize,
    trials: u64,
    risk_oracle_trials: u64,
    root_seed: u64,
    horizon: usize,
) -> Result<QnEstimate> {
    let members = finite_members(class)?;
    if trials < 500 {
        return Err(Error::Argument(format!("need at least 500 trials, got {trials}")));
    }
    let oracle = risk_oracle(members, &class.loss, spec, n, horizon, risk_oracle_trials, sub_seed(root_seed, label::ORACLE))?;
    let order = class.order();
    if evaluable_count(n, order, horizon) == 0 {
        return Err(Error::InsufficientData(format!("n = {n} leaves no evaluable index")));
    }
    let trial_seed = sub_seed(root_seed, label::TRIALS);
    let sups = (0..trials)
        .into_par_iter()
        .map(|t| {
            let path = simulate(spec, n, RngStream::new(trial_seed, t))?;
            Ok(members
                .iter()
                .zip(&oracle)
                .map(|(g, r)| {
                    let l = losses(g, &class.loss, &path.values, order, horizon);
                    r.value - l.iter().sum::<f64>() / l.len() as f64
                })
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_stderr(&sups);
    let oracle_se = oracle.iter().map(|r| r.stderr).fold(0.0, f64::max);
    Ok(QnEstimate {
        mean,
        stderr: (se * se + oracle_se * oracle_se).sqrt(),
        trials,
        risk_oracle_trials: Some(risk_oracle_trials),
    })
}

/// Estimates `E[sup_g (1/m) sum_i (h_g(z'_i) - h_g(z_i))]` with `z'` the
/// tangent sequence of `z_i = (Y_{i+h}, Y_1..Y_i)`.
///
/// For `i` past the first evaluable index, `z'_i` keeps the original prefix
/// and replaces the target by the tangent draw of `Y_{i+h}`; the first
/// `z'` has no past to condition on and is drawn afresh.
pub fn tangent_qn_check(
    class: &HypothesisClass,
    spec: &ProcessSpec,
    n: usize,
    trials: u64,
    root_seed: u64,
    horizon: usize,
) -> Result<QnEstimate> {
    let members = finite_members(class)?;
    spec.validate()?;
    if trials < 2 {
        return Err(Error::Argument("need at least 2 trials".into()));
    }
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    let order = class.order();
    let m = evaluable_count(n, order, horizon);
    if m == 0 {
        return Err(Error::InsufficientData(format!("n = {n} leaves no evaluable index")));
    }
    let sups = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = RngStream::new(root_seed, t);
            let path = simulate(spec, n, s.derive(label::PATH))?;
            let tangent = tangent_sequence(&path, s.derive(label::TANGENT))?;
            let ghost = simulate(spec, order + horizon, s.derive(label::GHOST))?;
            Ok(members
                .iter()
                .map(|g| {
                    let real = losses(g, &class.loss, &path.values, order, horizon);
                    let mut tang = losses_against(g, &class.loss, &path.values, &tangent.values, order, horizon);
                    tang[0] = losses(g, &class.loss, &ghost.values, order, horizon)[0];
                    tang.iter().zip(&real).map(|(a, b)| a - b).sum::<f64>() / m as f64
                })
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&sups);
    Ok(QnEstimate {
        mean,
        stderr,
        trials,
        risk_oracle_trials: None,
    })
}
