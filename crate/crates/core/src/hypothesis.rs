//! Autoregressive predictor classes, losses, training error, true risk and
//! empirical risk minimization.
//!
//! A predictor of order `p` maps the prefix `Y_1..Y_i` to
//! `intercept + sum_j w_j Y_{i-j+1}`. With horizon `h` the training error
//! averages `loss(Y_{i+h}, g(Y_1..Y_i))` over the evaluable indices
//! `p <= i <= n - h` and divides by their count `m = n - h - p + 1`.
//! Classes are evaluated on the index set of their largest order so that
//! every member sees the same terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{continue_path, simulate, ProcessSpec, SamplePath};
use crate::rng::{label, RngStream};
use crate::stats::mean_stderr;

/// Fixed-window autoregressive predictor. `weights[0]` multiplies the most
/// recent value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PredictorRepr", into = "PredictorRepr")]
pub struct Predictor {
    weights: Vec<f64>,
    intercept: f64,
}

#[derive(Serialize, Deserialize)]
struct PredictorRepr {
    weights: Vec<f64>,
    intercept: f64,
    order: usize,
}

impl TryFrom<PredictorRepr> for Predictor {
    type Error = Error;

    fn try_from(r: PredictorRepr) -> Result<Self> {
        if r.order != r.weights.len() {
            return Err(Error::Parameter(format!(
                "order {} does not match {} weights",
                r.order,
                r.weights.len()
            )));
        }
        Predictor::new(r.weights, r.intercept)
    }
}

impl From<Predictor> for PredictorRepr {
    fn from(p: Predictor) -> Self {
        let order = p.weights.len();
        PredictorRepr {
            weights: p.weights,
            intercept: p.intercept,
            order,
        }
    }
}

impl Predictor {
    pub fn new(weights: Vec<f64>, intercept: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Parameter("a predictor needs order >= 1".into()));
        }
        if !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Parameter("predictor coefficients must be finite".into()));
        }
        Ok(Self { weights, intercept })
    }

    /// Order-1 predictor that ignores the data.
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![0.0], c)
    }

    /// `c + theta * Y_i`.
    pub fn ar1(theta: f64, c: f64) -> Result<Self> {
        Self::new(vec![theta], c)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, prefix: &[f64]) -> Result<f64> {
        if prefix.len() < self.order() {
            return Err(Error::InsufficientHistory {
                needed: self.order(),
                got: prefix.len(),
            });
        }
        Ok(self.predict_unchecked(prefix))
    }

    fn predict_unchecked(&self, prefix: &[f64]) -> f64 {
        let last = prefix.len() - 1;
        self.weights
            .iter()
            .enumerate()
            .fold(self.intercept, |acc, (j, w)| acc + w * prefix[last - j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `|y - yhat|`, 1-Lipschitz in `yhat`.
    Absolute,
    /// `min(y - yhat, M)^2` in magnitude: the residual is clipped to
    /// `[-M, M]` before squaring, so the loss is bounded by `M^2` and
    /// `2M`-Lipschitz in `yhat`.
    SquaredClipped { clip: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        if let LossSpec::SquaredClipped { clip } = *self {
            if !(clip > 0.0 && clip.is_finite()) {
                return Err(Error::Parameter(format!("clip must be positive, got {clip}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, y: f64, yhat: f64) -> f64 {
        match *self {
            LossSpec::Absolute => (y - yhat).abs(),
            LossSpec::SquaredClipped { clip } => {
                let r = (y - yhat).clamp(-clip, clip);
                r * r
            }
        }
    }

    /// Lipschitz constant of `yhat -> loss(y, yhat)`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            LossSpec::Absolute => 1.0,
            LossSpec::SquaredClipped { clip } => 2.0 * clip,
        }
    }

    /// Largest loss when `|y - yhat|` can reach `max_residual`.
    fn max_for_residual(&self, max_residual: f64) -> f64 {
        match *self {
            LossSpec::Absolute => max_residual,
            LossSpec::SquaredClipped { clip } => max_residual.min(clip).powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallNorm {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassVariant {
    Finite {
        members: Vec<Predictor>,
    },
    /// `{ c + w . x : ||w|| <= radius }` with the intercept `c` fixed.
    LinearBall {
        order: usize,
        radius: f64,
        norm: BallNorm,
        #[serde(default)]
        intercept: f64,
    },
}

/// A predictor class together with the loss that induces its loss class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisClass {
    pub variant: ClassVariant,
    pub loss: LossSpec,
}

impl HypothesisClass {
    pub fn finite(members: Vec<Predictor>, loss: LossSpec) -> Result<Self> {
        let class = Self {
            variant: ClassVariant::Finite { members },
            loss,
        };
        class.validate()?;
        Ok(class)
    }

    pub fn linear_ball(order: usize, radius: f64, norm: BallNorm, intercept: f64, loss: LossSpec) -> Result<Self> {
        let class = Self {
            variant: ClassVariant::LinearBall {
                order,
                radius,
                norm,
                intercept,
            },
            loss,
        };
        class.validate()?;
        Ok(class)
    }

    /// Order-1 predictors `intercept + theta Y_i` for each `theta`.
    pub fn ar1_grid(thetas: &[f64], intercept: f64, loss: LossSpec) -> Result<Self> {
        let members = thetas
            .iter()
            .map(|&t| Predictor::ar1(t, intercept))
            .collect::<Result<Vec<_>>>()?;
        Self::finite(members, loss)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        match &self.variant {
            ClassVariant::Finite { members } => {
                if members.is_empty() {
                    return Err(Error::Parameter("finite class has no members".into()));
                }
            }
            ClassVariant::LinearBall {
                order,
                radius,
                intercept,
                ..
            } => {
                if *order == 0 {
                    return Err(Error::Parameter("ball order must be at least 1".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Parameter(format!("radius must be positive, got {radius}")));
                }
                if !intercept.is_finite() {
                    return Err(Error::Parameter("intercept must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Largest order in the class; fixes the shared evaluable index set.
    pub fn order(&self) -> usize {
        match &self.variant {
            ClassVariant::Finite { members } => members.iter().map(Predictor::order).max().unwrap_or(1),
            ClassVariant::LinearBall { order, .. } => *order,
        }
    }

    pub fn members(&self) -> Option<&[Predictor]> {
        match &self.variant {
            ClassVariant::Finite { members } => Some(members),
            ClassVariant::LinearBall { .. } => None,
        }
    }

    /// Largest `max_j |w|_1` over the class (`sqrt(p) B` bounds the L1 norm
    /// of an L2 ball).
    pub fn max_weight_l1(&self) -> f64 {
        match &self.variant {
            ClassVariant::Finite { members } => members
                .iter()
                .map(|g| g.weights().iter().map(|w| w.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            ClassVariant::LinearBall {
                order, radius, norm, ..
            } => match norm {
                BallNorm::L1 => *radius,
                BallNorm::L2 => radius * (*order as f64).sqrt(),
            },
        }
    }

    /// Range of predictions when every input lies in `support`.
    pub fn prediction_range(&self, support: (f64, f64)) -> (f64, f64) {
        let (lo, hi) = support;
        match &self.variant {
            ClassVariant::Finite { members } => members.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(pl, ph), g| {
                    let (gl, gh) = g.weights().iter().fold((g.intercept(), g.intercept()), |(l, h), w| {
                        (l + (w * lo).min(w * hi), h + (w * lo).max(w * hi))
                    });
                    (pl.min(gl), ph.max(gh))
                },
            ),
            ClassVariant::LinearBall { intercept, .. } => {
                let reach = self.max_weight_l1() * lo.abs().max(hi.abs());
                (intercept - reach, intercept + reach)
            }
        }
    }

    /// Upper bound on every loss value when the data lie in `support`.
    pub fn loss_max(&self, support: (f64, f64)) -> f64 {
        let (lo, hi) = support;
        let (pl, ph) = self.prediction_range(support);
        let residual = (hi - pl).max(ph - lo).max(0.0);
        self.loss.max_for_residual(residual)
    }
}

/// 1-based evaluable indices `i` with `order <= i <= n - horizon`.
pub fn evaluable_indices(n: usize, order: usize, horizon: usize) -> std::ops::RangeInclusive<usize> {
    let first = order.max(1);
    if n < horizon + first {
        // empty
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    first..=n - horizon
}

pub(crate) fn evaluable_count(n: usize, order: usize, horizon: usize) -> usize {
    evaluable_indices(n, order, horizon).count()
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    Ok(())
}

/// Per-index predictions `g(Y_1..Y_i)` over the class index set.
pub(crate) fn predictions(g: &Predictor, values: &[f64], order: usize, horizon: usize) -> Vec<f64> {
    evaluable_indices(values.len(), order, horizon)
        .map(|i| g.predict_unchecked(&values[..i]))
        .collect()
}

/// Per-index losses `loss(Y_{i+h}, g(Y_1..Y_i))` over the class index set.
pub(crate) fn losses(g: &Predictor, loss: &LossSpec, values: &[f64], order: usize, horizon: usize) -> Vec<f64> {
    evaluable_indices(values.len(), order, horizon)
        .map(|i| loss.eval(values[i + horizon - 1], g.predict_unchecked(&values[..i])))
        .collect()
}

/// Same terms with the target taken from `targets` (1-based index `i + h`)
/// instead of the path itself. Used for tangent-sequence losses.
pub(crate) fn losses_against(
    g: &Predictor,
    loss: &LossSpec,
    values: &[f64],
    targets: &[f64],
    order: usize,
    horizon: usize,
) -> Vec<f64> {
    evaluable_indices(values.len(), order, horizon)
        .map(|i| loss.eval(targets[i + horizon - 1], g.predict_unchecked(&values[..i])))
        .collect()
}

fn mean_loss_on(g: &Predictor, loss: &LossSpec, values: &[f64], order: usize, horizon: usize) -> Result<f64> {
    let m = evaluable_count(values.len(), order, horizon);
    if m == 0 {
        return Err(Error::InsufficientData(format!(
            "path of length {} has no evaluable index for order {order} and horizon {horizon}",
            values.len()
        )));
    }
    Ok(losses(g, loss, values, order, horizon).iter().sum::<f64>() / m as f64)
}

/// Training error: the mean loss over the evaluable indices of `g`.
pub fn training_error(g: &Predictor, loss: &LossSpec, path: &SamplePath, horizon: usize) -> Result<f64> {
    check_horizon(horizon)?;
    loss.validate()?;
    mean_loss_on(g, loss, &path.values, g.order(), horizon)
}

/// Training error of `g` on the index set shared by `class`.
pub fn class_training_error(class: &HypothesisClass, g: &Predictor, path: &SamplePath, horizon: usize) -> Result<f64> {
    check_horizon(horizon)?;
    mean_loss_on(g, &class.loss, &path.values, class.order(), horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Monte Carlo estimate of `E[loss(Y_{n+h}, g(Y_1..Y_n))]`.
pub fn true_risk_mc(
    g: &Predictor,
    loss: &LossSpec,
    spec: &ProcessSpec,
    n: usize,
    horizon: usize,
    trials: u64,
    root_seed: u64,
) -> Result<RiskEstimate> {
    let mut v = risk_oracle(std::slice::from_ref(g), loss, spec, n, horizon, trials, root_seed)?;
    Ok(v.remove(0))
}

/// [`true_risk_mc`] for several predictors on common simulated paths.
///
/// Trial `t` simulates on stream `(root_seed, t)`; the estimate for one
/// member equals `true_risk_mc` for that member with the same seed.
pub fn risk_oracle(
    members: &[Predictor],
    loss: &LossSpec,
    spec: &ProcessSpec,
    n: usize,
    horizon: usize,
    trials: u64,
    root_seed: u64,
) -> Result<Vec<RiskEstimate>> {
    spec.validate()?;
    loss.validate()?;
    check_horizon(horizon)?;
    if trials < 100 {
        return Err(Error::Argument(format!("need at least 100 trials, got {trials}")));
    }
    let order = members.iter().map(Predictor::order).max().unwrap_or(1);
    if n < order {
        return Err(Error::InsufficientData(format!("n = {n} is shorter than order {order}")));
    }
    let k = members.len();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = RngStream::new(root_seed, t);
            let path = simulate(spec, n, s.derive(label::PATH))?;
            let next = continue_path(&path, horizon, s.derive(label::CONTINUATION))?;
            let y = next.values[horizon - 1];
            Ok(members
                .iter()
                .map(|g| loss.eval(y, g.predict_unchecked(&path.values)))
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok((0..k)
        .map(|j| {
            let col: Vec<f64> = per_trial.iter().map(|row| row[j]).collect();
            let (value, stderr) = mean_stderr(&col);
            RiskEstimate { value, stderr, trials }
        })
        .collect())
}

/// Knobs for linear-ball ERM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErmOptions {
    /// Grid points per coordinate axis.
    pub grid_points: usize,
    /// Sweep cap for coordinate descent (order > 2).
    pub max_sweeps: usize,
}

impl Default for ErmOptions {
    fn default() -> Self {
        Self {
            grid_points: 64,
            max_sweeps: 100,
        }
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, k: usize) -> impl Iterator<Item = f64> {
    let step = if k > 1 { (hi - lo) / (k - 1) as f64 } else { 0.0 };
    (0..k).map(move |i| if i + 1 == k && k > 1 { hi } else { lo + step * i as f64 })
}

fn in_ball(w: &[f64], radius: f64, norm: BallNorm) -> bool {
    let tol = 1e-12 * radius;
    match norm {
        BallNorm::L1 => w.iter().map(|x| x.abs()).sum::<f64>() <= radius + tol,
        BallNorm::L2 => w.iter().map(|x| x * x).sum::<f64>().sqrt() <= radius + tol,
    }
}

/// Grid points of `[-B, B]^p` inside the ball, in lexicographic order.
/// Only used for `p <= 2`.
pub(crate) fn ball_grid(order: usize, radius: f64, norm: BallNorm, grid_points: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = linspace(-radius, radius, grid_points).collect();
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..order {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |x| {
                    let mut v = prefix.clone();
                    v.push(*x);
                    v
                })
            })
            .collect();
    }
    out.retain(|w| in_ball(w, radius, norm));
    out
}

/// Empirical risk minimizer over the class, default options.
pub fn erm_fit(class: &HypothesisClass, path: &SamplePath, horizon: usize) -> Result<Predictor> {
    erm_fit_with(class, path, horizon, &ErmOptions::default())
}

/// Empirical risk minimizer.
///
/// Finite classes are enumerated exhaustively; linear balls of order <= 2
/// are searched on a grid, larger orders by coordinate descent with each
/// coordinate line-searched over its feasible interval. Ties go to the
/// first candidate in enumeration order.
pub fn erm_fit_with(class: &HypothesisClass, path: &SamplePath, horizon: usize, opts: &ErmOptions) -> Result<Predictor> {
    class.validate()?;
    check_horizon(horizon)?;
    let order = class.order();
    let values = &path.values;
    if evaluable_count(values.len(), order, horizon) == 0 {
        return Err(Error::InsufficientData(format!(
            "path of length {} has no evaluable index for order {order} and horizon {horizon}",
            values.len()
        )));
    }
    let risk = |g: &Predictor| mean_loss_on(g, &class.loss, values, order, horizon);
    match &class.variant {
        ClassVariant::Finite { members } => {
            let mut best = (&members[0], risk(&members[0])?);
            for g in &members[1..] {
                let r = risk(g)?;
                if r < best.1 {
                    best = (g, r);
                }
            }
            Ok(best.0.clone())
        }
        ClassVariant::LinearBall {
            order,
            radius,
            norm,
            intercept,
        } => {
            if opts.grid_points < 2 {
                return Err(Error::Argument("grid needs at least 2 points per axis".into()));
            }
            if *order <= 2 {
                let mut best: Option<(Predictor, f64)> = None;
                for w in ball_grid(*order, *radius, *norm, opts.grid_points) {
                    let g = Predictor::new(w, *intercept)?;
                    let r = risk(&g)?;
                    if best.as_ref().is_none_or(|(_, b)| r < *b) {
                        best = Some((g, r));
                    }
                }
                Ok(best.expect("grid contains the origin region").0)
            } else {
                coordinate_descent(*order, *radius, *norm, *intercept, opts, risk)
            }
        }
    }
}

fn coordinate_descent(
    order: usize,
    radius: f64,
    norm: BallNorm,
    intercept: f64,
    opts: &ErmOptions,
    risk: impl Fn(&Predictor) -> Result<f64>,
) -> Result<Predictor> {
    let mut w = vec![0.0; order];
    let mut current = risk(&Predictor::new(w.clone(), intercept)?)?;
    for _ in 0..opts.max_sweeps {
        let mut improved = false;
        for j in 0..order {
            let reach = match norm {
                BallNorm::L1 => radius - w.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, x)| x.abs()).sum::<f64>(),
                BallNorm::L2 => (radius * radius
                    - w.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, x)| x * x).sum::<f64>())
                .sqrt(),
            }
            .max(0.0);
            for x in linspace(-reach, reach, opts.grid_points) {
                let mut cand = w.clone();
                cand[j] = x;
                let r = risk(&Predictor::new(cand.clone(), intercept)?)?;
                if r < current {
                    current = r;
                    w = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Predictor::new(w, intercept)
}

pub(crate) fn sub_seed(root_seed: u64, purpose: u64) -> u64 {
    RngStream::new(root_seed, 0).derive(purpose).root_seed
}

/// ERM training error against the ERM predictor's true risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimismEstimate {
    pub mean_train: f64,
    pub stderr_train: f64,
    pub mean_risk: f64,
    pub stderr_risk: f64,
    /// Standard error of the paired difference, with the oracle's error
    /// added in quadrature.
    pub stderr_combined: f64,
    pub trials: u64,
    pub risk_oracle_trials: u64,
}

/// Estimates `E[train(ERM)]` and `E[R(ERM)]` over fresh paths. Finite classes
/// only, since `R` comes from a per-member oracle.
pub fn erm_optimism_mc(
    class: &HypothesisClass,
    spec: &ProcessSpec,
    n: usize,
    horizon: usize,
    trials: u64,
    risk_oracle_trials: u64,
    root_seed: u64,
) -> Result<OptimismEstimate> {
    let members = class
        .members()
        .ok_or_else(|| Error::Unsupported("optimism needs a finite class".into()))?;
    if trials < 2 {
        return Err(Error::Argument("need at least 2 trials".into()));
    }
    let oracle = risk_oracle(members, &class.loss, spec, n, horizon, risk_oracle_trials, sub_seed(root_seed, label::ORACLE))?;
    let trial_seed = sub_seed(root_seed, label::TRIALS);
    let pairs = (0..trials)
        .into_par_iter()
        .map(|t| {
            let path = simulate(spec, n, RngStream::new(trial_seed, t))?;
            let (idx, train) = erm_index(class, members, &path, horizon)?;
            Ok((train, oracle[idx].value))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let train: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let risk: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (mean_train, stderr_train) = mean_stderr(&train);
    let (mean_risk, stderr_risk) = mean_stderr(&risk);
    let (_, se_diff) = mean_stderr(&diff);
    let oracle_se = oracle.iter().map(|r| r.stderr).fold(0.0, f64::max);
    Ok(OptimismEstimate {
        mean_train,
        stderr_train,
        mean_risk,
        stderr_risk,
        stderr_combined: (se_diff * se_diff + oracle_se * oracle_se).sqrt(),
        trials,
        risk_oracle_trials,
    })
}

/// Index and training error of the ERM member of a finite class.
pub(crate) fn erm_index(class: &HypothesisClass, members: &[Predictor], path: &SamplePath, horizon: usize) -> Result<(usize, f64)> {
    let order = class.order();
    let mut best = (0, mean_loss_on(&members[0], &class.loss, &path.values, order, horizon)?);
    for (j, g) in members.iter().enumerate().skip(1) {
        let r = mean_loss_on(g, &class.loss, &path.values, order, horizon)?;
        if r < best.1 {
            best = (j, r);
        }
    }
    Ok(best)
}
