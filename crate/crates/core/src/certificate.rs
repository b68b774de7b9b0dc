//! High-probability risk certificates and their empirical coverage.
//!
//! With probability at least `1 - delta`, whenever `C_n^2 <= c2` almost
//! surely,
//!
//! ```text
//! R(h) <= train(h) + E[Q_n] + sqrt(c2) * sqrt(ln(1/delta) / 2)
//! ```
//!
//! for every `h` in the class, in particular for the ERM predictor. The
//! middle term is supplied either as a Rademacher estimate or as an analytic
//! bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::Verdict;
use crate::error::{Error, Result};
use crate::hypothesis::{erm_index, evaluable_indices, risk_oracle, sub_seed, ClassVariant, HypothesisClass};
use crate::process::{geometric_sum, simulate, ProcessSpec};
use crate::rademacher::{expected_rademacher, ComplexityTarget, RademacherEstimate, RademacherSettings, SigmaMode};
use crate::rng::{label, RngStream};

/// Where the complexity term came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ComplexitySource {
    /// Mean of an [`expected_rademacher`] run.
    Rademacher {
        estimate: RademacherEstimate,
        target: ComplexityTarget,
        root_seed: u64,
    },
    /// A value supplied by the caller.
    Analytic { note: String },
}

/// Where `c2` came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum C2Source {
    /// [`loss_class_c2`] for the named process.
    LossClass {
        recipe: String,
        process: ProcessSpec,
        n: usize,
        horizon: usize,
    },
    Supplied { note: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub complexity: ComplexitySource,
    pub c2: C2Source,
    /// Seed of the training path, when the certificate came from one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_seed: Option<u64>,
}

impl Default for Provenance {
    fn default() -> Self {
        Self {
            complexity: ComplexitySource::Analytic {
                note: "supplied by caller".into(),
            },
            c2: C2Source::Supplied {
                note: "supplied by caller".into(),
            },
            path_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCertificate {
    pub train_error: f64,
    pub complexity_term: f64,
    pub confidence_term: f64,
    pub c2: f64,
    pub delta: f64,
    pub total: f64,
    pub provenance: Provenance,
}

/// `sqrt(c2) * sqrt(ln(1/delta) / 2)`.
pub fn confidence_term(c2: f64, delta: f64) -> Result<f64> {
    if !(c2 > 0.0 && c2.is_finite()) {
        return Err(Error::Argument(format!("c2 must be positive, got {c2}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Argument(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(c2.sqrt() * ((1.0 / delta).ln() / 2.0).sqrt())
}

pub fn build_certificate(train_error: f64, complexity_term: f64, c2: f64, delta: f64) -> Result<RiskCertificate> {
    build_certificate_with(train_error, complexity_term, c2, delta, Provenance::default())
}

pub fn build_certificate_with(
    train_error: f64,
    complexity_term: f64,
    c2: f64,
    delta: f64,
    provenance: Provenance,
) -> Result<RiskCertificate> {
    if !(train_error >= 0.0 && train_error.is_finite()) {
        return Err(Error::Argument(format!("training error must be non-negative, got {train_error}")));
    }
    if !(complexity_term >= 0.0 && complexity_term.is_finite()) {
        return Err(Error::Argument(format!("complexity term must be non-negative, got {complexity_term}")));
    }
    let confidence_term = confidence_term(c2, delta)?;
    Ok(RiskCertificate {
        train_error,
        complexity_term,
        confidence_term,
        c2,
        delta,
        total: train_error + complexity_term + confidence_term,
        provenance,
    })
}

/// Recipe string recorded in provenance for [`loss_class_c2`].
pub const LOSS_CLASS_C2_RECIPE: &str = "c2 = sum_k d_k^2, d_k = max_g (1/m) sum_i min(loss_max, \
phi (b-a) r_k [I(i+h,k) + sum_j |w_j| I(i-j+1,k)]); I(t,k) = influence of innovation k on Y_t \
(iid: 1{t=k}; copy: 1{k=1}; ar1: theta^(t-k) 1{t>=k}); r_1 = (1-theta^(B+1))/(1-theta) for ar1 \
with burn-in B, else r_k = 1";

/// Deterministic bound on `C_n^2` for `Q_n` over a loss class.
///
/// Innovation `k` moves `Y_t` by at most `(b - a) r_k I(t, k)`; a
/// `phi`-Lipschitz loss turns that into a per-term change, capped at the
/// loss range, and the supremum over the class is bounded by the largest
/// member change. `d_k` bounds the width of the `k`-th martingale increment.
pub fn loss_class_c2(class: &HypothesisClass, spec: &ProcessSpec, n: usize, horizon: usize) -> Result<f64> {
    class.validate()?;
    spec.validate()?;
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    let order = class.order();
    let idx: Vec<usize> = evaluable_indices(n, order, horizon).collect();
    if idx.is_empty() {
        return Err(Error::InsufficientData(format!("n = {n} leaves no evaluable index")));
    }
    let m = idx.len() as f64;
    let phi = class.loss.lipschitz();
    let loss_max = class.loss_max(spec.support());
    let (a, b) = spec.range();
    let influence = |t: usize, k: usize| -> f64 {
        match spec {
            ProcessSpec::Iid { .. } => f64::from(u8::from(t == k)),
            ProcessSpec::Copy { .. } => f64::from(u8::from(k == 1)),
            ProcessSpec::Ar1 { theta, .. } => {
                if t >= k {
                    theta.powi((t - k) as i32)
                } else {
                    0.0
                }
            }
        }
    };
    let r = |k: usize| match spec {
        ProcessSpec::Ar1 { theta, burn_in, .. } if k == 1 => geometric_sum(*theta, burn_in + 1),
        _ => 1.0,
    };
    // |w_j| profiles per member; a ball is bounded by its worst l1 mass on
    // the most influential lag.
    let profiles: Vec<Vec<f64>> = match &class.variant {
        ClassVariant::Finite { members } => members
            .iter()
            .map(|g| {
                let mut w: Vec<f64> = g.weights().iter().map(|w| w.abs()).collect();
                w.resize(order, 0.0);
                w
            })
            .collect(),
        ClassVariant::LinearBall { .. } => vec![],
    };
    let ball_mass = class.max_weight_l1();
    let mut c2 = 0.0;
    for k in 1..=n {
        let scale = phi * (b - a) * r(k);
        let term = |i: usize, lag: f64| (scale * (influence(i + horizon, k) + lag)).min(loss_max);
        let d_k = if profiles.is_empty() {
            idx.iter()
                .map(|&i| {
                    let worst = (0..order).map(|j| influence(i - j, k)).fold(0.0, f64::max);
                    term(i, ball_mass * worst)
                })
                .sum::<f64>()
                / m
        } else {
            profiles
                .iter()
                .map(|w| {
                    idx.iter()
                        .map(|&i| term(i, w.iter().enumerate().map(|(j, wj)| wj * influence(i - j, k)).sum()))
                        .sum::<f64>()
                        / m
                })
                .fold(0.0, f64::max)
        };
        c2 += d_k * d_k;
    }
    Ok(c2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSettings {
    pub trials: u64,
    pub risk_oracle_trials: u64,
    /// Paths behind the precomputed complexity term.
    pub path_draws: u64,
    pub sigma_draws: u64,
    pub horizon: usize,
    pub root_seed: u64,
    /// Overrides [`loss_class_c2`] when set.
    pub c2: Option<f64>,
}

impl Default for CoverageSettings {
    fn default() -> Self {
        Self {
            trials: 2000,
            risk_oracle_trials: 100_000,
            path_draws: 2000,
            sigma_draws: 100,
            horizon: 1,
            root_seed: 0,
            c2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub trials: u64,
    pub violations: u64,
    pub delta: f64,
    pub violation_rate: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / trials)`.
    pub threshold: f64,
    pub verdict: Verdict,
    pub complexity_term: f64,
    pub c2: f64,
    pub confidence_term: f64,
    pub mean_total: f64,
    pub mean_true_risk: f64,
    pub risk_oracle_trials: u64,
    pub provenance: Provenance,
}

pub fn coverage_threshold(delta: f64, trials: u64) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt()
}

/// Coverage of the certificate for the ERM predictor at one `delta`.
pub fn coverage_mc(
    class: &HypothesisClass,
    spec: &ProcessSpec,
    n: usize,
    delta: f64,
    settings: &CoverageSettings,
) -> Result<CoverageReport> {
    Ok(coverage_grid(class, spec, n, &[delta], settings)?.remove(0))
}

/// Coverage at several confidence levels, sharing the complexity term, the
/// risk oracle and the trial paths.
pub fn coverage_grid(
    class: &HypothesisClass,
    spec: &ProcessSpec,
    n: usize,
    deltas: &[f64],
    settings: &CoverageSettings,
) -> Result<Vec<CoverageReport>> {
    class.validate()?;
    let members = class
        .members()
        .ok_or_else(|| Error::Unsupported("coverage needs a finite class".into()))?;
    if deltas.is_empty() {
        return Err(Error::Argument("no delta given".into()));
    }
    for &d in deltas {
        confidence_term(1.0, d)?;
    }
    if settings.trials < 500 {
        return Err(Error::Argument(format!("need at least 500 trials, got {}", settings.trials)));
    }
    let horizon = settings.horizon;
    let (c2, c2_source) = match settings.c2 {
        Some(c2) => (
            c2,
            C2Source::Supplied {
                note: "coverage settings".into(),
            },
        ),
        None => (
            loss_class_c2(class, spec, n, horizon)?,
            C2Source::LossClass {
                recipe: LOSS_CLASS_C2_RECIPE.into(),
                process: *spec,
                n,
                horizon,
            },
        ),
    };
    let rad_seed = sub_seed(settings.root_seed, label::RADEMACHER);
    let rad_settings = RademacherSettings {
        target: ComplexityTarget::Losses,
        sigma_draws: settings.sigma_draws,
        sigma_mode: SigmaMode::Auto,
        horizon,
        ..RademacherSettings::default()
    };
    let estimate = expected_rademacher(class, spec, n, settings.path_draws, &rad_settings, rad_seed)?;
    let complexity = estimate.mean;
    let provenance = Provenance {
        complexity: ComplexitySource::Rademacher {
            estimate,
            target: ComplexityTarget::Losses,
            root_seed: rad_seed,
        },
        c2: c2_source,
        path_seed: None,
    };
    let oracle = risk_oracle(
        members,
        &class.loss,
        spec,
        n,
        horizon,
        settings.risk_oracle_trials,
        sub_seed(settings.root_seed, label::ORACLE),
    )?;
    let trial_seed = sub_seed(settings.root_seed, label::TRIALS);
    let fits = (0..settings.trials)
        .into_par_iter()
        .map(|t| {
            let path = simulate(spec, n, RngStream::new(trial_seed, t))?;
            let (idx, train) = erm_index(class, members, &path, horizon)?;
            Ok((train, oracle[idx].value))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let trials = settings.trials;
    let mean_true_risk = fits.iter().map(|f| f.1).sum::<f64>() / trials as f64;
    deltas
        .iter()
        .map(|&delta| {
            let mut violations = 0u64;
            let mut total_sum = 0.0;
            for &(train, risk) in &fits {
                let cert = build_certificate(train, complexity, c2, delta)?;
                total_sum += cert.total;
                violations += u64::from(risk > cert.total);
            }
            let violation_rate = violations as f64 / trials as f64;
            let threshold = coverage_threshold(delta, trials);
            Ok(CoverageReport {
                trials,
                violations,
                delta,
                violation_rate,
                threshold,
                verdict: if violation_rate <= threshold {
                    Verdict::Holds
                } else {
                    Verdict::Violated
                },
                complexity_term: complexity,
                c2,
                confidence_term: confidence_term(c2, delta)?,
                mean_total: total_sum / trials as f64,
                mean_true_risk,
                risk_oracle_trials: settings.risk_oracle_trials,
                provenance: provenance.clone(),
            })
        })
        .collect()
}
