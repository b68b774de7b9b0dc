use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tsrisk_core::bounds::{cn2_closed_form, forecast_bounds, BoundFormula};
use tsrisk_core::certificate::{
    build_certificate_with, coverage_grid, loss_class_c2, C2Source, ComplexitySource, CoverageSettings, Provenance,
    LOSS_CLASS_C2_RECIPE,
};
use tsrisk_core::concentration::{
    hoeffding_bound, tail_probability_grid, verify_inequality_with, Verdict, VerificationReport, DEFAULT_TOLERANCE_SE,
};
use tsrisk_core::hypothesis::{class_training_error, erm_fit};
use tsrisk_core::process::simulate;
use tsrisk_core::rademacher::{
    expected_qn_mc, expected_rademacher, lipschitz_contract, tangent_qn_check, ComplexityTarget, RademacherSettings,
    SigmaMode,
};
use tsrisk_core::RngStream;

use crate::args::{BoundsArgs, CertifyArgs, CoverageArgs, QnArgs, RademacherArgs, SimulateArgs, VerifyArgs};
use crate::config::{load, one_or_many, read_path, usage, ClassInput, SpecInput};
use crate::output::{csv_table, envelope, Outcome};

/// Offsets separating the seeds of independent stages within one command.
const RADEMACHER_SEED_OFFSET: u64 = 1;
const TANGENT_SEED_OFFSET: u64 = 2;

fn default_trials() -> u64 {
    100_000
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE_SE
}
fn default_horizon() -> usize {
    1
}
fn default_oracle_trials() -> u64 {
    100_000
}
fn default_mc_trials() -> u64 {
    2000
}
fn default_sigma_draws() -> u64 {
    100
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    spec: SpecInput,
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    stream: u64,
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<Outcome> {
    let mut cfg: SimulateConfig = load(args.common.config.as_deref(), args)?;
    let spec = cfg.spec.resolve()?;
    let path = simulate(&spec, cfg.n, RngStream::new(cfg.seed, cfg.stream)).map_err(|e| usage(e.to_string()))?;
    #[derive(Serialize)]
    struct Row {
        y: f64,
    }
    let csv = csv_table(path.values.iter().map(|&y| Row { y }))?;
    let summary = format!(
        "simulated {} values of the {} process (seed {}, stream {})",
        cfg.n,
        spec.name(),
        cfg.seed,
        cfg.stream
    );
    Ok(Outcome::new(envelope("simulate", &cfg, json!({ "path": path }))?, summary).with_csv(csv))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsConfig {
    spec: SpecInput,
    n: usize,
    #[serde(default)]
    formula: BoundFormula,
    #[serde(default)]
    seed: u64,
}

pub fn bounds_cmd(args: &BoundsArgs) -> Result<Outcome> {
    let mut cfg: BoundsConfig = load(args.common.config.as_deref(), args)?;
    let spec = cfg.spec.resolve()?;
    let path = simulate(&spec, cfg.n, RngStream::new(cfg.seed, 0)).map_err(|e| usage(e.to_string()))?;
    let env = forecast_bounds(&spec, &path, cfg.formula).map_err(|e| usage(e.to_string()))?;
    let closed = cn2_closed_form(&spec, cfg.n, cfg.formula).map_err(|e| usage(e.to_string()))?;
    #[derive(Serialize)]
    struct Row {
        i: usize,
        lower: f64,
        upper: f64,
        width: f64,
    }
    let rows: Vec<Row> = env
        .lower
        .iter()
        .zip(&env.upper)
        .enumerate()
        .map(|(k, (l, u))| Row {
            i: k + 1,
            lower: *l,
            upper: *u,
            width: u - l,
        })
        .collect();
    let csv = csv_table(rows)?;
    let summary = format!("c2 = {} ({}, n = {})", env.c2, cfg.formula.as_str(), cfg.n);
    let body = json!({
        "c2": env.c2,
        "closed_form_c2": closed,
        "formula": cfg.formula,
        "lower": env.lower,
        "upper": env.upper,
        "path": path.values,
    });
    Ok(Outcome::new(envelope("bounds", &cfg, body)?, summary).with_csv(csv))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    spec: SpecInput,
    #[serde(deserialize_with = "one_or_many")]
    n: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    epsilon: Vec<f64>,
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    formula: BoundFormula,
    #[serde(default = "default_tolerance")]
    tolerance_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyCell {
    #[serde(flatten)]
    pub report: VerificationReport,
    pub c2: f64,
    pub center: f64,
    pub exceedances: u64,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct VerifyRow {
    pub kind: &'static str,
    pub n: usize,
    pub epsilon: f64,
    pub trials: u64,
    pub exceedances: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub c2: f64,
    pub bound: f64,
    pub verdict: &'static str,
    pub slack: f64,
}

impl From<&VerifyCell> for VerifyRow {
    fn from(c: &VerifyCell) -> Self {
        Self {
            kind: c.report.spec.name(),
            n: c.report.n,
            epsilon: c.report.epsilon,
            trials: c.report.trials,
            exceedances: c.exceedances,
            p_hat: c.report.p_hat,
            stderr: c.report.stderr,
            c2: c.c2,
            bound: c.report.bound,
            verdict: c.report.verdict.as_str(),
            slack: c.report.slack,
        }
    }
}

/// Tail estimates on a grid. Sample size `n[j]` uses root seed `seed + j`;
/// all `epsilon` at one `n` share paths.
pub fn verify_grid(
    spec: &tsrisk_core::ProcessSpec,
    ns: &[usize],
    epsilons: &[f64],
    trials: u64,
    seed: u64,
    formula: BoundFormula,
    tolerance_se: f64,
) -> Result<Vec<VerifyCell>> {
    if tolerance_se.is_nan() || tolerance_se < 0.0 {
        return Err(usage("tolerance_se must be non-negative"));
    }
    let mut cells = Vec::new();
    for (j, &n) in ns.iter().enumerate() {
        let cell_seed = seed.wrapping_add(j as u64);
        let ests = tail_probability_grid(spec, epsilons, n, trials, cell_seed).map_err(|e| usage(e.to_string()))?;
        for mut est in ests {
            if formula != BoundFormula::DerivedExact {
                est.c2 = cn2_closed_form(spec, n, formula)?;
                est.bound = hoeffding_bound(est.epsilon, est.c2)?;
            }
            cells.push(VerifyCell {
                report: verify_inequality_with(&est, tolerance_se),
                c2: est.c2,
                center: est.center,
                exceedances: est.exceedances,
                seed: cell_seed,
            });
        }
    }
    Ok(cells)
}

pub fn verify_cmd(args: &VerifyArgs) -> Result<Outcome> {
    let mut cfg: VerifyConfig = load(args.common.config.as_deref(), args)?;
    let spec = cfg.spec.resolve()?;
    if cfg.n.is_empty() || cfg.epsilon.is_empty() {
        return Err(usage("need at least one n and one epsilon"));
    }
    let cells = verify_grid(&spec, &cfg.n, &cfg.epsilon, cfg.trials, cfg.seed, cfg.formula, cfg.tolerance_se)?;
    let violated = cells.iter().filter(|c| c.report.verdict == Verdict::Violated).count();
    let verdict = if violated == 0 { Verdict::Holds } else { Verdict::Violated };
    let csv = csv_table(cells.iter().map(VerifyRow::from))?;
    let summary = if cells.len() == 1 {
        let r = &cells[0].report;
        format!(
            "{}: p_hat = {} +- {}, bound = {} (n = {}, eps = {})",
            r.verdict.as_str(),
            r.p_hat,
            r.stderr,
            r.bound,
            r.n,
            r.epsilon
        )
    } else {
        format!("{}: {} of {} cells violated", verdict.as_str(), violated, cells.len())
    };
    let body = if cells.len() == 1 {
        serde_json::to_value(&cells[0])?
    } else {
        json!({ "cells": cells, "verdict": verdict })
    };
    let mut out = Outcome::new(envelope("verify", &cfg, body)?, summary).with_csv(csv);
    out.violated = violated > 0;
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RademacherConfig {
    spec: SpecInput,
    #[serde(default)]
    class: ClassInput,
    n: usize,
    #[serde(default)]
    target: ComplexityTarget,
    #[serde(default = "default_rad_sigma_draws")]
    sigma_draws: u64,
    #[serde(default)]
    sigma_mode: SigmaMode,
    #[serde(default = "default_rad_path_draws")]
    path_draws: u64,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default = "default_grid_points")]
    grid_points: usize,
    #[serde(default)]
    seed: u64,
}

fn default_rad_sigma_draws() -> u64 {
    RademacherSettings::default().sigma_draws
}
fn default_rad_path_draws() -> u64 {
    1000
}
fn default_grid_points() -> usize {
    RademacherSettings::default().grid_points
}

pub fn rademacher_cmd(args: &RademacherArgs) -> Result<Outcome> {
    let mut cfg: RademacherConfig = load(args.common.config.as_deref(), args)?;
    let spec = cfg.spec.resolve()?;
    let class = cfg.class.resolve(&spec)?;
    let settings = RademacherSettings {
        target: cfg.target,
        sigma_draws: cfg.sigma_draws,
        sigma_mode: cfg.sigma_mode,
        horizon: cfg.horizon,
        grid_points: cfg.grid_points,
    };
    let est = expected_rademacher(&class, &spec, cfg.n, cfg.path_draws, &settings, cfg.seed)
        .map_err(|e| usage(e.to_string()))?;
    let phi = class.loss.lipschitz();
    let mut body = json!({ "estimate": est, "lipschitz": phi });
    let mut summary = format!("R_n = {} +- {} ({:?} target, n = {})", est.mean, est.stderr, cfg.target, cfg.n);
    if cfg.target == ComplexityTarget::Predictions {
        let contracted = lipschitz_contract(est.mean, phi)?;
        body["loss_class_bound"] = json!(contracted);
        summary.push_str(&format!(", loss class <= {contracted}"));
    }
    Ok(Outcome::new(envelope("rademacher", &cfg, body)?, summary))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QnConfig {
    spec: SpecInput,
    #[serde(default)]
    class: ClassInput,
    n: usize,
    #[serde(default = "default_mc_trials")]
    trials: u64,
    #[serde(default = "default_oracle_trials")]
    oracle_trials: u64,
    #[serde(default = "default_mc_trials")]
    path_draws: u64,
    #[serde(default = "default_sigma_draws")]
    sigma_draws: u64,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_true")]
    tangent: bool,
    #[serde(default = "default_tolerance")]
    tolerance_se: f64,
}

pub fn qn_cmd(args: &QnArgs) -> Result<Outcome> {
    let mut cfg: QnConfig = load(args.common.config.as_deref(), args)?;
    let spec = cfg.spec.resolve()?;
    let class = cfg.class.resolve(&spec)?;
    let bad = |e: tsrisk_core::Error| usage(e.to_string());
    let qn = expected_qn_mc(&class, &spec, cfg.n, cfg.trials, cfg.oracle_trials, cfg.seed, cfg.horizon).map_err(bad)?;
    let settings = RademacherSettings {
        target: ComplexityTarget::Losses,
        sigma_draws: cfg.sigma_draws,
        horizon: cfg.horizon,
        ..RademacherSettings::default()
    };
    let rad = expected_rademacher(
        &class,
        &spec,
        cfg.n,
        cfg.path_draws,
        &settings,
        cfg.seed.wrapping_add(RADEMACHER_SEED_OFFSET),
    )
    .map_err(bad)?;
    let combined = (qn.stderr * qn.stderr + rad.stderr * rad.stderr).sqrt();
    let verdict = if qn.mean <= rad.mean + cfg.tolerance_se * combined {
        Verdict::Holds
    } else {
        Verdict::Violated
    };
    let mut body = json!({
        "qn": qn,
        "rademacher": rad,
        "combined_stderr": combined,
        "verdict": verdict,
    });
    if cfg.tangent {
        let t = tangent_qn_check(
            &class,
            &spec,
            cfg.n,
            cfg.trials,
            cfg.seed.wrapping_add(TANGENT_SEED_OFFSET),
            cfg.horizon,
        )
        .map_err(bad)?;
        body["tangent"] = serde_json::to_value(t)?;
    }
    let summary = format!(
        "{}: E[Q_n] = {} +- {}, R_n(H) = {} +- {}",
        verdict.as_str(),
        qn.mean,
        qn.stderr,
        rad.mean,
        rad.stderr
    );
    let mut out = Outcome::new(envelope("qn", &cfg, body)?, summary);
    out.violated = verdict == Verdict::Violated;
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertifyConfig {
    spec: SpecInput,
    #[serde(default)]
    class: ClassInput,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    complexity: Option<f64>,
    #[serde(default)]
    c2: Option<f64>,
    #[serde(default = "default_rad_path_draws")]
    path_draws: u64,
    #[serde(default = "default_sigma_draws")]
    sigma_draws: u64,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default)]
    seed: u64,
}

fn default_delta() -> f64 {
    0.05
}

pub fn certify_cmd(args: &CertifyArgs) -> Result<Outcome> {
    let mut cfg: CertifyConfig = load(args.common.config.as_deref(), args)?;
    let spec = cfg.spec.resolve()?;
    let class = cfg.class.resolve(&spec)?;
    let bad = |e: tsrisk_core::Error| usage(e.to_string());
    let path = match (&cfg.path, cfg.n) {
        (Some(file), n) => {
            let p = read_path(file, &spec)?;
            if n.is_some_and(|n| n != p.len()) {
                return Err(usage(format!("n = {} disagrees with the path length {}", n.unwrap_or(0), p.len())));
            }
            p
        }
        (None, Some(n)) => simulate(&spec, n, RngStream::new(cfg.seed, 0)).map_err(bad)?,
        (None, None) => return Err(usage("give n or a training path")),
    };
    let n = path.len();
    cfg.n = Some(n);
    let g = erm_fit(&class, &path, cfg.horizon).map_err(bad)?;
    let train = class_training_error(&class, &g, &path, cfg.horizon).map_err(bad)?;
    let (complexity, complexity_source) = match cfg.complexity {
        Some(v) => (
            v,
            ComplexitySource::Analytic {
                note: "supplied by --complexity".into(),
            },
        ),
        None => {
            let settings = RademacherSettings {
                target: ComplexityTarget::Losses,
                sigma_draws: cfg.sigma_draws,
                horizon: cfg.horizon,
                ..RademacherSettings::default()
            };
            let rad_seed = cfg.seed.wrapping_add(RADEMACHER_SEED_OFFSET);
            let est = expected_rademacher(&class, &spec, n, cfg.path_draws, &settings, rad_seed).map_err(bad)?;
            (
                est.mean,
                ComplexitySource::Rademacher {
                    estimate: est,
                    target: ComplexityTarget::Losses,
                    root_seed: rad_seed,
                },
            )
        }
    };
    let (c2, c2_source) = match cfg.c2 {
        Some(v) => (
            v,
            C2Source::Supplied {
                note: "supplied by --c2".into(),
            },
        ),
        None => (
            loss_class_c2(&class, &spec, n, cfg.horizon).map_err(bad)?,
            C2Source::LossClass {
                recipe: LOSS_CLASS_C2_RECIPE.into(),
                process: spec,
                n,
                horizon: cfg.horizon,
            },
        ),
    };
    let provenance = Provenance {
        complexity: complexity_source,
        c2: c2_source,
        path_seed: cfg.path.is_none().then_some(cfg.seed),
    };
    let cert = build_certificate_with(train, complexity, c2, cfg.delta, provenance).map_err(bad)?;
    let summary = format!(
        "R <= {} with probability >= {} (train {}, complexity {}, confidence {})",
        cert.total,
        1.0 - cert.delta,
        cert.train_error,
        cert.complexity_term,
        cert.confidence_term
    );
    let body = json!({ "certificate": cert, "predictor": g });
    Ok(Outcome::new(envelope("certify", &cfg, body)?, summary))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverageConfig {
    spec: SpecInput,
    #[serde(default)]
    class: ClassInput,
    n: usize,
    #[serde(default = "default_deltas", deserialize_with = "one_or_many")]
    delta: Vec<f64>,
    #[serde(default = "default_mc_trials")]
    trials: u64,
    #[serde(default = "default_oracle_trials")]
    oracle_trials: u64,
    #[serde(default = "default_mc_trials")]
    path_draws: u64,
    #[serde(default = "default_sigma_draws")]
    sigma_draws: u64,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    c2: Option<f64>,
}

fn default_deltas() -> Vec<f64> {
    vec![0.05, 0.1]
}

pub fn coverage_cmd(args: &CoverageArgs) -> Result<Outcome> {
    let mut cfg: CoverageConfig = load(args.common.config.as_deref(), args)?;
    let spec = cfg.spec.resolve()?;
    let class = cfg.class.resolve(&spec)?;
    let settings = CoverageSettings {
        trials: cfg.trials,
        risk_oracle_trials: cfg.oracle_trials,
        path_draws: cfg.path_draws,
        sigma_draws: cfg.sigma_draws,
        horizon: cfg.horizon,
        root_seed: cfg.seed,
        c2: cfg.c2,
    };
    let reports = coverage_grid(&class, &spec, cfg.n, &cfg.delta, &settings).map_err(|e| usage(e.to_string()))?;
    #[derive(Serialize)]
    struct Row {
        delta: f64,
        trials: u64,
        violations: u64,
        violation_rate: f64,
        threshold: f64,
        verdict: &'static str,
        complexity_term: f64,
        c2: f64,
        confidence_term: f64,
        mean_total: f64,
        mean_true_risk: f64,
    }
    let csv = csv_table(reports.iter().map(|r| Row {
        delta: r.delta,
        trials: r.trials,
        violations: r.violations,
        violation_rate: r.violation_rate,
        threshold: r.threshold,
        verdict: r.verdict.as_str(),
        complexity_term: r.complexity_term,
        c2: r.c2,
        confidence_term: r.confidence_term,
        mean_total: r.mean_total,
        mean_true_risk: r.mean_true_risk,
    }))?;
    let violated = reports.iter().any(|r| r.verdict == Verdict::Violated);
    let verdict = if violated { Verdict::Violated } else { Verdict::Holds };
    let rates: Vec<String> = reports
        .iter()
        .map(|r| format!("delta {}: {}/{}", r.delta, r.violations, r.trials))
        .collect();
    let summary = format!("{}: {}", verdict.as_str(), rates.join(", "));
    let body = json!({ "reports": reports, "verdict": verdict });
    let mut out = Outcome::new(envelope("coverage", &cfg, body)?, summary).with_csv(csv);
    out.violated = violated;
    Ok(out)
}

