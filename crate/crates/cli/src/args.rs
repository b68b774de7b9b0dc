use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "tsrisk", version, about = "Finite-sample risk bounds for time-series prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one sample path.
    Simulate(SimulateArgs),
    /// Forecastable envelopes and C_n^2 for one path.
    Bounds(BoundsArgs),
    /// Check the concentration inequality against Monte Carlo tails.
    Verify(VerifyArgs),
    /// Expected Rademacher complexity of a class.
    Rademacher(RademacherArgs),
    /// Estimate E[Q_n] and compare it with the Rademacher complexity.
    Qn(QnArgs),
    /// Risk certificate for the ERM predictor on one path.
    Certify(CertifyArgs),
    /// Empirical coverage of the risk certificate.
    Coverage(CoverageArgs),
    /// Regenerate the IID, copy and AR(1) example studies.
    Report(ReportArgs),
}

/// Options that steer execution but never enter a report.
#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (`.csv` for CSV, JSON otherwise); a directory for `report`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Worker threads. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Process spec: a JSON file or an inline JSON object.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Root seed; falls back to TSRISK_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stream: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// `paper` or `exact`.
    #[arg(long)]
    pub formula: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    pub spec: Option<String>,
    /// One or more sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// One or more deviations, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// C_n^2 variant entering the bound: `paper` or `exact`.
    #[arg(long)]
    pub formula: Option<String>,
    /// Verdict tolerance in standard errors.
    #[arg(long)]
    pub tolerance_se: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct RademacherArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    pub spec: Option<String>,
    /// Hypothesis class: a JSON file, inline JSON, or the preset `ar1-grid`.
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// `predictions` or `losses`.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub sigma_draws: Option<u64>,
    /// `auto`, `exhaustive` or `monte_carlo`.
    #[arg(long)]
    pub sigma_mode: Option<String>,
    #[arg(long)]
    pub path_draws: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct QnArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Samples per member for the true-risk oracle.
    #[arg(long)]
    pub oracle_trials: Option<u64>,
    #[arg(long)]
    pub path_draws: Option<u64>,
    #[arg(long)]
    pub sigma_draws: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also run the tangent-sequence check.
    #[arg(long)]
    pub tangent: Option<bool>,
    #[arg(long)]
    pub tolerance_se: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Training path (JSON from `simulate`, or CSV with a `y` column);
    /// simulated from the seed when absent.
    #[arg(long)]
    pub path: Option<String>,
    /// Analytic complexity term; replaces the Rademacher estimate.
    #[arg(long)]
    pub complexity: Option<f64>,
    /// Replaces the loss-class C_n^2 bound.
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub path_draws: Option<u64>,
    #[arg(long)]
    pub sigma_draws: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct CoverageArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// One or more confidence levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub oracle_trials: Option<u64>,
    #[arg(long)]
    pub path_draws: Option<u64>,
    #[arg(long)]
    pub sigma_draws: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub c2: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Monte Carlo trials per tail estimate.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Bounds(a) => &a.common,
            Command::Verify(a) => &a.common,
            Command::Rademacher(a) => &a.common,
            Command::Qn(a) => &a.common,
            Command::Certify(a) => &a.common,
            Command::Coverage(a) => &a.common,
            Command::Report(a) => &a.common,
        }
    }
}
