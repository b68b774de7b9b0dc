//! The three worked examples as one reproducible bundle: IID, copy and
//! AR(1) processes on `[0, 1]`.

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tsrisk_core::bounds::{cn2_closed_form, cn2_upper_bound, effective_sample_factor, BoundFormula};
use tsrisk_core::concentration::{Verdict, DEFAULT_TOLERANCE_SE};
use tsrisk_core::ProcessSpec;

use crate::args::ReportArgs;
use crate::commands::{verify_grid, VerifyCell, VerifyRow};
use crate::config::load;
use crate::output::{csv_table, envelope, to_json_text, Outcome};

pub const COPY_N: [usize; 4] = [1, 10, 100, 1000];
pub const COPY_EPSILON: f64 = 0.25;
pub const IID_N: [usize; 2] = [50, 500];
pub const IID_EPSILON: [f64; 3] = [0.05, 0.1, 0.2];
pub const AR1_THETA: [f64; 3] = [0.1, 0.5, 0.9];
pub const AR1_TABLE_N: [usize; 8] = [1, 2, 5, 10, 20, 50, 100, 200];
pub const AR1_CELL_THETA: f64 = 0.5;
pub const AR1_BURN_IN: usize = 200;

/// Seed offsets per study, so studies never share paths.
const COPY_SEED: u64 = 0;
const IID_SEED: u64 = 100;
const AR1_SEED: u64 = 200;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportConfig {
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default)]
    seed: u64,
}

fn default_trials() -> u64 {
    100_000
}

fn verdict_of(cells: &[VerifyCell]) -> Verdict {
    if cells.iter().all(|c| c.report.verdict == Verdict::Holds) {
        Verdict::Holds
    } else {
        Verdict::Violated
    }
}

pub fn report_cmd(args: &ReportArgs) -> Result<Outcome> {
    let cfg: ReportConfig = load(args.common.config.as_deref(), args)?;
    let grid = |spec: &ProcessSpec, ns: &[usize], eps: &[f64], offset: u64| {
        verify_grid(
            spec,
            ns,
            eps,
            cfg.trials,
            cfg.seed.wrapping_add(offset),
            BoundFormula::DerivedExact,
            DEFAULT_TOLERANCE_SE,
        )
    };

    let copy = ProcessSpec::copy(0.0, 1.0)?;
    let copy_cells = grid(&copy, &COPY_N, &[COPY_EPSILON], COPY_SEED)?;
    let copy_c2 = COPY_N
        .iter()
        .map(|&n| Ok(json!({ "n": n, "c2": cn2_closed_form(&copy, n, BoundFormula::DerivedExact)? })))
        .collect::<Result<Vec<_>>>()?;
    let copy_json = envelope(
        "report",
        &cfg,
        json!({
            "study": "copy",
            "spec": copy,
            "c2": copy_c2,
            // P(Y_1 - 1/2 >= 1/4) for Y_1 ~ U(0, 1), whatever n
            "exact_tail": 0.25,
            "cells": copy_cells,
            "verdict": verdict_of(&copy_cells),
        }),
    )?;

    let iid = ProcessSpec::iid(0.0, 1.0)?;
    let iid_cells = grid(&iid, &IID_N, &IID_EPSILON, IID_SEED)?;
    let classical: Vec<_> = iid_cells
        .iter()
        .map(|c| {
            let (n, eps) = (c.report.n as f64, c.report.epsilon);
            json!({
                "n": c.report.n,
                "epsilon": eps,
                "classical": (-2.0 * n * eps * eps).exp(),
                "bound": c.report.bound,
            })
        })
        .collect();
    let iid_json = envelope(
        "report",
        &cfg,
        json!({
            "study": "iid",
            "spec": iid,
            "hoeffding": classical,
            "cells": iid_cells,
            "verdict": verdict_of(&iid_cells),
        }),
    )?;

    #[derive(Serialize)]
    struct C2Row {
        theta: f64,
        n: usize,
        paper_printed: f64,
        derived_exact: f64,
        upper_bound: f64,
    }
    let mut c2_rows = Vec::new();
    for &theta in &AR1_THETA {
        let spec = ProcessSpec::ar1(0.0, 1.0, theta, 0)?;
        for &n in &AR1_TABLE_N {
            c2_rows.push(C2Row {
                theta,
                n,
                paper_printed: cn2_closed_form(&spec, n, BoundFormula::PaperPrinted)?,
                derived_exact: cn2_closed_form(&spec, n, BoundFormula::DerivedExact)?,
                upper_bound: cn2_upper_bound(&spec, n)?,
            });
        }
    }
    let factors = AR1_THETA
        .iter()
        .map(|&t| Ok(json!({ "theta": t, "factor": effective_sample_factor(t)? })))
        .collect::<Result<Vec<_>>>()?;
    let ar1 = ProcessSpec::ar1(0.0, 1.0, AR1_CELL_THETA, AR1_BURN_IN)?;
    let ar1_cells = grid(&ar1, &IID_N, &IID_EPSILON, AR1_SEED)?;
    let ar1_json = envelope(
        "report",
        &cfg,
        json!({
            "study": "ar1",
            "spec": ar1,
            "c2_table": c2_rows,
            "effective_sample_factor": factors,
            "cells": ar1_cells,
            "verdict": verdict_of(&ar1_cells),
        }),
    )?;

    let all: Vec<&VerifyCell> = copy_cells.iter().chain(&iid_cells).chain(&ar1_cells).collect();
    let violated = all.iter().filter(|c| c.report.verdict == Verdict::Violated).count();
    let verdict = if violated == 0 { Verdict::Holds } else { Verdict::Violated };
    let summary_json = envelope(
        "report",
        &cfg,
        json!({
            "studies": {
                "copy": verdict_of(&copy_cells),
                "iid": verdict_of(&iid_cells),
                "ar1": verdict_of(&ar1_cells),
            },
            "cells": all.len(),
            "violated": violated,
            "verdict": verdict,
        }),
    )?;
    let summary = format!("{}: {} of {} cells violated", verdict.as_str(), violated, all.len());
    let mut out = Outcome::new(summary_json, summary);
    out.violated = violated > 0;
    out.files = vec![
        ("copy.json".into(), to_json_text(&copy_json)?),
        ("iid.json".into(), to_json_text(&iid_json)?),
        ("ar1.json".into(), to_json_text(&ar1_json)?),
        ("cells.csv".into(), csv_table(all.iter().map(|c| VerifyRow::from(*c)))?),
        ("ar1_c2.csv".into(), csv_table(c2_rows)?),
    ];
    Ok(out)
}
