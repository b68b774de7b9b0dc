//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use tsrisk_core::bounds::{cn2_closed_form, cn2_upper_bound, effective_sample_factor, forecast_bounds, BoundFormula};
use tsrisk_core::certificate::{coverage_grid, CoverageSettings};
use tsrisk_core::concentration::{hoeffding_bound, tail_probability_grid, verify_inequality, Verdict};
use tsrisk_core::hypothesis::{erm_optimism_mc, HypothesisClass, LossSpec, Predictor};
use tsrisk_core::process::{continue_path, simulate};
use tsrisk_core::rademacher::{
    empirical_rademacher, expected_qn_mc, expected_rademacher, ComplexityTarget, RademacherSettings, SigmaMode,
};
use tsrisk_core::{ProcessSpec, RngStream, SamplePath};

const BIN: &str = env!("CARGO_BIN_EXE_tsrisk");

fn ar1_class() -> HypothesisClass {
    let thetas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    HypothesisClass::ar1_grid(&thetas, 0.5, LossSpec::Absolute).unwrap()
}

fn ar1_stationary() -> ProcessSpec {
    ProcessSpec::ar1(0.0, 1.0, 0.5, 200).unwrap()
}

fn within_time(what: &str, start: Instant, limit: Duration) -> String {
    let took = start.elapsed();
    assert!(took < limit, "{what} took {took:?}, limit {limit:?}");
    format!("{:.2}s", took.as_secs_f64())
}

fn criterion_1() -> String {
    let start = Instant::now();
    let spec = ProcessSpec::copy(0.0, 1.0).unwrap();
    let ns = [1usize, 10, 100, 1000];
    let mut p = Vec::new();
    for (j, &n) in ns.iter().enumerate() {
        for f in [BoundFormula::PaperPrinted, BoundFormula::DerivedExact] {
            assert_eq!(cn2_closed_form(&spec, n, f).unwrap(), 1.0);
        }
        let est = tail_probability_grid(&spec, &[0.25], n, 100_000, 11 + j as u64).unwrap().remove(0);
        assert!((est.p_hat - 0.25).abs() <= 3.0 * est.stderr, "n = {n}: {est:?}");
        assert!((est.bound - (-0.125f64).exp()).abs() < 1e-15);
        assert!((est.bound - 0.8825).abs() < 5e-5);
        assert!(est.p_hat <= est.bound);
        p.push(est);
    }
    for a in &p {
        for b in &p {
            let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            assert!((a.p_hat - b.p_hat).abs() <= 3.0 * se, "tail not constant in n");
        }
    }
    let t = within_time("criterion 1", start, Duration::from_secs(10));
    let ph: Vec<String> = p.iter().map(|e| format!("{:.4}", e.p_hat)).collect();
    format!("c2 = 1 at n in {ns:?}; p_hat = [{}] vs 0.25; bound 0.8825; {t}", ph.join(", "))
}

fn criterion_2() -> String {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for &theta in &[0.1, 0.5, 0.9] {
        let spec = ProcessSpec::ar1(0.0, 1.0, theta, 0).unwrap();
        for n in 1..=200usize {
            let scale = 1.0 / ((n * n) as f64 * (1.0 - theta) * (1.0 - theta));
            let brute: f64 = (1..=n).map(|i| scale * (1.0 - theta.powi((n - i) as i32)).powi(2)).sum();
            let closed = cn2_closed_form(&spec, n, BoundFormula::PaperPrinted).unwrap();
            let err = if brute == 0.0 { closed.abs() } else { ((closed - brute) / brute).abs() };
            assert!(err <= 1e-12, "theta {theta}, n {n}: closed {closed} brute {brute}");
            worst = worst.max(err);
            let exact = cn2_closed_form(&spec, n, BoundFormula::DerivedExact).unwrap();
            let upper = cn2_upper_bound(&spec, n).unwrap();
            assert!((upper - scale * n as f64).abs() <= 1e-15 * upper);
            assert!(closed <= upper && exact <= upper, "theta {theta}, n {n}");
            checked += 1;
        }
    }
    assert_eq!(effective_sample_factor(0.5).unwrap(), 0.25);
    format!("{checked} cells, worst relative error {worst:.1e}; upper bound dominates; factor(0.5) = 0.25")
}

fn criterion_3() -> String {
    let start = Instant::now();
    for &(n, eps, a, b) in &[
        (1usize, 0.3, 0.0, 1.0),
        (7, 0.1, -1.0, 2.0),
        (50, 0.05, 0.0, 1.0),
        (333, 0.2, 2.0, 2.5),
        (1000, 0.01, -3.0, 3.0),
    ] {
        let spec = ProcessSpec::iid(a, b).unwrap();
        let c2 = cn2_closed_form(&spec, n, BoundFormula::DerivedExact).unwrap();
        // the exponent coefficient of eps^2 is 2n / (b - a)^2
        let coeff = 2.0 / c2;
        let classical_coeff = 2.0 * n as f64 / ((b - a) * (b - a));
        assert!((coeff - classical_coeff).abs() <= 1e-12 * classical_coeff);
        let path = simulate(&spec, n, RngStream::new(5, n as u64)).unwrap();
        let env = forecast_bounds(&spec, &path, BoundFormula::DerivedExact).unwrap();
        assert!((env.c2 - c2).abs() <= 1e-12 * c2);
        let classical = (-classical_coeff * eps * eps).exp();
        let ours = hoeffding_bound(eps, c2).unwrap();
        assert!((ours - classical).abs() <= 1e-12 * classical);
    }
    let spec = ProcessSpec::iid(0.0, 1.0).unwrap();
    let mut worst = f64::INFINITY;
    for (j, &n) in [50usize, 500].iter().enumerate() {
        for est in tail_probability_grid(&spec, &[0.05, 0.1, 0.2], n, 100_000, 31 + j as u64).unwrap() {
            let r = verify_inequality(&est);
            assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
            worst = worst.min(r.slack);
        }
    }
    let t = within_time("criterion 3", start, Duration::from_secs(60));
    format!("coefficients match classical at 5 points; 6 cells hold, min slack {worst:.4}; {t}")
}

fn criterion_4() -> String {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["report", "--seed", "1", "-o"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("cells.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (kind, verdict, p, bound, se) = (col("kind"), col("verdict"), col("p_hat"), col("bound"), col("stderr"));
    let mut cells = 0;
    let mut kinds = std::collections::BTreeSet::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        assert!(f(p) <= f(bound) + 3.0 * f(se), "{rec:?}");
        assert_eq!(&rec[verdict], "HOLDS");
        kinds.insert(rec[kind].to_string());
        cells += 1;
    }
    assert_eq!(kinds.into_iter().collect::<Vec<_>>(), ["ar1", "copy", "iid"]);
    // a violated cell aborts with exit 3: the printed envelope has C_1^2 = 0
    let spec = r#"{"kind":"ar1","a":0,"b":1,"theta":0.5}"#;
    let out = Command::new(BIN)
        .args(["verify", "--spec", spec, "--n", "1", "--epsilon", "0.1", "--trials", "1000", "--formula", "paper"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    format!("{cells} cells (copy, iid, ar1 burn-in 200) hold; a violated cell exits 3")
}

/// Independent sign enumeration for a finite class of AR(1) predictors.
fn brute_complexity(members: &[(f64, f64)], y: &[f64]) -> f64 {
    let m = y.len() - 1;
    let mut total = 0.0;
    for mask in 0u32..(1 << m) {
        let mut best = 0.0f64;
        for &(theta, c) in members {
            let mut s = 0.0;
            for (i, yi) in y[..m].iter().enumerate() {
                let sign = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                s += sign * (theta * yi + c);
            }
            best = best.max((s / m as f64).abs());
        }
        total += best;
    }
    2.0 * total / (1u64 << m) as f64
}

fn criterion_5() -> String {
    let c = 0.37;
    let pm = HypothesisClass::finite(
        vec![Predictor::constant(c).unwrap(), Predictor::constant(-c).unwrap()],
        LossSpec::Absolute,
    )
    .unwrap();
    let g = RademacherSettings {
        target: ComplexityTarget::Predictions,
        sigma_mode: SigmaMode::Exhaustive,
        ..RademacherSettings::default()
    };
    let spec = ProcessSpec::iid(0.0, 1.0).unwrap();
    let p3 = simulate(&spec, 3, RngStream::new(1, 0)).unwrap();
    let p2 = simulate(&spec, 2, RngStream::new(1, 1)).unwrap();
    assert_eq!(empirical_rademacher(&pm, &p3, &g, RngStream::new(0, 0)).unwrap().mean, c);
    assert_eq!(empirical_rademacher(&pm, &p2, &g, RngStream::new(0, 0)).unwrap().mean, 2.0 * c);

    let ar = ProcessSpec::ar1(0.0, 1.0, 0.5, 50).unwrap();
    let mut worst_z = 0.0f64;
    let mut cases = 0;
    for (k, &(size, m)) in [(1usize, 1usize), (3, 5), (9, 8), (16, 12), (16, 10)].iter().enumerate() {
        let members: Vec<(f64, f64)> = (0..size).map(|j| (j as f64 / size as f64 - 0.4, 0.1 * j as f64 - 0.5)).collect();
        let class = HypothesisClass::finite(
            members.iter().map(|&(t, c)| Predictor::ar1(t, c).unwrap()).collect(),
            LossSpec::Absolute,
        )
        .unwrap();
        let path: SamplePath = simulate(&ar, m + 1, RngStream::new(2, k as u64)).unwrap();
        let exact = empirical_rademacher(&class, &path, &g, RngStream::new(0, 0)).unwrap();
        assert_eq!(exact.sigma_draws, 1 << m);
        let oracle = brute_complexity(&members, &path.values);
        assert!((exact.mean - oracle).abs() <= 1e-12 * oracle.max(1e-300), "{} vs {oracle}", exact.mean);
        let mc = empirical_rademacher(
            &class,
            &path,
            &RademacherSettings {
                sigma_mode: SigmaMode::MonteCarlo,
                sigma_draws: 10_000,
                ..g
            },
            RngStream::new(3, k as u64),
        )
        .unwrap();
        // a rounding floor covers classes where every sign vector scores alike
        let diff = ((mc.mean - exact.mean).abs() - 1e-12 * exact.mean).max(0.0);
        let z = if diff == 0.0 { 0.0 } else { diff / mc.stderr };
        assert!(z <= 3.0, "size {size}, m {m}: mc {mc:?} exact {}", exact.mean);
        worst_z = worst_z.max(z);
        cases += 1;
    }
    format!("{{+-c}} gives c at m = 2 and 2c at m = 1; {cases} classes match enumeration, MC within {worst_z:.2} se")
}

fn criterion_6() -> String {
    let start = Instant::now();
    let (class, spec) = (ar1_class(), ar1_stationary());
    let qn = expected_qn_mc(&class, &spec, 50, 2000, 100_000, 61, 1).unwrap();
    let settings = RademacherSettings {
        target: ComplexityTarget::Losses,
        sigma_draws: 100,
        ..RademacherSettings::default()
    };
    let rad = expected_rademacher(&class, &spec, 50, 2000, &settings, 62).unwrap();
    let combined = (qn.stderr.powi(2) + rad.stderr.powi(2)).sqrt();
    assert!(qn.mean <= rad.mean + 3.0 * combined, "{qn:?} vs {rad:?}");
    let t = within_time("criterion 6", start, Duration::from_secs(300));
    format!(
        "E[Q_n] = {:.4} +- {:.4} <= R_n(H) = {:.4} +- {:.4}; {t}",
        qn.mean, qn.stderr, rad.mean, rad.stderr
    )
}

fn criterion_7() -> String {
    let settings = CoverageSettings {
        trials: 2000,
        risk_oracle_trials: 100_000,
        path_draws: 2000,
        sigma_draws: 100,
        horizon: 1,
        root_seed: 71,
        c2: None,
    };
    let reports = coverage_grid(&ar1_class(), &ar1_stationary(), 50, &[0.05, 0.1], &settings).unwrap();
    let mut parts = Vec::new();
    for r in &reports {
        let threshold = r.delta + 3.0 * (r.delta * (1.0 - r.delta) / r.trials as f64).sqrt();
        assert!(r.violation_rate <= threshold, "{r:?}");
        assert_eq!(r.verdict, Verdict::Holds);
        parts.push(format!("delta {}: {}/{}", r.delta, r.violations, r.trials));
    }
    parts.join(", ")
}

fn criterion_8() -> String {
    let o = erm_optimism_mc(&ar1_class(), &ar1_stationary(), 50, 1, 2000, 100_000, 81).unwrap();
    assert!(o.mean_train <= o.mean_risk + 2.0 * o.stderr_combined, "{o:?}");
    format!(
        "train {:.4} <= risk {:.4} + 2 x {:.4}",
        o.mean_train, o.mean_risk, o.stderr_combined
    )
}

/// `E[Y_{i+k} | Y_i] = theta^k Y_i + mu (1 + theta + ... + theta^(k-1))`.
fn conditional_mean_of_average(y: &[f64], i: usize, n: usize, theta: f64, mu: f64) -> f64 {
    let mut s: f64 = y[..i].iter().sum();
    let mut tk = 1.0;
    let mut geo = 0.0;
    for _ in 1..=n - i {
        geo += tk;
        tk *= theta;
        s += tk * y[i - 1] + mu * geo;
    }
    s / n as f64
}

fn criterion_9() -> String {
    let (n, theta, trials, pairs) = (20usize, 0.5, 10_000u64, 16u64);
    let spec = ProcessSpec::ar1(0.0, 1.0, theta, 0).unwrap();
    let (a, b) = spec.range();
    let failures: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let path = simulate(&spec, n, RngStream::new(91, t)).unwrap();
            let env = forecast_bounds(&spec, &path, BoundFormula::DerivedExact).unwrap();
            let y = &path.values;
            let mut bad = 0;
            for i in 1..=n {
                let past: f64 = y[..i].iter().sum();
                let mc = if i == n {
                    past / n as f64
                } else {
                    // antithetic continuations: innovations u and a + b - u
                    let prefix = SamplePath::from_values(y[..i].to_vec(), spec).unwrap();
                    let mut total = 0.0;
                    for k in 0..pairs {
                        let cont = continue_path(&prefix, n - i, RngStream::new(92 + t, i as u64 * pairs + k)).unwrap();
                        let (mut prev, mut mirror, mut s1, mut s2) = (y[i - 1], y[i - 1], 0.0, 0.0);
                        for &c in &cont.values {
                            let eta = c - theta * prev;
                            prev = c;
                            mirror = theta * mirror + (a + b - eta);
                            s1 += c;
                            s2 += mirror;
                        }
                        total += (s1 + s2) / 2.0;
                    }
                    (past + total / pairs as f64) / n as f64
                };
                let exact = conditional_mean_of_average(y, i, n, theta, spec.innovation_mean());
                let (l, u) = (env.lower[i - 1], env.upper[i - 1]);
                if !(l <= mc && mc <= u && l <= exact && exact <= u) {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    assert_eq!(failures, 0, "{failures} envelope misses");
    format!("{} of {} (trial, i) estimates inside [L_i, U_i]", trials as usize * n, trials as usize * n)
}

fn run_bin(args: &[&str], threads: &str, out: &Path) {
    let out = Command::new(BIN)
        .args(args)
        .args(["--threads", threads, "-o"])
        .arg(out)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn criterion_10() -> String {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ar1 = r#"{"kind":"ar1","a":0,"b":1,"theta":0.5,"burn_in":200}"#;
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("report", vec!["report", "--seed", "5", "--trials", "20000"]),
        ("verify.json", vec!["verify", "--spec", ar1, "--n", "50,500", "--epsilon", "0.05,0.1,0.2", "--trials", "20000"]),
        ("qn.json", vec!["qn", "--spec", ar1, "--n", "50", "--seed", "6", "--oracle-trials", "20000"]),
        ("coverage.json", vec!["coverage", "--spec", ar1, "--n", "50", "--seed", "7", "--oracle-trials", "20000"]),
        ("coverage.csv", vec!["coverage", "--spec", ar1, "--n", "50", "--seed", "7", "--oracle-trials", "20000"]),
        ("certify.json", vec!["certify", "--spec", ar1, "--n", "50", "--seed", "8"]),
        ("rademacher.json", vec!["rademacher", "--spec", ar1, "--n", "30", "--seed", "9", "--path-draws", "500"]),
    ];
    let mut files = 0;
    for (name, args) in &runs {
        let one = d.join(format!("t1-{name}"));
        let four = d.join(format!("t4-{name}"));
        run_bin(args, "1", &one);
        run_bin(args, "4", &four);
        if one.is_dir() {
            let mut entries: Vec<_> = fs::read_dir(&one).unwrap().map(|e| e.unwrap().file_name()).collect();
            entries.sort();
            for e in entries {
                assert_eq!(fs::read(one.join(&e)).unwrap(), fs::read(four.join(&e)).unwrap(), "{name}/{e:?}");
                files += 1;
            }
        } else {
            assert_eq!(fs::read(&one).unwrap(), fs::read(&four).unwrap(), "{name}");
            files += 1;
        }
    }
    format!("{files} report files byte-identical at --threads 1 and 4")
}

type Criterion = (u32, &'static str, fn() -> String);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "copy process reproduction", criterion_1),
        (2, "AR(1) closed form vs brute force", criterion_2),
        (3, "IID recovers Hoeffding", criterion_3),
        (4, "dominance suite via CLI", criterion_4),
        (5, "Rademacher enumeration oracle", criterion_5),
        (6, "E[Q_n] <= Rademacher complexity", criterion_6),
        (7, "certificate coverage", criterion_7),
        (8, "ERM optimism", criterion_8),
        (9, "envelope validity", criterion_9),
        (10, "thread-count reproducibility", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, f) in criteria {
        match panic::catch_unwind(AssertUnwindSafe(f)) {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {id:>2} FAIL  {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
