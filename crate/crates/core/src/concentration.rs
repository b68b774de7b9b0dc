//! Exponential tail bounds driven by forecastable envelopes, and their Monte
//! Carlo verification.
//!
//! With predictable `L_i <= E[Z | F_i] <= U_i` and `C_n^2 = sum (U_i - L_i)^2`
//! deterministic, `P(Z - E[Z] >= eps) <= exp(-2 eps^2 / C_n^2)`. For IID data
//! and fixed envelopes this is Hoeffding's inequality; with bounded
//! conditional increments `k_i` it is the McDiarmid form.
//!
//! Only the fixed-`n` event is checked. The running-maximum ("for some n")
//! version of the martingale bound is not simulated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{cn2_closed_form, BoundFormula};
use crate::error::{Error, Result};
use crate::process::{simulate, ProcessSpec};
use crate::rng::RngStream;
use crate::stats::binomial_stderr;

/// Default verification tolerance in binomial standard errors.
pub const DEFAULT_TOLERANCE_SE: f64 = 3.0;

/// `exp(-2 eps^2 / c2)`.
///
/// `c2 = 0` means zero-width envelopes: the statistic is a point mass at its
/// mean and the tail probability is 0 for any `eps > 0`.
pub fn hoeffding_bound(epsilon: f64, c2: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(c2 >= 0.0 && c2.is_finite()) {
        return Err(Error::Argument(format!("c2 must be finite and non-negative, got {c2}")));
    }
    if c2 == 0.0 {
        return Ok(0.0);
    }
    Ok((-2.0 * epsilon * epsilon / c2).exp())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// How the increment constants were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceKind {
    /// `|E[g | F_i] - E[g | F_{i-1}]| <= k_i`, `k_i` predictable.
    PredictableK,
    /// `b_i`: sup over the whole future `Y_i..Y_n` (dependent data).
    FutureSupB,
    /// `d_i`: sup over the single coordinate `Y_i` (IID bounded differences).
    IidSupD,
}

/// Increment bounds `k_1..k_n` for the McDiarmid-type bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceConstants {
    ks: Vec<f64>,
    kind: DifferenceKind,
}

impl DifferenceConstants {
    pub fn new(ks: Vec<f64>, kind: DifferenceKind) -> Result<Self> {
        if let Some(k) = ks.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            return Err(Error::Argument(format!(
                "difference constants must be finite and non-negative, got {k}"
            )));
        }
        Ok(Self { ks, kind })
    }

    pub fn ks(&self) -> &[f64] {
        &self.ks
    }

    pub fn kind(&self) -> DifferenceKind {
        self.kind
    }

    pub fn sum_squares(&self) -> f64 {
        self.ks.iter().map(|k| k * k).sum()
    }
}

/// `exp(-2 eps^2 / sum k_i^2)`.
pub fn mcdiarmid_bound(ks: &DifferenceConstants, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let c2 = ks.sum_squares();
    if c2 == 0.0 {
        return Err(Error::Degenerate(
            "all difference constants are zero; the statistic is constant".into(),
        ));
    }
    hoeffding_bound(epsilon, c2)
}

/// Monte Carlo estimate of `P(Z_n - E[Z_n] >= eps)` next to its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub spec: ProcessSpec,
    pub n: usize,
    pub epsilon: f64,
    /// `E[Z_n]`, the centring of the deviation.
    pub center: f64,
    pub trials: u64,
    pub exceedances: u64,
    pub p_hat: f64,
    pub stderr: f64,
    /// `C_n^2` behind `bound` (closed form, exact envelopes).
    pub c2: f64,
    pub bound: f64,
}

impl TailEstimate {
    fn new(spec: ProcessSpec, n: usize, epsilon: f64, center: f64, trials: u64, exceedances: u64, c2: f64) -> Result<Self> {
        let p_hat = exceedances as f64 / trials as f64;
        Ok(Self {
            spec,
            n,
            epsilon,
            center,
            trials,
            exceedances,
            p_hat,
            stderr: binomial_stderr(p_hat, trials),
            c2,
            bound: hoeffding_bound(epsilon, c2)?,
        })
    }
}

/// Empirical tail of the sample mean for one `eps`.
///
/// Trial `t` simulates its path on stream `(root_seed, t)`. The deviation is
/// centred at the exact `E[Z_n]`, which for AR(1) accounts for the anchor
/// and burn-in.
pub fn tail_probability_mc(
    spec: &ProcessSpec,
    epsilon: f64,
    n: usize,
    trials: u64,
    root_seed: u64,
) -> Result<TailEstimate> {
    let mut v = tail_probability_grid(spec, &[epsilon], n, trials, root_seed)?;
    Ok(v.remove(0))
}

/// [`tail_probability_mc`] for several `eps` on the same simulated paths.
pub fn tail_probability_grid(
    spec: &ProcessSpec,
    epsilons: &[f64],
    n: usize,
    trials: u64,
    root_seed: u64,
) -> Result<Vec<TailEstimate>> {
    spec.validate()?;
    if trials < 100 {
        return Err(Error::Argument(format!("need at least 100 trials, got {trials}")));
    }
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    for &eps in epsilons {
        check_epsilon(eps)?;
    }
    let center = spec.mean_of_average(n);
    let c2 = cn2_closed_form(spec, n, BoundFormula::DerivedExact)?;
    let deviations = (0..trials)
        .into_par_iter()
        .map(|t| {
            let path = simulate(spec, n, RngStream::new(root_seed, t))?;
            Ok(path.values.iter().sum::<f64>() / n as f64 - center)
        })
        .collect::<Result<Vec<f64>>>()?;
    epsilons
        .iter()
        .map(|&eps| {
            let hits = deviations.iter().filter(|d| **d >= eps).count() as u64;
            TailEstimate::new(*spec, n, eps, center, trials, hits, c2)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Holds,
    Violated,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "HOLDS",
            Verdict::Violated => "VIOLATED",
        }
    }
}

/// Outcome of checking an empirical tail against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub spec: ProcessSpec,
    pub epsilon: f64,
    pub n: usize,
    pub trials: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub bound: f64,
    pub verdict: Verdict,
    /// `bound - p_hat`.
    pub slack: f64,
}

/// HOLDS iff `p_hat <= bound + 3 stderr`.
pub fn verify_inequality(estimate: &TailEstimate) -> VerificationReport {
    verify_inequality_with(estimate, DEFAULT_TOLERANCE_SE)
}

pub fn verify_inequality_with(estimate: &TailEstimate, tolerance_se: f64) -> VerificationReport {
    let holds = estimate.p_hat <= estimate.bound + tolerance_se * estimate.stderr;
    VerificationReport {
        spec: estimate.spec,
        epsilon: estimate.epsilon,
        n: estimate.n,
        trials: estimate.trials,
        p_hat: estimate.p_hat,
        stderr: estimate.stderr,
        bound: estimate.bound,
        verdict: if holds { Verdict::Holds } else { Verdict::Violated },
        slack: estimate.bound - estimate.p_hat,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn estimate(p_hat: f64, stderr: f64, bound: f64) -> TailEstimate {
        TailEstimate {
            spec: ProcessSpec::copy(0.0, 1.0).unwrap(),
            n: 10,
            epsilon: 0.25,
            center: 0.5,
            trials: 10_000,
            exceedances: (p_hat * 10_000.0) as u64,
            p_hat,
            stderr,
            c2: 1.0,
            bound,
        }
    }

    #[test]
    fn hoeffding_values() {
        assert!((hoeffding_bound(1.0, 1.0).unwrap() - 0.135_335_283_236_612_7).abs() < 1e-15);
        assert!((hoeffding_bound(0.25, 1.0).unwrap() - 0.882_496_902_584_595).abs() < 1e-12);
        assert!(1.0 - hoeffding_bound(1e-9, 1.0).unwrap() < 1e-15);
        assert_eq!(hoeffding_bound(0.1, 0.0).unwrap(), 0.0);
        assert!(hoeffding_bound(0.0, 1.0).is_err());
        assert!(hoeffding_bound(0.1, -1.0).is_err());
    }

    #[test]
    fn mcdiarmid_cases() {
        let n = 20;
        let ks = DifferenceConstants::new(vec![1.0 / n as f64; n], DifferenceKind::IidSupD).unwrap();
        let eps = 0.2;
        let classical = (-2.0 * n as f64 * eps * eps).exp();
        let got = mcdiarmid_bound(&ks, eps).unwrap();
        assert!((got / classical - 1.0).abs() < 1e-14);

        let single = DifferenceConstants::new(vec![1.0], DifferenceKind::PredictableK).unwrap();
        assert_eq!(mcdiarmid_bound(&single, 1.0).unwrap(), (-2.0f64).exp());

        let zeros = DifferenceConstants::new(vec![0.0; 4], DifferenceKind::FutureSupB).unwrap();
        assert!(matches!(mcdiarmid_bound(&zeros, 0.1), Err(Error::Degenerate(_))));
        assert!(DifferenceConstants::new(vec![0.1, -0.1], DifferenceKind::PredictableK).is_err());
        assert!(DifferenceConstants::new(vec![f64::INFINITY], DifferenceKind::PredictableK).is_err());
    }

    #[test]
    fn verification_verdicts() {
        let r = verify_inequality(&estimate(0.25, 0.004, 0.8825));
        assert_eq!(r.verdict, Verdict::Holds);
        assert!((r.slack - 0.6325).abs() < 1e-12);
        assert_eq!(verify_inequality(&estimate(0.0, 0.0, 1e-6)).verdict, Verdict::Holds);
        assert_eq!(verify_inequality(&estimate(0.5, 0.005, 0.1)).verdict, Verdict::Violated);
    }

    #[test]
    fn copy_tail_is_a_quarter() {
        let spec = ProcessSpec::copy(0.0, 1.0).unwrap();
        let e = tail_probability_mc(&spec, 0.25, 10, 20_000, 5).unwrap();
        assert!((e.p_hat - 0.25).abs() <= 3.0 * e.stderr, "{e:?}");
        assert!((e.bound - (-0.125f64).exp()).abs() < 1e-15);
        assert_eq!(verify_inequality(&e).verdict, Verdict::Holds);
        let far = tail_probability_mc(&spec, 0.5 + 1e-9, 10, 1000, 5).unwrap();
        assert_eq!(far.exceedances, 0);
    }

    #[test]
    fn iid_tail_respects_hoeffding() {
        let spec = ProcessSpec::iid(0.0, 1.0).unwrap();
        let e = tail_probability_mc(&spec, 0.2, 100, 20_000, 11).unwrap();
        assert!((e.bound - (-8.0f64).exp()).abs() < 1e-15);
        assert!(e.p_hat <= e.bound + 3.0 * e.stderr);
    }

    #[test]
    fn tail_arguments_checked() {
        let spec = ProcessSpec::iid(0.0, 1.0).unwrap();
        assert!(matches!(tail_probability_mc(&spec, -0.1, 10, 100, 0), Err(Error::Argument(_))));
        assert!(matches!(tail_probability_mc(&spec, 0.1, 10, 99, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn grid_shares_paths_and_counts_are_integral() {
        let spec = ProcessSpec::ar1(0.0, 1.0, 0.5, 200).unwrap();
        let grid = tail_probability_grid(&spec, &[0.05, 0.1, 0.2], 50, 2000, 3).unwrap();
        assert!(grid[0].exceedances >= grid[1].exceedances);
        assert!(grid[1].exceedances >= grid[2].exceedances);
        for e in &grid {
            assert_eq!(e.p_hat * e.trials as f64, e.exceedances as f64);
            assert!((e.center - 1.0).abs() < 1e-12);
        }
        let single = tail_probability_mc(&spec, 0.1, 50, 2000, 3).unwrap();
        assert_eq!(single, grid[1]);
    }

    proptest! {
        #[test]
        fn hoeffding_monotone(e1 in 0.01f64..2.0, de in 0.0f64..1.0, c in 0.01f64..5.0, dc in 0.0f64..5.0) {
            prop_assert!(hoeffding_bound(e1 + de, c).unwrap() <= hoeffding_bound(e1, c).unwrap());
            prop_assert!(hoeffding_bound(e1, c).unwrap() <= hoeffding_bound(e1, c + dc).unwrap());
        }

        #[test]
        fn mcdiarmid_permutation_and_scaling(
            mut ks in proptest::collection::vec(0.0f64..1.0, 1..20),
            eps in 0.01f64..1.0,
            lambda in 0.1f64..10.0,
        ) {
            ks[0] += 0.01;
            let base = DifferenceConstants::new(ks.clone(), DifferenceKind::PredictableK).unwrap();
            let mut rev = ks.clone();
            rev.reverse();
            let rev = DifferenceConstants::new(rev, DifferenceKind::PredictableK).unwrap();
            let b = mcdiarmid_bound(&base, eps).unwrap();
            prop_assert!((b - mcdiarmid_bound(&rev, eps).unwrap()).abs() <= 1e-12 * b.max(1e-300));
            let scaled: Vec<f64> = ks.iter().map(|k| k * lambda).collect();
            let scaled = DifferenceConstants::new(scaled, DifferenceKind::PredictableK).unwrap();
            let via_eps = mcdiarmid_bound(&base, eps / lambda).unwrap();
            let s = mcdiarmid_bound(&scaled, eps).unwrap();
            prop_assert!((s - via_eps).abs() <= 1e-12 * s.max(via_eps).max(1e-300));
        }
    }
}
