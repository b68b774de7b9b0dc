//! Seedable simulators for the three generative laws: IID uniform draws, the
//! completely dependent copy process, and an AR(1) recursion with uniform
//! innovations.
//!
//! Besides forward simulation the module samples from two conditional laws
//! that the risk machinery needs: the continuation of a path beyond its last
//! value, and the tangent sequence, whose `i`-th entry is drawn from the law
//! of `Y_i` given the *original* prefix `Y_1..Y_{i-1}`.
//!
//! Uniform draws are half-open, `[a, b)`.
//!
//! The AR(1) chain is anchored at `Y_0 = 0` and the recursion applies from
//! `i = 1`. Started there it is only asymptotically stationary; `burn_in`
//! discards that many pre-sample steps (0 reproduces the anchored chain,
//! 200 is plenty for `theta <= 0.9`).

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Generative law of the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProcessSpec {
    /// `Y_i ~ U(a, b)` independently.
    Iid { a: f64, b: f64 },
    /// `Y_1 ~ U(a, b)`, `Y_i = Y_{i-1}`.
    Copy { a: f64, b: f64 },
    /// `Y_0 = 0`, `Y_i = theta Y_{i-1} + eta_i` with `eta_i ~ U(a, b)`.
    Ar1 {
        a: f64,
        b: f64,
        theta: f64,
        #[serde(default)]
        burn_in: usize,
    },
}

impl ProcessSpec {
    pub fn iid(a: f64, b: f64) -> Result<Self> {
        let spec = ProcessSpec::Iid { a, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn copy(a: f64, b: f64) -> Result<Self> {
        let spec = ProcessSpec::Copy { a, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ar1(a: f64, b: f64, theta: f64, burn_in: usize) -> Result<Self> {
        let spec = ProcessSpec::Ar1 {
            a,
            b,
            theta,
            burn_in,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks `a < b` (both finite) and, for AR(1), `0 <= theta < 1`.
    ///
    /// `theta = 0` is accepted as the degenerate limit in which the
    /// recursion reduces to the innovations.
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.range();
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Parameter(format!(
                "innovation range requires finite a < b, got a = {a}, b = {b}"
            )));
        }
        if let ProcessSpec::Ar1 { theta, .. } = *self {
            if !(0.0..1.0).contains(&theta) {
                return Err(Error::Parameter(format!(
                    "AR(1) coefficient must lie in [0, 1), got {theta}"
                )));
            }
        }
        Ok(())
    }

    /// Innovation bounds `(a, b)`.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            ProcessSpec::Iid { a, b } | ProcessSpec::Copy { a, b } => (a, b),
            ProcessSpec::Ar1 { a, b, .. } => (a, b),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::Iid { .. } => "iid",
            ProcessSpec::Copy { .. } => "copy",
            ProcessSpec::Ar1 { .. } => "ar1",
        }
    }

    /// Mean of one innovation, `(a + b) / 2`.
    pub fn innovation_mean(&self) -> f64 {
        let (a, b) = self.range();
        0.5 * (a + b)
    }

    /// `E[Y_t]` for the 1-based index `t`.
    pub fn mean_at(&self, t: usize) -> f64 {
        match *self {
            ProcessSpec::Iid { .. } | ProcessSpec::Copy { .. } => self.innovation_mean(),
            ProcessSpec::Ar1 { theta, burn_in, .. } => {
                self.innovation_mean() * geometric_sum(theta, burn_in + t)
            }
        }
    }

    /// `E[(1/n) sum_{t<=n} Y_t]`.
    pub fn mean_of_average(&self, n: usize) -> f64 {
        (1..=n).map(|t| self.mean_at(t)).sum::<f64>() / n as f64
    }

    /// An interval containing every value the process can take.
    ///
    /// For AR(1) this is the hull of the anchor 0 and the stationary range
    /// `[a, b] / (1 - theta)`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ProcessSpec::Iid { a, b } | ProcessSpec::Copy { a, b } => (a, b),
            ProcessSpec::Ar1 { a, b, theta, .. } => {
                let s = 1.0 / (1.0 - theta);
                ((a * s).min(0.0), (b * s).max(0.0))
            }
        }
    }

    /// Width of the range of `Y_1`, which absorbs the burn-in innovations.
    pub fn initial_width(&self) -> f64 {
        let (a, b) = self.range();
        match *self {
            ProcessSpec::Ar1 { theta, burn_in, .. } => (b - a) * geometric_sum(theta, burn_in + 1),
            _ => b - a,
        }
    }

    fn uniform(&self) -> Uniform<f64> {
        let (a, b) = self.range();
        Uniform::new(a, b)
    }

    /// Draws `Y_1` from its marginal law.
    fn draw_initial<R: Rng>(&self, rng: &mut R) -> f64 {
        let eta = self.uniform();
        match *self {
            ProcessSpec::Iid { .. } | ProcessSpec::Copy { .. } => eta.sample(rng),
            ProcessSpec::Ar1 { theta, burn_in, .. } => {
                let mut y = 0.0;
                for _ in 0..burn_in {
                    y = theta * y + eta.sample(rng);
                }
                theta * y + eta.sample(rng)
            }
        }
    }

    /// Draws `Y_{i}` from its law given the previous value `Y_{i-1}`.
    fn draw_next<R: Rng>(&self, prev: f64, rng: &mut R) -> f64 {
        match *self {
            ProcessSpec::Iid { .. } => self.uniform().sample(rng),
            ProcessSpec::Copy { .. } => prev,
            ProcessSpec::Ar1 { theta, .. } => theta * prev + self.uniform().sample(rng),
        }
    }
}

/// `1 + x + ... + x^{k-1}`.
pub(crate) fn geometric_sum(x: f64, k: usize) -> f64 {
    if x == 0.0 {
        return if k == 0 { 0.0 } else { 1.0 };
    }
    (1.0 - x.powi(k as i32)) / (1.0 - x)
}

/// A realized finite trajectory together with the law and stream that made it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub values: Vec<f64>,
    pub spec: ProcessSpec,
    pub seed: u64,
    pub stream_index: u64,
}

impl SamplePath {
    /// Wraps externally obtained values; checks the spec and the support
    /// constraints that the law imposes exactly.
    pub fn from_values(values: Vec<f64>, spec: ProcessSpec) -> Result<Self> {
        spec.validate()?;
        if values.is_empty() {
            return Err(Error::Argument("a path needs at least one value".into()));
        }
        let path = SamplePath {
            values,
            spec,
            seed: 0,
            stream_index: 0,
        };
        path.check_consistent(&spec)?;
        Ok(path)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("paths are non-empty")
    }

    /// Errors unless this path was produced under `spec` and respects its
    /// exact support constraints.
    pub fn check_consistent(&self, spec: &ProcessSpec) -> Result<()> {
        if self.spec != *spec {
            return Err(Error::Consistency(format!(
                "path was generated under {:?}, not {:?}",
                self.spec, spec
            )));
        }
        match *spec {
            ProcessSpec::Iid { a, b } | ProcessSpec::Copy { a, b } => {
                if let Some(v) = self.values.iter().find(|v| !(a..=b).contains(*v)) {
                    return Err(Error::Consistency(format!(
                        "value {v} outside [{a}, {b}]"
                    )));
                }
                if matches!(spec, ProcessSpec::Copy { .. })
                    && self.values.iter().any(|v| *v != self.values[0])
                {
                    return Err(Error::Consistency("copy path is not constant".into()));
                }
            }
            ProcessSpec::Ar1 { .. } => {
                let (lo, hi) = spec.support();
                if let Some(v) = self.values.iter().find(|v| !(lo..=hi).contains(*v)) {
                    return Err(Error::Consistency(format!(
                        "value {v} outside the AR(1) support [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Simulates `Y_1..Y_n`.
pub fn simulate(spec: &ProcessSpec, n: usize, stream: RngStream) -> Result<SamplePath> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Argument("path length n must be at least 1".into()));
    }
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(n);
    let mut y = spec.draw_initial(&mut rng);
    values.push(y);
    for _ in 1..n {
        y = spec.draw_next(y, &mut rng);
        values.push(y);
    }
    Ok(SamplePath {
        values,
        spec: *spec,
        seed: stream.root_seed,
        stream_index: stream.stream_index,
    })
}

/// Draws `Y_{n+1}..Y_{n+m}` from their law given the path.
///
/// The returned path holds only the `m` new values.
pub fn continue_path(path: &SamplePath, m: usize, stream: RngStream) -> Result<SamplePath> {
    path.spec.validate()?;
    if m == 0 {
        return Err(Error::Argument("continuation length m must be at least 1".into()));
    }
    if path.is_empty() {
        return Err(Error::Argument("cannot continue an empty path".into()));
    }
    let mut rng = stream.rng();
    let mut y = path.last();
    let values = (0..m)
        .map(|_| {
            y = path.spec.draw_next(y, &mut rng);
            y
        })
        .collect();
    Ok(SamplePath {
        values,
        spec: path.spec,
        seed: stream.root_seed,
        stream_index: stream.stream_index,
    })
}

/// Draws the tangent sequence `Y'_1..Y'_n`: `Y'_1` from the marginal of
/// `Y_1`, and each `Y'_i` from the law of `Y_i` given the original
/// `Y_1..Y_{i-1}`, independently across `i` given the path.
pub fn tangent_sequence(path: &SamplePath, stream: RngStream) -> Result<SamplePath> {
    path.spec.validate()?;
    if path.is_empty() {
        return Err(Error::Argument("cannot build a tangent sequence of an empty path".into()));
    }
    let spec = path.spec;
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(path.len());
    values.push(spec.draw_initial(&mut rng));
    for prev in &path.values[..path.len() - 1] {
        values.push(spec.draw_next(*prev, &mut rng));
    }
    Ok(SamplePath {
        values,
        spec,
        seed: stream.root_seed,
        stream_index: stream.stream_index,
    })
}
