use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::baselines::hungarian;
use crate::error::{Error, Result};

/// GOSPA parameters. Only `alpha = 2` is supported, which yields the
/// localization / missed / false decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GospaParams {
    pub c: f64,
    pub p: f64,
    pub alpha: f64,
}

impl Default for GospaParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            p: 1.0,
            alpha: 2.0,
        }
    }
}

impl GospaParams {
    pub fn new(c: f64, p: f64) -> Result<Self> {
        let params = Self { c, p, alpha: 2.0 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!(
                "GOSPA cutoff must be positive, got {}",
                self.c
            )));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!(
                "GOSPA exponent must be >= 1, got {}",
                self.p
            )));
        }
        if self.alpha != 2.0 {
            return Err(Error::Config(format!(
                "only alpha = 2 is supported, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Cost of one unassigned point, `c^p / alpha`.
    pub fn unassigned_cost(&self) -> f64 {
        self.c.powf(self.p) / self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GospaResult {
    pub total: f64,
    /// `(sum of matched d^p)^(1/p)`.
    pub localization: f64,
    pub n_missed: usize,
    pub missed_cost: f64,
    pub n_false: usize,
    pub false_cost: f64,
    pub params: GospaParams,
}

impl GospaResult {
    /// Total error divided by the number of objects; zero when there are none.
    pub fn per_object(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.total / n as f64
    }
}

/// One CSV row of a scored frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GospaRecord {
    pub frame: usize,
    pub algorithm: String,
    pub total: f64,
    pub localization: f64,
    pub missed: usize,
    #[serde(rename = "false")]
    pub false_: usize,
}

impl GospaRecord {
    pub fn new(frame: usize, algorithm: impl Into<String>, r: &GospaResult) -> Self {
        Self {
            frame,
            algorithm: algorithm.into(),
            total: r.total,
            localization: r.localization,
            missed: r.n_missed,
            false_: r.n_false,
        }
    }
}

/// GOSPA distance between estimated and true point sets (`alpha = 2`).
///
/// Points are optimally assigned on `min(d, c)^p`. An assigned pair at
/// `d >= c` is counted as one miss plus one false estimate, which costs the
/// same `c^p` under `alpha = 2`.
pub fn gospa(
    estimates: &[Vector2<f64>],
    truths: &[Vector2<f64>],
    params: &GospaParams,
) -> GospaResult {
    let (c, p) = (params.c, params.p);
    let half = params.unassigned_cost();
    let cost = DMatrix::from_fn(truths.len(), estimates.len(), |i, j| {
        (truths[i] - estimates[j]).norm().min(c).powf(p)
    });
    let assignment = hungarian(&cost).expect("GOSPA costs are finite");

    let mut loc_p = 0.0;
    let mut matched = 0;
    for (i, j) in assignment.pairs() {
        let d = (truths[i] - estimates[j]).norm();
        if d < c {
            loc_p += d.powf(p);
            matched += 1;
        }
    }
    let n_missed = truths.len() - matched;
    let n_false = estimates.len() - matched;
    let missed_cost = n_missed as f64 * half;
    let false_cost = n_false as f64 * half;
    GospaResult {
        total: (loc_p + missed_cost + false_cost).powf(1.0 / p),
        localization: loc_p.powf(1.0 / p),
        n_missed,
        missed_cost,
        n_false,
        false_cost,
        params: *params,
    }
}
