//! Two-sided paired t-test over per-topic scores, with Bonferroni correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::PerTopicScores;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub t_statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub adjusted_alpha: f64,
    pub significant: bool,
    pub n: usize,
}

/// Paired t-test on the differences `a - b` over the topics both score.
///
/// Degenerate samples (all differences equal) have zero variance: a nonzero
/// mean difference gives `p = 0` and an infinite statistic, a zero mean gives
/// `p = 1` and `t = 0`.
pub fn paired_t_test(scores_a: &PerTopicScores, scores_b: &PerTopicScores) -> Result<PairedTTest> {
    if scores_a.measure() != scores_b.measure() {
        return Err(Error::Mismatch(format!(
            "t-test between {} and {}",
            scores_a.measure(),
            scores_b.measure()
        )));
    }
    let diffs: Vec<f64> = scores_a
        .scores()
        .iter()
        .filter_map(|(t, a)| scores_b.scores().get(t).map(|b| a - b))
        .collect();
    let n = diffs.len();
    if n < 2 {
        return Err(Error::Undefined(format!(
            "paired t-test needs at least 2 common topics, found {n}"
        )));
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    // Rounding noise in the differences must not pass for real variance.
    let tol = 1e-12 * diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if var.sqrt() <= tol {
        return Ok(if mean.abs() <= tol {
            PairedTTest {
                t_statistic: 0.0,
                p_value: 1.0,
                n,
            }
        } else {
            PairedTTest {
                t_statistic: f64::INFINITY.copysign(mean),
                p_value: 0.0,
                n,
            }
        });
    }
    let t = mean / (var / nf).sqrt();
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("df >= 1");
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(PairedTTest {
        t_statistic: t,
        p_value: p,
        n,
    })
}

/// Per-comparison significance level for a family of `m` tests.
pub fn bonferroni(alpha: f64, m: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invariant("alpha", format!("{alpha} not in (0, 1]")));
    }
    if m == 0 {
        return Err(Error::invariant("family size", "must be >= 1"));
    }
    Ok(alpha / m as f64)
}

/// Runs the paired test and compares it against the Bonferroni-adjusted level.
pub fn test_significance(
    scores_a: &PerTopicScores,
    scores_b: &PerTopicScores,
    alpha: f64,
    family_size: usize,
) -> Result<TestResult> {
    let adjusted_alpha = bonferroni(alpha, family_size)?;
    let test = paired_t_test(scores_a, scores_b)?;
    Ok(TestResult {
        t_statistic: test.t_statistic,
        p_value: test.p_value,
        adjusted_alpha,
        significant: test.p_value < adjusted_alpha,
        n: test.n,
    })
}
