//! Measures of how a system's results change between two environments.
//!
//! * rank-biased overlap compares the rankings themselves, per topic;
//! * RMSE compares per-topic effectiveness under one shared set of qrels;
//! * the result delta compares ARP directly;
//! * ΔRI compares each environment's improvement over a pivot system.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::effectiveness::ArpResult;
use crate::error::{Error, Result};
use crate::model::{Checked, Finding, PerTopicScores, Ranking, RunFile, TopicId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RboConfig {
    phi: f64,
    depth: usize,
    normalize: bool,
}

impl RboConfig {
    pub fn new(phi: f64, depth: usize, normalize: bool) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::invariant(
                "RBO config",
                format!("phi {phi} not in (0, 1)"),
            ));
        }
        if depth == 0 {
            return Err(Error::invariant("RBO config", "depth must be >= 1"));
        }
        Ok(Self {
            phi,
            depth,
            normalize,
        })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }
}

impl Default for RboConfig {
    /// phi = 0.9, depth 100, normalized.
    fn default() -> Self {
        Self {
            phi: 0.9,
            depth: 100,
            normalize: true,
        }
    }
}

/// Per-topic values of a change measure and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeScores {
    pub per_topic: BTreeMap<TopicId, f64>,
    pub mean: f64,
}

/// Truncated rank-biased overlap of two rankings of the same topic.
///
/// Sums `(1 - phi) * phi^(i-1) * A_i` for `i = 1..=d`, where `A_i` is the
/// size of the intersection of the two depth-`i` prefixes divided by `i`,
/// and `d = min(depth, max(|r|, |r'|))`. A ranking shorter than `i`
/// contributes its whole list. Normalization divides by the total weight
/// `1 - phi^d`, so identical rankings score exactly 1.
pub fn rbo_topic(r: &Ranking, r_prime: &Ranking, cfg: &RboConfig) -> Result<f64> {
    if r.topic() != r_prime.topic() {
        return Err(Error::Mismatch(format!(
            "RBO over topics {} and {}",
            r.topic(),
            r_prime.topic()
        )));
    }
    let a = r.entries();
    let b = r_prime.entries();
    let depth = cfg.depth.min(a.len().max(b.len()));
    if depth == 0 {
        return Ok(1.0);
    }

    let mut seen_a = HashSet::with_capacity(depth);
    let mut seen_b = HashSet::with_capacity(depth);
    let mut overlap = 0usize;
    let mut weight = 1.0 - cfg.phi;
    let mut total_weight = 0.0;
    let mut sum = 0.0;
    for i in 0..depth {
        let x = a.get(i).map(|e| &e.doc);
        let y = b.get(i).map(|e| &e.doc);
        if let Some(x) = x {
            if seen_b.contains(x) {
                overlap += 1;
            }
            seen_a.insert(x);
        }
        if let Some(y) = y {
            if seen_a.contains(y) {
                overlap += 1;
            }
            seen_b.insert(y);
        }
        let agreement = overlap as f64 / (i + 1) as f64;
        sum += weight * agreement;
        total_weight += weight;
        weight *= cfg.phi;
    }
    // total_weight accumulates exactly like sum, so all-agreeing prefixes give 1.0
    Ok(if cfg.normalize {
        sum / total_weight
    } else {
        sum
    })
}

/// Mean RBO over `topic_filter`. A topic missing from either run scores 0
/// and is reported as a warning.
pub fn mean_rbo(
    run: &RunFile,
    run_prime: &RunFile,
    cfg: &RboConfig,
    topic_filter: &BTreeSet<TopicId>,
) -> Result<Checked<ChangeScores>> {
    if topic_filter.is_empty() {
        return Err(Error::Undefined("mean RBO over an empty topic set".into()));
    }
    let mut warnings = Vec::new();
    let mut per_topic = BTreeMap::new();
    for topic in topic_filter {
        let value = match (run.ranking(topic), run_prime.ranking(topic)) {
            (Some(a), Some(b)) => rbo_topic(a, b, cfg)?,
            (a, b) => {
                let missing_from = match (a, b) {
                    (None, None) => "both runs",
                    (None, _) => run.ee_label(),
                    _ => run_prime.ee_label(),
                };
                warnings.push(Finding::warning(
                    format!("{}/{topic}", run.system_tag()),
                    format!("topic missing from {missing_from}; RBO taken as 0"),
                ));
                0.0
            }
        };
        per_topic.insert(topic.clone(), value);
    }
    let mean = per_topic.values().sum::<f64>() / per_topic.len() as f64;
    Ok(Checked::with_warnings(
        ChangeScores { per_topic, mean },
        warnings,
    ))
}

/// Root mean square difference of per-topic scores over the topics both
/// score sets share. Both must come from the same measure, and should come
/// from the same qrels so the recall base is fixed.
pub fn rmse(scores: &PerTopicScores, scores_prime: &PerTopicScores) -> Result<f64> {
    if scores.measure() != scores_prime.measure() {
        return Err(Error::Mismatch(format!(
            "RMSE between {} and {}",
            scores.measure(),
            scores_prime.measure()
        )));
    }
    let diffs: Vec<f64> = scores
        .scores()
        .iter()
        .filter_map(|(t, a)| scores_prime.scores().get(t).map(|b| a - b))
        .collect();
    if diffs.is_empty() {
        return Err(Error::Undefined(
            "RMSE over an empty topic intersection".into(),
        ));
    }
    let mse = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
    Ok(mse.sqrt())
}

/// `(initial - evolved) / initial`. Negative means the system improved.
pub fn result_delta(arp_initial: &ArpResult, arp_evolved: &ArpResult) -> Result<f64> {
    if arp_initial.system_tag != arp_evolved.system_tag {
        return Err(Error::Mismatch(format!(
            "result delta across systems {} and {}",
            arp_initial.system_tag, arp_evolved.system_tag
        )));
    }
    if arp_initial.measure != arp_evolved.measure {
        return Err(Error::Mismatch(format!(
            "result delta across measures {} and {}",
            arp_initial.measure, arp_evolved.measure
        )));
    }
    if arp_initial.mean == 0.0 {
        return Err(Error::Undefined("undefined ReΔ (zero baseline)".into()));
    }
    Ok((arp_initial.mean - arp_evolved.mean) / arp_initial.mean)
}

/// Relative improvement of a system over the pivot within one environment.
pub fn relative_improvement(arp_system: &ArpResult, arp_pivot: &ArpResult) -> Result<f64> {
    if arp_system.ee_label != arp_pivot.ee_label {
        return Err(Error::Mismatch(format!(
            "relative improvement across environments {} and {}",
            arp_system.ee_label, arp_pivot.ee_label
        )));
    }
    if arp_system.measure != arp_pivot.measure {
        return Err(Error::Mismatch(format!(
            "relative improvement across measures {} and {}",
            arp_system.measure, arp_pivot.measure
        )));
    }
    if arp_pivot.mean == 0.0 {
        return Err(Error::Undefined(format!(
            "undefined RI (pivot {} has zero ARP)",
            arp_pivot.system_tag
        )));
    }
    Ok((arp_system.mean - arp_pivot.mean) / arp_pivot.mean)
}

/// `ri_initial - ri_evolved`. Zero means the system kept its relative
/// effectiveness; positive means its advantage over the pivot shrank.
pub fn delta_ri(ri_initial: f64, ri_evolved: f64) -> f64 {
    ri_initial - ri_evolved
}
