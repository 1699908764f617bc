//! Per-topic effectiveness (P@k, nDCG, bpref) and average retrieval
//! performance (ARP).
//!
//! Binary measures treat grade >= 1 as relevant. nDCG uses linear gain
//! `grade / log2(rank + 1)`. Unjudged documents are non-relevant for P@k and
//! nDCG and are skipped entirely by bpref.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MeasureKind, MeasureSpec, PerTopicScores, Qrels, Ranking, RunFile, TopicId};

/// Mean of a per-topic score set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArpResult {
    pub measure: MeasureSpec,
    pub system_tag: String,
    pub ee_label: String,
    pub mean: f64,
    pub evaluated_topic_count: usize,
}

impl ArpResult {
    /// Builds an ARP directly from a known mean (e.g. a reported value).
    pub fn from_mean(
        measure: MeasureSpec,
        system_tag: impl Into<String>,
        ee_label: impl Into<String>,
        mean: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&mean) {
            return Err(Error::invariant(
                "ARP",
                format!("mean {mean} outside [0, 1]"),
            ));
        }
        Ok(Self {
            measure,
            system_tag: system_tag.into(),
            ee_label: ee_label.into(),
            mean,
            evaluated_topic_count: 0,
        })
    }
}

fn grade_of(qrels: &Qrels, ranking: &Ranking, doc: &crate::model::DocId) -> u32 {
    qrels.grade(ranking.topic(), doc).unwrap_or(0)
}

/// Fraction of the top `k` entries that are relevant. Short rankings keep
/// the denominator `k`.
pub fn precision_at_k(ranking: &Ranking, qrels: &Qrels, k: u32) -> f64 {
    assert!(k >= 1, "precision cutoff must be >= 1");
    let hits = ranking
        .docs()
        .take(k as usize)
        .filter(|doc| grade_of(qrels, ranking, doc) >= 1)
        .count();
    hits as f64 / f64::from(k)
}

/// Normalized discounted cumulative gain with linear gain.
///
/// With a cutoff `k`, both DCG and the ideal DCG are truncated at `k`.
/// Without one, DCG covers the whole ranking and the ideal ranking covers
/// every judged document, as in trec_eval's `ndcg`. Returns 0 when the topic
/// has no positively graded document.
pub fn ndcg(ranking: &Ranking, qrels: &Qrels, k: Option<u32>) -> f64 {
    let depth = k.map_or(usize::MAX, |k| k as usize);
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranking
        .docs()
        .take(depth)
        .enumerate()
        .map(|(i, doc)| f64::from(grade_of(qrels, ranking, doc)) / discount(i))
        .sum();
    let mut ideal: Vec<u32> = qrels
        .topic(ranking.topic())
        .map(|docs| docs.values().copied().filter(|&g| g > 0).collect())
        .unwrap_or_default();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(depth)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / discount(i))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Binary preference.
///
/// For R judged-relevant and N judged-non-relevant documents, each retrieved
/// relevant document contributes `1 - min(nr, R) / min(R, N)` where `nr` is
/// the number of judged non-relevant documents ranked above it. Unjudged
/// documents are ignored. Returns 0 when R = 0.
pub fn bpref(ranking: &Ranking, qrels: &Qrels) -> f64 {
    let Some(judged) = qrels.topic(ranking.topic()) else {
        return 0.0;
    };
    let r = judged.values().filter(|&&g| g >= 1).count();
    if r == 0 {
        return 0.0;
    }
    let n = judged.len() - r;
    let denom = r.min(n) as f64;
    let mut nonrel_above = 0usize;
    let mut sum = 0.0;
    for doc in ranking.docs() {
        match judged.get(doc) {
            Some(&g) if g >= 1 => {
                sum += if n == 0 {
                    1.0
                } else {
                    1.0 - nonrel_above.min(r) as f64 / denom
                };
            }
            Some(_) => nonrel_above += 1,
            None => {}
        }
    }
    sum / r as f64
}

/// Scores one ranking under `measure`.
pub fn score_ranking(ranking: &Ranking, qrels: &Qrels, measure: MeasureSpec) -> f64 {
    match measure.kind() {
        MeasureKind::PrecisionAtK => {
            precision_at_k(ranking, qrels, measure.cutoff().expect("P@k has a cutoff"))
        }
        MeasureKind::NdcgAtK => ndcg(ranking, qrels, measure.cutoff()),
        MeasureKind::Bpref => bpref(ranking, qrels),
    }
}

/// Evaluates every eligible topic of a run.
///
/// Eligible topics have at least one relevant judgment. Without a filter,
/// the result covers eligible topics the run answered. With a filter, it
/// covers eligible topics in the filter, and those the run did not answer
/// score 0.
pub fn evaluate_run(
    run: &RunFile,
    qrels: &Qrels,
    measure: MeasureSpec,
    topic_filter: Option<&BTreeSet<TopicId>>,
) -> PerTopicScores {
    let eligible = qrels
        .topics()
        .filter(|t| qrels.relevant_count(t) >= 1)
        .filter(|t| topic_filter.is_none_or(|f| f.contains(*t)));
    let mut scores = BTreeMap::new();
    for topic in eligible {
        match run.ranking(topic) {
            Some(ranking) => {
                scores.insert(topic.clone(), score_ranking(ranking, qrels, measure));
            }
            None if topic_filter.is_some() => {
                scores.insert(topic.clone(), 0.0);
            }
            None => {}
        }
    }
    PerTopicScores::new(measure, run.system_tag(), run.ee_label(), scores)
        .expect("measures are bounded by [0, 1]")
}

/// Arithmetic mean over all topics, summed in topic-id order.
pub fn arp(scores: &PerTopicScores) -> Result<ArpResult> {
    if scores.is_empty() {
        return Err(Error::Undefined("no evaluated topics".into()));
    }
    let sum: f64 = scores.scores().values().sum();
    let mean = (sum / scores.len() as f64).clamp(0.0, 1.0);
    Ok(ArpResult {
        measure: scores.measure(),
        system_tag: scores.system_tag().to_string(),
        ee_label: scores.ee_label().to_string(),
        mean,
        evaluated_topic_count: scores.len(),
    })
}
