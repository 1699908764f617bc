//! Builds an append-only sequence of environments from one dated corpus, and
//! intersects topic sets across environments.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Checked, CorpusSnapshot, DocMeta, EvaluationEnvironment, Finding, TopicId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SliceStrategy {
    /// Slices of (almost) equal document count in timestamp order.
    EqualDocCount,
    /// Slice `i` holds every document dated at or before `boundaries[i]`.
    ExplicitBoundaries(Vec<DateTime<Utc>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationPlan {
    num_slices: usize,
    strategy: SliceStrategy,
}

impl SimulationPlan {
    pub fn equal_doc_count(num_slices: usize) -> Result<Self> {
        if num_slices < 2 {
            return Err(Error::invariant(
                "simulation plan",
                "need at least 2 slices",
            ));
        }
        Ok(Self {
            num_slices,
            strategy: SliceStrategy::EqualDocCount,
        })
    }

    pub fn explicit(boundaries: Vec<DateTime<Utc>>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::invariant(
                "simulation plan",
                "need at least 2 boundaries",
            ));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invariant(
                "simulation plan",
                "boundaries must be strictly increasing",
            ));
        }
        Ok(Self {
            num_slices: boundaries.len(),
            strategy: SliceStrategy::ExplicitBoundaries(boundaries),
        })
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    pub fn strategy(&self) -> &SliceStrategy {
        &self.strategy
    }
}

/// Cumulative document counts per slice for `n` docs in `k` slices; the
/// first `n % k` slices get one extra document.
fn equal_cut_points(n: usize, k: usize) -> Vec<usize> {
    let (base, extra) = (n / k, n % k);
    let mut acc = 0;
    (0..k)
        .map(|i| {
            acc += base + usize::from(i < extra);
            acc
        })
        .collect()
}

/// Splits a dated corpus into `plan.num_slices()` cumulative environments
/// labelled `t0..`.
///
/// Documents are ordered by (timestamp, doc id). Environment `i` contains the
/// first slices up to `i`, the base topics unchanged, and the base qrels
/// restricted to its documents.
pub fn split_append_only(
    base: &EvaluationEnvironment,
    plan: &SimulationPlan,
) -> Result<Vec<EvaluationEnvironment>> {
    let mut dated: Vec<(DateTime<Utc>, &DocMeta)> = Vec::with_capacity(base.corpus.len());
    for meta in base.corpus.docs().values() {
        let ts = meta.timestamp.ok_or_else(|| {
            Error::Simulation(format!("document {} has no timestamp", meta.doc_id))
        })?;
        dated.push((ts, meta));
    }
    dated.sort_by(|(ta, a), (tb, b)| ta.cmp(tb).then_with(|| a.doc_id.cmp(&b.doc_id)));

    let cuts: Vec<usize> = match &plan.strategy {
        SliceStrategy::EqualDocCount => {
            let mut distinct: Vec<_> = dated.iter().map(|(ts, _)| *ts).collect();
            distinct.dedup();
            if plan.num_slices > distinct.len() {
                return Err(Error::Simulation(format!(
                    "{} slices requested but only {} distinct timestamps",
                    plan.num_slices,
                    distinct.len()
                )));
            }
            equal_cut_points(dated.len(), plan.num_slices)
        }
        SliceStrategy::ExplicitBoundaries(bounds) => bounds
            .iter()
            .map(|b| dated.partition_point(|(ts, _)| ts <= b))
            .collect(),
    };

    let mut prev = 0;
    let mut out = Vec::with_capacity(cuts.len());
    for (i, &cut) in cuts.iter().enumerate() {
        if cut == prev {
            return Err(Error::Simulation(format!("slice t{i} adds no documents")));
        }
        prev = cut;
        let corpus = CorpusSnapshot::from_docs(dated[..cut].iter().map(|(_, m)| (*m).clone()))?;
        let qrels = base.qrels.retain_docs(|d| corpus.contains(d));
        out.push(EvaluationEnvironment::new(
            format!("t{i}"),
            corpus,
            base.topics.values().cloned(),
            qrels,
        )?);
    }
    Ok(out)
}

/// Topic ids present in every environment. An empty intersection is
/// returned with a warning.
pub fn common_topics(ees: &[EvaluationEnvironment]) -> Result<Checked<BTreeSet<TopicId>>> {
    let (first, rest) = ees
        .split_first()
        .ok_or_else(|| Error::Undefined("common topics of zero environments".into()))?;
    let mut common = first.topic_ids();
    for ee in rest {
        common.retain(|t| ee.topics.contains_key(t));
    }
    let warnings = if common.is_empty() {
        let labels: Vec<_> = ees.iter().map(|e| e.label.as_str()).collect();
        vec![Finding::warning(
            labels.join(","),
            "environments share no topics",
        )]
    } else {
        Vec::new()
    };
    Ok(Checked::with_warnings(common, warnings))
}
