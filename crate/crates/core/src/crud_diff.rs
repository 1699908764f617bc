//! CREATE / UPDATE / DELETE statistics between two environments.
//!
//! Identifiers are compared with set semantics. Documents count as updated
//! when their length differs, or, if both sides carry a content hash, when
//! the hashes differ. Topics are updated when both texts are known and
//! differ; judgments when the grade changed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{
    CorpusSnapshot, DocId, DocMeta, EvaluationEnvironment, Qrels, TopicDef, TopicId,
};

/// A judged (topic, document) pair.
pub type QrelKey = (TopicId, DocId);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDiff<K: Ord> {
    pub created: BTreeSet<K>,
    pub updated: BTreeSet<K>,
    pub deleted: BTreeSet<K>,
    pub total_from: usize,
    pub total_to: usize,
    /// `(total_to - total_from) / total_from`; `None` when growing from zero.
    pub relative_delta: Option<f64>,
}

impl<K: Ord> ComponentDiff<K> {
    pub fn is_identity(&self) -> bool {
        self.created.is_empty() && self.updated.is_empty() && self.deleted.is_empty()
    }
}

fn relative_delta(from: usize, to: usize) -> Option<f64> {
    match (from, to) {
        (0, 0) => Some(0.0),
        (0, _) => None,
        _ => Some((to as f64 - from as f64) / from as f64),
    }
}

fn diff_maps<K, V>(
    a: &BTreeMap<K, V>,
    b: &BTreeMap<K, V>,
    changed: impl Fn(&V, &V) -> bool,
) -> ComponentDiff<K>
where
    K: Ord + Clone,
{
    let created = b.keys().filter(|k| !a.contains_key(*k)).cloned().collect();
    let deleted = a.keys().filter(|k| !b.contains_key(*k)).cloned().collect();
    let updated = a
        .iter()
        .filter_map(|(k, va)| b.get(k).filter(|vb| changed(va, vb)).map(|_| k.clone()))
        .collect();
    ComponentDiff {
        created,
        updated,
        deleted,
        total_from: a.len(),
        total_to: b.len(),
        relative_delta: relative_delta(a.len(), b.len()),
    }
}

fn doc_changed(a: &DocMeta, b: &DocMeta) -> bool {
    match (&a.content_hash, &b.content_hash) {
        (Some(ha), Some(hb)) => ha != hb,
        _ => a.length != b.length,
    }
}

pub fn diff_documents(a: &CorpusSnapshot, b: &CorpusSnapshot) -> ComponentDiff<DocId> {
    diff_maps(a.docs(), b.docs(), doc_changed)
}

pub fn diff_topics(
    a: &BTreeMap<TopicId, TopicDef>,
    b: &BTreeMap<TopicId, TopicDef>,
) -> ComponentDiff<TopicId> {
    diff_maps(a, b, |x, y| match (&x.text, &y.text) {
        (Some(tx), Some(ty)) => tx != ty,
        _ => false,
    })
}

pub fn diff_qrels(a: &Qrels, b: &Qrels) -> ComponentDiff<QrelKey> {
    let flat = |q: &Qrels| -> BTreeMap<QrelKey, u32> {
        q.iter()
            .map(|(t, d, g)| ((t.clone(), d.clone()), g))
            .collect()
    };
    diff_maps(&flat(a), &flat(b), |x, y| x != y)
}

/// Component-wise diff of two environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeSummary {
    pub from_label: String,
    pub to_label: String,
    pub documents: ComponentDiff<DocId>,
    pub topics: ComponentDiff<TopicId>,
    pub qrels: ComponentDiff<QrelKey>,
}

pub fn summarize(a: &EvaluationEnvironment, b: &EvaluationEnvironment) -> ChangeSummary {
    ChangeSummary {
        from_label: a.label.clone(),
        to_label: b.label.clone(),
        documents: diff_documents(&a.corpus, &b.corpus),
        topics: diff_topics(&a.topics, &b.topics),
        qrels: diff_qrels(&a.qrels, &b.qrels),
    }
}
