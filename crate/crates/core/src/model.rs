//! Domain types shared by every stage of a longitudinal evaluation.
//!
//! An [`EvaluationEnvironment`] is one timestamped snapshot of documents,
//! topics, and relevance judgments. Runs ([`RunFile`]) are evaluated against
//! an environment's [`Qrels`] to produce [`PerTopicScores`], which the change
//! measures then compare across environments.
//!
//! Every constructor that can violate an invariant returns
//! [`Error::Invariant`]; once built, values are immutable.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! token_id {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self> {
                let value = value.into();
                if value.is_empty() {
                    return Err(Error::invariant($what, "must be non-empty"));
                }
                if value.chars().any(char::is_whitespace) {
                    return Err(Error::invariant(
                        $what,
                        format!("{value:?} contains whitespace"),
                    ));
                }
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(value: String) -> Result<Self> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                Self::new(s)
            }
        }
    };
}

token_id!(
    /// Opaque document identifier (a TREC docno, a URL, ...).
    DocId,
    "doc id"
);
token_id!(
    /// Opaque topic (query) identifier.
    TopicId,
    "topic id"
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// A diagnostic produced while loading or validating data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl Finding {
    pub fn warning(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level}: {}: {}", self.location, self.message)
    }
}

/// A value together with the non-fatal findings raised while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checked<T> {
    pub value: T,
    pub warnings: Vec<Finding>,
}

impl<T> Checked<T> {
    pub fn new(value: T) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }

    pub fn with_warnings(value: T, warnings: Vec<Finding>) -> Self {
        Self { value, warnings }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Checked<U> {
        Checked {
            value: f(self.value),
            warnings: self.warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub doc: DocId,
    pub rank: u32,
    pub score: f64,
}

/// One topic's result list, ordered best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    topic: TopicId,
    entries: Vec<RankedDoc>,
}

impl Ranking {
    /// Builds a ranking from entries that are already in rank order.
    pub fn new(topic: TopicId, entries: Vec<RankedDoc>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if !seen.insert(&entry.doc) {
                return Err(Error::invariant(
                    "ranking",
                    format!("doc {} appears twice for topic {topic}", entry.doc),
                ));
            }
            if entry.rank as usize != i + 1 {
                return Err(Error::invariant(
                    "ranking",
                    format!(
                        "rank {} at position {} for topic {topic}; ranks must be 1..n",
                        entry.rank,
                        i + 1
                    ),
                ));
            }
            if !entry.score.is_finite() {
                return Err(Error::invariant(
                    "ranking",
                    format!("non-finite score for doc {}", entry.doc),
                ));
            }
            if i > 0 && entries[i - 1].score < entry.score {
                return Err(Error::invariant(
                    "ranking",
                    format!("scores increase at rank {} for topic {topic}", entry.rank),
                ));
            }
        }
        Ok(Self { topic, entries })
    }

    /// Builds a canonical ranking from unordered `(doc, score)` pairs: sorted
    /// by score descending, ties broken by ascending doc id, ranks renumbered.
    pub fn from_scored(topic: TopicId, mut scored: Vec<(DocId, f64)>) -> Result<Self> {
        if let Some((doc, _)) = scored.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::invariant(
                "ranking",
                format!("non-finite score for doc {doc}"),
            ));
        }
        scored.sort_by(|(da, sa), (db, sb)| sb.total_cmp(sa).then_with(|| da.cmp(db)));
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (doc, score))| RankedDoc {
                doc,
                rank: i as u32 + 1,
                score,
            })
            .collect();
        Self::new(topic, entries)
    }

    /// Re-sorts by (score desc, doc id asc) and renumbers ranks. Idempotent.
    pub fn canonicalize(&self) -> Self {
        let scored = self
            .entries
            .iter()
            .map(|e| (e.doc.clone(), e.score))
            .collect();
        Self::from_scored(self.topic.clone(), scored).expect("canonical form of a valid ranking")
    }

    pub fn topic(&self) -> &TopicId {
        &self.topic
    }

    pub fn entries(&self) -> &[RankedDoc] {
        &self.entries
    }

    pub fn docs(&self) -> impl Iterator<Item = &DocId> + '_ {
        self.entries.iter().map(|e| &e.doc)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A system's rankings for every topic of one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    system_tag: String,
    ee_label: String,
    rankings: BTreeMap<TopicId, Ranking>,
}

impl RunFile {
    pub fn new(
        system_tag: impl Into<String>,
        ee_label: impl Into<String>,
        rankings: BTreeMap<TopicId, Ranking>,
    ) -> Result<Self> {
        let system_tag = system_tag.into();
        if system_tag.is_empty() {
            return Err(Error::invariant("run", "system tag must be non-empty"));
        }
        if let Some((key, r)) = rankings.iter().find(|(k, r)| *k != r.topic()) {
            return Err(Error::invariant(
                "run",
                format!("ranking for topic {} stored under key {key}", r.topic()),
            ));
        }
        Ok(Self {
            system_tag,
            ee_label: ee_label.into(),
            rankings,
        })
    }

    /// Convenience constructor from a list of rankings.
    pub fn from_rankings(
        system_tag: impl Into<String>,
        ee_label: impl Into<String>,
        rankings: impl IntoIterator<Item = Ranking>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in rankings {
            let topic = r.topic().clone();
            if map.insert(topic.clone(), r).is_some() {
                return Err(Error::invariant(
                    "run",
                    format!("two rankings for topic {topic}"),
                ));
            }
        }
        Self::new(system_tag, ee_label, map)
    }

    pub fn system_tag(&self) -> &str {
        &self.system_tag
    }

    pub fn ee_label(&self) -> &str {
        &self.ee_label
    }

    pub fn rankings(&self) -> &BTreeMap<TopicId, Ranking> {
        &self.rankings
    }

    pub fn ranking(&self, topic: &TopicId) -> Option<&Ranking> {
        self.rankings.get(topic)
    }

    pub fn with_labels(
        mut self,
        system_tag: impl Into<String>,
        ee_label: impl Into<String>,
    ) -> Result<Self> {
        let system_tag = system_tag.into();
        if system_tag.is_empty() {
            return Err(Error::invariant("run", "system tag must be non-empty"));
        }
        self.system_tag = system_tag;
        self.ee_label = ee_label.into();
        Ok(self)
    }
}

/// Graded relevance judgments, keyed by topic then document.
///
/// Grades are raw non-negative integers; callers binarize (grade >= 1) where
/// a measure needs binary relevance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    judgments: BTreeMap<TopicId, BTreeMap<DocId, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds qrels from `(topic, doc, grade)` triples. Negative grades and
    /// duplicate pairs are construction errors.
    pub fn from_triples(triples: impl IntoIterator<Item = (TopicId, DocId, i64)>) -> Result<Self> {
        let mut qrels = Self::new();
        for (topic, doc, grade) in triples {
            let grade = u32::try_from(grade).map_err(|_| {
                Error::invariant(
                    "qrels",
                    format!("grade {grade} for ({topic}, {doc}) must be in 0..=u32::MAX"),
                )
            })?;
            if qrels.insert(topic.clone(), doc.clone(), grade).is_some() {
                return Err(Error::invariant(
                    "qrels",
                    format!("duplicate judgment for ({topic}, {doc})"),
                ));
            }
        }
        Ok(qrels)
    }

    /// Inserts a judgment, returning the previous grade of the pair.
    pub fn insert(&mut self, topic: TopicId, doc: DocId, grade: u32) -> Option<u32> {
        self.judgments.entry(topic).or_default().insert(doc, grade)
    }

    pub fn grade(&self, topic: &TopicId, doc: &DocId) -> Option<u32> {
        self.judgments.get(topic).and_then(|t| t.get(doc)).copied()
    }

    pub fn topic(&self, topic: &TopicId) -> Option<&BTreeMap<DocId, u32>> {
        self.judgments.get(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = &TopicId> + '_ {
        self.judgments.keys()
    }

    pub fn by_topic(&self) -> &BTreeMap<TopicId, BTreeMap<DocId, u32>> {
        &self.judgments
    }

    /// All `(topic, doc, grade)` triples in (topic, doc) order.
    pub fn iter(&self) -> impl Iterator<Item = (&TopicId, &DocId, u32)> + '_ {
        self.judgments
            .iter()
            .flat_map(|(t, docs)| docs.iter().map(move |(d, g)| (t, d, *g)))
    }

    /// Number of judged (topic, doc) pairs.
    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of docs with grade >= 1 for `topic`.
    pub fn relevant_count(&self, topic: &TopicId) -> usize {
        self.topic(topic)
            .map_or(0, |docs| docs.values().filter(|&&g| g >= 1).count())
    }

    /// Keeps only the judgments whose doc satisfies `keep`.
    pub fn retain_docs(&self, mut keep: impl FnMut(&DocId) -> bool) -> Self {
        let judgments = self
            .judgments
            .iter()
            .filter_map(|(t, docs)| {
                let kept: BTreeMap<_, _> = docs
                    .iter()
                    .filter(|(d, _)| keep(d))
                    .map(|(d, g)| (d.clone(), *g))
                    .collect();
                (!kept.is_empty()).then(|| (t.clone(), kept))
            })
            .collect();
        Self { judgments }
    }
}

/// Per-document metadata needed for collection diffs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    pub doc_id: DocId,
    /// Character count of the document text.
    pub length: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
    /// Content digest; when both sides of a diff carry one it decides updates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_hash: Option<String>,
}

impl DocMeta {
    pub fn new(doc_id: DocId, length: u64) -> Self {
        Self {
            doc_id,
            length,
            timestamp: None,
            content_hash: None,
        }
    }

    pub fn with_timestamp(mut self, timestamp: DateTime<Utc>) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn with_content_hash(mut self, hash: impl Into<String>) -> Self {
        self.content_hash = Some(hash.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSnapshot {
    docs: BTreeMap<DocId, DocMeta>,
}

impl CorpusSnapshot {
    pub fn from_docs(docs: impl IntoIterator<Item = DocMeta>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for meta in docs {
            let id = meta.doc_id.clone();
            if map.insert(id.clone(), meta).is_some() {
                return Err(Error::invariant("corpus", format!("duplicate doc id {id}")));
            }
        }
        Ok(Self { docs: map })
    }

    pub fn docs(&self) -> &BTreeMap<DocId, DocMeta> {
        &self.docs
    }

    pub fn get(&self, id: &DocId) -> Option<&DocMeta> {
        self.docs.get(id)
    }

    pub fn contains(&self, id: &DocId) -> bool {
        self.docs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicDef {
    pub topic_id: TopicId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl TopicDef {
    pub fn new(topic_id: TopicId, text: Option<String>) -> Self {
        Self { topic_id, text }
    }
}

/// One snapshot of a test collection: documents, topics, and qrels.
///
/// Equality is structural; all components are ordered maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationEnvironment {
    pub label: String,
    pub corpus: CorpusSnapshot,
    pub topics: BTreeMap<TopicId, TopicDef>,
    pub qrels: Qrels,
}

impl EvaluationEnvironment {
    pub fn new(
        label: impl Into<String>,
        corpus: CorpusSnapshot,
        topics: impl IntoIterator<Item = TopicDef>,
        qrels: Qrels,
    ) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::invariant("environment", "label must be non-empty"));
        }
        let mut map = BTreeMap::new();
        for def in topics {
            let id = def.topic_id.clone();
            if map.insert(id.clone(), def).is_some() {
                return Err(Error::invariant(
                    "environment",
                    format!("topic {id} defined twice"),
                ));
            }
        }
        Ok(Self {
            label,
            corpus,
            topics: map,
            qrels,
        })
    }

    pub fn topic_ids(&self) -> BTreeSet<TopicId> {
        self.topics.keys().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    PrecisionAtK,
    Bpref,
    NdcgAtK,
}

/// An effectiveness measure with its cutoff, e.g. `P@10`, `bpref`, `nDCG`.
///
/// Serialized as its display string so it can key JSON objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MeasureSpec {
    kind: MeasureKind,
    cutoff: Option<u32>,
}

impl MeasureSpec {
    pub fn new(kind: MeasureKind, cutoff: Option<u32>) -> Result<Self> {
        match (kind, cutoff) {
            (_, Some(0)) => Err(Error::invariant("measure", "cutoff must be >= 1")),
            (MeasureKind::PrecisionAtK, None) => {
                Err(Error::invariant("measure", "P@k requires a cutoff"))
            }
            (MeasureKind::Bpref, Some(_)) => {
                Err(Error::invariant("measure", "bpref takes no cutoff"))
            }
            _ => Ok(Self { kind, cutoff }),
        }
    }

    pub fn precision(k: u32) -> Result<Self> {
        Self::new(MeasureKind::PrecisionAtK, Some(k))
    }

    pub fn ndcg(k: Option<u32>) -> Result<Self> {
        Self::new(MeasureKind::NdcgAtK, k)
    }

    pub fn bpref() -> Self {
        Self {
            kind: MeasureKind::Bpref,
            cutoff: None,
        }
    }

    /// `P@10`, `bpref`, and full-depth `nDCG`.
    pub fn defaults() -> Vec<Self> {
        vec![
            Self {
                kind: MeasureKind::PrecisionAtK,
                cutoff: Some(10),
            },
            Self::bpref(),
            Self {
                kind: MeasureKind::NdcgAtK,
                cutoff: None,
            },
        ]
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn cutoff(&self) -> Option<u32> {
        self.cutoff
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            MeasureKind::PrecisionAtK => "P",
            MeasureKind::Bpref => "bpref",
            MeasureKind::NdcgAtK => "nDCG",
        };
        match self.cutoff {
            Some(k) => write!(f, "{name}@{k}"),
            None => f.write_str(name),
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invariant("measure", format!("unknown measure {s:?}"));
        let (name, cutoff) = match s.split_once('@') {
            Some((name, k)) => (name, Some(k.parse::<u32>().map_err(|_| bad())?)),
            None => (s, None),
        };
        let kind = match name.to_ascii_lowercase().as_str() {
            "p" => MeasureKind::PrecisionAtK,
            "bpref" => MeasureKind::Bpref,
            "ndcg" => MeasureKind::NdcgAtK,
            _ => return Err(bad()),
        };
        Self::new(kind, cutoff)
    }
}

impl TryFrom<String> for MeasureSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MeasureSpec> for String {
    fn from(m: MeasureSpec) -> String {
        m.to_string()
    }
}

/// Effectiveness of one run per topic under one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTopicScores {
    measure: MeasureSpec,
    system_tag: String,
    ee_label: String,
    scores: BTreeMap<TopicId, f64>,
}

impl PerTopicScores {
    pub fn new(
        measure: MeasureSpec,
        system_tag: impl Into<String>,
        ee_label: impl Into<String>,
        scores: BTreeMap<TopicId, f64>,
    ) -> Result<Self> {
        if let Some((t, s)) = scores.iter().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
            return Err(Error::invariant(
                "per-topic scores",
                format!("score {s} for topic {t} outside [0, 1]"),
            ));
        }
        Ok(Self {
            measure,
            system_tag: system_tag.into(),
            ee_label: ee_label.into(),
            scores,
        })
    }

    pub fn measure(&self) -> MeasureSpec {
        self.measure
    }

    pub fn system_tag(&self) -> &str {
        &self.system_tag
    }

    pub fn ee_label(&self) -> &str {
        &self.ee_label
    }

    pub fn scores(&self) -> &BTreeMap<TopicId, f64> {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Checks cross-component consistency of an environment.
///
/// Type-level invariants are enforced at construction, so what remains are
/// referential checks: judged topics missing from the topic set, and judged
/// documents missing from the corpus. Both are warnings.
pub fn validate_environment(ee: &EvaluationEnvironment) -> Vec<Finding> {
    let mut findings = Vec::new();
    for topic in ee.qrels.topics() {
        if !ee.topics.contains_key(topic) {
            findings.push(Finding::warning(
                format!("{}/qrels/{topic}", ee.label),
                "judged topic is not in the topic set",
            ));
        }
    }
    // Skipped for corpus-less environments; an empty manifest says nothing.
    if !ee.corpus.is_empty() {
        let mut missing_by_topic: BTreeMap<&TopicId, usize> = BTreeMap::new();
        for (topic, doc, _) in ee.qrels.iter() {
            if !ee.corpus.contains(doc) {
                *missing_by_topic.entry(topic).or_default() += 1;
            }
        }
        for (topic, n) in missing_by_topic {
            findings.push(Finding::warning(
                format!("{}/qrels/{topic}", ee.label),
                format!("{n} judged doc(s) absent from the corpus snapshot"),
            ));
        }
    }
    findings
}
