//! Readers and writers for TREC runs, TREC qrels, corpus manifests, topic
//! files, and environment configs.
//!
//! Parsers accept any iterator of lines so they work equally on files,
//! strings, and test fixtures. Line numbers in errors are 1-based.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_environment, Checked, CorpusSnapshot, DocId, DocMeta, EvaluationEnvironment, Finding,
    Qrels, Ranking, RunFile, TopicDef, TopicId,
};

/// Parses a 6-column TREC run (`topic Q0 doc rank score tag`).
///
/// Rankings are canonicalized: entries are ordered by score descending with
/// ties broken by ascending doc id, and ranks are renumbered from 1. The rank
/// column is only used to warn when the file's order disagrees.
pub fn parse_run<I, S>(lines: I, ee_label: &str) -> Result<Checked<RunFile>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut warnings = Vec::new();
    let mut tag: Option<String> = None;
    let mut warned_tag = false;
    let mut warned_q0 = false;
    // topic -> (doc -> line), plus (doc, file rank, score) in file order
    let mut seen: HashMap<TopicId, HashMap<DocId, usize>> = HashMap::new();
    let mut topics: BTreeMap<TopicId, Vec<(DocId, i64, f64)>> = BTreeMap::new();

    for (idx, line) in lines.into_iter().enumerate() {
        let lineno = idx + 1;
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::parse(
                lineno,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        let topic = TopicId::new(cols[0]).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if !cols[1].eq_ignore_ascii_case("q0") && !warned_q0 {
            warned_q0 = true;
            warnings.push(Finding::warning(
                format!("line {lineno}"),
                format!("column 2 is {:?}, expected Q0", cols[1]),
            ));
        }
        let doc = DocId::new(cols[2]).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let rank: i64 = cols[3]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("rank {:?} is not an integer", cols[3])))?;
        let score: f64 = cols[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| {
                Error::parse(
                    lineno,
                    format!("score {:?} is not a finite number", cols[4]),
                )
            })?;
        match &tag {
            None => tag = Some(cols[5].to_string()),
            Some(first) if first != cols[5] && !warned_tag => {
                warned_tag = true;
                warnings.push(Finding::warning(
                    format!("line {lineno}"),
                    format!(
                        "run tag {:?} differs from first tag {first:?}; keeping the first",
                        cols[5]
                    ),
                ));
            }
            Some(_) => {}
        }
        if let Some(prev) = seen
            .entry(topic.clone())
            .or_default()
            .insert(doc.clone(), lineno)
        {
            return Err(Error::parse(
                lineno,
                format!("duplicate ({topic}, {doc}), first seen on line {prev}"),
            ));
        }
        topics.entry(topic).or_default().push((doc, rank, score));
    }

    let tag = tag.ok_or_else(|| Error::parse(0, "run contains no entries"))?;
    let mut rankings = BTreeMap::new();
    for (topic, mut entries) in topics {
        let scored = entries.iter().map(|(d, _, s)| (d.clone(), *s)).collect();
        let ranking = Ranking::from_scored(topic.clone(), scored)?;
        entries.sort_by_key(|(_, rank, _)| *rank);
        let file_order = entries.iter().map(|(d, _, _)| d);
        if !file_order.eq(ranking.docs()) {
            warnings.push(Finding::warning(
                format!("topic {topic}"),
                "rank column disagrees with score order; ranks were renumbered from scores",
            ));
        }
        rankings.insert(topic, ranking);
    }
    let run = RunFile::new(tag, ee_label, rankings)?;
    Ok(Checked::with_warnings(run, warnings))
}

/// Writes a run in canonical form: topics in id order, entries in rank
/// order, single-space separated, scores in shortest round-trip notation.
pub fn write_run(run: &RunFile) -> String {
    let mut out = String::new();
    for ranking in run.rankings().values() {
        for e in ranking.entries() {
            let _ = writeln!(
                out,
                "{} Q0 {} {} {} {}",
                ranking.topic(),
                e.doc,
                e.rank,
                e.score,
                run.system_tag()
            );
        }
    }
    out
}

/// Parses 4-column TREC qrels (`topic iteration doc grade`).
///
/// Negative grades are clamped to 0, as trec_eval does. Repeating a pair with
/// the same grade is a warning; with a different grade it is an error.
pub fn parse_qrels<I, S>(lines: I) -> Result<Checked<Qrels>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut warnings = Vec::new();
    let mut judged: BTreeMap<(TopicId, DocId), (u32, usize)> = BTreeMap::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let lineno = idx + 1;
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                lineno,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let topic = TopicId::new(cols[0]).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let doc = DocId::new(cols[2]).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let raw: i64 = cols[3]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("grade {:?} is not an integer", cols[3])))?;
        let grade = if raw < 0 {
            warnings.push(Finding::warning(
                format!("line {lineno}"),
                format!("negative grade {raw} for ({topic}, {doc}) treated as 0"),
            ));
            0
        } else {
            u32::try_from(raw)
                .map_err(|_| Error::parse(lineno, format!("grade {raw} too large")))?
        };
        match judged.entry((topic, doc)) {
            Entry::Vacant(v) => {
                v.insert((grade, lineno));
            }
            Entry::Occupied(o) => {
                let ((topic, doc), (prev, prev_line)) = (o.key(), *o.get());
                if prev == grade {
                    warnings.push(Finding::warning(
                        format!("line {lineno}"),
                        format!("duplicate judgment ({topic}, {doc}) ignored"),
                    ));
                } else {
                    return Err(Error::parse(
                        lineno,
                        format!(
                            "conflicting grades for ({topic}, {doc}): {prev} on line {prev_line}, {grade} here"
                        ),
                    ));
                }
            }
        }
    }
    let mut qrels = Qrels::new();
    for ((topic, doc), (grade, _)) in judged {
        qrels.insert(topic, doc, grade);
    }
    Ok(Checked::with_warnings(qrels, warnings))
}

pub fn write_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (topic, doc, grade) in qrels.iter() {
        let _ = writeln!(out, "{topic} 0 {doc} {grade}");
    }
    out
}

#[derive(Debug, Deserialize, Serialize)]
struct ManifestLine {
    doc_id: String,
    length: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    content_hash: Option<String>,
}

/// Parses an ISO-8601 instant (`2020-01-01T12:00:00Z`, with offset, or
/// naive and taken as UTC) or a calendar date (midnight UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|naive| naive.and_utc())
}

/// Parses a JSON-lines corpus manifest, one `{"doc_id", "length",
/// "timestamp"?, "content_hash"?}` object per line.
pub fn parse_manifest<I, S>(lines: I) -> Result<CorpusSnapshot>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut docs: BTreeMap<DocId, DocMeta> = BTreeMap::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let lineno = idx + 1;
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let raw: ManifestLine =
            serde_json::from_str(line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let doc_id = DocId::new(raw.doc_id).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let timestamp = match raw.timestamp {
            Some(ts) => Some(parse_timestamp(&ts).ok_or_else(|| {
                Error::parse(lineno, format!("unparsable timestamp {ts:?} for {doc_id}"))
            })?),
            None => None,
        };
        if docs.contains_key(&doc_id) {
            return Err(Error::parse(lineno, format!("duplicate doc_id {doc_id}")));
        }
        docs.insert(
            doc_id.clone(),
            DocMeta {
                doc_id,
                length: raw.length,
                timestamp,
                content_hash: raw.content_hash,
            },
        );
    }
    CorpusSnapshot::from_docs(docs.into_values())
}

pub fn write_manifest(corpus: &CorpusSnapshot) -> String {
    let mut out = String::new();
    for meta in corpus.docs().values() {
        let line = ManifestLine {
            doc_id: meta.doc_id.to_string(),
            length: meta.length,
            timestamp: meta
                .timestamp
                .map(|ts| ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)),
            content_hash: meta.content_hash.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("manifest line serializes"));
        out.push('\n');
    }
    out
}

/// Parses a topic file: one topic per line, `topic_id<TAB>text`. The text
/// is optional; a line without a tab is a bare topic id.
pub fn parse_topics<I, S>(lines: I) -> Result<Vec<TopicDef>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out: Vec<TopicDef> = Vec::new();
    let mut seen = HashMap::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let lineno = idx + 1;
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = match line.split_once('\t') {
            Some((id, text)) => (id.trim(), Some(text.trim()).filter(|t| !t.is_empty())),
            None => (line.trim(), None),
        };
        let topic_id = TopicId::new(id).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if let Some(prev) = seen.insert(topic_id.clone(), lineno) {
            return Err(Error::parse(
                lineno,
                format!("topic {topic_id} already defined on line {prev}"),
            ));
        }
        out.push(TopicDef::new(topic_id, text.map(str::to_string)));
    }
    Ok(out)
}

pub fn write_topics<'a>(topics: impl IntoIterator<Item = &'a TopicDef>) -> String {
    let mut out = String::new();
    for def in topics {
        match &def.text {
            Some(text) => {
                let _ = writeln!(out, "{}\t{}", def.topic_id, text);
            }
            None => {
                let _ = writeln!(out, "{}", def.topic_id);
            }
        }
    }
    out
}

/// Where to find the components of one environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EEConfig {
    pub label: String,
    pub manifest_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topics_path: Option<PathBuf>,
    pub qrels_path: PathBuf,
}

impl EEConfig {
    fn validate(&self) -> Result<()> {
        if self.label.is_empty() {
            return Err(Error::Config("environment label must be non-empty".into()));
        }
        let empty = |p: &Path| p.as_os_str().is_empty();
        if empty(&self.manifest_path)
            || empty(&self.qrels_path)
            || self.topics_path.as_deref().is_some_and(empty)
        {
            return Err(Error::Config(format!(
                "environment {}: paths must be non-empty",
                self.label
            )));
        }
        Ok(())
    }

    fn resolved(mut self, base: &Path) -> Self {
        let join = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        self.manifest_path = join(self.manifest_path);
        self.qrels_path = join(self.qrels_path);
        self.topics_path = self.topics_path.map(join);
        self
    }
}

/// Parses an environment config: a JSON array of [`EEConfig`] objects whose
/// order defines the sequence t0..tn. Paths are returned as written.
pub fn parse_config(json: &str) -> Result<Vec<EEConfig>> {
    let configs: Vec<EEConfig> = serde_json::from_str(json)?;
    let mut labels = HashMap::new();
    for (i, cfg) in configs.iter().enumerate() {
        cfg.validate()?;
        if let Some(prev) = labels.insert(cfg.label.as_str(), i) {
            return Err(Error::Config(format!(
                "label {:?} used by entries {prev} and {i}",
                cfg.label
            )));
        }
    }
    Ok(configs)
}

/// Reads a config file; relative paths are resolved against its directory.
pub fn load_config(path: &Path) -> Result<Vec<EEConfig>> {
    let text = read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    Ok(parse_config(&text)?
        .into_iter()
        .map(|c| c.resolved(base))
        .collect())
}

pub fn write_config(configs: &[EEConfig]) -> String {
    let mut s = serde_json::to_string_pretty(configs).expect("config serializes");
    s.push('\n');
    s
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_run(path: &Path, ee_label: &str) -> Result<Checked<RunFile>> {
    let text = read_to_string(path)?;
    parse_run(text.lines(), ee_label).map_err(|e| e.in_file(path))
}

pub fn read_qrels(path: &Path) -> Result<Checked<Qrels>> {
    let text = read_to_string(path)?;
    parse_qrels(text.lines()).map_err(|e| e.in_file(path))
}

pub fn read_manifest(path: &Path) -> Result<CorpusSnapshot> {
    let text = read_to_string(path)?;
    parse_manifest(text.lines()).map_err(|e| e.in_file(path))
}

pub fn read_topics(path: &Path) -> Result<Vec<TopicDef>> {
    let text = read_to_string(path)?;
    parse_topics(text.lines()).map_err(|e| e.in_file(path))
}

/// Loads all components of one environment. Without a topic file the topic
/// set is the set of judged topics. Parse and validation warnings are
/// returned alongside the environment.
pub fn load_environment(config: &EEConfig) -> Result<Checked<EvaluationEnvironment>> {
    config.validate()?;
    let corpus = read_manifest(&config.manifest_path)?;
    let Checked {
        value: qrels,
        warnings: mut findings,
    } = read_qrels(&config.qrels_path)?;
    let topics = match &config.topics_path {
        Some(path) => read_topics(path)?,
        None => qrels
            .topics()
            .map(|t| TopicDef::new(t.clone(), None))
            .collect(),
    };
    let ee = EvaluationEnvironment::new(config.label.clone(), corpus, topics, qrels)?;
    findings.extend(validate_environment(&ee));
    Ok(Checked::with_warnings(ee, findings))
}
