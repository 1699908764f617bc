//! Deterministic rendering of change matrices and collection diffs.
//!
//! CSV and Markdown print reals with a fixed number of decimals (4 by
//! default); JSON keeps full precision so it can be read back exactly.
//! Output is UTF-8 with LF line endings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crud_diff::{ChangeSummary, ComponentDiff};
use crate::effectiveness::ArpResult;
use crate::error::{Error, Result};
use crate::model::{MeasureSpec, PerTopicScores, TopicId};

/// Which components are allowed to differ from the reference environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Only documents evolve; every environment is judged with the
    /// reference qrels.
    #[serde(rename = "dtq")]
    DprimeTQ,
    /// Documents and qrels evolve; each environment uses its own qrels.
    #[serde(rename = "dtq-prime")]
    DprimeTQprime,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::DprimeTQ => "dtq",
            Scenario::DprimeTQprime => "dtq-prime",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtq" => Ok(Scenario::DprimeTQ),
            "dtq-prime" => Ok(Scenario::DprimeTQprime),
            _ => Err(Error::invariant(
                "scenario",
                format!("unknown scenario {s:?}"),
            )),
        }
    }
}

/// One system in one environment, compared against the reference
/// environment (and the pivot system for ΔRI).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub system_tag: String,
    pub ee_label: String,
    pub scenario: Scenario,
    pub rbo_mean: Option<f64>,
    pub rmse: BTreeMap<MeasureSpec, f64>,
    pub arp: BTreeMap<MeasureSpec, f64>,
    pub re_delta: BTreeMap<MeasureSpec, f64>,
    pub delta_ri: BTreeMap<MeasureSpec, Option<f64>>,
    pub significant: BTreeMap<MeasureSpec, Option<bool>>,
}

impl ChangeReport {
    pub fn new(
        system_tag: impl Into<String>,
        ee_label: impl Into<String>,
        scenario: Scenario,
    ) -> Self {
        Self {
            system_tag: system_tag.into(),
            ee_label: ee_label.into(),
            scenario,
            rbo_mean: None,
            rmse: BTreeMap::new(),
            arp: BTreeMap::new(),
            re_delta: BTreeMap::new(),
            delta_ri: BTreeMap::new(),
            significant: BTreeMap::new(),
        }
    }

    fn measures(&self) -> impl Iterator<Item = &MeasureSpec> + '_ {
        self.rmse
            .keys()
            .chain(self.arp.keys())
            .chain(self.re_delta.keys())
            .chain(self.delta_ri.keys())
            .chain(self.significant.keys())
    }
}

/// Rows for every (system, environment) of one collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalMatrix {
    pub collection_label: String,
    pub pivot: Option<String>,
    pub rows: Vec<ChangeReport>,
}

impl LongitudinalMatrix {
    /// Validates the rows and orders them by system tag, keeping the given
    /// environment order within each system.
    pub fn new(
        collection_label: impl Into<String>,
        pivot: Option<String>,
        mut rows: Vec<ChangeReport>,
    ) -> Result<Self> {
        for row in &rows {
            if pivot.as_deref() == Some(row.system_tag.as_str())
                && row.delta_ri.values().any(Option::is_some)
            {
                return Err(Error::invariant(
                    "change report",
                    format!("pivot {} cannot carry ΔRI values", row.system_tag),
                ));
            }
            if row.scenario == Scenario::DprimeTQprime
                && (row.rbo_mean.is_some() || !row.rmse.is_empty())
            {
                return Err(Error::invariant(
                    "change report",
                    format!(
                        "{} {}: RBO and RMSE are only reported for the dtq scenario",
                        row.system_tag, row.ee_label
                    ),
                ));
            }
        }
        rows.sort_by(|a, b| a.system_tag.cmp(&b.system_tag));
        Ok(Self {
            collection_label: collection_label.into(),
            pivot,
            rows,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(json)?;
        let Self {
            collection_label,
            pivot,
            rows,
        } = raw;
        Self::new(collection_label, pivot, rows)
    }

    /// Every measure that appears in any row, in canonical order.
    pub fn measures(&self) -> BTreeSet<MeasureSpec> {
        self.rows
            .iter()
            .flat_map(|r| r.measures().copied())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Markdown,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            _ => Err(Error::invariant("format", format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub decimals: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { decimals: 4 }
    }
}

/// Fixed-decimal formatting of the exact binary value (ties to even), with
/// negative zero printed as zero.
pub fn format_real(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner()
            .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
    }

    fn to_markdown(&self) -> Vec<u8> {
        let cell = |s: &str| s.replace('|', "\\|");
        let line = |cells: &[String]| {
            let mut l = String::from("|");
            for c in cells {
                l.push(' ');
                l.push_str(&cell(c));
                l.push_str(" |");
            }
            l.push('\n');
            l
        };
        let mut out = line(&self.header);
        out.push('|');
        for _ in &self.header {
            out.push_str(" --- |");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out.into_bytes()
    }

    fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Markdown => Ok(self.to_markdown()),
            Format::Json => unreachable!("JSON is rendered from the typed value"),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn matrix_table(matrix: &LongitudinalMatrix, opts: RenderOptions) -> Table {
    let measures = matrix.measures();
    let real = |x: Option<f64>| x.map(|v| format_real(v, opts.decimals)).unwrap_or_default();

    let mut header: Vec<String> = ["collection", "system", "ee", "scenario", "rbo"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in &measures {
        header.push(format!("rmse[{m}]"));
    }
    for m in &measures {
        for col in ["arp", "re_delta", "delta_ri", "significant"] {
            header.push(format!("{col}[{m}]"));
        }
    }

    let rows = matrix
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                matrix.collection_label.clone(),
                r.system_tag.clone(),
                r.ee_label.clone(),
                r.scenario.to_string(),
                real(r.rbo_mean),
            ];
            for m in &measures {
                row.push(real(r.rmse.get(m).copied()));
            }
            for m in &measures {
                row.push(real(r.arp.get(m).copied()));
                row.push(real(r.re_delta.get(m).copied()));
                row.push(real(r.delta_ri.get(m).copied().flatten()));
                row.push(match r.significant.get(m).copied().flatten() {
                    Some(true) => "true".into(),
                    Some(false) => "false".into(),
                    None => String::new(),
                });
            }
            row
        })
        .collect();
    Table { header, rows }
}

/// Renders a change matrix. Missing values (e.g. ΔRI of the pivot system)
/// are empty cells in CSV and Markdown and `null` in JSON.
pub fn render(matrix: &LongitudinalMatrix, format: Format, opts: RenderOptions) -> Result<Vec<u8>> {
    match format {
        Format::Json => to_json(matrix),
        _ => matrix_table(matrix, opts).render(format),
    }
}

/// Counts-only view of one component diff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub component: String,
    pub total_from: usize,
    pub total_to: usize,
    pub relative_delta: Option<f64>,
    pub created: usize,
    pub updated: usize,
    pub deleted: usize,
}

impl ComponentRow {
    fn from_diff<K: Ord>(component: &str, diff: &ComponentDiff<K>) -> Self {
        Self {
            component: component.to_string(),
            total_from: diff.total_from,
            total_to: diff.total_to,
            relative_delta: diff.relative_delta,
            created: diff.created.len(),
            updated: diff.updated.len(),
            deleted: diff.deleted.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub from_label: String,
    pub to_label: String,
    pub components: Vec<ComponentRow>,
}

impl From<&ChangeSummary> for SummaryTable {
    fn from(s: &ChangeSummary) -> Self {
        Self {
            from_label: s.from_label.clone(),
            to_label: s.to_label.clone(),
            components: vec![
                ComponentRow::from_diff("documents", &s.documents),
                ComponentRow::from_diff("topics", &s.topics),
                ComponentRow::from_diff("qrels", &s.qrels),
            ],
        }
    }
}

/// Renders one row per component: totals, signed percent change relative
/// to the first environment, and CREATE/UPDATE/DELETE counts.
pub fn render_change_summary(
    summary: &ChangeSummary,
    format: Format,
    opts: RenderOptions,
) -> Result<Vec<u8>> {
    let table = SummaryTable::from(summary);
    if format == Format::Json {
        return to_json(&table);
    }
    let header = [
        "from",
        "to",
        "component",
        "total_from",
        "total_to",
        "delta_percent",
        "create",
        "update",
        "delete",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows = table
        .components
        .iter()
        .map(|c| {
            vec![
                table.from_label.clone(),
                table.to_label.clone(),
                c.component.clone(),
                c.total_from.to_string(),
                c.total_to.to_string(),
                c.relative_delta
                    .map(|d| format_real(d * 100.0, opts.decimals))
                    .unwrap_or_default(),
                c.created.to_string(),
                c.updated.to_string(),
                c.deleted.to_string(),
            ]
        })
        .collect();
    Table { header, rows }.render(format)
}

/// One line of an effectiveness table: a per-topic score, or the ARP over
/// `topic_count` topics when `topic` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub system_tag: String,
    pub ee_label: String,
    pub measure: MeasureSpec,
    pub topic: Option<TopicId>,
    pub topic_count: usize,
    pub value: f64,
}

impl EvaluationRow {
    pub fn from_arp(arp: &ArpResult) -> Self {
        Self {
            system_tag: arp.system_tag.clone(),
            ee_label: arp.ee_label.clone(),
            measure: arp.measure,
            topic: None,
            topic_count: arp.evaluated_topic_count,
            value: arp.mean,
        }
    }

    /// One row per topic, in topic order.
    pub fn per_topic(scores: &PerTopicScores) -> Vec<Self> {
        scores
            .scores()
            .iter()
            .map(|(t, v)| Self {
                system_tag: scores.system_tag().to_string(),
                ee_label: scores.ee_label().to_string(),
                measure: scores.measure(),
                topic: Some(t.clone()),
                topic_count: 1,
                value: *v,
            })
            .collect()
    }
}

/// Renders effectiveness rows in the given order. Aggregate rows leave the
/// topic cell empty.
pub fn render_evaluation(
    rows: &[EvaluationRow],
    format: Format,
    opts: RenderOptions,
) -> Result<Vec<u8>> {
    if format == Format::Json {
        return to_json(&rows);
    }
    let header = ["system", "ee", "measure", "topic", "topics", "value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.system_tag.clone(),
                r.ee_label.clone(),
                r.measure.to_string(),
                r.topic
                    .as_ref()
                    .map(ToString::to_string)
                    .unwrap_or_default(),
                r.topic_count.to_string(),
                format_real(r.value, opts.decimals),
            ]
        })
        .collect();
    Table { header, rows }.render(format)
}


#[cfg(test)]
mod evaluation_tests {
    use super::*;
    use crate::effectiveness::arp;

    #[test]
    fn aggregate_and_per_topic_rows() {
        let scores = PerTopicScores::new(
            MeasureSpec::bpref(),
            "bm25",
            "t0",
            [("1", 0.5), ("2", 0.25)]
                .into_iter()
                .map(|(t, v)| (TopicId::new(t).unwrap(), v))
                .collect(),
        )
        .unwrap();
        let mut rows = vec![EvaluationRow::from_arp(&arp(&scores).unwrap())];
        rows.extend(EvaluationRow::per_topic(&scores));
        let csv = String::from_utf8(
            render_evaluation(&rows, Format::Csv, RenderOptions::default()).unwrap(),
        )
        .unwrap();
        assert_eq!(
            csv,
            "system,ee,measure,topic,topics,value\n\
             bm25,t0,bpref,,2,0.3750\n\
             bm25,t0,bpref,1,1,0.5000\n\
             bm25,t0,bpref,2,1,0.2500\n"
        );
        let json = render_evaluation(&rows, Format::Json, RenderOptions::default()).unwrap();
        let back: Vec<EvaluationRow> = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, rows);
    }
}
