//! Assembles a [`LongitudinalMatrix`] from a sequence of environments and
//! the runs of each system in each environment.
//!
//! The first environment is the reference. Every row compares one system in
//! one environment against that system in the reference environment, over
//! the topics common to all environments.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::change_measures::{
    delta_ri, mean_rbo, relative_improvement, result_delta, rmse, RboConfig,
};
use crate::effectiveness::{arp, evaluate_run, ArpResult};
use crate::error::{Error, Result};
use crate::model::{
    Checked, EvaluationEnvironment, Finding, MeasureSpec, PerTopicScores, Qrels, RunFile, TopicId,
};
use crate::report::{ChangeReport, LongitudinalMatrix, Scenario};
use crate::significance::test_significance;
use crate::simulate::common_topics;

/// What the significance flags compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignificanceMode {
    /// Each system against the pivot within the same environment.
    #[default]
    Pivot,
    /// Each system against itself in the reference environment; needs a
    /// shared recall base, so only valid in the dtq scenario.
    Temporal,
}

#[derive(Debug, Clone)]
pub struct ChangeConfig {
    pub collection_label: String,
    pub scenario: Scenario,
    pub measures: Vec<MeasureSpec>,
    pub rbo: RboConfig,
    pub alpha: f64,
    /// Bonferroni family size; derived from the comparison count when unset.
    pub family_size: Option<usize>,
    pub significance: SignificanceMode,
    /// Qrels shared by all environments in the dtq scenario; defaults to the
    /// reference environment's qrels.
    pub reference_qrels: Option<Qrels>,
}

impl ChangeConfig {
    pub fn new(collection_label: impl Into<String>, scenario: Scenario) -> Self {
        Self {
            collection_label: collection_label.into(),
            scenario,
            measures: MeasureSpec::defaults(),
            rbo: RboConfig::default(),
            alpha: 0.05,
            family_size: None,
            significance: SignificanceMode::Pivot,
            reference_qrels: None,
        }
    }
}

/// One system's runs keyed by environment label, relabelled with the
/// system's tag so runs from differently tagged files line up.
#[derive(Debug, Clone)]
pub struct SystemRuns {
    system_tag: String,
    runs: BTreeMap<String, RunFile>,
}

impl SystemRuns {
    pub fn new(system_tag: impl Into<String>) -> Self {
        Self {
            system_tag: system_tag.into(),
            runs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, ee_label: impl Into<String>, run: RunFile) -> Result<()> {
        let ee_label = ee_label.into();
        let run = run.with_labels(self.system_tag.clone(), ee_label.clone())?;
        if self.runs.insert(ee_label.clone(), run).is_some() {
            return Err(Error::Mismatch(format!(
                "two runs for system {} at {ee_label}",
                self.system_tag
            )));
        }
        Ok(())
    }

    pub fn with_run(mut self, ee_label: impl Into<String>, run: RunFile) -> Result<Self> {
        self.insert(ee_label, run)?;
        Ok(self)
    }

    pub fn system_tag(&self) -> &str {
        &self.system_tag
    }

    pub fn run(&self, ee_label: &str) -> Option<&RunFile> {
        self.runs.get(ee_label)
    }
}

/// Default Bonferroni family: every (system, environment) comparison made.
pub fn default_family_size(
    mode: SignificanceMode,
    experimental_systems: usize,
    pivot_present: bool,
    environments: usize,
) -> usize {
    let m = match mode {
        SignificanceMode::Pivot => experimental_systems * environments,
        SignificanceMode::Temporal => {
            (experimental_systems + usize::from(pivot_present)) * environments.saturating_sub(1)
        }
    };
    m.max(1)
}

struct Evaluated {
    scores: BTreeMap<MeasureSpec, PerTopicScores>,
    arps: BTreeMap<MeasureSpec, ArpResult>,
}

fn evaluate(
    run: &RunFile,
    qrels: &Qrels,
    measures: &[MeasureSpec],
    topics: &BTreeSet<TopicId>,
) -> Result<Evaluated> {
    let mut scores = BTreeMap::new();
    let mut arps = BTreeMap::new();
    for &m in measures {
        let s = evaluate_run(run, qrels, m, Some(topics));
        let a = arp(&s).map_err(|_| {
            Error::Undefined(format!(
                "{} at {}: no common topic has relevant judgments",
                run.system_tag(),
                run.ee_label()
            ))
        })?;
        scores.insert(m, s);
        arps.insert(m, a);
    }
    Ok(Evaluated { scores, arps })
}

fn qrels_for<'a>(cfg: &'a ChangeConfig, envs: &'a [EvaluationEnvironment], i: usize) -> &'a Qrels {
    match cfg.scenario {
        Scenario::DprimeTQ => cfg.reference_qrels.as_ref().unwrap_or(&envs[0].qrels),
        Scenario::DprimeTQprime => &envs[i].qrels,
    }
}

fn evaluate_all<'a>(
    envs: &[EvaluationEnvironment],
    s: &'a SystemRuns,
    required: bool,
    cfg: &ChangeConfig,
    topics: &BTreeSet<TopicId>,
    warnings: &mut Vec<Finding>,
) -> Result<Vec<Slot<'a>>> {
    let mut out = Vec::with_capacity(envs.len());
    for (i, ee) in envs.iter().enumerate() {
        match s.run(&ee.label) {
            Some(run) => out.push(Some((
                run,
                evaluate(run, qrels_for(cfg, envs, i), &cfg.measures, topics)?,
            ))),
            None if required => {
                return Err(Error::Mismatch(format!(
                    "missing run for system {} at {}",
                    s.system_tag(),
                    ee.label
                )))
            }
            None => {
                warnings.push(Finding::warning(
                    format!("{}/{}", s.system_tag(), ee.label),
                    "no pivot run; ΔRI cells left empty",
                ));
                out.push(None);
            }
        }
    }
    Ok(out)
}

/// Builds the change matrix.
///
/// Every system must have a run in every environment. The pivot's runs may
/// be incomplete; environments without a pivot run get empty ΔRI cells and
/// no pivot row, with a warning.
pub fn change_matrix(
    envs: &[EvaluationEnvironment],
    systems: &[SystemRuns],
    pivot: Option<&SystemRuns>,
    cfg: &ChangeConfig,
) -> Result<Checked<LongitudinalMatrix>> {
    if envs.is_empty() {
        return Err(Error::Undefined("no environments".into()));
    }
    if cfg.measures.is_empty() {
        return Err(Error::Undefined("no measures requested".into()));
    }
    if cfg.scenario == Scenario::DprimeTQprime {
        if cfg.reference_qrels.is_some() {
            return Err(Error::Mismatch(
                "reference qrels only apply to the dtq scenario".into(),
            ));
        }
        if cfg.significance == SignificanceMode::Temporal {
            return Err(Error::Mismatch(
                "temporal significance needs a shared recall base (dtq scenario)".into(),
            ));
        }
    }
    let mut tags = BTreeSet::new();
    for s in systems.iter().chain(pivot) {
        if !tags.insert(s.system_tag()) {
            return Err(Error::Mismatch(format!(
                "system {} given twice",
                s.system_tag()
            )));
        }
    }

    let Checked {
        value: topics,
        mut warnings,
    } = common_topics(envs)?;
    if topics.is_empty() {
        return Err(Error::Undefined("environments share no topics".into()));
    }
    let pivot_evals = match pivot {
        Some(p) => evaluate_all(envs, p, false, cfg, &topics, &mut warnings)?,
        None => Vec::new(),
    };
    let family = cfg.family_size.unwrap_or_else(|| {
        default_family_size(cfg.significance, systems.len(), pivot.is_some(), envs.len())
    });
    let ctx = RowContext {
        cfg,
        topics: &topics,
        pivot: &pivot_evals,
        family,
    };

    let mut rows = Vec::new();
    for system in systems {
        let evals = evaluate_all(envs, system, true, cfg, &topics, &mut warnings)?;
        ctx.rows(
            system.system_tag(),
            envs,
            &evals,
            false,
            &mut rows,
            &mut warnings,
        )?;
    }
    if let Some(p) = pivot {
        ctx.rows(
            p.system_tag(),
            envs,
            &pivot_evals,
            true,
            &mut rows,
            &mut warnings,
        )?;
    }
    let matrix = LongitudinalMatrix::new(
        cfg.collection_label.clone(),
        pivot.map(|p| p.system_tag().to_string()),
        rows,
    )?;
    Ok(Checked::with_warnings(matrix, warnings))
}

type Slot<'a> = Option<(&'a RunFile, Evaluated)>;

struct RowContext<'a> {
    cfg: &'a ChangeConfig,
    topics: &'a BTreeSet<TopicId>,
    pivot: &'a [Slot<'a>],
    family: usize,
}

impl RowContext<'_> {
    fn rows(
        &self,
        system_tag: &str,
        envs: &[EvaluationEnvironment],
        evals: &[Slot<'_>],
        is_pivot: bool,
        rows: &mut Vec<ChangeReport>,
        warnings: &mut Vec<Finding>,
    ) -> Result<()> {
        let cfg = self.cfg;
        let Some((base_run, base)) = &evals[0] else {
            warnings.push(Finding::warning(
                system_tag.to_string(),
                format!("no run at {}; pivot rows omitted", envs[0].label),
            ));
            return Ok(());
        };
        let pivot_base = self.pivot.first().and_then(Option::as_ref);
        for (i, ee) in envs.iter().enumerate() {
            let Some((run, ev)) = &evals[i] else { continue };
            let at = format!("{system_tag}/{}", ee.label);
            let pivot_here = self.pivot.get(i).and_then(Option::as_ref);
            let mut row = ChangeReport::new(system_tag, ee.label.clone(), cfg.scenario);
            if cfg.scenario == Scenario::DprimeTQ {
                let rbo = mean_rbo(base_run, run, &cfg.rbo, self.topics)?;
                warnings.extend(rbo.warnings);
                row.rbo_mean = Some(rbo.value.mean);
            }
            for m in &cfg.measures {
                let (a0, ai) = (&base.arps[m], &ev.arps[m]);
                row.arp.insert(*m, ai.mean);
                match result_delta(a0, ai) {
                    Ok(v) => {
                        row.re_delta.insert(*m, v);
                    }
                    Err(e) => warnings.push(Finding::warning(format!("{at} {m}"), e.to_string())),
                }
                if cfg.scenario == Scenario::DprimeTQ {
                    row.rmse.insert(*m, rmse(&base.scores[m], &ev.scores[m])?);
                }

                let dri = match (is_pivot, pivot_base, pivot_here) {
                    (false, Some((_, p0)), Some((_, pi))) => {
                        let ri = relative_improvement(a0, &p0.arps[m]).and_then(|r0| {
                            Ok(delta_ri(r0, relative_improvement(ai, &pi.arps[m])?))
                        });
                        match ri {
                            Ok(v) => Some(v),
                            Err(e) => {
                                warnings.push(Finding::warning(format!("{at} {m}"), e.to_string()));
                                None
                            }
                        }
                    }
                    _ => None,
                };
                row.delta_ri.insert(*m, dri);

                let pair = match cfg.significance {
                    SignificanceMode::Pivot if !is_pivot => {
                        pivot_here.map(|(_, p)| (&ev.scores[m], &p.scores[m]))
                    }
                    SignificanceMode::Pivot => None,
                    SignificanceMode::Temporal if i == 0 => None,
                    SignificanceMode::Temporal => Some((&ev.scores[m], &base.scores[m])),
                };
                let sig =
                    pair.and_then(
                        |(a, b)| match test_significance(a, b, cfg.alpha, self.family) {
                            Ok(r) => Some(r.significant),
                            Err(e) => {
                                warnings.push(Finding::warning(format!("{at} {m}"), e.to_string()));
                                None
                            }
                        },
                    );
                row.significant.insert(*m, sig);
            }
            rows.push(row);
        }
        Ok(())
    }
}
