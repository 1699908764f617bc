//! Command implementations behind the `tempir` binary.
//!
//! Every command writes its result to a caller-supplied writer and its
//! warnings to another, so the binary and the tests share one code path.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tempir_core::ingest::{
    load_config, load_environment, read_manifest, read_qrels, read_run, read_topics, write_config,
    write_manifest, write_qrels, write_topics, EEConfig,
};
use tempir_core::{
    arp, change_matrix, common_topics, evaluate_run, render, render_change_summary,
    render_evaluation, split_append_only, summarize, ChangeConfig, Checked, EvaluationEnvironment,
    EvaluationRow, Finding, Format, LongitudinalMatrix, MeasureSpec, RboConfig, RenderOptions,
    Scenario, SignificanceMode, SimulationPlan, SystemRuns, TopicDef, TopicId,
};

/// Failure of a command, carrying its exit code class.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or invalid input data; exit code 2.
    Usage(String),
    /// Anything else, such as a failed write; exit code 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn invalid(e: tempir_core::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn internal(e: tempir_core::Error) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "tempir",
    version,
    about = "Longitudinal evaluation of retrieval systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// CREATE/UPDATE/DELETE counts between two environments.
    Diff(DiffArgs),
    /// Per-run effectiveness in one environment.
    Evaluate(EvaluateArgs),
    /// Change measures of systems across all configured environments.
    Change(ChangeArgs),
    /// Splits a dated corpus into cumulative environments.
    Simulate(SimulateArgs),
    /// Re-renders a change matrix saved as JSON.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Markdown,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Markdown => Format::Markdown,
            OutputFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Dtq,
    DtqPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignificanceArg {
    Pivot,
    Temporal,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    /// Decimal places for reals in CSV and Markdown.
    #[arg(long, default_value_t = 4)]
    pub decimals: usize,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Run file; repeat for several runs.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub ee: String,
    /// P@k, bpref, nDCG or nDCG@k; repeatable. Defaults to P@10, bpref, nDCG.
    #[arg(long = "measure")]
    pub measures: Vec<MeasureSpec>,
    #[arg(long)]
    pub per_topic: bool,
    /// `common` for the topics shared by all environments, or a comma list.
    #[arg(long)]
    pub topics: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ChangeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// SYSTEM@EE=PATH; repeatable.
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    /// EE=PATH for the pivot system; repeatable.
    #[arg(long = "pivot-run")]
    pub pivot_runs: Vec<String>,
    /// Tag of the pivot system; defaults to the tag in its first run file.
    #[arg(long)]
    pub pivot_name: Option<String>,
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long = "measure")]
    pub measures: Vec<MeasureSpec>,
    #[arg(long, default_value_t = 0.9)]
    pub phi: f64,
    #[arg(long, default_value_t = 100)]
    pub rbo_depth: usize,
    #[arg(long)]
    pub no_rbo_normalize: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Bonferroni family size; defaults to the number of tests made.
    #[arg(long)]
    pub family_size: Option<usize>,
    #[arg(long, value_enum, default_value = "pivot")]
    pub significance_mode: SignificanceArg,
    /// Qrels judging every environment (dtq only); defaults to the first
    /// environment's qrels.
    #[arg(long)]
    pub reference_qrels: Option<PathBuf>,
    /// LABEL=PATH replacing an environment's qrels (dtq-prime only); repeatable.
    #[arg(long = "ee-qrels")]
    pub ee_qrels: Vec<String>,
    #[arg(long, default_value = "collection")]
    pub collection: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long)]
    pub topics: Option<PathBuf>,
    #[arg(long)]
    pub slices: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Runs one parsed invocation.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Diff(a) => cmd_diff(&a, out, err),
        Command::Evaluate(a) => cmd_evaluate(&a, out, err),
        Command::Change(a) => cmd_change(&a, out, err),
        Command::Simulate(a) => cmd_simulate(&a, out, err),
        Command::Report(a) => cmd_report(&a, out),
    }
}

fn warn(err: &mut dyn Write, findings: &[Finding]) -> CliResult {
    for f in findings {
        writeln!(err, "warning: {f}")?;
    }
    Ok(())
}

fn emit(output: &OutputArgs, bytes: &[u8], out: &mut dyn Write) -> CliResult {
    match &output.out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| CliError::Internal(format!("{}: {e}", path.display()))),
        None => Ok(out.write_all(bytes)?),
    }
}

fn opts(output: &OutputArgs) -> RenderOptions {
    RenderOptions {
        decimals: output.decimals,
    }
}

fn load_all(config: &Path, err: &mut dyn Write) -> CliResult<Vec<EvaluationEnvironment>> {
    let configs = load_config(config).map_err(invalid)?;
    if configs.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no environments",
            config.display()
        )));
    }
    configs.iter().map(|c| load_one(c, err)).collect()
}

fn load_one(config: &EEConfig, err: &mut dyn Write) -> CliResult<EvaluationEnvironment> {
    let Checked { value, warnings } = load_environment(config).map_err(invalid)?;
    warn(err, &warnings)?;
    Ok(value)
}

fn unknown_label(label: &str, envs: &[EvaluationEnvironment]) -> CliError {
    let known: Vec<&str> = envs.iter().map(|e| e.label.as_str()).collect();
    CliError::Usage(format!(
        "unknown environment {label:?}; known: {}",
        known.join(", ")
    ))
}

fn find<'a>(
    envs: &'a [EvaluationEnvironment],
    label: &str,
) -> CliResult<&'a EvaluationEnvironment> {
    envs.iter()
        .find(|e| e.label == label)
        .ok_or_else(|| unknown_label(label, envs))
}

pub fn cmd_diff(a: &DiffArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let envs = load_all(&a.config, err)?;
    let from = find(&envs, &a.from)?;
    let to = find(&envs, &a.to)?;
    let bytes = render_change_summary(
        &summarize(from, to),
        a.output.format.into(),
        opts(&a.output),
    )
    .map_err(internal)?;
    emit(&a.output, &bytes, out)
}

fn measures_or_default(measures: &[MeasureSpec]) -> Vec<MeasureSpec> {
    if measures.is_empty() {
        MeasureSpec::defaults()
    } else {
        let mut seen = BTreeSet::new();
        measures
            .iter()
            .copied()
            .filter(|m| seen.insert(*m))
            .collect()
    }
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let envs = load_all(&a.config, err)?;
    let ee = find(&envs, &a.ee)?;
    let filter: Option<BTreeSet<TopicId>> = match a.topics.as_deref() {
        None => None,
        Some("common") => {
            let Checked { value, warnings } = common_topics(&envs).map_err(invalid)?;
            warn(err, &warnings)?;
            Some(value)
        }
        Some(list) => Some(
            list.split(',')
                .map(|t| TopicId::new(t.trim()).map_err(invalid))
                .collect::<CliResult<_>>()?,
        ),
    };
    let measures = measures_or_default(&a.measures);

    let mut rows = Vec::new();
    for path in &a.runs {
        let Checked {
            value: run,
            warnings,
        } = read_run(path, &ee.label).map_err(invalid)?;
        warn(err, &warnings)?;
        let judged = run
            .rankings()
            .keys()
            .filter(|t| ee.qrels.relevant_count(t) > 0)
            .filter(|t| filter.as_ref().is_none_or(|f| f.contains(*t)))
            .count();
        if judged == 0 {
            return Err(CliError::Usage(format!(
                "{}: no topic of the run has relevant judgments in {}",
                path.display(),
                ee.label
            )));
        }
        for &m in &measures {
            let scores = evaluate_run(&run, &ee.qrels, m, filter.as_ref());
            let mean = arp(&scores).map_err(invalid)?;
            rows.push(EvaluationRow::from_arp(&mean));
            if a.per_topic {
                rows.extend(EvaluationRow::per_topic(&scores));
            }
        }
    }
    let bytes =
        render_evaluation(&rows, a.output.format.into(), opts(&a.output)).map_err(internal)?;
    emit(&a.output, &bytes, out)
}

fn split_assignment<'a>(flag: &str, value: &'a str) -> CliResult<(&'a str, &'a str)> {
    match value.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k, v)),
        _ => Err(CliError::Usage(format!(
            "--{flag} expects KEY=PATH, got {value:?}"
        ))),
    }
}

fn change_config(a: &ChangeArgs) -> CliResult<ChangeConfig> {
    let scenario = match a.scenario {
        ScenarioArg::Dtq => Scenario::DprimeTQ,
        ScenarioArg::DtqPrime => Scenario::DprimeTQprime,
    };
    match scenario {
        Scenario::DprimeTQ if !a.ee_qrels.is_empty() => {
            return Err(CliError::Usage(
                "--ee-qrels conflicts with --scenario dtq, which judges every environment with one qrels file".into(),
            ))
        }
        Scenario::DprimeTQprime if a.reference_qrels.is_some() => {
            return Err(CliError::Usage(
                "--reference-qrels conflicts with --scenario dtq-prime, which uses each environment's own qrels".into(),
            ))
        }
        Scenario::DprimeTQprime if a.significance_mode == SignificanceArg::Temporal => {
            return Err(CliError::Usage(
                "--significance-mode temporal needs --scenario dtq".into(),
            ))
        }
        _ => {}
    }
    let mut cfg = ChangeConfig::new(a.collection.clone(), scenario);
    cfg.measures = measures_or_default(&a.measures);
    cfg.rbo = RboConfig::new(a.phi, a.rbo_depth, !a.no_rbo_normalize).map_err(invalid)?;
    cfg.alpha = a.alpha;
    cfg.family_size = a.family_size;
    cfg.significance = match a.significance_mode {
        SignificanceArg::Pivot => SignificanceMode::Pivot,
        SignificanceArg::Temporal => SignificanceMode::Temporal,
    };
    tempir_core::bonferroni(cfg.alpha, cfg.family_size.unwrap_or(1)).map_err(invalid)?;
    Ok(cfg)
}

pub fn cmd_change(a: &ChangeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let mut cfg = change_config(a)?;
    let mut envs = load_all(&a.config, err)?;

    for spec in &a.ee_qrels {
        let (label, path) = split_assignment("ee-qrels", spec)?;
        let Checked { value, warnings } = read_qrels(Path::new(path)).map_err(invalid)?;
        warn(err, &warnings)?;
        let known = envs.clone();
        let ee = envs
            .iter_mut()
            .find(|e| e.label == label)
            .ok_or_else(|| unknown_label(label, &known))?;
        ee.qrels = value;
    }
    if let Some(path) = &a.reference_qrels {
        let Checked { value, warnings } = read_qrels(path).map_err(invalid)?;
        warn(err, &warnings)?;
        cfg.reference_qrels = Some(value);
    }

    let mut systems: BTreeMap<String, SystemRuns> = BTreeMap::new();
    for spec in &a.runs {
        let (key, path) = split_assignment("run", spec)?;
        let (system, label) = key
            .split_once('@')
            .filter(|(s, l)| !s.is_empty() && !l.is_empty())
            .ok_or_else(|| {
                CliError::Usage(format!("--run expects SYSTEM@EE=PATH, got {spec:?}"))
            })?;
        find(&envs, label)?;
        let Checked { value, warnings } = read_run(Path::new(path), label).map_err(invalid)?;
        warn(err, &warnings)?;
        systems
            .entry(system.to_string())
            .or_insert_with(|| SystemRuns::new(system))
            .insert(label, value)
            .map_err(invalid)?;
    }

    let mut pivot: Option<SystemRuns> = None;
    for spec in &a.pivot_runs {
        let (label, path) = split_assignment("pivot-run", spec)?;
        find(&envs, label)?;
        let Checked { value, warnings } = read_run(Path::new(path), label).map_err(invalid)?;
        warn(err, &warnings)?;
        let p = pivot.get_or_insert_with(|| {
            SystemRuns::new(
                a.pivot_name
                    .clone()
                    .unwrap_or_else(|| value.system_tag().to_string()),
            )
        });
        p.insert(label, value).map_err(invalid)?;
    }

    let systems: Vec<SystemRuns> = systems.into_values().collect();
    let Checked { value, warnings } =
        change_matrix(&envs, &systems, pivot.as_ref(), &cfg).map_err(invalid)?;
    warn(err, &warnings)?;
    let bytes = render(&value, a.output.format.into(), opts(&a.output)).map_err(internal)?;
    emit(&a.output, &bytes, out)
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let corpus = read_manifest(&a.manifest).map_err(invalid)?;
    let Checked {
        value: qrels,
        warnings,
    } = read_qrels(&a.qrels).map_err(invalid)?;
    warn(err, &warnings)?;
    let topics: Vec<TopicDef> = match &a.topics {
        Some(path) => read_topics(path).map_err(invalid)?,
        None => qrels
            .topics()
            .map(|t| TopicDef::new(t.clone(), None))
            .collect(),
    };
    let base = EvaluationEnvironment::new("base", corpus, topics, qrels).map_err(invalid)?;
    let plan = SimulationPlan::equal_doc_count(a.slices).map_err(invalid)?;
    let slices = split_append_only(&base, &plan).map_err(invalid)?;

    fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Internal(format!("{}: {e}", a.out_dir.display())))?;
    let write = |name: &str, body: String| -> CliResult {
        let path = a.out_dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
    };
    let mut configs = Vec::with_capacity(slices.len());
    for ee in &slices {
        let manifest = format!("{}.manifest.jsonl", ee.label);
        let qrels = format!("{}.qrels", ee.label);
        write(&manifest, write_manifest(&ee.corpus))?;
        write(&qrels, write_qrels(&ee.qrels))?;
        let topics_path = if a.topics.is_some() {
            let name = format!("{}.topics.tsv", ee.label);
            write(&name, write_topics(ee.topics.values()))?;
            Some(PathBuf::from(name))
        } else {
            None
        };
        configs.push(EEConfig {
            label: ee.label.clone(),
            manifest_path: manifest.into(),
            topics_path,
            qrels_path: qrels.into(),
        });
    }
    let config = write_config(&configs);
    write("config.json", config.clone())?;
    out.write_all(config.as_bytes())?;
    Ok(())
}

pub fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> CliResult {
    let text = fs::read_to_string(&a.input)
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.input.display())))?;
    let matrix = LongitudinalMatrix::from_json(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.input.display())))?;
    let bytes = render(&matrix, a.output.format.into(), opts(&a.output)).map_err(internal)?;
    emit(&a.output, &bytes, out)
}
