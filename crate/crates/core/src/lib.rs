//! Longitudinal evaluation of retrieval systems across evolving test
//! collections.
//!
//! An [`EvaluationEnvironment`] bundles a corpus snapshot, topics and qrels.
//! Given a sequence of environments and the runs of each system in each of
//! them, this crate diffs the environments, scores the runs, and measures how
//! results and effectiveness drift over time.

pub mod change_measures;
pub mod crud_diff;
pub mod effectiveness;
pub mod error;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod significance;
pub mod simulate;

pub use change_measures::{
    delta_ri, mean_rbo, rbo_topic, relative_improvement, result_delta, rmse, ChangeScores,
    RboConfig,
};
pub use crud_diff::{
    diff_documents, diff_qrels, diff_topics, summarize, ChangeSummary, ComponentDiff, QrelKey,
};
pub use effectiveness::{arp, bpref, evaluate_run, ndcg, precision_at_k, score_ranking, ArpResult};
pub use error::{Error, Result};
pub use model::{
    validate_environment, Checked, CorpusSnapshot, DocId, DocMeta, EvaluationEnvironment, Finding,
    MeasureKind, MeasureSpec, PerTopicScores, Qrels, RankedDoc, Ranking, RunFile, Severity,
    TopicDef, TopicId,
};
pub use pipeline::{
    change_matrix, default_family_size, ChangeConfig, SignificanceMode, SystemRuns,
};
pub use report::{
    format_real, render, render_change_summary, render_evaluation, ChangeReport, EvaluationRow,
    Format, LongitudinalMatrix, RenderOptions, Scenario, SummaryTable,
};
pub use significance::{bonferroni, paired_t_test, test_significance, PairedTTest, TestResult};
pub use simulate::{common_topics, split_append_only, SimulationPlan, SliceStrategy};
