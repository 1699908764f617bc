#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempir_core::ingest::{load_config, read_manifest, write_manifest, write_qrels, write_run};
use tempir_core::{CorpusSnapshot, DocId, DocMeta, Qrels, Ranking, RunFile, TopicId};

pub fn tempir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempir"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn doc(i: usize) -> DocId {
    DocId::new(format!("doc{i:05}")).unwrap()
}

pub fn topic(i: usize) -> TopicId {
    TopicId::new(format!("{}", 100 + i)).unwrap()
}

/// A dated synthetic corpus with graded qrels, written as `corpus.jsonl`
/// and `qrels.txt` under `dir`.
pub struct Synthetic {
    pub docs: usize,
    pub topics: usize,
    pub manifest: PathBuf,
    pub qrels: PathBuf,
}

pub fn synthetic(
    dir: &Path,
    docs: usize,
    topics: usize,
    judged_per_topic: usize,
    seed: u64,
) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let corpus = CorpusSnapshot::from_docs((0..docs).map(|i| {
        DocMeta::new(doc(i), rng.gen_range(50..2000))
            .with_timestamp(start + Duration::days(rng.gen_range(0..365)))
    }))
    .unwrap();
    let mut qrels = Qrels::new();
    for t in 0..topics {
        let mut picked = 0;
        while picked < judged_per_topic {
            let d = doc(rng.gen_range(0..docs));
            if qrels.grade(&topic(t), &d).is_none() {
                qrels.insert(topic(t), d, rng.gen_range(0..=2));
                picked += 1;
            }
        }
        // every topic keeps at least one relevant document
        let d = doc(rng.gen_range(0..docs));
        qrels.insert(topic(t), d, 2);
    }
    let manifest = dir.join("corpus.jsonl");
    let qrels_path = dir.join("qrels.txt");
    fs::write(&manifest, write_manifest(&corpus)).unwrap();
    fs::write(&qrels_path, write_qrels(&qrels)).unwrap();
    Synthetic {
        docs,
        topics,
        manifest,
        qrels: qrels_path,
    }
}

/// Fixed pseudo-random score per (topic, doc) for one system; relevant
/// documents get `boost` per grade from `qrels`.
pub struct ScoreTable {
    scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(topics: usize, docs: usize, seed: u64, qrels: &Qrels, boost: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = (0..topics)
            .map(|t| {
                (0..docs)
                    .map(|d| {
                        let g = qrels.grade(&topic(t), &doc(d)).unwrap_or(0);
                        let base: f64 = rng.gen();
                        base + boost * f64::from(g)
                    })
                    .collect()
            })
            .collect();
        Self { scores }
    }

    /// Top-`depth` ranking over the documents present in `corpus`.
    pub fn run(&self, corpus: &CorpusSnapshot, depth: usize, tag: &str, ee: &str) -> RunFile {
        let rankings = self.scores.iter().enumerate().map(|(t, row)| {
            let mut scored: Vec<(DocId, f64)> = row
                .iter()
                .enumerate()
                .map(|(d, s)| (doc(d), *s))
                .filter(|(d, _)| corpus.contains(d))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            scored.truncate(depth);
            Ranking::from_scored(topic(t), scored).unwrap()
        });
        RunFile::from_rankings(tag, ee, rankings).unwrap()
    }
}

/// Runs `simulate` into `dir/sim` and writes one run per (system, slice).
/// Returns the config path and `SYSTEM@EE=PATH` specs.
pub fn simulated_runs(
    dir: &Path,
    syn: &Synthetic,
    slices: usize,
    systems: &[(&str, u64, f64)],
) -> (PathBuf, Vec<String>) {
    let sim = dir.join("sim");
    let out = tempir(&[
        "simulate",
        "--manifest",
        path_str(&syn.manifest),
        "--qrels",
        path_str(&syn.qrels),
        "--slices",
        &slices.to_string(),
        "--out-dir",
        path_str(&sim),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let config = sim.join("config.json");
    let full_qrels = tempir_core::ingest::read_qrels(&syn.qrels).unwrap().value;
    let mut specs = Vec::new();
    for &(name, seed, boost) in systems {
        let table = ScoreTable::new(syn.topics, syn.docs, seed, &full_qrels, boost);
        for ee in load_config(&config).unwrap() {
            let corpus = read_manifest(&ee.manifest_path).unwrap();
            let run = table.run(&corpus, 100, name, &ee.label);
            let path = sim.join(format!("{name}.{}.run", ee.label));
            fs::write(&path, write_run(&run)).unwrap();
            specs.push(format!("{name}@{}={}", ee.label, path.display()));
        }
    }
    (config, specs)
}
