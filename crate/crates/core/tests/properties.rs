use std::collections::{BTreeMap, BTreeSet, HashSet};

use proptest::collection::{btree_map, vec};
use proptest::prelude::*;
use tempir_core::crud_diff::{diff_documents, diff_qrels};
use tempir_core::ingest::{parse_run, write_run};
use tempir_core::{
    bpref, delta_ri, ndcg, paired_t_test, precision_at_k, rbo_topic, relative_improvement,
    result_delta, rmse, split_append_only, ArpResult, CorpusSnapshot, DocId, DocMeta,
    EvaluationEnvironment, MeasureSpec, PerTopicScores, Qrels, Ranking, RboConfig, RunFile,
    SimulationPlan, TopicDef, TopicId,
};

fn tid() -> TopicId {
    TopicId::new("q").unwrap()
}

fn doc(i: usize) -> DocId {
    DocId::new(format!("d{i:03}")).unwrap()
}

fn ranking(ids: &[usize]) -> Ranking {
    let n = ids.len() as f64;
    Ranking::from_scored(
        tid(),
        ids.iter()
            .enumerate()
            .map(|(i, &d)| (doc(d), n - i as f64))
            .collect(),
    )
    .unwrap()
}

/// Ranked list of distinct doc numbers drawn from `0..pool`.
fn ranked_ids(pool: usize, max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..pool).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_flat_map(move |v| (0..=max_len.min(v.len())).prop_map(move |n| v[..n].to_vec()))
}

fn qrels_of(grades: &BTreeMap<usize, u32>) -> Qrels {
    let mut q = Qrels::new();
    for (&d, &g) in grades {
        q.insert(tid(), doc(d), g);
    }
    q
}

fn scores(vals: &[f64], measure: MeasureSpec) -> PerTopicScores {
    PerTopicScores::new(
        measure,
        "s",
        "e",
        vals.iter()
            .enumerate()
            .map(|(i, v)| (TopicId::new(format!("t{i:03}")).unwrap(), *v))
            .collect(),
    )
    .unwrap()
}

// Oracles written from the definitions, without sharing code with the crate.

fn rbo_oracle(a: &[usize], b: &[usize], phi: f64, depth: usize) -> f64 {
    let d = depth.min(a.len().max(b.len()));
    if d == 0 {
        return 1.0;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..=d {
        let pa: HashSet<_> = a.iter().take(i).collect();
        let pb: HashSet<_> = b.iter().take(i).collect();
        let w = (1.0 - phi) * phi.powi(i as i32 - 1);
        num += w * pa.intersection(&pb).count() as f64 / i as f64;
        den += w;
    }
    num / den
}

fn precision_oracle(ids: &[usize], grades: &BTreeMap<usize, u32>, k: usize) -> f64 {
    let mut hits = 0;
    for i in 0..k {
        if let Some(d) = ids.get(i) {
            if grades.get(d).copied().unwrap_or(0) > 0 {
                hits += 1;
            }
        }
    }
    hits as f64 / k as f64
}

fn ndcg_oracle(ids: &[usize], grades: &BTreeMap<usize, u32>, k: Option<usize>) -> f64 {
    let cut = k.unwrap_or(usize::MAX);
    let dcg: f64 = ids
        .iter()
        .take(cut)
        .enumerate()
        .map(|(i, d)| grades.get(d).copied().unwrap_or(0) as f64 / (i as f64 + 2.0).log2())
        .sum();
    let mut ideal: Vec<u32> = grades.values().copied().collect();
    ideal.sort_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(cut)
        .enumerate()
        .map(|(i, &g)| g as f64 / (i as f64 + 2.0).log2())
        .sum();
    if idcg > 0.0 {
        dcg / idcg
    } else {
        0.0
    }
}

fn bpref_oracle(ids: &[usize], grades: &BTreeMap<usize, u32>) -> f64 {
    let r = grades.values().filter(|&&g| g >= 1).count();
    let n = grades.len() - r;
    if r == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (pos, d) in ids.iter().enumerate() {
        if grades.get(d).is_some_and(|&g| g >= 1) {
            let above = ids[..pos]
                .iter()
                .filter(|x| grades.get(x) == Some(&0))
                .count();
            total += if n == 0 {
                1.0
            } else {
                1.0 - (above.min(r) as f64) / (r.min(n) as f64)
            };
        }
    }
    total / r as f64
}

fn grades_strategy() -> impl Strategy<Value = BTreeMap<usize, u32>> {
    btree_map(0usize..60, 0u32..=3, 0..=10)
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent_and_survives_round_trip(
        entries in vec((0usize..30, 0u8..5), 1..25)
    ) {
        let mut seen = BTreeSet::new();
        let scored: Vec<_> = entries
            .into_iter()
            .filter(|(d, _)| seen.insert(*d))
            .map(|(d, s)| (doc(d), f64::from(s) * 0.25))
            .collect();
        let r = Ranking::from_scored(tid(), scored).unwrap();
        prop_assert_eq!(r.canonicalize(), r.clone());
        let run = RunFile::from_rankings("sys", "t0", [r]).unwrap();
        let text = write_run(&run);
        let back = parse_run(text.lines(), "t0").unwrap();
        prop_assert!(back.warnings.is_empty());
        prop_assert_eq!(back.value, run);
    }

    #[test]
    fn measures_match_oracles(ids in ranked_ids(60, 50), grades in grades_strategy(), k in 1usize..15) {
        let r = ranking(&ids);
        let q = qrels_of(&grades);
        prop_assert!((precision_at_k(&r, &q, k as u32) - precision_oracle(&ids, &grades, k)).abs() < 1e-12);
        prop_assert!((ndcg(&r, &q, Some(k as u32)) - ndcg_oracle(&ids, &grades, Some(k))).abs() < 1e-12);
        prop_assert!((ndcg(&r, &q, None) - ndcg_oracle(&ids, &grades, None)).abs() < 1e-12);
        prop_assert!((bpref(&r, &q) - bpref_oracle(&ids, &grades)).abs() < 1e-12);
    }

    #[test]
    fn measures_ignore_doc_names(ids in ranked_ids(40, 30), grades in btree_map(0usize..40, 0u32..=3, 0..=10)) {
        // renaming documents consistently leaves every measure unchanged
        let rename = |d: usize| 1000 - d;
        let r = ranking(&ids);
        let q = qrels_of(&grades);
        let r2 = ranking(&ids.iter().map(|&d| rename(d)).collect::<Vec<_>>());
        let q2 = qrels_of(&grades.iter().map(|(&d, &g)| (rename(d), g)).collect());
        prop_assert_eq!(precision_at_k(&r, &q, 10), precision_at_k(&r2, &q2, 10));
        prop_assert_eq!(ndcg(&r, &q, None), ndcg(&r2, &q2, None));
        prop_assert_eq!(bpref(&r, &q), bpref(&r2, &q2));
    }

    #[test]
    fn cutoff_measures_only_see_the_top_k(
        ids in ranked_ids(60, 50), grades in grades_strategy(), k in 1usize..15, tail in vec(60usize..90, 0..10)
    ) {
        let head: Vec<usize> = ids.iter().take(k).copied().collect();
        let mut extended = head.clone();
        let mut seen: HashSet<usize> = head.iter().copied().collect();
        extended.extend(tail.into_iter().filter(|d| seen.insert(*d)));
        let q = qrels_of(&grades);
        let (a, b) = (ranking(&ids), ranking(&extended));
        prop_assert_eq!(precision_at_k(&a, &q, k as u32), precision_at_k(&b, &q, k as u32));
        prop_assert_eq!(ndcg(&a, &q, Some(k as u32)), ndcg(&b, &q, Some(k as u32)));
    }

    #[test]
    fn bpref_ignores_unjudged_insertions(
        ids in ranked_ids(60, 50), grades in grades_strategy(), inserts in vec((0usize..60, 100usize..200), 0..10)
    ) {
        let mut with = ids.clone();
        for (pos, d) in inserts {
            if !with.contains(&d) {
                with.insert(pos.min(with.len()), d);
            }
        }
        let q = qrels_of(&grades);
        prop_assert_eq!(bpref(&ranking(&ids), &q), bpref(&ranking(&with), &q));
    }

    #[test]
    fn rbo_matches_oracle_and_is_symmetric(
        a in ranked_ids(30, 20), b in ranked_ids(30, 20),
        phi in prop_oneof![Just(0.5), Just(0.8), Just(0.9)], depth in 1usize..25
    ) {
        let cfg = RboConfig::new(phi, depth, true).unwrap();
        let (ra, rb) = (ranking(&a), ranking(&b));
        let v = rbo_topic(&ra, &rb, &cfg).unwrap();
        prop_assert!((v - rbo_oracle(&a, &b, phi, depth)).abs() < 1e-12);
        prop_assert_eq!(v, rbo_topic(&rb, &ra, &cfg).unwrap());
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(rbo_topic(&ra, &ra, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn rmse_is_a_metric(x in vec(0.0f64..=1.0, 8), y in vec(0.0f64..=1.0, 8), z in vec(0.0f64..=1.0, 8)) {
        let m = MeasureSpec::bpref();
        let (a, b, c) = (scores(&x, m), scores(&y, m), scores(&z, m));
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
        prop_assert!(rmse(&a, &c).unwrap() <= rmse(&a, &b).unwrap() + rmse(&b, &c).unwrap() + 1e-12);
    }

    #[test]
    fn t_test_is_antisymmetric_and_shift_invariant(
        x in vec(0.05f64..=0.9, 3..20), noise in vec(-0.05f64..=0.05, 20), shift in -0.05f64..0.05
    ) {
        let m = MeasureSpec::bpref();
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, e)| (a + e).clamp(0.0, 1.0)).collect();
        let (a, b) = (scores(&x, m), scores(&y, m));
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        if ab.t_statistic.is_finite() {
            prop_assert!((ab.t_statistic + ba.t_statistic).abs() < 1e-9);
            // brute-force statistic
            let d: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            let sd = (d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!((ab.t_statistic - mean / (sd / n.sqrt())).abs() < 1e-6 * ab.t_statistic.abs().max(1.0));

            let xs: Vec<f64> = x.iter().map(|v| v + shift + 0.05).collect();
            let ys: Vec<f64> = y.iter().map(|v| v + shift + 0.05).collect();
            if xs.iter().chain(&ys).all(|v| (0.0..=1.0).contains(v)) {
                let shifted = paired_t_test(&scores(&xs, m), &scores(&ys, m)).unwrap();
                prop_assert!((shifted.t_statistic - ab.t_statistic).abs() < 1e-6 * ab.t_statistic.abs().max(1.0));
            }
        }
    }

    #[test]
    fn delta_ri_is_scale_invariant(
        s0 in 0.01f64..0.5, p0 in 0.01f64..0.5, s1 in 0.01f64..0.5, p1 in 0.01f64..0.5, c in 0.5f64..2.0
    ) {
        let m = MeasureSpec::bpref();
        let arp = |sys: &str, ee: &str, v: f64| ArpResult::from_mean(m, sys, ee, v).unwrap();
        let dri = |k: f64| {
            let ri0 = relative_improvement(&arp("s", "t0", s0 * k), &arp("p", "t0", p0 * k)).unwrap();
            let ri1 = relative_improvement(&arp("s", "t1", s1 * k), &arp("p", "t1", p1 * k)).unwrap();
            delta_ri(ri0, ri1)
        };
        prop_assert!((dri(1.0) - dri(c)).abs() < 1e-9 * dri(1.0).abs().max(1.0));
    }

    #[test]
    fn result_delta_sign_follows_direction(a in 0.01f64..=1.0, b in 0.0f64..=1.0) {
        let m = MeasureSpec::bpref();
        let v = result_delta(
            &ArpResult::from_mean(m, "s", "t0", a).unwrap(),
            &ArpResult::from_mean(m, "s", "t1", b).unwrap(),
        )
        .unwrap();
        prop_assert_eq!(v > 0.0, b < a);
        prop_assert_eq!(v < 0.0, b > a);
    }

    #[test]
    fn crud_diffs_are_symmetric_and_telescope(
        a in btree_map(0usize..40, 1u64..4, 0..30),
        b in btree_map(0usize..40, 1u64..4, 0..30),
        c in btree_map(0usize..40, 1u64..4, 0..30),
    ) {
        let corpus = |m: &BTreeMap<usize, u64>| CorpusSnapshot::from_docs(m.iter().map(|(&d, &l)| DocMeta::new(doc(d), l))).unwrap();
        let (ca, cb, cc) = (corpus(&a), corpus(&b), corpus(&c));
        let ab = diff_documents(&ca, &cb);
        let ba = diff_documents(&cb, &ca);
        prop_assert_eq!(&ab.created, &ba.deleted);
        prop_assert_eq!(&ab.deleted, &ba.created);
        prop_assert_eq!(&ab.updated, &ba.updated);
        prop_assert!(diff_documents(&ca, &ca).is_identity());
        prop_assert_eq!(ab.total_to as i64 - ab.total_from as i64, ab.created.len() as i64 - ab.deleted.len() as i64);

        // net growth composes across consecutive diffs
        let bc = diff_documents(&cb, &cc);
        let ac = diff_documents(&ca, &cc);
        let net = |d: &tempir_core::ComponentDiff<DocId>| d.created.len() as i64 - d.deleted.len() as i64;
        prop_assert_eq!(net(&ab) + net(&bc), net(&ac));

        let qa = Qrels::from_triples(a.iter().map(|(&d, &g)| (tid(), doc(d), g as i64 - 1))).unwrap();
        let qb = Qrels::from_triples(b.iter().map(|(&d, &g)| (tid(), doc(d), g as i64 - 1))).unwrap();
        prop_assert_eq!(diff_qrels(&qa, &qb).created, diff_qrels(&qb, &qa).deleted);
    }

    #[test]
    fn simulation_slices_grow_evenly(
        days in vec(1u32..28, 6..60), slices in 2usize..5, judged in proptest::collection::btree_set(0usize..60, 0..20)
    ) {
        use chrono::{TimeZone, Utc};
        let docs = days.iter().enumerate().map(|(i, &day)| {
            DocMeta::new(doc(i), 1).with_timestamp(Utc.with_ymd_and_hms(2021, 3, day, 0, 0, 0).unwrap())
        });
        let qrels = Qrels::from_triples(judged.iter().filter(|&&d| d < days.len()).map(|&d| (tid(), doc(d), 1))).unwrap();
        let base = EvaluationEnvironment::new(
            "all",
            CorpusSnapshot::from_docs(docs).unwrap(),
            [TopicDef::new(tid(), None)],
            qrels.clone(),
        )
        .unwrap();
        let distinct: BTreeSet<_> = days.iter().collect();
        let plan = SimulationPlan::equal_doc_count(slices).unwrap();
        let out = split_append_only(&base, &plan);
        if slices > distinct.len() {
            prop_assert!(out.is_err());
            return Ok(());
        }
        let out = out.unwrap();
        prop_assert_eq!(out.len(), slices);
        prop_assert_eq!(out.last().unwrap().corpus.len(), days.len());
        prop_assert_eq!(&out.last().unwrap().qrels, &qrels);
        let mut sizes = Vec::new();
        let mut prev = 0;
        for w in &out {
            sizes.push(w.corpus.len() - prev);
            prev = w.corpus.len();
        }
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for w in out.windows(2) {
            prop_assert!(diff_documents(&w[0].corpus, &w[1].corpus).deleted.is_empty());
            prop_assert!(diff_qrels(&w[0].qrels, &w[1].qrels).deleted.is_empty());
            prop_assert!(w[0].qrels.len() <= w[1].qrels.len());
        }
    }
}

/// Pushing a document the other ranking never retrieves onto the top of a
/// full-depth list (dropping its last entry) cannot raise agreement at any
/// depth, so RBO can only drop. Checked exhaustively over every ordered
/// 4-document list drawn from six documents.
#[test]
fn rbo_never_rises_when_an_unshared_doc_is_pushed_in() {
    let mut all = Vec::new();
    for a in 0..6 {
        for b in 0..6 {
            for c in 0..6 {
                for d in 0..6 {
                    let v = vec![a, b, c, d];
                    if v.iter().collect::<HashSet<_>>().len() == 4 {
                        all.push(v);
                    }
                }
            }
        }
    }
    for normalize in [false, true] {
        let cfg = RboConfig::new(0.9, 4, normalize).unwrap();
        for a in &all {
            for b in &all {
                let base = rbo_topic(&ranking(a), &ranking(b), &cfg).unwrap();
                let mut pushed = vec![9];
                pushed.extend(&b[..3]);
                let after = rbo_topic(&ranking(a), &ranking(&pushed), &cfg).unwrap();
                assert!(after <= base + 1e-15, "{a:?} {b:?}: {base} -> {after}");
            }
        }
    }
}
