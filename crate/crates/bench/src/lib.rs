//! Seeded synthetic inputs for the benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempir_core::{CorpusSnapshot, DocId, DocMeta, Qrels, Ranking, RunFile, TopicId};

pub fn doc(i: usize) -> DocId {
    DocId::new(format!("d{i}")).unwrap()
}

pub fn topic(i: usize) -> TopicId {
    TopicId::new(format!("q{i}")).unwrap()
}

/// A ranking of `len` distinct documents drawn from `0..pool`.
pub fn ranking(rng: &mut ChaCha8Rng, t: usize, pool: usize, len: usize) -> Ranking {
    let ids: Vec<usize> = (0..pool).collect();
    let scored = ids
        .choose_multiple(rng, len)
        .enumerate()
        .map(|(rank, &d)| (doc(d), (len - rank) as f64))
        .collect();
    Ranking::from_scored(topic(t), scored).unwrap()
}

pub struct Collection {
    pub run: RunFile,
    pub qrels: Qrels,
}

/// `topics` rankings of depth `depth` with `judged` graded documents each.
pub fn collection(
    seed: u64,
    topics: usize,
    pool: usize,
    depth: usize,
    judged: usize,
) -> Collection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rankings: Vec<Ranking> = (0..topics)
        .map(|t| ranking(&mut rng, t, pool, depth))
        .collect();
    let mut qrels = Qrels::new();
    for t in 0..topics {
        for _ in 0..judged {
            qrels.insert(topic(t), doc(rng.gen_range(0..pool)), rng.gen_range(0..=2));
        }
    }
    Collection {
        run: RunFile::from_rankings("bench", "t0", rankings).unwrap(),
        qrels,
    }
}

/// Documents `0..n`, with every `stride`-th one a different length from
/// [`corpus`] when `edited` is set.
pub fn corpus(n: usize, edited: bool, stride: usize) -> CorpusSnapshot {
    CorpusSnapshot::from_docs((0..n).map(|i| {
        let len = if edited && i % stride == 0 { 200 } else { 100 };
        DocMeta::new(doc(i), len)
    }))
    .unwrap()
}
