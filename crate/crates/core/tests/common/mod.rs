//! Shared helpers for the integration tests: a generative sampler for a
//! synthetic corpus with known topics, permutation matching, and
//! brute-force reference implementations of the coherence measures.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ethos::corpus::{BowDocument, TermId, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub struct Synthetic {
    pub phi_star: Vec<Vec<f64>>,
    pub docs: Vec<Vec<TermId>>,
    pub bow: Vec<BowDocument>,
    pub vocab: Vocabulary,
}

pub const SYN_K: usize = 3;
pub const SYN_V: usize = 60;
pub const SYN_DOCS: usize = 500;

/// 3 topics over 60 terms with disjoint 20-term supports and Zipf-like
/// weights inside each support. Each document draws a sparse mixture (one
/// dominant topic at 0.9, the rest spread over the others) and 40..=80
/// tokens.
pub fn synthetic(seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per = SYN_V / SYN_K;
    let phi_star: Vec<Vec<f64>> = (0..SYN_K)
        .map(|t| {
            let mut row = vec![0.0; SYN_V];
            let z: f64 = (1..=per).map(|r| 1.0 / (r as f64).sqrt()).sum();
            for r in 0..per {
                row[t * per + r] = 1.0 / ((r + 1) as f64).sqrt() / z;
            }
            row
        })
        .collect();
    let draw = |rng: &mut ChaCha8Rng, p: &[f64]| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &x) in p.iter().enumerate() {
            acc += x;
            if u < acc {
                return i;
            }
        }
        p.len() - 1
    };
    let mut docs = Vec::with_capacity(SYN_DOCS);
    for _ in 0..SYN_DOCS {
        let main = rng.random_range(0..SYN_K);
        let theta: Vec<f64> = (0..SYN_K)
            .map(|t| if t == main { 0.9 } else { 0.1 / (SYN_K - 1) as f64 })
            .collect();
        let len = rng.random_range(40..=80);
        let doc: Vec<TermId> = (0..len)
            .map(|_| {
                let t = draw(&mut rng, &theta);
                draw(&mut rng, &phi_star[t]) as TermId
            })
            .collect();
        docs.push(doc);
    }
    let tokens: Vec<String> = (0..SYN_V).map(|w| format!("w{w:02}")).collect();
    let mut df = vec![0u32; SYN_V];
    for d in &docs {
        for w in d.iter().collect::<BTreeSet<_>>() {
            df[*w as usize] += 1;
        }
    }
    let vocab = Vocabulary::from_parts(tokens, df).unwrap();
    let bow = docs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut c: BTreeMap<TermId, u32> = BTreeMap::new();
            for &w in d {
                *c.entry(w).or_default() += 1;
            }
            BowDocument {
                review_id: format!("s{i:03}"),
                counts: c.into_iter().collect(),
            }
        })
        .collect();
    Synthetic { phi_star, docs, bow, vocab }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum-cost assignment of rows to columns by exhaustive search, which is
/// exact and fast enough for the handful of topics used here. Returns
/// `perm` with row `i` matched to column `perm[i]`.
pub fn best_matching(cost: &[Vec<f64>]) -> Vec<usize> {
    permutations(cost.len())
        .into_iter()
        .min_by(|a, b| {
            let ca: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let cb: f64 = b.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            ca.total_cmp(&cb)
        })
        .unwrap()
}

/// Enumerates every window explicitly and counts term and pair presence.
pub struct BruteCounts {
    pub n_windows: u64,
    pub unigram: BTreeMap<TermId, u64>,
    pub pair: BTreeMap<(TermId, TermId), u64>,
}

pub fn brute_windows(docs: &[Vec<TermId>], window: usize) -> BruteCounts {
    let mut out = BruteCounts {
        n_windows: 0,
        unigram: BTreeMap::new(),
        pair: BTreeMap::new(),
    };
    for doc in docs {
        if doc.is_empty() {
            continue;
        }
        let spans: Vec<&[TermId]> = if doc.len() <= window {
            vec![&doc[..]]
        } else {
            (0..=doc.len() - window).map(|s| &doc[s..s + window]).collect()
        };
        for span in spans {
            out.n_windows += 1;
            let set: BTreeSet<TermId> = span.iter().copied().collect();
            for &a in &set {
                *out.unigram.entry(a).or_default() += 1;
                for &b in &set {
                    if a < b {
                        *out.pair.entry((a, b)).or_default() += 1;
                    }
                }
            }
        }
    }
    out
}

impl BruteCounts {
    fn p1(&self, w: TermId) -> f64 {
        *self.unigram.get(&w).unwrap_or(&0) as f64 / self.n_windows as f64
    }

    fn p2(&self, a: TermId, b: TermId) -> f64 {
        let key = (a.min(b), a.max(b));
        *self.pair.get(&key).unwrap_or(&0) as f64 / self.n_windows as f64
    }

    /// NPMI written directly from its definition and stated limits.
    pub fn npmi(&self, a: TermId, b: TermId) -> f64 {
        let (pa, pb) = (self.p1(a), self.p1(b));
        if pa == 0.0 || pb == 0.0 {
            return 0.0;
        }
        let pab = if a == b { pa } else { self.p2(a, b) };
        if pab == 0.0 {
            return -1.0;
        }
        if pab == 1.0 {
            return 1.0;
        }
        (pab / (pa * pb)).ln() / (-pab.ln())
    }

    /// C_v as a plain double loop: NPMI context vectors with the diagonal
    /// set to one, averaged pairwise cosine, zero vectors scoring zero.
    pub fn c_v(&self, terms: &[TermId]) -> f64 {
        let n = terms.len();
        let mut vecs = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                vecs[i][j] = if i == j { 1.0 } else { self.npmi(terms[i], terms[j]) };
            }
        }
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut dot = 0.0;
                let mut ni = 0.0;
                let mut nj = 0.0;
                for c in 0..n {
                    dot += vecs[i][c] * vecs[j][c];
                    ni += vecs[i][c] * vecs[i][c];
                    nj += vecs[j][c] * vecs[j][c];
                }
                total += if ni == 0.0 || nj == 0.0 { 0.0 } else { dot / (ni.sqrt() * nj.sqrt()) };
                pairs += 1.0;
            }
        }
        total / pairs
    }
}

/// Random small corpora: up to 5 documents, at most 30 tokens in total,
/// drawn from a vocabulary of `v` terms.
pub fn random_small_corpus(rng: &mut ChaCha8Rng, v: u32) -> Vec<Vec<TermId>> {
    let n_docs = rng.random_range(1..=5);
    let mut budget: usize = rng.random_range(1..=30);
    let mut docs = Vec::new();
    for d in 0..n_docs {
        let len = if d + 1 == n_docs { budget } else { rng.random_range(0..=budget) };
        budget -= len;
        docs.push((0..len).map(|_| rng.random_range(0..v)).collect());
    }
    docs
}

/// Reads a JSON Lines file into values.
pub fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Runs the whole pipeline on the fixture corpus once per test binary and
/// returns the run directory. Tests that write must work on a copy.
pub fn fixture_run() -> &'static Path {
    static RUN: std::sync::OnceLock<tempfile::TempDir> = std::sync::OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ethos::pipeline::PipelineConfig::load(&fixtures().join("fixture.conf")).unwrap();
        ethos::pipeline::Pipeline::new(cfg, dir.path()).run().unwrap();
        dir
    })
    .path()
}

/// Copies a run directory (flat, files only) into a fresh temp dir.
pub fn copy_run(src: &Path) -> tempfile::TempDir {
    let dst = tempfile::tempdir().unwrap();
    for e in std::fs::read_dir(src).unwrap() {
        let e = e.unwrap();
        if e.file_type().unwrap().is_file() && e.file_name() != ".lock" {
            std::fs::copy(e.path(), dst.path().join(e.file_name())).unwrap();
        }
    }
    dst
}
