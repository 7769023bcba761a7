#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use corpusforge::config::PipelineConfig;
use corpusforge::io::sha256_file;
use corpusforge::mlm::{mask_example, MaskingPolicy};
use corpusforge::tokenizer::SubwordVocab;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Random embeddings written as JSONL, ids `<prefix>-<i>`.
pub fn random_vectors(prefix: &str, n: usize, dim: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            (format!("{prefix}-{i}"), v)
        })
        .collect()
}

pub fn write_embeddings(path: &Path, rows: &[(String, Vec<f64>)]) {
    let mut body = String::new();
    for (id, v) in rows {
        body.push_str(&serde_json::json!({"id": id, "vector": v}).to_string());
        body.push('\n');
    }
    std::fs::write(path, body).unwrap();
}

/// A config touching every stage, reading the checked-in fixtures plus
/// embeddings generated into `scratch`.
pub fn full_config(scratch: &Path, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.inputs.atomic_dir = Some(fixture("atomic"));
    cfg.inputs.glucose = Some(fixture("glucose.csv"));
    cfg.inputs.copa.insert("dev".into(), fixture("copa.xml"));
    cfg.inputs.copa.insert("test".into(), fixture("copa.xml"));
    cfg.inputs.easy_hard_index = Some(fixture("easy_hard.json"));
    cfg.inputs.tcr.insert("test".into(), fixture("tcr.jsonl"));
    cfg.inputs.vocab = Some(fixture("tokenizer/wordpiece_vocab.txt"));
    let bench = scratch.join("bench.jsonl");
    let corpus = scratch.join("corpus.jsonl");
    write_embeddings(&bench, &random_vectors("b", 20, 8, 1));
    write_embeddings(&corpus, &random_vectors("c", 50, 8, 2));
    cfg.inputs.bench_embeddings = Some(bench);
    cfg.inputs.corpus_embeddings = Some(corpus);
    cfg.prompt = true;
    cfg.out_dir = Some(out.to_path_buf());
    cfg
}

/// sha256 of every file below `root`, keyed by relative path.
pub fn tree_digest(root: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, sha256_file(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Double-loop cosine search, written independently of the library.
pub fn brute_force_pairs(
    bench: &[(String, Vec<f64>)],
    corpus: &[(String, Vec<f64>)],
    threshold: f64,
) -> Vec<(String, String, f64)> {
    let mut out = Vec::new();
    for (bid, u) in bench {
        for (cid, v) in corpus {
            let mut dot = 0.0;
            let mut nu = 0.0;
            let mut nv = 0.0;
            for i in 0..u.len() {
                dot += u[i] * v[i];
                nu += u[i] * u[i];
                nv += v[i] * v[i];
            }
            let denom = nu.sqrt() * nv.sqrt();
            let score = if denom == 0.0 { 0.0 } else { dot / denom };
            if score >= threshold {
                out.push((bid.clone(), cid.clone(), score));
            }
        }
    }
    out.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    out
}

/// Counts of masking outcomes over `examples` sentences cycled from
/// `sentences`, each with its own sample id.
pub struct Tally {
    pub examples: usize,
    pub maskable: usize,
    pub masked: usize,
    pub to_mask: usize,
    pub to_random: usize,
    pub kept: usize,
    pub masked_delimiters: usize,
    pub round_trip_failures: usize,
}

pub fn tally(vocab: &SubwordVocab, sentences: &[String], examples: usize, seed: u64) -> Tally {
    let policy = MaskingPolicy::default();
    let s = vocab.specials();
    let mut t = Tally {
        examples,
        maskable: 0,
        masked: 0,
        to_mask: 0,
        to_random: 0,
        kept: 0,
        masked_delimiters: 0,
        round_trip_failures: 0,
    };
    for id in 0..examples {
        let text = &sentences[id % sentences.len()];
        let ids = vocab.encode(text, 30).ids;
        let ex = mask_example(&ids, id as u64, seed, &policy, vocab);
        t.maskable += ids.iter().filter(|&&i| !vocab.is_special(i)).count();
        t.masked += ex.masked_positions.len();
        for (&p, &label) in ex.masked_positions.iter().zip(&ex.labels) {
            if ids[p] == s.cls || ids[p] == s.sep {
                t.masked_delimiters += 1;
            }
            match ex.input_ids[p] {
                m if m == s.mask => t.to_mask += 1,
                x if x == label => t.kept += 1,
                _ => t.to_random += 1,
            }
        }
        if ex.restored_ids() != ids || vocab.detokenize(&ex.restored_ids()) != vocab.detokenize(&ids) {
            t.round_trip_failures += 1;
        }
    }
    t
}
