//! Masked-language-model example creation: BERT-style 80/10/10 masking with
//! a per-example RNG, and dataset emission with a reproducibility manifest.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{seeded_key, sha256_hex, to_jsonl, write_atomic, write_json};
use crate::kg_ingest::Split;
use crate::tokenizer::{SubwordVocab, VocabKind};
use crate::verbalizer::VerbalizedSample;

pub const MAX_SEQ_LEN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskingPolicy {
    pub mask_rate: f64,
    pub replace_mask: f64,
    pub replace_random: f64,
    pub keep: f64,
    pub whole_word: bool,
}

impl Default for MaskingPolicy {
    fn default() -> Self {
        Self {
            mask_rate: 0.15,
            replace_mask: 0.8,
            replace_random: 0.1,
            keep: 0.1,
            whole_word: false,
        }
    }
}

impl MaskingPolicy {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.mask_rate, self.replace_mask, self.replace_random, self.keep];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config("masking rates must lie in [0, 1]".into()));
        }
        if (self.replace_mask + self.replace_random + self.keep - 1.0).abs() > 1e-9 {
            return Err(Error::Config(
                "replace_mask + replace_random + keep must sum to 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedExample {
    pub sample_id: u64,
    pub input_ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub masked_positions: Vec<usize>,
    /// Original id at each entry of `masked_positions`.
    pub labels: Vec<u32>,
}

impl MaskedExample {
    /// Input ids with every label written back at its masked position.
    pub fn restored_ids(&self) -> Vec<u32> {
        let mut ids = self.input_ids.clone();
        for (&p, &l) in self.masked_positions.iter().zip(&self.labels) {
            ids[p] = l;
        }
        ids
    }
}

fn example_rng(seed: u64, sample_id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seeded_key(seed, &[b"mask", &sample_id.to_le_bytes()]))
}

/// Masks one delimited id sequence. Delimiters and other special tokens are
/// never selected. The result depends only on `(ids, sample_id, seed,
/// policy, vocab)`.
pub fn mask_example(
    ids: &[u32],
    sample_id: u64,
    seed: u64,
    policy: &MaskingPolicy,
    vocab: &SubwordVocab,
) -> MaskedExample {
    let mut rng = example_rng(seed, sample_id);
    let maskable: Vec<bool> = ids.iter().map(|&i| !vocab.is_special(i)).collect();

    let mut selected = vec![false; ids.len()];
    if policy.whole_word {
        let starts = vocab.word_starts(ids);
        let mut word_selected = false;
        for pos in 0..ids.len() {
            if starts[pos] {
                word_selected = maskable[pos] && rng.random::<f64>() < policy.mask_rate;
            }
            selected[pos] = word_selected && maskable[pos];
        }
    } else {
        for pos in 0..ids.len() {
            if maskable[pos] {
                selected[pos] = rng.random::<f64>() < policy.mask_rate;
            }
        }
    }

    let candidates = vocab.non_special_ids();
    let mask_id = vocab.specials().mask;
    let mut input_ids = ids.to_vec();
    let mut masked_positions = Vec::new();
    let mut labels = Vec::new();
    for pos in (0..ids.len()).filter(|&p| selected[p]) {
        let r: f64 = rng.random();
        if r < policy.replace_mask {
            input_ids[pos] = mask_id;
        } else if r < policy.replace_mask + policy.replace_random {
            input_ids[pos] = candidates[rng.random_range(0..candidates.len())];
        }
        masked_positions.push(pos);
        labels.push(ids[pos]);
    }

    MaskedExample {
        sample_id,
        attention_mask: vec![1; input_ids.len()],
        input_ids,
        masked_positions,
        labels,
    }
}

/// Training schedule handed to the downstream trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainerHyperparameters {
    pub epochs: u32,
    pub batch_size: u32,
    pub early_stopping_patience: u32,
    pub max_seq_len: usize,
}

impl Default for TrainerHyperparameters {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 128,
            early_stopping_patience: 5,
            max_seq_len: MAX_SEQ_LEN,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub samples: usize,
    pub train: usize,
    pub dev: usize,
    /// Sentences cut at `max_seq_len` subword positions.
    pub truncated: usize,
    /// Examples with no maskable token, or none selected.
    pub no_masked_positions: usize,
    pub no_maskable_tokens: usize,
    pub maskable_tokens: usize,
    pub masked_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tool_version: String,
    pub dataset: String,
    pub seed: u64,
    pub vocab_kind: VocabKind,
    pub vocab_hash: String,
    pub policy: MaskingPolicy,
    pub max_seq_len: usize,
    /// The length limit counts the two delimiter positions.
    pub max_seq_len_includes_delimiters: bool,
    pub template_version: String,
    pub counts: DatasetCounts,
    pub truncation_rate: f64,
    pub hyperparameters: TrainerHyperparameters,
    /// sha256 of each data file written, keyed by file name.
    pub files: BTreeMap<String, String>,
}

pub struct DatasetSpec<'a> {
    pub name: &'a str,
    pub seed: u64,
    pub policy: MaskingPolicy,
    pub max_seq_len: usize,
    pub template_version: &'a str,
}

/// Masks every sample and returns the examples for each split, ordered by
/// sample id, plus the counters for the manifest.
pub fn build_examples(
    samples: &[VerbalizedSample],
    vocab: &SubwordVocab,
    spec: &DatasetSpec<'_>,
) -> (Vec<MaskedExample>, Vec<MaskedExample>, DatasetCounts) {
    let mut ordered: Vec<&VerbalizedSample> = samples.iter().collect();
    ordered.sort_by_key(|s| s.id);

    let built: Vec<(Split, bool, usize, MaskedExample)> = ordered
        .par_iter()
        .map(|s| {
            let enc = vocab.encode(&s.text, spec.max_seq_len);
            let maskable = enc.ids.iter().filter(|&&i| !vocab.is_special(i)).count();
            let ex = mask_example(&enc.ids, s.id, spec.seed, &spec.policy, vocab);
            (s.split, enc.truncated, maskable, ex)
        })
        .collect();

    let mut counts = DatasetCounts {
        samples: samples.len(),
        ..Default::default()
    };
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (split, truncated, maskable, ex) in built {
        counts.truncated += truncated as usize;
        counts.maskable_tokens += maskable;
        counts.masked_tokens += ex.masked_positions.len();
        if maskable == 0 {
            counts.no_maskable_tokens += 1;
        }
        if ex.masked_positions.is_empty() {
            counts.no_masked_positions += 1;
        }
        match split {
            Split::Train => train.push(ex),
            Split::Dev => dev.push(ex),
        }
    }
    counts.train = train.len();
    counts.dev = dev.len();
    (train, dev, counts)
}

/// Writes `train.jsonl`, `dev.jsonl` and `manifest.json` into `out_dir`.
/// An empty corpus produces only the manifest.
pub fn emit_dataset(
    samples: &[VerbalizedSample],
    vocab: &SubwordVocab,
    spec: &DatasetSpec<'_>,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    spec.policy.validate()?;
    if spec.max_seq_len < 3 {
        return Err(Error::Config("max_seq_len must be at least 3".into()));
    }
    let (train, dev, counts) = build_examples(samples, vocab, spec);

    let mut files = BTreeMap::new();
    if !samples.is_empty() {
        for (name, examples) in [("train.jsonl", &train), ("dev.jsonl", &dev)] {
            let bytes = to_jsonl(examples);
            files.insert(name.to_string(), sha256_hex(&bytes));
            write_atomic(&out_dir.join(name), &bytes)?;
        }
    }
    let manifest = DatasetManifest {
        tool_version: crate::VERSION.to_string(),
        dataset: spec.name.to_string(),
        seed: spec.seed,
        vocab_kind: vocab.kind(),
        vocab_hash: vocab.hash().to_string(),
        policy: spec.policy,
        max_seq_len: spec.max_seq_len,
        max_seq_len_includes_delimiters: true,
        template_version: spec.template_version.to_string(),
        truncation_rate: if counts.samples == 0 {
            0.0
        } else {
            counts.truncated as f64 / counts.samples as f64
        },
        counts,
        hyperparameters: TrainerHyperparameters {
            max_seq_len: spec.max_seq_len,
            ..Default::default()
        },
        files,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
