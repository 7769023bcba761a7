//! Pipeline configuration: a JSON file, overridden by `CORPUSFORGE_*`
//! environment variables, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::Markers;
use crate::error::{Error, Result};
use crate::grammar::CheckOptions;
use crate::kg_ingest::{GlucoseOptions, Split};
use crate::mlm::{MaskingPolicy, MAX_SEQ_LEN};

pub const ENV_PREFIX: &str = "CORPUSFORGE_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Directory holding `train.tsv` / `dev.tsv` (or `.jsonl`).
    pub atomic_dir: Option<PathBuf>,
    pub glucose: Option<PathBuf>,
    /// COPA-format XML files by name, e.g. `dev`, `test`, `bcopa-ce`.
    pub copa: BTreeMap<String, PathBuf>,
    pub easy_hard_index: Option<PathBuf>,
    /// TCR intermediate JSONL files by name, e.g. `train`, `test`.
    pub tcr: BTreeMap<String, PathBuf>,
    /// WordPiece `vocab.txt`, or BPE `vocab.json` when `merges` is set.
    pub vocab: Option<PathBuf>,
    pub merges: Option<PathBuf>,
    pub bench_embeddings: Option<PathBuf>,
    pub corpus_embeddings: Option<PathBuf>,
    pub bench_texts: Option<PathBuf>,
    pub corpus_texts: Option<PathBuf>,
    /// JSON array of benchmark ids to restrict the overlap analysis to.
    pub bench_subset: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub connectives: Option<PathBuf>,
    pub names: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrammarConfig {
    /// External checker program and arguments (line protocol).
    pub checker_command: Option<Vec<String>>,
    pub apply_suggestions: bool,
    pub batch_size: usize,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        Self {
            checker_command: None,
            apply_suggestions: false,
            batch_size: CheckOptions::default().batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    pub seed: u64,
    /// Worker threads; does not affect outputs and is not recorded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Output root; not recorded in the resolved config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub atomic_splits: Vec<Split>,
    pub accept_auxiliary_relations: bool,
    pub glucose: GlucoseOptions,
    pub grammar: GrammarConfig,
    pub masking: MaskingPolicy,
    pub max_seq_len: usize,
    pub prompt: bool,
    pub markers: Markers,
    pub thresholds: Vec<f64>,
    pub overlap_prefilter: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Inputs::default(),
            seed: 42,
            workers: None,
            out_dir: None,
            atomic_splits: vec![Split::Train, Split::Dev],
            accept_auxiliary_relations: false,
            glucose: GlucoseOptions::default(),
            grammar: GrammarConfig::default(),
            masking: MaskingPolicy::default(),
            max_seq_len: MAX_SEQ_LEN,
            prompt: false,
            markers: Markers::default(),
            thresholds: vec![0.5, 0.6],
            overlap_prefilter: true,
        }
    }
}

impl PipelineConfig {
    /// Reads `path` (if any), applies environment overrides from `env`, and
    /// resolves relative input paths against the config file's directory.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let (mut value, base) = match path {
            Some(p) => {
                let text = crate::io::read_to_string(p)?;
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| Error::format(p, e.line(), e.to_string()))?;
                (v, p.parent().map(Path::to_path_buf))
            }
            None => (Value::Object(Default::default()), None),
        };
        if !value.is_object() {
            return Err(Error::Config("config file must hold a JSON object".into()));
        }
        apply_env_overrides(&mut value, env);
        let mut cfg: PipelineConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base {
            cfg.inputs.resolve_relative(&base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_env_only() -> Result<Self> {
        Self::load(None, std::env::vars())
    }

    pub fn validate(&self) -> Result<()> {
        self.masking.validate()?;
        if self.max_seq_len < 3 {
            return Err(Error::Config("max_seq_len must be at least 3".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(-1.0..=1.0).contains(t)) {
            return Err(Error::Config("thresholds must be non-empty and within [-1, 1]".into()));
        }
        if self.grammar.batch_size == 0 {
            return Err(Error::Config("grammar.batch_size must be positive".into()));
        }
        Ok(())
    }

    /// The configuration as recorded next to outputs: everything that can
    /// influence output bytes, nothing that cannot.
    pub fn resolved(&self) -> PipelineConfig {
        PipelineConfig {
            workers: None,
            out_dir: None,
            ..self.clone()
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

impl Inputs {
    /// Every configured input path.
    pub fn paths(&self) -> Vec<&Path> {
        let mut out: Vec<&Path> = [
            &self.atomic_dir,
            &self.glucose,
            &self.easy_hard_index,
            &self.vocab,
            &self.merges,
            &self.bench_embeddings,
            &self.corpus_embeddings,
            &self.bench_texts,
            &self.corpus_texts,
            &self.bench_subset,
            &self.templates,
            &self.connectives,
            &self.names,
        ]
        .into_iter()
        .flatten()
        .map(PathBuf::as_path)
        .collect();
        out.extend(self.copa.values().map(PathBuf::as_path));
        out.extend(self.tcr.values().map(PathBuf::as_path));
        out
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.atomic_dir,
            &mut self.glucose,
            &mut self.easy_hard_index,
            &mut self.vocab,
            &mut self.merges,
            &mut self.bench_embeddings,
            &mut self.corpus_embeddings,
            &mut self.bench_texts,
            &mut self.corpus_texts,
            &mut self.bench_subset,
            &mut self.templates,
            &mut self.connectives,
            &mut self.names,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.copa.values_mut().for_each(fix);
        self.tcr.values_mut().for_each(fix);
    }
}

/// `CORPUSFORGE_SEED=7` sets `seed`; `CORPUSFORGE_MASKING__MASK_RATE=0.2`
/// sets `masking.mask_rate`. Values are parsed as JSON when possible and
/// taken as strings otherwise.
pub fn apply_env_overrides(value: &mut Value, env: impl IntoIterator<Item = (String, String)>) {
    let mut vars: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && k.len() > ENV_PREFIX.len())
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(str::to_ascii_lowercase)
            .collect();
        let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        let (last, parents) = path.split_last().expect("non-empty key");
        let mut cursor = &mut *value;
        for part in parents {
            cursor = object(cursor)
                .entry(part.clone())
                .or_insert(Value::Object(Default::default()));
        }
        object(cursor).insert(last.clone(), parsed);
    }
}

fn object(v: &mut Value) -> &mut serde_json::Map<String, Value> {
    if !v.is_object() {
        *v = Value::Object(Default::default());
    }
    v.as_object_mut().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_match_pipeline_constants() {
        let c = PipelineConfig::default();
        assert_eq!(c.max_seq_len, 30);
        assert_eq!(c.thresholds, vec![0.5, 0.6]);
        assert_eq!(c.atomic_splits, vec![Split::Train, Split::Dev]);
        assert!(c.glucose.include_general && c.glucose.include_specific);
    }

    #[test]
    fn env_overrides_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 1, "inputs": {"glucose": "g.csv"}, "masking": {"whole_word": true}}"#).unwrap();
        let c = PipelineConfig::load(
            Some(&p),
            env(&[
                ("CORPUSFORGE_SEED", "9"),
                ("CORPUSFORGE_MASKING__MASK_RATE", "0.2"),
                ("CORPUSFORGE_OUT_DIR", "/tmp/x"),
                ("OTHER_SEED", "3"),
            ]),
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.masking.mask_rate, 0.2);
        assert!(c.masking.whole_word);
        assert_eq!(c.out_dir, Some(PathBuf::from("/tmp/x")));
        assert_eq!(c.inputs.glucose, Some(dir.path().join("g.csv")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"sed": 1}"#).unwrap();
        assert_eq!(PipelineConfig::load(Some(&p), env(&[])).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn resolved_config_drops_run_local_fields() {
        let c = PipelineConfig {
            workers: Some(8),
            out_dir: Some("/x".into()),
            ..Default::default()
        };
        let json = serde_json::to_string(&c.resolved()).unwrap();
        assert!(!json.contains("workers") && !json.contains("out_dir"));
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c.resolved());
    }
}
