//! Run configuration read from a TOML file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CultureGroup, DEFAULT_RETWEET_PATTERNS};
use crate::embedding::TrainParams;
use crate::error::{Error, Result};

fn default_runs() -> usize {
    5
}

fn default_threshold() -> u64 {
    1000
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_retweet() -> Vec<String> {
    DEFAULT_RETWEET_PATTERNS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub id: String,
    pub culture: CultureGroup,
    pub inputs: Vec<PathBuf>,
    /// Accepted language tags; a primary subtag also accepts its regions.
    pub language: String,
    /// Accepted country codes; defaults to none, which accepts every country.
    #[serde(default)]
    pub countries: Vec<String>,
    /// Treat every record as whitespace-segmented.
    #[serde(default)]
    pub pre_tokenized: bool,
    pub lexicon: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryConfig {
    pub data: PathBuf,
    pub categories: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Base seed; run `r` of every corpus trains with `seed + r`. Overrides
    /// `train.seed` when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Minimum total count for an emoji to enter the shared set.
    #[serde(default = "default_threshold")]
    pub shared_threshold: u64,
    #[serde(default = "default_retweet")]
    pub retweet_patterns: Vec<String>,
    /// Emoji data and category map; the bundled Emoji 1.0 data when absent.
    #[serde(default)]
    pub inventory: Option<InventoryConfig>,
    /// Emotion word list; English defaults when absent.
    #[serde(default)]
    pub ekman: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainParams,
    #[serde(rename = "corpus")]
    pub corpora: Vec<CorpusConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(inv) = &mut self.inventory {
            fix(&mut inv.data);
            fix(&mut inv.categories);
        }
        if let Some(e) = &mut self.ekman {
            fix(e);
        }
        for c in &mut self.corpora {
            c.inputs.iter_mut().for_each(fix);
            fix(&mut c.lexicon);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpora.is_empty() {
            return Err(Error::Config("at least one [[corpus]] is required".into()));
        }
        let mut ids = BTreeSet::new();
        for c in &self.corpora {
            if c.id.is_empty() || c.id.contains(['/', '\\', '\t', ',']) {
                return Err(Error::Config(format!("invalid corpus id {:?}", c.id)));
            }
            if !ids.insert(c.id.as_str()) {
                return Err(Error::Config(format!("duplicate corpus id {:?}", c.id)));
            }
            if c.inputs.is_empty() {
                return Err(Error::Config(format!("corpus {:?} has no inputs", c.id)));
            }
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        self.train.validate()
    }

    pub fn has_both_cultures(&self) -> bool {
        let groups: BTreeSet<CultureGroup> = self.corpora.iter().map(|c| c.culture).collect();
        groups.len() == 2
    }

    /// Training parameters with the run-level seed applied.
    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            seed: self.seed.unwrap_or(self.train.seed),
            ..self.train.clone()
        }
    }
}
