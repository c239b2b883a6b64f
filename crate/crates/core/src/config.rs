//! Structured configuration (TOML). Every tunable default lives here.
//!
//! ```toml
//! [similarity]
//! threshold = 0.85
//!
//! [lexicon]
//! unigram_min = 5
//! bigram_min = 3
//!
//! [features]
//! word_ngram_orders = [1, 4]
//! char_ngram_orders = [3, 5]
//! amount_edges = [20.0, 60.0, 200.0, 800.0, 1500.0, 3000.0]
//! date_windows = [5, 10, 20, 25]
//! groups = "all"
//!
//! [svm]
//! c = 1.0
//! tolerance = 1e-4
//! max_epochs = 1000
//! seed = 0
//!
//! [gazetteer]
//! stopwords = "lists/stopwords.txt"   # optional, built-in list otherwise
//! names = "lists/names.txt"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::lexicon::LexiconThresholds;
use crate::preprocess::GazetteerConfig;
use crate::similarity::DEFAULT_THRESHOLD;
use crate::svm::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    pub threshold: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GazetteerPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub names: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub similarity: SimilarityConfig,
    pub lexicon: LexiconThresholds,
    pub features: FeatureConfig,
    pub svm: TrainConfig,
    pub gazetteer: GazetteerPaths,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Config::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.similarity.threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Config(format!("similarity.threshold must lie in (0, 1], got {t}")));
        }
        if self.lexicon.unigram_min == 0 || self.lexicon.bigram_min == 0 {
            return Err(Error::Config("lexicon thresholds must be positive".into()));
        }
        self.features.validate()?;
        self.svm.validate()
    }

    /// Loads the configured lists, falling back to the built-in Spanish ones.
    pub fn gazetteer(&self) -> Result<GazetteerConfig> {
        let default = GazetteerConfig::default();
        let read = |p: &Option<PathBuf>| p.as_ref().map(std::fs::read_to_string).transpose();
        let stopwords = read(&self.gazetteer.stopwords)?;
        let names = read(&self.gazetteer.names)?;
        Ok(match (stopwords, names) {
            (None, None) => default,
            (s, n) => GazetteerConfig::new(
                match &s {
                    Some(text) => lines(text),
                    None => default.stopwords().map(str::to_string).collect(),
                },
                match &n {
                    Some(text) => lines(text),
                    None => default.names().map(str::to_string).collect(),
                },
            ),
        })
    }
}

fn lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}
