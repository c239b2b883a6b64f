//! End-to-end training and two-stage classification.
//!
//! Training: preprocess → similarity admission (in dataset order) →
//! lexica and vocabularies over the admitted records → one-vs-one SVM.
//! Classification: a similarity hit answers directly, otherwise the SVM votes.

mod bundle;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::corpus::{CategoryId, Dataset, TransactionRecord};
use crate::error::{Error, Result};
use crate::exec;
use crate::features::{fit_vectorizer, vectorize, FeatureVector, VectorizerModel};
use crate::lexicon::{build_lexica, Lexicon};
use crate::preprocess::{preprocess, GazetteerConfig, GazetteerDigests, PreprocessedText};
use crate::similarity::{Admission, FirstStage, SetSignature, SimilarityStore};
use crate::svm::{predict, train_ovo, OvoModel};

pub use bundle::{load_bundle, read_bundle, save_bundle, write_bundle, FORMAT_VERSION, MAGIC};

/// Everything needed to classify a raw record.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub format_version: u32,
    pub gazetteer: GazetteerDigests,
    pub config: Config,
    pub store: SimilarityStore,
    pub vectorizer: VectorizerModel,
    pub ovo: OvoModel,
}

impl ModelBundle {
    pub fn lexicon(&self) -> &Lexicon {
        &self.vectorizer.lexicon
    }

    pub fn categories(&self) -> &crate::corpus::CategorySet {
        &self.vectorizer.categories
    }

    /// Names of the gazetteer lists whose content differs from training time.
    pub fn gazetteer_mismatches(&self, gazetteer: &GazetteerConfig) -> Vec<&'static str> {
        let now = gazetteer.digests();
        let mut stale = Vec::new();
        if now.stopwords != self.gazetteer.stopwords {
            stale.push("stopwords");
        }
        if now.names != self.gazetteer.names {
            stale.push("names");
        }
        stale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconSize {
    pub category: String,
    pub unigrams: usize,
    pub bigrams: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub total: usize,
    pub admitted: usize,
    pub skipped: usize,
    pub dimension: usize,
    pub lexicon_sizes: Vec<LexiconSize>,
}

impl TrainReport {
    /// Fraction of training records removed by the similarity detector.
    pub fn reduction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.skipped as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    SimilarityHit,
    SvmVote,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::SimilarityHit => "similarity",
            Stage::SvmVote => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub category: CategoryId,
    pub stage: Stage,
    /// Similarity for stage one, winning votes / (k − 1) for the SVM.
    pub confidence: f64,
}

fn check_training(train: &Dataset, config: &Config) -> Result<()> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(r) = train.records.iter().find(|r| r.category.is_none()) {
        return Err(Error::MissingLabel(r.id.clone()));
    }
    Ok(())
}

type Admitted<'a> = Vec<(&'a TransactionRecord, &'a PreprocessedText, CategoryId)>;

fn admit<'a>(train: &'a Dataset, texts: &'a [PreprocessedText], threshold: f64) -> Result<(SimilarityStore, Admitted<'a>)> {
    let mut store = SimilarityStore::new(threshold)?;
    let mut admitted = Vec::new();
    for (record, text) in train.records.iter().zip(texts) {
        let category = record.category.expect("checked labels");
        if store.admit_training(SetSignature::of(text), category) == Admission::Admitted {
            admitted.push((record, text, category));
        }
    }
    Ok((store, admitted))
}

/// Runs deduplication and lexicon induction only; returns the lexica and
/// the number of admitted records.
pub fn induce_lexicon(train: &Dataset, gazetteer: &GazetteerConfig, config: &Config) -> Result<(Lexicon, usize)> {
    check_training(train, config)?;
    let texts: Vec<PreprocessedText> = exec::map(&train.records, |r| preprocess(&r.description, gazetteer));
    let (_, admitted) = admit(train, &texts, config.similarity.threshold)?;
    let lexicon = build_lexica(admitted.iter().map(|(_, t, c)| (*t, *c)), &train.categories, config.lexicon);
    Ok((lexicon, admitted.len()))
}

pub fn train_pipeline(
    train: &Dataset,
    gazetteer: &GazetteerConfig,
    config: &Config,
) -> Result<(ModelBundle, TrainReport)> {
    check_training(train, config)?;
    let texts: Vec<PreprocessedText> = exec::map(&train.records, |r| preprocess(&r.description, gazetteer));
    let (store, admitted) = admit(train, &texts, config.similarity.threshold)?;

    let categories = &train.categories;
    let lexicon = build_lexica(admitted.iter().map(|(_, t, c)| (*t, *c)), categories, config.lexicon);
    let pairs: Vec<(&TransactionRecord, &PreprocessedText)> = admitted.iter().map(|(r, t, _)| (*r, *t)).collect();
    let vectorizer = fit_vectorizer(&pairs, &lexicon, categories, &config.features)?;
    let vectors: Vec<(FeatureVector, CategoryId)> =
        exec::map(&admitted, |(r, t, c)| (vectorize(&vectorizer, r, t), *c));
    let dimension = vectorizer.dimension();
    let ovo = train_ovo(&vectors, categories, dimension, &config.svm)?;

    log::debug!(
        "admitted {} of {} records, {} features",
        admitted.len(),
        train.len(),
        vectorizer.dimension()
    );
    let report = TrainReport {
        total: train.len(),
        admitted: admitted.len(),
        skipped: train.len() - admitted.len(),
        dimension,
        lexicon_sizes: categories
            .ids()
            .map(|c| LexiconSize {
                category: categories.label(c).to_string(),
                unigrams: lexicon.category(c).unigrams.len(),
                bigrams: lexicon.category(c).bigrams.len(),
            })
            .collect(),
    };
    let bundle = ModelBundle {
        format_version: FORMAT_VERSION,
        gazetteer: gazetteer.digests(),
        config: config.clone(),
        store,
        vectorizer,
        ovo,
    };
    Ok((bundle, report))
}

pub fn classify(bundle: &ModelBundle, gazetteer: &GazetteerConfig, record: &TransactionRecord) -> Result<Classification> {
    let text = preprocess(&record.description, gazetteer);
    if let FirstStage::Hit {
        category,
        similarity,
        ..
    } = bundle.store.first_stage(&SetSignature::of(&text))
    {
        return Ok(Classification {
            category,
            stage: Stage::SimilarityHit,
            confidence: similarity,
        });
    }
    let x = vectorize(&bundle.vectorizer, record, &text);
    let p = predict(&bundle.ovo, &x)?;
    let k = bundle.ovo.k();
    let confidence = if k > 1 {
        p.votes[p.category.index()] as f64 / (k - 1) as f64
    } else {
        1.0
    };
    Ok(Classification {
        category: p.category,
        stage: Stage::SvmVote,
        confidence,
    })
}

/// Classifies many records; output order follows input order.
pub fn classify_batch(
    bundle: &ModelBundle,
    gazetteer: &GazetteerConfig,
    records: &[TransactionRecord],
) -> Result<Vec<Classification>> {
    exec::try_map(records, |r| classify(bundle, gazetteer, r))
}
