//! Per-category lexica of frequent unigrams and bigrams.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{CategoryId, CategorySet};
use crate::preprocess::PreprocessedText;

pub const DEFAULT_UNIGRAM_MIN: usize = 5;
pub const DEFAULT_BIGRAM_MIN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconThresholds {
    pub unigram_min: usize,
    pub bigram_min: usize,
}

impl Default for LexiconThresholds {
    fn default() -> Self {
        LexiconThresholds {
            unigram_min: DEFAULT_UNIGRAM_MIN,
            bigram_min: DEFAULT_BIGRAM_MIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryLexicon {
    pub unigrams: BTreeSet<String>,
    pub bigrams: BTreeSet<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Indexed by `CategoryId`.
    pub per_category: Vec<CategoryLexicon>,
    pub thresholds: LexiconThresholds,
}

impl Lexicon {
    pub fn category(&self, id: CategoryId) -> &CategoryLexicon {
        &self.per_category[id.index()]
    }

    pub fn len(&self) -> usize {
        self.per_category.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_category.is_empty()
    }
}

/// Alphabetic-only, lowercase, multi-letter terms of the content tokens.
/// Placeholders and name tags are dropped, so neighbours across them become adjacent.
pub fn lexical_terms(text: &PreprocessedText) -> Vec<String> {
    text.content_tokens()
        .filter_map(|t| {
            let term: String = t.chars().filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect();
            (term.chars().count() > 1).then_some(term)
        })
        .collect()
}

pub fn build_lexica<'a, I>(train: I, categories: &CategorySet, thresholds: LexiconThresholds) -> Lexicon
where
    I: IntoIterator<Item = (&'a PreprocessedText, CategoryId)>,
{
    type Counts = (HashMap<String, usize>, HashMap<(String, String), usize>);
    let mut counts: Vec<Counts> = vec![Default::default(); categories.len()];
    for (text, category) in train {
        let (unigrams, bigrams) = &mut counts[category.index()];
        let terms = lexical_terms(text);
        for t in &terms {
            *unigrams.entry(t.clone()).or_default() += 1;
        }
        for pair in terms.windows(2) {
            *bigrams.entry((pair[0].clone(), pair[1].clone())).or_default() += 1;
        }
    }
    let per_category = counts
        .into_iter()
        .map(|(unigrams, bigrams)| CategoryLexicon {
            unigrams: unigrams
                .into_iter()
                .filter(|(_, n)| *n >= thresholds.unigram_min)
                .map(|(w, _)| w)
                .collect(),
            bigrams: bigrams
                .into_iter()
                .filter(|(_, n)| *n >= thresholds.bigram_min)
                .map(|(b, _)| b)
                .collect(),
        })
        .collect();
    Lexicon {
        per_category,
        thresholds,
    }
}

/// `(unigram hits, bigram hits)` per category, counted with multiplicity.
pub fn lexicon_counts(text: &PreprocessedText, lexicon: &Lexicon) -> Vec<(u32, u32)> {
    let terms = lexical_terms(text);
    lexicon
        .per_category
        .iter()
        .map(|lex| {
            let uni = terms.iter().filter(|t| lex.unigrams.contains(*t)).count();
            let bi = terms
                .windows(2)
                .filter(|p| lex.bigrams.contains(&(p[0].clone(), p[1].clone())))
                .count();
            (uni as u32, bi as u32)
        })
        .collect()
}
