//! Feature space: lexicon hit counts, amount buckets and sign, end-of-month
//! date indicators, and L2-normalised word and character n-gram counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::{CategorySet, TransactionRecord};
use crate::error::{Error, Result};
use crate::lexicon::{lexicon_counts, Lexicon};
use crate::preprocess::PreprocessedText;

pub const DEFAULT_AMOUNT_EDGES: [f64; 6] = [20.0, 60.0, 200.0, 800.0, 1500.0, 3000.0];
pub const DEFAULT_DATE_WINDOWS: [u32; 4] = [5, 10, 20, 25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    Lexica,
    Amount,
    Date,
    WordNgrams,
    CharNgrams,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::WordNgrams,
        FeatureGroup::Lexica,
        FeatureGroup::Amount,
        FeatureGroup::Date,
        FeatureGroup::CharNgrams,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Lexica => "lex",
            FeatureGroup::Amount => "amount",
            FeatureGroup::Date => "date",
            FeatureGroup::WordNgrams => "word",
            FeatureGroup::CharNgrams => "char",
        }
    }
}

/// A set of enabled feature groups. Word n-grams are always part of a valid set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureGroups(BTreeSet<FeatureGroup>);

impl FeatureGroups {
    pub fn new(groups: impl IntoIterator<Item = FeatureGroup>) -> Result<Self> {
        let set: BTreeSet<FeatureGroup> = groups.into_iter().collect();
        if !set.contains(&FeatureGroup::WordNgrams) {
            return Err(Error::Config("feature groups must include word n-grams".into()));
        }
        Ok(FeatureGroups(set))
    }

    pub fn all() -> Self {
        FeatureGroups(FeatureGroup::ALL.into_iter().collect())
    }

    pub fn contains(&self, g: FeatureGroup) -> bool {
        self.0.contains(&g)
    }

    /// The four incremental stages of the ablation protocol.
    pub fn default_stages() -> Vec<FeatureGroups> {
        use FeatureGroup::*;
        [
            &[WordNgrams][..],
            &[WordNgrams, Lexica],
            &[WordNgrams, Lexica, Amount, Date],
            &[WordNgrams, Lexica, Amount, Date, CharNgrams],
        ]
        .iter()
        .map(|g| FeatureGroups(g.iter().copied().collect()))
        .collect()
    }
}

impl Default for FeatureGroups {
    fn default() -> Self {
        FeatureGroups::all()
    }
}

impl fmt::Display for FeatureGroups {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == FeatureGroups::all() {
            return f.write_str("all");
        }
        let names: Vec<&str> = FeatureGroup::ALL
            .iter()
            .filter(|g| self.contains(**g))
            .map(|g| g.name())
            .collect();
        f.write_str(&names.join("+"))
    }
}

/// Parses `all` or `+`-joined group names: `word`, `lex`, `amount`, `date`, `char`.
impl FromStr for FeatureGroups {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(FeatureGroups::all());
        }
        let mut groups = Vec::new();
        for part in s.split('+').map(str::trim) {
            let g = match part {
                "word" | "words" | "word_ngrams" => FeatureGroup::WordNgrams,
                "lex" | "lexica" | "lexicon" => FeatureGroup::Lexica,
                "amount" => FeatureGroup::Amount,
                "date" => FeatureGroup::Date,
                "char" | "chars" | "char_ngrams" => FeatureGroup::CharNgrams,
                "meta" => {
                    groups.push(FeatureGroup::Amount);
                    FeatureGroup::Date
                }
                other => return Err(Error::Config(format!("unknown feature group `{other}`"))),
            };
            groups.push(g);
        }
        FeatureGroups::new(groups)
    }
}

impl TryFrom<String> for FeatureGroups {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureGroups> for String {
    fn from(g: FeatureGroups) -> Self {
        g.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub word_ngram_orders: (usize, usize),
    pub char_ngram_orders: (usize, usize),
    pub amount_edges: Vec<f64>,
    pub date_windows: Vec<u32>,
    pub groups: FeatureGroups,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            word_ngram_orders: (1, 4),
            char_ngram_orders: (3, 5),
            amount_edges: DEFAULT_AMOUNT_EDGES.to_vec(),
            date_windows: DEFAULT_DATE_WINDOWS.to_vec(),
            groups: FeatureGroups::all(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let orders_ok = |(lo, hi): (usize, usize)| lo >= 1 && lo <= hi;
        if !orders_ok(self.word_ngram_orders) || !orders_ok(self.char_ngram_orders) {
            return Err(Error::Config("n-gram orders must satisfy 1 <= min <= max".into()));
        }
        let edges_ok = self.amount_edges.iter().all(|e| e.is_finite() && *e >= 0.0)
            && self.amount_edges.windows(2).all(|w| w[0] < w[1]);
        if !edges_ok {
            return Err(Error::Config("amount edges must be finite, non-negative and strictly ascending".into()));
        }
        if self.date_windows.iter().any(|w| *w == 0 || *w > 31) {
            return Err(Error::Config("date windows must lie in 1..=31".into()));
        }
        FeatureGroups::new(self.groups.0.iter().copied()).map(|_| ())
    }
}

/// Sparse `(index, weight)` pairs sorted by index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += w,
                _ => entries.push((i, w)),
            }
        }
        entries.retain(|p| p.1 != 0.0);
        FeatureVector { entries }
    }

    pub fn dense(values: &[f64]) -> Self {
        FeatureVector::from_pairs(values.iter().enumerate().map(|(i, v)| (i as u32, *v)).collect())
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |p| p.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    /// Largest index + 1, or 0 for the zero vector.
    pub fn min_dimension(&self) -> usize {
        self.entries.last().map_or(0, |p| p.0 as usize + 1)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| dense[i as usize] * w).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|p| p.1 * p.1).sum()
    }

    pub fn dot_sparse(&self, other: &FeatureVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// Contiguous word runs of every order in `orders` over the lowercase content tokens.
pub fn word_ngrams(text: &PreprocessedText, orders: (usize, usize)) -> Vec<String> {
    let words: Vec<String> = text.content_tokens().map(str::to_lowercase).collect();
    let mut grams = Vec::new();
    for n in orders.0..=orders.1 {
        grams.extend(words.windows(n).map(|w| w.join(" ")));
    }
    grams
}

/// Lowercase, punctuation to spaces, whitespace runs collapsed, ends trimmed.
pub fn char_ngram_source(raw: &str) -> Vec<char> {
    let spaced: String = raw
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let mut out: Vec<char> = Vec::with_capacity(spaced.len());
    for word in spaced.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars());
    }
    out
}

pub fn char_ngrams(raw: &str, orders: (usize, usize)) -> Vec<String> {
    let chars = char_ngram_source(raw);
    let mut grams = Vec::new();
    for n in orders.0..=orders.1 {
        grams.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
    }
    grams
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmountFeatures {
    /// Zero counts as income.
    pub is_income: bool,
    pub bucket: usize,
}

/// Bucket `i` covers `(edges[i-1], edges[i]]` over the absolute amount,
/// with the first bucket closed at zero and the last open-ended.
pub fn amount_features(amount: f64, edges: &[f64]) -> AmountFeatures {
    let magnitude = amount.abs();
    AmountFeatures {
        is_income: amount >= 0.0,
        bucket: edges.iter().filter(|e| magnitude > **e).count(),
    }
}

pub fn days_in_month(date: NaiveDate) -> u32 {
    let (y, m) = (date.year(), date.month());
    let next = if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1)
    };
    next.and_then(|d| d.pred_opt()).map_or(31, |d| d.day())
}

/// One indicator per window: is the date within the last `w` days of its month?
pub fn date_features(date: NaiveDate, windows: &[u32]) -> Vec<bool> {
    let dim = days_in_month(date);
    windows.iter().map(|w| date.day() + w > dim).collect()
}

/// Sorted term list with a lookup index.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_set(set: BTreeSet<String>) -> Self {
        Vocabulary::from(set.into_iter().collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(terms: Vec<String>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { terms, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.terms
    }
}

/// Frozen feature-space definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizerModel {
    pub word_vocab: Vocabulary,
    pub char_vocab: Vocabulary,
    pub lexicon: Lexicon,
    pub categories: CategorySet,
    pub config: FeatureConfig,
}

/// Half-open index ranges of each enabled group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Layout {
    pub lexica: (usize, usize),
    pub amount: (usize, usize),
    pub date: (usize, usize),
    pub word: (usize, usize),
    pub char: (usize, usize),
}

impl VectorizerModel {
    pub fn layout(&self) -> Layout {
        let groups = &self.config.groups;
        let mut at = 0;
        let mut take = |enabled: bool, len: usize| {
            let start = at;
            if enabled {
                at += len;
            }
            (start, at)
        };
        Layout {
            lexica: take(groups.contains(FeatureGroup::Lexica), 2 * self.categories.len()),
            amount: take(groups.contains(FeatureGroup::Amount), self.config.amount_edges.len() + 2),
            date: take(groups.contains(FeatureGroup::Date), self.config.date_windows.len()),
            word: take(groups.contains(FeatureGroup::WordNgrams), self.word_vocab.len()),
            char: take(groups.contains(FeatureGroup::CharNgrams), self.char_vocab.len()),
        }
    }

    pub fn dimension(&self) -> usize {
        self.layout().char.1
    }
}

/// Builds vocabularies over the training records. Indices follow sorted term order.
pub fn fit_vectorizer(
    train: &[(&TransactionRecord, &PreprocessedText)],
    lexicon: &Lexicon,
    categories: &CategorySet,
    config: &FeatureConfig,
) -> Result<VectorizerModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut words = BTreeSet::new();
    let mut chars = BTreeSet::new();
    for (record, text) in train {
        words.extend(word_ngrams(text, config.word_ngram_orders));
        if config.groups.contains(FeatureGroup::CharNgrams) {
            chars.extend(char_ngrams(&record.description, config.char_ngram_orders));
        }
    }
    Ok(VectorizerModel {
        word_vocab: Vocabulary::from_set(words),
        char_vocab: Vocabulary::from_set(chars),
        lexicon: lexicon.clone(),
        categories: categories.clone(),
        config: config.clone(),
    })
}

fn normalized_counts<I>(grams: I, vocab: &Vocabulary, offset: usize, out: &mut Vec<(u32, f64)>)
where
    I: IntoIterator<Item = String>,
{
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for g in grams {
        if let Some(i) = vocab.get(&g) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.extend(counts.into_iter().map(|(i, c)| ((offset + i as usize) as u32, c / norm)));
    }
}

pub fn vectorize(model: &VectorizerModel, record: &TransactionRecord, text: &PreprocessedText) -> FeatureVector {
    let layout = model.layout();
    let groups = &model.config.groups;
    let mut pairs = Vec::new();
    if groups.contains(FeatureGroup::Lexica) {
        for (c, (uni, bi)) in lexicon_counts(text, &model.lexicon).into_iter().enumerate() {
            pairs.push(((layout.lexica.0 + 2 * c) as u32, uni as f64));
            pairs.push(((layout.lexica.0 + 2 * c + 1) as u32, bi as f64));
        }
    }
    if groups.contains(FeatureGroup::Amount) {
        let a = amount_features(record.amount, &model.config.amount_edges);
        pairs.push(((layout.amount.0 + a.bucket) as u32, 1.0));
        if a.is_income {
            pairs.push(((layout.amount.1 - 1) as u32, 1.0));
        }
    }
    if groups.contains(FeatureGroup::Date) {
        for (i, on) in date_features(record.date, &model.config.date_windows).into_iter().enumerate() {
            if on {
                pairs.push(((layout.date.0 + i) as u32, 1.0));
            }
        }
    }
    normalized_counts(
        word_ngrams(text, model.config.word_ngram_orders),
        &model.word_vocab,
        layout.word.0,
        &mut pairs,
    );
    if groups.contains(FeatureGroup::CharNgrams) {
        normalized_counts(
            char_ngrams(&record.description, model.config.char_ngram_orders),
            &model.char_vocab,
            layout.char.0,
            &mut pairs,
        );
    }
    FeatureVector::from_pairs(pairs)
}
