//! Exact Jaccard near-duplicate detection over token-set signatures.
//!
//! Training records that closely match an already retained record of the
//! same category are skipped. At inference, a query that closely matches
//! any retained record takes that record's category without reaching the
//! SVM.

use serde::{Deserialize, Serialize};

use crate::corpus::CategoryId;
use crate::error::{Error, Result};
use crate::preprocess::PreprocessedText;

pub const DEFAULT_THRESHOLD: f64 = 0.85;

/// Marker standing for "some proper name was present".
pub const NAME_MARKER: &str = "#PN#";

/// Sorted, deduplicated set of lowercase content tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SetSignature(Vec<String>);

impl SetSignature {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v: Vec<String> = tokens.into_iter().map(Into::into).collect();
        v.sort_unstable();
        v.dedup();
        SetSignature(v)
    }

    pub fn of(text: &PreprocessedText) -> Self {
        let marker = text.has_name_tag().then(|| NAME_MARKER.to_string());
        SetSignature::from_tokens(text.content_tokens().map(str::to_lowercase).chain(marker))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `|a ∩ b| / |a ∪ b|`; two empty sets have similarity 1.
pub fn jaccard(a: &SetSignature, b: &SetSignature) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (x, y) = (&a.0, &b.0);
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    common as f64 / (x.len() + y.len() - common) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub signature: SetSignature,
    pub category: CategoryId,
    pub insertion_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    /// Skipped as a near-duplicate of the entry with this insertion index.
    Skipped(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstStage {
    Hit {
        category: CategoryId,
        similarity: f64,
        insertion_index: u64,
    },
    Miss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStore {
    entries: Vec<StoreEntry>,
    threshold: f64,
}

impl SimilarityStore {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Config(format!(
                "similarity threshold must lie in (0, 1], got {threshold}"
            )));
        }
        Ok(SimilarityStore {
            entries: Vec::new(),
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends `sig` unless a stored entry of the same category exceeds the
    /// threshold. Near-duplicates from other categories are always kept.
    pub fn admit_training(&mut self, sig: SetSignature, category: CategoryId) -> Admission {
        let duplicate = self
            .entries
            .iter()
            .find(|e| e.category == category && jaccard(&e.signature, &sig) > self.threshold);
        if let Some(e) = duplicate {
            return Admission::Skipped(e.insertion_index);
        }
        let insertion_index = self.entries.len() as u64;
        self.entries.push(StoreEntry {
            signature: sig,
            category,
            insertion_index,
        });
        Admission::Admitted
    }

    /// Best entry strictly above the threshold; ties go to the earliest insertion.
    pub fn first_stage(&self, sig: &SetSignature) -> FirstStage {
        let mut best: Option<(f64, &StoreEntry)> = None;
        for e in &self.entries {
            let s = jaccard(&e.signature, sig);
            if s > self.threshold && best.is_none_or(|(b, _)| s > b) {
                best = Some((s, e));
            }
        }
        match best {
            Some((similarity, e)) => FirstStage::Hit {
                category: e.category,
                similarity,
                insertion_index: e.insertion_index,
            },
            None => FirstStage::Miss,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::GazetteerConfig;
    use proptest::prelude::*;

    fn sig(words: &[&str]) -> SetSignature {
        SetSignature::from_tokens(words.iter().copied())
    }

    fn numbered(prefix: &str, range: std::ops::Range<usize>) -> Vec<String> {
        range.map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn jaccard_examples() {
        let a = sig(&["compra", "supermercado"]);
        assert_eq!(jaccard(&a, &a), 1.0);
        assert_eq!(jaccard(&sig(&["compra"]), &sig(&["pago"])), 0.0);
        let x = sig(&["compra", "supermercado", "madrid"]);
        let y = sig(&["compra", "supermercado", "vigo"]);
        assert_eq!(jaccard(&x, &y), 0.5);
        assert_eq!(jaccard(&sig(&[]), &sig(&[])), 1.0);
        assert_eq!(jaccard(&sig(&[]), &sig(&["a"])), 0.0);
    }

    #[test]
    fn signature_from_text() {
        let g = GazetteerConfig::default();
        let t = crate::preprocess::preprocess("Compra en supermercado Elvira Diego COMPRA", &g);
        assert_eq!(SetSignature::of(&t), sig(&["#PN#", "compra", "supermercado"]));
    }

    #[test]
    fn admission_rules() {
        let mut store = SimilarityStore::new(DEFAULT_THRESHOLD).unwrap();
        let a = sig(&["compra", "supermercado", "carrefour"]);
        assert_eq!(store.admit_training(a.clone(), CategoryId(0)), Admission::Admitted);
        assert_eq!(store.admit_training(a.clone(), CategoryId(0)), Admission::Skipped(0));
        assert_eq!(store.len(), 1);

        // 19 shared tokens plus one private token each: 19/21 > 0.9.
        let shared = numbered("w", 0..19);
        let mut b: Vec<String> = shared.clone();
        b.push("only_b".into());
        let mut c = shared;
        c.push("only_c".into());
        let (b, c) = (SetSignature::from_tokens(b), SetSignature::from_tokens(c));
        assert!((jaccard(&b, &c) - 19.0 / 21.0).abs() < 1e-12);
        assert!(jaccard(&b, &c) > 0.9);
        assert_eq!(store.admit_training(b, CategoryId(1)), Admission::Admitted);
        assert_eq!(store.admit_training(c, CategoryId(2)), Admission::Admitted);
    }

    #[test]
    fn first_stage_routes() {
        let mut store = SimilarityStore::new(DEFAULT_THRESHOLD).unwrap();
        let a = sig(&["recibo", "orange", "espagne"]);
        store.admit_training(a.clone(), CategoryId(3));
        assert_eq!(
            store.first_stage(&a),
            FirstStage::Hit {
                category: CategoryId(3),
                similarity: 1.0,
                insertion_index: 0
            }
        );
        assert_eq!(store.first_stage(&sig(&["nomina"])), FirstStage::Miss);
    }

    #[test]
    fn tie_goes_to_earliest_entry() {
        // Query has 19 tokens; each entry adds one private token: 19/20 = 0.95.
        let base = numbered("t", 0..19);
        let mut e1 = base.clone();
        e1.push("x".into());
        let mut e2 = base.clone();
        e2.push("y".into());
        let mut store = SimilarityStore::new(DEFAULT_THRESHOLD).unwrap();
        store.admit_training(SetSignature::from_tokens(e1), CategoryId(5));
        store.admit_training(SetSignature::from_tokens(e2), CategoryId(2));
        assert_eq!(store.len(), 2);
        match store.first_stage(&SetSignature::from_tokens(base)) {
            FirstStage::Hit {
                category,
                similarity,
                insertion_index,
            } => {
                assert_eq!(category, CategoryId(5));
                assert_eq!(insertion_index, 0);
                assert!((similarity - 0.95).abs() < 1e-12);
            }
            FirstStage::Miss => panic!("expected a hit"),
        }
    }

    #[test]
    fn threshold_is_strict() {
        // 17 of 20 tokens shared with a 17-token query: exactly 0.85.
        let entry = numbered("t", 0..20);
        let query = numbered("t", 0..17);
        let mut store = SimilarityStore::new(DEFAULT_THRESHOLD).unwrap();
        store.admit_training(SetSignature::from_tokens(entry), CategoryId(0));
        let q = SetSignature::from_tokens(query);
        assert_eq!(jaccard(&store.entries()[0].signature, &q), 0.85);
        assert_eq!(store.first_stage(&q), FirstStage::Miss);
    }

    #[test]
    fn bad_thresholds() {
        assert!(SimilarityStore::new(0.0).is_err());
        assert!(SimilarityStore::new(1.5).is_err());
        assert!(SimilarityStore::new(1.0).is_ok());
    }

    fn small_set() -> impl Strategy<Value = SetSignature> {
        prop::collection::vec(0u8..12, 0..8)
            .prop_map(|v| SetSignature::from_tokens(v.into_iter().map(|i| format!("w{i}"))))
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric_and_bounded(a in small_set(), b in small_set()) {
            let ab = jaccard(&a, &b);
            prop_assert_eq!(ab, jaccard(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }

        #[test]
        fn replaying_admitted_stream_skips_everything(
            stream in prop::collection::vec((small_set(), 0u16..3), 0..30)
        ) {
            let mut store = SimilarityStore::new(DEFAULT_THRESHOLD).unwrap();
            for (s, c) in &stream {
                store.admit_training(s.clone(), CategoryId(*c));
            }
            let admitted: Vec<StoreEntry> = store.entries().to_vec();
            for e in admitted {
                let before = store.len();
                prop_assert!(matches!(store.admit_training(e.signature, e.category), Admission::Skipped(_)));
                prop_assert_eq!(store.len(), before);
            }
        }
    }
}
