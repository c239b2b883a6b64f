//! Transaction records, CSV ingestion, splits and synthetic corpora.

mod synth;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{generate_synthetic, CategoryTemplate, SynthConfig};

/// The fifteen categories of the reference banking dataset, in canonical order.
pub const DEFAULT_CATEGORIES: [&str; 15] = [
    "Bank",
    "Means of transport",
    "Shopping",
    "Household expenses",
    "Taxes and charges",
    "Off-cycle income",
    "Payroll",
    "Leisure",
    "Health, sport and education",
    "Insurances",
    "Social security, grants and pensions",
    "Transfers",
    "Business and professional expenses",
    "Rentals",
    "Others",
];

/// Index of a label inside a [`CategorySet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CategoryId(pub u16);

impl CategoryId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered set of distinct category labels. The order is part of every
/// trained artifact and must not change between training and inference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct CategorySet {
    labels: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, CategoryId>,
}

impl CategorySet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Config("category set is empty".into()));
        }
        if labels.len() > u16::MAX as usize {
            return Err(Error::Config("too many categories".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(Error::Config("empty category label".into()));
            }
            if index.insert(label.clone(), CategoryId(i as u16)).is_some() {
                return Err(Error::Config(format!("duplicate category label `{label}`")));
            }
        }
        Ok(CategorySet { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<CategoryId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: CategoryId) -> &str {
        &self.labels[id.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ids(&self) -> impl Iterator<Item = CategoryId> {
        (0..self.labels.len() as u16).map(CategoryId)
    }
}

impl Default for CategorySet {
    fn default() -> Self {
        CategorySet::new(DEFAULT_CATEGORIES).expect("default categories are valid")
    }
}

impl TryFrom<Vec<String>> for CategorySet {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        CategorySet::new(labels)
    }
}

impl From<CategorySet> for Vec<String> {
    fn from(set: CategorySet) -> Self {
        set.labels
    }
}

/// One banking transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub id: String,
    pub description: String,
    /// Signed amount in euros; negative values are expenses.
    pub amount: f64,
    pub date: NaiveDate,
    pub category: Option<CategoryId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<TransactionRecord>,
    pub categories: CategorySet,
}

impl Dataset {
    pub fn new(records: Vec<TransactionRecord>, categories: CategorySet) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.id.is_empty() {
                return Err(Error::Config("record with empty id".into()));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Config(format!("duplicate record id `{}`", r.id)));
            }
            if !r.amount.is_finite() {
                return Err(Error::Config(format!("record `{}` has non-finite amount", r.id)));
            }
            if let Some(c) = r.category {
                if c.index() >= categories.len() {
                    return Err(Error::Config(format!("record `{}` has unknown category", r.id)));
                }
            }
        }
        Ok(Dataset {
            records,
            categories,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.records.iter().all(|r| r.category.is_some())
    }

    /// Records per category, indexed by `CategoryId`.
    pub fn category_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.categories.len()];
        for r in &self.records {
            if let Some(c) = r.category {
                counts[c.index()] += 1;
            }
        }
        counts
    }
}

const REQUIRED_COLUMNS: [&str; 4] = ["id", "description", "amount", "date"];

/// Loads a `;`-separated dataset file.
pub fn load_dataset(path: impl AsRef<Path>, categories: &CategorySet) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, categories)
}

pub fn read_dataset<R: Read>(reader: R, categories: &CategorySet) -> Result<Dataset> {
    let mut records = Vec::new();
    for row in RecordReader::new(reader, categories)? {
        records.push(row?);
    }
    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Config(format!("duplicate record id `{}`", r.id)));
        }
    }
    Ok(Dataset {
        records,
        categories: categories.clone(),
    })
}

/// Streaming reader over the rows of a dataset file.
pub struct RecordReader<'a, R: Read> {
    rows: csv::StringRecordsIntoIter<R>,
    categories: &'a CategorySet,
    columns: [usize; 4],
    category_column: Option<usize>,
}

impl<'a, R: Read> RecordReader<'a, R> {
    pub fn new(reader: R, categories: &'a CategorySet) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .delimiter(b';')
            .flexible(true)
            .from_reader(reader);
        let headers = csv.headers()?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
        };
        let mut columns = [0; 4];
        for (slot, name) in columns.iter_mut().zip(REQUIRED_COLUMNS) {
            *slot = find(name).ok_or_else(|| Error::Schema(name.to_string()))?;
        }
        Ok(RecordReader {
            category_column: find("category"),
            rows: csv.into_records(),
            categories,
            columns,
        })
    }

    fn parse(&self, row: &csv::StringRecord) -> Result<TransactionRecord> {
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let [id_col, desc_col, amount_col, date_col] = self.columns;
        let id = field(id_col).trim();
        if id.is_empty() {
            return Err(Error::row(line, "empty id"));
        }
        let amount = parse_amount(field(amount_col))
            .ok_or_else(|| Error::row(line, format!("unparsable amount `{}`", field(amount_col))))?;
        let date = parse_date(field(date_col))
            .ok_or_else(|| Error::row(line, format!("unparsable date `{}`", field(date_col))))?;
        let category = match self.category_column.map(field).map(str::trim) {
            None | Some("") => None,
            Some(label) => Some(self.categories.id(label).ok_or_else(|| Error::UnknownLabel {
                line,
                label: label.to_string(),
            })?),
        };
        Ok(TransactionRecord {
            id: id.to_string(),
            description: field(desc_col).to_string(),
            amount,
            date,
            category,
        })
    }
}

impl<R: Read> Iterator for RecordReader<'_, R> {
    type Item = Result<TransactionRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = self.rows.next()?;
        Some(row.map_err(Error::from).and_then(|row| self.parse(&row)))
    }
}

/// Parses `-42,29`, `-42.29`, `1.234,56 €` and similar.
pub fn parse_amount(raw: &str) -> Option<f64> {
    let cleaned: String = raw
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '€')
        .collect();
    if cleaned.is_empty() {
        return None;
    }
    let normalized = match (cleaned.rfind(','), cleaned.rfind('.')) {
        (Some(c), Some(d)) if c > d => cleaned.replace('.', "").replace(',', "."),
        (Some(_), Some(_)) => cleaned.replace(',', ""),
        (Some(_), None) => cleaned.replace(',', "."),
        _ => cleaned,
    };
    let bytes_ok = normalized
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+'));
    if !bytes_ok {
        return None;
    }
    normalized.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Accepts `YYYY-MM-DD` optionally followed by `T` or a space and a time.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    let date_part = raw.split(['T', ' ']).next()?;
    NaiveDate::parse_from_str(date_part, "%Y-%m-%d").ok()
}

pub fn format_amount(amount: f64) -> String {
    format!("{amount:.2}")
}

/// Writes a dataset in the same format [`read_dataset`] accepts.
pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().delimiter(b';').from_writer(writer);
    out.write_record(["id", "description", "amount", "date", "category"])?;
    for r in &dataset.records {
        let label = r.category.map_or("", |c| dataset.categories.label(c));
        out.write_record([
            r.id.as_str(),
            r.description.as_str(),
            &format_amount(r.amount),
            &r.date.format("%Y-%m-%d").to_string(),
            label,
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Number of training records for a split: `round(fraction * n)`.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    (train_fraction * n as f64).round() as usize
}

/// Uniform random partition into train and test. Both halves keep the
/// original relative record order.
pub fn split_dataset(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..train_size(n, train_fraction)] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, keep) in dataset.records.iter().zip(in_train) {
        if keep {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    let categories = dataset.categories.clone();
    Ok((
        Dataset {
            records: train,
            categories: categories.clone(),
        },
        Dataset {
            records: test,
            categories,
        },
    ))
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "id;description;amount;date;category\n";

    fn read(text: &str) -> Result<Dataset> {
        read_dataset(text.as_bytes(), &CategorySet::default())
    }

    fn toy(n: usize) -> Dataset {
        let records = (0..n)
            .map(|i| TransactionRecord {
                id: format!("r{i}"),
                description: format!("compra {i}"),
                amount: -1.0,
                date: NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(),
                category: Some(CategoryId(0)),
            })
            .collect();
        Dataset::new(records, CategorySet::default()).unwrap()
    }

    #[test]
    fn loads_reference_row() {
        let d = read(&format!(
            "{HEADER}59da944c5858aa32256f883a;Recibo ORANGE ESPAGNE S.A.U;-42,29;2017-09-28;Household expenses\n"
        ))
        .unwrap();
        assert_eq!(d.len(), 1);
        let r = &d.records[0];
        assert_eq!(r.amount, -42.29);
        assert_eq!(r.description, "Recibo ORANGE ESPAGNE S.A.U");
        assert_eq!(d.categories.label(r.category.unwrap()), "Household expenses");
        assert_eq!(r.date, NaiveDate::from_ymd_opt(2017, 9, 28).unwrap());
    }

    #[test]
    fn header_only_is_empty() {
        assert!(read(HEADER).unwrap().is_empty());
    }

    #[test]
    fn bad_amount_reports_line() {
        let err = read(&format!("{HEADER}a;x;1,00;2018-01-01;Bank\nb;y;abc;2018-01-01;Bank\n")).unwrap_err();
        match err {
            Error::Row { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_date_reports_line() {
        let err = read(&format!("{HEADER}a;x;1,00;28/09/2017;Bank\n")).unwrap_err();
        assert!(matches!(err, Error::Row { line: 2, .. }));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let err = read("id;description;date\n").unwrap_err();
        assert!(matches!(err, Error::Schema(ref c) if c == "amount"));
    }

    #[test]
    fn unknown_label() {
        let err = read(&format!("{HEADER}a;x;1;2018-01-01;Groceries\n")).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { line: 2, .. }));
    }

    #[test]
    fn unlabeled_file_and_timestamps() {
        let d = read("id;description;amount;date\na;\"Compra; con punto y coma\";100,00 €;2017-10-05T02:00:00+02:00\n").unwrap();
        let r = &d.records[0];
        assert_eq!(r.category, None);
        assert_eq!(r.amount, 100.0);
        assert_eq!(r.description, "Compra; con punto y coma");
        assert_eq!(r.date, NaiveDate::from_ymd_opt(2017, 10, 5).unwrap());
    }

    #[test]
    fn amount_formats() {
        assert_eq!(parse_amount("-42,29"), Some(-42.29));
        assert_eq!(parse_amount("-42.29"), Some(-42.29));
        assert_eq!(parse_amount("1.234,56 €"), Some(1234.56));
        assert_eq!(parse_amount("1,234.56"), Some(1234.56));
        assert_eq!(parse_amount("0"), Some(0.0));
        assert_eq!(parse_amount("abc"), None);
        assert_eq!(parse_amount("inf"), None);
        assert_eq!(parse_amount(""), None);
    }

    #[test]
    fn category_set_rejects_duplicates() {
        assert!(CategorySet::new(["a", "b", "a"]).is_err());
        assert_eq!(CategorySet::default().len(), 15);
    }

    #[test]
    fn split_ten_records() {
        let d = toy(10);
        let (train, test) = split_dataset(&d, 0.7, 3).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
        let again = split_dataset(&d, 0.7, 3).unwrap();
        assert_eq!(train, again.0);
        assert_eq!(test, again.1);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(matches!(split_dataset(&toy(0), 0.5, 1), Err(Error::EmptyDataset)));
        assert!(split_dataset(&toy(3), 0.0, 1).is_err());
        assert!(split_dataset(&toy(3), 1.0, 1).is_err());
    }

    #[test]
    fn reference_split_size() {
        assert_eq!(train_size(30_844, 0.7), 21_591);
    }

    #[test]
    fn write_then_read() {
        let d = toy(4);
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert_eq!(read_dataset(buf.as_slice(), &d.categories).unwrap(), d);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..60, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let d = toy(n);
            let (train, test) = split_dataset(&d, frac, seed).unwrap();
            prop_assert_eq!(train.len(), train_size(n, frac));
            let mut ids: Vec<&str> = train.records.iter().chain(&test.records).map(|r| r.id.as_str()).collect();
            ids.sort();
            let mut expected: Vec<&str> = d.records.iter().map(|r| r.id.as_str()).collect();
            expected.sort();
            prop_assert_eq!(ids, expected);
        }
    }
}
