//! Macro-averaged precision/recall/F and repeated random-split experiments.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::corpus::{split_dataset, CategoryId, CategorySet, Dataset};
use crate::error::{Error, Result};
use crate::exec;
use crate::features::FeatureGroups;
use crate::pipeline::{classify_batch, train_pipeline};
use crate::preprocess::GazetteerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ClassCounts {
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Indexed by `CategoryId`.
    pub per_class: Vec<ClassCounts>,
    pub total: u64,
}

/// One-vs-rest counts for every category.
pub fn confusion(predictions: &[CategoryId], gold: &[CategoryId], categories: &CategorySet) -> Result<ConfusionCounts> {
    if predictions.len() != gold.len() {
        return Err(Error::LengthMismatch(predictions.len(), gold.len()));
    }
    let k = categories.len();
    if let Some(bad) = predictions.iter().chain(gold).find(|c| c.index() >= k) {
        return Err(Error::Config(format!("label {bad} outside the category set")));
    }
    let total = gold.len() as u64;
    let mut per_class = vec![ClassCounts::default(); k];
    for (p, g) in predictions.iter().zip(gold) {
        if p == g {
            per_class[p.index()].tp += 1;
        } else {
            per_class[p.index()].fp += 1;
            per_class[g.index()].fn_ += 1;
        }
    }
    for c in &mut per_class {
        c.tn = total - c.tp - c.fp - c.fn_;
    }
    Ok(ConfusionCounts { per_class, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub class_count: usize,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class metrics (0 on a zero denominator) and their unweighted means
/// over all classes, including classes without support.
pub fn metrics(counts: &ConfusionCounts) -> MetricsReport {
    let per_class: Vec<ClassMetrics> = counts
        .per_class
        .iter()
        .map(|c| {
            let precision = ratio(c.tp, c.tp + c.fp);
            let recall = ratio(c.tp, c.tp + c.fn_);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support: c.support(),
            }
        })
        .collect();
    let k = per_class.len();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if k == 0 {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / k as f64
        }
    };
    MetricsReport {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        class_count: k,
        per_class,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub splits: Vec<f64>,
    pub samplings: usize,
    pub stages: Vec<FeatureGroups>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            splits: vec![0.3, 0.4, 0.6, 0.7],
            samplings: 5,
            stages: FeatureGroups::default_stages(),
            seed: 0,
        }
    }
}

/// Result of one (split, sampling, stage) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub split: f64,
    pub sampling: usize,
    pub stage: FeatureGroups,
    pub train: usize,
    pub admitted: usize,
    pub test: usize,
    pub reduction: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub similarity_hits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and sample standard deviation (0 for fewer than two values).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanSd { mean: 0.0, sd: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub split: f64,
    pub stage: FeatureGroups,
    pub precision: MeanSd,
    pub recall: MeanSd,
    pub f1: MeanSd,
    pub reduction: f64,
    pub train: f64,
    pub admitted: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub config: Config,
    pub experiment: ExperimentConfig,
    pub rows: Vec<ExperimentRow>,
    pub cells: Vec<CellResult>,
}

impl ExperimentTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "split\tstage\tp_macro\tp_sd\tr_macro\tr_sd\tf_macro\tf_sd\treduction\ttrain\tadmitted\ttest\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{:.2}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.1}\t{:.1}\t{:.1}",
                r.split,
                r.stage,
                r.precision.mean,
                r.precision.sd,
                r.recall.mean,
                r.recall.sd,
                r.f1.mean,
                r.f1.sd,
                r.reduction,
                r.train,
                r.admitted,
                r.test,
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

fn sampling_seed(base: u64, split_index: usize, sampling: usize) -> u64 {
    base.wrapping_add((split_index as u64) << 32).wrapping_add(sampling as u64)
}

/// Repeated random subsampling: for every split and sampling the same
/// partition is evaluated under each feature stage.
pub fn run_experiment(
    dataset: &Dataset,
    gazetteer: &GazetteerConfig,
    config: &Config,
    experiment: &ExperimentConfig,
) -> Result<ExperimentTable> {
    config.validate()?;
    if experiment.samplings == 0 || experiment.splits.is_empty() || experiment.stages.is_empty() {
        return Err(Error::Config("experiment needs at least one split, sampling and stage".into()));
    }
    if let Some(r) = dataset.records.iter().find(|r| r.category.is_none()) {
        return Err(Error::MissingLabel(r.id.clone()));
    }
    let jobs: Vec<(usize, f64, usize)> = experiment
        .splits
        .iter()
        .enumerate()
        .flat_map(|(si, &f)| (0..experiment.samplings).map(move |s| (si, f, s)))
        .collect();
    let per_job: Vec<Vec<CellResult>> = exec::try_map(&jobs, |&(si, split, sampling)| {
        let (train, test) = split_dataset(dataset, split, sampling_seed(experiment.seed, si, sampling))?;
        let gold: Vec<CategoryId> = test.records.iter().map(|r| r.category.expect("labeled")).collect();
        experiment
            .stages
            .iter()
            .map(|stage| {
                let mut cfg = config.clone();
                cfg.features.groups = stage.clone();
                let (bundle, report) = train_pipeline(&train, gazetteer, &cfg)?;
                let out = classify_batch(&bundle, gazetteer, &test.records)?;
                let predicted: Vec<CategoryId> = out.iter().map(|c| c.category).collect();
                let m = metrics(&confusion(&predicted, &gold, &dataset.categories)?);
                Ok(CellResult {
                    split,
                    sampling,
                    stage: stage.clone(),
                    train: train.len(),
                    admitted: report.admitted,
                    test: test.len(),
                    reduction: report.reduction(),
                    macro_precision: m.macro_precision,
                    macro_recall: m.macro_recall,
                    macro_f1: m.macro_f1,
                    similarity_hits: out
                        .iter()
                        .filter(|c| c.stage == crate::pipeline::Stage::SimilarityHit)
                        .count(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let cells: Vec<CellResult> = per_job.into_iter().flatten().collect();

    let mut rows = Vec::new();
    for &split in &experiment.splits {
        for stage in &experiment.stages {
            let group: Vec<&CellResult> = cells.iter().filter(|c| c.split == split && &c.stage == stage).collect();
            let pick = |f: fn(&CellResult) -> f64| group.iter().map(|c| f(c)).collect::<Vec<f64>>();
            rows.push(ExperimentRow {
                split,
                stage: stage.clone(),
                precision: MeanSd::of(&pick(|c| c.macro_precision)),
                recall: MeanSd::of(&pick(|c| c.macro_recall)),
                f1: MeanSd::of(&pick(|c| c.macro_f1)),
                reduction: MeanSd::of(&pick(|c| c.reduction)).mean,
                train: MeanSd::of(&pick(|c| c.train as f64)).mean,
                admitted: MeanSd::of(&pick(|c| c.admitted as f64)).mean,
                test: MeanSd::of(&pick(|c| c.test as f64)).mean,
            });
        }
    }
    Ok(ExperimentTable {
        config: config.clone(),
        experiment: experiment.clone(),
        rows,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[u16]) -> Vec<CategoryId> {
        v.iter().map(|&c| CategoryId(c)).collect()
    }

    fn cats(k: usize) -> CategorySet {
        CategorySet::new((0..k).map(|i| format!("c{i}"))).unwrap()
    }

    #[test]
    fn perfect_classifier() {
        let gold = ids(&[0, 1, 1, 2, 2, 2]);
        let c = confusion(&gold, &gold, &cats(3)).unwrap();
        for (i, cc) in c.per_class.iter().enumerate() {
            assert_eq!((cc.tp, cc.fp, cc.fn_), (i as u64 + 1, 0, 0));
        }
        let m = metrics(&c);
        assert_eq!((m.macro_precision, m.macro_recall, m.macro_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn swapped_pair() {
        let c = confusion(&ids(&[1, 0]), &ids(&[0, 1]), &cats(2)).unwrap();
        for cc in &c.per_class {
            assert_eq!((cc.tp, cc.fp, cc.fn_, cc.tn), (0, 1, 1, 0));
        }
    }

    #[test]
    fn hand_tally() {
        let c = confusion(&ids(&[0, 1, 1, 1]), &ids(&[0, 0, 1, 2]), &cats(3)).unwrap();
        let [a, b, cc] = [c.per_class[0], c.per_class[1], c.per_class[2]];
        assert_eq!((a.tp, a.fn_), (1, 1));
        assert_eq!((b.fp, b.tp), (2, 1));
        assert_eq!((cc.fn_, cc.fp), (1, 0));
    }

    #[test]
    fn metric_values_and_conventions() {
        let counts = ConfusionCounts {
            per_class: vec![
                ClassCounts { tp: 1, fp: 1, tn: 0, fn_: 0 },
                ClassCounts { tp: 0, fp: 0, tn: 2, fn_: 0 },
            ],
            total: 2,
        };
        let m = metrics(&counts);
        assert_eq!(m.per_class[0].precision, 0.5);
        assert_eq!(m.per_class[0].recall, 1.0);
        assert!((m.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((m.per_class[1].precision, m.per_class[1].recall, m.per_class[1].f1), (0.0, 0.0, 0.0));
        assert!((m.macro_f1 - 1.0 / 3.0).abs() < 1e-15);

        let twice = ConfusionCounts {
            per_class: vec![counts.per_class[0]; 2],
            total: 2,
        };
        assert!((metrics(&twice).macro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(confusion(&ids(&[0]), &ids(&[0, 1]), &cats(2)), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn mean_sd() {
        assert_eq!(MeanSd::of(&[0.5]), MeanSd { mean: 0.5, sd: 0.0 });
        let m = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert_eq!((m.mean, m.sd), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn macro_is_mean_of_classes(pairs in prop::collection::vec((0u16..4, 0u16..4), 0..30)) {
            let (p, g): (Vec<u16>, Vec<u16>) = pairs.into_iter().unzip();
            let m = metrics(&confusion(&ids(&p), &ids(&g), &cats(4)).unwrap());
            let k = m.per_class.len() as f64;
            prop_assert_eq!(m.macro_precision, m.per_class.iter().map(|c| c.precision).sum::<f64>() / k);
            prop_assert_eq!(m.macro_f1, m.per_class.iter().map(|c| c.f1).sum::<f64>() / k);
            for c in &m.per_class {
                prop_assert!((0.0..=1.0).contains(&c.precision) && (0.0..=1.0).contains(&c.recall) && (0.0..=1.0).contains(&c.f1));
            }
        }
    }
}
