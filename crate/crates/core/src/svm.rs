//! Soft-margin linear SVM.
//!
//! Binary problems minimise `½‖w‖² + C·Σ max(0, 1 − yᵢ(w·xᵢ + b))` with an
//! unregularised bias. The dual is solved by two-coordinate descent with
//! second-order working-set selection, keeping `w` explicit so each step
//! costs one pass over the nonzeros of the training subset. Multiclass
//! prediction combines the `k(k−1)/2` pairwise models by majority vote.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CategoryId, CategorySet};
use crate::error::{Error, Result};
use crate::exec;
use crate::features::FeatureVector;

const TAU: f64 = 1e-12;
const ROW_CACHE_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub c: f64,
    /// Stop once the maximal KKT violation drops below this.
    pub tolerance: f64,
    /// Iteration budget, in multiples of the training-set size.
    pub max_epochs: usize,
    /// Seeds the scan order used to break working-set ties.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("svm.c must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("svm.tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("svm.max_epochs must be positive".into()));
        }
        Ok(())
    }
}

/// `x ↦ w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn constant(dimension: usize, bias: f64) -> Self {
        LinearModel {
            weights: vec![0.0; dimension],
            bias,
        }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, x: &FeatureVector) -> Result<f64> {
        check_dimension(x, self.weights.len())?;
        Ok(x.dot(&self.weights) + self.bias)
    }
}

/// Primal objective `½‖w‖² + C·Σ hinge`.
pub fn primal_objective(model: &LinearModel, xs: &[FeatureVector], ys: &[f64], c: f64) -> f64 {
    let reg: f64 = 0.5 * model.weights.iter().map(|w| w * w).sum::<f64>();
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * (x.dot(&model.weights) + model.bias)).max(0.0))
        .sum();
    reg + c * loss
}

fn check_dimension(x: &FeatureVector, dimension: usize) -> Result<()> {
    if x.min_dimension() > dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            found: x.min_dimension(),
        });
    }
    Ok(())
}

/// Solver diagnostics alongside the trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LinearModel,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective `½‖w‖² − Σα` after every epoch and at exit.
    pub dual_trace: Vec<f64>,
    pub alphas: Vec<f64>,
}

pub fn train_binary(xs: &[FeatureVector], ys: &[f64], dimension: usize, cfg: &TrainConfig) -> Result<LinearModel> {
    let outcome = train_binary_traced(xs, ys, dimension, cfg)?;
    if !outcome.converged {
        log::warn!(
            "solver stopped after {} iterations without reaching tolerance {}",
            outcome.iterations,
            cfg.tolerance
        );
    }
    Ok(outcome.model)
}

pub fn train_binary_traced(
    xs: &[FeatureVector],
    ys: &[f64],
    dimension: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for x in xs {
        check_dimension(x, dimension)?;
        if let Some(&(i, _)) = x.entries.iter().find(|p| !p.1.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    if ys.iter().any(|y| *y != 1.0 && *y != -1.0) {
        return Err(Error::Config("binary labels must be +1 or -1".into()));
    }
    if ys.iter().all(|y| *y == ys[0]) {
        return Ok(TrainOutcome {
            model: LinearModel::constant(dimension, ys[0]),
            iterations: 0,
            converged: true,
            dual_trace: Vec::new(),
            alphas: vec![0.0; xs.len()],
        });
    }
    Ok(Smo::new(xs, ys, dimension, cfg).solve())
}

struct Smo<'a> {
    xs: &'a [FeatureVector],
    ys: &'a [f64],
    c: f64,
    tolerance: f64,
    max_iter: usize,
    order: Vec<usize>,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    w: Vec<f64>,
    diag: Vec<f64>,
    scatter: Vec<f64>,
    rows: RowCache,
}

struct RowCache {
    capacity: usize,
    rows: HashMap<usize, Vec<f64>>,
    fifo: VecDeque<usize>,
}

impl RowCache {
    fn new(n: usize) -> Self {
        RowCache {
            capacity: (ROW_CACHE_BYTES / (8 * n.max(1))).max(2),
            rows: HashMap::new(),
            fifo: VecDeque::new(),
        }
    }
}

impl<'a> Smo<'a> {
    fn new(xs: &'a [FeatureVector], ys: &'a [f64], dimension: usize, cfg: &TrainConfig) -> Self {
        let n = xs.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
        Smo {
            xs,
            ys,
            c: cfg.c,
            tolerance: cfg.tolerance,
            max_iter: cfg.max_epochs.saturating_mul(n),
            order,
            alpha: vec![0.0; n],
            grad: vec![-1.0; n],
            w: vec![0.0; dimension],
            diag: xs.iter().map(FeatureVector::squared_norm).collect(),
            scatter: vec![0.0; dimension],
            rows: RowCache::new(n),
        }
    }

    fn in_up(&self, t: usize) -> bool {
        (self.ys[t] > 0.0 && self.alpha[t] < self.c) || (self.ys[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.ys[t] < 0.0 && self.alpha[t] < self.c) || (self.ys[t] > 0.0 && self.alpha[t] > 0.0)
    }

    /// `K(i, ·)` as a dense row, cached FIFO.
    fn row(&mut self, i: usize) -> Vec<f64> {
        if let Some(r) = self.rows.rows.get(&i) {
            return r.clone();
        }
        for &(k, v) in &self.xs[i].entries {
            self.scatter[k as usize] = v;
        }
        let row: Vec<f64> = self.xs.iter().map(|x| x.dot(&self.scatter)).collect();
        for &(k, _) in &self.xs[i].entries {
            self.scatter[k as usize] = 0.0;
        }
        if self.rows.fifo.len() >= self.rows.capacity {
            if let Some(old) = self.rows.fifo.pop_front() {
                self.rows.rows.remove(&old);
            }
        }
        self.rows.fifo.push_back(i);
        self.rows.rows.insert(i, row.clone());
        row
    }

    fn dual_objective(&self) -> f64 {
        0.5 * self.w.iter().map(|w| w * w).sum::<f64>() - self.alpha.iter().sum::<f64>()
    }

    fn solve(mut self) -> TrainOutcome {
        let n = self.xs.len();
        let mut dual_trace = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            if iterations % n == 0 {
                dual_trace.push(self.dual_objective());
            }
            // i: most violating index in the "up" set.
            let mut up_max = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for &t in &self.order {
                let v = -self.ys[t] * self.grad[t];
                if self.in_up(t) && v > up_max {
                    up_max = v;
                    i = t;
                }
            }
            if i == usize::MAX {
                converged = true;
                break;
            }
            let ki = self.row(i);
            // j: best second-order decrease in the "low" set.
            let mut low_min = f64::INFINITY;
            let mut best_gain = f64::INFINITY;
            let mut j = usize::MAX;
            for &t in &self.order {
                if !self.in_low(t) {
                    continue;
                }
                let v = -self.ys[t] * self.grad[t];
                low_min = low_min.min(v);
                let diff = up_max - v;
                if diff > 0.0 {
                    let curvature = (self.diag[i] + self.diag[t] - 2.0 * ki[t]).max(TAU);
                    let gain = -(diff * diff) / curvature;
                    if gain < best_gain {
                        best_gain = gain;
                        j = t;
                    }
                }
            }
            if up_max - low_min < self.tolerance || j == usize::MAX {
                converged = true;
                break;
            }
            let kj = self.row(j);
            let curvature = (self.diag[i] + self.diag[j] - 2.0 * ki[j]).max(TAU);
            let v_j = -self.ys[j] * self.grad[j];
            let mut step = (up_max - v_j) / curvature;
            step = step.min(if self.ys[i] > 0.0 { self.c - self.alpha[i] } else { self.alpha[i] });
            step = step.min(if self.ys[j] > 0.0 { self.alpha[j] } else { self.c - self.alpha[j] });
            self.alpha[i] = (self.alpha[i] + self.ys[i] * step).clamp(0.0, self.c);
            self.alpha[j] = (self.alpha[j] - self.ys[j] * step).clamp(0.0, self.c);
            for &(k, v) in &self.xs[i].entries {
                self.w[k as usize] += step * v;
            }
            for &(k, v) in &self.xs[j].entries {
                self.w[k as usize] -= step * v;
            }
            for t in 0..n {
                self.grad[t] += self.ys[t] * step * (ki[t] - kj[t]);
            }
            iterations += 1;
        }
        dual_trace.push(self.dual_objective());
        let bias = self.bias();
        TrainOutcome {
            model: LinearModel { weights: self.w, bias },
            iterations,
            converged,
            dual_trace,
            alphas: self.alpha,
        }
    }

    fn bias(&self) -> f64 {
        let (mut free_sum, mut free_n) = (0.0, 0usize);
        let (mut up_max, mut low_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..self.xs.len() {
            let v = -self.ys[t] * self.grad[t];
            if self.alpha[t] > 0.0 && self.alpha[t] < self.c {
                free_sum += v;
                free_n += 1;
            }
            if self.in_up(t) {
                up_max = up_max.max(v);
            }
            if self.in_low(t) {
                low_min = low_min.min(v);
            }
        }
        if free_n > 0 {
            free_sum / free_n as f64
        } else if up_max.is_finite() && low_min.is_finite() {
            0.5 * (up_max + low_min)
        } else if up_max.is_finite() {
            up_max
        } else {
            low_min
        }
    }
}

/// Pairwise model; a non-negative decision votes for `first`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub first: CategoryId,
    pub second: CategoryId,
    pub model: LinearModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoModel {
    pub categories: CategorySet,
    pub dimension: usize,
    /// One model per unordered pair, in `(0,1), (0,2), …, (k−2,k−1)` order.
    pub models: Vec<PairModel>,
    /// Training records per category, used as a tie-break prior.
    pub train_counts: Vec<usize>,
}

pub fn canonical_pairs(k: usize) -> impl Iterator<Item = (CategoryId, CategoryId)> {
    (0..k).flat_map(move |a| (a + 1..k).map(move |b| (CategoryId(a as u16), CategoryId(b as u16))))
}

impl OvoModel {
    pub fn from_parts(
        categories: CategorySet,
        dimension: usize,
        models: Vec<PairModel>,
        train_counts: Vec<usize>,
    ) -> Result<Self> {
        let k = categories.len();
        if models.len() != k * (k - 1) / 2 || train_counts.len() != k {
            return Err(Error::Config(format!(
                "expected {} pair models and {k} counts",
                k * (k - 1) / 2
            )));
        }
        for (m, (a, b)) in models.iter().zip(canonical_pairs(k)) {
            if (m.first, m.second) != (a, b) || m.model.dimension() != dimension {
                return Err(Error::Config("pair models out of canonical order or wrong dimension".into()));
            }
        }
        Ok(OvoModel {
            categories,
            dimension,
            models,
            train_counts,
        })
    }

    pub fn k(&self) -> usize {
        self.categories.len()
    }
}

pub fn train_ovo(
    train: &[(FeatureVector, CategoryId)],
    categories: &CategorySet,
    dimension: usize,
    cfg: &TrainConfig,
) -> Result<OvoModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = categories.len();
    let mut train_counts = vec![0usize; k];
    for (_, c) in train {
        train_counts[c.index()] += 1;
    }
    let pairs: Vec<(CategoryId, CategoryId)> = canonical_pairs(k).collect();
    let models = exec::try_map(&pairs, |&(a, b)| {
        let (na, nb) = (train_counts[a.index()], train_counts[b.index()]);
        let model = match (na, nb) {
            (0, 0) => LinearModel::constant(dimension, 0.0),
            (_, 0) => LinearModel::constant(dimension, 1.0),
            (0, _) => LinearModel::constant(dimension, -1.0),
            _ => {
                let (xs, ys): (Vec<FeatureVector>, Vec<f64>) = train
                    .iter()
                    .filter(|(_, c)| *c == a || *c == b)
                    .map(|(x, c)| (x.clone(), if *c == a { 1.0 } else { -1.0 }))
                    .unzip();
                train_binary(&xs, &ys, dimension, cfg)?
            }
        };
        Ok::<_, Error>(PairModel {
            first: a,
            second: b,
            model,
        })
    })?;
    Ok(OvoModel {
        categories: categories.clone(),
        dimension,
        models,
        train_counts,
    })
}

/// Which rule settled the winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    None,
    MarginSum,
    TrainCount,
    CategoryOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub category: CategoryId,
    pub votes: Vec<u32>,
    /// Sum of |decision| over the pairwise contests each category won.
    pub margins: Vec<f64>,
    pub tie_break: TieBreak,
}

pub fn predict(model: &OvoModel, x: &FeatureVector) -> Result<Prediction> {
    check_dimension(x, model.dimension)?;
    let k = model.k();
    let mut votes = vec![0u32; k];
    let mut margins = vec![0.0; k];
    for pm in &model.models {
        let d = x.dot(&pm.model.weights) + pm.model.bias;
        let winner = if d >= 0.0 { pm.first } else { pm.second };
        votes[winner.index()] += 1;
        margins[winner.index()] += d.abs();
    }
    let top = *votes.iter().max().expect("at least one category");
    let mut tied: Vec<usize> = (0..k).filter(|&c| votes[c] == top).collect();
    let mut tie_break = TieBreak::None;
    if tied.len() > 1 {
        tie_break = TieBreak::MarginSum;
        let best = tied.iter().map(|&c| margins[c]).fold(f64::NEG_INFINITY, f64::max);
        tied.retain(|&c| margins[c] == best);
    }
    if tied.len() > 1 {
        tie_break = TieBreak::TrainCount;
        let best = tied.iter().map(|&c| model.train_counts[c]).max().unwrap_or(0);
        tied.retain(|&c| model.train_counts[c] == best);
    }
    if tied.len() > 1 {
        tie_break = TieBreak::CategoryOrder;
    }
    Ok(Prediction {
        category: CategoryId(tied[0] as u16),
        votes,
        margins,
        tie_break,
    })
}
