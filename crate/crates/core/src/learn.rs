//! L2-regularized hinge-loss SVM trained by dual coordinate descent, with
//! one-vs-rest multiclass.
//!
//! The same solver handles explicit sparse features (hashed or raw) and
//! precomputed kernel matrices; only the way margins are maintained differs.
//! The optional bias is a regularized constant feature of value 1 (for a
//! kernel it adds 1 to every entry).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::featurize::BinaryFeatureVector;
use crate::rng::CounterRng;
use crate::vectorspace::SparseVector;

/// Labelled rows sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<SparseVector>,
    labels: Vec<i64>,
    dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<SparseVector>, labels: Vec<i64>, dim: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                rows: rows.len(),
                labels: labels.len(),
            });
        }
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if let Some(bad) = rows.iter().find(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: bad.dim(),
                right: dim,
            });
        }
        Ok(Dataset { rows, labels, dim })
    }

    /// Wraps hashed features; all must share one dimension.
    pub fn from_features(features: &[BinaryFeatureVector], labels: Vec<i64>) -> Result<Self> {
        let dim = features.first().map_or(1, |f| f.dim());
        Self::new(
            features.iter().map(|f| f.to_sparse()).collect(),
            labels,
            dim,
        )
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> Vec<i64> {
        distinct(&self.labels)
    }

    /// Re-embeds every row in a `dim`-dimensional space.
    pub fn with_dim(self, dim: usize) -> Result<Self> {
        let rows = self
            .rows
            .into_iter()
            .map(|r| r.with_dim(dim))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(rows, self.labels, dim)
    }
}

fn distinct(labels: &[i64]) -> Vec<i64> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Regularization: weight of the hinge losses.
    pub c: f64,
    /// Maximum number of passes over the data per binary problem.
    pub max_iters: usize,
    /// Stop when the spread of projected gradients falls to this.
    pub tol: f64,
    /// Seed of the per-epoch permutation.
    pub seed: u64,
    pub bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            max_iters: 1000,
            tol: 0.01,
            seed: 0,
            bias: true,
        }
    }
}

impl TrainConfig {
    pub fn with_c(c: f64) -> Self {
        TrainConfig {
            c,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter("C must be positive and finite"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter("tol must be positive"));
        }
        Ok(())
    }
}

/// Dual objective after each epoch, per binary problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub objectives: Vec<Vec<f64>>,
}

/// How a binary dual problem reads margins and applies updates.
trait DualProblem {
    fn len(&self) -> usize;
    fn q_diag(&self, i: usize) -> f64;
    /// Current decision value of training row `i`.
    fn margin(&self, i: usize) -> f64;
    /// Adds `delta` times row `i` to the primal solution.
    fn update(&mut self, i: usize, delta: f64);
    /// `sum_i alpha_i y_i margin_i`, i.e. the squared primal norm.
    fn norm_sq(&self) -> f64;
}

/// Minimizes `0.5 a'Qa - sum(a)` over the box `[0, C]`.
fn solve_dual<P: DualProblem>(
    problem: &mut P,
    y: &[f64],
    cfg: &TrainConfig,
    stream: u64,
) -> (Vec<f64>, Vec<f64>) {
    let n = problem.len();
    let mut alpha = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).filter(|&i| problem.q_diag(i) > 0.0).collect();
    let mut rng = CounterRng::new(cfg.seed, stream);
    let mut objectives = Vec::new();
    for _ in 0..cfg.max_iters {
        rng.shuffle(&mut order);
        let (mut max_pg, mut min_pg) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let g = y[i] * problem.margin(i) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == cfg.c {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg);
            min_pg = min_pg.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / problem.q_diag(i)).clamp(0.0, cfg.c);
                let delta = (alpha[i] - old) * y[i];
                if delta != 0.0 {
                    problem.update(i, delta);
                }
            }
        }
        objectives.push(0.5 * problem.norm_sq() - alpha.iter().sum::<f64>());
        if order.is_empty() || max_pg - min_pg <= cfg.tol {
            break;
        }
    }
    (alpha, objectives)
}

struct LinearProblem<'a> {
    rows: &'a [SparseVector],
    bias: f64,
    /// Feature weights followed by the bias weight.
    w: Vec<f64>,
    q: Vec<f64>,
}

impl DualProblem for LinearProblem<'_> {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn q_diag(&self, i: usize) -> f64 {
        self.q[i]
    }

    fn margin(&self, i: usize) -> f64 {
        let dim = self.w.len() - 1;
        self.rows[i].iter().map(|(j, x)| self.w[j] * x).sum::<f64>() + self.w[dim] * self.bias
    }

    fn update(&mut self, i: usize, delta: f64) {
        for (j, x) in self.rows[i].iter() {
            self.w[j] += delta * x;
        }
        let dim = self.w.len() - 1;
        self.w[dim] += delta * self.bias;
    }

    fn norm_sq(&self) -> f64 {
        self.w.iter().map(|w| w * w).sum()
    }
}

/// One-vs-rest linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    classes: Vec<i64>,
    dim: usize,
    bias: bool,
    /// Per class: `dim` feature weights then the bias weight.
    weights: Vec<Vec<f64>>,
}

impl LinearModel {
    /// Rebuilds a model from stored parts; each weight vector has `dim + 1`
    /// entries, the last being the bias weight.
    pub fn from_parts(
        classes: Vec<i64>,
        dim: usize,
        bias: bool,
        weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if classes.len() != weights.len() || classes.is_empty() {
            return Err(Error::LengthMismatch {
                rows: weights.len(),
                labels: classes.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| w.len() != dim + 1) {
            return Err(Error::DimensionMismatch {
                left: w.len(),
                right: dim + 1,
            });
        }
        if distinct(&classes) != classes {
            return Err(Error::InvalidParameter(
                "classes must be strictly increasing",
            ));
        }
        Ok(LinearModel {
            classes,
            dim,
            bias,
            weights,
        })
    }

    pub fn classes(&self) -> &[i64] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bias(&self) -> bool {
        self.bias
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn scores(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: x.dim(),
                right: self.dim,
            });
        }
        let b = if self.bias { 1.0 } else { 0.0 };
        Ok(self
            .weights
            .iter()
            .map(|w| x.iter().map(|(j, v)| w[j] * v).sum::<f64>() + w[self.dim] * b)
            .collect())
    }

    pub fn predict(&self, x: &SparseVector) -> Result<i64> {
        Ok(self.classes[argmax(&self.scores(x)?)])
    }
}

/// Index of the largest score; ties go to the lowest index.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn binary_targets(labels: &[i64], class: i64) -> Vec<f64> {
    labels
        .iter()
        .map(|&l| if l == class { 1.0 } else { -1.0 })
        .collect()
}

fn check_classes(labels: &[i64]) -> Result<Vec<i64>> {
    let classes = distinct(labels);
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    Ok(classes)
}

/// Trains one binary SVM per class and records the dual objective per epoch.
pub fn train_linear_logged(data: &Dataset, cfg: &TrainConfig) -> Result<(LinearModel, TrainLog)> {
    cfg.validate()?;
    let classes = check_classes(&data.labels)?;
    let bias = if cfg.bias { 1.0 } else { 0.0 };
    let q: Vec<f64> = data
        .rows
        .iter()
        .map(|r| r.squared_norm() + bias * bias)
        .collect();
    let mut weights = Vec::with_capacity(classes.len());
    let mut log = TrainLog::default();
    for (stream, &class) in classes.iter().enumerate() {
        let y = binary_targets(&data.labels, class);
        let mut problem = LinearProblem {
            rows: &data.rows,
            bias,
            w: vec![0.0; data.dim + 1],
            q: q.clone(),
        };
        let (_, objectives) = solve_dual(&mut problem, &y, cfg, stream as u64);
        weights.push(problem.w);
        log.objectives.push(objectives);
    }
    let model = LinearModel {
        classes,
        dim: data.dim,
        bias: cfg.bias,
        weights,
    };
    Ok((model, log))
}

pub fn train_linear(data: &Dataset, cfg: &TrainConfig) -> Result<LinearModel> {
    train_linear_logged(data, cfg).map(|(m, _)| m)
}

/// Fraction of rows whose predicted label matches.
pub fn evaluate(model: &LinearModel, data: &Dataset) -> Result<f64> {
    if data.dim != model.dim {
        return Err(Error::DimensionMismatch {
            left: data.dim,
            right: model.dim,
        });
    }
    let mut correct = 0usize;
    for (row, &label) in data.rows.iter().zip(&data.labels) {
        if model.predict(row)? == label {
            correct += 1;
        }
    }
    Ok(accuracy(correct, data.len()))
}

fn accuracy(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

struct KernelProblem<'a> {
    gram: &'a [Vec<f64>],
    bias: f64,
    /// Running decision values of every training row.
    f: Vec<f64>,
    alpha_y: Vec<f64>,
}

impl DualProblem for KernelProblem<'_> {
    fn len(&self) -> usize {
        self.gram.len()
    }

    fn q_diag(&self, i: usize) -> f64 {
        self.gram[i][i] + self.bias
    }

    fn margin(&self, i: usize) -> f64 {
        self.f[i]
    }

    fn update(&mut self, i: usize, delta: f64) {
        self.alpha_y[i] += delta;
        for (f, k) in self.f.iter_mut().zip(&self.gram[i]) {
            *f += delta * (k + self.bias);
        }
    }

    fn norm_sq(&self) -> f64 {
        self.alpha_y.iter().zip(&self.f).map(|(a, f)| a * f).sum()
    }
}

/// One-vs-rest kernel SVM over a precomputed training Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    classes: Vec<i64>,
    bias: bool,
    /// Per class: `alpha_i * y_i` for every training row.
    coef: Vec<Vec<f64>>,
}

impl KernelModel {
    pub fn classes(&self) -> &[i64] {
        &self.classes
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coef
    }

    /// Number of training rows the model expects kernel values against.
    pub fn n_train(&self) -> usize {
        self.coef.first().map_or(0, Vec::len)
    }

    /// Predicts from one row of kernel values against the training rows.
    pub fn predict(&self, kernel_row: &[f64]) -> Result<i64> {
        if kernel_row.len() != self.n_train() {
            return Err(Error::DimensionMismatch {
                left: kernel_row.len(),
                right: self.n_train(),
            });
        }
        let b = if self.bias { 1.0 } else { 0.0 };
        let scores: Vec<f64> = self
            .coef
            .iter()
            .map(|c| c.iter().zip(kernel_row).map(|(a, k)| a * (k + b)).sum())
            .collect();
        Ok(self.classes[argmax(&scores)])
    }
}

/// Trains on a square training Gram matrix given as rows.
pub fn train_precomputed(
    gram: &[Vec<f64>],
    labels: &[i64],
    cfg: &TrainConfig,
) -> Result<(KernelModel, TrainLog)> {
    cfg.validate()?;
    let n = gram.len();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            rows: n,
            labels: labels.len(),
        });
    }
    if let Some(row) = gram.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            left: row.len(),
            right: n,
        });
    }
    let classes = check_classes(labels)?;
    let bias = if cfg.bias { 1.0 } else { 0.0 };
    let mut coef = Vec::with_capacity(classes.len());
    let mut log = TrainLog::default();
    for (stream, &class) in classes.iter().enumerate() {
        let y = binary_targets(labels, class);
        let mut problem = KernelProblem {
            gram,
            bias,
            f: vec![0.0; n],
            alpha_y: vec![0.0; n],
        };
        let (_, objectives) = solve_dual(&mut problem, &y, cfg, stream as u64);
        coef.push(problem.alpha_y);
        log.objectives.push(objectives);
    }
    Ok((
        KernelModel {
            classes,
            bias: cfg.bias,
            coef,
        },
        log,
    ))
}

/// Accuracy on rows of kernel values against the training rows.
pub fn evaluate_precomputed(
    model: &KernelModel,
    kernel_rows: &[Vec<f64>],
    labels: &[i64],
) -> Result<f64> {
    if kernel_rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            rows: kernel_rows.len(),
            labels: labels.len(),
        });
    }
    let mut correct = 0usize;
    for (row, &label) in kernel_rows.iter().zip(labels) {
        if model.predict(row)? == label {
            correct += 1;
        }
    }
    Ok(accuracy(correct, labels.len()))
}
