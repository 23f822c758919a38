//! (gamma, C) grid sweeps with resumable CSV output.
//!
//! Cells that share a kernel matrix or feature set are grouped, the shared
//! representation is built once (row-parallel), and the cells of a group are
//! then trained concurrently, each single-threaded. Every finished cell is
//! appended to the CSV immediately; a rerun skips the cells already present.
//! When the sweep ends the file is rewritten in grid order.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use gmmk_core::featurize::FeatureConfig;
use gmmk_core::gcws::HashConfig;
use gmmk_core::kernels::{exponentiate, KernelSpec};
use gmmk_core::learn::{
    evaluate, evaluate_precomputed, train_linear, train_precomputed, Dataset, TrainConfig,
};
use gmmk_core::rng::mix64;
use rayon::prelude::*;

use crate::io::{self, FormatError};
use crate::par;

pub const CSV_HEADER: &str = "kernel,gamma1,gamma2,C,accuracy,seconds";

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("{path}: line {line}: {message}")]
    Results {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Core(#[from] gmmk_core::Error),
}

/// The 58-value gamma grid used for RBF and eGMM.
pub fn rbf58() -> Vec<f64> {
    let mut g = vec![0.001, 0.01];
    g.extend((1..=20).map(|i| i as f64 / 10.0));
    g.push(2.5);
    g.extend((3..=20).map(f64::from));
    g.extend((25..=50).step_by(5).map(f64::from));
    g.extend((60..=100).step_by(10).map(f64::from));
    g.extend([120.0, 150.0, 200.0, 300.0, 500.0, 1000.0]);
    g
}

/// The pGMM gamma range. The name is historical; the list has 27 values.
pub fn pgmm24() -> Vec<f64> {
    let mut g = vec![
        0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.75, 1.0, 1.25, 1.5, 2.0, 5.0, 10.0, 15.0,
        20.0, 25.0,
    ];
    g.extend((30..=100).step_by(10).map(f64::from));
    g
}

pub fn preset(name: &str) -> Option<Vec<f64>> {
    match name {
        "rbf58" => Some(rbf58()),
        "pgmm24" => Some(pgmm24()),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepKernel {
    Linear,
    Rbf,
    Gmm,
    Egmm,
    Pgmm,
    Epgmm,
    /// pGMM hashes, b-bit one-hot features, linear SVM.
    HashedPgmm {
        k: usize,
        b: u32,
        seed: u64,
    },
}

impl SweepKernel {
    /// Name as written in the `kernel` column.
    pub fn label(&self) -> String {
        match self {
            SweepKernel::Linear => "linear".into(),
            SweepKernel::Rbf => "rbf".into(),
            SweepKernel::Gmm => "gmm".into(),
            SweepKernel::Egmm => "egmm".into(),
            SweepKernel::Pgmm => "pgmm".into(),
            SweepKernel::Epgmm => "epgmm".into(),
            SweepKernel::HashedPgmm { k, b, seed } => format!("hash-pgmm:k={k}:b={b}:seed={seed}"),
        }
    }

    pub fn uses_gamma1(&self) -> bool {
        !matches!(self, SweepKernel::Linear | SweepKernel::Gmm)
    }

    pub fn uses_gamma2(&self) -> bool {
        matches!(self, SweepKernel::Epgmm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub gammas: Vec<f64>,
    /// Outer exponents; only epGMM reads these.
    pub gammas2: Vec<f64>,
    pub cs: Vec<f64>,
}

fn check_positive(name: &str, values: &[f64]) -> Result<(), SweepError> {
    if values.is_empty() {
        return Err(SweepError::Grid(format!("{name} is empty")));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(SweepError::Grid(format!("{name} contains {v}")));
    }
    Ok(())
}

impl SweepGrid {
    pub fn validate(&self, kernel: SweepKernel) -> Result<(), SweepError> {
        check_positive("C list", &self.cs)?;
        if kernel.uses_gamma1() {
            check_positive("gamma list", &self.gammas)?;
        }
        if kernel.uses_gamma2() {
            check_positive("gamma2 list", &self.gammas2)?;
        }
        if let SweepKernel::HashedPgmm { k, b, .. } = kernel {
            FeatureConfig::new(b, k)?;
        }
        Ok(())
    }

    /// Cells in canonical order: gamma1, then gamma2, then C.
    pub fn cells(&self, kernel: SweepKernel) -> Vec<CellKey> {
        let g1: Vec<Option<f64>> = if kernel.uses_gamma1() {
            self.gammas.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let g2: Vec<Option<f64>> = if kernel.uses_gamma2() {
            self.gammas2.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let mut cells = Vec::new();
        for &gamma1 in &g1 {
            for &gamma2 in &g2 {
                for &c in &self.cs {
                    cells.push(CellKey {
                        kernel: kernel.label(),
                        gamma1,
                        gamma2,
                        c,
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub kernel: String,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub c: f64,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl CellKey {
    /// The first four CSV fields, used to match rows across runs.
    fn columns(&self) -> String {
        format!(
            "{},{},{},{}",
            self.kernel,
            fmt_opt(self.gamma1),
            fmt_opt(self.gamma2),
            self.c
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    /// Fraction correct on the test set.
    pub accuracy: f64,
    pub seconds: f64,
}

impl CellResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.2},{:.3}",
            self.key.columns(),
            100.0 * self.accuracy,
            self.seconds
        )
    }
}

fn parse_row(line: &str, path: &Path, lineno: usize) -> Result<(String, CellResult), SweepError> {
    let err = |message: &str| SweepError::Results {
        path: path.to_path_buf(),
        line: lineno,
        message: message.into(),
    };
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 6 {
        return Err(err("expected 6 fields"));
    }
    let opt = |s: &str| -> Result<Option<f64>, SweepError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| err("bad gamma"))
        }
    };
    let key = CellKey {
        kernel: f[0].to_string(),
        gamma1: opt(f[1])?,
        gamma2: opt(f[2])?,
        c: f[3].parse().map_err(|_| err("bad C"))?,
    };
    let accuracy: f64 = f[4].parse::<f64>().map_err(|_| err("bad accuracy"))? / 100.0;
    let seconds = f[5].parse().map_err(|_| err("bad seconds"))?;
    Ok((
        f[..4].join(","),
        CellResult {
            key,
            accuracy,
            seconds,
        },
    ))
}

/// Rows of an existing results file, keyed by their first four columns.
fn load_results(path: &Path) -> Result<Vec<(String, CellResult)>, SweepError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for (n, line) in io::open(path)?.lines().enumerate() {
        let line = line.map_err(FormatError::from)?;
        if n == 0 {
            if line != CSV_HEADER {
                return Err(SweepError::Results {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!("expected header {CSV_HEADER:?}"),
                });
            }
            continue;
        }
        if !line.trim().is_empty() {
            rows.push(parse_row(&line, path, n + 1)?);
        }
    }
    Ok(rows)
}

/// Options that are not part of the grid.
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Solver settings; `c` is overridden per cell.
    pub train: TrainConfig,
    /// Where base kernel matrices are cached between runs.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct SweepReport {
    /// Every completed cell in grid order, including reused ones.
    pub cells: Vec<CellResult>,
    pub failures: Vec<(CellKey, String)>,
    /// Cells taken from an earlier run instead of being recomputed.
    pub reused: usize,
}

/// The representation a cell trains on. Cells with equal `Base` share it.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Base {
    Raw,
    Kernel(KernelSpec),
    Hashed(f64),
}

/// Splits a cell into its shared base and an optional outer exponent that
/// turns a GMM or pGMM matrix into eGMM or epGMM.
fn base_of(kernel: SweepKernel, key: &CellKey) -> (Base, Option<f64>) {
    let g1 = key.gamma1.unwrap_or(1.0);
    match kernel {
        SweepKernel::Linear => (Base::Raw, None),
        SweepKernel::Rbf => (Base::Kernel(KernelSpec::Rbf { gamma: g1 }), None),
        SweepKernel::Gmm => (Base::Kernel(KernelSpec::Gmm), None),
        SweepKernel::Pgmm => (Base::Kernel(KernelSpec::Pgmm { gamma: g1 }), None),
        SweepKernel::Egmm => (Base::Kernel(KernelSpec::Gmm), Some(g1)),
        SweepKernel::Epgmm => (Base::Kernel(KernelSpec::Pgmm { gamma: g1 }), key.gamma2),
        SweepKernel::HashedPgmm { .. } => (Base::Hashed(g1), None),
    }
}

enum Representation {
    Features {
        train: Dataset,
        test: Dataset,
    },
    Matrices {
        train: Vec<Vec<f64>>,
        test: Vec<Vec<f64>>,
    },
}

/// Train-vs-train and test-vs-train kernel rows.
type Matrices = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn fingerprint(data: &[&Dataset]) -> u64 {
    let mut h = 0x6A09_E667_F3BC_C908u64;
    let mut eat = |x: u64| h = mix64(h ^ x);
    for d in data {
        eat(d.dim() as u64);
        eat(d.len() as u64);
        for (row, &label) in d.rows().iter().zip(d.labels()) {
            eat(label as u64);
            for (i, x) in row.iter() {
                eat(i as u64);
                eat(x.to_bits());
            }
        }
    }
    h
}

fn cache_name(spec: &KernelSpec) -> String {
    spec.to_string()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Train and test kernel matrices for `spec`, through the cache if enabled.
fn kernel_matrices(
    spec: KernelSpec,
    train: &Dataset,
    test: &Dataset,
    cache_dir: Option<&Path>,
) -> Result<Matrices, SweepError> {
    let paths = cache_dir.map(|dir| {
        let stem = format!("{:016x}-{}", fingerprint(&[train, test]), cache_name(&spec));
        (
            dir.join(format!("{stem}-train.txt")),
            dir.join(format!("{stem}-test.txt")),
        )
    });
    if let Some((tr, te)) = &paths {
        if tr.exists() && te.exists() {
            log::info!("reusing cached {spec} matrices from {}", tr.display());
            let (_, a) = io::read_precomputed(tr)?;
            let (_, b) = io::read_precomputed(te)?;
            return Ok((a, b));
        }
    }
    let ids = (0..train.len()).map(|i| i.to_string()).collect();
    let gram = par::gram(train.rows(), ids, spec)?;
    let train_rows: Vec<Vec<f64>> = gram.rows().map(<[f64]>::to_vec).collect();
    let test_rows = par::cross_gram(test.rows(), train.rows(), spec)?;
    if let Some((tr, te)) = &paths {
        std::fs::create_dir_all(tr.parent().expect("cache file has a parent")).map_err(
            |source| FormatError::Io {
                path: tr.clone(),
                source,
            },
        )?;
        io::write_atomically(tr, |w| {
            io::write_precomputed_rows(w, train.labels(), &train_rows)
        })?;
        io::write_atomically(te, |w| {
            io::write_precomputed_rows(w, test.labels(), &test_rows)
        })?;
    }
    Ok((train_rows, test_rows))
}

fn hashed_features(
    gamma: f64,
    k: usize,
    b: u32,
    seed: u64,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Dataset, Dataset), SweepError> {
    let cfg = HashConfig::new(gamma, k, seed, 2 * train.dim())?;
    let fc = FeatureConfig::new(b, k)?;
    let encode = |d: &Dataset| -> Result<Dataset, SweepError> {
        let sigs = par::signatures(d.rows(), &cfg)?;
        let feats = par::features(&sigs, &fc)?;
        Ok(Dataset::from_features(&feats, d.labels().to_vec())?)
    };
    Ok((encode(train)?, encode(test)?))
}

fn build(
    base: Base,
    kernel: SweepKernel,
    train: &Dataset,
    test: &Dataset,
    cache_dir: Option<&Path>,
) -> Result<Representation, SweepError> {
    Ok(match base {
        Base::Raw => Representation::Features {
            train: train.clone(),
            test: test.clone(),
        },
        Base::Kernel(spec) => {
            let (train, test) = kernel_matrices(spec, train, test, cache_dir)?;
            Representation::Matrices { train, test }
        }
        Base::Hashed(gamma) => {
            let SweepKernel::HashedPgmm { k, b, seed } = kernel else {
                unreachable!("hashed base only comes from the hashed kernel")
            };
            let (train, test) = hashed_features(gamma, k, b, seed, train, test)?;
            Representation::Features { train, test }
        }
    })
}

fn outer(matrix: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    matrix
        .iter()
        .map(|r| r.iter().map(|&s| exponentiate(gamma, s)).collect())
        .collect()
}

fn run_cell(
    rep: &Representation,
    derived: Option<&Matrices>,
    train_labels: &[i64],
    test_labels: &[i64],
    cfg: &TrainConfig,
) -> gmmk_core::Result<f64> {
    match (rep, derived) {
        (Representation::Features { train, test }, _) => evaluate(&train_linear(train, cfg)?, test),
        (_, Some((train, test))) | (Representation::Matrices { train, test }, None) => {
            let (model, _) = train_precomputed(train, train_labels, cfg)?;
            evaluate_precomputed(&model, test, test_labels)
        }
    }
}

/// Serializes appends from concurrently finishing cells.
struct Appender {
    file: Mutex<std::fs::File>,
    path: PathBuf,
}

impl Appender {
    fn open(path: &Path) -> Result<Self, SweepError> {
        let io_err = |source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        };
        let fresh = !path.exists();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        if fresh {
            writeln!(file, "{CSV_HEADER}").map_err(io_err)?;
        }
        Ok(Appender {
            file: Mutex::new(file),
            path: path.to_path_buf(),
        })
    }

    fn append(&self, row: &CellResult) -> Result<(), SweepError> {
        let mut f = self.file.lock().expect("results file lock");
        writeln!(f, "{}", row.csv_row())
            .and_then(|_| f.flush())
            .map_err(|source| {
                FormatError::Io {
                    path: self.path.clone(),
                    source,
                }
                .into()
            })
    }
}

/// Runs every cell of `grid` not already present in `out`.
pub fn run_sweep(
    kernel: SweepKernel,
    grid: &SweepGrid,
    train: &Dataset,
    test: &Dataset,
    opts: &SweepOptions,
    out: &Path,
) -> Result<SweepReport, SweepError> {
    grid.validate(kernel)?;
    let dim = train.dim().max(test.dim());
    let train = &train.clone().with_dim(dim)?;
    let test = &test.clone().with_dim(dim)?;

    let previous = load_results(out)?;
    let mut done: HashMap<String, CellResult> = previous.iter().cloned().collect();
    let appender = Appender::open(out)?;

    let cells = grid.cells(kernel);
    let mut report = SweepReport::default();

    // group pending cells by base, keeping first-appearance order
    let mut groups: Vec<(Base, Vec<&CellKey>)> = Vec::new();
    for key in &cells {
        if done.contains_key(&key.columns()) {
            report.reused += 1;
            continue;
        }
        let (base, _) = base_of(kernel, key);
        match groups.iter_mut().find(|(b, _)| *b == base) {
            Some((_, keys)) => keys.push(key),
            None => groups.push((base, vec![key])),
        }
    }

    for (base, keys) in groups {
        log::info!("building {base:?} for {} cells", keys.len());
        let rep = match build(base, kernel, train, test, opts.cache_dir.as_deref()) {
            Ok(rep) => rep,
            Err(e) => {
                log::error!("{base:?}: {e}");
                report
                    .failures
                    .extend(keys.into_iter().map(|k| (k.clone(), e.to_string())));
                continue;
            }
        };
        // cells sharing an outer exponent share the derived matrices
        let mut outers: Vec<Option<f64>> = Vec::new();
        for key in &keys {
            let o = base_of(kernel, key).1;
            if !outers.contains(&o) {
                outers.push(o);
            }
        }
        for o in outers {
            let derived = match (&rep, o) {
                (Representation::Matrices { train, test }, Some(g)) => {
                    Some((outer(train, g), outer(test, g)))
                }
                _ => None,
            };
            let batch: Vec<&CellKey> = keys
                .iter()
                .copied()
                .filter(|k| base_of(kernel, k).1 == o)
                .collect();
            let results: Vec<(CellKey, Result<CellResult, String>)> = batch
                .par_iter()
                .map(|key| {
                    let start = Instant::now();
                    let cfg = TrainConfig {
                        c: key.c,
                        ..opts.train
                    };
                    let outcome =
                        run_cell(&rep, derived.as_ref(), train.labels(), test.labels(), &cfg)
                            .map_err(|e| e.to_string())
                            .and_then(|accuracy| {
                                let cell = CellResult {
                                    key: (*key).clone(),
                                    accuracy,
                                    seconds: start.elapsed().as_secs_f64(),
                                };
                                appender.append(&cell).map_err(|e| e.to_string())?;
                                Ok(cell)
                            });
                    ((*key).clone(), outcome)
                })
                .collect();
            for (key, outcome) in results {
                match outcome {
                    Ok(cell) => {
                        done.insert(key.columns(), cell);
                    }
                    Err(e) => {
                        log::error!("cell {}: {e}", key.columns());
                        report.failures.push((key, e));
                    }
                }
            }
        }
    }
    drop(appender);

    // canonical rewrite: grid order, then rows from other grids untouched
    for key in &cells {
        if let Some(cell) = done.remove(&key.columns()) {
            report.cells.push(cell);
        }
    }
    let foreign: Vec<&CellResult> = previous
        .iter()
        .filter(|(k, _)| done.contains_key(k))
        .map(|(_, c)| c)
        .collect();
    io::write_atomically(out, |w| {
        writeln!(w, "{CSV_HEADER}")?;
        for cell in report.cells.iter().chain(foreign) {
            writeln!(w, "{}", cell.csv_row())?;
        }
        Ok(())
    })?;
    Ok(report)
}

/// Best accuracy over all gamma values at one C.
#[derive(Debug, Clone, PartialEq)]
pub struct BestPoint {
    pub kernel: String,
    pub c: f64,
    pub accuracy: f64,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
}

/// Per kernel and C, the cell with the highest accuracy; the earliest cell
/// wins ties.
pub fn best_over_gamma(cells: &[CellResult]) -> Vec<BestPoint> {
    let mut best: Vec<BestPoint> = Vec::new();
    for cell in cells {
        let k = &cell.key;
        match best.iter_mut().find(|b| b.kernel == k.kernel && b.c == k.c) {
            Some(b) if cell.accuracy > b.accuracy => {
                b.accuracy = cell.accuracy;
                b.gamma1 = k.gamma1;
                b.gamma2 = k.gamma2;
            }
            Some(_) => {}
            None => best.push(BestPoint {
                kernel: k.kernel.clone(),
                c: k.c,
                accuracy: cell.accuracy,
                gamma1: k.gamma1,
                gamma2: k.gamma2,
            }),
        }
    }
    best
}
