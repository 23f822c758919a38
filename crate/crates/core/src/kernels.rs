//! Exact kernel evaluation: linear (cosine), RBF, and the min-max family
//! GMM, eGMM, pGMM and epGMM, plus Gram matrices over datasets.
//!
//! All min-max kernels go through [`min_max_ratio`], a two-pointer merge over
//! the sorted supports. pGMM with `gamma == 1` takes exactly the same
//! arithmetic path as GMM, and eGMM is epGMM with an inner power of one, so
//! those reductions hold bit for bit.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};
use crate::vectorspace::{transform, SparseVector, TransformedVector};

/// `x^gamma` for `x > 0`, computed as `exp(gamma * ln x)`. The identity power
/// returns `x` untouched.
#[inline]
pub fn power(x: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        x
    } else {
        libm::exp(gamma * libm::log(x))
    }
}

fn check_exponent(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "kernel exponent must be positive and finite",
        ))
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left: a, right: b })
    }
}

/// `sum(min^gamma) / sum(max^gamma)` over the union of both supports.
///
/// For `gamma != 1` every value is first divided by the largest stored value
/// so that large exponents cannot overflow; the ratio is unaffected.
pub fn min_max_ratio(a: &TransformedVector, b: &TransformedVector, gamma: f64) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    if a.is_zero() && b.is_zero() {
        return Err(Error::UndefinedSimilarity);
    }
    let scale = if gamma == 1.0 {
        1.0
    } else {
        a.values()
            .iter()
            .chain(b.values())
            .fold(0.0f64, |m, &x| m.max(x))
    };
    let p = |x: f64| {
        if gamma == 1.0 {
            x
        } else {
            power(x / scale, gamma)
        }
    };

    let (ai, av, bi, bv) = (a.indices(), a.values(), b.indices(), b.values());
    let (mut x, mut y) = (0, 0);
    let (mut num, mut den) = (0.0, 0.0);
    while x < ai.len() && y < bi.len() {
        match ai[x].cmp(&bi[y]) {
            Ordering::Less => {
                den += p(av[x]);
                x += 1;
            }
            Ordering::Greater => {
                den += p(bv[y]);
                y += 1;
            }
            Ordering::Equal => {
                let (lo, hi) = if av[x] <= bv[y] {
                    (av[x], bv[y])
                } else {
                    (bv[y], av[x])
                };
                num += p(lo);
                den += p(hi);
                x += 1;
                y += 1;
            }
        }
    }
    for &v in &av[x..] {
        den += p(v);
    }
    for &v in &bv[y..] {
        den += p(v);
    }
    if den == 0.0 {
        // every power underflowed; nothing sensible to report
        return Err(Error::UndefinedSimilarity);
    }
    Ok(num / den)
}

/// Generalized min-max similarity.
pub fn gmm(a: &TransformedVector, b: &TransformedVector) -> Result<f64> {
    min_max_ratio(a, b, 1.0)
}

/// Powered GMM: min-max ratio over elementwise powers.
pub fn pgmm(a: &TransformedVector, b: &TransformedVector, gamma: f64) -> Result<f64> {
    check_exponent(gamma)?;
    min_max_ratio(a, b, gamma)
}

/// `exp(-gamma (1 - similarity))`, shared by eGMM and epGMM.
#[inline]
pub fn exponentiate(gamma: f64, similarity: f64) -> f64 {
    libm::exp(-gamma * (1.0 - similarity))
}

/// Exponentiated GMM, `exp(-gamma (1 - gmm))`.
pub fn egmm(a: &TransformedVector, b: &TransformedVector, gamma: f64) -> Result<f64> {
    epgmm(a, b, 1.0, gamma)
}

/// Exponentiated-powered GMM, `exp(-gamma2 (1 - pgmm(gamma1)))`.
pub fn epgmm(
    a: &TransformedVector,
    b: &TransformedVector,
    gamma1: f64,
    gamma2: f64,
) -> Result<f64> {
    check_exponent(gamma1)?;
    check_exponent(gamma2)?;
    Ok(exponentiate(gamma2, min_max_ratio(a, b, gamma1)?))
}

fn cosine_parts(u: &SparseVector, v: &SparseVector) -> Result<(f64, f64)> {
    check_dims(u.dim(), v.dim())?;
    let dot = u.dot(v)?;
    let norm = libm::sqrt(u.squared_norm()) * libm::sqrt(v.squared_norm());
    Ok((dot, norm))
}

/// Cosine similarity. A zero vector has zero inner product with everything,
/// so the result is 0 rather than an error.
pub fn linear(u: &SparseVector, v: &SparseVector) -> Result<f64> {
    let (dot, norm) = cosine_parts(u, v)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / norm).clamp(-1.0, 1.0))
}

/// `exp(-gamma (1 - cos(u, v)))` on the original signed vectors.
pub fn rbf(u: &SparseVector, v: &SparseVector, gamma: f64) -> Result<f64> {
    check_exponent(gamma)?;
    let (dot, norm) = cosine_parts(u, v)?;
    if norm == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok(exponentiate(gamma, (dot / norm).clamp(-1.0, 1.0)))
}

/// A kernel together with its tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
    Gmm,
    Egmm { gamma: f64 },
    Pgmm { gamma: f64 },
    Epgmm { gamma1: f64, gamma2: f64 },
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Gmm => "gmm",
            KernelSpec::Egmm { .. } => "egmm",
            KernelSpec::Pgmm { .. } => "pgmm",
            KernelSpec::Epgmm { .. } => "epgmm",
        }
    }

    /// Builds a spec from a kernel name and the raw parameters, checking that
    /// required exponents are present and positive.
    pub fn from_parts(name: &str, gamma1: Option<f64>, gamma2: Option<f64>) -> Result<Self> {
        let need = |g: Option<f64>| -> Result<f64> {
            let g = g.ok_or(Error::InvalidParameter("kernel requires a gamma"))?;
            check_exponent(g)?;
            Ok(g)
        };
        let spec = match name.to_ascii_lowercase().as_str() {
            "linear" => KernelSpec::Linear,
            "rbf" => KernelSpec::Rbf {
                gamma: need(gamma1)?,
            },
            "gmm" => KernelSpec::Gmm,
            "egmm" => KernelSpec::Egmm {
                gamma: need(gamma1)?,
            },
            "pgmm" => KernelSpec::Pgmm {
                gamma: need(gamma1)?,
            },
            "epgmm" => KernelSpec::Epgmm {
                gamma1: need(gamma1)?,
                gamma2: need(gamma2)?,
            },
            _ => return Err(Error::InvalidParameter("unknown kernel name")),
        };
        Ok(spec)
    }

    /// The first tuning parameter, if the kernel has one.
    pub fn gamma1(&self) -> Option<f64> {
        match *self {
            KernelSpec::Linear | KernelSpec::Gmm => None,
            KernelSpec::Rbf { gamma } | KernelSpec::Egmm { gamma } | KernelSpec::Pgmm { gamma } => {
                Some(gamma)
            }
            KernelSpec::Epgmm { gamma1, .. } => Some(gamma1),
        }
    }

    pub fn gamma2(&self) -> Option<f64> {
        match *self {
            KernelSpec::Epgmm { gamma2, .. } => Some(gamma2),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gamma1() {
            check_exponent(g)?;
        }
        if let Some(g) = self.gamma2() {
            check_exponent(g)?;
        }
        Ok(())
    }

    /// Whether the kernel works on split (nonnegative) vectors.
    pub fn is_min_max(&self) -> bool {
        !matches!(self, KernelSpec::Linear | KernelSpec::Rbf { .. })
    }

    /// Inclusive value range for valid inputs.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            KernelSpec::Linear => (-1.0, 1.0),
            KernelSpec::Rbf { gamma } => (libm::exp(-2.0 * gamma), 1.0),
            KernelSpec::Gmm | KernelSpec::Pgmm { .. } => (0.0, 1.0),
            KernelSpec::Egmm { gamma } => (libm::exp(-gamma), 1.0),
            KernelSpec::Epgmm { gamma2, .. } => (libm::exp(-gamma2), 1.0),
        }
    }

    /// Converts a row into the representation this kernel consumes.
    pub fn prepare(&self, u: &SparseVector) -> Prepared {
        if self.is_min_max() {
            Prepared::Split(transform(u))
        } else {
            Prepared::Raw(u.clone())
        }
    }

    /// Evaluates the kernel on two prepared rows.
    pub fn eval(&self, a: &Prepared, b: &Prepared) -> Result<f64> {
        match (*self, a, b) {
            (KernelSpec::Linear, Prepared::Raw(u), Prepared::Raw(v)) => linear(u, v),
            (KernelSpec::Rbf { gamma }, Prepared::Raw(u), Prepared::Raw(v)) => rbf(u, v, gamma),
            (KernelSpec::Gmm, Prepared::Split(u), Prepared::Split(v)) => gmm(u, v),
            (KernelSpec::Egmm { gamma }, Prepared::Split(u), Prepared::Split(v)) => {
                egmm(u, v, gamma)
            }
            (KernelSpec::Pgmm { gamma }, Prepared::Split(u), Prepared::Split(v)) => {
                pgmm(u, v, gamma)
            }
            (KernelSpec::Epgmm { gamma1, gamma2 }, Prepared::Split(u), Prepared::Split(v)) => {
                epgmm(u, v, gamma1, gamma2)
            }
            _ => Err(Error::InvalidParameter(
                "row prepared for a different kernel family",
            )),
        }
    }

    /// Evaluates the kernel on two signed rows.
    pub fn eval_raw(&self, u: &SparseVector, v: &SparseVector) -> Result<f64> {
        self.eval(&self.prepare(u), &self.prepare(v))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        if let Some(g) = self.gamma1() {
            write!(f, "(gamma1={g}")?;
            if let Some(g2) = self.gamma2() {
                write!(f, ", gamma2={g2}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A row in the representation a kernel consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum Prepared {
    Raw(SparseVector),
    Split(TransformedVector),
}

impl Prepared {
    pub fn is_zero(&self) -> bool {
        match self {
            Prepared::Raw(u) => u.is_zero(),
            Prepared::Split(u) => u.is_zero(),
        }
    }
}

/// A symmetric kernel matrix with the identities of its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    values: Vec<f64>,
    row_ids: Vec<String>,
    spec: KernelSpec,
}

impl GramMatrix {
    /// Assembles a matrix from row-major values, checking shape, symmetry
    /// and the kernel's range.
    pub fn from_rows(
        spec: KernelSpec,
        row_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
        nonzero: &[bool],
    ) -> Result<Self> {
        let n = rows.len();
        if row_ids.len() != n || nonzero.len() != n {
            return Err(Error::LengthMismatch {
                rows: n,
                labels: row_ids.len(),
            });
        }
        let mut values = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    left: row.len(),
                    right: n,
                });
            }
            values.extend(row);
        }
        let gram = GramMatrix {
            n,
            values,
            row_ids,
            spec,
        };
        gram.check_invariants(nonzero)?;
        Ok(gram)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n.max(1))
    }

    /// Symmetry, range, and unit diagonal on nonzero rows.
    pub fn check_invariants(&self, nonzero: &[bool]) -> Result<()> {
        const SLACK: f64 = 1e-12;
        if nonzero.len() != self.n {
            return Err(Error::LengthMismatch { rows: self.n, labels: nonzero.len() });
        }
        let (lo, hi) = self.spec.range();
        for (i, &live) in nonzero.iter().enumerate() {
            for j in 0..self.n {
                let v = self.get(i, j);
                let bad_range = !(v >= lo - SLACK && v <= hi + SLACK);
                let bad_sym = v.to_bits() != self.get(j, i).to_bits();
                let bad_diag = i == j && live && (v - 1.0).abs() > SLACK;
                if bad_range || bad_sym || bad_diag {
                    return Err(Error::GramInvariant {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One row of kernel values of `query` against every prepared reference row.
pub fn kernel_row(
    spec: &KernelSpec,
    query: &Prepared,
    query_index: usize,
    refs: &[Prepared],
) -> Result<Vec<f64>> {
    refs.iter()
        .enumerate()
        .map(|(j, r)| {
            spec.eval(query, r).map_err(|e| Error::GramEntry {
                row: query_index,
                col: j,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Prepares every row, checking that they share one dimension.
pub fn prepare_rows(spec: &KernelSpec, rows: &[SparseVector]) -> Result<Vec<Prepared>> {
    spec.validate()?;
    if let Some(first) = rows.first() {
        if let Some(bad) = rows.iter().find(|r| r.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                left: first.dim(),
                right: bad.dim(),
            });
        }
    }
    Ok(rows.iter().map(|r| spec.prepare(r)).collect())
}

/// Full pairwise kernel matrix over `rows`.
pub fn gram(rows: &[SparseVector], row_ids: Vec<String>, spec: KernelSpec) -> Result<GramMatrix> {
    let prepared = prepare_rows(&spec, rows)?;
    let values = prepared
        .iter()
        .enumerate()
        .map(|(i, p)| kernel_row(&spec, p, i, &prepared))
        .collect::<Result<Vec<_>>>()?;
    let nonzero: Vec<bool> = prepared.iter().map(|p| !p.is_zero()).collect();
    GramMatrix::from_rows(spec, row_ids, values, &nonzero)
}

/// Rectangular kernel values of every query row against every reference row.
pub fn cross_gram(
    queries: &[SparseVector],
    refs: &[SparseVector],
    spec: KernelSpec,
) -> Result<Vec<Vec<f64>>> {
    let refs = prepare_rows(&spec, refs)?;
    let queries = prepare_rows(&spec, queries)?;
    if let (Some(q), Some(r)) = (queries.first(), refs.first()) {
        let dim = |p: &Prepared| match p {
            Prepared::Raw(u) => u.dim(),
            Prepared::Split(u) => u.dim(),
        };
        check_dims(dim(q), dim(r))?;
    }
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| kernel_row(&spec, q, i, &refs))
        .collect()
}
