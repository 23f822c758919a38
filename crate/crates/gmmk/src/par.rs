//! Row-parallel versions of the core batch operations. Each row is computed
//! independently and collected in input order, so results do not depend on
//! the size of the thread pool.

use gmmk_core::featurize::{encode, BinaryFeatureVector, FeatureConfig};
use gmmk_core::gcws::{signature, HashConfig, HashSignature};
use gmmk_core::kernels::{kernel_row, prepare_rows, GramMatrix, KernelSpec};
use gmmk_core::vectorspace::transform;
use gmmk_core::{Error, Result, SparseVector};
use rayon::prelude::*;

pub fn gram(rows: &[SparseVector], row_ids: Vec<String>, spec: KernelSpec) -> Result<GramMatrix> {
    let prepared = prepare_rows(&spec, rows)?;
    let values = prepared
        .par_iter()
        .enumerate()
        .map(|(i, p)| kernel_row(&spec, p, i, &prepared))
        .collect::<Result<Vec<_>>>()?;
    let nonzero: Vec<bool> = prepared.iter().map(|p| !p.is_zero()).collect();
    GramMatrix::from_rows(spec, row_ids, values, &nonzero)
}

pub fn cross_gram(
    queries: &[SparseVector],
    refs: &[SparseVector],
    spec: KernelSpec,
) -> Result<Vec<Vec<f64>>> {
    if let (Some(q), Some(r)) = (queries.first(), refs.first()) {
        if q.dim() != r.dim() {
            return Err(Error::DimensionMismatch {
                left: q.dim(),
                right: r.dim(),
            });
        }
    }
    let refs = prepare_rows(&spec, refs)?;
    let queries = prepare_rows(&spec, queries)?;
    queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| kernel_row(&spec, q, i, &refs))
        .collect()
}

/// Signatures of the split form of every row. `cfg.dim` must be twice the
/// original dimension.
pub fn signatures(rows: &[SparseVector], cfg: &HashConfig) -> Result<Vec<HashSignature>> {
    rows.par_iter()
        .enumerate()
        .map(|(i, r)| {
            signature(&transform(r), cfg).map_err(|e| Error::Row {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn features(sigs: &[HashSignature], fc: &FeatureConfig) -> Result<Vec<BinaryFeatureVector>> {
    sigs.par_iter().map(|s| encode(s, fc)).collect()
}

/// Builds a pool of `threads` workers, or the rayon default for `None`.
pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder.build()
}
