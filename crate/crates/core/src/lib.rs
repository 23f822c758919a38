//! Tunable generalized min-max (GMM) kernels and their linearization.
//!
//! * [`vectorspace`]: signed sparse vectors and the positive/negative split.
//! * [`kernels`]: exact linear, RBF, GMM, eGMM, pGMM and epGMM kernels and
//!   Gram matrices.
//! * [`gcws`]: consistent weighted sampling whose collision probability is
//!   the pGMM kernel.
//! * [`featurize`]: b-bit one-hot expansion of hash signatures.
//! * [`learn`]: dual coordinate-descent SVM over sparse features or
//!   precomputed kernels.
//!
//! The crate is `no_std` (it needs `alloc`); the `std` feature only adds
//! `std::error::Error` for [`Error`].
//!
//! ```
//! use gmmk_core::{gcws, kernels, vectorspace::{transform, SparseVector}};
//!
//! let u = transform(&SparseVector::from_dense(&[1.0, -2.0]).unwrap());
//! let v = transform(&SparseVector::from_dense(&[3.0, 1.0]).unwrap());
//! let exact = kernels::pgmm(&u, &v, 2.0).unwrap();
//! assert!((exact - 1.0 / 14.0).abs() < 1e-15);
//!
//! let cfg = gcws::HashConfig::new(2.0, 256, 7, u.dim()).unwrap();
//! let (su, sv) = (gcws::signature(&u, &cfg).unwrap(), gcws::signature(&v, &cfg).unwrap());
//! let est = gcws::estimate_collision(&su, &sv, gcws::CollisionMode::Full).unwrap();
//! assert!((0.0..=1.0).contains(&est));
//! ```

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub mod featurize;
pub mod gcws;
pub mod kernels;
pub mod learn;
pub mod rng;
pub mod vectorspace;

pub use error::{Error, Result};
pub use featurize::{encode, BinaryFeatureVector, FeatureConfig};
pub use gcws::{
    estimate_collision, hash_one, signature, CollisionMode, HashConfig, HashSample, HashSignature,
};
pub use kernels::{gram, GramMatrix, KernelSpec};
pub use learn::{evaluate, train_linear, Dataset, LinearModel, TrainConfig};
pub use vectorspace::{l1_mass, transform, SparseVector, TransformedVector};
