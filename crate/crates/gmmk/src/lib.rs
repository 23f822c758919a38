//! File formats, parallel batch helpers, grid sweeps and the `gmmk`
//! command line, on top of [`gmmk_core`].

pub mod cli;
pub mod io;
pub mod par;
pub mod sweep;

pub use gmmk_core as core;
