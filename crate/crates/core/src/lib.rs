//! Detection of changes in the climatology of seasonal precipitation extremes
//! from irregular station networks.

pub mod changes;
pub mod error;
pub mod gev;
pub mod ingest;
pub mod io;
pub mod optim;
pub mod pipeline;
pub mod resampling;
pub mod rng;
pub mod simstudy;
pub mod spatial;
pub mod store;
pub mod synthetic;
pub mod testing;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/gev.md")]
    mod gev {}
    #[doc = include_str!("../../../book/src/blocks.md")]
    mod blocks {}
    #[doc = include_str!("../../../book/src/kriging.md")]
    mod kriging {}
    #[doc = include_str!("../../../book/src/resampling.md")]
    mod resampling {}
    #[doc = include_str!("../../../book/src/fdr.md")]
    mod fdr {}
    #[doc = include_str!("../../../book/src/annual.md")]
    mod annual {}
    #[doc = include_str!("../../../book/src/simstudy.md")]
    mod simstudy {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
