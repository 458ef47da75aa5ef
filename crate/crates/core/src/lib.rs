//! Isometric immersions and embeddings of warped-product metrics
//! `dσ² = ρ²dt² + Σ ηⱼ² dxⱼ²` into pseudo-Euclidean spaces and quadrics.

pub mod atlas;
pub mod blanusa;
pub mod embed;
pub mod error;
pub mod expr;
pub mod interval;
pub mod quad;
pub mod semispace;
pub mod specfile;
pub mod steps;
pub mod verify;
pub mod warped;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/partition.md")]
    mod partition {}
    #[doc = include_str!("../../../book/src/steps.md")]
    mod steps {}
    #[doc = include_str!("../../../book/src/maps.md")]
    mod maps {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
