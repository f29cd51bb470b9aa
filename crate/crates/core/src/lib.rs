//! Gaussian-mixture point-based value iteration for continuous-state POMDPs
//! with softmax observation models.

pub mod condense;
pub mod diagnostics;
pub mod error;
pub mod filter;
pub mod gm;
pub mod pbvi;
mod linalg;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod softmax;
pub mod vb;

pub use error::{Error, Result};

/// The guide's snippets, compiled and run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/mixtures.md")]
    mod mixtures {}
    #[doc = include_str!("../../../book/src/softmax.md")]
    mod softmax {}
    #[doc = include_str!("../../../book/src/variational.md")]
    mod variational {}
    #[doc = include_str!("../../../book/src/condensation.md")]
    mod condensation {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/filtering.md")]
    mod filtering {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
