//! Exact and sampled tools for multivariate partition functions on small
//! graphs: Gibbs distributions, influence matrices and their top eigenvalue,
//! Glauber dynamics, zero-free regions of the complex plane and the
//! stability constants that turn a zero-free region into a spectral
//! independence bound.

pub mod eigen;
pub mod error;
pub mod exact;
pub mod extended;
pub mod glauber;
pub mod graph;
pub mod model;
pub mod model_file;
pub mod poly;
pub mod region;
pub mod scalar;
pub mod stability;

pub use error::{Error, Result};
pub use graph::Graph;
pub use model::{Caps, Configuration, Family, ModelSpec, Pinning};
pub use region::Region;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    pub mod models {}
    #[doc = include_str!("../../../book/src/exact.md")]
    pub mod exact {}
    #[doc = include_str!("../../../book/src/glauber.md")]
    pub mod glauber {}
    #[doc = include_str!("../../../book/src/regions.md")]
    pub mod regions {}
    #[doc = include_str!("../../../book/src/stability.md")]
    pub mod stability {}
    #[doc = include_str!("../../../book/src/extended.md")]
    pub mod extended {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    pub mod acceptance {}
}
