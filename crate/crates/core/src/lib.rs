//! Graph-based approximate nearest neighbor search with adaptive
//! entry-point selection.
//!
//! Queries start from the k-means entry candidate nearest to them instead of
//! a fixed central node. The crate also measures how monotonic a graph's
//! paths are and derives the search bounds that follow from it. The guide in
//! `book/` walks through every module; its code blocks run as doctests.

pub mod bench;
pub mod clustering;
pub mod error;
pub mod graph;
pub mod hardcase;
pub mod io;
pub mod monotonicity;
pub mod search;
pub mod synth;
pub mod vectors;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/vectors.md")]
    mod vectors {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/entry-points.md")]
    mod entry_points {}
    #[doc = include_str!("../../../book/src/monotonicity.md")]
    mod monotonicity {}
    #[doc = include_str!("../../../book/src/hard-instances.md")]
    mod hard_instances {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
