//! Backward hops, b-monotonic paths and B-MSNET analysis.
//!
//! For a path `v_1, …, v_{l+1}` toward a target `x_t`, hop `i` has
//! `r_i = ‖x_i − x_t‖ − ‖x_{i+1} − x_t‖`. Hops with `r < 0` move away from
//! the target; a path with `b` of them is *b-monotonic*, and a graph in
//! which every ordered pair is joined by some path with at most `B`
//! backward hops is a *B-MSNET*.
//!
//! All distances in this module are accumulated in double precision.

mod minb;
mod profile;
mod theorem;

pub use minb::{certify_bmsnet, min_b, BTable, CertifyOptions, MinB, MsnetCertificate};
pub use profile::{r_profile, r_profile_to_vector, PathRProfile, ProfileTarget};
pub use theorem::{
    theorem_quantities, CellQuantities, Condition, GlobalQuantities, QueryReport, TheoremInput, TheoremReport,
};
