//! pinlab: a numerical laboratory for polymer pinning on heavy-tailed
//! renewal processes with quenched Gaussian disorder.
//!
//! The pieces: excursion laws with regularly varying tails ([`law`]), the
//! annealed thermodynamics by convex duality ([`annealed`]), exact finite-size
//! partition functions by log-domain dynamic programming ([`dp`]), renewal
//! return masses ([`renewal`]), path/overlap simulation ([`paths`]), and
//! theorem-level experiments ([`experiments`]) behind a deterministic CLI.

pub mod annealed;
pub mod cli;
pub mod config;
pub mod dp;
pub mod experiments;
pub mod law;
pub mod numeric;
pub mod output;
pub mod paths;
pub mod renewal;
pub mod rng;
pub mod stats;
pub mod sv;

pub use annealed::{solve_annealed, AnnealedSolution, CorrLengthRequest, PinningParams};
pub use law::{Excursion, ExcursionLaw, LawKind, TiltedLaw};
pub use sv::SlowlyVarying;
