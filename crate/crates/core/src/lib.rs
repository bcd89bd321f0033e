//! Maximum margin criterion subspace learning: direct and kernel solvers,
//! random and layered variants, two-directional projections for images, a
//! cascaded filter-bank network, and a nearest-neighbour evaluation harness.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod mmc_2d;
pub mod mmc_core;
pub mod mmc_net;
pub mod mmc_variants;
pub mod numerics;
pub mod scatter;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
