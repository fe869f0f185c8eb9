//! Spin-glass Boltzmann distributions and their continuous duals.
//!
//! The crate turns a discrete spin-glass Hamiltonian into a smooth density
//! over `R^N`, draws equilibrium data from it with parallel tempering, fits
//! real NVP normalizing flows to that density under forward or reverse
//! Kullback-Leibler objectives, and measures the physics (overlap order
//! parameter, ultrametric triangle structure, free-energy bounds) of the
//! result.
//!
//! The crate is `no_std` (it requires `alloc`); everything that touches the
//! operating system, including file formats, threads, and the command line,
//! lives in the companion `glassflow` crate. All randomness flows through
//! explicitly seeded ChaCha streams so that every run is reproducible bit
//! for bit.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analytics;
pub mod autodiff;
pub mod error;
pub mod exec;
pub mod flow;
pub mod linalg;
pub mod pt;
pub mod rng;
pub mod spinglass;
pub mod train;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
