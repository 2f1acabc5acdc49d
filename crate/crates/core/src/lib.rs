//! Coherent abstraction reactions `A + B2 -> AB + B` with quantum-degenerate
//! matter waves.
//!
//! Short-time pair production from vacuum noise is handled by [`analytic`]
//! (closed forms) and [`fock`] (an exact finite-number oracle). The seeded
//! mean-field stage lives in [`ensemble`], built on the reaction models in
//! [`model`] and the integrator in [`dynamics`]. Dark-state steady states,
//! adiabaticity and imbalance sweeps are in [`cpt`]. The `superchem` binary
//! reads its settings through [`config`] and writes results through [`io`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod config;
pub mod cpt;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod io;
pub mod model;

pub use error::{Error, Result};
pub use model::{initial_state, pulse_omega, ModeAmplitudes, ReactionVariant, SystemParams};

/// Version string recorded in run manifests.
pub const ARTIFACT_VERSION: &str = concat!("superchem ", env!("CARGO_PKG_VERSION"));
