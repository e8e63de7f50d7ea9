//! Periodic phase field crystal (PFC) solver built on the second-order
//! exponential time differencing Runge–Kutta scheme (ETDRK2), together with
//! a harness that checks the discrete identities and inequalities behind its
//! global-in-time energy stability.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: periodic grids, grid functions, difference operators, inner products.
//! - [`phifunc`]: stable scalar φ-functions of exponential integrators.
//! - [`spectral`]: DFT, operator symbols and every diagonal operator used by the scheme.
//! - [`energy`]: discrete free energy, chemical potential, H² bound.
//! - [`scheme`]: the ETDRK2 stepper, κ policies, the a priori constants chain, run driver.
//! - [`verify`]: randomized checks of the analysis ingredients.
//! - [`cli`]: config parsing, snapshot/CSV persistence and the `pfc` subcommands.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is on (the default) and plain iterators otherwise.
//! Reductions use a fixed chunking, so results are bit-identical either way.

pub mod cli;
pub mod energy;
pub mod error;
pub mod grid;
pub mod par;
pub mod phifunc;
pub mod scheme;
pub mod spectral;
pub mod verify;

pub use error::{PfcError, Result};
pub use grid::{GridSpec, Norms, RealField, StaggeredField};
