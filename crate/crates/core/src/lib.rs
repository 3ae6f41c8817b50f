//! Matrix-free solvers for sequences of time-domain component-separation systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`smalldense`]: dense factorizations and eigensolvers for the small projected problems.
//! * [`operators`]: pointing, noise weighting, component mixing, the system operator and its
//!   block-diagonal preconditioner.
//! * [`solvers`]: PCG and deflated PCG (DEF1 and A-DEF2 modes) with convergence logging.
//! * [`recycling`]: construction of deflation spaces from previous solves.
//! * [`driver`]: the full procedure over a sequence of spectral parameters.
//! * [`simulator`]: seeded synthetic observations and their on-disk archive format.

pub mod driver;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod recycling;
pub mod simulator;
pub mod smalldense;
pub mod solvers;

pub use error::{Error, Result};
