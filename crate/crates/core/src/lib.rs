//! Stochastic heat equations driven by compensated and non-compensated
//! Poisson random measures.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernel`]: symmetric α-stable symbols, transition densities and their
//!   structural identities, the Dalang integral Υ(β) and the heat-kernel
//!   envelope constant.
//! - [`measure`]: Lévy measures, space-time windows and exact Poisson random
//!   measure sampling.
//! - [`integral`]: non-compensated and compensated Poisson integrals.
//! - [`solver`]: the event-driven mild solution of the non-compensated
//!   equation and the lattice Picard solution of the compensated one.
//! - [`bounds`]: the analytic time-increment bounds and the existence
//!   condition.
//! - [`analysis`]: coupled Monte Carlo estimators, Hölder regression and
//!   continuity verdicts.

pub mod analysis;
pub mod bounds;
pub mod csv;
pub mod integral;
pub mod kernel;
pub mod measure;
pub mod quad;
pub mod seed;
pub mod solver;

pub use kernel::{LevySymbol, StableKernel};
pub use measure::{LevyMeasure, PointCloud, Window};
pub use seed::derive_seed;
