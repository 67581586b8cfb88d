//! Numerical weak-KAM laboratory for time-periodic positive definite
//! Lagrangians on flat tori.
//!
//! The pipeline discretizes the least-action cost between grid nodes into
//! min-plus (tropical) matrices, composes them into period kernels, extracts
//! the critical value as a minimum mean cycle, and runs the Lax-Oleinik
//! semigroup and its windowed variant with parameters on top of the kernel
//! algebra. Peierls barriers, action potentials, Aubry sets and
//! convergence-rate fits are all derived from the same kernels.

pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod karp;
pub mod kernel;
pub mod lagrangian;
pub mod monodromy;
pub mod rates;
pub mod value;
pub mod weak_kam;

pub use config::{InitialKind, OperatorKind, RunConfig};
pub use error::{Error, Result};
pub use grid::TorusGrid;
pub use kernel::{CostKernel, DiscretePath, PeriodKernel, StepKernels};
pub use lagrangian::{LagrangianSpec, ReferencePoint};
pub use value::ValueFunction;
