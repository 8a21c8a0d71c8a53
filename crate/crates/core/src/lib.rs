//! Local and nonlocal LWR traffic models on a uniform space-time grid.
//!
//! Densities are normalized by the jam density. See the README for the
//! conventions on cells, rows and collars.

pub mod boundary;
pub mod error;
pub mod fd;
pub mod grid;
pub mod kernel;
pub mod metrics;
pub mod ngsim;
pub mod nonlocal;
pub mod quadrature;
pub mod solver;

pub use boundary::{BoundaryStrategy, StrategyKind, ThickData, VariableShape};
pub use error::{Error, Result};
pub use fd::FundamentalDiagram;
pub use grid::{make_grid, DensityField, Grid, Region};
pub use kernel::{DiscreteKernel, Kernel, KernelFamily};
pub use metrics::{relative_l2, ErrorReport};
pub use nonlocal::DelaySpec;
pub use solver::{run, BoundaryData, Model, RunInfo, RunOutput, Scenario};
