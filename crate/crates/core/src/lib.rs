//! Stochastic collocation for the stochastic Landau-Lifshitz-Gilbert equation.
//!
//! The Brownian driver is expanded in the Lévy-Ciesielski basis
//! ([`lc_wiener`]), each parameter sample is solved as a random-coefficient
//! LLG problem with a tangent-plane finite element scheme ([`llg`]), and the
//! parameter-to-solution map is approximated by profit-driven sparse grids
//! ([`index_set`], [`interp1d`], [`sparse_grid`]) in single- and multi-level
//! form ([`collocation`]).

pub mod collocation;
pub mod config;
pub mod index_set;
pub mod interp1d;
pub mod lc_wiener;
pub mod llg;
pub mod payload;
pub mod sparse_grid;

pub use index_set::{IndexSet, MultiIndex, ProfitParams, ProfitVariant};
pub use interp1d::{NodeFamily1D, Nodes1D};
pub use lc_wiener::ParamVector;
pub use payload::Payload;
pub use sparse_grid::{GridPoint, SparseGrid, SparseGridInterpolant};
