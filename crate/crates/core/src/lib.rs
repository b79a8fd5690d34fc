//! Desk-scale workbench for coarse pseudo-differential operators: operator
//! integration over partitions of unity, transplanted cosymbols, cosymbol
//! recovery, pseudolocality diagnostics and a Fredholm index engine.

pub mod coarse;
pub mod diagnostics;
pub mod geometry;
pub mod index;
pub mod liegroup;
pub mod operator;
pub mod opint;
pub mod profile;
pub mod rng;
pub mod symbol;
pub mod verify;

pub use coarse::{CoarseError, CoarseOperator, NuCutoff};
pub use diagnostics::CompactnessReport;
pub use geometry::{GeometryError, ManifoldGrid};
pub use index::{IndexError, IndexReport};
pub use liegroup::{GradedAlgebra, GroupGrid, LieError};
pub use operator::{c64, DiscreteOperator};
pub use opint::{OperatorField, OpintError, PartitionOfUnity};
pub use symbol::{Cosymbol, OrderClass, Symbol, SymbolError};
