//! L-cumulants of finite discrete random vectors.
//!
//! Partition lattices, Möbius inversion between moments and cumulant-like
//! coordinates, tree cumulants and the model builders that use them. All
//! transforms run in exact rational arithmetic by default.

pub mod error;
pub mod io;
pub mod lattice;
pub mod lcumulant;
pub mod models;
pub mod moments;
pub mod partition;
pub mod radical;
pub mod sample;
pub mod scalar;
pub mod trees;

pub use error::{Error, Result};
pub use lattice::{LatticeFamily, PartitionLattice};
pub use moments::{CoordinateSystem, CoordinateVector, DiscreteDistribution, Mode, StateSpace};
pub use partition::{GroundSet, SetPartition};
pub use radical::Radical;
pub use scalar::{Rational, Scalar};
pub use trees::TreeTopology;
