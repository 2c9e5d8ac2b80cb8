//! Tree topologies, tree partitions and tree cumulants.
mod cumulants;
mod gmm;
mod topology;

pub use cumulants::{
    normalized_tree_cumulants, normalized_tree_cumulants_f64, subset_moments, tree_cumulants, tree_cumulants_central,
};
pub use gmm::{
    contracted_closed_form, contracted_tree_cumulants, gmm_tree_cumulants, trivalent_refinement, EdgeTable, GmmParams,
};
pub(crate) use topology::forest_partitions;
pub use topology::{Subtree, TreeTopology};
