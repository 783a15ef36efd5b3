//! Numerical laboratory for closed subgroups of the split matrix groups
//! SL(n, R) and SO0(p, p): group decompositions, boundary limit subgroups,
//! pointed Hausdorff sampling of closed subgroups, and the polyhedral
//! corner charts with their map onto limit-subgroup descriptors.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! model  ->  roots  ->  decompose  ->  limits  ->  chabauty / polyhedral
//! ```
//!
//! where `model` holds the matrix carriers and Lie-algebra primitives,
//! `roots` the restricted root systems with explicit root vectors,
//! `decompose` the Iwasawa / polar / Cartan factorizations, `limits` the
//! boundary subgroups and their classification tests, `chabauty` the
//! finite-net subgroup samples and pointed Hausdorff distances, and
//! `polyhedral` the corner charts of the polyhedral compactification.
//!
//! See the crate examples for runnable walkthroughs of each capability and
//! `verify` for the full invariant suites behind the CLI's `verify`
//! subcommand.

pub mod chabauty;
pub mod cli;
pub mod decompose;
pub mod error;
pub mod limits;
pub mod linalg;
pub mod model;
pub mod polyhedral;
pub mod report;
pub mod roots;
pub mod verify;

pub use error::Error;
pub use model::{
    b_theta, bracket, cartan_involution, group_exp, group_log, is_algebra_member, is_group_member,
    killing_form, AlgebraElement, GroupElement, GroupModel, Tolerances,
};
pub use roots::{build_root_system, build_subset, RootSystem, SubsetData};
