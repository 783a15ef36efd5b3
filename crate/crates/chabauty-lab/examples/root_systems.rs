//! Build the restricted root systems of both models and inspect the
//! subset-indexed data: torus splittings, root partitions, nilpotent
//! algebras, and the finite centralizer.
//!
//! Run with `cargo run --release --example root_systems`.

use std::collections::BTreeSet;

use chabauty_lab::{build_root_system, build_subset, GroupModel};

fn main() {
    for model in [
        GroupModel::special_linear(3).unwrap(),
        GroupModel::split_orthogonal(2).unwrap(),
    ] {
        let rs = build_root_system(&model);
        println!("model {model}: rank {}, {} roots", rs.rank(), rs.roots.len());
        println!("  base coordinates:");
        for (i, alpha) in rs.base.iter().enumerate() {
            println!("    a{}: {:?}  values on the torus basis {:?}", i + 1, alpha.coeffs, alpha.functional);
        }
        // Walk every subset of the base and print the derived dimensions.
        for bits in 0..(1u32 << rs.rank()) {
            let subset: BTreeSet<usize> = (0..rs.rank()).filter(|i| bits >> i & 1 == 1).collect();
            let sd = build_subset(&rs, &subset).unwrap();
            println!(
                "  subset {:?}: kernel torus dim {}, complement dim {}, nilpotent dim {}, compact dim {}, |M| = {}",
                subset,
                sd.a_lower_basis.len(),
                sd.a_upper_basis.len(),
                sd.n_lower_basis.len(),
                sd.k_upper_basis.len(),
                sd.m_elements.len(),
            );
        }
        println!();
    }
}
