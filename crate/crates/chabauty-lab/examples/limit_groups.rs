//! Boundary limit subgroups: build one from a descriptor, probe
//! membership, check distality, the nilpotency characterization, the
//! normalizer tests, and classify a degenerating sequence.
//!
//! Run with `cargo run --release --example limit_groups`.

use std::collections::BTreeSet;

use chabauty_lab::chabauty::geometric_kernel_ray;
use chabauty_lab::limits::{
    build_limit_group, classify_sequence, is_distal, member, normalizes,
    verify_nilpotency_characterization, Classification, LimitGroupDescriptor, NormalizerTarget,
};
use chabauty_lab::model::group_exp;
use chabauty_lab::{build_root_system, build_subset, GroupModel, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let tol = Tolerances::default();
    let model = GroupModel::special_linear(3).unwrap();
    let rs = build_root_system(&model);
    let subset: BTreeSet<usize> = [0].into_iter().collect();

    let desc = LimitGroupDescriptor::plain(&rs, subset.clone());
    let sg = build_limit_group(&rs, &desc).unwrap();
    println!(
        "limit group for subset {:?}: compact dim {}, nilpotent dim {}, |M| = {}",
        subset,
        sg.subset_data.k_upper_basis.len(),
        sg.subset_data.n_lower_basis.len(),
        sg.subset_data.m_elements.len()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = sg.random_member(0.8, &mut rng);
    println!("random member:\n{:.4}", x.mat);
    println!("member: {}", member(&x, &sg, 1e-6).unwrap());
    println!("distal: {}", is_distal(&x, &rs, 1e-2).unwrap());
    println!(
        "normalizes its own group: {}",
        normalizes(&x, NormalizerTarget::LimitGroup, &sg.subset_data, 1e-6).unwrap()
    );

    // A torus element never belongs to a boundary subgroup.
    let h = rs.torus_element(&nalgebra::DVector::from_vec(vec![0.5, 0.2]));
    println!("torus exponential member: {}", member(&group_exp(&h), &sg, 1e-6).unwrap());

    // Inside the limit algebra, ad-nilpotency pins down the nilpotent part.
    let report = verify_nilpotency_characterization(&rs, &sg.subset_data, 500, 1e-6, &mut rng).unwrap();
    println!("nilpotency characterization: {} failures in {} trials", report.failures, report.trials);

    // Classify a sequence escaping through the subset's facet.
    let sd = build_subset(&rs, &subset).unwrap();
    let ray = geometric_kernel_ray(&rs, &sd, 2.0).unwrap();
    let seq: Vec<_> = (1..=12).map(|n| group_exp(&ray.scale(n as f64))).collect();
    match classify_sequence(&rs, &seq, None, &tol).unwrap() {
        Classification::Boundary { descriptor, diagnostics } => {
            println!(
                "classified: boundary with subset {:?}, torus-part residual {:.2e}",
                descriptor.subset, diagnostics.a_tail_residual
            );
        }
        Classification::Interior => println!("classified: interior"),
    }
}
