//! The polyhedral corner chart: facet data, extended-real coordinates,
//! limits of chart sequences, and the map onto limit-group descriptors.
//!
//! Run with `cargo run --release --example corner_charts`.

use std::collections::BTreeSet;

use chabauty_lab::model::{random_algebra, AlgebraElement};
use chabauty_lab::polyhedral::{
    corner_coords, facet_of_vector, phi, point_from_corner_coords, polyhedral_limit,
    CompactifiedPoint, CornerCoord, PolyhedralPoint,
};
use chabauty_lab::{build_root_system, GroupModel, Tolerances};
use chabauty_lab::model::group_exp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let tol = Tolerances::default();
    let model = GroupModel::special_linear(3).unwrap();
    let rs = build_root_system(&model);

    // Sign partition of the roots at a chamber-wall element.
    let h = rs.torus_element(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
    let facet = facet_of_vector(&rs, &h, &tol).unwrap();
    println!(
        "wall element: {} vanishing roots, {} positive, span dim {}",
        facet.sigma_zero.len(),
        facet.sigma_plus.len(),
        facet.span_basis.len()
    );

    // Chart coordinates of a facet point and the inverse chart.
    let coords = vec![CornerCoord::Finite(1.5), CornerCoord::Infinite];
    let p = point_from_corner_coords(&rs, &coords, &tol).unwrap();
    println!("point on facet {:?}: coordinates {:?}", p.subset, corner_coords(&rs, &p, &tol).unwrap());

    // A chart sequence escaping one direction converges to a smaller facet.
    let seq: Vec<PolyhedralPoint> = (1..=12)
        .map(|n| {
            let coords = vec![CornerCoord::Finite(1.2), CornerCoord::Finite(n as f64)];
            point_from_corner_coords(&rs, &coords, &tol).unwrap()
        })
        .collect();
    let limit = polyhedral_limit(&rs, &seq, 8.0, &tol).unwrap();
    println!("chart limit lands on facet {:?}", limit.subset);

    // The canonical descriptor of a conjugated chart point.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let y = random_algebra(&model, 0.6, &mut rng);
    let k = group_exp(&AlgebraElement::new(model, (&y.mat - y.mat.transpose()) * 0.5, &tol).unwrap());
    let subset: BTreeSet<usize> = [0].into_iter().collect();
    let pt = PolyhedralPoint::new(&rs, subset, &AlgebraElement::zero(model), &tol).unwrap();
    let (desc, residual) = phi(&rs, &CompactifiedPoint { g: k, pt }, &tol).unwrap();
    println!(
        "descriptor: subset {:?}, canonicalization residual {:.2e}",
        desc.subset, residual
    );
}
