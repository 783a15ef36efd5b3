//! Degeneration of conjugates of the compact subgroup toward a boundary
//! limit group, measured by pointed Hausdorff distances between finite
//! nets.
//!
//! Run with `cargo run --release --example convergence`.

use std::collections::BTreeSet;

use chabauty_lab::chabauty::{
    convergence_experiment, geometric_kernel_ray, verify_accumulation_criterion, BallSpec,
};
use chabauty_lab::model::group_exp;
use chabauty_lab::{build_root_system, build_subset, GroupModel, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let model = GroupModel::special_linear(3).unwrap();
    let rs = build_root_system(&model);
    let subset: BTreeSet<usize> = [0].into_iter().collect();
    let sd = build_subset(&rs, &subset).unwrap();

    let ray = geometric_kernel_ray(&rs, &sd, 2.0).unwrap();
    let a_seq: Vec<_> = (1..=10).map(|n| group_exp(&ray.scale(n as f64))).collect();
    let ball = BallSpec::new(6.0, 0.15, 2000).unwrap();

    let (table, nets, limit_net) =
        convergence_experiment(&rs, &sd, &a_seq, &ball, 7, &tol).unwrap();
    print!("{}", table.to_csv());
    println!("final distance: {:.3e}", table.final_distance());
    println!("limit net: {} points, coverage estimate {:.3}", limit_net.len(), limit_net.coverage_estimate);

    let report = verify_accumulation_criterion(&nets, &limit_net, 0.5).unwrap();
    println!(
        "sequential criterion: approximation {}, accumulation {}",
        report.approximation_holds, report.accumulation_holds
    );
}
