//! The two exactly solvable spaces of closed subgroups: subgroups of the
//! integers and of the real line, with limits read off the spacing
//! parametrization.
//!
//! Run with `cargo run --release --example toy_spaces`.

use chabauty_lab::chabauty::{toy_limit_r, toy_limit_z, ToySubgroupR, ToySubgroupZ};

fn main() {
    let diverging: Vec<ToySubgroupR> = (1..=20).map(|n| ToySubgroupR::Lattice(n as f64)).collect();
    println!("spacings 1, 2, 3, ...      -> {:?}", toy_limit_r(&diverging).unwrap());

    let vanishing: Vec<ToySubgroupR> = (1..=20).map(|n| ToySubgroupR::Lattice(1.0 / n as f64)).collect();
    println!("spacings 1, 1/2, 1/3, ...  -> {:?}", toy_limit_r(&vanishing).unwrap());

    let settling: Vec<ToySubgroupR> = (1..=20).map(|n| ToySubgroupR::Lattice(3.0 + 0.5f64.powi(n))).collect();
    println!("spacings 3 + 2^-n          -> {:?}", toy_limit_r(&settling).unwrap());

    let oscillating: Vec<ToySubgroupR> =
        (1..=20).map(|n| ToySubgroupR::Lattice(if n % 2 == 0 { 1.0 } else { 2.0 })).collect();
    println!("oscillating spacings       -> {:?}", toy_limit_r(&oscillating).map_err(|e| e.to_string()));

    let constant_tail: Vec<ToySubgroupZ> =
        (1..=16).map(|n| ToySubgroupZ::Lattice(if n > 4 { 6 } else { n })).collect();
    println!("integer spacings -> 6       -> {:?}", toy_limit_z(&constant_tail).unwrap());

    let escaping: Vec<ToySubgroupZ> = (1..=16).map(|n| ToySubgroupZ::Lattice(n * n)).collect();
    println!("integer spacings n^2        -> {:?}", toy_limit_z(&escaping).unwrap());
}
