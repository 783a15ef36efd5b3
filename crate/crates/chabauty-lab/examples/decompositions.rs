//! The three factorizations on a random group element: Iwasawa, polar,
//! and the compact-chamber-compact form whose middle factor is unique.
//!
//! Run with `cargo run --release --example decompositions`.

use chabauty_lab::decompose::{cartan_kak, iwasawa, polar};
use chabauty_lab::model::{group_exp, random_group};
use chabauty_lab::{build_root_system, GroupModel, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let tol = Tolerances::default();
    let model = GroupModel::split_orthogonal(2).unwrap();
    let rs = build_root_system(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let g = random_group(&model, 1.5, &mut rng);
    println!("g =\n{:.4}", g.mat);

    let f = iwasawa(&g, false, &tol).unwrap();
    println!("iwasawa: k a n with residual {:.2e}", f.residual(&g));
    println!("a = diag{:?}", (0..4).map(|i| f.a.mat[(i, i)]).collect::<Vec<_>>());

    let f_op = iwasawa(&g, true, &tol).unwrap();
    println!("opposite variant: lower unipotent factor, residual {:.2e}", f_op.residual(&g));

    let (x, k) = polar(&g, &tol).unwrap();
    println!("polar: |X| = {:.4}, k in the compact subgroup: {}", x.norm(), k.in_maximal_compact(1e-9));
    let recon = group_exp(&x).mul(&k).unwrap();
    println!("polar residual {:.2e}", (recon.mat - &g.mat).norm());

    let c = cartan_kak(&rs, &g, &tol).unwrap();
    println!(
        "chamber factor a = diag{:?}, residual {:.2e}",
        (0..4).map(|i| c.a.mat[(i, i)]).collect::<Vec<_>>(),
        c.residual(&g)
    );
}
