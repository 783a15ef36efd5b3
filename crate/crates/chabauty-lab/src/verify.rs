//! Invariant suites behind the `verify` subcommand: each suite stresses
//! one module's contracts on randomized data and reports its worst
//! residual. The acceptance tests run heavier versions of the same
//! checks; these are sized to finish in seconds.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chabauty::{
    geometric_kernel_ray, hausdorff, sample_structured, BallSpec,
};
use crate::decompose::{cartan_kak, iwasawa, polar, project_to_chamber};
use crate::error::Error;
use crate::limits::{
    build_limit_group, descriptors_equal, is_distal, member, normalizes,
    verify_nilpotency_characterization, LimitGroupDescriptor, NormalizerTarget,
};
use crate::linalg;
use crate::model::{
    b_theta, bracket, cartan_involution, group_exp, is_group_member, killing_form, random_algebra,
    random_group, GroupElement, GroupModel, Tolerances,
};
use crate::polyhedral::{corner_coords, point_from_corner_coords, CornerCoord};
use crate::roots::{build_root_system, build_subset, root_space_project};

/// Distality assertions run at this tolerance: defective unit-circle
/// spectra scatter by roughly machine epsilon to the inverse Jordan size,
/// far above the spectrum tolerance but far below any genuine escape.
pub const DISTAL_TOL: f64 = 1e-2;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub model: String,
    pub passed: bool,
    pub max_residual: f64,
    pub detail: String,
}

fn suite(name: &str, model: &GroupModel, outcome: Result<f64, Error>, bound: f64) -> SuiteResult {
    match outcome {
        Ok(max_residual) => SuiteResult {
            name: name.into(),
            model: model.to_string(),
            passed: max_residual <= bound,
            max_residual,
            detail: format!("bound {bound:.1e}"),
        },
        Err(e) => SuiteResult {
            name: name.into(),
            model: model.to_string(),
            passed: false,
            max_residual: f64::INFINITY,
            detail: e.to_string(),
        },
    }
}

fn algebra_suite(
    model: &GroupModel,
    tol: &Tolerances,
    seed: u64,
) -> Result<f64, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = random_algebra(model, 1.0, &mut rng);
        let y = random_algebra(model, 1.0, &mut rng);
        let z = random_algebra(model, 1.0, &mut rng);
        let jac = bracket(&x, &bracket(&y, &z)?)?
            .add(&bracket(&y, &bracket(&z, &x)?)?)?
            .add(&bracket(&z, &bracket(&x, &y)?)?)?;
        worst = worst.max(jac.norm());
        let inv = killing_form(&bracket(&z, &x)?, &y)? + killing_form(&x, &bracket(&z, &y)?)?;
        worst = worst.max(inv.abs());
        let t1 = cartan_involution(&bracket(&x, &y)?);
        let t2 = bracket(&cartan_involution(&x), &cartan_involution(&y))?;
        worst = worst.max(linalg::fro_dist(&t1.mat, &t2.mat));
        let pos = b_theta(&x, &x)?;
        if pos <= 0.0 {
            return Err(Error::validation("positive form failed on a random element"));
        }
        // Exponentials of bounded elements stay in the group.
        let big = random_algebra(model, 5.0, &mut rng);
        if !is_group_member(&group_exp(&big).mat, model, 100.0 * tol.membership_tol)? {
            return Err(Error::validation("exponential left the group"));
        }
        let g = random_group(model, 1.0, &mut rng);
        let lhs = g.conjugate(&group_exp(&x))?;
        let rhs = group_exp(&g.ad_action(&x)?);
        worst = worst.max(linalg::fro_dist(&lhs.mat, &rhs.mat));
    }
    Ok(worst)
}

fn root_suite(model: &GroupModel, tol: &Tolerances, _seed: u64) -> Result<f64, Error> {
    let rs = build_root_system(model);
    let expected = match *model {
        GroupModel::SpecialLinear { n } => n * (n - 1),
        GroupModel::SplitOrthogonal { p } => 2 * p * (p - 1),
    };
    if rs.roots.len() != expected {
        return Err(Error::validation("root count mismatch"));
    }
    let mut worst: f64 = 0.0;
    for (root, vector) in rs.roots.iter().zip(rs.root_vectors.iter()) {
        for (k, h) in rs.cartan.a_basis.iter().enumerate() {
            let br = bracket(h, vector)?;
            worst = worst.max(linalg::fro_dist(&br.mat, &vector.scale(root.functional[k]).mat));
        }
        let tv = cartan_involution(vector);
        let proj = root_space_project(&rs, &tv)?;
        worst = worst.max(proj.residual);
    }
    // Bracket grading over all root pairs.
    for i in 0..rs.roots.len() {
        for j in 0..rs.roots.len() {
            let br = bracket(&rs.root_vectors[i], &rs.root_vectors[j])?;
            match crate::roots::root_sum_index(&rs, i, j) {
                Some(None) => {
                    let proj = root_space_project(&rs, &br)?;
                    for c in &proj.per_root {
                        worst = worst.max(c.abs());
                    }
                }
                Some(Some(k)) => {
                    let proj = root_space_project(&rs, &br)?;
                    for (idx, c) in proj.per_root.iter().enumerate() {
                        if idx != k {
                            worst = worst.max(c.abs());
                        }
                    }
                    worst = worst.max(proj.zero.norm());
                }
                None => worst = worst.max(br.norm()),
            }
        }
    }
    // Subset invariants for every subset.
    for bits in 0..(1u32 << rs.rank()) {
        let subset: BTreeSet<usize> = (0..rs.rank()).filter(|i| bits >> i & 1 == 1).collect();
        let sd = build_subset(&rs, &subset)?;
        if sd.a_upper_basis.len() != subset.len() {
            return Err(Error::validation("complement torus dimension mismatch"));
        }
        for &i in &sd.sigma_upper_plus {
            for h in &sd.a_lower_basis {
                worst = worst.max(rs.evaluate(&rs.roots[i], h, tol)?.abs());
            }
        }
        for x in &sd.a_lower_basis {
            for y in &sd.a_upper_basis {
                let cross = killing_form(x, y)?.abs();
                let scale = (killing_form(x, x)? * killing_form(y, y)?).sqrt();
                worst = worst.max(cross / (1.0 + scale));
            }
        }
        for x in &sd.n_upper_basis {
            for y in &sd.n_lower_basis {
                let br = bracket(x, y)?;
                if br.norm() > 1e-12 {
                    worst = worst
                        .max(linalg::span_residual(&sd.n_lower_span, &linalg::vectorize(&br.mat)));
                }
            }
        }
    }
    Ok(worst)
}

fn factorization_suite(model: &GroupModel, tol: &Tolerances, seed: u64) -> Result<f64, Error> {
    let rs = build_root_system(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..15 {
        let g = random_group(model, 3.0, &mut rng);
        let f = iwasawa(&g, false, tol)?;
        worst = worst.max(f.residual(&g));
        let f_op = iwasawa(&g, true, tol)?;
        worst = worst.max(f_op.residual(&g));
        let (x, k) = polar(&g, tol)?;
        worst = worst.max(linalg::fro_dist(&group_exp(&x).mul(&k)?.mat, &g.mat));
        let c = cartan_kak(&rs, &g, tol)?;
        worst = worst.max(c.residual(&g));
        let (h, _) = project_to_chamber(&rs, &x, tol)?;
        worst = worst.max(linalg::fro_dist(&c.a.mat, &group_exp(&h).mat));
    }
    // Continuity of the chamber factor under in-group perturbations.
    let g = random_group(model, 1.5, &mut rng);
    let delta = random_algebra(model, 1.0, &mut rng);
    let a0 = cartan_kak(&rs, &g, tol)?.a;
    let mut last = f64::INFINITY;
    for j in 1..=8 {
        let gj = g.mul(&group_exp(&delta.scale(10f64.powi(-j))))?;
        let aj = cartan_kak(&rs, &gj, tol)?.a;
        let dist = linalg::fro_dist(&aj.mat, &a0.mat);
        if dist > last * 1.01 + 1e-12 {
            return Err(Error::validation("chamber factor continuity failed"));
        }
        last = dist;
    }
    worst = worst.max(last);
    Ok(worst)
}

fn limit_suite(model: &GroupModel, tol: &Tolerances, seed: u64) -> Result<f64, Error> {
    let rs = build_root_system(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for bits in 0..(1u32 << rs.rank()) {
        let subset: BTreeSet<usize> = (0..rs.rank()).filter(|i| bits >> i & 1 == 1).collect();
        if subset.len() == rs.rank() {
            continue;
        }
        let desc = LimitGroupDescriptor::plain(&rs, subset.clone());
        let sg = build_limit_group(&rs, &desc)?;
        for _ in 0..10 {
            let x = sg.random_member(0.8, &mut rng);
            let y = sg.random_member(0.8, &mut rng);
            if !member(&x.mul(&y)?, &sg, 100.0 * tol.membership_tol)? {
                return Err(Error::validation("product left the limit group"));
            }
            if !member(&x.inverse()?, &sg, 100.0 * tol.membership_tol)? {
                return Err(Error::validation("inverse left the limit group"));
            }
            if !is_distal(&x, &rs, DISTAL_TOL)? {
                return Err(Error::validation("sampled member is not distal"));
            }
            if !normalizes(&x, NormalizerTarget::LimitGroup, &sg.subset_data, 1e-6)? {
                return Err(Error::validation("member fails to normalize its group"));
            }
        }
        let report =
            verify_nilpotency_characterization(&rs, &sg.subset_data, 60, tol.spectrum_tol, &mut rng)?;
        if report.failures > 0 {
            return Err(Error::validation("nilpotency characterization failed"));
        }
        // Normalizer dichotomy on the kernel nilpotent algebra.
        let sd = &sg.subset_data;
        if let Some(&pos_idx) = sd.sigma_lower_plus.first() {
            let neg = rs.root_index(&rs.roots[pos_idx].negated()).unwrap();
            let bad = group_exp(&rs.root_vectors[neg].scale(0.9));
            if normalizes(&bad, NormalizerTarget::NilpotentAlgebra, sd, 1e-6)? {
                return Err(Error::validation("opposite root vector should not normalize"));
            }
        }
        let a = group_exp(&rs.torus_element(&DVector::from_fn(rs.rank(), |i, _| {
            0.3 + 0.1 * i as f64
        })));
        if !normalizes(&a, NormalizerTarget::NilpotentAlgebra, sd, 1e-7)? {
            return Err(Error::validation("torus should normalize the nilpotent algebra"));
        }
        // Descriptor equality: twist by a finite-centralizer element.
        let m = sd.m_elements[sd.m_elements.len() - 1].clone();
        let twisted = LimitGroupDescriptor::new(
            &rs,
            subset.clone(),
            GroupElement::identity(*model),
            m,
            tol,
        )?;
        if !descriptors_equal(&desc, &twisted, &rs, 1e-6)? {
            return Err(Error::validation("finite twist should preserve the descriptor"));
        }
        worst = worst.max(report.max_compact_norm_among_nilpotent);
    }
    Ok(worst)
}

fn sampling_suite(model: &GroupModel, tol: &Tolerances, seed: u64) -> Result<f64, Error> {
    let rs = build_root_system(model);
    // Small ball, small budget: pseudo-metric sanity and a short
    // degeneration run on the empty subset.
    let ball = BallSpec::new(3.0, 0.2, 800)?;
    let sd = build_subset(&rs, &BTreeSet::new())?;
    let desc = LimitGroupDescriptor::plain(&rs, BTreeSet::new());
    let sg = build_limit_group(&rs, &desc)?;
    let s1 = sample_structured(&rs, &sg, &ball, seed)?;
    let s2 = sample_structured(&rs, &sg, &ball, seed ^ 1)?;
    if hausdorff(&s1, &s1)? != 0.0 {
        return Err(Error::validation("self distance must vanish"));
    }
    if hausdorff(&s1, &s2)? != hausdorff(&s2, &s1)? {
        return Err(Error::validation("distance must be symmetric"));
    }
    let ray = geometric_kernel_ray(&rs, &sd, 2.0)?;
    let a_seq: Vec<GroupElement> = (1..=6).map(|n| group_exp(&ray.scale(n as f64))).collect();
    let (table, _, _) =
        crate::chabauty::convergence_experiment(&rs, &sd, &a_seq, &ball, seed, tol)?;
    if !table.decreasing_from(4) {
        return Err(Error::validation("degeneration distances fail to decrease"));
    }
    Ok(table.final_distance())
}

fn polyhedral_suite(model: &GroupModel, tol: &Tolerances, seed: u64) -> Result<f64, Error> {
    let rs = build_root_system(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let bits: u32 = rng.random_range(0..(1 << rs.rank()));
        let subset: BTreeSet<usize> = (0..rs.rank()).filter(|i| bits >> i & 1 == 1).collect();
        let coords: Vec<CornerCoord> = (0..rs.rank())
            .map(|i| {
                if subset.contains(&i) {
                    CornerCoord::Finite(rng.random::<f64>() * 2.0)
                } else {
                    CornerCoord::Infinite
                }
            })
            .collect();
        let p = point_from_corner_coords(&rs, &coords, tol)?;
        let back = corner_coords(&rs, &p, tol)?;
        for (c1, c2) in coords.iter().zip(back.iter()) {
            match (c1, c2) {
                (CornerCoord::Finite(a), CornerCoord::Finite(b)) => {
                    worst = worst.max((a - b).abs())
                }
                (CornerCoord::Infinite, CornerCoord::Infinite) => {}
                _ => return Err(Error::validation("finite/infinite chart mismatch")),
            }
        }
        // The chart map is consistent with descriptor equality for
        // finite-centralizer twists of the group datum.
        let sd = build_subset(&rs, &subset)?;
        let g = random_group(model, 0.6, &mut rng);
        let cp1 = crate::polyhedral::CompactifiedPoint {
            g: g.clone(),
            pt: p.clone(),
        };
        let cp2 = crate::polyhedral::CompactifiedPoint {
            g: g.mul(&sd.m_elements[sd.m_elements.len() - 1])?,
            pt: p,
        };
        if !crate::polyhedral::equivalent(&rs, &cp1, &cp2, tol)? {
            return Err(Error::validation("finite twist should be chart-equivalent"));
        }
    }
    Ok(worst)
}

/// Run every suite over a list of models.
pub fn run_all(models: &[GroupModel], tol: &Tolerances, seed: u64) -> Vec<SuiteResult> {
    let mut out = Vec::new();
    for model in models {
        out.push(suite(
            "algebra-structure",
            model,
            algebra_suite(model, tol, seed),
            1e3 * tol.factorization_tol,
        ));
        out.push(suite(
            "root-system",
            model,
            root_suite(model, tol, seed),
            1e-8,
        ));
        out.push(suite(
            "factorizations",
            model,
            factorization_suite(model, tol, seed),
            1e-7,
        ));
        out.push(suite(
            "limit-groups",
            model,
            limit_suite(model, tol, seed),
            f64::INFINITY,
        ));
        out.push(suite(
            "sampling",
            model,
            sampling_suite(model, tol, seed),
            0.5,
        ));
        out.push(suite(
            "polyhedral",
            model,
            polyhedral_suite(model, tol, seed),
            1e-8,
        ));
    }
    out
}

/// The verification model list used by default.
pub fn default_models() -> Vec<GroupModel> {
    vec![
        GroupModel::special_linear(2).unwrap(),
        GroupModel::special_linear(3).unwrap(),
        GroupModel::special_linear(4).unwrap(),
        GroupModel::split_orthogonal(2).unwrap(),
    ]
}
