//! The polyhedral compactification of the split torus algebra: facets of
//! the root arrangement, corner charts with extended-real coordinates,
//! polyhedral limits, and the map phi sending a chart point to the
//! descriptor of its boundary subgroup.
//!
//! Only the positive-chamber chart is implemented; other chambers are
//! reached by reflecting inputs into it first.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chabauty::{
    hausdorff, sample_structured, transport_limit_net, BallSpec, ConvergenceRow, ConvergenceTable,
};
use crate::decompose::{iwasawa, polar, project_to_chamber_subset};
use crate::error::Error;
use crate::limits::{build_limit_group, descriptors_equal, LimitGroupDescriptor};
use crate::linalg;
use crate::model::{group_exp, AlgebraElement, GroupElement, Tolerances};
use crate::roots::{build_subset, root_space_project, RootSystem};

/// An open cone of the root arrangement: the roots vanishing on it, the
/// roots positive on it, the roots negative on it, and a basis of its
/// linear span. The defining sign conditions are certified by an interior
/// point.
#[derive(Clone, Debug)]
pub struct Facet {
    pub sigma_zero: Vec<usize>,
    pub sigma_plus: Vec<usize>,
    pub sigma_minus: Vec<usize>,
    pub span_basis: Vec<AlgebraElement>,
    pub interior_point: AlgebraElement,
}

/// The facet of the root arrangement containing a torus element: the sign
/// partition of the roots with a dead band around zero. The zero vector
/// lands by convention on the facet where every root vanishes.
pub fn facet_of_vector(
    rs: &RootSystem,
    h: &AlgebraElement,
    tol: &Tolerances,
) -> Result<Facet, Error> {
    let coords = rs.a_coordinates(h, tol)?;
    let mut sigma_zero = Vec::new();
    let mut sigma_plus = Vec::new();
    let mut sigma_minus = Vec::new();
    for (i, root) in rs.roots.iter().enumerate() {
        let v: f64 = root
            .functional
            .iter()
            .zip(coords.iter())
            .map(|(f, c)| f * c)
            .sum();
        if v.abs() <= tol.membership_tol {
            sigma_zero.push(i);
        } else if v > 0.0 {
            sigma_plus.push(i);
        } else {
            sigma_minus.push(i);
        }
    }
    // The span of the facet is the joint kernel of its vanishing roots.
    let constraint = DMatrix::from_fn(sigma_zero.len(), rs.rank(), |r, c| {
        rs.roots[sigma_zero[r]].functional[c]
    });
    let span_coords = linalg::nullspace(&constraint, linalg::RANK_CUTOFF);
    let span_basis = (0..span_coords.ncols())
        .map(|j| rs.torus_element(&span_coords.column(j).clone_owned()))
        .collect();
    Ok(Facet {
        sigma_zero,
        sigma_plus,
        sigma_minus,
        span_basis,
        interior_point: h.clone(),
    })
}

/// A point of the compactified torus: the subset naming the chamber facet
/// (the full subset is the interior copy) and a coset representative
/// normalized to the complement torus and to the subset-induced chamber.
#[derive(Clone, Debug)]
pub struct PolyhedralPoint {
    pub subset: BTreeSet<usize>,
    pub rep: AlgebraElement,
}

impl PolyhedralPoint {
    /// Normalizing constructor: the representative is projected onto the
    /// complement torus (quotienting by the kernel torus) and must land in
    /// the subset-induced closed chamber.
    pub fn new(
        rs: &RootSystem,
        subset: BTreeSet<usize>,
        rep: &AlgebraElement,
        tol: &Tolerances,
    ) -> Result<Self, Error> {
        if subset.iter().any(|&i| i >= rs.rank()) {
            return Err(Error::InvalidSubset);
        }
        let sd = build_subset(rs, &subset)?;
        let coords = rs.a_coordinates(rep, tol)?;
        let upper = sd.project_upper(&coords);
        for &i in &subset {
            let v: f64 = rs.base[i]
                .functional
                .iter()
                .zip(upper.iter())
                .map(|(f, c)| f * c)
                .sum();
            if v < -tol.membership_tol * (1.0 + upper.norm()) {
                return Err(Error::OutsideCorner(format!(
                    "root {i} evaluates to {v:.3e} on the representative"
                )));
            }
        }
        Ok(PolyhedralPoint {
            subset,
            rep: rs.torus_element(&upper),
        })
    }

    /// The interior point of the chart determined by a closed-chamber
    /// element.
    pub fn interior(rs: &RootSystem, h: &AlgebraElement, tol: &Tolerances) -> Result<Self, Error> {
        let full: BTreeSet<usize> = (0..rs.rank()).collect();
        PolyhedralPoint::new(rs, full, h, tol)
    }

    pub fn is_interior(&self, rs: &RootSystem) -> bool {
        self.subset.len() == rs.rank()
    }

    pub fn to_json(&self, rs: &RootSystem) -> serde_json::Value {
        serde_json::json!({
            "I": self.subset.iter().map(|&i| rs.base[i].coeffs.clone()).collect::<Vec<_>>(),
            "rep": crate::model::serde_matrix::to_rows(&self.rep.mat),
        })
    }
}

/// One coordinate of the corner chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum CornerCoord {
    Finite(f64),
    Infinite,
}

impl CornerCoord {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            CornerCoord::Finite(v) => Some(v),
            CornerCoord::Infinite => None,
        }
    }
}

/// Chart coordinates against the positive chamber: the value of each
/// simple root on the representative where the root stays finite on the
/// facet, the point at infinity where it does not.
pub fn corner_coords(
    rs: &RootSystem,
    p: &PolyhedralPoint,
    tol: &Tolerances,
) -> Result<Vec<CornerCoord>, Error> {
    let coords = rs.a_coordinates(&p.rep, tol)?;
    let mut out = Vec::with_capacity(rs.rank());
    for i in 0..rs.rank() {
        if p.subset.contains(&i) {
            let v: f64 = rs.base[i]
                .functional
                .iter()
                .zip(coords.iter())
                .map(|(f, c)| f * c)
                .sum();
            if v < -tol.membership_tol {
                return Err(Error::OutsideCorner(format!(
                    "coordinate {i} is negative on the representative"
                )));
            }
            out.push(CornerCoord::Finite(v.max(0.0)));
        } else {
            out.push(CornerCoord::Infinite);
        }
    }
    Ok(out)
}

/// Inverse chart: assemble the point from extended-real coordinates.
pub fn point_from_corner_coords(
    rs: &RootSystem,
    coords: &[CornerCoord],
    tol: &Tolerances,
) -> Result<PolyhedralPoint, Error> {
    if coords.len() != rs.rank() {
        return Err(Error::validation("coordinate count must match the rank"));
    }
    let subset: BTreeSet<usize> = coords
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c, CornerCoord::Finite(_)))
        .map(|(i, _)| i)
        .collect();
    for (i, c) in coords.iter().enumerate() {
        if let CornerCoord::Finite(v) = c {
            if *v < 0.0 {
                return Err(Error::OutsideCorner(format!("coordinate {i} is negative")));
            }
        }
    }
    let sd = build_subset(rs, &subset)?;
    // Solve alpha_i(rep) = c_i over the complement torus; the system is
    // square and invertible there.
    let dim = sd.a_upper_coords.ncols();
    let mut sys = DMatrix::zeros(subset.len(), dim);
    let mut rhs = DVector::zeros(subset.len());
    for (r, &i) in subset.iter().enumerate() {
        for c in 0..dim {
            sys[(r, c)] = rs.base[i]
                .functional
                .iter()
                .zip(sd.a_upper_coords.column(c).iter())
                .map(|(f, x)| f * x)
                .sum();
        }
        rhs[r] = coords[i].finite().expect("subset indices are finite");
    }
    let rep_coords = if dim == 0 {
        DVector::zeros(rs.rank())
    } else {
        let sol = sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("corner chart system is singular".into()))?;
        &sd.a_upper_coords * sol
    };
    PolyhedralPoint::new(rs, subset, &rs.torus_element(&rep_coords), tol)
}

/// Limit of a sequence of chart points read in corner coordinates:
/// finite coordinates must settle, infinite ones must exceed every bound
/// (with a finite-horizon threshold standing in for "every bound").
pub fn polyhedral_limit(
    rs: &RootSystem,
    seq: &[PolyhedralPoint],
    threshold: f64,
    tol: &Tolerances,
) -> Result<PolyhedralPoint, Error> {
    if seq.len() < 2 {
        return Err(Error::NonConvergent("sequence too short".into()));
    }
    let rank = rs.rank();
    let coords: Vec<Vec<CornerCoord>> = seq
        .iter()
        .map(|p| corner_coords(rs, p, tol))
        .collect::<Result<_, _>>()?;
    let tail_start = seq.len() - seq.len().div_ceil(4);
    let mut out = Vec::with_capacity(rank);
    for i in 0..rank {
        let tail: Vec<CornerCoord> = coords[tail_start..].iter().map(|c| c[i]).collect();
        let finite: Vec<f64> = tail.iter().filter_map(|c| c.finite()).collect();
        if finite.is_empty() {
            out.push(CornerCoord::Infinite);
            continue;
        }
        if finite.len() == tail.len() {
            let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo <= 1e-4 {
                out.push(CornerCoord::Finite(*finite.last().unwrap()));
                continue;
            }
            let increasing = finite.windows(2).all(|w| w[1] >= w[0] - 1e-12);
            if increasing && *finite.last().unwrap() > threshold {
                out.push(CornerCoord::Infinite);
                continue;
            }
            return Err(Error::NonConvergent(format!(
                "coordinate {i} oscillates in the corner chart"
            )));
        }
        // Mixed finite and infinite entries: all finite entries must
        // already be past the threshold.
        if finite.iter().all(|v| *v > threshold) {
            out.push(CornerCoord::Infinite);
        } else {
            return Err(Error::NonConvergent(format!(
                "coordinate {i} mixes bounded and unbounded behaviour"
            )));
        }
    }
    point_from_corner_coords(rs, &out, tol)
}

/// A group element paired with a chart point; the raw datum mapped by phi
/// onto a boundary-subgroup descriptor.
#[derive(Clone, Debug)]
pub struct CompactifiedPoint {
    pub g: GroupElement,
    pub pt: PolyhedralPoint,
}

/// Logarithm of a unipotent matrix by the terminating series.
fn unipotent_log(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let d = mat.nrows();
    let nil = mat - DMatrix::identity(d, d);
    let mut acc = DMatrix::zeros(d, d);
    let mut term = DMatrix::identity(d, d);
    for k in 1..d {
        term = &term * &nil;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        acc += &term * (sign / k as f64);
    }
    acc
}

/// The descriptor of `g exp(rep) D^I exp(-rep) g^{-1}` in canonical form,
/// together with the numerical canonicalization residual.
///
/// The conjugator is reduced in stages: an Iwasawa factorization peels off
/// the compact part; the kernel-torus and kernel-nilpotent factors are
/// absorbed by the limit group's normalizer; what remains lies in the
/// derived centralizer and is put into chamber form there, its compact
/// flanks being absorbed as well.
pub fn phi(
    rs: &RootSystem,
    cp: &CompactifiedPoint,
    tol: &Tolerances,
) -> Result<(LimitGroupDescriptor, f64), Error> {
    let model = rs.model();
    if cp.g.model != model {
        return Err(Error::ModelMismatch);
    }
    let subset = cp.pt.subset.clone();
    let sd = build_subset(rs, &subset)?;

    // Conjugator of the plain limit group.
    let c_tilde = cp.g.mul(&group_exp(&cp.pt.rep))?;
    let f = iwasawa(&c_tilde, false, tol)?;

    // Split the torus factor into complement and kernel parts.
    let d = model.ambient_dim();
    let log_a = AlgebraElement::unchecked(
        model,
        DMatrix::from_fn(d, d, |i, j| if i == j { f.a.mat[(i, i)].ln() } else { 0.0 }),
    );
    let a_coords = rs.a_coordinates(&log_a, tol)?;
    let upper = sd.project_upper(&a_coords);
    let alpha_up = group_exp(&rs.torus_element(&upper));

    // Split the unipotent factor nu = nu_up nu_low with nu_up in the
    // complement nilpotent group, iterating the log projection until the
    // remainder has no complement component.
    let proj_upper_nil = |x: &AlgebraElement| -> Result<AlgebraElement, Error> {
        let proj = root_space_project(rs, x)?;
        let mut acc = DMatrix::zeros(d, d);
        for &ri in &sd.sigma_upper_plus {
            acc += &rs.root_vectors[ri].mat * proj.per_root[ri];
        }
        Ok(AlgebraElement::unchecked(model, acc))
    };
    let mut nu_up = GroupElement::identity(model);
    let mut split_residual = f64::INFINITY;
    for _ in 0..30 {
        let rem = GroupElement::unchecked(
            model,
            linalg::inverse(&nu_up.mat)? * &f.n.mat,
        );
        let rem_log = AlgebraElement::unchecked(model, unipotent_log(&rem.mat));
        let up_part = proj_upper_nil(&rem_log)?;
        split_residual = up_part.norm();
        if split_residual < 1e-13 {
            break;
        }
        nu_up = nu_up.mul(&group_exp(&up_part))?;
    }

    // The piece to canonicalize lives in the derived centralizer.
    let w = alpha_up.mul(&nu_up)?;
    let (x, k_pol) = polar(&w, tol)?;
    let (h_star, kappa1) = project_to_chamber_subset(rs, &sd, &x, tol)?;
    let _ = k_pol; // absorbed by the limit group's normalizer

    let a = group_exp(&h_star);
    let k = f.k.mul(&kappa1.inverse()?)?;
    let descriptor = LimitGroupDescriptor::new(rs, subset, a, k, tol)?;
    Ok((descriptor, split_residual))
}

/// Equality of the boundary subgroups named by two chart data.
pub fn equivalent(
    rs: &RootSystem,
    cp1: &CompactifiedPoint,
    cp2: &CompactifiedPoint,
    tol: &Tolerances,
) -> Result<bool, Error> {
    let (d1, _) = phi(rs, cp1, tol)?;
    let (d2, _) = phi(rs, cp2, tol)?;
    descriptors_equal(&d1, &d2, rs, tol.membership_tol.max(1e-6))
}

/// Distances between nets of the groups named by a convergent chart
/// sequence and the net of its limit's group. The moving nets are
/// transported copies of the limit net, so the distances track the group
/// degeneration rather than the net resolution.
pub fn chart_continuity_experiment(
    rs: &RootSystem,
    seq: &[PolyhedralPoint],
    ball: &BallSpec,
    seed: u64,
    tol: &Tolerances,
) -> Result<ConvergenceTable, Error> {
    let limit = polyhedral_limit(rs, seq, 8.0, tol)?;
    let limit_desc = LimitGroupDescriptor::new(
        rs,
        limit.subset.clone(),
        group_exp(&limit.rep),
        GroupElement::identity(rs.model()),
        tol,
    )?;
    let limit_sg = build_limit_group(rs, &limit_desc)?;
    let limit_net = sample_structured(rs, &limit_sg, ball, seed)?;

    let mut rows = Vec::new();
    for (idx, p) in seq.iter().enumerate() {
        let desc = LimitGroupDescriptor::new(
            rs,
            p.subset.clone(),
            group_exp(&p.rep),
            GroupElement::identity(rs.model()),
            tol,
        )?;
        let sg = build_limit_group(rs, &desc)?;
        let net = transport_limit_net(rs, &sg, &limit_net, &limit_sg, ball, tol)?;
        let distance = hausdorff(&net, &limit_net)?;
        rows.push(ConvergenceRow {
            step: idx + 1,
            distance,
            conjugate_points: net.len(),
            limit_points: limit_net.len(),
        });
    }
    Ok(ConvergenceTable { rows })
}
