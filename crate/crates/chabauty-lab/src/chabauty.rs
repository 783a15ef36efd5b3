//! Finite-net representations of closed subgroups inside a metric ball,
//! the pointed Hausdorff distance between them, conjugate-degeneration
//! experiments, and the two exactly solvable toy spaces of closed
//! subgroups of the integers and the reals.
//!
//! The metric on the group is `d(g, h) = max(|g - h|_F, |g^-1 - h^-1|_F)`:
//! symmetric under inversion, proper on both matrix models, and cheap.
//! Sampled sets carry their generation coordinates so that a matching
//! point in a nearby conjugate group can be constructed for each net point
//! (the transports below); distances between matched nets then measure the
//! actual group degeneration instead of the net resolution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::Error;
use crate::limits::{build_limit_group, LimitGroupDescriptor, StructuredSubgroup};
use crate::linalg;
use crate::model::{group_exp, AlgebraElement, GroupElement, GroupModel, Tolerances};
use crate::roots::{RootSystem, SubsetData};

/// Ball radius, target net resolution, and the point budget.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BallSpec {
    pub radius: f64,
    pub mesh: f64,
    pub max_points: usize,
}

impl BallSpec {
    pub fn new(radius: f64, mesh: f64, max_points: usize) -> Result<Self, Error> {
        if !(radius > 0.0 && mesh > 0.0) {
            return Err(Error::InvalidBall("radius and mesh must be positive".into()));
        }
        if mesh >= radius {
            return Err(Error::InvalidBall("mesh must be smaller than the radius".into()));
        }
        if max_points < 100 {
            return Err(Error::InvalidBall("max_points must be at least 100".into()));
        }
        Ok(BallSpec {
            radius,
            mesh,
            max_points,
        })
    }

    /// Default experiment scale.
    pub fn standard() -> Self {
        BallSpec {
            radius: 6.0,
            mesh: 0.15,
            max_points: 4000,
        }
    }

    /// Points within this distance of the identity take part in the sup
    /// side of the pointed Hausdorff distance; the margin suppresses
    /// ball-edge truncation artifacts.
    pub fn interior_radius(&self) -> f64 {
        self.radius - 2.0 * self.mesh
    }
}

/// A net point: the matrix, its inverse, and the distance to the identity.
#[derive(Clone, Debug)]
pub struct SamplePoint {
    pub mat: DMatrix<f64>,
    pub inv: DMatrix<f64>,
    pub dist_id: f64,
}

impl SamplePoint {
    pub fn from_matrix(mat: DMatrix<f64>) -> Result<Self, Error> {
        let inv = linalg::inverse(&mat)?;
        let d = mat.nrows();
        let id = DMatrix::identity(d, d);
        let dist_id = linalg::fro_dist(&mat, &id).max(linalg::fro_dist(&inv, &id));
        Ok(SamplePoint { mat, inv, dist_id })
    }
}

/// Distance in the inversion-symmetric Frobenius metric.
pub fn metric(a: &SamplePoint, b: &SamplePoint) -> f64 {
    linalg::fro_dist(&a.mat, &b.mat).max(linalg::fro_dist(&a.inv, &b.inv))
}

/// Generation coordinates of a structured net point: coefficients on the
/// compact basis, the finite-centralizer index, and coefficients on the
/// nilpotent basis.
#[derive(Clone, Debug)]
pub struct GenCoords {
    pub compact: DVector<f64>,
    pub m_index: usize,
    pub nil: DVector<f64>,
}

/// A finite net of a closed subgroup intersected with a ball.
#[derive(Clone, Debug)]
pub struct SampledSubgroup {
    pub model: GroupModel,
    pub points: Vec<SamplePoint>,
    /// Generation coordinates, parallel to `points`, when the net came
    /// from a structured generator.
    pub gen: Vec<Option<GenCoords>>,
    pub source: String,
    pub ball: BallSpec,
    /// Estimated fill distance of the net against fresh random members.
    pub coverage_estimate: f64,
}

impl SampledSubgroup {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from an arbitrary point to the net. Pairs whose matrix
    /// part already exceeds the best candidate are abandoned early; the
    /// result is identical to the brute-force minimum.
    pub fn distance_to(&self, p: &SamplePoint) -> f64 {
        let pm = p.mat.as_slice();
        let pi = p.inv.as_slice();
        let mut best_sq = f64::INFINITY;
        for q in &self.points {
            let qm = q.mat.as_slice();
            let mut m_sq = 0.0;
            for (a, b) in pm.iter().zip(qm.iter()) {
                let d = a - b;
                m_sq += d * d;
                if m_sq >= best_sq {
                    break;
                }
            }
            if m_sq >= best_sq {
                continue;
            }
            let qi = q.inv.as_slice();
            let mut i_sq = 0.0;
            for (a, b) in pi.iter().zip(qi.iter()) {
                let d = a - b;
                i_sq += d * d;
                if i_sq >= best_sq {
                    break;
                }
            }
            let cand = m_sq.max(i_sq);
            if cand < best_sq {
                best_sq = cand;
            }
        }
        best_sq.sqrt()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "ball": self.ball,
            "source": self.source,
            "coverage_estimate": self.coverage_estimate,
            "points": self.points.iter().map(|p| crate::model::serde_matrix::to_rows(&p.mat)).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, Error> {
        let model: GroupModel = serde_json::from_value(value["model"].clone())?;
        let ball: BallSpec = serde_json::from_value(value["ball"].clone())?;
        let source = value["source"].as_str().unwrap_or("unknown").to_string();
        let rows: Vec<Vec<Vec<f64>>> = serde_json::from_value(value["points"].clone())?;
        let mut points = Vec::with_capacity(rows.len());
        for r in &rows {
            let mat = crate::model::serde_matrix::from_rows(r).map_err(Error::Validation)?;
            points.push(SamplePoint::from_matrix(mat)?);
        }
        let gen = vec![None; points.len()];
        Ok(SampledSubgroup {
            model,
            points,
            gen,
            source,
            ball,
            coverage_estimate: value["coverage_estimate"].as_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Halton low-discrepancy sequence in [-1, 1]^dims.
fn halton(index: usize, dims: usize) -> Vec<f64> {
    const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    (0..dims)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index + 1;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            2.0 * r - 1.0
        })
        .collect()
}

/// Deduplication cell key at half-mesh resolution.
fn cell_key(mat: &DMatrix<f64>, cell: f64) -> Vec<i64> {
    mat.iter().map(|&v| (v / cell).floor() as i64).collect()
}

struct NetBuilder {
    ball: BallSpec,
    capacity: usize,
    points: Vec<SamplePoint>,
    gen: Vec<Option<GenCoords>>,
    seen: HashMap<Vec<i64>, ()>,
    cell: f64,
}

impl NetBuilder {
    fn new(ball: BallSpec) -> Self {
        Self::with_capacity(ball, ball.max_points)
    }

    /// Builder with an explicit point capacity; transported nets need
    /// room for one partner per guide point on top of the raw budget.
    fn with_capacity(ball: BallSpec, capacity: usize) -> Self {
        NetBuilder {
            ball,
            capacity,
            points: Vec::new(),
            gen: Vec::new(),
            seen: HashMap::new(),
            cell: ball.mesh / 2.0,
        }
    }

    fn push(&mut self, mat: DMatrix<f64>, gen: Option<GenCoords>) {
        self.insert(mat, gen, false);
    }

    /// Insert bypassing deduplication; used for transported partner
    /// points that must stay matched one-to-one with their guide net.
    fn push_matched(&mut self, mat: DMatrix<f64>) {
        self.insert(mat, None, true);
    }

    fn insert(&mut self, mat: DMatrix<f64>, gen: Option<GenCoords>, force: bool) {
        if self.points.len() >= self.capacity {
            return;
        }
        let Ok(p) = SamplePoint::from_matrix(mat) else {
            return;
        };
        if p.dist_id > self.ball.radius {
            return;
        }
        let key = cell_key(&p.mat, self.cell);
        if !force && self.seen.contains_key(&key) {
            return;
        }
        self.seen.insert(key, ());
        self.points.push(p);
        self.gen.push(gen);
    }

    fn finish(self, model: GroupModel, source: String) -> Result<SampledSubgroup, Error> {
        if self.points.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(SampledSubgroup {
            model,
            points: self.points,
            gen: self.gen,
            source,
            ball: self.ball,
            coverage_estimate: f64::NAN,
        })
    }
}

/// Largest coefficient for a one-parameter direction whose conjugated
/// image stays inside the ball, found by doubling and bisection. Compact
/// directions are capped at a generous constant covering a full period.
fn direction_cap(
    conj: &GroupElement,
    conj_inv: &GroupElement,
    basis: &AlgebraElement,
    radius: f64,
    compact: bool,
) -> f64 {
    let image_dist = |c: f64| -> f64 {
        let e = group_exp(&basis.scale(c));
        let mat = &conj.mat * &e.mat * &conj_inv.mat;
        match SamplePoint::from_matrix(mat) {
            Ok(p) => p.dist_id,
            Err(_) => f64::INFINITY,
        }
    };
    let hard_cap = if compact { 12.0 } else { 1e9 };
    let mut hi = 1.0;
    while image_dist(hi) <= radius && hi < hard_cap {
        hi *= 2.0;
    }
    if hi >= hard_cap {
        return hard_cap;
    }
    let mut lo = hi / 2.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if image_dist(mid) <= radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Structured net of a limit subgroup: products of a compact-part grid,
/// the finite centralizer, and a nilpotent-part grid, conjugated into
/// place and filtered to the ball. Per-direction grids use caps found by
/// bisection in log coordinates, so the image spacing stays comparable to
/// the mesh even under strong conjugation.
pub fn sample_structured(
    rs: &RootSystem,
    sg: &StructuredSubgroup,
    ball: &BallSpec,
    seed: u64,
) -> Result<SampledSubgroup, Error> {
    let model = rs.model();
    let sd = &sg.subset_data;
    let dims_k = sd.k_upper_basis.len();
    let dims_n = sd.n_lower_basis.len();
    let m_count = sd.m_elements.len();
    let mut builder = NetBuilder::new(*ball);

    let caps_k: Vec<f64> = sd
        .k_upper_basis
        .iter()
        .map(|b| direction_cap(&sg.conj, &sg.conj_inv, b, ball.radius, true))
        .collect();
    let caps_n: Vec<f64> = sd
        .n_lower_basis
        .iter()
        .map(|b| direction_cap(&sg.conj, &sg.conj_inv, b, ball.radius, false))
        .collect();

    let emit = |builder: &mut NetBuilder, kc: &DVector<f64>, mi: usize, nc: &DVector<f64>| {
        let d = model.ambient_dim();
        let mut kmat = DMatrix::zeros(d, d);
        for (c, b) in kc.iter().zip(sd.k_upper_basis.iter()) {
            kmat += &b.mat * *c;
        }
        let mut nmat = DMatrix::zeros(d, d);
        for (c, b) in nc.iter().zip(sd.n_lower_basis.iter()) {
            nmat += &b.mat * *c;
        }
        let kappa = group_exp(&AlgebraElement::unchecked(model, kmat));
        let nu = group_exp(&AlgebraElement::unchecked(model, nmat));
        let inner = &kappa.mat * &sd.m_elements[mi].mat * &nu.mat;
        let mat = &sg.conj.mat * inner * &sg.conj_inv.mat;
        builder.push(
            mat,
            Some(GenCoords {
                compact: kc.clone(),
                m_index: mi,
                nil: nc.clone(),
            }),
        );
    };

    // Skeleton: the finite centralizer alone, then per-direction axis
    // grids at image resolution close to the mesh.
    let zero_k = DVector::zeros(dims_k);
    let zero_n = DVector::zeros(dims_n);
    for mi in 0..m_count {
        emit(&mut builder, &zero_k, mi, &zero_n);
    }
    let axis_budget = (2.2 * ball.radius / ball.mesh).ceil() as usize;
    for dim in 0..dims_k {
        let cap = caps_k[dim];
        let steps = axis_budget.max(2);
        for s in 0..=steps {
            let c = -cap + 2.0 * cap * (s as f64) / (steps as f64);
            let mut kc = zero_k.clone();
            kc[dim] = c;
            for mi in 0..m_count {
                emit(&mut builder, &kc, mi, &zero_n);
            }
        }
    }
    for dim in 0..dims_n {
        let cap = caps_n[dim];
        let steps = axis_budget.max(2);
        for s in 0..=steps {
            let c = -cap + 2.0 * cap * (s as f64) / (steps as f64);
            let mut nc = zero_n.clone();
            nc[dim] = c;
            for mi in 0..m_count {
                emit(&mut builder, &zero_k, mi, &nc);
            }
        }
    }

    // Quasi-random fill over the full coefficient box, plus seeded random
    // draws.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fill = 2 * ball.max_points;
    for idx in 0..fill {
        if builder.points.len() >= ball.max_points {
            break;
        }
        let h = halton(idx, dims_k + dims_n);
        let kc = DVector::from_fn(dims_k, |i, _| h[i] * caps_k[i]);
        let nc = DVector::from_fn(dims_n, |i, _| h[dims_k + i] * caps_n[i]);
        let mi = idx % m_count;
        emit(&mut builder, &kc, mi, &nc);
        if idx % 8 == 0 {
            let kc = DVector::from_fn(dims_k, |i, _| (rng.random::<f64>() * 2.0 - 1.0) * caps_k[i]);
            let nc = DVector::from_fn(dims_n, |i, _| (rng.random::<f64>() * 2.0 - 1.0) * caps_n[i]);
            let mi = rng.random_range(0..m_count);
            emit(&mut builder, &kc, mi, &nc);
        }
    }

    let mut sample = builder.finish(
        model,
        format!("limit-group:{}", sg.descriptor.to_json(rs)["I"]),
    )?;
    sample.coverage_estimate = estimate_coverage(&sample, sg, seed ^ 0x9e3779b9);
    Ok(sample)
}

/// Fill-distance estimate: fresh random members landing in the interior
/// are matched against the net.
fn estimate_coverage(sample: &SampledSubgroup, sg: &StructuredSubgroup, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for _ in 0..200 {
        if used >= 50 {
            break;
        }
        let g = sg.random_member(1.0, &mut rng);
        let Ok(p) = SamplePoint::from_matrix(g.mat) else {
            continue;
        };
        if p.dist_id > sample.ball.interior_radius() {
            continue;
        }
        used += 1;
        worst = worst.max(sample.distance_to(&p));
    }
    worst
}

/// Net of a conjugate `g K g^{-1}` of the compact subgroup: conjugates of
/// a quasi-random compact net, together with transported matches of the
/// guide net when one is given (the compact factor of `g^{-1} d g` maps a
/// guide point `d` to its best conjugate approximation).
pub fn sample_conjugated_compact(
    rs: &RootSystem,
    g: &GroupElement,
    ball: &BallSpec,
    seed: u64,
    guide: Option<&SampledSubgroup>,
) -> Result<SampledSubgroup, Error> {
    let model = rs.model();
    let g_inv = g.inverse()?;
    let capacity = ball.max_points + guide.map_or(0, |s| s.len());
    let mut builder = NetBuilder::with_capacity(*ball, capacity);
    builder.push(model.identity_matrix(), None);

    // Transported guide points first: they are the precision layer. The
    // compact factor comes from the opposite factorization (compact,
    // torus, lower unipotent): its unipotent remainder contracts back
    // under the conjugation, while the standard one would expand.
    if let Some(guide) = guide {
        let rev = linalg::antidiagonal(model.ambient_dim());
        for p in &guide.points {
            let h = &g_inv.mat * &p.mat * &g.mat;
            let (q, _r) = qr_orthogonal(&(&rev * h * &rev));
            let kappa = &rev * q * &rev;
            let mat = &g.mat * kappa * &g_inv.mat;
            builder.push_matched(mat);
        }
    }

    // Raw compact net: quasi-random plus axis grids on the compact
    // algebra; survivors of the ball filter cover the parts of the
    // conjugate away from the limit.
    let (_, mats) = crate::model::algebra_orthonormal_basis(&model);
    let compact_dirs: Vec<DMatrix<f64>> = mats
        .iter()
        .map(|b| (b - b.transpose()) * 0.5)
        .filter(|b| linalg::frobenius(b) > 1e-12)
        .collect();
    let dims = compact_dirs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emit = |builder: &mut NetBuilder, coeffs: &[f64]| {
        let d = model.ambient_dim();
        let mut acc = DMatrix::zeros(d, d);
        for (c, b) in coeffs.iter().zip(compact_dirs.iter()) {
            acc += b * *c;
        }
        let kappa = group_exp(&AlgebraElement::unchecked(model, acc));
        let mat = &g.mat * &kappa.mat * &g_inv.mat;
        builder.push(mat, None);
    };
    let axis_budget = (2.2 * ball.radius / ball.mesh).ceil() as usize;
    for dim in 0..dims {
        for s in 0..=axis_budget {
            let c = -6.0 + 12.0 * (s as f64) / (axis_budget as f64);
            let mut coeffs = vec![0.0; dims];
            coeffs[dim] = c;
            emit(&mut builder, &coeffs);
        }
    }
    let fill = ball.max_points;
    for idx in 0..fill {
        if builder.points.len() >= ball.max_points {
            break;
        }
        let h = halton(idx, dims);
        let coeffs: Vec<f64> = h.iter().map(|v| v * 6.0).collect();
        emit(&mut builder, &coeffs);
        if idx % 8 == 0 {
            let coeffs: Vec<f64> = (0..dims)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 6.0)
                .collect();
            emit(&mut builder, &coeffs);
        }
    }

    let mut sample = builder.finish(model, "conjugated-compact".into())?;
    // Coverage against fresh conjugated rotations.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51f15eed);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for _ in 0..400 {
        if used >= 50 {
            break;
        }
        let coeffs: Vec<f64> = (0..dims)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 3.0)
            .collect();
        let d = model.ambient_dim();
        let mut acc = DMatrix::zeros(d, d);
        for (c, b) in coeffs.iter().zip(compact_dirs.iter()) {
            acc += b * *c;
        }
        let kappa = group_exp(&AlgebraElement::unchecked(model, acc));
        let mat = &g.mat * &kappa.mat * &g_inv.mat;
        let Ok(p) = SamplePoint::from_matrix(mat) else {
            continue;
        };
        if p.dist_id > sample.ball.interior_radius() {
            continue;
        }
        used += 1;
        worst = worst.max(sample.distance_to(&p));
    }
    sample.coverage_estimate = worst;
    Ok(sample)
}

/// Orthogonal factor of a QR factorization with the positive-diagonal
/// convention; the compact Iwasawa factor.
fn qr_orthogonal(mat: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = mat.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let n = r.nrows();
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for j in 0..n {
                r[(i, j)] = -r[(i, j)];
                q[(j, i)] = -q[(j, i)];
            }
        }
    }
    (q, r)
}

/// Transport a structured net of one limit group into another whose
/// subset contains the guide's subset: compact directions that blow up
/// under the target conjugation are reached through scaled compact-part
/// coefficients, nilpotent directions through scaled nilpotent
/// coefficients. Each returned point is an exact member of the target.
pub fn transport_limit_net(
    rs: &RootSystem,
    target: &StructuredSubgroup,
    guide: &SampledSubgroup,
    guide_sg: &StructuredSubgroup,
    ball: &BallSpec,
    tol: &Tolerances,
) -> Result<SampledSubgroup, Error> {
    let model = rs.model();
    if !guide_sg
        .descriptor
        .subset
        .is_subset(&target.descriptor.subset)
    {
        return Err(Error::validation(
            "transport needs the guide subset contained in the target subset",
        ));
    }
    let sd_t = &target.subset_data;
    let sd_g = &guide_sg.subset_data;
    let diag_log = |a: &GroupElement| {
        let d = model.ambient_dim();
        AlgebraElement::unchecked(
            model,
            DMatrix::from_fn(d, d, |i, j| if i == j { a.mat[(i, i)].ln() } else { 0.0 }),
        )
    };
    let coords_t = rs.a_coordinates(&diag_log(&target.descriptor.a), tol)?;
    let alpha_of = |idx: usize, coords: &DVector<f64>| -> f64 {
        rs.roots[idx]
            .functional
            .iter()
            .zip(coords.iter())
            .map(|(f, c)| f * c)
            .sum()
    };

    let mut builder = NetBuilder::with_capacity(*ball, ball.max_points + guide.len());
    let d = model.ambient_dim();
    let a_g = &guide_sg.descriptor.a.mat;
    let a_g_inv = linalg::inverse(a_g)?;
    let a_t = &target.descriptor.a.mat;
    let a_t_inv = linalg::inverse(a_t)?;
    for gen in guide.gen.iter().flatten() {
        // Compact part of the guide is inside the target's compact part
        // and converges in place as the torus data converge.
        let mut kmat = DMatrix::zeros(d, d);
        for (c, b) in gen.compact.iter().zip(sd_g.k_upper_basis.iter()) {
            kmat += &b.mat * *c;
        }
        // The guide's nilpotent part, pushed through the guide conjugation
        // and split exactly as (complement part) times (target nilpotent
        // part); the complement factor is reached through scaled compact
        // coefficients, the nilpotent factor through exact rescaling.
        let mut ymat = DMatrix::zeros(d, d);
        for (c, &ridx) in gen.nil.iter().zip(sd_g.sigma_lower_plus.iter()) {
            ymat += &rs.root_vectors[ridx].mat * *c;
        }
        let w = a_g * &ymat * &a_g_inv;
        let w_el = AlgebraElement::unchecked(model, w.clone());
        let proj = crate::roots::root_space_project(rs, &w_el)?;
        let mut w_upper = DMatrix::zeros(d, d);
        let mut cmat = DMatrix::zeros(d, d);
        for &ridx in &sd_t.sigma_upper_plus {
            let coeff = proj.per_root[ridx];
            let v = &rs.root_vectors[ridx].mat;
            w_upper += v * coeff;
            let scale = (-alpha_of(ridx, &coords_t)).exp();
            cmat += (v - v.transpose()) * (coeff * scale);
        }
        let exp_w = group_exp(&w_el);
        let exp_w_upper = group_exp(&AlgebraElement::unchecked(model, w_upper));
        // exp(W) = exp(W_upper) nu with nu in the target nilpotent group.
        let nu_mat = linalg::inverse(&exp_w_upper.mat)? * &exp_w.mat;
        let nu_log = unipotent_log_matrix(&nu_mat);
        let nu_scaled = group_exp(&AlgebraElement::unchecked(
            model,
            &a_t_inv * nu_log * a_t,
        ));
        let kappa = group_exp(&AlgebraElement::unchecked(model, kmat));
        let kappa_c = group_exp(&AlgebraElement::unchecked(model, cmat));
        let inner =
            &kappa.mat * &sd_g.m_elements[gen.m_index].mat * &kappa_c.mat * &nu_scaled.mat;
        let mat = &target.conj.mat * inner * &target.conj_inv.mat;
        builder.push_matched(mat);
    }
    builder.finish(model, "transported-limit-net".into())
}

/// Logarithm of a unipotent matrix by the terminating series.
fn unipotent_log_matrix(mat: &DMatrix<f64>) -> DMatrix<f64> {
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

/// Pointed Hausdorff distance between two nets over a common ball: the
/// larger of the two one-sided sup-min distances, with the sup restricted
/// to the interior margin.
pub fn hausdorff(s1: &SampledSubgroup, s2: &SampledSubgroup) -> Result<f64, Error> {
    if s1.model != s2.model {
        return Err(Error::ModelMismatch);
    }
    if (s1.ball.radius - s2.ball.radius).abs() > 1e-12 {
        return Err(Error::InvalidBall(
            "hausdorff needs a common ball radius".into(),
        ));
    }
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptySample);
    }
    let side = |from: &SampledSubgroup, to: &SampledSubgroup| -> f64 {
        let margin = from.ball.interior_radius();
        from.points
            .par_iter()
            .filter(|p| p.dist_id <= margin)
            .map(|p| to.distance_to(p))
            .reduce(|| 0.0, f64::max)
    };
    Ok(side(s1, s2).max(side(s2, s1)))
}

/// One row of a degeneration experiment.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub step: usize,
    pub distance: f64,
    pub conjugate_points: usize,
    pub limit_points: usize,
}

/// Distance table of a degeneration experiment.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn final_distance(&self) -> f64 {
        self.rows.last().map(|r| r.distance).unwrap_or(f64::NAN)
    }

    /// Distances are nonincreasing from the given 1-based step onward.
    pub fn decreasing_from(&self, step: usize) -> bool {
        let tail: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.step >= step)
            .map(|r| r.distance)
            .collect();
        tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,distance,conjugate_points,limit_points\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{},{}\n",
                r.step, r.distance, r.conjugate_points, r.limit_points
            ));
        }
        out
    }
}

/// Kernel-torus ray whose simple-root values all equal `ln(ratio)` on the
/// complement of the subset: the canonical escape direction through the
/// subset's facet.
pub fn geometric_kernel_ray(
    rs: &RootSystem,
    sd: &SubsetData,
    ratio: f64,
) -> Result<AlgebraElement, Error> {
    if ratio <= 1.0 {
        return Err(Error::validation("geometric ratio must exceed one"));
    }
    let rank = rs.rank();
    let lower_dim = sd.a_lower_basis.len();
    let outside: Vec<usize> = (0..rank).filter(|i| !sd.subset.contains(i)).collect();
    if outside.len() != lower_dim {
        return Err(Error::validation(
            "kernel ray needs as many outside roots as kernel dimensions",
        ));
    }
    // Solve alpha_i(H) = ln ratio over the kernel torus coordinates.
    let mut sys = DMatrix::zeros(outside.len(), lower_dim);
    for (r, &i) in outside.iter().enumerate() {
        for c in 0..lower_dim {
            let v: f64 = rs.base[i]
                .functional
                .iter()
                .zip(sd.a_lower_coords.column(c).iter())
                .map(|(f, x)| f * x)
                .sum();
            sys[(r, c)] = v;
        }
    }
    let rhs = DVector::from_element(outside.len(), ratio.ln());
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("kernel ray system is singular".into()))?;
    let coords = &sd.a_lower_coords * sol;
    Ok(rs.torus_element(&coords))
}

/// Check the escape condition on a torus sequence: simple-root values
/// vanish on the subset and increase without settling on its complement.
pub fn validate_escape_sequence(
    rs: &RootSystem,
    sd: &SubsetData,
    a_seq: &[GroupElement],
    tol: &Tolerances,
) -> Result<(), Error> {
    if a_seq.len() < 2 {
        return Err(Error::NonConvergent("sequence needs at least two steps".into()));
    }
    let rank = rs.rank();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); rank];
    for a in a_seq {
        let d = rs.model().ambient_dim();
        let log = AlgebraElement::unchecked(
            rs.model(),
            DMatrix::from_fn(d, d, |i, j| if i == j { a.mat[(i, i)].ln() } else { 0.0 }),
        );
        let coords = rs.a_coordinates(&log, tol)?;
        for i in 0..rank {
            let v: f64 = rs.base[i]
                .functional
                .iter()
                .zip(coords.iter())
                .map(|(f, c)| f * c)
                .sum();
            values[i].push(v);
        }
    }
    for i in 0..rank {
        if sd.subset.contains(&i) {
            if values[i].iter().any(|v| v.abs() > tol.membership_tol * 10.0) {
                return Err(Error::NonConvergent(format!(
                    "root {i} must vanish along the sequence"
                )));
            }
        } else {
            let strictly_up = values[i].windows(2).all(|w| w[1] > w[0] + 1e-12);
            let grows = values[i].last().unwrap() > &(values[i].first().unwrap() + 0.5);
            if !(strictly_up && grows) {
                return Err(Error::NonConvergent(format!(
                    "root {i} does not escape along the sequence"
                )));
            }
        }
    }
    Ok(())
}

/// Degeneration experiment: distances between nets of the conjugated
/// compact subgroup along a torus sequence and a net of the limit group.
///
/// The conjugate-to-limit side refines the limit net adaptively: a
/// conjugate point falling between limit-net points may instead be
/// matched against its structural projection onto the limit group,
/// provided the projection certifies as a member. This keeps the distance
/// column tracking the set degeneration instead of flooring at the net
/// resolution.
pub fn convergence_experiment(
    rs: &RootSystem,
    sd: &SubsetData,
    a_seq: &[GroupElement],
    ball: &BallSpec,
    seed: u64,
    tol: &Tolerances,
) -> Result<(ConvergenceTable, Vec<SampledSubgroup>, SampledSubgroup), Error> {
    validate_escape_sequence(rs, sd, a_seq, tol)?;
    let desc = LimitGroupDescriptor::plain(rs, sd.subset.clone());
    let sg = build_limit_group(rs, &desc)?;
    let limit_net = sample_structured(rs, &sg, ball, seed)?;
    let mut rows = Vec::new();
    let mut nets = Vec::new();
    for (idx, a) in a_seq.iter().enumerate() {
        let conj_net = sample_conjugated_compact(rs, a, ball, seed, Some(&limit_net))?;
        let distance = refined_distance(rs, &sg, &conj_net, &limit_net, tol)?;
        rows.push(ConvergenceRow {
            step: idx + 1,
            distance,
            conjugate_points: conj_net.len(),
            limit_points: limit_net.len(),
        });
        nets.push(conj_net);
    }
    Ok((ConvergenceTable { rows }, nets, limit_net))
}

/// Pointed Hausdorff distance where points of the moving net may match
/// their certified projections onto the limit group in place of the
/// nearest stored net point.
fn refined_distance(
    rs: &RootSystem,
    limit_sg: &crate::limits::StructuredSubgroup,
    moving: &SampledSubgroup,
    limit_net: &SampledSubgroup,
    tol: &Tolerances,
) -> Result<f64, Error> {
    let margin = limit_net.ball.interior_radius();
    let limit_side: f64 = limit_net
        .points
        .par_iter()
        .filter(|p| p.dist_id <= margin)
        .map(|p| moving.distance_to(p))
        .reduce(|| 0.0, f64::max);
    let accept = 100.0 * tol.membership_tol;
    let moving_side: f64 = moving
        .points
        .par_iter()
        .filter(|p| p.dist_id <= margin)
        .map(|p| {
            let net_dist = limit_net.distance_to(p);
            let g = GroupElement::unchecked(moving.model, p.mat.clone());
            match crate::limits::project_to_group(&g, limit_sg, rs) {
                Ok((delta, defect)) if defect <= accept => {
                    match SamplePoint::from_matrix(delta.mat) {
                        Ok(dp) if dp.dist_id <= limit_net.ball.radius => {
                            net_dist.min(metric(p, &dp))
                        }
                        _ => net_dist,
                    }
                }
                _ => net_dist,
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(limit_side.max(moving_side))
}

/// Closed subgroups of the reals, keyed by lattice spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ToySubgroupR {
    Trivial,
    Lattice(f64),
    Full,
}

impl ToySubgroupR {
    pub fn lattice(c: f64) -> Result<Self, Error> {
        if c > 0.0 {
            Ok(ToySubgroupR::Lattice(c))
        } else {
            Err(Error::validation("lattice spacing must be positive"))
        }
    }

    /// Compactified spacing coordinate in [0, 1]: 0 for the full line,
    /// 1 for the trivial subgroup.
    fn xi(&self) -> f64 {
        match *self {
            ToySubgroupR::Trivial => 1.0,
            ToySubgroupR::Full => 0.0,
            ToySubgroupR::Lattice(c) => c / (1.0 + c),
        }
    }
}

/// Limit of a sequence of closed subgroups of the reals under the spacing
/// homeomorphism: diverging spacings give the trivial group, vanishing
/// spacings the full line, settling spacings the lattice.
pub fn toy_limit_r(seq: &[ToySubgroupR]) -> Result<ToySubgroupR, Error> {
    if seq.len() < 4 {
        return Err(Error::NonConvergent("sequence too short".into()));
    }
    let xi: Vec<f64> = seq.iter().map(|s| s.xi()).collect();
    let tail_start = seq.len() - seq.len().div_ceil(4);
    let tail = &xi[tail_start..];
    let osc = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let last = *xi.last().unwrap();
    if osc <= 1e-9 {
        // Settled exactly: classify by value.
        if last >= 1.0 - 1e-12 {
            return Ok(ToySubgroupR::Trivial);
        }
        if last <= 1e-12 {
            return Ok(ToySubgroupR::Full);
        }
        return Ok(ToySubgroupR::Lattice(last / (1.0 - last)));
    }
    let monotone_up = tail.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let monotone_down = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    if monotone_up && last >= 0.9 {
        return Ok(ToySubgroupR::Trivial);
    }
    if monotone_down && last <= 0.1 {
        return Ok(ToySubgroupR::Full);
    }
    if osc <= 1e-2 && last > 1e-12 && last < 1.0 - 1e-12 {
        return Ok(ToySubgroupR::Lattice(last / (1.0 - last)));
    }
    Err(Error::NonConvergent(format!(
        "spacing sequence oscillates (tail oscillation {osc:.3e})"
    )))
}

/// Closed subgroups of the integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToySubgroupZ {
    Trivial,
    Lattice(u64),
}

/// Limit of a sequence of closed subgroups of the integers: the space is
/// discrete away from the trivial group, so the sequence must be
/// eventually constant or have diverging spacings.
pub fn toy_limit_z(seq: &[ToySubgroupZ]) -> Result<ToySubgroupZ, Error> {
    if seq.len() < 4 {
        return Err(Error::NonConvergent("sequence too short".into()));
    }
    let tail_start = seq.len() - seq.len().div_ceil(4);
    let tail = &seq[tail_start..];
    if tail.iter().all(|s| *s == tail[0]) {
        return Ok(tail[0]);
    }
    let spacings: Vec<Option<u64>> = tail
        .iter()
        .map(|s| match s {
            ToySubgroupZ::Trivial => None,
            ToySubgroupZ::Lattice(n) => Some(*n),
        })
        .collect();
    let diverges = spacings.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => b > a,
        (Some(_), None) => true,
        (None, None) => true,
        (None, Some(_)) => false,
    });
    if diverges {
        return Ok(ToySubgroupZ::Trivial);
    }
    Err(Error::NonConvergent(
        "integer subgroup sequence is neither eventually constant nor diverging".into(),
    ))
}

/// Report of the two-clause sequential convergence criterion.
#[derive(Clone, Debug, Serialize)]
pub struct AccumulationReport {
    /// Every limit point is approximated by the tail sets.
    pub approximation_holds: bool,
    /// Every persistent accumulation point of the tail sets lies near the
    /// limit.
    pub accumulation_holds: bool,
    pub worst_approximation: f64,
    pub worst_accumulation: f64,
}

impl AccumulationReport {
    pub fn ok(&self) -> bool {
        self.approximation_holds && self.accumulation_holds
    }
}

/// Check the sequential convergence criterion at net resolution: (1) each
/// interior point of the candidate limit is close to every tail set; (2)
/// each tail point persisting across the tail sets is close to the
/// candidate limit.
pub fn verify_accumulation_criterion(
    seq: &[SampledSubgroup],
    limit: &SampledSubgroup,
    tol: f64,
) -> Result<AccumulationReport, Error> {
    if seq.is_empty() {
        return Err(Error::validation("empty sequence of samples"));
    }
    let tail_start = seq.len() / 2;
    let tail = &seq[tail_start..];
    let margin = limit.ball.interior_radius();

    let mut worst_approximation: f64 = 0.0;
    for s in tail {
        let side: f64 = limit
            .points
            .par_iter()
            .filter(|p| p.dist_id <= margin)
            .map(|p| s.distance_to(p))
            .reduce(|| 0.0, f64::max);
        worst_approximation = worst_approximation.max(side);
    }

    let mut worst_accumulation: f64 = 0.0;
    for (i, s) in tail.iter().enumerate() {
        let worst_here: f64 = s
            .points
            .par_iter()
            .filter(|p| p.dist_id <= margin)
            .map(|p| {
                // Persistent: visible in every other tail set.
                let persistent = tail
                    .iter()
                    .enumerate()
                    .all(|(j, other)| j == i || other.distance_to(p) <= tol);
                if persistent {
                    limit.distance_to(p)
                } else {
                    0.0
                }
            })
            .reduce(|| 0.0, f64::max);
        worst_accumulation = worst_accumulation.max(worst_here);
    }

    Ok(AccumulationReport {
        approximation_holds: worst_approximation <= tol,
        accumulation_holds: worst_accumulation <= tol,
        worst_approximation,
        worst_accumulation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::build_root_system;
    use std::collections::BTreeSet;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn ball_validation() {
        assert!(BallSpec::new(6.0, 0.15, 4000).is_ok());
        assert!(BallSpec::new(0.1, 0.15, 4000).is_err());
        assert!(BallSpec::new(6.0, 0.15, 10).is_err());
    }

    #[test]
    fn net_contains_identity_and_only_members() {
        let model = GroupModel::special_linear(2).unwrap();
        let rs = build_root_system(&model);
        let desc = LimitGroupDescriptor::plain(&rs, BTreeSet::new());
        let sg = build_limit_group(&rs, &desc).unwrap();
        let ball = BallSpec::new(2.0, 0.1, 500).unwrap();
        let sample = sample_structured(&rs, &sg, &ball, 5).unwrap();
        let id = SamplePoint::from_matrix(model.identity_matrix()).unwrap();
        assert!(sample.distance_to(&id) < 1e-12);
        for p in &sample.points {
            let g = GroupElement::unchecked(model, p.mat.clone());
            assert!(crate::limits::member(&g, &sg, 1e-6).unwrap());
        }
    }

    #[test]
    fn sl2_compact_net_covers_the_circle() {
        let model = GroupModel::special_linear(2).unwrap();
        let rs = build_root_system(&model);
        let full: BTreeSet<usize> = (0..rs.rank()).collect();
        let desc = LimitGroupDescriptor::plain(&rs, full);
        let sg = build_limit_group(&rs, &desc).unwrap();
        let ball = BallSpec::new(3.0, 0.1, 2000).unwrap();
        let sample = sample_structured(&rs, &sg, &ball, 5).unwrap();
        // Oracle: the rotation parametrization of the compact subgroup.
        let mut worst: f64 = 0.0;
        for t in 0..200 {
            let theta = 2.0 * std::f64::consts::PI * (t as f64) / 200.0;
            let rot = DMatrix::from_row_slice(
                2,
                2,
                &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
            );
            let p = SamplePoint::from_matrix(rot).unwrap();
            if p.dist_id <= ball.interior_radius() {
                worst = worst.max(sample.distance_to(&p));
            }
        }
        assert!(worst < ball.mesh, "coverage gap {worst} exceeds the mesh");
    }

    #[test]
    fn two_seeds_net_distance_below_two_mesh() {
        let model = GroupModel::special_linear(2).unwrap();
        let rs = build_root_system(&model);
        let desc = LimitGroupDescriptor::plain(&rs, BTreeSet::new());
        let sg = build_limit_group(&rs, &desc).unwrap();
        let ball = BallSpec::new(2.0, 0.15, 1500).unwrap();
        let s1 = sample_structured(&rs, &sg, &ball, 1).unwrap();
        let s2 = sample_structured(&rs, &sg, &ball, 2).unwrap();
        let d = hausdorff(&s1, &s2).unwrap();
        assert!(d < 2.0 * ball.mesh, "distance {d}");
    }

    #[test]
    fn hausdorff_is_a_pseudometric() {
        let model = GroupModel::special_linear(2).unwrap();
        let rs = build_root_system(&model);
        let ball = BallSpec::new(2.0, 0.15, 800).unwrap();
        let full: BTreeSet<usize> = (0..rs.rank()).collect();
        let desc_k = LimitGroupDescriptor::plain(&rs, full);
        let desc_mn = LimitGroupDescriptor::plain(&rs, BTreeSet::new());
        let k_net =
            sample_structured(&rs, &build_limit_group(&rs, &desc_k).unwrap(), &ball, 3).unwrap();
        let mn_net =
            sample_structured(&rs, &build_limit_group(&rs, &desc_mn).unwrap(), &ball, 4).unwrap();
        let id_net = {
            let mut b = NetBuilder::new(ball);
            b.push(model.identity_matrix(), None);
            b.finish(model, "trivial".into()).unwrap()
        };
        assert_eq!(hausdorff(&k_net, &k_net).unwrap(), 0.0);
        let d_km = hausdorff(&k_net, &mn_net).unwrap();
        let d_mk = hausdorff(&mn_net, &k_net).unwrap();
        assert_eq!(d_km, d_mk);
        assert!(d_km > 0.0);
        let d_ki = hausdorff(&k_net, &id_net).unwrap();
        let d_mi = hausdorff(&mn_net, &id_net).unwrap();
        assert!(d_km <= d_ki + d_mi + 1e-12);
        assert!(d_ki > 0.1, "the compact net is not the identity alone");
    }

    #[test]
    fn convergence_experiment_sl2() {
        let model = GroupModel::special_linear(2).unwrap();
        let rs = build_root_system(&model);
        let sd = crate::roots::build_subset(&rs, &BTreeSet::new()).unwrap();
        let ray = geometric_kernel_ray(&rs, &sd, 2.0).unwrap();
        let a_seq: Vec<GroupElement> = (1..=8)
            .map(|n| group_exp(&ray.scale(n as f64)))
            .collect();
        let ball = BallSpec::new(4.0, 0.15, 1200).unwrap();
        let (table, nets, limit_net) =
            convergence_experiment(&rs, &sd, &a_seq, &ball, 7, &tols()).unwrap();
        assert_eq!(table.rows.len(), 8);
        assert!(table.final_distance() < 0.5, "{}", table.final_distance());
        assert!(table.decreasing_from(4), "{:?}", table.rows);
        // The accumulation criterion holds against the true limit and
        // fails against the wrong one (the compact subgroup).
        let report = verify_accumulation_criterion(&nets, &limit_net, 0.5).unwrap();
        assert!(report.ok(), "{report:?}");
        let full: BTreeSet<usize> = (0..rs.rank()).collect();
        let k_net = sample_structured(
            &rs,
            &build_limit_group(&rs, &LimitGroupDescriptor::plain(&rs, full)).unwrap(),
            &ball,
            9,
        )
        .unwrap();
        let wrong = verify_accumulation_criterion(&nets, &k_net, 0.5).unwrap();
        assert!(!wrong.ok(), "{wrong:?}");
        let _ = model;
    }

    #[test]
    fn convergence_for_the_explicit_diagonal_sequence() {
        // diag(2^n, 2^n, 4^-n) escapes through the facet of the first
        // simple root; conjugates of the compact subgroup converge to the
        // block limit group.
        let model = GroupModel::special_linear(3).unwrap();
        let rs = build_root_system(&model);
        let subset: BTreeSet<usize> = [0].into_iter().collect();
        let sd = crate::roots::build_subset(&rs, &subset).unwrap();
        let a_seq: Vec<GroupElement> = (1..=8)
            .map(|n| {
                let l = 2f64.powi(n);
                GroupElement::unchecked(
                    model,
                    DMatrix::from_diagonal(&DVector::from_vec(vec![l, l, 1.0 / (l * l)])),
                )
            })
            .collect();
        let ball = BallSpec::new(4.0, 0.2, 1200).unwrap();
        let (table, _, _) =
            convergence_experiment(&rs, &sd, &a_seq, &ball, 5, &tols()).unwrap();
        assert!(table.decreasing_from(4), "{:?}", table.rows);
        assert!(table.final_distance() < 0.1, "{}", table.final_distance());
    }

    #[test]
    fn escape_validation_rejects_constant() {
        let model = GroupModel::special_linear(2).unwrap();
        let rs = build_root_system(&model);
        let sd = crate::roots::build_subset(&rs, &BTreeSet::new()).unwrap();
        let a = GroupElement::identity(model);
        let seq = vec![a.clone(), a.clone(), a];
        assert!(matches!(
            validate_escape_sequence(&rs, &sd, &seq, &tols()),
            Err(Error::NonConvergent(_))
        ));
    }

    #[test]
    fn toy_spaces_match_closed_forms() {
        // Diverging spacings: trivial.
        let seq: Vec<ToySubgroupR> = (1..=32).map(|n| ToySubgroupR::Lattice(n as f64)).collect();
        assert_eq!(toy_limit_r(&seq).unwrap(), ToySubgroupR::Trivial);
        // Vanishing spacings: the full line.
        let seq: Vec<ToySubgroupR> = (1..=32)
            .map(|n| ToySubgroupR::Lattice(1.0 / n as f64))
            .collect();
        assert_eq!(toy_limit_r(&seq).unwrap(), ToySubgroupR::Full);
        // Settling spacings: the lattice at the limit value.
        let seq: Vec<ToySubgroupR> = (1..=32)
            .map(|n| ToySubgroupR::Lattice(3.0 + 0.5f64.powi(n)))
            .collect();
        match toy_limit_r(&seq).unwrap() {
            ToySubgroupR::Lattice(c) => assert!((c - 3.0).abs() < 1e-6),
            other => panic!("expected a lattice, got {other:?}"),
        }
        // Oscillating: rejected.
        let seq: Vec<ToySubgroupR> = (1..=32)
            .map(|n| ToySubgroupR::Lattice(if n % 2 == 0 { 1.0 } else { 2.0 }))
            .collect();
        assert!(toy_limit_r(&seq).is_err());

        // Integer side.
        let seq: Vec<ToySubgroupZ> = (1..=16).map(ToySubgroupZ::Lattice).collect();
        assert_eq!(toy_limit_z(&seq).unwrap(), ToySubgroupZ::Trivial);
        let seq: Vec<ToySubgroupZ> = (1..=16)
            .map(|n| ToySubgroupZ::Lattice(if n > 4 { 5 } else { n }))
            .collect();
        assert_eq!(toy_limit_z(&seq).unwrap(), ToySubgroupZ::Lattice(5));
        let seq: Vec<ToySubgroupZ> = (1..=16)
            .map(|n| ToySubgroupZ::Lattice(if n % 2 == 0 { 2 } else { 3 }))
            .collect();
        assert!(toy_limit_z(&seq).is_err());
    }

    #[test]
    fn conjugation_distorts_distances_by_at_most_condition_squared() {
        // Conjugating both nets by g changes the distance by at most the
        // square of g's condition number (in the inversion-symmetric
        // metric, each side picks up one factor).
        let model = GroupModel::special_linear(2).unwrap();
        let rs = build_root_system(&model);
        let ball = BallSpec::new(30.0, 0.5, 400).unwrap();
        let full: BTreeSet<usize> = (0..rs.rank()).collect();
        let k_net = sample_structured(
            &rs,
            &build_limit_group(&rs, &LimitGroupDescriptor::plain(&rs, full)).unwrap(),
            &BallSpec::new(3.0, 0.5, 200).unwrap(),
            3,
        )
        .unwrap();
        let mn_net = sample_structured(
            &rs,
            &build_limit_group(&rs, &LimitGroupDescriptor::plain(&rs, BTreeSet::new())).unwrap(),
            &BallSpec::new(3.0, 0.5, 200).unwrap(),
            4,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let conjugate_net = |s: &SampledSubgroup, g: &GroupElement| -> SampledSubgroup {
            let g_inv = g.inverse().unwrap();
            let points: Vec<SamplePoint> = s
                .points
                .iter()
                .map(|p| SamplePoint::from_matrix(&g.mat * &p.mat * &g_inv.mat).unwrap())
                .collect();
            SampledSubgroup {
                model: s.model,
                gen: vec![None; points.len()],
                points,
                source: s.source.clone(),
                ball,
                coverage_estimate: f64::NAN,
            }
        };
        for _ in 0..5 {
            let g = crate::model::random_group(&model, 1.0, &mut rng);
            let sv = g.mat.clone().svd(false, false).singular_values;
            let cond = sv.max() / sv.min();
            // Base distance over the big ball so no point is margin-filtered.
            let base = {
                let widen = |s: &SampledSubgroup| {
                    let mut out = s.clone();
                    out.ball = ball;
                    out
                };
                hausdorff(&widen(&k_net), &widen(&mn_net)).unwrap()
            };
            let conj = hausdorff(&conjugate_net(&k_net, &g), &conjugate_net(&mn_net, &g)).unwrap();
            assert!(conj <= cond * cond * base * (1.0 + 1e-9), "distortion too large");
            assert!(conj >= base / (cond * cond) * (1.0 - 1e-9), "distortion too small");
        }
    }

    #[test]
    fn sample_round_trips_through_json() {
        let model = GroupModel::special_linear(2).unwrap();
        let rs = build_root_system(&model);
        let desc = LimitGroupDescriptor::plain(&rs, BTreeSet::new());
        let sg = build_limit_group(&rs, &desc).unwrap();
        let ball = BallSpec::new(2.0, 0.2, 300).unwrap();
        let sample = sample_structured(&rs, &sg, &ball, 11).unwrap();
        let json = sample.to_json();
        let back = SampledSubgroup::from_json(&json).unwrap();
        assert_eq!(back.len(), sample.len());
        assert_eq!(hausdorff(&sample, &back).unwrap(), 0.0);
    }
}
