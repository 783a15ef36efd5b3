//! Restricted root systems for the two models, with explicit root-vector
//! bases, the base of simple roots, the positive Weyl chamber, and all
//! subset-indexed subobjects.
//!
//! Naming convention for the subset-indexed spaces, since superscripts are
//! not available in identifiers: `lower` stands for the subscript-I object
//! (joint kernel side) and `upper` for the superscript-I object (its
//! complement side). So `a_lower` is the joint kernel of the subset's
//! roots inside the split torus algebra, `a_upper` its Killing-orthogonal
//! complement, `n_lower` the nilpotent algebra summing the positive roots
//! outside the subset's span, `n_upper` the complementary one, and
//! `k_upper` the compact part of the derived centralizer.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg;
use crate::model::{
    algebra_orthonormal_basis, killing_form, AlgebraElement, GroupElement, GroupModel, Tolerances,
};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

/// A restricted root, stored through its integer coordinates over the base
/// and its values on the Cartan basis.
#[derive(Clone, Debug, Serialize)]
pub struct Root {
    /// Signed integer coordinates over the base of simple roots.
    pub coeffs: Vec<i64>,
    /// Values on the Cartan basis elements.
    pub functional: Vec<f64>,
    pub sign: Sign,
}

impl Root {
    pub fn is_positive(&self) -> bool {
        self.sign == Sign::Positive
    }

    /// Support over the base: indices of nonzero coordinates.
    pub fn support(&self) -> BTreeSet<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn negated(&self) -> Vec<i64> {
        self.coeffs.iter().map(|c| -c).collect()
    }
}

/// The maximal split torus algebra: pairwise commuting diagonal matrices.
#[derive(Clone, Debug)]
pub struct CartanData {
    pub model: GroupModel,
    pub a_basis: Vec<AlgebraElement>,
    pub rank: usize,
}

/// The full restricted root system with explicit root vectors.
#[derive(Clone, Debug)]
pub struct RootSystem {
    pub cartan: CartanData,
    /// All roots, sorted lexicographically by base coordinates.
    pub roots: Vec<Root>,
    /// The base of simple roots, in canonical order.
    pub base: Vec<Root>,
    /// Root vectors, parallel to `roots`.
    pub root_vectors: Vec<AlgebraElement>,
    /// Basis of the zero weight space (equal to the Cartan algebra in the
    /// split models supported here).
    pub zero_space_basis: Vec<AlgebraElement>,
    /// Ambient diagonal patterns of the Cartan basis, as columns; used to
    /// read coordinates off a diagonal matrix.
    a_diag: DMatrix<f64>,
    /// Pseudo-inverse data for coordinates in the full ordered basis
    /// (Cartan basis first, then root vectors in storage order).
    basis_pinv: DMatrix<f64>,
    /// The full ordered basis, vectorized as columns.
    basis_cols: DMatrix<f64>,
}

impl RootSystem {
    pub fn model(&self) -> GroupModel {
        self.cartan.model
    }

    pub fn rank(&self) -> usize {
        self.cartan.rank
    }

    /// Dimension of the Lie algebra: zero space plus one per root.
    pub fn algebra_dim(&self) -> usize {
        self.zero_space_basis.len() + self.roots.len()
    }

    /// Index of the root with the given coordinates, if present.
    pub fn root_index(&self, coeffs: &[i64]) -> Option<usize> {
        self.roots
            .binary_search_by(|r| r.coeffs.as_slice().cmp(coeffs))
            .ok()
    }

    /// Coordinates of a torus element over the Cartan basis. Errors when
    /// the element does not lie in the torus algebra within tolerance.
    pub fn a_coordinates(&self, h: &AlgebraElement, tol: &Tolerances) -> Result<DVector<f64>, Error> {
        if h.model != self.model() {
            return Err(Error::ModelMismatch);
        }
        let d = self.model().ambient_dim();
        let diag = DVector::from_fn(d, |i, _| h.mat[(i, i)]);
        let (coords, _) = linalg::coords_in_basis(&self.a_diag, &diag);
        let mut recon = DMatrix::zeros(d, d);
        for (c, basis) in coords.iter().zip(self.cartan.a_basis.iter()) {
            recon += &basis.mat * *c;
        }
        let residual = linalg::fro_dist(&recon, &h.mat);
        if residual > tol.membership_tol * (1.0 + h.norm()) {
            return Err(Error::validation(format!(
                "element is not in the torus algebra (residual {residual:.3e})"
            )));
        }
        Ok(coords)
    }

    /// Value of a root functional on a torus element.
    pub fn evaluate(&self, root: &Root, h: &AlgebraElement, tol: &Tolerances) -> Result<f64, Error> {
        let coords = self.a_coordinates(h, tol)?;
        Ok(root
            .functional
            .iter()
            .zip(coords.iter())
            .map(|(f, c)| f * c)
            .sum())
    }

    /// Torus element with prescribed Cartan-basis coordinates.
    pub fn torus_element(&self, coords: &DVector<f64>) -> AlgebraElement {
        let d = self.model().ambient_dim();
        let mut mat = DMatrix::zeros(d, d);
        for (c, basis) in coords.iter().zip(self.cartan.a_basis.iter()) {
            mat += &basis.mat * *c;
        }
        AlgebraElement::unchecked(self.model(), mat)
    }

    /// Coordinates in the fixed ordered basis (Cartan basis, then root
    /// vectors in storage order).
    pub fn full_coordinates(&self, x: &DMatrix<f64>) -> DVector<f64> {
        &self.basis_pinv * linalg::vectorize(x)
    }

    /// The matrix of the adjoint action of `g` in the fixed ordered basis.
    pub fn adjoint_matrix(&self, g: &GroupElement) -> Result<DMatrix<f64>, Error> {
        if g.model != self.model() {
            return Err(Error::ModelMismatch);
        }
        let g_inv = linalg::inverse(&g.mat)?;
        let m = self.algebra_dim();
        let d = self.model().ambient_dim();
        let mut out = DMatrix::zeros(m, m);
        for j in 0..m {
            let b = DMatrix::from_column_slice(d, d, self.basis_cols.column(j).as_slice());
            let image = &g.mat * b * &g_inv;
            out.set_column(j, &self.full_coordinates(&image));
        }
        Ok(out)
    }

    /// The matrix of the bracket action `ad X` in the fixed ordered basis.
    pub fn ad_matrix(&self, x: &AlgebraElement) -> Result<DMatrix<f64>, Error> {
        if x.model != self.model() {
            return Err(Error::ModelMismatch);
        }
        let m = self.algebra_dim();
        let d = self.model().ambient_dim();
        let mut out = DMatrix::zeros(m, m);
        for j in 0..m {
            let b = DMatrix::from_column_slice(d, d, self.basis_cols.column(j).as_slice());
            let image = &x.mat * &b - &b * &x.mat;
            out.set_column(j, &self.full_coordinates(&image));
        }
        Ok(out)
    }
}

/// Decomposition of an algebra element over the root spaces.
#[derive(Clone, Debug)]
pub struct RootProjection {
    /// Component in the zero weight space.
    pub zero: AlgebraElement,
    /// Coefficient against each stored root vector, parallel to `roots`.
    pub per_root: Vec<f64>,
    /// Reconstruction defect relative to the input norm.
    pub residual: f64,
}

impl RootProjection {
    /// The component in one root space, as a matrix element.
    pub fn component(&self, rs: &RootSystem, root_index: usize) -> AlgebraElement {
        rs.root_vectors[root_index].scale(self.per_root[root_index])
    }

    /// Indices of roots whose component exceeds `tol` in norm.
    pub fn active_roots(&self, rs: &RootSystem, tol: f64) -> Vec<usize> {
        self.per_root
            .iter()
            .enumerate()
            .filter(|(i, c)| c.abs() * rs.root_vectors[*i].norm() > tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Everything derived from a subset of the base: the two torus pieces, the
/// root partition, the two nilpotent algebras, the compact part of the
/// derived centralizer, and the finite centralizer of the torus in K.
#[derive(Clone, Debug)]
pub struct SubsetData {
    pub subset: BTreeSet<usize>,
    /// Basis of the joint kernel of the subset's roots in the torus algebra.
    pub a_lower_basis: Vec<AlgebraElement>,
    /// Basis of its Killing-orthogonal complement in the torus algebra.
    pub a_upper_basis: Vec<AlgebraElement>,
    /// Positive roots outside the subset's integer span.
    pub sigma_lower_plus: Vec<usize>,
    /// Positive roots inside the subset's integer span.
    pub sigma_upper_plus: Vec<usize>,
    /// Root vectors spanning the nilpotent algebra over `sigma_lower_plus`.
    pub n_lower_basis: Vec<AlgebraElement>,
    /// Root vectors spanning the complementary nilpotent algebra.
    pub n_upper_basis: Vec<AlgebraElement>,
    /// Basis of the compact part of the derived centralizer.
    pub k_upper_basis: Vec<AlgebraElement>,
    /// The finite centralizer of the torus algebra inside K.
    pub m_elements: Vec<GroupElement>,
    /// Orthonormal span (vectorized) of `n_lower_basis`.
    pub n_lower_span: DMatrix<f64>,
    /// Orthonormal span (vectorized) of `n_upper_basis`.
    pub n_upper_span: DMatrix<f64>,
    /// Orthonormal span (vectorized) of `k_upper_basis`.
    pub k_upper_span: DMatrix<f64>,
    /// Orthonormal span (vectorized) of the limit-group algebra
    /// (compact part plus `n_lower`).
    pub d_span: DMatrix<f64>,
    /// Coordinates of `a_lower_basis` over the Cartan basis, as columns.
    pub a_lower_coords: DMatrix<f64>,
    /// Coordinates of `a_upper_basis` over the Cartan basis, as columns.
    pub a_upper_coords: DMatrix<f64>,
}

impl SubsetData {
    pub fn is_full(&self, rs: &RootSystem) -> bool {
        self.subset.len() == rs.rank()
    }

    /// Project a torus element onto the kernel side, in Cartan coordinates.
    pub fn project_lower(&self, coords: &DVector<f64>) -> DVector<f64> {
        if self.a_lower_coords.ncols() == 0 {
            return DVector::zeros(coords.len());
        }
        // a_lower and a_upper coordinates are Killing-orthogonal, not
        // Euclidean-orthogonal, so solve the joint system instead of
        // projecting with transposes.
        let mut joint = DMatrix::zeros(coords.len(), self.a_lower_coords.ncols() + self.a_upper_coords.ncols());
        for j in 0..self.a_lower_coords.ncols() {
            joint.set_column(j, &self.a_lower_coords.column(j));
        }
        for j in 0..self.a_upper_coords.ncols() {
            joint.set_column(self.a_lower_coords.ncols() + j, &self.a_upper_coords.column(j));
        }
        let (sol, _) = linalg::coords_in_basis(&joint, coords);
        let mut out = DVector::zeros(coords.len());
        for j in 0..self.a_lower_coords.ncols() {
            out += self.a_lower_coords.column(j) * sol[j];
        }
        out
    }

    /// Project a torus element onto the complement side, in Cartan
    /// coordinates.
    pub fn project_upper(&self, coords: &DVector<f64>) -> DVector<f64> {
        coords - self.project_lower(coords)
    }
}

fn diag_matrix(d: usize, entries: &[(usize, f64)]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    for &(i, v) in entries {
        m[(i, i)] = v;
    }
    m
}

fn elementary(d: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    m[(i, j)] = 1.0;
    m
}

/// Build the full restricted root system of a model from the closed-form
/// root and root-vector descriptions.
pub fn build_root_system(model: &GroupModel) -> RootSystem {
    let d = model.ambient_dim();
    let rank = model.rank();

    let (a_basis_mats, raw): (Vec<DMatrix<f64>>, Vec<(Vec<f64>, DMatrix<f64>)>) = match *model {
        GroupModel::SpecialLinear { n } => {
            let a: Vec<DMatrix<f64>> = (0..n - 1)
                .map(|k| diag_matrix(n, &[(k, 1.0), (k + 1, -1.0)]))
                .collect();
            let mut raw = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    // alpha_{i,j}(H) = H_ii - H_jj evaluated on the basis.
                    let functional: Vec<f64> =
                        (0..n - 1).map(|k| a[k][(i, i)] - a[k][(j, j)]).collect();
                    raw.push((functional, elementary(n, i, j)));
                }
            }
            (a, raw)
        }
        GroupModel::SplitOrthogonal { p } => {
            let bar = |i: usize| 2 * p - 1 - i;
            let a: Vec<DMatrix<f64>> = (0..p)
                .map(|k| diag_matrix(d, &[(k, 1.0), (bar(k), -1.0)]))
                .collect();
            let beta = |i: usize| {
                let mut v = vec![0.0; p];
                v[i] = 1.0;
                v
            };
            let comb = |u: &[f64], s: f64, v: &[f64]| -> Vec<f64> {
                u.iter().zip(v.iter()).map(|(a, b)| a + s * b).collect()
            };
            let mut raw = Vec::new();
            for i in 0..p {
                for j in (i + 1)..p {
                    raw.push((
                        comb(&beta(i), -1.0, &beta(j)),
                        elementary(d, i, j) - elementary(d, bar(j), bar(i)),
                    ));
                    raw.push((
                        comb(&beta(j), -1.0, &beta(i)),
                        elementary(d, j, i) - elementary(d, bar(i), bar(j)),
                    ));
                    raw.push((
                        comb(&beta(i), 1.0, &beta(j)),
                        elementary(d, i, bar(j)) - elementary(d, j, bar(i)),
                    ));
                    raw.push((
                        comb(&beta(i), 1.0, &beta(j)).iter().map(|x| -x).collect(),
                        elementary(d, bar(j), i) - elementary(d, bar(i), j),
                    ));
                }
            }
            (a, raw)
        }
    };

    // Base functionals over the Cartan basis.
    let base_functionals: Vec<Vec<f64>> = match *model {
        GroupModel::SpecialLinear { n } => (0..n - 1)
            .map(|k| {
                (0..n - 1)
                    .map(|l| a_basis_mats[l][(k, k)] - a_basis_mats[l][(k + 1, k + 1)])
                    .collect()
            })
            .collect(),
        GroupModel::SplitOrthogonal { p } => {
            let mut out = Vec::new();
            for i in 0..p - 1 {
                let mut v = vec![0.0; p];
                v[i] = 1.0;
                v[i + 1] = -1.0;
                out.push(v);
            }
            let mut v = vec![0.0; p];
            v[p - 2] = 1.0;
            v[p - 1] = 1.0;
            out.push(v);
            out
        }
    };

    // Integer coordinates over the base: solve and snap.
    let base_mat = DMatrix::from_fn(rank, rank, |i, j| base_functionals[j][i]);
    let base_lu = base_mat.clone().lu();
    let to_coeffs = |functional: &[f64]| -> Vec<i64> {
        let rhs = DVector::from_column_slice(functional);
        let sol = base_lu.solve(&rhs).expect("base functionals are independent");
        sol.iter()
            .map(|&c| {
                let snapped = if c.abs() < 1e-8 { 0.0 } else { c };
                let rounded = snapped.round();
                assert!(
                    (snapped - rounded).abs() < 1e-6,
                    "root coordinate {c} is not an integer"
                );
                rounded as i64
            })
            .collect()
    };

    let mut roots_with_vectors: Vec<(Root, DMatrix<f64>)> = raw
        .into_iter()
        .map(|(functional, vector)| {
            let coeffs = to_coeffs(&functional);
            let pos = coeffs.iter().any(|&c| c > 0);
            let neg = coeffs.iter().any(|&c| c < 0);
            assert!(pos != neg, "mixed-sign root coordinates {coeffs:?}");
            let sign = if pos { Sign::Positive } else { Sign::Negative };
            (
                Root {
                    coeffs,
                    functional,
                    sign,
                },
                vector,
            )
        })
        .collect();
    roots_with_vectors.sort_by(|a, b| a.0.coeffs.cmp(&b.0.coeffs));

    let roots: Vec<Root> = roots_with_vectors.iter().map(|(r, _)| r.clone()).collect();
    let root_vectors: Vec<AlgebraElement> = roots_with_vectors
        .iter()
        .map(|(_, v)| AlgebraElement::unchecked(*model, v.clone()))
        .collect();

    let base: Vec<Root> = base_functionals
        .iter()
        .map(|f| {
            let coeffs = to_coeffs(f);
            Root {
                coeffs,
                functional: f.clone(),
                sign: Sign::Positive,
            }
        })
        .collect();

    let a_basis: Vec<AlgebraElement> = a_basis_mats
        .iter()
        .map(|m| AlgebraElement::unchecked(*model, m.clone()))
        .collect();
    let a_diag = DMatrix::from_fn(d, rank, |i, k| a_basis_mats[k][(i, i)]);

    let mut basis_cols = DMatrix::zeros(d * d, rank + roots.len());
    for (j, b) in a_basis.iter().enumerate() {
        basis_cols.set_column(j, &linalg::vectorize(&b.mat));
    }
    for (j, v) in root_vectors.iter().enumerate() {
        basis_cols.set_column(rank + j, &linalg::vectorize(&v.mat));
    }
    let basis_pinv = basis_cols
        .clone()
        .svd(true, true)
        .pseudo_inverse(linalg::RANK_CUTOFF)
        .expect("full basis has full column rank");

    RootSystem {
        cartan: CartanData {
            model: *model,
            a_basis: a_basis.clone(),
            rank,
        },
        roots,
        base,
        root_vectors,
        zero_space_basis: a_basis,
        a_diag,
        basis_pinv,
        basis_cols,
    }
}

/// Decompose an algebra element over the zero space and the root spaces.
pub fn root_space_project(rs: &RootSystem, x: &AlgebraElement) -> Result<RootProjection, Error> {
    if x.model != rs.model() {
        return Err(Error::ModelMismatch);
    }
    let coords = rs.full_coordinates(&x.mat);
    let rank = rs.rank();
    let zero_coords = DVector::from_fn(rank, |i, _| coords[i]);
    let zero = rs.torus_element(&zero_coords);
    let per_root: Vec<f64> = (0..rs.roots.len()).map(|i| coords[rank + i]).collect();
    let mut recon = zero.mat.clone();
    for (c, v) in per_root.iter().zip(rs.root_vectors.iter()) {
        recon += &v.mat * *c;
    }
    let residual = linalg::fro_dist(&recon, &x.mat) / (1.0 + x.norm());
    Ok(RootProjection {
        zero,
        per_root,
        residual,
    })
}

/// Chamber membership: all simple roots nonnegative (closed) or positive
/// (open), with a dead band of `membership_tol` around zero.
pub fn chamber_test(
    rs: &RootSystem,
    h: &AlgebraElement,
    closed: bool,
    tol: &Tolerances,
) -> Result<bool, Error> {
    let coords = rs.a_coordinates(h, tol)?;
    Ok(rs.base.iter().all(|alpha| {
        let v: f64 = alpha
            .functional
            .iter()
            .zip(coords.iter())
            .map(|(f, c)| f * c)
            .sum();
        if closed {
            v >= -tol.membership_tol
        } else {
            v > tol.membership_tol
        }
    }))
}

/// The subset of simple roots vanishing on a closed-chamber element; the
/// facet of the chamber the element lies on.
pub fn facet_subset_of(
    rs: &RootSystem,
    h: &AlgebraElement,
    tol: &Tolerances,
) -> Result<BTreeSet<usize>, Error> {
    if !chamber_test(rs, h, true, tol)? {
        return Err(Error::OutsideCorner(
            "element is not in the closed chamber".into(),
        ));
    }
    let coords = rs.a_coordinates(h, tol)?;
    Ok(rs
        .base
        .iter()
        .enumerate()
        .filter(|(_, alpha)| {
            let v: f64 = alpha
                .functional
                .iter()
                .zip(coords.iter())
                .map(|(f, c)| f * c)
                .sum();
            v.abs() <= tol.membership_tol
        })
        .map(|(i, _)| i)
        .collect())
}

fn span_of(model: &GroupModel, mats: &[AlgebraElement]) -> DMatrix<f64> {
    let d = model.ambient_dim();
    let mut cols = DMatrix::zeros(d * d, mats.len());
    for (j, m) in mats.iter().enumerate() {
        cols.set_column(j, &linalg::vectorize(&m.mat));
    }
    linalg::column_span(&cols, linalg::RANK_CUTOFF)
}

/// Enumerate the finite centralizer of the torus algebra in K: diagonal
/// sign matrices compatible with the model.
fn enumerate_m(model: &GroupModel) -> Vec<GroupElement> {
    let d = model.ambient_dim();
    match *model {
        GroupModel::SpecialLinear { n } => {
            let mut out = Vec::new();
            for bits in 0..(1u32 << n) {
                let signs: Vec<f64> = (0..n)
                    .map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 })
                    .collect();
                if signs.iter().product::<f64>() > 0.0 {
                    let mat = DMatrix::from_fn(d, d, |i, j| if i == j { signs[i] } else { 0.0 });
                    out.push(GroupElement::unchecked(*model, mat));
                }
            }
            out
        }
        GroupModel::SplitOrthogonal { p } => {
            let mut out = Vec::new();
            for bits in 0..(1u32 << p) {
                let eps: Vec<f64> = (0..p)
                    .map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 })
                    .collect();
                if eps.iter().product::<f64>() > 0.0 {
                    let mat = DMatrix::from_fn(d, d, |i, j| {
                        if i != j {
                            0.0
                        } else if i < p {
                            eps[i]
                        } else {
                            eps[2 * p - 1 - i]
                        }
                    });
                    out.push(GroupElement::unchecked(*model, mat));
                }
            }
            out
        }
    }
}

/// Build all subset-derived data for a subset of the base (proper or full).
pub fn build_subset(rs: &RootSystem, subset: &BTreeSet<usize>) -> Result<SubsetData, Error> {
    let rank = rs.rank();
    if subset.iter().any(|&i| i >= rank) {
        return Err(Error::InvalidSubset);
    }
    let model = rs.model();

    // Joint kernel of the subset's roots, in Cartan coordinates.
    let constraint = DMatrix::from_fn(subset.len(), rank, |r, c| {
        let idx = *subset.iter().nth(r).expect("index in range");
        rs.base[idx].functional[c]
    });
    let a_lower_coords = linalg::nullspace(&constraint, linalg::RANK_CUTOFF);

    // Killing-orthogonal complement inside the torus algebra.
    let gram = {
        let mut g = DMatrix::zeros(rank, rank);
        for i in 0..rank {
            for j in 0..rank {
                g[(i, j)] = killing_form(&rs.cartan.a_basis[i], &rs.cartan.a_basis[j])?;
            }
        }
        g
    };
    let a_upper_coords = if a_lower_coords.ncols() == 0 {
        DMatrix::identity(rank, rank)
    } else {
        linalg::nullspace(
            &(a_lower_coords.transpose() * &gram),
            linalg::RANK_CUTOFF * (1.0 + linalg::frobenius(&gram)),
        )
    };
    if a_upper_coords.ncols() != subset.len() {
        return Err(Error::Numerical(format!(
            "complement dimension {} does not match subset size {}",
            a_upper_coords.ncols(),
            subset.len()
        )));
    }

    let a_lower_basis: Vec<AlgebraElement> = (0..a_lower_coords.ncols())
        .map(|j| rs.torus_element(&a_lower_coords.column(j).clone_owned()))
        .collect();
    let a_upper_basis: Vec<AlgebraElement> = (0..a_upper_coords.ncols())
        .map(|j| rs.torus_element(&a_upper_coords.column(j).clone_owned()))
        .collect();

    // Partition of the positive roots by integer support over the subset.
    let mut sigma_lower_plus = Vec::new();
    let mut sigma_upper_plus = Vec::new();
    for (i, root) in rs.roots.iter().enumerate() {
        if !root.is_positive() {
            continue;
        }
        if root.support().is_subset(subset) {
            sigma_upper_plus.push(i);
        } else {
            sigma_lower_plus.push(i);
        }
    }

    let n_lower_basis: Vec<AlgebraElement> = sigma_lower_plus
        .iter()
        .map(|&i| rs.root_vectors[i].clone())
        .collect();
    let n_upper_basis: Vec<AlgebraElement> = sigma_upper_plus
        .iter()
        .map(|&i| rs.root_vectors[i].clone())
        .collect();

    // Centralizer of the kernel torus: joint kernel of its adjoint action
    // on the full algebra, computed in an orthonormal algebra basis.
    let (q, mats) = algebra_orthonormal_basis(&model);
    let m_dim = mats.len();
    let mut stacked = DMatrix::zeros(m_dim * a_lower_basis.len().max(1), m_dim);
    if a_lower_basis.is_empty() {
        // Empty kernel torus: the centralizer is everything.
        stacked = DMatrix::zeros(0, m_dim);
    } else {
        for (bi, h) in a_lower_basis.iter().enumerate() {
            for (j, b) in mats.iter().enumerate() {
                let br = &h.mat * b - b * &h.mat;
                let col = q.transpose() * linalg::vectorize(&br);
                for r in 0..m_dim {
                    stacked[(bi * m_dim + r, j)] = col[r];
                }
            }
        }
    }
    let cent_coords = linalg::nullspace(&stacked, linalg::RANK_CUTOFF);
    let cent_mats: Vec<DMatrix<f64>> = (0..cent_coords.ncols())
        .map(|j| {
            let mut acc = DMatrix::zeros(model.ambient_dim(), model.ambient_dim());
            for (c, b) in cent_coords.column(j).iter().zip(mats.iter()) {
                acc += b * *c;
            }
            acc
        })
        .collect();

    // Derived algebra of the centralizer: span of pairwise brackets.
    let d = model.ambient_dim();
    let mut bracket_cols = DMatrix::zeros(d * d, cent_mats.len() * cent_mats.len());
    let mut col = 0;
    for x in &cent_mats {
        for y in &cent_mats {
            bracket_cols.set_column(col, &linalg::vectorize(&(x * y - y * x)));
            col += 1;
        }
    }
    let derived_span = linalg::column_span(&bracket_cols, linalg::RANK_CUTOFF);

    // Intersect with the compact part: solve for combinations that are
    // antisymmetric.
    let derived_dim = derived_span.ncols();
    let mut sym_map = DMatrix::zeros(d * d, derived_dim);
    for j in 0..derived_dim {
        let b = DMatrix::from_column_slice(d, d, derived_span.column(j).as_slice());
        sym_map.set_column(j, &linalg::vectorize(&(&b + b.transpose())));
    }
    let k_coords = linalg::nullspace(&sym_map, linalg::RANK_CUTOFF);
    let k_upper_basis: Vec<AlgebraElement> = (0..k_coords.ncols())
        .map(|j| {
            let mut acc = DMatrix::zeros(d, d);
            for (c, i) in k_coords.column(j).iter().zip(0..derived_dim) {
                let b = DMatrix::from_column_slice(d, d, derived_span.column(i).as_slice());
                acc += b * *c;
            }
            AlgebraElement::unchecked(model, acc)
        })
        .collect();

    let n_lower_span = span_of(&model, &n_lower_basis);
    let n_upper_span = span_of(&model, &n_upper_basis);
    let k_upper_span = span_of(&model, &k_upper_basis);
    let mut d_mats = k_upper_basis.clone();
    d_mats.extend(n_lower_basis.iter().cloned());
    let d_span = span_of(&model, &d_mats);

    Ok(SubsetData {
        subset: subset.clone(),
        a_lower_basis,
        a_upper_basis,
        sigma_lower_plus,
        sigma_upper_plus,
        n_lower_basis,
        n_upper_basis,
        k_upper_basis,
        m_elements: enumerate_m(&model),
        n_lower_span,
        n_upper_span,
        k_upper_span,
        d_span,
        a_lower_coords,
        a_upper_coords,
    })
}

/// Compact JSON form of a root system for reports.
pub fn root_system_report(rs: &RootSystem) -> serde_json::Value {
    serde_json::json!({
        "model": rs.model(),
        "rank": rs.rank(),
        "root_count": rs.roots.len(),
        "base": rs.base.iter().map(|r| r.coeffs.clone()).collect::<Vec<_>>(),
        "roots": rs.roots.iter().map(|r| r.coeffs.clone()).collect::<Vec<_>>(),
        "cartan_basis": rs
            .cartan
            .a_basis
            .iter()
            .map(|b| crate::model::serde_matrix::to_rows(&b.mat))
            .collect::<Vec<_>>(),
    })
}

/// Compact JSON form of subset data for reports.
pub fn subset_report(rs: &RootSystem, sd: &SubsetData) -> serde_json::Value {
    let mats = |v: &Vec<AlgebraElement>| {
        v.iter()
            .map(|b| crate::model::serde_matrix::to_rows(&b.mat))
            .collect::<Vec<_>>()
    };
    serde_json::json!({
        "model": rs.model(),
        "subset": sd.subset.iter().copied().collect::<Vec<_>>(),
        "a_lower_basis": mats(&sd.a_lower_basis),
        "a_upper_basis": mats(&sd.a_upper_basis),
        "sigma_lower_plus": sd.sigma_lower_plus.iter().map(|&i| rs.roots[i].coeffs.clone()).collect::<Vec<_>>(),
        "sigma_upper_plus": sd.sigma_upper_plus.iter().map(|&i| rs.roots[i].coeffs.clone()).collect::<Vec<_>>(),
        "n_lower_basis": mats(&sd.n_lower_basis),
        "n_upper_basis": mats(&sd.n_upper_basis),
        "k_upper_basis": mats(&sd.k_upper_basis),
        "m_count": sd.m_elements.len(),
    })
}

/// `true` when the coefficientwise sum of two roots is again a root or zero.
pub fn root_sum_index(rs: &RootSystem, i: usize, j: usize) -> Option<Option<usize>> {
    let sum: Vec<i64> = rs.roots[i]
        .coeffs
        .iter()
        .zip(rs.roots[j].coeffs.iter())
        .map(|(a, b)| a + b)
        .collect();
    if sum.iter().all(|&c| c == 0) {
        return Some(None); // zero
    }
    rs.root_index(&sum).map(|k| Some(k))
}
