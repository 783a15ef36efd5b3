//! Matrix carriers for the two supported group models, the Lie-algebraic
//! primitives (bracket, Killing form, Cartan involution) and the membership
//! predicates that every other module builds on.
//!
//! The two models are the special linear group of determinant-one real
//! matrices and the identity component of the split orthogonal group
//! preserving the antidiagonal form of signature (p, p).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::linalg;

/// Which matrix group a value lives in.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum GroupModel {
    /// SL(n, R), n >= 2.
    SpecialLinear { n: usize },
    /// SO0(p, p), p >= 2, realized with the antidiagonal form J.
    SplitOrthogonal { p: usize },
}

impl GroupModel {
    pub fn special_linear(n: usize) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::validation("special linear model needs n >= 2"));
        }
        Ok(GroupModel::SpecialLinear { n })
    }

    pub fn split_orthogonal(p: usize) -> Result<Self, Error> {
        if p < 2 {
            return Err(Error::validation("split orthogonal model needs p >= 2"));
        }
        Ok(GroupModel::SplitOrthogonal { p })
    }

    /// Parse a model spec of the form `sl:3` or `sopp:2`.
    pub fn parse(spec: &str) -> Result<Self, Error> {
        let (fam, num) = spec
            .split_once(':')
            .ok_or_else(|| Error::validation(format!("bad model spec `{spec}`, want sl:N or sopp:P")))?;
        let k: usize = num
            .parse()
            .map_err(|_| Error::validation(format!("bad model size in `{spec}`")))?;
        match fam {
            "sl" => GroupModel::special_linear(k),
            "sopp" => GroupModel::split_orthogonal(k),
            _ => Err(Error::validation(format!("unknown model family `{fam}`"))),
        }
    }

    /// Size of the matrices realizing the model.
    pub fn ambient_dim(&self) -> usize {
        match *self {
            GroupModel::SpecialLinear { n } => n,
            GroupModel::SplitOrthogonal { p } => 2 * p,
        }
    }

    /// Real rank: dimension of the maximal split torus.
    pub fn rank(&self) -> usize {
        match *self {
            GroupModel::SpecialLinear { n } => n - 1,
            GroupModel::SplitOrthogonal { p } => p,
        }
    }

    /// The antidiagonal involution defining the split orthogonal form.
    pub fn j_form(&self) -> Option<DMatrix<f64>> {
        match *self {
            GroupModel::SpecialLinear { .. } => None,
            GroupModel::SplitOrthogonal { p } => Some(linalg::antidiagonal(2 * p)),
        }
    }

    pub fn identity_matrix(&self) -> DMatrix<f64> {
        let d = self.ambient_dim();
        DMatrix::identity(d, d)
    }

    fn check_dim(&self, mat: &DMatrix<f64>) -> Result<(), Error> {
        let d = self.ambient_dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for GroupModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            GroupModel::SpecialLinear { n } => write!(f, "sl:{n}"),
            GroupModel::SplitOrthogonal { p } => write!(f, "sopp:{p}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelWire {
    family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
}

impl Serialize for GroupModel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let wire = match *self {
            GroupModel::SpecialLinear { n } => ModelWire {
                family: "sl".into(),
                n: Some(n),
                p: None,
            },
            GroupModel::SplitOrthogonal { p } => ModelWire {
                family: "sopp".into(),
                n: None,
                p: Some(p),
            },
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = ModelWire::deserialize(d)?;
        match wire.family.as_str() {
            "sl" => {
                let n = wire.n.ok_or_else(|| D::Error::custom("sl model needs `n`"))?;
                GroupModel::special_linear(n).map_err(D::Error::custom)
            }
            "sopp" => {
                let p = wire.p.ok_or_else(|| D::Error::custom("sopp model needs `p`"))?;
                GroupModel::split_orthogonal(p).map_err(D::Error::custom)
            }
            other => Err(D::Error::custom(format!("unknown family `{other}`"))),
        }
    }
}

/// Matrices serialize as row-major arrays of arrays of doubles.
pub mod serde_matrix {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err("matrix needs at least one row".into());
        }
        let ncols = rows[0].len();
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("matrix rows have inconsistent lengths".into());
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Numerical tolerances, threaded explicitly through every operation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    /// Residual bound for factorizations (Iwasawa, polar, Cartan).
    pub factorization_tol: f64,
    /// Residual bound for group and subgroup membership tests.
    pub membership_tol: f64,
    /// Bound separating eigenvalue clusters and deciding distality.
    pub spectrum_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            factorization_tol: 1e-9,
            membership_tol: 1e-7,
            spectrum_tol: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), Error> {
        if self.factorization_tol > 0.0 && self.membership_tol > 0.0 && self.spectrum_tol > 0.0 {
            Ok(())
        } else {
            Err(Error::validation("tolerances must be strictly positive"))
        }
    }
}

/// An element of the group carried by a model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupElement {
    pub model: GroupModel,
    #[serde(with = "serde_matrix")]
    pub mat: DMatrix<f64>,
}

/// An element of the Lie algebra carried by a model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraElement {
    pub model: GroupModel,
    #[serde(with = "serde_matrix")]
    pub mat: DMatrix<f64>,
}

/// Relative scale used in membership residuals: absolute for matrices of
/// order one, relative above that.
fn residual_scale(m: &DMatrix<f64>) -> f64 {
    1f64.max(linalg::frobenius(m))
}

/// Group membership residual, without thresholding. The returned value is
/// the worst defining-relation defect, already normalized by the element's
/// scale; the boolean marks identity-component failures for the split
/// orthogonal model (a sign condition, not a residual).
pub fn group_membership_defect(mat: &DMatrix<f64>, model: &GroupModel) -> (f64, bool) {
    match *model {
        GroupModel::SpecialLinear { .. } => {
            let scale = residual_scale(mat);
            ((mat.determinant() - 1.0).abs() / scale, true)
        }
        GroupModel::SplitOrthogonal { p } => {
            let j = linalg::antidiagonal(2 * p);
            let scale = residual_scale(mat) * residual_scale(mat);
            let form = linalg::fro_dist(&(mat.transpose() * &j * mat), &j) / scale;
            let det = (mat.determinant() - 1.0).abs() / scale;
            let q = linalg::hyperbolic_change_of_basis(p);
            let h = q.transpose() * mat * &q;
            let top = h.view((0, 0), (p, p)).clone_owned().determinant();
            let bottom = h.view((p, p), (p, p)).clone_owned().determinant();
            (form.max(det), top > 0.0 && bottom > 0.0)
        }
    }
}

/// True when the defining relations of the model's group hold within `tol`,
/// including the identity-component condition for SO0(p, p).
pub fn is_group_member(mat: &DMatrix<f64>, model: &GroupModel, tol: f64) -> Result<bool, Error> {
    model.check_dim(mat)?;
    let (defect, component) = group_membership_defect(mat, model);
    Ok(defect <= tol && component)
}

/// Algebra membership residual, without thresholding.
pub fn algebra_membership_defect(mat: &DMatrix<f64>, model: &GroupModel) -> f64 {
    let scale = residual_scale(mat);
    match *model {
        GroupModel::SpecialLinear { .. } => mat.trace().abs() / scale,
        GroupModel::SplitOrthogonal { p } => {
            let j = linalg::antidiagonal(2 * p);
            linalg::frobenius(&(&j * mat.transpose() * &j + mat)) / scale
        }
    }
}

pub fn is_algebra_member(mat: &DMatrix<f64>, model: &GroupModel, tol: f64) -> Result<bool, Error> {
    model.check_dim(mat)?;
    Ok(algebra_membership_defect(mat, model) <= tol)
}

impl GroupElement {
    pub fn new(model: GroupModel, mat: DMatrix<f64>, tol: &Tolerances) -> Result<Self, Error> {
        model.check_dim(&mat)?;
        let (defect, component) = group_membership_defect(&mat, &model);
        if defect > tol.membership_tol {
            return Err(Error::NotInGroup {
                reason: format!("defining relations fail for {model}"),
                residual: defect,
            });
        }
        if !component {
            return Err(Error::NotInGroup {
                reason: "outside the identity component".into(),
                residual: defect,
            });
        }
        Ok(GroupElement { model, mat })
    }

    /// Wrap without validating; for internal use where membership is
    /// guaranteed by construction.
    pub(crate) fn unchecked(model: GroupModel, mat: DMatrix<f64>) -> Self {
        GroupElement { model, mat }
    }

    pub fn identity(model: GroupModel) -> Self {
        GroupElement::unchecked(model, model.identity_matrix())
    }

    pub fn inverse(&self) -> Result<GroupElement, Error> {
        Ok(GroupElement::unchecked(
            self.model,
            linalg::inverse(&self.mat)?,
        ))
    }

    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement, Error> {
        if self.model != other.model {
            return Err(Error::ModelMismatch);
        }
        Ok(GroupElement::unchecked(self.model, &self.mat * &other.mat))
    }

    /// Conjugate `other` by `self`.
    pub fn conjugate(&self, other: &GroupElement) -> Result<GroupElement, Error> {
        if self.model != other.model {
            return Err(Error::ModelMismatch);
        }
        let inv = linalg::inverse(&self.mat)?;
        Ok(GroupElement::unchecked(
            self.model,
            &self.mat * &other.mat * inv,
        ))
    }

    /// Adjoint action on an algebra element.
    pub fn ad_action(&self, x: &AlgebraElement) -> Result<AlgebraElement, Error> {
        if self.model != x.model {
            return Err(Error::ModelMismatch);
        }
        let inv = linalg::inverse(&self.mat)?;
        Ok(AlgebraElement::unchecked(
            self.model,
            &self.mat * &x.mat * inv,
        ))
    }

    /// True when the element is orthogonal and a model member, i.e. lies in
    /// the maximal compact subgroup K.
    pub fn in_maximal_compact(&self, tol: f64) -> bool {
        let d = self.model.ambient_dim();
        let orth = linalg::fro_dist(
            &(&self.mat * self.mat.transpose()),
            &DMatrix::identity(d, d),
        );
        let (defect, component) = group_membership_defect(&self.mat, &self.model);
        orth <= tol && defect <= tol && component
    }
}

impl AlgebraElement {
    pub fn new(model: GroupModel, mat: DMatrix<f64>, tol: &Tolerances) -> Result<Self, Error> {
        model.check_dim(&mat)?;
        let defect = algebra_membership_defect(&mat, &model);
        if defect > tol.membership_tol {
            return Err(Error::NotInAlgebra {
                reason: format!("defining relations fail for {model}"),
                residual: defect,
            });
        }
        Ok(AlgebraElement { model, mat })
    }

    pub(crate) fn unchecked(model: GroupModel, mat: DMatrix<f64>) -> Self {
        AlgebraElement { model, mat }
    }

    pub fn zero(model: GroupModel) -> Self {
        let d = model.ambient_dim();
        AlgebraElement::unchecked(model, DMatrix::zeros(d, d))
    }

    pub fn scale(&self, c: f64) -> AlgebraElement {
        AlgebraElement::unchecked(self.model, &self.mat * c)
    }

    pub fn add(&self, other: &AlgebraElement) -> Result<AlgebraElement, Error> {
        if self.model != other.model {
            return Err(Error::ModelMismatch);
        }
        Ok(AlgebraElement::unchecked(self.model, &self.mat + &other.mat))
    }

    pub fn norm(&self) -> f64 {
        linalg::frobenius(&self.mat)
    }
}

/// Commutator bracket [X, Y] = XY - YX.
pub fn bracket(x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement, Error> {
    if x.model != y.model {
        return Err(Error::ModelMismatch);
    }
    Ok(AlgebraElement::unchecked(
        x.model,
        &x.mat * &y.mat - &y.mat * &x.mat,
    ))
}

/// A raw (non-orthonormal) basis of the model's Lie algebra as matrices.
pub fn algebra_raw_basis(model: &GroupModel) -> Vec<DMatrix<f64>> {
    let d = model.ambient_dim();
    let e = |i: usize, j: usize| {
        let mut m = DMatrix::zeros(d, d);
        m[(i, j)] = 1.0;
        m
    };
    match *model {
        GroupModel::SpecialLinear { n } => {
            let mut basis = Vec::with_capacity(n * n - 1);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        basis.push(e(i, j));
                    }
                }
            }
            for i in 0..n - 1 {
                basis.push(e(i, i) - e(i + 1, i + 1));
            }
            basis
        }
        GroupModel::SplitOrthogonal { p } => {
            let bar = |i: usize| 2 * p - 1 - i;
            let mut basis = Vec::new();
            for i in 0..p {
                for j in (i + 1)..p {
                    basis.push(e(i, j) - e(bar(j), bar(i)));
                    basis.push(e(j, i) - e(bar(i), bar(j)));
                    basis.push(e(i, bar(j)) - e(j, bar(i)));
                    basis.push(e(bar(j), i) - e(bar(i), j));
                }
            }
            for i in 0..p {
                basis.push(e(i, i) - e(bar(i), bar(i)));
            }
            basis
        }
    }
}

/// The matrix of ad X in the orthonormalized algebra basis `(q, mats)`.
fn ad_matrix(x: &DMatrix<f64>, q: &DMatrix<f64>, mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = mats.len();
    let mut out = DMatrix::zeros(m, m);
    for (j, b) in mats.iter().enumerate() {
        let br = x * b - b * x;
        let coords = q.transpose() * linalg::vectorize(&br);
        out.set_column(j, &coords);
    }
    out
}

/// Orthonormalized algebra basis: the span matrix `q` (columns orthonormal
/// in the vectorized trace inner product) and the same columns reshaped
/// back into matrices.
pub fn algebra_orthonormal_basis(model: &GroupModel) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let d = model.ambient_dim();
    let raw = algebra_raw_basis(model);
    let mut cols = DMatrix::zeros(d * d, raw.len());
    for (j, b) in raw.iter().enumerate() {
        cols.set_column(j, &linalg::vectorize(b));
    }
    let q = linalg::column_span(&cols, linalg::RANK_CUTOFF);
    let mats = (0..q.ncols())
        .map(|j| DMatrix::from_column_slice(d, d, q.column(j).as_slice()))
        .collect();
    (q, mats)
}

/// Killing form B(X, Y) = tr(ad X . ad Y), computed on an orthonormalized
/// basis of the model's algebra.
pub fn killing_form(x: &AlgebraElement, y: &AlgebraElement) -> Result<f64, Error> {
    if x.model != y.model {
        return Err(Error::ModelMismatch);
    }
    let (q, mats) = algebra_orthonormal_basis(&x.model);
    let ax = ad_matrix(&x.mat, &q, &mats);
    let ay = ad_matrix(&y.mat, &q, &mats);
    Ok((ax * ay).trace())
}

/// Cartan involution Y -> -Y^t. Fixed space is the compact part, the
/// (-1)-eigenspace is the symmetric part.
pub fn cartan_involution(x: &AlgebraElement) -> AlgebraElement {
    AlgebraElement::unchecked(x.model, -x.mat.transpose())
}

/// The positive definite form -B(X, theta(Y)).
pub fn b_theta(x: &AlgebraElement, y: &AlgebraElement) -> Result<f64, Error> {
    let ty = cartan_involution(y);
    Ok(-killing_form(x, &ty)?)
}

/// Matrix exponential into the group. Nilpotent arguments use the
/// terminating power series; everything else goes through scaling and
/// squaring.
pub fn group_exp(x: &AlgebraElement) -> GroupElement {
    let d = x.model.ambient_dim();
    let mut power = x.mat.clone();
    for _ in 1..d {
        power = &power * &x.mat;
    }
    let mat = if power.iter().all(|&v| v == 0.0) {
        let mut acc = DMatrix::identity(d, d);
        let mut term = DMatrix::identity(d, d);
        for k in 1..d {
            term = term * &x.mat / (k as f64);
            acc += &term;
        }
        acc
    } else {
        x.mat.clone().exp()
    };
    GroupElement::unchecked(x.model, mat)
}

/// Principal logarithm back into the algebra. Defined when the spectrum of
/// `g` avoids the closed negative real axis.
pub fn group_log(g: &GroupElement, tol: &Tolerances) -> Result<AlgebraElement, Error> {
    let mat = linalg::principal_log(&g.mat)?;
    AlgebraElement::new(g.model, mat, tol)
}

/// Random algebra element with Frobenius norm `scale`.
pub fn random_algebra<R: Rng>(model: &GroupModel, scale: f64, rng: &mut R) -> AlgebraElement {
    let (_, mats) = algebra_orthonormal_basis(model);
    let d = model.ambient_dim();
    let mut acc = DMatrix::zeros(d, d);
    let mut coeffs = DVector::zeros(mats.len());
    for c in coeffs.iter_mut() {
        *c = rng.random::<f64>() * 2.0 - 1.0;
    }
    let norm = coeffs.norm();
    if norm > 0.0 {
        coeffs /= norm;
    }
    for (c, b) in coeffs.iter().zip(mats.iter()) {
        acc += b * (*c * scale);
    }
    AlgebraElement::unchecked(*model, acc)
}

/// Random group element obtained as the exponential of a random algebra
/// element of the given log-scale.
pub fn random_group<R: Rng>(model: &GroupModel, log_scale: f64, rng: &mut R) -> GroupElement {
    group_exp(&random_algebra(model, log_scale * rng.random::<f64>(), rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn bracket_antisymmetry_and_sl2_example() {
        let model = GroupModel::special_linear(2).unwrap();
        let h = AlgebraElement::new(
            model,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            &tols(),
        )
        .unwrap();
        let e12 = AlgebraElement::new(
            model,
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            &tols(),
        )
        .unwrap();
        let self_bracket = bracket(&h, &h).unwrap();
        assert!(self_bracket.norm() < 1e-15);
        let b = bracket(&h, &e12).unwrap();
        assert!(linalg::fro_dist(&b.mat, &(e12.mat.clone() * 2.0)) < 1e-14);
    }

    #[test]
    fn bracket_rejects_model_mismatch() {
        let m1 = GroupModel::special_linear(2).unwrap();
        let m2 = GroupModel::special_linear(3).unwrap();
        let x = AlgebraElement::zero(m1);
        let y = AlgebraElement::zero(m2);
        assert!(matches!(bracket(&x, &y), Err(Error::ModelMismatch)));
    }

    #[test]
    fn so22_bracket_of_opposite_root_vectors_is_diagonal() {
        let model = GroupModel::split_orthogonal(2).unwrap();
        let d = 4;
        let e = |i: usize, j: usize| {
            let mut m = DMatrix::zeros(d, d);
            m[(i, j)] = 1.0;
            m
        };
        // X_{b1-b2} and X_{-(b1-b2)} with indices 1,2 (0-based 0,1), bars 3,2.
        let xp = AlgebraElement::new(model, e(0, 1) - e(2, 3), &tols()).unwrap();
        let xm = AlgebraElement::new(model, e(1, 0) - e(3, 2), &tols()).unwrap();
        let b = bracket(&xp, &xm).unwrap();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    assert!(b.mat[(i, j)].abs() < 1e-14);
                }
            }
        }
        assert!(b.norm() > 0.5);
    }

    #[test]
    fn killing_form_matches_trace_formulas() {
        // sl(2): B(X, Y) = 4 tr(XY), so B(diag(1,-1), diag(1,-1)) = 8.
        let model = GroupModel::special_linear(2).unwrap();
        let h = AlgebraElement::new(
            model,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            &tols(),
        )
        .unwrap();
        let b = killing_form(&h, &h).unwrap();
        assert!((b - 8.0).abs() < 1e-9);

        // so(p,p) inside gl(2p): B(X, Y) = (2p - 2) tr(XY). Checked via the
        // ad-trace definition against the trace formula for random pairs.
        for p in 2..=3 {
            let model = GroupModel::split_orthogonal(p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..5 {
                let x = random_algebra(&model, 1.0, &mut rng);
                let y = random_algebra(&model, 1.0, &mut rng);
                let b = killing_form(&x, &y).unwrap();
                let t = (&x.mat * &y.mat).trace();
                assert!(
                    (b - (2.0 * p as f64 - 2.0) * t).abs() < 1e-8,
                    "p={p}: ad-trace {b} vs scaled trace {t}"
                );
            }
        }
    }

    #[test]
    fn killing_zero_argument() {
        let model = GroupModel::special_linear(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_algebra(&model, 1.0, &mut rng);
        let z = AlgebraElement::zero(model);
        assert_eq!(killing_form(&z, &y).unwrap(), 0.0);
    }

    #[test]
    fn cartan_involution_eigenspaces() {
        let model = GroupModel::special_linear(3).unwrap();
        let anti = AlgebraElement::new(
            model,
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 2.0, 0.0, -2.0, 0.0]),
            &tols(),
        )
        .unwrap();
        assert!(linalg::fro_dist(&cartan_involution(&anti).mat, &anti.mat) < 1e-15);
        let sym = AlgebraElement::new(
            model,
            DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, -1.0, 0.0, 0.0, 0.0, 0.0]),
            &tols(),
        )
        .unwrap();
        assert!(linalg::fro_dist(&cartan_involution(&sym).mat, &(-&sym.mat)) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_algebra(&model, 1.3, &mut rng);
        let twice = cartan_involution(&cartan_involution(&x));
        assert!(linalg::fro_dist(&twice.mat, &x.mat) < 1e-15);
    }

    #[test]
    fn b_theta_positive_definite_on_basis() {
        for model in [
            GroupModel::special_linear(3).unwrap(),
            GroupModel::split_orthogonal(2).unwrap(),
        ] {
            let (_, mats) = algebra_orthonormal_basis(&model);
            for m in &mats {
                let x = AlgebraElement::unchecked(model, m.clone());
                assert!(b_theta(&x, &x).unwrap() > 1e-6);
            }
            let z = AlgebraElement::zero(model);
            let y = AlgebraElement::unchecked(model, mats[0].clone());
            assert_eq!(b_theta(&z, &y).unwrap(), 0.0);
        }
    }

    #[test]
    fn group_membership_examples() {
        let model = GroupModel::special_linear(3).unwrap();
        let id = model.identity_matrix();
        assert!(is_group_member(&id, &model, 1e-7).unwrap());
        let mut bad = id.clone();
        bad[(0, 0)] = 2.0;
        assert!(!is_group_member(&bad, &model, 1e-7).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [
            GroupModel::special_linear(3).unwrap(),
            GroupModel::split_orthogonal(2).unwrap(),
        ] {
            for _ in 0..10 {
                let x = random_algebra(&model, 2.0, &mut rng);
                let g = group_exp(&x);
                assert!(is_group_member(&g.mat, &model, 1e-7).unwrap());
            }
        }
    }

    #[test]
    fn so_identity_component_rejects_other_sheets() {
        let model = GroupModel::split_orthogonal(2).unwrap();
        // diag(-1, 1, 1, -1) preserves J and has det 1 but flips both block
        // determinants' signs pattern into the non-identity component pair.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0, -1.0]));
        let j = model.j_form().unwrap();
        assert!(linalg::fro_dist(&(m.transpose() * &j * &m), &j) < 1e-14);
        assert!((m.determinant() - 1.0).abs() < 1e-14);
        assert!(!is_group_member(&m, &model, 1e-7).unwrap());
    }

    #[test]
    fn exp_log_round_trip_and_nilpotent_series() {
        let model = GroupModel::special_linear(3).unwrap();
        let zero = AlgebraElement::zero(model);
        let e = group_exp(&zero);
        assert!(linalg::fro_dist(&e.mat, &model.identity_matrix()) < 1e-15);
        let back = group_log(&GroupElement::identity(model), &tols()).unwrap();
        assert!(back.norm() < 1e-15);

        // Nilpotent with X^2 != 0, X^3 = 0: exp must equal I + X + X^2/2.
        let mut x = DMatrix::zeros(3, 3);
        x[(0, 1)] = 2.0;
        x[(1, 2)] = -1.5;
        let xe = AlgebraElement::new(model, x.clone(), &tols()).unwrap();
        let expect = DMatrix::identity(3, 3) + &x + (&x * &x) * 0.5;
        assert_eq!(group_exp(&xe).mat, expect);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = random_algebra(&model, 1.0, &mut rng);
            let g = group_exp(&x);
            let back = group_log(&g, &tols()).unwrap();
            assert!(linalg::fro_dist(&back.mat, &x.mat) < 1e-10);
        }
    }

    #[test]
    fn jacobi_identity_and_killing_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for model in [
            GroupModel::special_linear(3).unwrap(),
            GroupModel::split_orthogonal(2).unwrap(),
        ] {
            for _ in 0..10 {
                let x = random_algebra(&model, 1.0, &mut rng);
                let y = random_algebra(&model, 1.0, &mut rng);
                let z = random_algebra(&model, 1.0, &mut rng);
                let j1 = bracket(&x, &bracket(&y, &z).unwrap()).unwrap();
                let j2 = bracket(&y, &bracket(&z, &x).unwrap()).unwrap();
                let j3 = bracket(&z, &bracket(&x, &y).unwrap()).unwrap();
                let total = j1.add(&j2).unwrap().add(&j3).unwrap();
                assert!(total.norm() < 1e-9);

                let lhs = killing_form(&bracket(&z, &x).unwrap(), &y).unwrap();
                let rhs = killing_form(&x, &bracket(&z, &y).unwrap()).unwrap();
                assert!((lhs + rhs).abs() < 1e-7);

                let t1 = cartan_involution(&bracket(&x, &y).unwrap());
                let t2 = bracket(&cartan_involution(&x), &cartan_involution(&y)).unwrap();
                assert!(linalg::fro_dist(&t1.mat, &t2.mat) < 1e-12);
            }
        }
    }

    #[test]
    fn ad_exp_compatibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for model in [
            GroupModel::special_linear(3).unwrap(),
            GroupModel::split_orthogonal(2).unwrap(),
        ] {
            for _ in 0..5 {
                let x = random_algebra(&model, 0.8, &mut rng);
                let g = random_group(&model, 1.0, &mut rng);
                let lhs = g.conjugate(&group_exp(&x)).unwrap();
                let rhs = group_exp(&g.ad_action(&x).unwrap());
                assert!(linalg::fro_dist(&lhs.mat, &rhs.mat) < 1e-9);
            }
        }
    }

    #[test]
    fn model_serde_round_trip() {
        let m = GroupModel::split_orthogonal(2).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"family":"sopp","p":2}"#);
        let back: GroupModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let sl: GroupModel = serde_json::from_str(r#"{"family":"sl","n":4}"#).unwrap();
        assert_eq!(sl, GroupModel::special_linear(4).unwrap());
        assert!(serde_json::from_str::<GroupModel>(r#"{"family":"sl","n":1}"#).is_err());
    }
}
