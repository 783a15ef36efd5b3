//! Dense linear-algebra helpers shared by every module: Frobenius geometry,
//! principal matrix logarithm, numerical null spaces and span arithmetic.
//!
//! Everything works on `nalgebra::DMatrix<f64>` at desk scale (ambient
//! dimension at most 8, adjoint dimension at most 35), so plain dense
//! factorizations are used throughout.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

/// Singular values below this are treated as zero in rank decisions.
pub const RANK_CUTOFF: f64 = 1e-8;

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn fro_dist(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    frobenius(&(a - b))
}

/// Column-major flattening of a matrix into a vector.
pub fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("matrix is singular, cannot invert".into()))
}

/// Principal square root via the Denman-Beavers iteration.
///
/// Requires the spectrum to avoid the closed negative real axis; callers
/// guarantee this by scaling toward the identity first.
fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..60 {
        let y_inv = inverse(&y)?;
        let z_inv = inverse(&z)?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let delta = fro_dist(&y_next, &y);
        y = y_next;
        z = z_next;
        if delta < 1e-15 * (1.0 + frobenius(&y)) {
            break;
        }
    }
    Ok(y)
}

/// Principal logarithm by inverse scaling and squaring: repeated square
/// roots until the argument is close to the identity, then the Mercator
/// series.
///
/// Errors when an eigenvalue lies on the closed negative real axis (the
/// principal branch is undefined there).
pub fn principal_log(a: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "principal_log needs a square matrix");
    for ev in a.complex_eigenvalues().iter() {
        if ev.re <= 0.0 && ev.im.abs() < 1e-12 * (1.0 + ev.re.abs()) {
            return Err(Error::LogBranch);
        }
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut b = a.clone();
    let mut k = 0u32;
    while fro_dist(&b, &id) > 0.01 {
        if k > 60 {
            return Err(Error::Numerical("matrix log did not contract".into()));
        }
        b = sqrtm(&b)?;
        k += 1;
    }
    // log(I + X) with ||X|| <= 0.01: a short Mercator tail reaches 1e-16.
    let x = &b - &id;
    let mut term = x.clone();
    let mut acc = x.clone();
    for j in 2..=9 {
        term *= &x;
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        acc += &term * (sign / j as f64);
    }
    Ok(acc * 2f64.powi(k as i32))
}

/// Logarithm of a symmetric positive definite matrix via its eigensystem.
pub fn spd_log(a: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    let se = a.clone().symmetric_eigen();
    if se.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Numerical(
            "matrix is not positive definite, cannot take spd log".into(),
        ));
    }
    let logs = DMatrix::from_diagonal(&se.eigenvalues.map(|l| l.ln()));
    Ok(&se.eigenvectors * logs * se.eigenvectors.transpose())
}

/// Orthonormal basis of the null space of `m`, with singular values below
/// `cutoff` treated as zero. Returns the basis as columns.
pub fn nullspace(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let ncols = m.ncols();
    if m.nrows() == 0 || ncols == 0 {
        return DMatrix::identity(ncols, ncols);
    }
    // Pad with zero rows: the thin SVD of a wide matrix does not expose the
    // trailing right-singular vectors we need.
    let m = if m.nrows() < ncols {
        let mut padded = DMatrix::zeros(ncols, ncols);
        padded.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let dim = ncols - rank;
    let mut out = DMatrix::zeros(ncols, dim);
    for (j, i) in (rank..ncols).enumerate() {
        out.set_column(j, &vt.row(i).transpose());
    }
    out
}

/// Orthonormal basis for the span of the given columns (rank-revealing).
pub fn column_span(cols: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    if cols.ncols() == 0 {
        return DMatrix::zeros(cols.nrows(), 0);
    }
    let svd = cols.clone().svd(true, false);
    let u = svd.u.expect("svd requested u");
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let mut out = DMatrix::zeros(cols.nrows(), rank);
    for j in 0..rank {
        out.set_column(j, &u.column(j));
    }
    out
}

/// Residual of `v` against the span of the orthonormal columns `q`,
/// relative to `||v||`. Zero means `v` lies in the span.
pub fn span_residual(q: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    let proj = q * (q.transpose() * v);
    (v - proj).norm() / nv
}

/// Least-squares coordinates of `rhs` in the columns of `basis`, together
/// with the relative residual of the reconstruction.
pub fn coords_in_basis(basis: &DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, f64) {
    if basis.ncols() == 0 {
        let nr = rhs.norm();
        return (DVector::zeros(0), if nr == 0.0 { 0.0 } else { 1.0 });
    }
    let svd = basis.clone().svd(true, true);
    let coords = svd
        .solve(rhs, RANK_CUTOFF)
        .expect("svd solve cannot fail with both factors");
    let residual = (basis * &coords - rhs).norm() / (1.0 + rhs.norm());
    (coords, residual)
}

/// Spectral radius via renormalized repeated squaring. Stable on
/// defective spectra, where direct eigenvalue moduli carry errors of
/// order machine-epsilon to the inverse Jordan-block size.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let norm = frobenius(a);
    if norm == 0.0 {
        return 0.0;
    }
    // Recurrence for the implicit log-norm: l_{k+1} = 2 l_k + ln||B_k^2||,
    // with B renormalized to unit norm at every step. After k squarings
    // l_k / 2^k converges to log rho; polynomial (Jordan) growth shrinks
    // like k / 2^k.
    let squarings = 40;
    let mut b = a / norm;
    let mut log_norm = norm.ln();
    for _ in 0..squarings {
        let sq = &b * &b;
        let sq_norm = frobenius(&sq);
        if sq_norm == 0.0 {
            return 0.0;
        }
        log_norm = 2.0 * log_norm + sq_norm.ln();
        b = sq / sq_norm;
    }
    (log_norm / 2f64.powi(squarings)).exp()
}

/// The antidiagonal involution of size `n` (ones on the antidiagonal).
pub fn antidiagonal(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i + j + 1 == n { 1.0 } else { 0.0 })
}

/// Orthogonal change of basis taking the antidiagonal form of size `2p`
/// to `diag(I_p, -I_p)`: columns are the hyperbolic pairs
/// `(e_i + e_{2p+1-i})/sqrt(2)` followed by `(e_i - e_{2p+1-i})/sqrt(2)`.
pub fn hyperbolic_change_of_basis(p: usize) -> DMatrix<f64> {
    let n = 2 * p;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut q = DMatrix::zeros(n, n);
    for i in 0..p {
        let bar = n - 1 - i;
        q[(i, i)] = s;
        q[(bar, i)] = s;
        q[(i, p + i)] = s;
        q[(bar, p + i)] = -s;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_inverts_exp() {
        let x = DMatrix::from_row_slice(3, 3, &[0.1, 0.3, -0.2, 0.0, -0.1, 0.4, 0.2, 0.1, 0.0]);
        let g = x.clone().exp();
        let back = principal_log(&g).unwrap();
        assert!(fro_dist(&back, &x) < 1e-12);
    }

    #[test]
    fn log_rejects_negative_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(principal_log(&m), Err(Error::LogBranch)));
    }

    #[test]
    fn nullspace_dimension() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let ns = nullspace(&m, RANK_CUTOFF);
        assert_eq!(ns.ncols(), 2);
        assert!((m * &ns).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn hyperbolic_basis_diagonalizes_j() {
        for p in 2..=3 {
            let j = antidiagonal(2 * p);
            let q = hyperbolic_change_of_basis(p);
            let d = q.transpose() * &j * &q;
            for i in 0..2 * p {
                for k in 0..2 * p {
                    let want = if i != k {
                        0.0
                    } else if i < p {
                        1.0
                    } else {
                        -1.0
                    };
                    assert!((d[(i, k)] - want).abs() < 1e-12);
                }
            }
        }
    }
}
