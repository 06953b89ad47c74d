//! Small dense symmetric eigenproblems.
//!
//! Everything here is desk scale (k <= 32). The standard problem is solved by
//! cyclic Jacobi rotations; the generalized problem `M v = lambda P v` with `P`
//! symmetric positive definite is reduced to standard form by the Cholesky
//! congruence `L^-1 M L^-T`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest matrix accepted by [`small_symmetric_eig`].
pub const MAX_DIM: usize = 32;

const SYMMETRY_TOL: f64 = 1e-10;
const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let k = m.nrows();
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Checks squareness and symmetry to `tol * max(1, max|m_ij|)`.
pub fn check_symmetric(m: &DMatrix<f64>, tol: f64, what: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim(
            what,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let scale = m.amax().max(1.0);
    let k = m.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return Err(Error::config(format!(
                    "{what} is not symmetric: entry ({i},{j}) = {} but ({j},{i}) = {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a small symmetric matrix, ascending.
///
/// Cyclic Jacobi sweeps run until the off-diagonal Frobenius norm is at most
/// `1e-13 * ||M||_F`.
pub fn small_symmetric_eig(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m, SYMMETRY_TOL, "matrix")?;
    let k = m.nrows();
    if k > MAX_DIM {
        return Err(Error::config(format!(
            "matrix dimension {k} exceeds the supported maximum {MAX_DIM}"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("matrix has non-finite entries"));
    }

    // work on the exactly symmetrized copy
    let mut a = (m + m.transpose()) * 0.5;
    let threshold = OFF_DIAGONAL_TOL * frobenius(&a);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                // theta.signum() is 1.0 for +0.0, which is the convention we want
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for r in 0..k {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..k {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..k).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    Ok(eig)
}

/// Largest-magnitude eigenvalue of a symmetric matrix (its induced 2-norm).
pub fn symmetric_norm(m: &DMatrix<f64>) -> Result<f64> {
    let eig = small_symmetric_eig(m)?;
    Ok(eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(p: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    check_symmetric(p, 1e-12, what)?;
    let chol = nalgebra::Cholesky::new(p.clone())
        .ok_or_else(|| Error::config(format!("{what} is not positive definite")))?;
    Ok(chol.l())
}

/// Eigenvalues (ascending) of the symmetric-definite pencil `(m, p)`.
pub fn generalized_symmetric_eig(m: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.shape() != p.shape() {
        return Err(Error::dim(
            "generalized eigenproblem",
            format!("{}x{}", p.nrows(), p.ncols()),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    check_symmetric(m, SYMMETRY_TOL, "pencil matrix")?;
    let l = cholesky_lower(p, "P")?;
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::config("Cholesky factor of P is singular"))?;
    let reduced = &l_inv * m * l_inv.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    small_symmetric_eig(&reduced)
}
