//! Dense linear-algebra helpers on top of nalgebra: eigenvectors of complex
//! matrices, generalized eigenpairs of regular pencils, numerical rank.

use nalgebra::{linalg::Schur, DMatrix, DVector};

use crate::C64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LinalgError {
    #[error("Schur decomposition did not converge for a {0}x{0} matrix")]
    NoConvergence(usize),
    #[error("pencil (A, E) is singular at every probe shift")]
    SingularPencil,
}

/// Eigen decomposition of a general complex square matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    /// Unit 2-norm eigenvectors stored column-wise, in the order of `values`.
    pub vectors: DMatrix<C64>,
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Eigenvalues and right eigenvectors through the complex Schur form
/// `M = Q T Q^H`, followed by back-substitution on the triangular factor.
pub fn eig(m: &DMatrix<C64>) -> Result<Eigen, LinalgError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eig needs a square matrix");
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
        });
    }
    // Repeated zero eigenvalues can stall deflation at machine precision.
    let schur = [f64::EPSILON, 1e-14, 1e-13, 1e-12]
        .iter()
        .find_map(|&tol| Schur::try_new(m.clone(), tol, 2000 * n.max(10)))
        .ok_or(LinalgError::NoConvergence(n))?;
    let (q, t) = schur.unpack();

    let tnorm = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut vectors = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        let mut y = DVector::<C64>::zeros(n);
        y[i] = C64::new(1.0, 0.0);
        for j in (0..i).rev() {
            let mut s = C64::new(0.0, 0.0);
            for l in (j + 1)..=i {
                s += t[(j, l)] * y[l];
            }
            let mut d = t[(j, j)] - t[(i, i)];
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            y[j] = -s / d;
        }
        let x = &q * y;
        let nrm = x.norm();
        vectors.set_column(i, &(x / C64::new(nrm, 0.0)));
    }
    Ok(Eigen { values, vectors })
}

/// Finite generalized eigenpairs `A x = s E x` of a regular pencil.
///
/// A well conditioned `E` is inverted directly. Otherwise, or if that
/// eigenproblem does not converge, the shift-and-invert form
/// `(A - σE)^{-1} E` is used and eigenvalues at infinity are dropped.
pub fn generalized_eig(a: &DMatrix<C64>, e: &DMatrix<C64>) -> Result<Eigen, LinalgError> {
    let n = a.nrows();
    let sv = e.clone().singular_values();
    let cond_ok = n == 0 || (sv[0] > 0.0 && sv[n - 1] / sv[0] > 1e-8);
    if cond_ok {
        if let Some(m) = e.clone().lu().solve(a) {
            if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                if let Ok(r) = eig(&m) {
                    return Ok(r);
                }
            }
        }
    }

    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max)
        / e.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let probes = [
        C64::new(0.311_526, 0.579_184),
        C64::new(-0.703_619, 1.427_371),
        C64::new(1.739_022, -0.274_913),
    ];
    let mut failure = LinalgError::SingularPencil;
    for probe in probes {
        let sigma = probe * scale.max(1.0);
        let shifted = a - e * sigma;
        let Some(m) = shifted.lu().solve(e) else { continue };
        if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            continue;
        }
        let inv = match eig(&m) {
            Ok(inv) => inv,
            Err(e) => {
                failure = e;
                continue;
            }
        };
        let mnorm = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut values = Vec::new();
        let mut cols = Vec::new();
        for (i, nu) in inv.values.iter().enumerate() {
            if nu.norm() <= 1e-12 * mnorm {
                continue;
            }
            values.push(sigma + C64::new(1.0, 0.0) / nu);
            cols.push(inv.vectors.column(i).into_owned());
        }
        let vectors = if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        return Ok(Eigen { values, vectors });
    }
    Err(failure)
}

/// Number of singular values with `σ_i / σ_1 > rel_tol`. Zero for an all-zero
/// spectrum.
pub fn numerical_rank(singular_values: &[f64], rel_tol: f64) -> usize {
    match singular_values.first() {
        Some(&s1) if s1 > 0.0 => singular_values.iter().filter(|&&s| s / s1 > rel_tol).count(),
        _ => 0,
    }
}

/// Real orthonormal basis (`n x k`) for the dominant `k`-dimensional real
/// subspace of the column space of `z`, taken from `[Re z, Im z]`.
pub fn dominant_real_basis(z: &DMatrix<C64>, k: usize) -> DMatrix<f64> {
    let (n, c) = z.shape();
    let mut stacked = DMatrix::<f64>::zeros(n, 2 * c);
    for j in 0..c {
        for i in 0..n {
            stacked[(i, j)] = z[(i, j)].re;
            stacked[(i, c + j)] = z[(i, j)].im;
        }
    }
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("requested U");
    u.columns(0, k).into_owned()
}

pub fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
