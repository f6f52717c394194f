//! Continuous Lyapunov equation `A C + C Aᵀ + Q = 0` for symmetric `Q`.
//!
//! Solved directly on the vectorized upper-triangular unknowns after an
//! exact power-of-two balancing of `A`, followed by iterative refinement.

use nalgebra::{DMatrix, DVector};

use super::SteadyError;
use crate::linalg;
use crate::scalar::Real;

const MAX_REFINEMENTS: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSolution<T: Real> {
    /// Symmetric solution `C`.
    pub covariance: DMatrix<T>,
    /// `‖A C + C Aᵀ + Q‖_F / max(‖Q‖_F, ε)`.
    pub residual: T,
}

#[inline]
fn tri_index(n: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    r * n - r * (r + 1) / 2 + c
}

/// Relative residual of a candidate solution.
pub fn lyapunov_residual<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>, c: &DMatrix<T>) -> T {
    let r = a * c + c * a.transpose() + q;
    linalg::frobenius(&r) / linalg::frobenius(q).max(T::tiny())
}

/// Solves `A C + C Aᵀ + Q = 0`. `A` must be Hurwitz.
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<LyapunovSolution<T>, SteadyError> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(SteadyError::DimensionMismatch);
    }
    let abscissa = linalg::spectral_abscissa(a);
    if !(abscissa < T::zero()) {
        return Err(SteadyError::NotHurwitz { abscissa: abscissa.as_f64() });
    }
    if q.iter().all(|&x| x == T::zero()) {
        return Ok(LyapunovSolution { covariance: DMatrix::zeros(n, n), residual: T::zero() });
    }
    let q = linalg::symmetrize(q);

    let (s, ab) = linalg::balance(a);
    let qb = DMatrix::from_fn(n, n, |i, j| q[(i, j)] / (s[i] * s[j]));

    let m = n * (n + 1) / 2;
    let mut system = DMatrix::zeros(m, m);
    for i in 0..n {
        for j in i..n {
            let row = tri_index(n, i, j);
            for k in 0..n {
                system[(row, tri_index(n, k, j))] += ab[(i, k)];
                system[(row, tri_index(n, i, k))] += ab[(j, k)];
            }
        }
    }
    let lu = system.lu();

    let unpack = |x: &DVector<T>| DMatrix::from_fn(n, n, |i, j| x[tri_index(n, i, j)]);
    let pack_neg = |r: &DMatrix<T>| {
        let mut v = DVector::zeros(m);
        for i in 0..n {
            for j in i..n {
                v[tri_index(n, i, j)] = -r[(i, j)];
            }
        }
        v
    };

    let mut cb = DMatrix::zeros(n, n);
    let mut rhs = pack_neg(&qb);
    let unscale = |cb: &DMatrix<T>| DMatrix::from_fn(n, n, |i, j| cb[(i, j)] * s[i] * s[j]);
    let tol = T::lit(T::LYAPUNOV_TOLERANCE);
    let mut best: Option<(DMatrix<T>, T)> = None;
    for _ in 0..=MAX_REFINEMENTS {
        let delta = lu.solve(&rhs).ok_or(SteadyError::IllConditioned { residual: f64::INFINITY })?;
        cb += unpack(&delta);
        cb = linalg::symmetrize(&cb);
        let c = unscale(&cb);
        let residual = lyapunov_residual(a, &q, &c);
        let improved = best.as_ref().is_none_or(|(_, r)| residual < *r);
        if improved {
            best = Some((c, residual));
        }
        if residual <= tol * T::lit(0.01) || !improved {
            break;
        }
        let rb = &ab * &cb + &cb * ab.transpose() + &qb;
        rhs = pack_neg(&rb);
    }
    let (covariance, residual) = best.expect("at least one solve");
    if !(residual <= tol) {
        return Err(SteadyError::IllConditioned { residual: residual.as_f64() });
    }
    Ok(LyapunovSolution { covariance, residual })
}
