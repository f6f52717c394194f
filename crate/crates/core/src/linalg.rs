//! Small dense helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

use crate::scalar::Real;

/// Diagonal similarity `S⁻¹ A S` equalizing row and column norms.
///
/// Scale factors are powers of two so the transform is exact. Returns the
/// diagonal of `S` together with the balanced matrix.
pub fn balance<T: Real>(a: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let n = a.nrows();
    let mut b = a.clone();
    let mut scale = DVector::from_element(n, T::one());
    let two = T::lit(2.0);
    let radix2 = T::lit(4.0);
    for _ in 0..64 {
        let mut converged = true;
        for k in 0..n {
            let mut c = T::zero();
            let mut r = T::zero();
            for i in 0..n {
                if i != k {
                    c += b[(i, k)].abs();
                    r += b[(k, i)].abs();
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let g = r / two;
            let mut cc = c;
            while cc < g {
                f *= two;
                cc *= radix2;
            }
            let g = r * two;
            while cc > g {
                f /= two;
                cc /= radix2;
            }
            if (cc + r) / f < T::lit(0.95) * s {
                converged = false;
                scale[k] *= f;
                for i in 0..n {
                    b[(i, k)] *= f;
                    b[(k, i)] /= f;
                }
            }
        }
        if converged {
            break;
        }
    }
    (scale, b)
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Vec<Complex<T>> {
    let (_, balanced) = balance(a);
    balanced.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa<T: Real>(a: &DMatrix<T>) -> T {
    eigenvalues(a)
        .into_iter()
        .map(|z| z.re)
        .fold(T::lit(f64::NEG_INFINITY), |acc, x| acc.max(x))
}

pub fn frobenius<T: Real>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn symmetrize<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * T::lit(0.5)
}

/// Square-root factor `L` with `L Lᵀ = A` for a symmetric positive
/// semidefinite matrix; negative round-off eigenvalues are clamped to zero.
pub fn psd_factor<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    let sym = symmetrize(a);
    let eig = sym.symmetric_eigen();
    let mut l = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(T::zero()).sqrt();
        for i in 0..l.nrows() {
            l[(i, j)] *= s;
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balancing_is_a_similarity() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -4.0e10, -2.0, 1.0e3, 0.0, 5.0e-4, -1.0]);
        let (s, b) = balance(&a);
        for i in 0..3 {
            for j in 0..3 {
                let expected = a[(i, j)] * s[j] / s[i];
                assert_eq!(b[(i, j)], expected);
            }
        }
        let ea = eigenvalues(&a);
        assert_eq!(ea.len(), 3);
    }

    #[test]
    fn psd_factor_reconstructs() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let l = psd_factor(&a);
        let r = &l * l.transpose();
        assert!((r - a).abs().max() < 1e-12);
    }

    #[test]
    fn abscissa_of_damped_oscillator() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.2]);
        assert!((spectral_abscissa(&a) + 0.1_f64).abs() < 1e-12);
    }
}
