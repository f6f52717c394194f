//! Normal modes from the eigendecomposition of the drift matrix.

use nalgebra::{Complex, DMatrix, DVector};

use crate::linalg;
use crate::model::{pos, vel, StateMatrices, SystemModel};
use crate::scalar::Real;

/// Relative agreement of bare frequencies for a pair to report a splitting.
pub const SPLITTING_DEGENERACY: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalMode<T: Real> {
    pub eigenvalue: Complex<T>,
    /// |Im λ|, rad/s.
    pub frequency: T,
    /// −2 Re λ, 1/s (full width at half maximum of the power spectrum, angular).
    pub linewidth: T,
    pub eigenvector: DVector<Complex<T>>,
    /// Energy-weighted share of each oscillator in this mode; sums to one.
    pub participation: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSplitting<T> {
    /// Oscillator indices.
    pub pair: (usize, usize),
    /// Mode indices into [`NormalModes::modes`].
    pub modes: (usize, usize),
    /// Angular frequency difference, rad/s.
    pub splitting: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalModes<T: Real> {
    /// One entry per conjugate pair (and per real eigenvalue), sorted by frequency.
    pub modes: Vec<NormalMode<T>>,
    pub splittings: Vec<ModeSplitting<T>>,
    /// True when some repeated eigenvalue lacks a full set of eigenvectors.
    pub defective: bool,
}

impl<T: Real> NormalModes<T> {
    pub fn splitting_for(&self, a: usize, b: usize) -> Option<&ModeSplitting<T>> {
        self.splittings
            .iter()
            .find(|s| (s.pair.0 == a && s.pair.1 == b) || (s.pair.0 == b && s.pair.1 == a))
    }
}

/// Right null-space basis of `b` of dimension `k` (the `k` smallest singular
/// directions) and the number of singular values below `tol`.
fn near_null_space<T: Real>(b: &DMatrix<Complex<T>>, k: usize, tol: T) -> (Vec<DVector<Complex<T>>>, usize) {
    let svd = b.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).expect("finite singular values"));
    let small = order.iter().filter(|&&i| svd.singular_values[i] <= tol).count();
    let vecs = order
        .iter()
        .take(k)
        .map(|&i| DVector::from_iterator(v_t.ncols(), v_t.row(i).iter().map(|z| z.conj())))
        .collect();
    (vecs, small)
}

/// Eigendecomposition of the drift matrix, reported per physical mode.
pub fn normal_modes<T: Real>(model: &SystemModel<T>, matrices: &StateMatrices<T>) -> NormalModes<T> {
    let n = matrices.dim();
    let (scale, balanced) = linalg::balance(&matrices.drift);
    let mut eigs: Vec<Complex<T>> = balanced.complex_eigenvalues().iter().copied().collect();
    let magnitude = eigs.iter().map(|z| z.norm_sqr().sqrt()).fold(T::zero(), |a, b| a.max(b)).max(T::tiny());
    let cluster_tol = T::epsilon().sqrt() * T::lit(10.0) * magnitude;
    eigs.sort_by(|a, b| {
        (a.im, a.re).partial_cmp(&(b.im, b.re)).expect("finite eigenvalues")
    });

    // Group numerically repeated eigenvalues.
    let mut clusters: Vec<Vec<Complex<T>>> = Vec::new();
    for z in eigs {
        match clusters.iter_mut().find(|c| (c[0] - z).norm_sqr().sqrt() <= cluster_tol) {
            Some(c) => c.push(z),
            None => clusters.push(vec![z]),
        }
    }

    let complex_balanced = balanced.map(|x| Complex::new(x, T::zero()));
    let mut defective = false;
    let mut modes = Vec::new();
    for cluster in clusters {
        let k = cluster.len();
        let mean = cluster.iter().fold(Complex::new(T::zero(), T::zero()), |a, &b| a + b)
            / Complex::new(T::count(k), T::zero());
        if mean.im < -cluster_tol {
            continue; // conjugate partner reported instead
        }
        let shifted = &complex_balanced - DMatrix::<Complex<T>>::identity(n, n) * mean;
        let (vectors, small) = near_null_space(&shifted, k, cluster_tol);
        if small < k {
            defective = true;
        }
        let is_real = mean.im.abs() <= cluster_tol;
        for (z, v) in cluster.into_iter().zip(vectors) {
            let z = if is_real { Complex::new(z.re, T::zero()) } else { z };
            let mut x = DVector::from_fn(n, |i, _| v[i] * Complex::new(scale[i], T::zero()));
            let norm = x.iter().fold(T::zero(), |a, c| a + c.norm_sqr()).sqrt();
            if norm > T::zero() {
                x /= Complex::new(norm, T::zero());
            }
            let weights: Vec<T> = model
                .oscillators
                .iter()
                .enumerate()
                .map(|(i, o)| x[pos(i)].norm_sqr() * o.omega * o.omega + x[vel(i)].norm_sqr())
                .collect();
            let total = weights.iter().fold(T::zero(), |a, &b| a + b).max(T::tiny());
            modes.push(NormalMode {
                eigenvalue: z,
                frequency: z.im.abs(),
                linewidth: -T::lit(2.0) * z.re,
                eigenvector: x,
                participation: weights.into_iter().map(|w| w / total).collect(),
            });
        }
    }
    modes.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).expect("finite frequencies"));

    let mut splittings = Vec::new();
    let oscs = &model.oscillators;
    for a in 0..oscs.len() {
        for b in a + 1..oscs.len() {
            let mean = (oscs[a].omega * oscs[b].omega).sqrt();
            if (oscs[a].omega - oscs[b].omega).abs() / mean > T::lit(SPLITTING_DEGENERACY) || modes.len() < 2 {
                continue;
            }
            let mut ranked: Vec<usize> = (0..modes.len()).collect();
            let share = |m: usize| modes[m].participation[a] + modes[m].participation[b];
            ranked.sort_by(|&x, &y| share(y).partial_cmp(&share(x)).expect("finite participation"));
            let (m0, m1) = if modes[ranked[0]].frequency <= modes[ranked[1]].frequency {
                (ranked[0], ranked[1])
            } else {
                (ranked[1], ranked[0])
            };
            splittings.push(ModeSplitting {
                pair: (a, b),
                modes: (m0, m1),
                splitting: modes[m1].frequency - modes[m0].frequency,
            });
        }
    }
    NormalModes { modes, splittings, defective }
}
