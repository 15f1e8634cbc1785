//! Spectral and Frobenius norms of symmetric matrices.
//!
//! [`spectral_norm`] runs Lanczos with full reorthogonalization from a seeded
//! start vector and returns max |λᵢ| of the tridiagonal projection, tracking
//! both ends of the spectrum so indefinite matrices are handled. Convergence
//! is judged by the Ritz residual ‖Kv − θv‖ = β_k |s_k|, where s_k is the last
//! component of the Ritz vector in the Krylov basis.
//!
//! [`dense_eig_oracle`] is an independent cyclic Jacobi solver for small
//! matrices, used to check the iterative path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{axpy, dot, norm2, Matrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_START_SEED: u64 = 0x5EED_1A2C_205E_ED00;
/// Largest matrix accepted by the dense Jacobi oracle.
pub const ORACLE_MAX_N: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub spectral_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Relative tolerance on the Ritz residual.
    pub tolerance: f64,
    /// Iteration cap; `None` means 10·n. The Krylov dimension never exceeds n.
    pub max_iterations: Option<usize>,
    /// Seed of the pseudo-random start vector.
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
            seed: DEFAULT_START_SEED,
        }
    }
}

impl SpectralOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// ∥K∥ for symmetric K with the default start vector.
pub fn spectral_norm(k: &Matrix, tolerance: f64, max_iterations: usize) -> Result<SpectralResult> {
    spectral_norm_with(
        k,
        &SpectralOptions {
            tolerance,
            max_iterations: Some(max_iterations),
            seed: DEFAULT_START_SEED,
        },
    )
}

pub fn spectral_norm_with(k: &Matrix, opts: &SpectralOptions) -> Result<SpectralResult> {
    if !k.is_square() || k.rows() == 0 {
        return Err(invalid("spectral norm needs a non-empty square matrix"));
    }
    if !(opts.tolerance > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if k.as_slice().iter().any(|v| v.is_nan()) {
        return Err(invalid("matrix contains NaN"));
    }
    if !k.all_finite() {
        return Err(invalid("matrix contains infinite entries"));
    }
    let n = k.rows();
    let max_iterations = opts.max_iterations.unwrap_or(10 * n);
    if max_iterations == 0 {
        return Err(invalid("max iterations must be positive"));
    }
    if n == 1 {
        return Ok(SpectralResult {
            spectral_norm: k.get(0, 0).abs(),
            iterations: 1,
            converged: true,
            residual: 0.0,
        });
    }
    let scale = frobenius_norm(k);
    if scale == 0.0 {
        return Ok(SpectralResult {
            spectral_norm: 0.0,
            iterations: 0,
            converged: true,
            residual: 0.0,
        });
    }
    let breakdown = 64.0 * f64::EPSILON * scale;
    let cap = max_iterations.min(n);

    let mut q = start_vector(n, opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cap);
    let mut alphas: Vec<f64> = Vec::with_capacity(cap);
    let mut betas: Vec<f64> = Vec::with_capacity(cap);

    loop {
        let mut w = k.matvec(&q);
        let alpha = dot(&q, &w);
        axpy(-alpha, &q, &mut w);
        if let (Some(prev), Some(&beta_prev)) = (basis.last(), betas.last()) {
            axpy(-beta_prev, prev, &mut w);
        }
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for v in basis.iter().chain(std::iter::once(&q)) {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let beta = norm2(&w);
        alphas.push(alpha);
        let dim = alphas.len();
        let exhausted = beta <= breakdown;

        if exhausted || dim == cap || should_check(dim) {
            let (ritz, last) = tridiagonal_eigen(&alphas, &betas)?;
            let (idx, theta) = ritz
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            let residual = beta * last[idx].abs();
            let converged = residual <= opts.tolerance * theta;
            if converged || exhausted || dim == cap {
                return Ok(SpectralResult {
                    spectral_norm: theta,
                    iterations: dim,
                    converged,
                    residual,
                });
            }
        }

        betas.push(beta);
        w.iter_mut().for_each(|v| *v /= beta);
        basis.push(std::mem::replace(&mut q, w));
    }
}

fn should_check(dim: usize) -> bool {
    dim <= 32 || dim.is_multiple_of(4)
}

fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = norm2(&v);
        if r > 0.0 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (length `diag.len() - 1`), together with the last
/// component of each normalized eigenvector. Implicit QL with Wilkinson
/// shifts, accumulating only the last row of the eigenvector matrix.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if off.len() + 1 != n {
        return Err(invalid("tridiagonal off-diagonal must have length n-1"));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0; n];
    z[n - 1] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(crate::Error::SolverFailure {
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}

/// √(Σ K²ᵢⱼ) with Neumaier-compensated summation; rescaled when the entries
/// are large or small enough for squares to leave the normal range.
pub fn frobenius_norm(k: &Matrix) -> f64 {
    let max = k.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let scale = if (1e-100..=1e100).contains(&max) {
        1.0
    } else {
        max
    };
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in k.as_slice() {
        let x = (v / scale) * (v / scale);
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    scale * (sum + comp).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobiEigen {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Frobenius norm of the off-diagonal part at termination.
    pub off_diagonal_norm: f64,
    pub sweeps: usize,
}

/// All eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigen(k: &Matrix) -> Result<JacobiEigen> {
    if !k.is_square() || k.rows() == 0 {
        return Err(invalid("oracle needs a non-empty square matrix"));
    }
    let n = k.rows();
    if n > ORACLE_MAX_N {
        return Err(invalid(format!(
            "dense oracle limited to n <= {ORACLE_MAX_N}, got {n}"
        )));
    }
    if !k.all_finite() {
        return Err(invalid("matrix entries must be finite"));
    }
    let mut a = k.clone();
    let target = 1e-15 * frobenius_norm(k);
    let mut sweeps = 0;
    let mut off = off_norm(&a);
    while off > target && sweeps < 100 {
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, p, q);
            }
        }
        sweeps += 1;
        off = off_norm(&a);
    }
    let mut eigenvalues = a.diagonal();
    eigenvalues.sort_by(|x, y| y.total_cmp(x));
    Ok(JacobiEigen {
        eigenvalues,
        off_diagonal_norm: off,
        sweeps,
    })
}

pub fn dense_eig_oracle(k: &Matrix) -> Result<Vec<f64>> {
    jacobi_eigen(k).map(|j| j.eigenvalues)
}

fn off_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

/// Annihilates a[p][q] with the plane rotation Jᵀ A J.
fn rotate(a: &mut Matrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let (app, aqq) = (a.get(p, p), a.get(q, q));
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_finite() {
        theta.signum() / (theta.abs() + theta.hypot(1.0))
    } else {
        0.0
    };
    if t == 0.0 {
        // |theta| overflowed: a[p][q] is negligible against the diagonal gap
        a.set(p, q, 0.0);
        a.set(q, p, 0.0);
        return;
    }
    let c = 1.0 / t.hypot(1.0);
    let s = t * c;
    let n = a.rows();
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a.get(r, p);
        let arq = a.get(r, q);
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        a.set(r, p, new_rp);
        a.set(p, r, new_rp);
        a.set(r, q, new_rq);
        a.set(q, r, new_rq);
    }
    a.set(p, p, app - t * apq);
    a.set(q, q, aqq + t * apq);
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    #[test]
    fn trivial_spectra() {
        let r = spectral_norm(&Matrix::identity(7), 1e-9, 70).unwrap();
        assert!(r.converged);
        assert!((r.spectral_norm - 1.0).abs() <= 1e-12);
        for n in [2, 10, 100] {
            let r = spectral_norm(&Matrix::filled(n, n, 1.0), 1e-9, 10 * n).unwrap();
            assert!(
                (r.spectral_norm - n as f64).abs() <= 1e-10 * n as f64,
                "{r:?}"
            );
            assert!(r.converged);
        }
    }

    #[test]
    fn three_by_three_matches_oracle() {
        let m = random_symmetric(3, 42);
        let oracle = dense_eig_oracle(&m).unwrap();
        let want = oracle.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let got = spectral_norm(&m, 1e-9, 30).unwrap().spectral_norm;
        assert!((got - want).abs() <= 1e-8 * want);
    }

    #[test]
    fn indefinite_targets_absolute_value() {
        let m = Matrix::diag(&[1.0, -5.0, 2.0, 0.5]);
        let r = spectral_norm_with(&m, &SpectralOptions::default()).unwrap();
        assert!((r.spectral_norm - 5.0).abs() < 1e-12);
    }

    #[test]
    fn converged_implies_small_residual() {
        for seed in 0..20 {
            let m = random_symmetric(30, seed);
            let r = spectral_norm_with(&m, &SpectralOptions::default()).unwrap();
            assert!(r.converged);
            assert!(r.residual <= 1e-9 * r.spectral_norm);
        }
    }

    #[test]
    fn capped_iterations_report_non_convergence() {
        let m = random_symmetric(50, 3);
        let r = spectral_norm(&m, 1e-12, 2).unwrap();
        assert_eq!(r.iterations, 2);
        assert!(!r.converged);
    }

    #[test]
    fn rejects_bad_input() {
        let mut m = Matrix::identity(3);
        m.set(0, 1, f64::NAN);
        assert!(spectral_norm(&m, 1e-9, 10).is_err());
        assert!(spectral_norm(&Matrix::identity(3), 0.0, 10).is_err());
        assert!(spectral_norm(&Matrix::zeros(2, 3), 1e-9, 10).is_err());
    }

    #[test]
    fn zero_and_scalar() {
        let r = spectral_norm(&Matrix::zeros(4, 4), 1e-9, 40).unwrap();
        assert_eq!(r.spectral_norm, 0.0);
        assert!(r.converged);
        let r = spectral_norm(&Matrix::filled(1, 1, -3.5), 1e-9, 1).unwrap();
        assert_eq!(r.spectral_norm, 3.5);
    }

    #[test]
    fn start_vector_is_deterministic() {
        let m = random_symmetric(40, 8);
        let a = spectral_norm_with(&m, &SpectralOptions::with_seed(1)).unwrap();
        let b = spectral_norm_with(&m, &SpectralOptions::with_seed(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_norm(&Matrix::identity(9)), 3.0);
        assert_eq!(frobenius_norm(&Matrix::filled(5, 5, 1.0)), 5.0);
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!((frobenius_norm(&m) - 10f64.sqrt()).abs() <= 1e-15 * 10f64.sqrt());
        let big = Matrix::filled(2, 2, 1e200);
        assert!((frobenius_norm(&big) - 2e200).abs() <= 1e-14 * 2e200);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(
            dense_eig_oracle(&Matrix::diag(&[3.0, 1.0, 2.0])).unwrap(),
            vec![3.0, 2.0, 1.0]
        );
        let swap = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = dense_eig_oracle(&swap).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] + 1.0).abs() < 1e-15);

        let m = random_symmetric(4, 5);
        let e = dense_eig_oracle(&m).unwrap();
        assert!((e.iter().sum::<f64>() - m.trace()).abs() <= 1e-10);

        assert!(dense_eig_oracle(&Matrix::identity(65)).is_err());
    }

    #[test]
    fn oracle_off_diagonal_mass() {
        for seed in 0..10 {
            let m = random_symmetric(20, seed);
            let j = jacobi_eigen(&m).unwrap();
            assert!(j.off_diagonal_norm <= 1e-12 * frobenius_norm(&m));
        }
    }

    #[test]
    fn tridiagonal_last_components_are_unit_row() {
        let (vals, last) = tridiagonal_eigen(&[2.0, -1.0, 0.5, 3.0], &[1.0, 0.3, -0.7]).unwrap();
        let ss: f64 = last.iter().map(|v| v * v).sum();
        assert!((ss - 1.0).abs() < 1e-14);
        let t = Matrix::from_rows(&[
            vec![2.0, 1.0, 0.0, 0.0],
            vec![1.0, -1.0, 0.3, 0.0],
            vec![0.0, 0.3, 0.5, -0.7],
            vec![0.0, 0.0, -0.7, 3.0],
        ])
        .unwrap();
        let mut v = vals.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        let oracle = dense_eig_oracle(&t).unwrap();
        for (a, b) in v.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
