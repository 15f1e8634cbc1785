//! Kernel functions and dense kernel matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{dot, Matrix};
use crate::sampling::{SampleSet, SampleSource};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// (a⟨x,y⟩ + b)^p
    Polynomial { a: f64, b: f64, p: u32 },
    /// exp(−a‖x−y‖²)
    Gaussian { a: f64 },
    /// exp(−a‖x−y‖₁)
    Laplacian { a: f64 },
}

impl KernelSpec {
    pub fn polynomial(a: f64, b: f64, p: u32) -> Result<Self> {
        let k = Self::Polynomial { a, b, p };
        k.validate()?;
        Ok(k)
    }

    pub fn gaussian(a: f64) -> Result<Self> {
        let k = Self::Gaussian { a };
        k.validate()?;
        Ok(k)
    }

    pub fn laplacian(a: f64) -> Result<Self> {
        let k = Self::Laplacian { a };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Polynomial { a, b, p } => {
                if p == 0 {
                    return Err(invalid("polynomial degree must be >= 1"));
                }
                if !a.is_finite() || !b.is_finite() {
                    return Err(invalid("polynomial parameters must be finite"));
                }
            }
            Self::Gaussian { a } | Self::Laplacian { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(invalid(format!("bandwidth a must be positive, got {a}")));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Polynomial { .. } => "poly",
            Self::Gaussian { .. } => "gaussian",
            Self::Laplacian { .. } => "laplacian",
        }
    }

    #[inline]
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Self::Polynomial { a, b, p } => powi_by_squaring(a * dot(x, y) + b, p),
            Self::Gaussian { a } => {
                let sq: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
                (-a * sq).exp()
            }
            Self::Laplacian { a } => {
                let l1: f64 = x.iter().zip(y).map(|(u, v)| (u - v).abs()).sum();
                (-a * l1).exp()
            }
        }
    }
}

/// x^p by binary exponentiation.
pub fn powi_by_squaring(mut base: f64, mut exp: u32) -> f64 {
    let mut acc = 1.0;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base *= base;
        exp >>= 1;
    }
    acc
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("kernel inputs must be finite"));
    }
    Ok(spec.eval_unchecked(x, y))
}

/// K_ij = κ(xᵢ, xⱼ) over a sample set. Each unordered pair is evaluated once
/// and mirrored, so `K[i][j]` and `K[j][i]` are the same stored value.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    entries: Matrix,
    spec: KernelSpec,
    source: SampleSource,
}

impl KernelMatrix {
    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn source(&self) -> &SampleSource {
        &self.source
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn into_entries(self) -> Matrix {
        self.entries
    }
}

pub fn build_kernel_matrix(samples: &SampleSet, spec: &KernelSpec) -> Result<KernelMatrix> {
    spec.validate()?;
    if samples.is_empty() {
        return Err(invalid("empty sample set"));
    }
    let n = samples.len();
    // upper triangle, row by row; row i holds K[i][i..n]
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = samples.point(i);
            (i..n)
                .map(|j| spec.eval_unchecked(xi, samples.point(j)))
                .collect()
        })
        .collect();
    let mut entries = Matrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            entries.set(i, j, v);
            entries.set(j, i, v);
        }
    }
    Ok(KernelMatrix {
        entries,
        spec: *spec,
        source: samples.source().clone(),
    })
}

/// K = D + W with D diagonal and W zero on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalSplit {
    pub diagonal: Vec<f64>,
    pub off_diagonal: Matrix,
}

impl DiagonalSplit {
    /// ‖D‖ = max |Dᵢᵢ|.
    pub fn diagonal_norm(&self) -> f64 {
        self.diagonal.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn off_diagonal_frobenius(&self) -> f64 {
        crate::spectral::frobenius_norm(&self.off_diagonal)
    }

    pub fn reassemble(&self) -> Matrix {
        let mut m = self.off_diagonal.clone();
        for (i, &v) in self.diagonal.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }
}

pub fn split_diagonal(k: &KernelMatrix) -> DiagonalSplit {
    split_matrix_diagonal(k.entries())
}

pub fn split_matrix_diagonal(k: &Matrix) -> DiagonalSplit {
    let diagonal = k.diagonal();
    let mut off_diagonal = k.clone();
    for i in 0..diagonal.len() {
        off_diagonal.set(i, i, 0.0);
    }
    DiagonalSplit {
        diagonal,
        off_diagonal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample, DistributionFamily, DistributionSpec};
    use proptest::prelude::*;

    fn normal(n: usize, d: usize, seed: u64) -> SampleSet {
        sample(
            &DistributionSpec::new(DistributionFamily::StandardNormal, d).unwrap(),
            n,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        let poly = KernelSpec::polynomial(1.0, 1.0, 4).unwrap();
        assert_eq!(kernel_eval(&poly, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);

        let g = KernelSpec::gaussian(0.7).unwrap();
        assert_eq!(kernel_eval(&g, &[1.5, -2.0], &[1.5, -2.0]).unwrap(), 1.0);

        // (2·(1·3 + 2·(−1)) − 1)³ = 1
        let poly = KernelSpec::polynomial(2.0, -1.0, 3).unwrap();
        assert_eq!(kernel_eval(&poly, &[1.0, 2.0], &[3.0, -1.0]).unwrap(), 1.0);

        // ‖(1,0) − (0,2)‖₁ = 3
        let l = KernelSpec::laplacian(0.5).unwrap();
        let v = kernel_eval(&l, &[1.0, 0.0], &[0.0, 2.0]).unwrap();
        assert!((v - (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn eval_errors() {
        let g = KernelSpec::Gaussian { a: 1.0 };
        assert!(kernel_eval(&g, &[1.0], &[1.0, 2.0]).is_err());
        assert!(kernel_eval(&g, &[f64::NAN], &[1.0]).is_err());
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::laplacian(-1.0).is_err());
        assert!(KernelSpec::polynomial(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn repeated_squaring_matches_powi() {
        for p in 0..20 {
            let x = -1.37f64;
            let rel = (powi_by_squaring(x, p) - x.powi(p as i32)).abs() / x.powi(p as i32).abs();
            assert!(rel < 1e-14);
        }
        assert_eq!(powi_by_squaring(3.0, 5), 243.0);
    }

    #[test]
    fn single_point_matrix() {
        let x =
            SampleSet::from_matrix(Matrix::from_rows(&[vec![1.0, 2.0, -1.0]]).unwrap()).unwrap();
        let spec = KernelSpec::polynomial(0.5, 2.0, 3).unwrap();
        let k = build_kernel_matrix(&x, &spec).unwrap();
        // (0.5·6 + 2)³ = 125
        assert_eq!(k.entries().as_slice(), &[125.0]);
    }

    #[test]
    fn identical_points_give_all_ones() {
        let x = SampleSet::from_matrix(Matrix::filled(3, 4, 0.3)).unwrap();
        let k = build_kernel_matrix(&x, &KernelSpec::gaussian(123.0).unwrap()).unwrap();
        assert_eq!(k.entries(), &Matrix::filled(3, 3, 1.0));
    }

    #[test]
    fn two_point_gaussian() {
        let x =
            SampleSet::from_matrix(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap())
                .unwrap();
        let k = build_kernel_matrix(&x, &KernelSpec::gaussian(0.5).unwrap()).unwrap();
        assert_eq!(k.entries().get(0, 0), 1.0);
        assert_eq!(k.entries().get(1, 1), 1.0);
        assert!((k.entries().get(0, 1) - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn split_examples() {
        let id = Matrix::identity(4);
        let s = split_matrix_diagonal(&id);
        assert_eq!(s.diagonal, vec![1.0; 4]);
        assert_eq!(s.off_diagonal, Matrix::zeros(4, 4));

        let n = 6;
        let s = split_matrix_diagonal(&Matrix::filled(n, n, 1.0));
        assert_eq!(s.diagonal, vec![1.0; n]);
        assert!((s.off_diagonal_frobenius() - ((n * n - n) as f64).sqrt()).abs() < 1e-14);
        assert_eq!(s.diagonal_norm(), 1.0);

        let k = build_kernel_matrix(&normal(3, 5, 2), &KernelSpec::gaussian(0.1).unwrap()).unwrap();
        let s = split_diagonal(&k);
        assert_eq!(&s.reassemble(), k.entries());
        assert!(s.off_diagonal.diagonal().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_entries_in_unit_interval() {
        let k =
            build_kernel_matrix(&normal(40, 8, 5), &KernelSpec::gaussian(0.05).unwrap()).unwrap();
        let m = k.entries();
        assert!(m.is_symmetric());
        for i in 0..40 {
            assert_eq!(m.get(i, i), 1.0);
            for j in 0..40 {
                assert!(m.get(i, j) > 0.0 && m.get(i, j) <= 1.0);
            }
        }
    }

    #[test]
    fn polynomial_psd_for_nonnegative_parameters() {
        let k = build_kernel_matrix(
            &normal(12, 3, 9),
            &KernelSpec::polynomial(0.5, 1.0, 3).unwrap(),
        )
        .unwrap();
        let eig = crate::spectral::dense_eig_oracle(k.entries()).unwrap();
        let scale = eig[0];
        assert!(eig.iter().all(|&l| l >= -1e-10 * scale), "{eig:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn permutation_equivariance(seed in any::<u64>(), n in 2usize..12, which in 0usize..3) {
            let x = normal(n, 4, seed);
            let spec = [
                KernelSpec::Polynomial { a: 0.7, b: -0.3, p: 3 },
                KernelSpec::Gaussian { a: 0.2 },
                KernelSpec::Laplacian { a: 0.3 },
            ][which];
            // reverse-and-rotate permutation
            let perm: Vec<usize> = (0..n).map(|i| (n - 1 - i + seed as usize % n) % n).collect();
            let rows: Vec<Vec<f64>> = perm.iter().map(|&i| x.point(i).to_vec()).collect();
            let xp = SampleSet::from_matrix(Matrix::from_rows(&rows).unwrap()).unwrap();
            let k = build_kernel_matrix(&x, &spec).unwrap();
            let kp = build_kernel_matrix(&xp, &spec).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(kp.entries().get(i, j), k.entries().get(perm[i], perm[j]));
                }
            }
        }

        #[test]
        fn translation_invariance(seed in any::<u64>(), shift in -3.0f64..3.0, laplace in any::<bool>()) {
            let x = normal(10, 3, seed);
            let spec = if laplace { KernelSpec::Laplacian { a: 0.4 } } else { KernelSpec::Gaussian { a: 0.4 } };
            let moved = x
                .map_points(|_, p| p.iter().enumerate().map(|(c, v)| v + shift * (1.0 + c as f64)).collect())
                .unwrap();
            let k = build_kernel_matrix(&x, &spec).unwrap();
            let km = build_kernel_matrix(&moved, &spec).unwrap();
            for (a, b) in k.entries().as_slice().iter().zip(km.entries().as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn structural_symmetry(seed in any::<u64>(), n in 1usize..20) {
            let x = normal(n, 6, seed);
            let k = build_kernel_matrix(&x, &KernelSpec::Polynomial { a: -1.3, b: 0.4, p: 5 }).unwrap();
            prop_assert!(k.entries().is_symmetric());
        }
    }
}
