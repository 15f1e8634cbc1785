//! Noisy coefficient release and the linear reconstruction attack.
//!
//! The mechanism publishes α̃ = α* + e. The attacker, who knows the public
//! points X and λ, rebuilds K from X, computes z = (K + λI)α̃ = y + (K + λI)e
//! and rounds: ŷᵢ = 0 if zᵢ < 1/2, otherwise 1. If ‖e‖∞ ≤ β then at most
//! 4(∥K∥ + λ)²β²n coordinates can be wrong.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::bounds::{poly_bound, regime_classify, BoundConfig, GaussianRegime};
use crate::error::{invalid, Error, Result};
use crate::kernels::{build_kernel_matrix, KernelMatrix, KernelSpec};
use crate::krr::{fit_with_kernel, RidgeModel};
use crate::matrix::{norm_inf, Matrix};
use crate::sampling::SampleSet;
use crate::spectral::{spectral_norm_with, SpectralOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NoiseFamily {
    /// Each coordinate uniform on [−β, β].
    UniformInf {
        beta: f64,
    },
    GaussianIid {
        sigma: f64,
    },
    LaplaceIid {
        scale: f64,
    },
    Explicit {
        e: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn uniform(beta: f64, seed: u64) -> Self {
        Self {
            family: NoiseFamily::UniformInf { beta },
            seed,
        }
    }

    pub fn explicit(e: Vec<f64>) -> Self {
        Self {
            family: NoiseFamily::Explicit { e },
            seed: 0,
        }
    }

    /// β when the family guarantees ‖e‖∞ ≤ β.
    pub fn known_beta(&self) -> Option<f64> {
        match self.family {
            NoiseFamily::UniformInf { beta } => Some(beta),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (name, v) = match &self.family {
            NoiseFamily::UniformInf { beta } => ("beta", *beta),
            NoiseFamily::GaussianIid { sigma } => ("sigma", *sigma),
            NoiseFamily::LaplaceIid { scale } => ("scale", *scale),
            NoiseFamily::Explicit { e } => {
                if e.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("explicit noise must be finite"));
                }
                return Ok(());
            }
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be nonnegative, got {v}")));
        }
        Ok(())
    }
}

/// Draws the noise vector e of length `n`. Uniform noise is β·u with u drawn
/// on [−1, 1] from the seed, so for a fixed seed e scales linearly in β.
pub fn draw_noise(noise: &NoiseSpec, n: usize) -> Result<Vec<f64>> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    Ok(match &noise.family {
        NoiseFamily::UniformInf { beta } => (0..n)
            .map(|_| beta * rng.random_range(-1.0..=1.0))
            .collect(),
        NoiseFamily::GaussianIid { sigma } => {
            if *sigma == 0.0 {
                vec![0.0; n]
            } else {
                let dist = Normal::new(0.0, *sigma).map_err(|e| invalid(e.to_string()))?;
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
        }
        NoiseFamily::LaplaceIid { scale } => (0..n)
            .map(|_| {
                let mag: f64 = Exp1.sample(&mut rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * scale * mag
            })
            .collect(),
        NoiseFamily::Explicit { e } => {
            if e.len() != n {
                return Err(invalid(format!(
                    "explicit noise has length {}, expected {n}",
                    e.len()
                )));
            }
            e.clone()
        }
    })
}

/// α̃ = α* + e.
pub fn release_noisy(model: &RidgeModel, noise: &NoiseSpec) -> Result<Vec<f64>> {
    let e = draw_noise(noise, model.alpha().len())?;
    Ok(model.alpha().iter().zip(&e).map(|(a, e)| a + e).collect())
}

/// Rounds z = (K + λI)α̃ at 1/2. Ties go to 1.
pub fn reconstruct(k: &KernelMatrix, lambda: f64, alpha_tilde: &[f64]) -> Result<Vec<f64>> {
    reconstruct_matrix(k.entries(), lambda, alpha_tilde)
}

pub fn reconstruct_matrix(k: &Matrix, lambda: f64, alpha_tilde: &[f64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    if alpha_tilde.len() != k.rows() {
        return Err(invalid(format!(
            "released vector has length {}, expected {}",
            alpha_tilde.len(),
            k.rows()
        )));
    }
    let z = k.shifted_matvec(lambda, alpha_tilde);
    Ok(z.into_iter()
        .map(|zi| if zi < 0.5 { 0.0 } else { 1.0 })
        .collect())
}

/// The full attack from public information: rebuild K from X, then round.
pub fn reconstruct_from_public(
    public: &SampleSet,
    spec: &KernelSpec,
    lambda: f64,
    alpha_tilde: &[f64],
) -> Result<Vec<f64>> {
    let k = build_kernel_matrix(public, spec)?;
    reconstruct(&k, lambda, alpha_tilde)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub hamming: usize,
    pub recovered_fraction: f64,
    /// 4(∥K∥ + λ)²β²n, present when β is known.
    pub lemma_bound: Option<f64>,
    /// Reconstruction radius θ achieved, equal to `hamming`.
    pub theta: usize,
    pub n: usize,
}

impl AttackOutcome {
    /// min(n, lemma bound).
    pub fn clamped_bound(&self) -> Option<f64> {
        self.lemma_bound.map(|b| b.min(self.n as f64))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredAttack {
    pub y_hat: Vec<f64>,
    pub outcome: AttackOutcome,
}

pub fn lemma_bound(k_norm: f64, lambda: f64, beta: f64, n: usize) -> f64 {
    4.0 * (k_norm + lambda).powi(2) * beta * beta * n as f64
}

fn is_binary(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0 || x == 1.0)
}

pub fn score(
    y: &[f64],
    y_hat: &[f64],
    k_norm: f64,
    lambda: f64,
    beta: Option<f64>,
) -> Result<AttackOutcome> {
    if y.len() != y_hat.len() {
        return Err(invalid("label vectors differ in length"));
    }
    if y.is_empty() {
        return Err(invalid("empty label vector"));
    }
    if !is_binary(y) || !is_binary(y_hat) {
        return Err(invalid("labels must be in {0, 1}"));
    }
    let n = y.len();
    let hamming = y.iter().zip(y_hat).filter(|(a, b)| a != b).count();
    Ok(AttackOutcome {
        hamming,
        recovered_fraction: 1.0 - hamming as f64 / n as f64,
        lemma_bound: beta.map(|b| lemma_bound(k_norm, lambda, b, n)),
        theta: hamming,
        n,
    })
}

/// Per-coordinate noise level c/(∥K∥-bound + λ) below which the attack
/// recovers all but a small fraction of y.
pub fn noise_threshold(
    kernel: &KernelSpec,
    d: usize,
    n: usize,
    lambda: f64,
    cfg: &BoundConfig,
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(invalid("lambda must be nonnegative"));
    }
    let norm_bound = match *kernel {
        KernelSpec::Polynomial { a, b, p } => poly_bound(cfg, a, b, p, d, n)?,
        KernelSpec::Gaussian { .. } => match regime_classify(kernel, d, n, cfg)? {
            GaussianRegime::UpperAtMostTwo => 2.0,
            _ => n as f64,
        },
        KernelSpec::Laplacian { .. } => {
            return Err(Error::Unsupported(
                "no spectral-norm bound is available for the Laplacian kernel".into(),
            ))
        }
    };
    Ok(cfg.noise_safety / (norm_bound + lambda))
}

/// One end-to-end trial: fit, release with noise, attack from public X, score.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackTrial {
    pub outcome: AttackOutcome,
    pub spectral_norm: f64,
    /// β used in the lemma bound: the declared β for uniform noise, otherwise
    /// the observed ‖e‖∞.
    pub beta: f64,
    pub y_hat: Vec<f64>,
}

pub fn simulate(
    public: &SampleSet,
    spec: &KernelSpec,
    lambda: f64,
    y: &[f64],
    noise: &NoiseSpec,
    spectral: &SpectralOptions,
) -> Result<AttackTrial> {
    // mechanism side
    let k_mech = build_kernel_matrix(public, spec)?;
    let model = fit_with_kernel(public, &k_mech, y, lambda)?;
    let e = draw_noise(noise, y.len())?;
    let alpha_tilde: Vec<f64> = model.alpha().iter().zip(&e).map(|(a, e)| a + e).collect();
    drop(k_mech);

    // attacker side
    let k = build_kernel_matrix(public, spec)?;
    let y_hat = reconstruct(&k, lambda, &alpha_tilde)?;
    let k_norm = spectral_norm_with(k.entries(), spectral)?.spectral_norm;
    let beta = noise.known_beta().unwrap_or_else(|| norm_inf(&e));
    let outcome = score(y, &y_hat, k_norm, lambda, Some(beta))?;
    Ok(AttackTrial {
        outcome,
        spectral_norm: k_norm,
        beta,
        y_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krr::fit;
    use crate::matrix::dot;
    use crate::sampling::{sample, DistributionFamily, DistributionSpec};

    fn normal(n: usize, d: usize, seed: u64) -> SampleSet {
        sample(
            &DistributionSpec::new(DistributionFamily::StandardNormal, d).unwrap(),
            n,
            seed,
        )
        .unwrap()
    }

    fn labels(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
            .collect()
    }

    #[test]
    fn zero_beta_is_exact_release() {
        let x = normal(10, 3, 1);
        let m = fit(&x, &labels(10, 2), &KernelSpec::gaussian(0.3).unwrap(), 1.0).unwrap();
        assert_eq!(
            release_noisy(&m, &NoiseSpec::uniform(0.0, 9)).unwrap(),
            m.alpha()
        );
    }

    #[test]
    fn explicit_noise_is_added_exactly() {
        let x = normal(4, 2, 1);
        let m = fit(
            &x,
            &[1.0, 0.0, 0.0, 1.0],
            &KernelSpec::gaussian(0.3).unwrap(),
            1.0,
        )
        .unwrap();
        let e = vec![0.25, -0.5, 0.0, 1.0];
        let at = release_noisy(&m, &NoiseSpec::explicit(e.clone())).unwrap();
        for i in 0..4 {
            assert_eq!(at[i], m.alpha()[i] + e[i]);
        }
        assert!(release_noisy(&m, &NoiseSpec::explicit(vec![0.0; 3])).is_err());
    }

    #[test]
    fn uniform_noise_law() {
        let e = draw_noise(&NoiseSpec::uniform(0.5, 4), 10_000).unwrap();
        assert!(norm_inf(&e) <= 0.5);
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        assert!(mean.abs() <= 0.02);
        assert!(draw_noise(&NoiseSpec::uniform(-1.0, 4), 3).is_err());
    }

    #[test]
    fn other_noise_families() {
        let g = draw_noise(
            &NoiseSpec {
                family: NoiseFamily::GaussianIid { sigma: 2.0 },
                seed: 1,
            },
            20_000,
        )
        .unwrap();
        let var = dot(&g, &g) / g.len() as f64;
        assert!((var - 4.0).abs() < 0.2, "{var}");
        let l = draw_noise(
            &NoiseSpec {
                family: NoiseFamily::LaplaceIid { scale: 0.5 },
                seed: 2,
            },
            20_000,
        )
        .unwrap();
        // E|e| = scale
        let mad = l.iter().map(|v| v.abs()).sum::<f64>() / l.len() as f64;
        assert!((mad - 0.5).abs() < 0.02, "{mad}");
    }

    #[test]
    fn noiseless_reconstruction_recovers_y() {
        let x = normal(40, 5, 3);
        let spec = KernelSpec::gaussian(0.15).unwrap();
        let y = labels(40, 4);
        let m = fit(&x, &y, &spec, 0.01).unwrap();
        let y_hat = reconstruct_from_public(&x, &spec, 0.01, m.alpha()).unwrap();
        assert_eq!(y_hat, y);
    }

    #[test]
    fn zero_release_gives_all_zero() {
        let k = Matrix::identity(5);
        assert_eq!(
            reconstruct_matrix(&k, 1.0, &[0.0; 5]).unwrap(),
            vec![0.0; 5]
        );
    }

    #[test]
    fn hand_worked_rounding() {
        // K + λI = 2I
        let k = Matrix::identity(2);
        let y = reconstruct_matrix(&k, 1.0, &[0.3, 0.1]).unwrap();
        assert_eq!(y, vec![1.0, 0.0]);
        // exact tie at 1/2 rounds to 1
        assert_eq!(
            reconstruct_matrix(&k, 1.0, &[0.25, 0.2499]).unwrap(),
            vec![1.0, 0.0]
        );
        assert!(reconstruct_matrix(&k, 1.0, &[0.25]).is_err());
    }

    #[test]
    fn score_examples() {
        let y = [0.0, 1.0, 1.0, 0.0];
        let s = score(&y, &y, 1.0, 1.0, None).unwrap();
        assert_eq!(
            (s.hamming, s.recovered_fraction, s.lemma_bound),
            (0, 1.0, None)
        );
        let s = score(&y, &[0.0, 1.0, 0.0, 0.0], 1.0, 1.0, None).unwrap();
        assert_eq!(s.hamming, 1);
        assert_eq!(s.theta, 1);
        assert_eq!(s.recovered_fraction, 0.75);
        assert!(score(&y, &[0.0, 2.0, 0.0, 0.0], 1.0, 1.0, None).is_err());

        let (k_norm, lambda) = (3.0, 1.0);
        for n in [1usize, 8, 100] {
            let y = vec![1.0; n];
            let beta = 1.0 / (4.0 * (k_norm + lambda));
            let s = score(&y, &y, k_norm, lambda, Some(beta)).unwrap();
            assert!((s.lemma_bound.unwrap() - n as f64 / 4.0).abs() < 1e-12 * n as f64);
        }
        let s = score(&[1.0; 10], &[1.0; 10], 1.0, 1.0, Some(10.0)).unwrap();
        assert_eq!(s.clamped_bound(), Some(10.0));
    }

    #[test]
    fn threshold_examples() {
        let cfg = BoundConfig::default();
        let (d, n) = (100, 100);
        let a = 3.0 * (n as f64).ln() / d as f64;
        let g = KernelSpec::gaussian(a).unwrap();
        let t = noise_threshold(&g, d, n, 1.0, &cfg).unwrap();
        assert!((t - 1.0 / 30.0).abs() < 1e-15);

        let mut prev = f64::INFINITY;
        for lambda in [0.0, 1.0, 10.0, 1e3, 1e6] {
            let t = noise_threshold(&g, d, n, lambda, &cfg).unwrap();
            assert!(t < prev);
            prev = t;
        }
        assert!(prev < 1e-7);

        let p = KernelSpec::polynomial(1.0, 0.0, 1).unwrap();
        let t = noise_threshold(&p, 10, 10, 0.0, &cfg).unwrap();
        assert!((t - 1e-3).abs() < 1e-18);

        let l = KernelSpec::laplacian(1.0).unwrap();
        assert!(matches!(
            noise_threshold(&l, 10, 10, 1.0, &cfg),
            Err(Error::Unsupported(_))
        ));

        // outside the upper regime only ∥K∥ ≤ n is available
        let slow = KernelSpec::gaussian(0.5 / d as f64).unwrap();
        let t = noise_threshold(&slow, d, n, 1.0, &cfg).unwrap();
        assert!((t - 0.1 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn lemma_bound_holds_under_simulation() {
        let x = normal(60, 4, 21);
        let spec = KernelSpec::gaussian(0.2).unwrap();
        for (i, beta) in [1e-3, 1e-2, 0.05, 0.2, 1.0].into_iter().enumerate() {
            let y = labels(60, i as u64);
            let t = simulate(
                &x,
                &spec,
                0.5,
                &y,
                &NoiseSpec::uniform(beta, 100 + i as u64),
                &SpectralOptions::default(),
            )
            .unwrap();
            assert!(t.outcome.hamming as f64 <= t.outcome.lemma_bound.unwrap());
        }
    }

    #[test]
    fn l1_and_l2_share_the_minimizer() {
        // both ‖α̃ − (K+λI)⁻¹z‖₂ and ‖·‖₁ vanish at z = (K+λI)α̃
        let x = normal(12, 3, 5);
        let spec = KernelSpec::gaussian(0.3).unwrap();
        let lambda = 0.5;
        let k = build_kernel_matrix(&x, &spec).unwrap();
        let y = labels(12, 6);
        let m = fit_with_kernel(&x, &k, &y, lambda).unwrap();
        let at = release_noisy(&m, &NoiseSpec::uniform(0.05, 7)).unwrap();
        let z = k.entries().shifted_matvec(lambda, &at);
        let objective = |zz: &[f64]| {
            let (inv_z, _, _) = crate::krr::solve_shifted(k.entries(), lambda, zz).unwrap();
            let diff: Vec<f64> = at.iter().zip(&inv_z).map(|(a, b)| a - b).collect();
            (
                dot(&diff, &diff).sqrt(),
                diff.iter().map(|v| v.abs()).sum::<f64>(),
            )
        };
        let (l2, l1) = objective(&z);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let dir: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let zp: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + 1e-3 * b).collect();
            let (p2, p1) = objective(&zp);
            assert!(p2 > l2 && p1 > l1);
        }
    }
}
