//! Closed-form spectral-norm bounds for random kernel matrices.
//!
//! The absolute constants in these bounds are not known explicitly, so they
//! live in a [`BoundConfig`] that can be overridden or calibrated
//! (see [`crate::experiments::calibrate_c0`]).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::KernelSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    /// Constant of the polynomial bound C₀^p|a|^p d^p n + 2^{p+1}|b|^p n.
    #[serde(rename = "C0")]
    pub c0: f64,
    /// Constant of the refined polynomial bound.
    #[serde(rename = "C0_refined")]
    pub c0_refined: f64,
    /// Gaussian lower-regime constant: ∥K∥ ≥ c0_lower·n.
    pub c0_lower: f64,
    /// Small-bandwidth threshold: a < c1/d is the Θ(n) regime.
    #[serde(rename = "c1")]
    pub c1_threshold: f64,
    /// Slack δ in a ≥ (2+δ)ln(n)/d.
    pub delta: f64,
    /// Safety factor c in the per-coordinate noise threshold c/(∥K∥ bound + λ).
    pub noise_safety: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            c0: 1.0,
            c0_refined: 1.0,
            c0_lower: 0.5,
            c1_threshold: 0.01,
            delta: 1.0,
            noise_safety: 0.1,
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("C0", self.c0),
            ("C0_refined", self.c0_refined),
            ("c1", self.c1_threshold),
            ("delta", self.delta),
            ("noise_safety", self.noise_safety),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.c0_lower > 0.0 && self.c0_lower <= 1.0) {
            return Err(invalid(format!(
                "c0_lower must lie in (0, 1], got {}",
                self.c0_lower
            )));
        }
        Ok(())
    }
}

fn check_dims(p: u32, d: usize, n: usize) -> Result<()> {
    if p == 0 || d == 0 || n == 0 {
        return Err(invalid("p, d and n must all be >= 1"));
    }
    Ok(())
}

/// C₀^p |a|^p d^p n + 2^{p+1} |b|^p n. Overflow is returned as +∞.
pub fn poly_bound(cfg: &BoundConfig, a: f64, b: f64, p: u32, d: usize, n: usize) -> Result<f64> {
    check_dims(p, d, n)?;
    let p = p as i32;
    let n = n as f64;
    Ok((cfg.c0 * a.abs() * d as f64).powi(p) * n + 2f64.powi(p + 1) * b.abs().powi(p) * n)
}

/// C₀^p |a|^p (d^p + d^{p/2} n) + 2^{p+1} n |b|^p.
pub fn poly_bound_refined(
    cfg: &BoundConfig,
    a: f64,
    b: f64,
    p: u32,
    d: usize,
    n: usize,
) -> Result<f64> {
    check_dims(p, d, n)?;
    let df = d as f64;
    let nf = n as f64;
    let pi = p as i32;
    let head = (cfg.c0_refined * a.abs()).powi(pi) * (df.powi(pi) + df.powf(p as f64 / 2.0) * nf);
    Ok(head + 2f64.powi(pi + 1) * nf * b.abs().powi(pi))
}

/// (2+δ)·ln(n)/d: the smallest bandwidth for which ∥K∥ ≤ 2 is asserted.
pub fn gaussian_upper_threshold(d: usize, n: usize, delta: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid("threshold needs n >= 2 so that ln n > 0"));
    }
    if d == 0 {
        return Err(invalid("d must be >= 1"));
    }
    if !(delta > 0.0) {
        return Err(invalid("delta must be positive"));
    }
    Ok(upper_threshold_unchecked(d, n, delta))
}

fn upper_threshold_unchecked(d: usize, n: usize, delta: f64) -> f64 {
    (2.0 + delta) * (n as f64).ln() / d as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaussianRegime {
    /// a < c₁/d: ∥K∥ ≥ c₀n with high probability.
    LowerLinear,
    /// Between thresholds: only the deterministic ∥K∥ ≤ n holds.
    TrivialAtMostN,
    /// a ≥ (2+δ)ln(n)/d: ∥K∥ ≤ 2 with high probability (product distributions).
    UpperAtMostTwo,
}

impl GaussianRegime {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::LowerLinear => "lower-theta-n",
            Self::TrivialAtMostN => "trivial-le-n",
            Self::UpperAtMostTwo => "upper-le-2",
        }
    }
}

impl std::fmt::Display for GaussianRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Which part of the Gaussian-kernel theory applies to bandwidth `a`.
/// For n = 1 the upper threshold degenerates to 0.
pub fn regime_classify(
    spec: &KernelSpec,
    d: usize,
    n: usize,
    cfg: &BoundConfig,
) -> Result<GaussianRegime> {
    let KernelSpec::Gaussian { a } = *spec else {
        return Err(invalid("regime classification applies to Gaussian kernels"));
    };
    if d == 0 || n == 0 {
        return Err(invalid("d and n must be >= 1"));
    }
    Ok(if a < cfg.c1_threshold / d as f64 {
        GaussianRegime::LowerLinear
    } else if a >= upper_threshold_unchecked(d, n, cfg.delta) {
        GaussianRegime::UpperAtMostTwo
    } else {
        GaussianRegime::TrivialAtMostN
    })
}
