//! Monte Carlo sweeps over (n, d) grids: spectral norms of random kernel
//! matrices against the closed-form bounds, constant calibration and the
//! privacy noise sweep.
//!
//! Every run derives its own seed from the plan's base seed and its
//! coordinates, so sweeps are reproducible regardless of scheduling.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{lemma_bound, reconstruct_matrix, NoiseSpec};
use crate::bounds::{poly_bound, regime_classify, BoundConfig, GaussianRegime};
use crate::error::{invalid, Error, Result};
use crate::kernels::{build_kernel_matrix, KernelSpec};
use crate::krr::solve_shifted;
use crate::matrix::Matrix;
use crate::sampling::{derive_seed, sample, DistributionFamily, DistributionSpec, SampleSet};
use crate::spectral::{frobenius_norm, spectral_norm_with, SpectralOptions};

pub const DEFAULT_MEMORY_CEILING: u64 = 2 << 30;
pub const DESK_GRID: [usize; 6] = [10, 32, 100, 316, 1000, 2000];
pub const DEFAULT_RUNS: usize = 20;
/// Relative slack allowed in the max|Kᵢᵢ| ≤ ∥K∥ ≤ ∥K∥_F check.
pub const SANDWICH_SLACK: f64 = 1e-12;

/// How the kernel is chosen at each grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum KernelRule {
    Fixed {
        kernel: KernelSpec,
    },
    /// Gaussian with a = coef/d.
    GaussianPerDimension {
        coef: f64,
    },
    /// Gaussian with a = coef·ln(n)/d.
    GaussianLogScaled {
        coef: f64,
    },
}

impl KernelRule {
    pub fn resolve(&self, n: usize, d: usize) -> Result<KernelSpec> {
        match self {
            Self::Fixed { kernel } => {
                kernel.validate()?;
                Ok(*kernel)
            }
            Self::GaussianPerDimension { coef } => KernelSpec::gaussian(coef / d as f64),
            Self::GaussianLogScaled { coef } => {
                if n < 2 {
                    return Err(invalid("log-scaled bandwidth needs n >= 2"));
                }
                KernelSpec::gaussian(coef * (n as f64).ln() / d as f64)
            }
        }
    }

    fn is_gaussian(&self) -> bool {
        !matches!(
            self,
            Self::Fixed {
                kernel: KernelSpec::Polynomial { .. } | KernelSpec::Laplacian { .. }
            }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub grid: Vec<GridPoint>,
    pub runs: usize,
    pub kernel: KernelRule,
    pub family: DistributionFamily,
    pub base_seed: u64,
    pub bounds: BoundConfig,
    pub memory_ceiling_bytes: u64,
    pub spectral: SpectralOptions,
}

impl ExperimentPlan {
    pub fn new(
        ns: &[usize],
        d: usize,
        runs: usize,
        kernel: KernelRule,
        family: DistributionFamily,
    ) -> Self {
        Self {
            grid: ns.iter().map(|&n| GridPoint { n, d }).collect(),
            runs,
            kernel,
            family,
            base_seed: 0,
            bounds: BoundConfig::default(),
            memory_ceiling_bytes: DEFAULT_MEMORY_CEILING,
            spectral: SpectralOptions::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_bounds(mut self, bounds: BoundConfig) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(invalid("runs per point must be >= 1"));
        }
        if self.grid.is_empty() {
            return Err(invalid("grid is empty"));
        }
        if let Some(p) = self.grid.iter().find(|p| p.n == 0 || p.d == 0) {
            return Err(invalid(format!(
                "grid point n={}, d={} must be positive",
                p.n, p.d
            )));
        }
        self.bounds.validate()
    }

    /// Grid points whose working set fits under the memory ceiling. The rest
    /// are logged and dropped.
    pub fn feasible_points(&self) -> Vec<GridPoint> {
        self.grid
            .iter()
            .copied()
            .filter(|p| {
                let need = working_set_bytes(p.n, p.d);
                let ok = need <= self.memory_ceiling_bytes;
                if !ok {
                    log::warn!(
                        "skipping n={}, d={}: needs ~{} bytes, ceiling is {}",
                        p.n,
                        p.d,
                        need,
                        self.memory_ceiling_bytes
                    );
                }
                ok
            })
            .collect()
    }

    pub fn run_seed(&self, p: GridPoint, run: usize) -> u64 {
        derive_seed(self.base_seed, &[p.n as u64, p.d as u64, run as u64])
    }
}

/// Samples plus kernel matrix, in bytes.
pub fn working_set_bytes(n: usize, d: usize) -> u64 {
    let (n, d) = (n as u64, d as u64);
    8u64.saturating_mul(n.saturating_mul(n).saturating_add(n.saturating_mul(d)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub d: usize,
    pub run: usize,
    pub seed: u64,
    pub measured_norm: f64,
    pub predicted_bound: f64,
    pub regime: String,
    pub wall_time_s: f64,
    pub max_diagonal: f64,
    pub frobenius: f64,
    pub converged: bool,
}

impl ExperimentRecord {
    pub fn ratio(&self) -> f64 {
        self.measured_norm / self.n as f64
    }

    pub fn sandwich_holds(&self) -> bool {
        let slack = SANDWICH_SLACK * self.frobenius.max(1.0);
        self.max_diagonal <= self.measured_norm + slack
            && self.measured_norm <= self.frobenius + slack
    }
}

/// One measurement on a fixed sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub measured_norm: f64,
    pub max_diagonal: f64,
    pub frobenius: f64,
    pub converged: bool,
}

pub fn measure(
    samples: &SampleSet,
    kernel: &KernelSpec,
    spectral: &SpectralOptions,
) -> Result<Measurement> {
    let k = build_kernel_matrix(samples, kernel)?;
    measure_matrix(k.entries(), spectral)
}

fn measure_matrix(k: &Matrix, spectral: &SpectralOptions) -> Result<Measurement> {
    let res = spectral_norm_with(k, spectral)?;
    Ok(Measurement {
        measured_norm: res.spectral_norm,
        max_diagonal: k.diagonal().into_iter().fold(0.0, |m, v| m.max(v.abs())),
        frobenius: frobenius_norm(k),
        converged: res.converged,
    })
}

/// Predicted upper bound and regime tag for one grid point.
pub fn prediction(
    kernel: &KernelSpec,
    n: usize,
    d: usize,
    cfg: &BoundConfig,
) -> Result<(f64, String)> {
    Ok(match *kernel {
        KernelSpec::Polynomial { a, b, p } => (poly_bound(cfg, a, b, p, d, n)?, "poly".to_string()),
        KernelSpec::Gaussian { .. } => {
            let regime = regime_classify(kernel, d, n, cfg)?;
            let bound = match regime {
                GaussianRegime::UpperAtMostTwo => 2.0,
                _ => n as f64,
            };
            (bound, regime.tag().to_string())
        }
        // entries lie in (0, 1], so only the trivial bound is available
        KernelSpec::Laplacian { .. } => (n as f64, "laplacian-le-n".to_string()),
    })
}

/// Runs every (grid point, run) pair of the plan in the rayon pool.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    plan.validate()?;
    let spec_for = |p: GridPoint| DistributionSpec::new(plan.family, p.d);
    let tasks: Vec<(GridPoint, usize)> = plan
        .feasible_points()
        .into_iter()
        .flat_map(|p| (0..plan.runs).map(move |r| (p, r)))
        .collect();
    let mut records = tasks
        .into_par_iter()
        .map(|(p, run)| -> Result<ExperimentRecord> {
            let start = Instant::now();
            let seed = plan.run_seed(p, run);
            let kernel = plan.kernel.resolve(p.n, p.d)?;
            let (predicted_bound, regime) = prediction(&kernel, p.n, p.d, &plan.bounds)?;
            let x = sample(&spec_for(p)?, p.n, seed)?;
            let m = measure(&x, &kernel, &plan.spectral)?;
            if !m.converged {
                log::warn!("spectral norm did not converge at n={}, run={run}", p.n);
            }
            Ok(ExperimentRecord {
                n: p.n,
                d: p.d,
                run,
                seed,
                measured_norm: m.measured_norm,
                predicted_bound,
                regime,
                wall_time_s: start.elapsed().as_secs_f64(),
                max_diagonal: m.max_diagonal,
                frobenius: m.frobenius,
                converged: m.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.n, r.d, r.run));
    Ok(records)
}

pub fn run_figure1(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    if !matches!(
        plan.kernel,
        KernelRule::Fixed {
            kernel: KernelSpec::Polynomial { .. }
        }
    ) {
        return Err(invalid("figure 1 sweep needs a polynomial kernel"));
    }
    run_sweep(plan)
}

pub fn run_figure2(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    if !matches!(plan.kernel, KernelRule::GaussianLogScaled { .. }) {
        return Err(invalid(
            "figure 2 sweep needs a log-scaled Gaussian bandwidth",
        ));
    }
    run_sweep(plan)
}

pub fn run_lower_regime(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    if !plan.kernel.is_gaussian() {
        return Err(invalid("lower-regime sweep needs a Gaussian kernel"));
    }
    run_sweep(plan)
}

pub fn run_mixture_counterexample(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    if !plan.kernel.is_gaussian() {
        return Err(invalid("mixture sweep needs a Gaussian kernel"));
    }
    if plan.family != DistributionFamily::ZeroOrSphereMixture {
        return Err(invalid(
            "mixture sweep needs the zero-or-sphere mixture distribution",
        ));
    }
    run_sweep(plan)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSummary {
    pub n: usize,
    pub d: usize,
    pub runs: usize,
    pub mean_norm: f64,
    pub max_norm: f64,
    pub min_norm: f64,
    pub predicted_bound: f64,
}

/// Mean, max and min of the measured norm per grid point.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<PointSummary> {
    let mut out: Vec<PointSummary> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some(s) if s.n == r.n && s.d == r.d => {
                s.runs += 1;
                s.mean_norm += r.measured_norm;
                s.max_norm = s.max_norm.max(r.measured_norm);
                s.min_norm = s.min_norm.min(r.measured_norm);
                s.predicted_bound = s.predicted_bound.max(r.predicted_bound);
            }
            _ => out.push(PointSummary {
                n: r.n,
                d: r.d,
                runs: 1,
                mean_norm: r.measured_norm,
                max_norm: r.measured_norm,
                min_norm: r.measured_norm,
                predicted_bound: r.predicted_bound,
            }),
        }
    }
    for s in &mut out {
        s.mean_norm /= s.runs as f64;
    }
    out
}

pub const RECORD_HEADER: [&str; 8] = [
    "n",
    "d",
    "run",
    "seed",
    "measured_norm",
    "predicted_bound",
    "regime",
    "wall_time_s",
];

/// Writes records as CSV. With `include_timing` false the wall-time column is
/// left empty so that reruns compare byte for byte.
pub fn write_records_csv<W: Write>(
    out: W,
    records: &[ExperimentRecord],
    include_timing: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        let time = if include_timing {
            format!("{:.6}", r.wall_time_s)
        } else {
            String::new()
        };
        w.write_record([
            r.n.to_string(),
            r.d.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            r.measured_norm.to_string(),
            r.predicted_bound.to_string(),
            r.regime.clone(),
            time,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON sidecar echoing the plan and bound constants next to a sweep's CSV.
#[derive(Clone, Debug, Serialize)]
pub struct Sidecar<'a, P: Serialize, S: Serialize> {
    pub plan: &'a P,
    pub bounds: &'a BoundConfig,
    pub summary: &'a S,
}

pub fn write_sidecar<W: Write, P: Serialize, S: Serialize>(
    out: W,
    plan: &P,
    bounds: &BoundConfig,
    summary: &S,
) -> Result<()> {
    serde_json::to_writer_pretty(
        out,
        &Sidecar {
            plan,
            bounds,
            summary,
        },
    )?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlan {
    pub family: DistributionFamily,
    pub d: usize,
    pub a: f64,
    pub b: f64,
    pub p_range: Vec<u32>,
    pub n_range: Vec<usize>,
    pub runs: usize,
    pub base_seed: u64,
    pub memory_ceiling_bytes: u64,
    pub spectral: SpectralOptions,
}

impl CalibrationPlan {
    pub fn new(
        family: DistributionFamily,
        d: usize,
        p_range: Vec<u32>,
        n_range: Vec<usize>,
        runs: usize,
    ) -> Self {
        Self {
            family,
            d,
            a: 1.0,
            b: 1.0,
            p_range,
            n_range,
            runs,
            base_seed: 0,
            memory_ceiling_bytes: DEFAULT_MEMORY_CEILING,
            spectral: SpectralOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    /// Largest C0 required by any single measurement.
    pub required_c0: f64,
    /// `required_c0` with the 10% safety margin.
    pub c0: f64,
    pub measurements: usize,
    /// Defaults with `c0` substituted.
    pub bounds: BoundConfig,
}

pub const CALIBRATION_MARGIN: f64 = 1.1;

/// The C0 that makes (C0|a|d)^p·n + 2^{p+1}|b|^p·n equal `measured`, or 0 when
/// the additive term alone already covers it.
pub fn required_c0(measured: f64, a: f64, b: f64, p: u32, d: usize, n: usize) -> f64 {
    let n = n as f64;
    let additive = 2f64.powi(p as i32 + 1) * b.abs().powi(p as i32) * n;
    let excess = measured - additive;
    if excess <= 0.0 {
        return 0.0;
    }
    (excess / n).powf(1.0 / p as f64) / (a.abs() * d as f64)
}

pub fn calibrate_c0(plan: &CalibrationPlan) -> Result<Calibration> {
    if plan.p_range.is_empty() || plan.n_range.is_empty() {
        return Err(invalid("calibration ranges must be nonempty"));
    }
    if plan.runs == 0 {
        return Err(invalid("runs must be >= 1"));
    }
    if !(plan.a != 0.0 && plan.a.is_finite()) {
        return Err(invalid("calibration needs a nonzero a"));
    }
    let spec = DistributionSpec::new(plan.family, plan.d)?;
    let mut tasks = Vec::new();
    for &n in &plan.n_range {
        let need = working_set_bytes(n, plan.d);
        if need > plan.memory_ceiling_bytes {
            log::warn!("calibration skips n={n}: needs ~{need} bytes");
            continue;
        }
        for &p in &plan.p_range {
            for run in 0..plan.runs {
                tasks.push((n, p, run));
            }
        }
    }
    if tasks.is_empty() {
        return Err(Error::NoData(
            "every calibration point exceeds the memory ceiling".into(),
        ));
    }
    let required = tasks
        .par_iter()
        .map(|&(n, p, run)| -> Result<f64> {
            // samples depend on (n, run) only, so every p sees the same data
            let seed = derive_seed(plan.base_seed, &[n as u64, plan.d as u64, run as u64]);
            let x = sample(&spec, n, seed)?;
            let kernel = KernelSpec::polynomial(plan.a, plan.b, p)?;
            let m = measure(&x, &kernel, &plan.spectral)?;
            Ok(required_c0(m.measured_norm, plan.a, plan.b, p, plan.d, n))
        })
        .collect::<Result<Vec<_>>>()?;
    let required_c0 = required.iter().copied().fold(0.0, f64::max);
    let c0 = required_c0 * CALIBRATION_MARGIN;
    let bounds = BoundConfig {
        c0: if c0 > 0.0 { c0 } else { f64::MIN_POSITIVE },
        ..BoundConfig::default()
    };
    Ok(Calibration {
        required_c0,
        c0,
        measurements: required.len(),
        bounds,
    })
}

/// Noise level used in a privacy sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum BetaSpec {
    Absolute(f64),
    /// β = c/(∥K∥ + λ) with the measured ∥K∥ of each trial.
    RelativeToNorm(f64),
}

impl BetaSpec {
    pub fn resolve(&self, k_norm: f64, lambda: f64) -> f64 {
        match *self {
            Self::Absolute(b) => b,
            Self::RelativeToNorm(c) => c / (k_norm + lambda),
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Self::Absolute(v) | Self::RelativeToNorm(v) => v,
        }
    }
}

impl std::fmt::Display for BetaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Absolute(b) => write!(f, "{b}"),
            Self::RelativeToNorm(c) => write!(f, "{c}/(norm+lambda)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrivacyTrial {
    pub n: usize,
    pub d: usize,
    pub beta_index: usize,
    pub trial: usize,
    pub seed: u64,
    pub beta: f64,
    /// Worst hamming distance over the labelings tried.
    pub hamming: usize,
    pub recovered_fraction: f64,
    /// min(n, 4(∥K∥+λ)²β²n).
    pub lemma_bound: f64,
    pub spectral_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrivacySummary {
    pub n: usize,
    pub d: usize,
    pub beta: String,
    pub trials: usize,
    pub median_hamming: f64,
    pub max_hamming: usize,
    pub min_recovered_fraction: f64,
    pub lemma_bound: f64,
}

/// Labelings tried per trial: a uniform random y, then 0ⁿ and 1ⁿ.
pub fn trial_labelings(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
        .collect();
    vec![random, vec![0.0; n], vec![1.0; n]]
}

/// Full pipeline per trial: sample X, build K, fit α* for each labeling, add
/// uniform noise of each β, reconstruct and score. X, labels and the unit
/// noise direction are shared across the β grid, so errors grow pathwise in β.
pub fn run_privacy_sweep(
    plan: &ExperimentPlan,
    lambda: f64,
    betas: &[BetaSpec],
) -> Result<Vec<PrivacyTrial>> {
    plan.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda must be positive"));
    }
    if betas.is_empty() {
        return Err(invalid("beta grid is empty"));
    }
    if let Some(b) = betas
        .iter()
        .find(|b| !(b.value() >= 0.0 && b.value().is_finite()))
    {
        return Err(invalid(format!(
            "beta grid entries must be nonnegative, got {b}"
        )));
    }
    let tasks: Vec<(GridPoint, usize)> = plan
        .feasible_points()
        .into_iter()
        .flat_map(|p| (0..plan.runs).map(move |r| (p, r)))
        .collect();
    let per_task = tasks
        .into_par_iter()
        .map(|(p, trial)| -> Result<Vec<PrivacyTrial>> {
            let seed = plan.run_seed(p, trial);
            let kernel = plan.kernel.resolve(p.n, p.d)?;
            let x = sample(
                &DistributionSpec::new(plan.family, p.d)?,
                p.n,
                derive_seed(seed, &[0]),
            )?;
            let k = build_kernel_matrix(&x, &kernel)?.into_entries();
            let k_norm = spectral_norm_with(&k, &plan.spectral)?.spectral_norm;
            let ys = trial_labelings(p.n, derive_seed(seed, &[1]));
            let alphas = ys
                .iter()
                .map(|y| solve_shifted(&k, lambda, y).map(|(a, _, _)| a))
                .collect::<Result<Vec<_>>>()?;
            let unit =
                crate::attack::draw_noise(&NoiseSpec::uniform(1.0, derive_seed(seed, &[2])), p.n)?;
            let mut out = Vec::with_capacity(betas.len());
            for (beta_index, spec) in betas.iter().enumerate() {
                let beta = spec.resolve(k_norm, lambda);
                let mut worst = 0;
                for (y, alpha) in ys.iter().zip(&alphas) {
                    let released: Vec<f64> =
                        alpha.iter().zip(&unit).map(|(a, u)| a + beta * u).collect();
                    let y_hat = reconstruct_matrix(&k, lambda, &released)?;
                    let h = y.iter().zip(&y_hat).filter(|(a, b)| a != b).count();
                    worst = worst.max(h);
                }
                out.push(PrivacyTrial {
                    n: p.n,
                    d: p.d,
                    beta_index,
                    trial,
                    seed,
                    beta,
                    hamming: worst,
                    recovered_fraction: 1.0 - worst as f64 / p.n as f64,
                    lemma_bound: lemma_bound(k_norm, lambda, beta, p.n).min(p.n as f64),
                    spectral_norm: k_norm,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trials: Vec<PrivacyTrial> = per_task.into_iter().flatten().collect();
    trials.sort_by_key(|t| (t.n, t.d, t.beta_index, t.trial));
    Ok(trials)
}

pub fn summarize_privacy(trials: &[PrivacyTrial], betas: &[BetaSpec]) -> Vec<PrivacySummary> {
    let mut out = Vec::new();
    for group in trials.chunk_by(|a, b| (a.n, a.d, a.beta_index) == (b.n, b.d, b.beta_index)) {
        let first = &group[0];
        let mut h: Vec<usize> = group.iter().map(|t| t.hamming).collect();
        h.sort_unstable();
        let m = h.len();
        let median = if m % 2 == 1 {
            h[m / 2] as f64
        } else {
            (h[m / 2 - 1] + h[m / 2]) as f64 / 2.0
        };
        out.push(PrivacySummary {
            n: first.n,
            d: first.d,
            beta: betas
                .get(first.beta_index)
                .map_or_else(|| first.beta.to_string(), |b| b.to_string()),
            trials: m,
            median_hamming: median,
            max_hamming: h[m - 1],
            min_recovered_fraction: group
                .iter()
                .map(|t| t.recovered_fraction)
                .fold(1.0, f64::min),
            lemma_bound: group.iter().map(|t| t.lemma_bound).fold(0.0, f64::max),
        });
    }
    out
}

pub fn write_privacy_csv<W: Write>(out: W, summary: &[PrivacySummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "d",
        "beta",
        "median_hamming",
        "lemma_bound",
        "max_hamming",
        "min_recovered_fraction",
    ])?;
    for s in summary {
        w.write_record([
            s.n.to_string(),
            s.d.to_string(),
            s.beta.clone(),
            s.median_hamming.to_string(),
            s.lemma_bound.to_string(),
            s.max_hamming.to_string(),
            s.min_recovered_fraction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
