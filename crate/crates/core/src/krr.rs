//! Closed-form kernel ridge regression, α* = (K + λI)⁻¹ y.
//!
//! λ is the coefficient that appears in K + λI. The empirical objective with a
//! 1/n-scaled loss corresponds to regularization λ/n in that convention; see
//! [`objective`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{build_kernel_matrix, kernel_eval, KernelMatrix, KernelSpec};
use crate::matrix::{axpy, dot, norm2, Matrix};
use crate::sampling::SampleSet;

/// Required relative residual ‖(K+λI)α − y‖ / ‖y‖.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Cholesky,
    Minres,
}

#[derive(Clone, Debug)]
pub struct RidgeModel {
    lambda: f64,
    alpha: Vec<f64>,
    support: SampleSet,
    spec: KernelSpec,
    method: SolveMethod,
    relative_residual: f64,
}

impl RidgeModel {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn support(&self) -> &SampleSet {
        &self.support
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    pub fn relative_residual(&self) -> f64 {
        self.relative_residual
    }

    pub fn export(&self) -> ModelExport {
        ModelExport {
            lambda: self.lambda,
            spec: self.spec,
            alpha: self.alpha.clone(),
            support_seed: self.support.seed(),
        }
    }
}

/// JSON form of a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub lambda: f64,
    pub spec: KernelSpec,
    pub alpha: Vec<f64>,
    #[serde(rename = "seed-of-support")]
    pub support_seed: Option<u64>,
}

pub fn fit(samples: &SampleSet, y: &[f64], spec: &KernelSpec, lambda: f64) -> Result<RidgeModel> {
    check_lambda(lambda)?;
    let k = build_kernel_matrix(samples, spec)?;
    fit_with_kernel(samples, &k, y, lambda)
}

/// Fits against an already built kernel matrix of `samples`.
pub fn fit_with_kernel(
    samples: &SampleSet,
    k: &KernelMatrix,
    y: &[f64],
    lambda: f64,
) -> Result<RidgeModel> {
    check_lambda(lambda)?;
    if k.n() != samples.len() {
        return Err(invalid("kernel matrix does not match the sample set"));
    }
    let (alpha, method, relative_residual) = solve_shifted(k.entries(), lambda, y)?;
    Ok(RidgeModel {
        lambda,
        alpha,
        support: samples.clone(),
        spec: *k.spec(),
        method,
        relative_residual,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Solves (K + λI) x = y. Tries Cholesky first; an indefinite shifted matrix
/// falls through to MINRES.
pub fn solve_shifted(k: &Matrix, lambda: f64, y: &[f64]) -> Result<(Vec<f64>, SolveMethod, f64)> {
    if !k.is_square() || k.rows() != y.len() {
        return Err(invalid(format!(
            "label vector has length {}, expected {}",
            y.len(),
            k.rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("labels must be finite"));
    }
    let ynorm = norm2(y);
    if ynorm == 0.0 {
        return Ok((vec![0.0; y.len()], SolveMethod::Cholesky, 0.0));
    }
    if let Some(chol) = ShiftedCholesky::factor(k, lambda) {
        let x = chol.solve_refined(k, lambda, y);
        let rel = relative_residual(k, lambda, &x, y);
        if rel <= SOLVE_TOLERANCE {
            return Ok((x, SolveMethod::Cholesky, rel));
        }
        log::debug!("cholesky residual {rel:e} above tolerance, trying MINRES");
    }
    let x = minres_refined(k, lambda, y);
    let rel = relative_residual(k, lambda, &x, y);
    if rel <= SOLVE_TOLERANCE {
        Ok((x, SolveMethod::Minres, rel))
    } else {
        Err(Error::SolverFailure { residual: rel })
    }
}

pub fn relative_residual(k: &Matrix, lambda: f64, x: &[f64], y: &[f64]) -> f64 {
    let mut r = k.shifted_matvec(lambda, x);
    axpy(-1.0, y, &mut r);
    let yn = norm2(y);
    if yn == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / yn
    }
}

/// Lower Cholesky factor L of K + λI, L Lᵀ = K + λI.
#[derive(Clone, Debug)]
pub struct ShiftedCholesky {
    n: usize,
    l: Vec<f64>,
}

impl ShiftedCholesky {
    /// `None` when a pivot is not strictly positive (K + λI not positive definite).
    pub fn factor(k: &Matrix, lambda: f64) -> Option<Self> {
        let n = k.rows();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let row_j = &l[j * n..j * n + j];
            let pivot = k.get(j, j) + lambda - dot(row_j, row_j);
            if !(pivot > 0.0) || !pivot.is_finite() {
                return None;
            }
            let ljj = pivot.sqrt();
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let s = k.get(i, j) - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                l[i * n + j] = s / ljj;
            }
        }
        Some(Self { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            let s = dot(&self.l[i * n..i * n + i], &z[..i]);
            z[i] = (z[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n)
                .zip(&z[i + 1..])
                .map(|(j, zj)| self.l[j * n + i] * zj)
                .sum();
            z[i] = (z[i] - s) / self.l[i * n + i];
        }
        z
    }

    /// Solve followed by up to three rounds of iterative refinement.
    pub fn solve_refined(&self, k: &Matrix, lambda: f64, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        for _ in 0..3 {
            if relative_residual(k, lambda, &x, b) <= 0.1 * SOLVE_TOLERANCE {
                break;
            }
            let mut r = k.shifted_matvec(lambda, &x);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            let dx = self.solve(&r);
            axpy(1.0, &dx, &mut x);
        }
        x
    }
}

/// MINRES restarted on the residual a few times.
fn minres_refined(k: &Matrix, lambda: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    for _ in 0..4 {
        let mut r = k.shifted_matvec(lambda, &x);
        r.iter_mut().zip(y).for_each(|(ri, yi)| *ri = yi - *ri);
        if norm2(&r) <= 0.1 * SOLVE_TOLERANCE * norm2(y) {
            break;
        }
        let dx = minres(k, lambda, &r, 0.01 * SOLVE_TOLERANCE, 20 * n.max(10));
        axpy(1.0, &dx, &mut x);
    }
    x
}

/// Unpreconditioned MINRES for the symmetric (possibly indefinite) system
/// (K + λI) x = b.
fn minres(k: &Matrix, lambda: f64, b: &[f64], rtol: f64, max_iter: usize) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm2(b);
    if beta1 == 0.0 {
        return x;
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    for itn in 0..max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = k.shifted_matvec(lambda, &v);
        if itn > 0 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = norm2(&y);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);

        if phibar <= rtol * beta1 || beta == 0.0 {
            break;
        }
    }
    x
}

/// f(x) = Σᵢ αᵢ κ(x, xᵢ).
pub fn predict(model: &RidgeModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.support.dimension() {
        return Err(invalid(format!(
            "query has dimension {}, model expects {}",
            x.len(),
            model.support.dimension()
        )));
    }
    model
        .support
        .points()
        .zip(&model.alpha)
        .try_fold(0.0, |acc, (xi, &ai)| {
            Ok(acc + ai * kernel_eval(&model.spec, x, xi)?)
        })
}

/// (1/n)(‖y − Kα‖² + λ αᵀKα): the empirical ridge objective under the
/// representer form, with the penalty scaled so that its exact minimizer is
/// (K + λI)⁻¹ y.
pub fn objective(k: &Matrix, y: &[f64], alpha: &[f64], lambda: f64) -> f64 {
    let ka = k.matvec(alpha);
    let loss: f64 = y
        .iter()
        .zip(&ka)
        .map(|(yi, fi)| (yi - fi) * (yi - fi))
        .sum();
    let penalty = dot(alpha, &ka);
    (loss + lambda * penalty) / y.len() as f64
}
