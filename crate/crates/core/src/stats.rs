//! Inference built on the empirical copula array: Yule's concordance
//! coefficient with a normal confidence interval, and the Wald test of
//! quasi-independence.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma_ur;

use crate::asymptotics::{plug_in_covariances, CovarianceEstimate};
use crate::error::{Error, Result};
use crate::numerics::{solve_spd, DenseMatrix};
use crate::param_basis::{dependence_dimension, BasisBundle, ThetaVector};
use crate::projection::{copula_array, empirical_estimate, IpfConfig};
use crate::tensor::{Array, CountArray, ProbabilityArray, SupportSet};

/// Largest margin deviation accepted by [`yule_coefficient`].
pub const UNIFORM_MARGIN_TOL: f64 = 1e-8;

/// Knobs shared by the inference pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InferenceOptions {
    pub ipf: IpfConfig,
    /// Mix the relative frequencies with the quasi-uniform array.
    pub smoothing: bool,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions { ipf: IpfConfig::default(), smoothing: true }
    }
}

/// Estimated probability array and its copula array.
#[derive(Debug, Clone, Serialize)]
pub struct CopulaFit {
    pub n: u64,
    pub p_hat: ProbabilityArray,
    pub gamma_hat: ProbabilityArray,
    pub sweeps: usize,
    pub margin_error: f64,
}

/// Counts → `p̂_n` → `γ̂_n`.
pub fn fit_copula(counts: &CountArray, support: &SupportSet, opts: &InferenceOptions) -> Result<CopulaFit> {
    let p_hat = empirical_estimate(counts, support, opts.smoothing)?;
    let out = copula_array(&p_hat, &opts.ipf)?;
    Ok(CopulaFit {
        n: counts.total(),
        p_hat,
        gamma_hat: out.array,
        sweeps: out.sweeps_used,
        margin_error: out.final_margin_error,
    })
}

/// `κ = 12 / √((r₁² − 1)(r₂² − 1))`.
pub fn yule_kappa(r1: usize, r2: usize) -> f64 {
    let (a, b) = (r1 as f64, r2 as f64);
    12.0 / ((a * a - 1.0) * (b * b - 1.0)).sqrt()
}

/// `vec((1..r₂) ⊗ (1..r₁))`: entry `i₁ i₂` at the cell `(i₁, i₂)`.
pub fn yule_scores(r1: usize, r2: usize) -> Vec<f64> {
    (1..=r2)
        .flat_map(|i2| (1..=r1).map(move |i1| (i1 * i2) as f64))
        .collect()
}

fn yule_offset(r1: usize, r2: usize) -> f64 {
    let (a, b) = (r1 as f64, r2 as f64);
    3.0 * ((a + 1.0) * (b + 1.0)).sqrt() / ((a - 1.0) * (b - 1.0)).sqrt()
}

fn check_bivariate(a: &Array) -> Result<(usize, usize)> {
    match a.shape().dims() {
        &[r1, r2] => Ok((r1, r2)),
        dims => Err(Error::Domain(format!(
            "Yule's coefficient needs a two-way table, got {} axes",
            dims.len()
        ))),
    }
}

/// Yule's concordance coefficient of a bivariate copula array.
pub fn yule_coefficient(gamma: &Array) -> Result<f64> {
    let (r1, r2) = check_bivariate(gamma)?;
    for m in gamma.margins() {
        let r = m.values.len() as f64;
        if let Some(v) = m.values.iter().find(|v| (**v - 1.0 / r).abs() > UNIFORM_MARGIN_TOL) {
            return Err(Error::Domain(format!(
                "axis {} margin {v} is not uniform; project onto uniform margins first",
                m.axis + 1
            )));
        }
    }
    let contraction: f64 = yule_scores(r1, r2).iter().zip(gamma.values()).map(|(s, g)| s * g).sum();
    Ok(yule_kappa(r1, r2) * contraction - yule_offset(r1, r2))
}

/// `κ² sᵀ Σ_γ s`, the asymptotic variance of `√n (Υ̂ − Υ)`.
pub fn yule_variance(sigma_gamma: &DenseMatrix, r1: usize, r2: usize) -> f64 {
    let s = DenseMatrix::from_column_slice(r1 * r2, 1, &yule_scores(r1, r2));
    let k = yule_kappa(r1, r2);
    k * k * (s.transpose() * sigma_gamma * &s)[(0, 0)]
}

#[derive(Debug, Clone, Serialize)]
pub struct YuleEstimate {
    pub upsilon: f64,
    pub variance: f64,
    pub std_error: f64,
    pub ci_level: f64,
    pub ci: (f64, f64),
    pub n: u64,
    pub kappa: f64,
    /// `sᵀ Σ̂_γ s` before scaling by `κ²`.
    pub contraction: f64,
    pub z: f64,
}

/// Point estimate, plug-in variance and symmetric normal interval for Υ.
///
/// Uses the sign-alternating basis for full supports and the computed
/// orthonormal basis otherwise; the variance does not depend on this.
pub fn yule_inference(
    counts: &CountArray,
    support: &SupportSet,
    ci_level: f64,
    opts: &InferenceOptions,
) -> Result<YuleEstimate> {
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::Domain(format!("confidence level {ci_level} outside (0, 1)")));
    }
    let fit = fit_copula(counts, support, opts)?;
    let (r1, r2) = check_bivariate(&fit.gamma_hat)?;
    let basis = if support.is_full() {
        BasisBundle::canonical(support.shape())
    } else {
        BasisBundle::from_support(support, &opts.ipf)?
    };
    yule_from_fit(&fit, &basis, ci_level, r1, r2)
}

fn yule_from_fit(fit: &CopulaFit, basis: &BasisBundle, ci_level: f64, r1: usize, r2: usize) -> Result<YuleEstimate> {
    let upsilon = yule_coefficient(&fit.gamma_hat)?;
    let cov = plug_in_covariances(basis, &fit.p_hat, &fit.gamma_hat)?;
    let variance = yule_variance(&cov.sigma_gamma, r1, r2);
    let kappa = yule_kappa(r1, r2);
    let std_error = (variance / fit.n as f64).sqrt();
    let z = normal_quantile(0.5 + ci_level / 2.0)?;
    Ok(YuleEstimate {
        upsilon,
        variance,
        std_error,
        ci_level,
        ci: (upsilon - z * std_error, upsilon + z * std_error),
        n: fit.n,
        kappa,
        contraction: variance / (kappa * kappa),
        z,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct QuasiIndepTest {
    pub theta_hat: ThetaVector,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub n: u64,
    pub condition: f64,
}

/// Wald test of `θ = 0`: `t = n θ̂ᵀ Σ̂_θ⁻¹ θ̂` against `χ²_{d∘}`.
///
/// `basis` overrides the computed orthonormal basis; its support must equal
/// `support`.
pub fn quasi_independence_test(
    counts: &CountArray,
    support: &SupportSet,
    basis: Option<&BasisBundle>,
    opts: &InferenceOptions,
) -> Result<QuasiIndepTest> {
    if dependence_dimension(support) == 0 {
        return Err(Error::DegenerateTest);
    }
    let owned;
    let basis = match basis {
        Some(b) => {
            if b.support() != support {
                return Err(Error::DimensionMismatch("basis was built for a different support".into()));
            }
            b
        }
        None => {
            owned = BasisBundle::from_support(support, &opts.ipf)?;
            &owned
        }
    };
    let fit = fit_copula(counts, support, opts)?;
    let theta_hat = basis.theta_of_gamma(&fit.gamma_hat)?;
    let cov = plug_in_covariances(basis, &fit.p_hat, &fit.gamma_hat)?;
    wald(theta_hat, &cov, fit.n)
}

pub(crate) fn wald(theta_hat: ThetaVector, cov: &CovarianceEstimate, n: u64) -> Result<QuasiIndepTest> {
    let t = DenseMatrix::from_column_slice(theta_hat.len(), 1, theta_hat.values());
    let statistic = (n as f64 * (t.transpose() * solve_spd(&cov.sigma_theta, &t)?)[(0, 0)]).max(0.0);
    let dof = theta_hat.len();
    Ok(QuasiIndepTest {
        p_value: chi_square_upper_tail(statistic, dof),
        theta_hat,
        statistic,
        dof,
        n,
        condition: cov.condition,
    })
}

/// `P(χ²_k > x)`.
pub fn chi_square_upper_tail(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(k as f64 / 2.0, x / 2.0)
}

/// Standard normal quantile.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level {q} outside (0, 1)")));
    }
    Ok(Normal::standard().inverse_cdf(q))
}
