//! Multinomial sampling and large-sample checks of the estimators.
//!
//! Replicate `r` of a study draws from `ChaCha8Rng::seed_from_u64(seed)` with
//! its stream set to `r`, so reports do not depend on thread count or
//! scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::asymptotics::{exact_covariances, plug_in_covariances};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::param_basis::BasisBundle;
use crate::projection::copula_array;
use crate::stats::{fit_copula, normal_quantile, wald, yule_coefficient, yule_variance, InferenceOptions};
use crate::tensor::{CountArray, ProbabilityArray, SupportSet, COMPUTED_ZERO_TOL};

/// Multinomial(n, vec(truth)) draw by sequential conditional binomials.
pub fn sample_counts<R: Rng + ?Sized>(truth: &ProbabilityArray, n: u64, rng: &mut R) -> CountArray {
    let probs = truth.values();
    let mut counts = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() || p >= mass {
            counts[k] = left;
            break;
        }
        if p > 0.0 {
            let draw = Binomial::new(left, (p / mass).clamp(0.0, 1.0))
                .map(|b| b.sample(rng))
                .unwrap_or(0);
            counts[k] = draw;
            left -= draw;
        }
        mass -= p;
    }
    CountArray::new(truth.shape().clone(), counts).expect("shape matches truth")
}

/// Generator for replicate `index` of a study seeded with `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Serialize)]
pub struct SimScenario {
    pub truth: ProbabilityArray,
    pub n: u64,
    pub replicates: usize,
    pub seed: u64,
    /// Level of the Υ intervals whose coverage is recorded.
    pub ci_level: f64,
    /// Nominal size of the quasi-independence test.
    pub test_size: f64,
}

impl SimScenario {
    pub fn new(truth: ProbabilityArray, n: u64, replicates: usize, seed: u64) -> Result<Self> {
        if n == 0 || replicates == 0 {
            return Err(Error::Domain("n and replicates must both be at least 1".into()));
        }
        Ok(SimScenario { truth, n, replicates, seed, ci_level: 0.95, test_size: 0.05 })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub n: u64,
    pub replicates: usize,
    pub seed: u64,
    /// `‖S − Σ_γ‖_F / ‖Σ_γ‖_F` for the sample covariance `S` of `√n(γ̂ − γ_p)`.
    pub covariance_rel_error: f64,
    /// Kolmogorov distance to N(0,1) of each standardised support coordinate.
    pub ks_distances: Vec<f64>,
    pub max_ks_distance: f64,
    /// Share of Υ intervals containing Υ(γ_p); two-way tables only.
    pub upsilon_coverage: Option<f64>,
    /// Share of replicates in which the quasi-independence test rejects.
    pub rejection_rate: Option<f64>,
    pub mean_statistic: Option<f64>,
}

struct Replicate {
    deviation: Vec<f64>,
    covered: Option<bool>,
    statistic: Option<(f64, bool)>,
}

/// Repeats the estimation pipeline on samples from `scn.truth` and compares
/// the spread of `γ̂` with the asymptotic covariance.
pub fn clt_study(scn: &SimScenario, basis: &BasisBundle, opts: &InferenceOptions) -> Result<CltReport> {
    let support = scn.truth.support(0.0);
    if &support != basis.support() {
        return Err(Error::DimensionMismatch("basis support differs from the support of the truth".into()));
    }
    let gamma_p = copula_array(&scn.truth, &opts.ipf)?.array;
    let sigma = exact_covariances(basis, &scn.truth, &gamma_p)?.sigma_gamma;
    let bivariate = scn.truth.shape().ndim() == 2;
    let dims = scn.truth.shape().dims().to_vec();
    let upsilon_true = if bivariate { Some(yule_coefficient(&gamma_p)?) } else { None };
    let z = normal_quantile(0.5 + scn.ci_level / 2.0)?;
    let root_n = (scn.n as f64).sqrt();

    let reps: Vec<Replicate> = (0..scn.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(scn.seed, r);
            let counts = sample_counts(&scn.truth, scn.n, &mut rng);
            let fit = fit_copula(&counts, &support, opts)?;
            let deviation = fit
                .gamma_hat
                .values()
                .iter()
                .zip(gamma_p.values())
                .map(|(a, b)| root_n * (a - b))
                .collect();
            let cov = plug_in_covariances(basis, &fit.p_hat, &fit.gamma_hat)?;
            let covered = upsilon_true
                .map(|truth| -> Result<bool> {
                    let y = yule_coefficient(&fit.gamma_hat)?;
                    let se = (yule_variance(&cov.sigma_gamma, dims[0], dims[1]) / scn.n as f64).sqrt();
                    Ok((y - truth).abs() <= z * se)
                })
                .transpose()?;
            let statistic = if basis.d_circ() > 0 {
                let test = wald(basis.theta_of_gamma(&fit.gamma_hat)?, &cov, scn.n)?;
                Some((test.statistic, test.p_value < scn.test_size))
            } else {
                None
            };
            Ok(Replicate { deviation, covered, statistic })
        })
        .collect::<Result<Vec<_>>>()?;

    let m = reps.len() as f64;
    let cells = sigma.nrows();
    let mut mean = vec![0.0; cells];
    for r in &reps {
        for (acc, v) in mean.iter_mut().zip(&r.deviation) {
            *acc += v / m;
        }
    }
    let mut sample = DenseMatrix::zeros(cells, cells);
    for r in &reps {
        let c = DenseMatrix::from_iterator(cells, 1, r.deviation.iter().zip(&mean).map(|(v, mu)| v - mu));
        sample += &c * c.transpose();
    }
    sample /= m - 1.0;
    let covariance_rel_error = (&sample - &sigma).norm() / sigma.norm();

    let normal = Normal::standard();
    let ks_distances: Vec<f64> = (0..cells)
        .filter(|&i| sigma[(i, i)] > COMPUTED_ZERO_TOL)
        .map(|i| {
            let sd = sigma[(i, i)].sqrt();
            let mut zs: Vec<f64> = reps.iter().map(|r| r.deviation[i] / sd).collect();
            zs.sort_by(f64::total_cmp);
            zs.iter()
                .enumerate()
                .map(|(k, &x)| {
                    let f = normal.cdf(x);
                    (f - k as f64 / m).abs().max(((k + 1) as f64 / m - f).abs())
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let max_ks_distance = ks_distances.iter().copied().fold(0.0, f64::max);

    let share = |hits: usize| hits as f64 / m;
    let upsilon_coverage = upsilon_true.map(|_| share(reps.iter().filter(|r| r.covered == Some(true)).count()));
    let (rejection_rate, mean_statistic) = if basis.d_circ() > 0 {
        let rejected = reps.iter().filter(|r| matches!(r.statistic, Some((_, true)))).count();
        let mean_t = reps.iter().filter_map(|r| r.statistic.map(|s| s.0)).sum::<f64>() / m;
        (Some(share(rejected)), Some(mean_t))
    } else {
        (None, None)
    };

    Ok(CltReport {
        n: scn.n,
        replicates: scn.replicates,
        seed: scn.seed,
        covariance_rel_error,
        ks_distances,
        max_ks_distance,
        upsilon_coverage,
        rejection_rate,
        mean_statistic,
    })
}

/// Median over replicates of `max_i |γ̂_i − γ_{p,i}|`, for each sample size.
pub fn consistency_sweep(
    truth: &ProbabilityArray,
    sizes: &[u64],
    replicates: usize,
    seed: u64,
    opts: &InferenceOptions,
) -> Result<Vec<(u64, f64)>> {
    let gamma_p = copula_array(truth, &opts.ipf)?.array;
    let support: SupportSet = truth.support(0.0);
    sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let mut errors = (0..replicates as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replicate_rng(seed.wrapping_add(k as u64), r);
                    let counts = sample_counts(truth, n, &mut rng);
                    let fit = fit_copula(&counts, &support, opts)?;
                    Ok(fit.gamma_hat.max_abs_diff(&gamma_p))
                })
                .collect::<Result<Vec<f64>>>()?;
            errors.sort_by(f64::total_cmp);
            let mid = errors.len() / 2;
            let median = if errors.len() % 2 == 1 { errors[mid] } else { 0.5 * (errors[mid - 1] + errors[mid]) };
            Ok((n, median))
        })
        .collect()
}
