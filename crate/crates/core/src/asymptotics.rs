//! Jacobians of the copula map and the sandwich covariances built from them.
//!
//! With `Ã = R_S A_S`, `B = Ãᵀ D⁻¹(Rγ_p) Ã` and `M = Ãᵀ D⁻¹(Rp) Ã`:
//!
//! * `J_θ = B⁻¹ Ãᵀ D⁻¹(Rp) R`, `J_γ = A_S J_θ`
//! * `Σ_θ = B⁻¹ M B⁻¹`, `Σ_γ = A_S Σ_θ A_Sᵀ`
//!
//! `Σ_γ` and `J_γ` do not depend on which basis of the dependence space is
//! used; `Σ_θ` and `J_θ` transform with it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{condition_number, solve_spd, DenseMatrix};
use crate::param_basis::BasisBundle;
use crate::tensor::{Array, ProbabilityArray};

/// Whether a covariance was evaluated at the true `p` or at an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Exact,
    PlugIn,
}

#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    /// `d∘ × d∘`.
    pub sigma_theta: DenseMatrix,
    /// `∏r_ℓ × ∏r_ℓ`, zero on rows and columns outside the support.
    pub sigma_gamma: DenseMatrix,
    pub kind: CovarianceKind,
    /// Eigenvalue condition number of the bread matrix `B`.
    pub condition: f64,
}

// Support entries of `a`, checked strictly positive.
fn on_support(b: &BasisBundle, a: &Array, what: &str) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!("{what} has the wrong shape")));
    }
    b.support()
        .offsets()
        .into_iter()
        .map(|o| {
            let v = a.values()[o];
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::Domain(format!(
                    "{what} is not positive at support cell {}",
                    a.shape().index_of(o)
                )))
            }
        })
        .collect()
}

// Ãᵀ D⁻¹(v) Ã
fn weighted_gram(a_tilde: &DenseMatrix, v: &[f64]) -> DenseMatrix {
    let mut scaled = a_tilde.clone();
    for (i, &vi) in v.iter().enumerate() {
        scaled.row_mut(i).scale_mut(1.0 / vi);
    }
    a_tilde.transpose() * scaled
}

struct Pieces {
    bread: DenseMatrix,
    p_s: Vec<f64>,
}

fn pieces(b: &BasisBundle, p: &ProbabilityArray, gamma_p: &ProbabilityArray) -> Result<Pieces> {
    if b.d_circ() == 0 {
        return Err(Error::DegenerateTest);
    }
    let p_s = on_support(b, p, "p")?;
    let g_s = on_support(b, gamma_p, "copula array")?;
    Ok(Pieces { bread: weighted_gram(b.a_tilde(), &g_s), p_s })
}

/// `J_θ(p)`, a `d∘ × ∏r_ℓ` matrix; columns outside the support are zero.
pub fn jacobian_theta(
    b: &BasisBundle,
    p: &ProbabilityArray,
    gamma_p: &ProbabilityArray,
) -> Result<DenseMatrix> {
    let Pieces { bread, p_s } = pieces(b, p, gamma_p)?;
    let mut rhs = b.a_tilde().transpose();
    for (k, &pk) in p_s.iter().enumerate() {
        rhs.column_mut(k).scale_mut(1.0 / pk);
    }
    let reduced = solve_spd(&bread, &rhs)?;
    let mut j = DenseMatrix::zeros(b.d_circ(), b.shape().len());
    for (k, o) in b.support().offsets().into_iter().enumerate() {
        j.set_column(o, &reduced.column(k));
    }
    Ok(j)
}

/// `J_γ(p) = A_S J_θ(p)`.
pub fn jacobian_gamma(
    b: &BasisBundle,
    p: &ProbabilityArray,
    gamma_p: &ProbabilityArray,
) -> Result<DenseMatrix> {
    Ok(b.a_matrix() * jacobian_theta(b, p, gamma_p)?)
}

fn sandwich(
    b: &BasisBundle,
    p: &ProbabilityArray,
    gamma_p: &ProbabilityArray,
    kind: CovarianceKind,
) -> Result<CovarianceEstimate> {
    let Pieces { bread, p_s } = pieces(b, p, gamma_p)?;
    let meat = weighted_gram(b.a_tilde(), &p_s);
    let half = solve_spd(&bread, &meat)?;
    let s = solve_spd(&bread, &half.transpose())?;
    let sigma_theta = (&s + s.transpose()) * 0.5;
    let sigma_gamma = b.a_matrix() * &sigma_theta * b.a_matrix().transpose();
    let sigma_gamma = (&sigma_gamma + sigma_gamma.transpose()) * 0.5;
    Ok(CovarianceEstimate { sigma_theta, sigma_gamma, kind, condition: condition_number(&bread) })
}

/// Asymptotic covariances of `√n(θ̂ − θ)` and `√n(γ̂ − γ)` at a known `p`.
pub fn exact_covariances(
    b: &BasisBundle,
    p: &ProbabilityArray,
    gamma_p: &ProbabilityArray,
) -> Result<CovarianceEstimate> {
    sandwich(b, p, gamma_p, CovarianceKind::Exact)
}

/// The same sandwich evaluated at the estimates `(p̂_n, γ̂_n)`.
pub fn plug_in_covariances(
    b: &BasisBundle,
    p_hat: &ProbabilityArray,
    gamma_hat: &ProbabilityArray,
) -> Result<CovarianceEstimate> {
    sandwich(b, p_hat, gamma_hat, CovarianceKind::PlugIn)
}

/// `Σ_θ` alone.
pub fn sigma_theta(b: &BasisBundle, p: &ProbabilityArray, gamma_p: &ProbabilityArray) -> Result<DenseMatrix> {
    Ok(exact_covariances(b, p, gamma_p)?.sigma_theta)
}

/// `Σ_γ` alone.
pub fn sigma_gamma(b: &BasisBundle, p: &ProbabilityArray, gamma_p: &ProbabilityArray) -> Result<DenseMatrix> {
    Ok(exact_covariances(b, p, gamma_p)?.sigma_gamma)
}

/// `diag(p) − p pᵀ`.
pub fn multinomial_covariance(p: &ProbabilityArray) -> DenseMatrix {
    let v = p.values();
    DenseMatrix::from_fn(v.len(), v.len(), |i, j| if i == j { v[i] - v[i] * v[j] } else { -v[i] * v[j] })
}
