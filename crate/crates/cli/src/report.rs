//! JSON report assembly and the error object.

use discopula::io::TableDocument;
use discopula::montecarlo::clt_study;
use discopula::param_basis::{
    build_constraint_matrix, dependence_dimension, parse_matrix_text, BasisBundle,
};
use discopula::stats::{fit_copula, quasi_independence_test, yule_inference, InferenceOptions};
use discopula::tensor::Array;
use discopula::Error;
use serde_json::{json, Value};

use crate::scenario::Scenario;

/// Exit status for malformed flags or environment.
pub const EXIT_USAGE: u8 = 2;
/// Unreadable or invalid input documents.
pub const EXIT_INPUT: u8 = 3;
/// The support admits no copula array, or IPF did not finish.
pub const EXIT_INFEASIBLE: u8 = 4;
/// Estimation or testing failed on valid input.
pub const EXIT_ESTIMATION: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub detail: Option<Value>,
    pub exit_code: u8,
}

impl CliError {
    pub fn io(message: String) -> Self {
        CliError { kind: "io".into(), message, detail: None, exit_code: EXIT_INPUT }
    }

    pub fn usage(message: String) -> Self {
        CliError { kind: "usage".into(), message, detail: None, exit_code: EXIT_USAGE }
    }

    pub fn to_json(&self) -> Value {
        let mut obj = json!({ "kind": self.kind, "message": self.message });
        if let Some(detail) = &self.detail {
            obj["detail"] = detail.clone();
        }
        json!({ "error": obj })
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let exit_code = match &err {
            Error::Parse { .. }
            | Error::SupportContradiction { .. }
            | Error::DimensionMismatch(_)
            | Error::Range(_) => EXIT_INPUT,
            Error::NoFeasibleProjection(_) | Error::MaxSweepsExceeded { .. } => EXIT_INFEASIBLE,
            _ => EXIT_ESTIMATION,
        };
        let detail = match &err {
            Error::NoFeasibleProjection(info) => Some(json!(info)),
            Error::NotInP(violations) => Some(json!(violations)),
            Error::Parse { line, .. } => Some(json!({ "line": line })),
            Error::SupportContradiction { cell, count } => Some(json!({ "cell": cell, "count": count })),
            _ => None,
        };
        CliError { kind: err.kind().into(), message: err.to_string(), detail, exit_code }
    }
}

/// Dims, φ-order values, and for two-way arrays the matrix rows.
fn array_json(a: &Array) -> Value {
    let dims = a.shape().dims();
    let mut obj = json!({ "dims": dims, "values": a.values() });
    if let &[r1, r2] = dims {
        let rows: Vec<Vec<f64>> = (0..r1).map(|i| (0..r2).map(|j| a.values()[i + r1 * j]).collect()).collect();
        obj["rows"] = json!(rows);
    }
    obj
}

fn table_json(doc: &TableDocument) -> Value {
    json!({
        "dims": doc.shape.dims(),
        "n": doc.n(),
        "structural_zeros": doc.structural_zeros,
        "labels": doc.labels,
    })
}

fn options_json(opts: &InferenceOptions) -> Value {
    json!({
        "smoothing": opts.smoothing,
        "ipf_tol": opts.ipf.margin_tol,
        "ipf_max_sweeps": opts.ipf.max_sweeps,
    })
}

fn p_hat_method(opts: &InferenceOptions) -> &'static str {
    if opts.smoothing {
        "relative frequencies mixed with the quasi-uniform array q on the support: (counts + q) / (n + 1)"
    } else {
        "relative frequencies counts / n on the support"
    }
}

const GAMMA_METHOD: &str =
    "I-projection of p_hat onto arrays with uniform margins, by iterative proportional fitting";

pub fn copula(doc: &TableDocument, opts: &InferenceOptions) -> Result<Value, CliError> {
    let support = doc.support();
    let fit = fit_copula(&doc.count_array(), &support, opts)?;
    Ok(json!({
        "command": "copula",
        "table": table_json(doc),
        "options": options_json(opts),
        "p_hat": array_json(&fit.p_hat),
        "gamma_hat": array_json(&fit.gamma_hat),
        "ipf": { "sweeps": fit.sweeps, "converged": true, "margin_error": fit.margin_error },
        "d_circ": dependence_dimension(&support),
        "feasibility": "feasible",
        "methods": {
            "p_hat": p_hat_method(opts),
            "gamma_hat": GAMMA_METHOD,
            "d_circ": "dimension of the kernel of the zero-cell and univariate-margin constraints on the support",
        },
    }))
}

pub fn yule(doc: &TableDocument, level: f64, opts: &InferenceOptions) -> Result<Value, CliError> {
    let est = yule_inference(&doc.count_array(), &doc.support(), level, opts)?;
    Ok(json!({
        "command": "yule",
        "table": table_json(doc),
        "options": options_json(opts),
        "estimate": est,
        "methods": {
            "p_hat": p_hat_method(opts),
            "gamma_hat": GAMMA_METHOD,
            "upsilon": "kappa * sum of i1 * i2 * gamma_hat over cells, minus 3 (r1 + 1)(r2 + 1) kappa / 12, with kappa = 12 / sqrt((r1^2 - 1)(r2^2 - 1))",
            "variance": "kappa^2 * s' Sigma_gamma s with scores s_i = i1 * i2 and Sigma_gamma the plug-in sandwich covariance of sqrt(n)(gamma_hat - gamma)",
            "ci": "upsilon +/- z * sqrt(variance / n), z the standard normal quantile at (1 + level) / 2",
        },
    }))
}

pub fn quasi_test(doc: &TableDocument, fixture: Option<&str>, opts: &InferenceOptions) -> Result<Value, CliError> {
    let support = doc.support();
    let basis = match fixture {
        Some(text) => Some(BasisBundle::from_fixture(&support, parse_matrix_text(text)?, &opts.ipf)?),
        None => None,
    };
    let test = quasi_independence_test(&doc.count_array(), &support, basis.as_ref(), opts)?;
    let source = basis.as_ref().map_or(json!("computed"), |b| json!(b.source()));
    Ok(json!({
        "command": "quasi-test",
        "table": table_json(doc),
        "options": options_json(opts),
        "basis": source,
        "test": test,
        "methods": {
            "p_hat": p_hat_method(opts),
            "gamma_hat": GAMMA_METHOD,
            "theta_hat": "coordinates of gamma_hat - gamma_q in the basis columns, with gamma_q the quasi-independence copula array",
            "statistic": "n * theta_hat' Sigma_theta^-1 theta_hat with the plug-in sandwich covariance Sigma_theta = B^-1 M B^-1",
            "p_value": "upper tail of the chi-square distribution with d_circ degrees of freedom",
        },
    }))
}

pub fn basis(doc: &TableDocument, canonical: bool, opts: &InferenceOptions) -> Result<Value, CliError> {
    let support = doc.support();
    let bundle = if canonical {
        if !support.is_full() {
            return Err(Error::Domain("the canonical basis needs a table without structural zeros".into()).into());
        }
        BasisBundle::canonical(&doc.shape)
    } else {
        BasisBundle::from_support(&support, &opts.ipf)?
    };
    let c = build_constraint_matrix(&support);
    let a = bundle.a_matrix();
    let rows: Vec<Value> = (0..a.nrows())
        .map(|o| json!({ "cell": doc.shape.index_of(o), "row": a.row(o).iter().collect::<Vec<_>>() }))
        .collect();
    Ok(json!({
        "command": "basis",
        "table": table_json(doc),
        "d_circ": bundle.d_circ(),
        "source": bundle.source(),
        "constraint_rows": c.rows,
        "a_matrix": rows,
        "gamma_q": array_json(bundle.gamma_q()),
        "methods": {
            "constraint_rows": "zero-cell rows in cell order, then one row per margin slice from the last axis to the first",
            "a_matrix": if canonical {
                "products of e_j - e_r contrasts over every set of at least two axes"
            } else {
                "orthonormal kernel of the constraint matrix from Householder QR with column pivoting"
            },
            "gamma_q": "copula array of the uniform array on the support",
        },
    }))
}

pub fn simulate(scn: &Scenario, opts: &InferenceOptions) -> Result<Value, CliError> {
    let support = scn.sim.truth.support(0.0);
    let basis = if support.is_full() {
        BasisBundle::canonical(support.shape())
    } else {
        BasisBundle::from_support(&support, &opts.ipf)?
    };
    let report = clt_study(&scn.sim, &basis, opts)?;
    Ok(json!({
        "command": "simulate",
        "scenario": {
            "dims": scn.sim.truth.shape().dims(),
            "n": scn.sim.n,
            "replicates": scn.sim.replicates,
            "seed": scn.sim.seed,
            "ci_level": scn.sim.ci_level,
            "test_size": scn.sim.test_size,
            "null": scn.null,
            "rng": "ChaCha8, stream i for replicate i, seeded with the scenario seed",
        },
        "options": options_json(opts),
        "d_circ": basis.d_circ(),
        "report": report,
        "methods": {
            "sampling": "multinomial counts drawn cell by cell through conditional binomials",
            "covariance_rel_error": "Frobenius distance between the sample covariance of sqrt(n)(gamma_hat - gamma) and the sandwich covariance at the truth, relative to the latter",
            "ks_distances": "Kolmogorov distance from N(0, 1) of each standardised support coordinate",
            "upsilon_coverage": "share of Yule intervals that contain the true coefficient",
            "rejection_rate": "share of replicates in which the quasi-independence test rejects at test_size",
        },
    }))
}
