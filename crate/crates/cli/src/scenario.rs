//! Simulation scenario files.
//!
//! ```json
//! {"truth": {"dims": [3, 3], "weights": [...φ-order...]},
//!  "n": 10000, "replicates": 2000, "seed": 1,
//!  "ci_level": 0.95, "test_size": 0.05, "null": false}
//! ```
//!
//! `weights` may be probabilities or counts; they are normalised. With
//! `null` set, the truth is replaced by the quasi-independence copula array
//! on the support of the weights.

use discopula::montecarlo::SimScenario;
use discopula::projection::{quasi_independence_array, IpfConfig};
use discopula::tensor::{ProbabilityArray, Shape};
use discopula::Error;
use serde::Deserialize;

use crate::report::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Truth {
    dims: Vec<usize>,
    weights: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    truth: Truth,
    n: u64,
    replicates: usize,
    #[serde(default)]
    seed: u64,
    ci_level: Option<f64>,
    test_size: Option<f64>,
    #[serde(default)]
    null: bool,
}

pub struct Scenario {
    pub sim: SimScenario,
    pub null: bool,
}

pub fn parse(text: &str, seed: Option<u64>, ipf: &IpfConfig) -> Result<Scenario, CliError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let shape = Shape::new(file.truth.dims)?;
    if file.truth.weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Domain("truth weights must be nonnegative".into()).into());
    }
    let mut truth = ProbabilityArray::from_weights(shape, file.truth.weights)?;
    truth.check_in_p()?;
    if file.null {
        truth = quasi_independence_array(&truth.support(0.0), ipf)?;
    }
    let mut sim = SimScenario::new(truth, file.n, file.replicates, seed.unwrap_or(file.seed))?;
    for (value, what) in [(file.ci_level, "ci_level"), (file.test_size, "test_size")] {
        if value.is_some_and(|v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::Domain(format!("{what} must lie in (0, 1)")).into());
        }
    }
    sim.ci_level = file.ci_level.unwrap_or(sim.ci_level);
    sim.test_size = file.test_size.unwrap_or(sim.test_size);
    Ok(Scenario { sim, null: file.null })
}
