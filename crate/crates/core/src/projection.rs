//! I-projection onto Fréchet classes by iterative proportional fitting.
//!
//! The central routine is [`ipf_project`]: it cycles through the axes,
//! rescaling every slice to its target mass, until all margins are within
//! tolerance. The copula array of `p` is the projection onto the class with
//! uniform margins ([`copula_array`]).
//!
//! When no array with the support of the input and the requested margins
//! exists, IPF never converges. Slow progress (or a slice with zero mass and
//! positive target) triggers a small linear program that decides whether the
//! class is empty and, if so, which cells every member of the closure is
//! forced to leave at zero.

use std::fmt;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::least_squares_residual;
use crate::tensor::{
    margin_of, Array, CountArray, MultiIndex, ProbabilityArray, Shape, SupportSet, MASS_TOL,
};

/// The margins `(q^{(1)}, …, q^{(d)})` defining a Fréchet class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrechetTarget {
    margins: Vec<Vec<f64>>,
}

impl FrechetTarget {
    /// Each margin must be strictly positive and sum to one.
    pub fn new(margins: Vec<Vec<f64>>) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::Domain("target needs at least one margin".into()));
        }
        for (l, m) in margins.iter().enumerate() {
            if m.len() < 2 {
                return Err(Error::Domain(format!("margin {} has fewer than 2 levels", l + 1)));
            }
            if m.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!("margin {} is not strictly positive", l + 1)));
            }
            let s: f64 = m.iter().sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::Domain(format!("margin {} sums to {s}", l + 1)));
            }
        }
        Ok(FrechetTarget { margins })
    }

    /// Uniform margins `u^{(ℓ)} = (1/r_ℓ, …, 1/r_ℓ)`.
    pub fn uniform(shape: &Shape) -> Self {
        let margins = shape.dims().iter().map(|&r| vec![1.0 / r as f64; r]).collect();
        FrechetTarget { margins }
    }

    /// The margins of `p`, which must all be positive.
    pub fn from_array(p: &Array) -> Result<Self> {
        let margins = p
            .margins()
            .into_iter()
            .map(|m| {
                let s: f64 = m.values.iter().sum();
                m.values.into_iter().map(|v| v / s).collect()
            })
            .collect();
        Self::new(margins)
    }

    pub fn margins(&self) -> &[Vec<f64>] {
        &self.margins
    }

    fn matches(&self, shape: &Shape) -> bool {
        self.margins.len() == shape.ndim()
            && self.margins.iter().zip(shape.dims()).all(|(m, &r)| m.len() == r)
    }
}

/// Stopping rules for [`ipf_project`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IpfConfig {
    /// Largest allowed absolute deviation of any margin entry from its target.
    pub margin_tol: f64,
    pub max_sweeps: usize,
    /// Number of sweeps over which the error must shrink by `stall_factor`.
    pub stall_window: usize,
    pub stall_factor: f64,
}

impl Default for IpfConfig {
    fn default() -> Self {
        IpfConfig { margin_tol: 1e-12, max_sweeps: 10_000, stall_window: 500, stall_factor: 1e-3 }
    }
}

impl IpfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin_tol > 0.0) {
            return Err(Error::Domain("margin_tol must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Domain("max_sweeps must be at least 1".into()));
        }
        if self.stall_window == 0 || !(0.0..1.0).contains(&self.stall_factor) {
            return Err(Error::Domain("stall_window must be >= 1 and stall_factor in [0,1)".into()));
        }
        Ok(())
    }
}

/// A converged projection.
#[derive(Debug, Clone, Serialize)]
pub struct IpfOutcome {
    pub array: ProbabilityArray,
    pub sweeps_used: usize,
    pub converged: bool,
    pub final_margin_error: f64,
    /// Cumulative per-axis, per-level scaling factors, so that
    /// `array_i = p_i ∏_ℓ scaling_log[ℓ][i_ℓ − 1]`.
    pub scaling_log: Vec<Vec<f64>>,
}

/// How a support fails to carry an array with the requested margins.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfeasibilityKind {
    /// No nonzero array on any subset of the support has the target margins.
    Exclusive,
    /// Arrays with the target margins exist only after zeroing these cells.
    Critical { forced_zero: Vec<MultiIndex> },
    /// A slice with positive target has no mass at all (1-based axis and level).
    ZeroSlice { axis: usize, level: usize },
}

/// Diagnostic attached to [`Error::NoFeasibleProjection`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Infeasibility {
    #[serde(flatten)]
    pub kind: InfeasibilityKind,
    pub sweeps: usize,
    pub margin_error: f64,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            InfeasibilityKind::Exclusive => write!(
                f,
                "exclusive regional dependence: no array on this support has the target margins"
            )?,
            InfeasibilityKind::Critical { forced_zero } => {
                write!(f, "critical regional dependence: cells ")?;
                for (k, c) in forced_zero.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, " must be zero in every array with the target margins")?;
            }
            InfeasibilityKind::ZeroSlice { axis, level } => {
                write!(f, "slice {level} of axis {axis} has zero mass but a positive target")?
            }
        }
        write!(f, " (after {} sweeps, margin error {:e})", self.sweeps, self.margin_error)
    }
}

/// `Σ_{i∈Supp(p)} q_i log(q_i/p_i)`, or `+∞` when `Supp(q) ⊄ Supp(p)`.
pub fn i_divergence(q: &Array, p: &Array) -> Result<f64> {
    if q.shape() != p.shape() {
        return Err(Error::Domain("i_divergence needs arrays of the same shape".into()));
    }
    let mut total = 0.0;
    for (&qi, &pi) in q.values().iter().zip(p.values()) {
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += qi * (qi / pi).ln();
    }
    Ok(total.max(0.0))
}

fn max_margin_error(shape: &Shape, x: &[f64], target: &FrechetTarget) -> f64 {
    let mut err: f64 = 0.0;
    for (axis, t) in target.margins.iter().enumerate() {
        for (m, t) in margin_of(shape, x, axis).iter().zip(t) {
            err = err.max((m - t).abs());
        }
    }
    err
}

/// I-projection of `p` onto the Fréchet class of `target`.
pub fn ipf_project(p: &ProbabilityArray, target: &FrechetTarget, cfg: &IpfConfig) -> Result<IpfOutcome> {
    cfg.validate()?;
    let shape = p.shape().clone();
    if !target.matches(&shape) {
        return Err(Error::DimensionMismatch("target margins do not match the array shape".into()));
    }
    let d = shape.ndim();
    let mut x = p.values().to_vec();
    let mut scaling: Vec<Vec<f64>> = shape.dims().iter().map(|&r| vec![1.0; r]).collect();
    let mut history: Vec<f64> = Vec::new();
    let mut lp_checked = false;
    let mut err = f64::INFINITY;

    for sweep in 1..=cfg.max_sweeps {
        for axis in 0..d {
            let current = margin_of(&shape, &x, axis);
            let want = &target.margins[axis];
            let mut factors = vec![0.0; current.len()];
            for (level, (&m, &t)) in current.iter().zip(want).enumerate() {
                if !(m > 0.0) {
                    return Err(Error::NoFeasibleProjection(Box::new(Infeasibility {
                        kind: InfeasibilityKind::ZeroSlice { axis: axis + 1, level: level + 1 },
                        sweeps: sweep,
                        margin_error: max_margin_error(&shape, &x, target),
                    })));
                }
                factors[level] = t / m;
            }
            let stride = shape.stride(axis);
            let r = shape.dims()[axis];
            for (o, v) in x.iter_mut().enumerate() {
                *v *= factors[(o / stride) % r];
            }
            for (s, f) in scaling[axis].iter_mut().zip(&factors) {
                *s *= f;
            }
        }

        err = max_margin_error(&shape, &x, target);
        if err <= cfg.margin_tol {
            let total: f64 = x.iter().sum();
            if (total - 1.0).abs() > MASS_TOL {
                x.iter_mut().for_each(|v| *v /= total);
            }
            return Ok(IpfOutcome {
                array: ProbabilityArray::new(shape, x)?,
                sweeps_used: sweep,
                converged: true,
                final_margin_error: err,
                scaling_log: scaling,
            });
        }
        history.push(err);
        if !lp_checked && sweep > cfg.stall_window {
            let before = history[sweep - 1 - cfg.stall_window];
            if err > before * (1.0 - cfg.stall_factor) {
                lp_checked = true;
                if let Some(kind) = classify_support(p, target) {
                    return Err(Error::NoFeasibleProjection(Box::new(Infeasibility {
                        kind,
                        sweeps: sweep,
                        margin_error: err,
                    })));
                }
            }
        }
    }

    if !lp_checked {
        if let Some(kind) = classify_support(p, target) {
            return Err(Error::NoFeasibleProjection(Box::new(Infeasibility {
                kind,
                sweeps: cfg.max_sweeps,
                margin_error: err,
            })));
        }
    }
    Err(Error::MaxSweepsExceeded { sweeps: cfg.max_sweeps, margin_error: err })
}

/// Decides whether some array supported exactly on `Supp(p)` has the target
/// margins. Returns `None` when one exists (or the LP could not be solved).
///
/// LP: variables `x_i ≥ 0` on the support, `λ ≥ 0`, `z_i ∈ [0,1]` with
/// `z_i ≤ x_i`; every margin of `x` equals `λ·target`; maximise `Σ z_i`.
/// The optimum has `z_i > 0` exactly for cells that are positive in some
/// member of the closed class, because the class is a convex cone.
fn classify_support(p: &ProbabilityArray, target: &FrechetTarget) -> Option<InfeasibilityKind> {
    let shape = p.shape();
    let cells: Vec<usize> = (0..shape.len()).filter(|&o| p.values()[o] > 0.0).collect();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let lambda = lp.add_var(0.0, (0.0, 1e4));
    let xs: Vec<_> = cells.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let zs: Vec<_> = cells.iter().map(|_| lp.add_var(1.0, (0.0, 1.0))).collect();

    for (axis, t) in target.margins.iter().enumerate() {
        for (level, &tv) in t.iter().enumerate() {
            let mut expr = LinearExpr::empty();
            for (k, &o) in cells.iter().enumerate() {
                if shape.level_of(o, axis) == level {
                    expr.add(xs[k], 1.0);
                }
            }
            expr.add(lambda, -tv);
            lp.add_constraint(expr, ComparisonOp::Eq, 0.0);
        }
    }
    for (&x, &z) in xs.iter().zip(&zs) {
        let mut expr = LinearExpr::empty();
        expr.add(z, 1.0);
        expr.add(x, -1.0);
        lp.add_constraint(expr, ComparisonOp::Le, 0.0);
    }

    let solution = lp.solve().ok()?.into_solution().ok()?;
    let forced: Vec<MultiIndex> = cells
        .iter()
        .zip(&zs)
        .filter(|(_, &z)| solution.var_value(z) < 1e-7)
        .map(|(&o, _)| shape.index_of(o))
        .collect();
    if forced.is_empty() {
        None
    } else if forced.len() == cells.len() {
        Some(InfeasibilityKind::Exclusive)
    } else {
        Some(InfeasibilityKind::Critical { forced_zero: forced })
    }
}

/// The copula array `γ_p`: I-projection of `p` onto uniform margins.
pub fn copula_array(p: &ProbabilityArray, cfg: &IpfConfig) -> Result<IpfOutcome> {
    p.check_in_p()?;
    ipf_project(p, &FrechetTarget::uniform(p.shape()), cfg)
}

/// Result of [`check_gamma_nonempty`].
#[derive(Debug, Clone, Serialize)]
pub struct GammaCheck {
    pub nonempty: bool,
    /// Present when the class is empty.
    pub diagnostic: Option<Infeasibility>,
    /// Sweeps IPF needed on the quasi-uniform array (`None` if it failed).
    pub sweeps: Option<usize>,
}

/// Whether some copula array has support exactly `s`.
pub fn check_gamma_nonempty(s: &SupportSet, cfg: &IpfConfig) -> GammaCheck {
    match copula_array(&s.quasi_uniform(), cfg) {
        Ok(out) => GammaCheck { nonempty: true, diagnostic: None, sweeps: Some(out.sweeps_used) },
        Err(Error::NoFeasibleProjection(inf)) => {
            GammaCheck { nonempty: false, diagnostic: Some(*inf), sweeps: None }
        }
        Err(Error::NotInP(v)) => {
            let kind = v
                .iter()
                .find_map(|v| match v {
                    crate::tensor::Violation::NullSlice { axis, level } => {
                        Some(InfeasibilityKind::ZeroSlice { axis: *axis, level: *level })
                    }
                    _ => None,
                })
                .unwrap_or(InfeasibilityKind::Exclusive);
            GammaCheck {
                nonempty: false,
                diagnostic: Some(Infeasibility { kind, sweeps: 0, margin_error: f64::NAN }),
                sweeps: None,
            }
        }
        // Still converging when the budget ran out, and the LP found the class nonempty.
        Err(_) => GammaCheck { nonempty: true, diagnostic: None, sweeps: None },
    }
}

/// `γ^{(q,S)}`: the copula array of the quasi-uniform array on `s`.
pub fn quasi_independence_array(s: &SupportSet, cfg: &IpfConfig) -> Result<ProbabilityArray> {
    Ok(copula_array(&s.quasi_uniform(), cfg)?.array)
}

fn check_counts(counts: &CountArray, support: &SupportSet) -> Result<u64> {
    if counts.shape() != support.shape() {
        return Err(Error::DimensionMismatch("counts and support have different shapes".into()));
    }
    for (o, &c) in counts.counts().iter().enumerate() {
        if c > 0 && !support.contains_offset(o) {
            return Err(Error::SupportContradiction {
                cell: counts.shape().index_of(o).0,
                count: c,
            });
        }
    }
    match counts.total() {
        0 => Err(Error::EmptyData),
        n => Ok(n),
    }
}

/// `p̂ = n/(n+1)·p_n + 1/(n+1)·q`, with `q` quasi-uniform on `support`.
pub fn smoothed_empirical(counts: &CountArray, support: &SupportSet) -> Result<ProbabilityArray> {
    let n = check_counts(counts, support)? as f64;
    let w = 1.0 / support.cardinality() as f64;
    let values = counts
        .counts()
        .iter()
        .enumerate()
        .map(|(o, &c)| {
            let q = if support.contains_offset(o) { w } else { 0.0 };
            (c as f64 + q) / (n + 1.0)
        })
        .collect();
    ProbabilityArray::from_weights(counts.shape().clone(), values)
}

/// Raw relative frequencies `p_n`; every support cell must be observed.
pub fn relative_frequencies(counts: &CountArray, support: &SupportSet) -> Result<ProbabilityArray> {
    let n = check_counts(counts, support)? as f64;
    if let Some(o) = support.offsets().into_iter().find(|&o| counts.counts()[o] == 0) {
        return Err(Error::EmptyCell { cell: counts.shape().index_of(o).0 });
    }
    let values = counts.counts().iter().map(|&c| c as f64 / n).collect();
    ProbabilityArray::from_weights(counts.shape().clone(), values)
}

/// Empirical estimate with or without the quasi-uniform mixture.
pub fn empirical_estimate(
    counts: &CountArray,
    support: &SupportSet,
    smoothing: bool,
) -> Result<ProbabilityArray> {
    if smoothing {
        smoothed_empirical(counts, support)
    } else {
        relative_frequencies(counts, support)
    }
}

/// Largest residual of the additive fit `log(result_i/p_i) ≈ c + Σ_ℓ b^{(ℓ)}_{i_ℓ}`
/// over `Supp(p)`. Zero exactly when `result` is a per-axis rescaling of `p`.
pub fn factorization_residual(result: &Array, p: &Array) -> Result<f64> {
    if result.shape() != p.shape() {
        return Err(Error::Domain("arrays have different shapes".into()));
    }
    if result.support(0.0) != p.support(0.0) {
        return Err(Error::Domain("arrays have different supports".into()));
    }
    let shape = p.shape();
    let cells: Vec<usize> = (0..shape.len()).filter(|&o| p.values()[o] > 0.0).collect();
    let ncols = 1 + shape.dims().iter().map(|r| r - 1).sum::<usize>();
    let mut x = DMatrix::zeros(cells.len(), ncols);
    let mut b = Vec::with_capacity(cells.len());
    for (row, &o) in cells.iter().enumerate() {
        x[(row, 0)] = 1.0;
        let mut col = 1;
        for (axis, &r) in shape.dims().iter().enumerate() {
            let level = shape.level_of(o, axis);
            if level > 0 {
                x[(row, col + level - 1)] = 1.0;
            }
            col += r - 1;
        }
        b.push((result.values()[o] / p.values()[o]).ln());
    }
    Ok(least_squares_residual(&x, &b).iter().fold(0.0, |m, r| m.max(r.abs())))
}
