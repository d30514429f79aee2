//! Affine coordinates on the set of copula arrays with a given support.
//!
//! Every copula array `γ` supported on `S` is `γ^{(q,S)} + A θ`, where the
//! columns of `A` span the kernel of the constraint matrix `C_S` (zero outside
//! `S`, zero margins along every axis) and `γ^{(q,S)}` is the
//! quasi-independence copula array. The map `θ ↦ γ` is an affine bijection
//! between the admissible set `Θ` and the copula arrays with support `S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{null_space, solve_spd, DenseMatrix};
use crate::projection::{quasi_independence_array, IpfConfig};
use crate::tensor::{Array, MultiIndex, ProbabilityArray, Shape, SupportSet};

/// Tolerance for `C_S · A = 0` on supplied bases.
pub const KERNEL_TOL: f64 = 1e-10;
/// Largest allowed least-squares residual in [`BasisBundle::theta_of_gamma`].
pub const SPAN_TOL: f64 = 1e-9;
/// Largest per-entry correction accepted when snapping a rounded fixture onto the kernel.
pub const FIXTURE_TOL: f64 = 1e-3;

/// What a row of [`ConstraintMatrix`] encodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "row", rename_all = "snake_case")]
pub enum ConstraintRow {
    /// Entry at this cell must vanish.
    ZeroCell { cell: MultiIndex },
    /// Slice `level` of `axis` (both 1-based) must sum to zero.
    Margin { axis: usize, level: usize },
}

/// `C_S`: zero-cell rows in φ-order, then margin rows from the last axis to
/// the first, levels ascending within each axis.
#[derive(Debug, Clone)]
pub struct ConstraintMatrix {
    pub matrix: DenseMatrix,
    pub rows: Vec<ConstraintRow>,
}

pub fn build_constraint_matrix(s: &SupportSet) -> ConstraintMatrix {
    let shape = s.shape();
    let n = shape.len();
    let excluded: Vec<usize> = (0..n).filter(|&o| !s.contains_offset(o)).collect();
    let nrows = excluded.len() + shape.dims().iter().sum::<usize>();
    let mut matrix = DenseMatrix::zeros(nrows, n);
    let mut rows = Vec::with_capacity(nrows);

    for (k, &o) in excluded.iter().enumerate() {
        matrix[(k, o)] = 1.0;
        rows.push(ConstraintRow::ZeroCell { cell: shape.index_of(o) });
    }
    let mut k = excluded.len();
    for axis in (0..shape.ndim()).rev() {
        for level in 0..shape.dims()[axis] {
            for o in 0..n {
                if shape.level_of(o, axis) == level {
                    matrix[(k, o)] = 1.0;
                }
            }
            rows.push(ConstraintRow::Margin { axis: axis + 1, level: level + 1 });
            k += 1;
        }
    }
    ConstraintMatrix { matrix, rows }
}

/// Orthonormal kernel basis of `C_S`, one column per direction.
///
/// `rank_tol` defaults to `(∏ r_ℓ) · ε`, relative to the largest column norm.
pub fn null_space_basis(c: &ConstraintMatrix, rank_tol: Option<f64>) -> DenseMatrix {
    let tol = rank_tol.unwrap_or(c.matrix.ncols() as f64 * f64::EPSILON);
    null_space(&c.matrix, Some(tol))
}

/// `d∘ = dim ker C_S`. Zero means only the trivial direction exists.
pub fn dependence_dimension(s: &SupportSet) -> usize {
    null_space_basis(&build_constraint_matrix(s), None).ncols()
}

/// Coordinates `θ` of a copula array in a [`BasisBundle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaVector(pub Vec<f64>);

impl ThetaVector {
    pub fn zeros(n: usize) -> Self {
        ThetaVector(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Where the columns of `A_S` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSource {
    /// Orthonormal kernel from pivoted QR.
    Computed,
    /// Sign-alternating products `⊗_ℓ (e_{j_ℓ} − e_{r_ℓ})` (full support only).
    Canonical,
    /// Caller-provided, used exactly.
    Supplied,
    /// Caller-provided with rounded entries, projected onto the kernel.
    Fixture,
}

/// Everything needed to move between `θ` and `γ` for one support.
#[derive(Debug, Clone)]
pub struct BasisBundle {
    support: SupportSet,
    a_matrix: DenseMatrix,
    a_tilde: DenseMatrix,
    gamma_q: ProbabilityArray,
    source: BasisSource,
}

impl BasisBundle {
    /// Computed orthonormal basis for `s`. Fails if no copula array has support `s`.
    pub fn from_support(s: &SupportSet, cfg: &IpfConfig) -> Result<Self> {
        let a = null_space_basis(&build_constraint_matrix(s), None);
        Self::assemble(s, a, BasisSource::Computed, cfg)
    }

    /// The sign-alternating basis for a full rectangular support.
    pub fn canonical(shape: &Shape) -> Self {
        let s = SupportSet::full(shape.clone());
        let a = canonical_matrix(shape);
        let a_tilde = a.clone();
        BasisBundle {
            gamma_q: s.quasi_uniform(),
            support: s,
            a_matrix: a,
            a_tilde,
            source: BasisSource::Canonical,
        }
    }

    /// Uses `a` as given after checking that its columns lie in `ker C_S`
    /// and are linearly independent.
    pub fn with_basis(s: &SupportSet, a: DenseMatrix, cfg: &IpfConfig) -> Result<Self> {
        check_rows(s, &a)?;
        let c = build_constraint_matrix(s);
        let worst = (&c.matrix * &a).amax();
        if worst > KERNEL_TOL {
            return Err(Error::Domain(format!(
                "basis columns violate the support constraints (max |C A| = {worst:e})"
            )));
        }
        Self::assemble(s, a, BasisSource::Supplied, cfg)
    }

    /// Like [`BasisBundle::with_basis`], for matrices printed with a few
    /// decimals: each column is projected onto `ker C_S` first.
    pub fn from_fixture(s: &SupportSet, a: DenseMatrix, cfg: &IpfConfig) -> Result<Self> {
        check_rows(s, &a)?;
        let kernel = null_space_basis(&build_constraint_matrix(s), None);
        let snapped = &kernel * (kernel.transpose() * &a);
        let shift = (&snapped - &a).amax();
        if shift > FIXTURE_TOL {
            return Err(Error::Domain(format!(
                "fixture basis is {shift:e} away from the kernel of the support constraints"
            )));
        }
        Self::assemble(s, snapped, BasisSource::Fixture, cfg)
    }

    fn assemble(s: &SupportSet, mut a: DenseMatrix, source: BasisSource, cfg: &IpfConfig) -> Result<Self> {
        for o in (0..a.nrows()).filter(|&o| !s.contains_offset(o)) {
            a.row_mut(o).fill(0.0);
        }
        let d = a.ncols();
        let expected = dependence_dimension(s);
        if d != expected {
            return Err(Error::Domain(format!(
                "basis has {d} columns but the dependence space has dimension {expected}"
            )));
        }
        if d > 0 {
            let gram = a.transpose() * &a;
            // Cholesky succeeds exactly when the columns are independent.
            solve_spd(&gram, &DenseMatrix::identity(d, d))?;
        }
        let gamma_q = quasi_independence_array(s, cfg)?;
        let a_tilde = select_rows(&a, &s.offsets());
        Ok(BasisBundle { support: s.clone(), a_matrix: a, a_tilde, gamma_q, source })
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn shape(&self) -> &Shape {
        self.support.shape()
    }

    /// `A_S`, one vectorised basis array per column.
    pub fn a_matrix(&self) -> &DenseMatrix {
        &self.a_matrix
    }

    /// `Ã_S = R_S A_S`: the rows of `A_S` on the support.
    pub fn a_tilde(&self) -> &DenseMatrix {
        &self.a_tilde
    }

    /// `R_S`: `|S| × ∏r_ℓ` selection matrix.
    pub fn r_matrix(&self) -> DenseMatrix {
        let offsets = self.support.offsets();
        let mut r = DenseMatrix::zeros(offsets.len(), self.shape().len());
        for (k, &o) in offsets.iter().enumerate() {
            r[(k, o)] = 1.0;
        }
        r
    }

    pub fn d_circ(&self) -> usize {
        self.a_matrix.ncols()
    }

    /// `γ^{(q,S)}`, the origin of the coordinates.
    pub fn gamma_q(&self) -> &ProbabilityArray {
        &self.gamma_q
    }

    pub fn source(&self) -> BasisSource {
        self.source
    }

    /// `γ^{(q,S)} + A θ`. Entries can leave `(0,1)` when `θ ∉ Θ`.
    pub fn gamma_of_theta(&self, theta: &ThetaVector) -> Result<Array> {
        self.check_len(theta)?;
        let values = self
            .gamma_q
            .values()
            .iter()
            .enumerate()
            .map(|(o, g)| g + self.a_matrix.row(o).iter().zip(&theta.0).map(|(a, t)| a * t).sum::<f64>())
            .collect();
        Array::new(self.shape().clone(), values)
    }

    /// Least-squares solution of `A θ = γ − γ^{(q,S)}`.
    pub fn theta_of_gamma(&self, gamma: &Array) -> Result<ThetaVector> {
        if gamma.shape() != self.shape() {
            return Err(Error::DimensionMismatch("array shape differs from the basis shape".into()));
        }
        let diff = DenseMatrix::from_iterator(
            self.shape().len(),
            1,
            gamma.values().iter().zip(self.gamma_q.values()).map(|(g, q)| g - q),
        );
        let d = self.d_circ();
        let theta = if d == 0 {
            DenseMatrix::zeros(0, 1)
        } else {
            let gram = self.a_matrix.transpose() * &self.a_matrix;
            solve_spd(&gram, &(self.a_matrix.transpose() * &diff))?
        };
        let residual = (&diff - &self.a_matrix * &theta).amax();
        if residual > SPAN_TOL {
            return Err(Error::NotInAffineSpan { residual });
        }
        Ok(ThetaVector(theta.iter().copied().collect()))
    }

    /// Whether every support entry of `γ(θ)` lies strictly inside `(0, 1)`.
    pub fn is_admissible(&self, theta: &ThetaVector) -> Result<bool> {
        let g = self.gamma_of_theta(theta)?;
        Ok(self
            .support
            .offsets()
            .into_iter()
            .all(|o| g.values()[o] > 0.0 && g.values()[o] < 1.0))
    }

    fn check_len(&self, theta: &ThetaVector) -> Result<()> {
        if theta.len() != self.d_circ() {
            return Err(Error::DimensionMismatch(format!(
                "theta has length {}, basis has {} columns",
                theta.len(),
                self.d_circ()
            )));
        }
        Ok(())
    }
}

fn check_rows(s: &SupportSet, a: &DenseMatrix) -> Result<()> {
    if a.nrows() != s.shape().len() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, shape has {} cells",
            a.nrows(),
            s.shape().len()
        )));
    }
    Ok(())
}

fn select_rows(a: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Sum-to-zero contrast basis of the dependence space for full support.
///
/// For every set `T` of at least two axes and every `j ∈ ×_{ℓ∈T} [r_ℓ − 1]`
/// the column is `vec(⊗_ℓ f_ℓ)` with `f_ℓ = e_{j_ℓ} − e_{r_ℓ}` for `ℓ ∈ T`
/// and `f_ℓ = 1` otherwise. The all-axes block comes first; for `d = 2` it
/// is the whole basis. Sets are taken by decreasing size, then
/// lexicographically, and `j` varies with its last coordinate fastest.
pub fn canonical_matrix(shape: &Shape) -> DenseMatrix {
    let dims = shape.dims();
    let d = dims.len();
    let mut sets: Vec<Vec<usize>> = (0u32..1 << d)
        .filter(|m| m.count_ones() >= 2)
        .map(|m| (0..d).filter(|&l| m & (1 << l) != 0).collect())
        .collect();
    sets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

    let mut columns: Vec<Vec<f64>> = Vec::new();
    for set in &sets {
        let reduced: Vec<usize> = set.iter().map(|&l| dims[l] - 1).collect();
        let count: usize = reduced.iter().product();
        let mut j = vec![0usize; set.len()];
        for _ in 0..count {
            let col = (0..shape.len())
                .map(|o| {
                    set.iter()
                        .zip(&j)
                        .map(|(&axis, &jl)| {
                            let level = shape.level_of(o, axis);
                            if level == jl {
                                1.0
                            } else if level == dims[axis] - 1 {
                                -1.0
                            } else {
                                0.0
                            }
                        })
                        .product()
                })
                .collect();
            columns.push(col);
            for k in (0..j.len()).rev() {
                j[k] += 1;
                if j[k] < reduced[k] {
                    break;
                }
                j[k] = 0;
            }
        }
    }
    DenseMatrix::from_fn(shape.len(), columns.len(), |i, k| columns[k][i])
}

/// Parses a whitespace-separated, row-major matrix (one row per line; blank
/// lines and `#` comments are skipped).
pub fn parse_matrix_text(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|e| Error::Parse {
                    line: k + 1,
                    message: format!("bad number {t:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: k + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DenseMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Inverse of [`parse_matrix_text`], with `decimals` digits after the point.
pub fn format_matrix_text(m: &DenseMatrix, decimals: usize) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.decimals$}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
