//! d-dimensional arrays stored flat in column-major order.
//!
//! Multi-indices are 1-based, flat positions exposed through
//! [`Shape::flatten`]/[`Shape::unflatten`] are 1-based too; everything
//! internal works with 0-based offsets into `values`. The first coordinate
//! varies fastest: `φ(i) = i₁ + Σ_{ℓ≥2} (i_ℓ − 1) ∏_{k<ℓ} r_k`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a probability array.
pub const MASS_TOL: f64 = 1e-12;

/// Zero threshold for supports of arrays produced by iterative computations.
pub const COMPUTED_ZERO_TOL: f64 = 1e-14;

/// Dimension sizes `(r_1, …, r_d)`, each at least 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Domain("shape needs at least one axis".into()));
        }
        if let Some(r) = dims.iter().find(|&&r| r < 2) {
            return Err(Error::Domain(format!("every dimension size must be >= 2, got {r}")));
        }
        Ok(Shape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of cells, `∏ r_ℓ`.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Offset step along `axis` (0-based axis).
    pub fn stride(&self, axis: usize) -> usize {
        self.dims[..axis].iter().product()
    }

    /// 0-based level along `axis` of the cell at 0-based `offset`.
    #[inline]
    pub fn level_of(&self, offset: usize, axis: usize) -> usize {
        (offset / self.stride(axis)) % self.dims[axis]
    }

    /// Flat position φ(i), 1-based.
    pub fn flatten(&self, index: &MultiIndex) -> Result<usize> {
        Ok(self.offset(index)? + 1)
    }

    /// Inverse of [`Shape::flatten`]; `position` is 1-based.
    pub fn unflatten(&self, position: usize) -> Result<MultiIndex> {
        if position == 0 || position > self.len() {
            return Err(Error::Range(format!(
                "flat position {position} outside 1..={}",
                self.len()
            )));
        }
        Ok(self.index_of(position - 1))
    }

    /// 0-based offset of a 1-based multi-index.
    pub fn offset(&self, index: &MultiIndex) -> Result<usize> {
        if index.0.len() != self.ndim() {
            return Err(Error::Range(format!(
                "index {index} has {} coordinates, shape has {} axes",
                index.0.len(),
                self.ndim()
            )));
        }
        let mut offset = 0;
        let mut stride = 1;
        for (l, (&i, &r)) in index.0.iter().zip(&self.dims).enumerate() {
            if i == 0 || i > r {
                return Err(Error::Range(format!(
                    "coordinate {i} on axis {} outside 1..={r}",
                    l + 1
                )));
            }
            offset += (i - 1) * stride;
            stride *= r;
        }
        Ok(offset)
    }

    /// 1-based multi-index of a 0-based offset (caller guarantees range).
    pub fn index_of(&self, offset: usize) -> MultiIndex {
        let mut k = offset;
        let coords = self
            .dims
            .iter()
            .map(|&r| {
                let i = k % r + 1;
                k /= r;
                i
            })
            .collect();
        MultiIndex(coords)
    }

    /// All multi-indices in φ-order.
    pub fn indices(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.len()).map(move |o| self.index_of(o))
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.dims
    }
}

/// A 1-based multi-index `(i_1, …, i_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(coords: impl Into<Vec<usize>>) -> Self {
        MultiIndex(coords.into())
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// The ℓ-th margin of an array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginVector {
    /// 0-based axis.
    pub axis: usize,
    pub values: Vec<f64>,
}

impl AsRef<[f64]> for MarginVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Real-valued array on a [`Shape`]; entries may be of any sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Array {
    shape: Shape,
    values: Vec<f64>,
}

impl Array {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a shape with {} cells",
                values.len(),
                shape.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("array entries must be finite".into()));
        }
        Ok(Array { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.len();
        Array { shape, values: vec![0.0; n] }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Entries in φ-order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &MultiIndex) -> Result<f64> {
        Ok(self.values[self.shape.offset(index)?])
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Margin along a 0-based `axis`.
    pub fn margin(&self, axis: usize) -> Result<MarginVector> {
        if axis >= self.shape.ndim() {
            return Err(Error::Range(format!(
                "axis {axis} outside 0..{}",
                self.shape.ndim()
            )));
        }
        Ok(MarginVector { axis, values: margin_of(&self.shape, &self.values, axis) })
    }

    pub fn margins(&self) -> Vec<MarginVector> {
        (0..self.shape.ndim())
            .map(|axis| MarginVector { axis, values: margin_of(&self.shape, &self.values, axis) })
            .collect()
    }

    /// Cells with `|a_i| > zero_tol`.
    pub fn support(&self, zero_tol: f64) -> SupportSet {
        let member = self.values.iter().map(|v| v.abs() > zero_tol).collect();
        SupportSet::from_flags_unchecked(self.shape.clone(), member)
    }

    pub fn max_abs_diff(&self, other: &Array) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn margin_of(shape: &Shape, values: &[f64], axis: usize) -> Vec<f64> {
    let r = shape.dims()[axis];
    let stride = shape.stride(axis);
    let mut out = vec![0.0; r];
    for (o, v) in values.iter().enumerate() {
        out[(o / stride) % r] += v;
    }
    out
}

/// One way in which an array fails to be in the positive-margin class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    NegativeEntry { index: MultiIndex, value: f64 },
    BadSum { sum: f64 },
    /// A slice summing to zero; `axis` and `level` are 1-based.
    NullSlice { axis: usize, level: usize },
}

/// Nonnegative array with unit mass (within [`MASS_TOL`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityArray(Array);

impl ProbabilityArray {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        Self::try_from(Array::new(shape, values)?)
    }

    /// Normalises nonnegative weights to unit mass.
    pub fn from_weights(shape: Shape, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("weights must have positive total".into()));
        }
        Self::new(shape, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn as_array(&self) -> &Array {
        &self.0
    }

    pub fn into_array(self) -> Array {
        self.0
    }

    /// Membership in the class of arrays without null slices.
    pub fn check_in_p(&self) -> Result<()> {
        validate_in_p(&self.0).map_err(Error::NotInP)
    }
}

impl TryFrom<Array> for ProbabilityArray {
    type Error = Error;
    fn try_from(a: Array) -> Result<Self> {
        if let Some((o, v)) = a.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NotInP(vec![Violation::NegativeEntry {
                index: a.shape.index_of(o),
                value: *v,
            }]));
        }
        let sum = a.sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::NotInP(vec![Violation::BadSum { sum }]));
        }
        Ok(ProbabilityArray(a))
    }
}

impl std::ops::Deref for ProbabilityArray {
    type Target = Array;
    fn deref(&self) -> &Array {
        &self.0
    }
}

/// Checks nonnegativity, unit mass and that every margin component is positive.
pub fn validate_in_p(a: &Array) -> std::result::Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    for (o, &v) in a.values.iter().enumerate() {
        if v < 0.0 {
            violations.push(Violation::NegativeEntry { index: a.shape.index_of(o), value: v });
        }
    }
    let sum = a.sum();
    if (sum - 1.0).abs() > MASS_TOL {
        violations.push(Violation::BadSum { sum });
    }
    for m in a.margins() {
        for (level, &v) in m.values.iter().enumerate() {
            if !(v > 0.0) {
                violations.push(Violation::NullSlice { axis: m.axis + 1, level: level + 1 });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Product array `∏_ℓ q^{(ℓ)}_{i_ℓ}` of strictly positive probability vectors.
pub fn independence_array<M: AsRef<[f64]>>(margins: &[M]) -> Result<ProbabilityArray> {
    let dims: Vec<usize> = margins.iter().map(|m| m.as_ref().len()).collect();
    let shape = Shape::new(dims)?;
    for (l, m) in margins.iter().enumerate() {
        let m = m.as_ref();
        if m.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain(format!("margin {} has a non-positive entry", l + 1)));
        }
        let s: f64 = m.iter().sum();
        if (s - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("margin {} sums to {s}", l + 1)));
        }
    }
    let values = (0..shape.len())
        .map(|o| {
            margins
                .iter()
                .enumerate()
                .map(|(l, m)| m.as_ref()[shape.level_of(o, l)])
                .product()
        })
        .collect();
    ProbabilityArray::new(shape, values)
}

/// Cells where an array may be positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportSet {
    shape: Shape,
    member: Vec<bool>,
    cardinality: usize,
}

impl SupportSet {
    pub fn full(shape: Shape) -> Self {
        let n = shape.len();
        SupportSet { shape, member: vec![true; n], cardinality: n }
    }

    pub fn from_flags(shape: Shape, member: Vec<bool>) -> Result<Self> {
        if member.len() != shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} support flags for {} cells",
                member.len(),
                shape.len()
            )));
        }
        let s = Self::from_flags_unchecked(shape, member);
        if s.cardinality == 0 {
            return Err(Error::Domain("support must contain at least one cell".into()));
        }
        Ok(s)
    }

    fn from_flags_unchecked(shape: Shape, member: Vec<bool>) -> Self {
        let cardinality = member.iter().filter(|&&m| m).count();
        SupportSet { shape, member, cardinality }
    }

    /// Full support minus the listed (1-based) cells.
    pub fn excluding(shape: Shape, zeros: &[MultiIndex]) -> Result<Self> {
        let mut member = vec![true; shape.len()];
        for z in zeros {
            member[shape.offset(z)?] = false;
        }
        Self::from_flags(shape, member)
    }

    /// Exactly the listed (1-based) cells.
    pub fn from_cells(shape: Shape, cells: &[MultiIndex]) -> Result<Self> {
        let mut member = vec![false; shape.len()];
        for c in cells {
            member[shape.offset(c)?] = true;
        }
        Self::from_flags(shape, member)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn flags(&self) -> &[bool] {
        &self.member
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn is_full(&self) -> bool {
        self.cardinality == self.member.len()
    }

    pub fn contains_offset(&self, offset: usize) -> bool {
        self.member[offset]
    }

    pub fn contains(&self, index: &MultiIndex) -> Result<bool> {
        Ok(self.member[self.shape.offset(index)?])
    }

    /// 0-based offsets of support cells, ascending.
    pub fn offsets(&self) -> Vec<usize> {
        (0..self.member.len()).filter(|&o| self.member[o]).collect()
    }

    /// Cells outside the support, as 1-based indices in φ-order.
    pub fn excluded(&self) -> Vec<MultiIndex> {
        (0..self.member.len())
            .filter(|&o| !self.member[o])
            .map(|o| self.shape.index_of(o))
            .collect()
    }

    /// The quasi-uniform array `1{i∈S}/|S|`.
    pub fn quasi_uniform(&self) -> ProbabilityArray {
        let w = 1.0 / self.cardinality as f64;
        let values = self.member.iter().map(|&m| if m { w } else { 0.0 }).collect();
        ProbabilityArray(Array { shape: self.shape.clone(), values })
    }

    /// True when every cell of `self` also lies in `other`.
    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.shape == other.shape
            && self.member.iter().zip(&other.member).all(|(&a, &b)| !a || b)
    }
}

/// Cell counts of a contingency table, in φ-order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountArray {
    shape: Shape,
    counts: Vec<u64>,
}

impl CountArray {
    pub fn new(shape: Shape, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} counts for a shape with {} cells",
                counts.len(),
                shape.len()
            )));
        }
        Ok(CountArray { shape, counts })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}
