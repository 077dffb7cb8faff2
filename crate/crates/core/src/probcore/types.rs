use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Allowed deviation of a distribution's total mass from one.
pub const SUM_TOLERANCE: f64 = 1e-12;
/// Entries in `[-CLAMP_TOLERANCE, 0)` are treated as rounding noise and clamped to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-14;
/// Default smallest singular value a leakage matrix must exceed to count as invertible.
pub const DEFAULT_SINGULAR_THRESHOLD: f64 = 1e-9;

fn validate_entries(mut entries: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if entries.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    for (i, p) in entries.iter_mut().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "{what}: entry {i} is not finite"
            )));
        }
        if *p < 0.0 {
            if *p >= -CLAMP_TOLERANCE {
                *p = 0.0;
            } else {
                return Err(Error::InvalidDistribution(format!(
                    "{what}: entry {i} is negative ({p})"
                )));
            }
        }
    }
    let total: f64 = entries.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entries sum to {total}, not 1"
        )));
    }
    Ok(entries)
}

/// A finite probability distribution, optionally with symbol names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProbVector")]
pub struct ProbVector {
    entries: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct RawProbVector {
    entries: Vec<f64>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

impl TryFrom<RawProbVector> for ProbVector {
    type Error = Error;

    fn try_from(raw: RawProbVector) -> Result<Self> {
        let v = ProbVector::new(raw.entries)?;
        match raw.labels {
            Some(labels) => v.with_labels(labels),
            None => Ok(v),
        }
    }
}

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Ok(Self {
            entries: validate_entries(entries, "probability vector")?,
            labels: None,
        })
    }

    /// Validates and additionally requires every entry to be strictly positive.
    pub fn strictly_positive(entries: Vec<f64>) -> Result<Self> {
        let v = Self::new(entries)?;
        v.require_strictly_positive()?;
        Ok(v)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("uniform over zero symbols".into()));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.entries.len() {
            return Err(Error::DimensionMismatch {
                context: "labels",
                expected: self.entries.len(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn require_strictly_positive(&self) -> Result<()> {
        match self.entries.iter().position(|&p| p <= 0.0) {
            Some(index) => Err(Error::NotStrictlyPositive {
                index,
                value: self.entries[index],
            }),
            None => Ok(()),
        }
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.entries.iter().all(|&p| p > 0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Index of the symbol carrying `label`, if labels are attached.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }

    pub fn min(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Entrywise square root, the unit vector `sqrt(p)`.
    pub fn sqrt(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.entries.iter().map(|p| p.sqrt()))
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.entries)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

/// Column-stochastic conditional matrix: rows index outputs, columns index inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct ChannelMatrix {
    entries: DMatrix<f64>,
}

impl ChannelMatrix {
    pub fn new(mut entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidDistribution("empty channel matrix".into()));
        }
        for j in 0..entries.ncols() {
            let col: Vec<f64> = entries.column(j).iter().copied().collect();
            let col = validate_entries(col, &format!("channel column {j}"))?;
            for (i, p) in col.into_iter().enumerate() {
                entries[(i, j)] = p;
            }
        }
        Ok(Self { entries })
    }

    /// Builds from row-major data: `rows[output][input]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(Error::InvalidDistribution(format!(
                "row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn identity(k: usize) -> Result<Self> {
        Self::new(DMatrix::identity(k, k))
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn column(&self, j: usize) -> ProbVector {
        ProbVector {
            entries: self.entries.column(j).iter().copied().collect(),
            labels: None,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        linalg::to_rows(&self.entries)
    }

    /// Pushes an input distribution through the channel.
    pub fn apply(&self, input: &ProbVector) -> Result<ProbVector> {
        if input.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                context: "channel input",
                expected: self.ncols(),
                found: input.len(),
            });
        }
        ProbVector::new((&self.entries * input.to_dvector()).iter().copied().collect())
    }

    pub fn singular_values(&self) -> Vec<f64> {
        linalg::svd(&self.entries)
            .map(|d| d.singular_values)
            .unwrap_or_default()
    }

    pub fn min_singular_value(&self) -> f64 {
        self.singular_values()
            .last()
            .copied()
            .unwrap_or(0.0)
    }

    /// Explicit inverse for a square channel whose smallest singular value exceeds `threshold`.
    pub fn inverse(&self, threshold: f64) -> Result<DMatrix<f64>> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                context: "square channel matrix",
                expected: self.nrows(),
                found: self.ncols(),
            });
        }
        let sigma_min = self.min_singular_value();
        if sigma_min <= threshold {
            return Err(Error::SingularMatrix {
                sigma_min,
                threshold,
            });
        }
        linalg::inverse(&self.entries).ok_or(Error::SingularMatrix {
            sigma_min,
            threshold,
        })
    }
}

impl From<ChannelMatrix> for Vec<Vec<f64>> {
    fn from(c: ChannelMatrix) -> Self {
        c.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for ChannelMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

/// Joint pmf over (row symbol, column symbol).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    entries: DMatrix<f64>,
}

impl JointDistribution {
    pub fn new(mut entries: DMatrix<f64>) -> Result<Self> {
        let flat: Vec<f64> = entries.iter().copied().collect();
        let flat = validate_entries(flat, "joint distribution")?;
        entries.copy_from_slice(&flat);
        Ok(Self { entries })
    }

    /// Assembles `P(a, b) = P_A(a) P_{B|A=a}(b)` with rows indexed by `a`.
    pub fn from_conditionals(marginal: &ProbVector, conditionals: &[ProbVector]) -> Result<Self> {
        if conditionals.len() != marginal.len() {
            return Err(Error::DimensionMismatch {
                context: "one conditional per symbol",
                expected: marginal.len(),
                found: conditionals.len(),
            });
        }
        let ncols = conditionals[0].len();
        if let Some(c) = conditionals.iter().find(|c| c.len() != ncols) {
            return Err(Error::DimensionMismatch {
                context: "conditional length",
                expected: ncols,
                found: c.len(),
            });
        }
        Self::new(DMatrix::from_fn(marginal.len(), ncols, |a, b| {
            marginal[a] * conditionals[a][b]
        }))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
        }
    }
}
