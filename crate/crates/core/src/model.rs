//! Dense matrix/vector primitives and the shared domain types consumed by
//! every estimator.
//!
//! Matrices are stored column-major so that per-column operations (norms,
//! thresholding, centering) run over contiguous memory. Column indices are
//! 0-based internally and 1-based in user-facing output.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced by the core types and estimators.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("matrix entry ({row},{col}) is not finite: {value}")]
    NonFiniteEntry { row: usize, col: usize, value: f64 },
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    EntryCount {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("column centering needs n >= 2 columns: the projection annihilates a single column")]
    DegenerateCentering,
    #[error("column index {index} out of range for n = {n} (1-based input)")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("sparsity pattern has a duplicate index {index}")]
    DuplicateIndex { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "subset search over {n} columns with cardinality cap {cap} would be enormous; \
         set the budget override to run it anyway"
    )]
    SearchBudget { n: usize, cap: usize },
    #[error("brute-force subset enumeration is limited to n <= {max} columns, got {n}")]
    BruteforceTooLarge { n: usize, max: usize },
    #[error(
        "cone condition violated: off-support column-norm mass {off:.6e} exceeds \
         {a} times the support mass {on:.6e}"
    )]
    ConeCondition { off: f64, on: f64, a: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Dense `p x n` real matrix, column-major. Columns are the observation or
/// signal vectors of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from column-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, CoreError> {
        if rows == 0 || cols == 0 {
            return Err(CoreError::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(CoreError::EntryCount {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        for (k, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(CoreError::NonFiniteEntry {
                    row: k % rows,
                    col: k / rows,
                    value: v,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// All-zero matrix. Panics on empty shapes; those are programmer errors.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix shape must be nonempty");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, CoreError> {
        if columns.is_empty() || columns[0].is_empty() {
            return Err(CoreError::EmptyMatrix {
                rows: columns.first().map_or(0, Vec::len),
                cols: columns.len(),
            });
        }
        let rows = columns[0].len();
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(CoreError::DimensionMismatch(format!(
                    "column {} has length {}, expected {}",
                    j + 1,
                    c.len(),
                    rows
                )));
            }
        }
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            data.extend_from_slice(c);
        }
        Self::new(rows, columns.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column `j` (0-based) as a contiguous slice.
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    /// Column-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.rows)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entry-wise sum; shapes must match.
    pub fn add(&self, other: &Matrix) -> Result<Matrix, CoreError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(CoreError::DimensionMismatch(format!(
                "{}x{} + {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Entry-wise scaling.
    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }
}

/// Sorted set of column indices in `[n]`; houses both the true support `S`
/// and estimated supports. Internally 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityPattern {
    n: usize,
    indices: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from 0-based indices; sorts and rejects duplicates or
    /// out-of-range entries.
    pub fn new(n: usize, mut indices: Vec<usize>) -> Result<Self, CoreError> {
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(CoreError::DuplicateIndex { index: w[0] + 1 });
            }
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(CoreError::IndexOutOfRange { index: last + 1, n });
            }
        }
        Ok(Self { n, indices })
    }

    /// Builds a pattern from 1-based indices, as used in all file formats.
    pub fn from_one_based(n: usize, indices: &[usize]) -> Result<Self, CoreError> {
        let mut zero_based = Vec::with_capacity(indices.len());
        for &i in indices {
            if i == 0 || i > n {
                return Err(CoreError::IndexOutOfRange { index: i, n });
            }
            zero_based.push(i - 1);
        }
        Self::new(n, zero_based)
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            indices: Vec::new(),
        }
    }

    /// The full pattern `[n]`.
    pub fn full(n: usize) -> Self {
        Self {
            n,
            indices: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Sorted 0-based indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Sorted 1-based indices for user-facing output.
    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub fn complement(&self) -> SparsityPattern {
        let indices = (0..self.n).filter(|i| !self.contains(*i)).collect();
        SparsityPattern {
            n: self.n,
            indices,
        }
    }
}

impl fmt::Display for SparsityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// Known noise level of the Gaussian model; always supplied by the caller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self, CoreError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Flag codes attached to estimator outputs. These never abort a computation;
/// they record branch decisions, guard violations and approximations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// The subset-search cardinality cap may have hidden a passing set.
    CardinalityCapBound,
    /// Adaptive selection kept the greedy estimate.
    AdaptiveChoseGreedy,
    /// Adaptive selection fell back to the naive column sum.
    AdaptiveChoseNaive,
    /// Declared outlier count exceeds the n/32 guard of the group-lasso bound.
    OutlierGuardExceeded,
    /// A shrinkage level fell below the safe-zone threshold
    /// `γ² > 4·log(4n/δ) + 4·√(p·log(4n/δ))`.
    ShrinkLevelBelowSafe,
    /// The group-lasso solver stopped at its iteration cap.
    GroupLassoNotConverged,
    /// Zero declared outliers short-circuits to the sample mean.
    NoOutlierShortCircuit,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Flag::CardinalityCapBound => "cardinality-cap-bound",
            Flag::AdaptiveChoseGreedy => "adaptive-chose-greedy",
            Flag::AdaptiveChoseNaive => "adaptive-chose-naive",
            Flag::OutlierGuardExceeded => "outlier-guard-exceeded",
            Flag::ShrinkLevelBelowSafe => "shrink-level-below-safe",
            Flag::GroupLassoNotConverged => "group-lasso-not-converged",
            Flag::NoOutlierShortCircuit => "no-outlier-short-circuit",
        };
        f.write_str(s)
    }
}

/// Output of an estimator: the estimated `p`-vector, the selected support
/// when the estimator defines one, and run diagnostics. Closed-form
/// estimators report `iterations = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub estimate: Vec<f64>,
    pub support: Option<SparsityPattern>,
    pub iterations: usize,
    pub warnings: Vec<Flag>,
}

impl EstimateResult {
    pub fn closed_form(estimate: Vec<f64>, support: Option<SparsityPattern>) -> Self {
        Self {
            estimate,
            support,
            iterations: 0,
            warnings: Vec::new(),
        }
    }
}

/// Sum of the columns, `L(M) = M·1`.
pub fn linear_functional(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.rows()];
    for col in m.columns() {
        for (o, v) in out.iter_mut().zip(col) {
            *o += v;
        }
    }
    out
}

/// Column average, `L_n(M) = (1/n)·M·1`.
pub fn normalized_functional(m: &Matrix) -> Vec<f64> {
    let inv = 1.0 / m.cols() as f64;
    linear_functional(m).into_iter().map(|v| v * inv).collect()
}

/// Removes the cross-column mean from every column, i.e. right-multiplies by
/// the projection `Π = I − (1/n)J` onto the complement of the constant
/// vector. Output columns sum to zero up to rounding.
///
/// Rejects `n = 1`: the projection would annihilate the single column, and a
/// one-observation robust model is meaningless.
pub fn center_columns(m: &Matrix) -> Result<Matrix, CoreError> {
    if m.cols() < 2 {
        return Err(CoreError::DegenerateCentering);
    }
    let mean = normalized_functional(m);
    let mut out = m.clone();
    for j in 0..out.cols() {
        let col = out.col_mut(j);
        for (v, mu) in col.iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    Ok(out)
}

/// Euclidean norm of each column.
pub fn column_norms(m: &Matrix) -> Vec<f64> {
    m.columns().map(euclidean_norm).collect()
}

/// Euclidean norm of a vector.
pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Squared Euclidean norm of a vector.
pub fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>()
}

/// Squared Euclidean distance between two equal-length vectors.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn linear_functional_zero_matrix() {
        let m = Matrix::zeros(2, 3);
        assert_eq!(linear_functional(&m), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_functional_unit_columns() {
        let m = Matrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(linear_functional(&m), vec![1.0, 1.0]);
    }

    #[test]
    fn linear_functional_constant_columns() {
        let c = 2.5;
        let m = Matrix::from_columns(&[vec![c], vec![c], vec![c], vec![c]]).unwrap();
        assert_eq!(linear_functional(&m), vec![4.0 * c]);
    }

    #[test]
    fn normalized_functional_cases() {
        let c = -1.75;
        let m = Matrix::from_columns(&[vec![c, c], vec![c, c], vec![c, c], vec![c, c]]).unwrap();
        assert_eq!(normalized_functional(&m), vec![c, c]);

        let z = Matrix::zeros(3, 5);
        assert_eq!(normalized_functional(&z), vec![0.0; 3]);

        let v = vec![2.0, -4.0, 6.0];
        let mut cols = vec![vec![0.0; 3]; 5];
        cols[2] = v.clone();
        let m = Matrix::from_columns(&cols).unwrap();
        let got = normalized_functional(&m);
        for (g, want) in got.iter().zip(&v) {
            assert!(close(*g, want / 5.0, 1e-15));
        }
    }

    #[test]
    fn center_columns_constant_goes_to_zero() {
        let c = 3.25;
        let m = Matrix::from_columns(&[vec![c, -c], vec![c, -c], vec![c, -c]]).unwrap();
        let centered = center_columns(&m).unwrap();
        assert!(centered.data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn center_columns_two_columns() {
        let u = vec![1.0, 2.0];
        let v = vec![-3.0, 5.0];
        let m = Matrix::from_columns(&[u.clone(), v.clone()]).unwrap();
        let centered = center_columns(&m).unwrap();
        for i in 0..2 {
            assert!(close(centered.get(i, 0), (u[i] - v[i]) / 2.0, 1e-15));
            assert!(close(centered.get(i, 1), (v[i] - u[i]) / 2.0, 1e-15));
        }
    }

    #[test]
    fn center_columns_sums_vanish() {
        // Deterministic "random" fill.
        let mut state = 0x3c6ef372u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        let data: Vec<f64> = (0..15).map(|_| next()).collect();
        let m = Matrix::new(3, 5, data).unwrap();
        let centered = center_columns(&m).unwrap();
        let sums = linear_functional(&centered);
        for s in sums {
            assert!(s.abs() <= 1e-12, "column sums should vanish, got {s}");
        }
    }

    #[test]
    fn center_columns_rejects_single_column() {
        let m = Matrix::from_columns(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            center_columns(&m),
            Err(CoreError::DegenerateCentering)
        ));
    }

    #[test]
    fn center_columns_idempotent() {
        let data: Vec<f64> = (0..24).map(|k| ((k * 37 + 11) % 17) as f64 - 8.0).collect();
        let m = Matrix::new(4, 6, data).unwrap();
        let once = center_columns(&m).unwrap();
        let twice = center_columns(&once).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn centering_contracts_frobenius_norm() {
        let data: Vec<f64> = (0..30).map(|k| (k as f64 * 0.7).sin() * 3.0).collect();
        let m = Matrix::new(5, 6, data).unwrap();
        let centered = center_columns(&m).unwrap();
        assert!(centered.frobenius_norm() <= m.frobenius_norm() + 1e-12);
    }

    #[test]
    fn centering_pythagoras_identity() {
        // ||Π(y - t)||² = ||Πy - t||² - (1/n)(1ᵀt)² for vectors y, t in Rⁿ,
        // exercised through 1 x n matrices.
        let n = 7;
        let y: Vec<f64> = (0..n).map(|k| (k as f64 * 1.3).cos() * 2.0).collect();
        let t: Vec<f64> = (0..n).map(|k| (k as f64 * 0.9).sin() - 0.4).collect();
        let row = |v: &[f64]| {
            Matrix::from_columns(&v.iter().map(|x| vec![*x]).collect::<Vec<_>>()).unwrap()
        };
        let diff: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a - b).collect();
        let lhs = squared_norm(center_columns(&row(&diff)).unwrap().data());
        let proj_y = center_columns(&row(&y)).unwrap();
        let pd: Vec<f64> = proj_y.data().iter().zip(&t).map(|(a, b)| a - b).collect();
        let ones_t: f64 = t.iter().sum();
        let rhs = squared_norm(&pd) - ones_t * ones_t / n as f64;
        assert!(close(lhs, rhs, 1e-10), "lhs {lhs} vs rhs {rhs}");
    }

    #[test]
    fn column_norms_cases() {
        let z = Matrix::zeros(4, 3);
        assert_eq!(column_norms(&z), vec![0.0; 3]);

        let m = Matrix::from_columns(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(column_norms(&m), vec![5.0]);

        let e = Matrix::from_columns(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(column_norms(&e), vec![1.0, 1.0]);
    }

    #[test]
    fn matrix_validation() {
        assert!(matches!(
            Matrix::new(0, 3, vec![]),
            Err(CoreError::EmptyMatrix { .. })
        ));
        assert!(matches!(
            Matrix::new(2, 2, vec![1.0, 2.0, 3.0]),
            Err(CoreError::EntryCount { .. })
        ));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(CoreError::NonFiniteEntry { .. })
        ));
    }

    #[test]
    fn sparsity_pattern_validation() {
        let s = SparsityPattern::new(5, vec![4, 0, 2]).unwrap();
        assert_eq!(s.indices(), &[0, 2, 4]);
        assert_eq!(s.one_based(), vec![1, 3, 5]);
        assert!(s.contains(2) && !s.contains(1));
        assert_eq!(s.complement().indices(), &[1, 3]);
        assert!(SparsityPattern::new(3, vec![1, 1]).is_err());
        assert!(SparsityPattern::new(3, vec![3]).is_err());
        assert!(SparsityPattern::from_one_based(3, &[0]).is_err());
        assert_eq!(
            SparsityPattern::from_one_based(3, &[3, 1]).unwrap().indices(),
            &[0, 2]
        );
        assert_eq!(format!("{}", SparsityPattern::new(4, vec![0, 3]).unwrap()), "{1, 4}");
    }

    #[test]
    fn noise_model_rejects_nonpositive() {
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(-1.0).is_err());
        assert!(NoiseModel::new(f64::INFINITY).is_err());
        assert_eq!(NoiseModel::new(2.0).unwrap().sigma(), 2.0);
    }
}
