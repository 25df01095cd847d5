//! Estimators of the column-sum functional `L(Θ)` from noisy observations
//! `Y = Θ + σΞ`: the naive column sum, the unattainable oracle, greedy
//! subset selection (plain and adaptive), group hard and soft thresholding,
//! and element-wise hard thresholding.
//!
//! Tuning rules follow the deviation/risk analyses the estimators come with:
//!
//! * GSS acceptance test: `‖L(Y_J)‖² ≥ 12σ²(|J|p + λ|J|²)` with
//!   `λ = (3/2)·log(2n/δ)`.
//! * GHT: `λ²/σ² = p + 4·{log(1+n/s²) ∨ √p·log^{1/2}(1+n²p/s⁴)}`.
//! * GST: `γ² = 4·{log(1+n/s²) ∨ √p·log^{1/2}(1+n²p/s⁴)}`, applied through
//!   the data-dependent per-column radius.
//! * element-wise HT: `λ² = 2σ²·log(1+n/s²)`.
//!
//! When the sparsity `s` is unknown, the `s`-free mode substitutes `s = 1`.

use crate::model::{
    euclidean_norm, linear_functional, squared_norm, CoreError, EstimateResult, Flag, Matrix,
    SparsityPattern,
};

/// Tuning inputs of the greedy subset selection estimator.
#[derive(Clone, Debug)]
pub struct GssConfig {
    pub sigma: f64,
    pub delta: f64,
    /// Largest subset cardinality the per-round search scans.
    pub cardinality_cap: usize,
    /// Replaces the default `λ = (3/2)·log(2n/δ)` when set.
    pub lambda_override: Option<f64>,
    /// Permits searches beyond the combinatorial blow-up guard.
    pub budget_override: bool,
}

impl GssConfig {
    /// Default configuration for an `n`-column instance: cardinality cap
    /// `min(n, 12)`, no overrides.
    pub fn new(sigma: f64, delta: f64, n: usize) -> Self {
        Self {
            sigma,
            delta,
            cardinality_cap: n.min(12),
            lambda_override: None,
            budget_override: false,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cardinality_cap = cap;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_override = Some(lambda);
        self
    }

    /// The threshold weight actually used for an `n`-column instance.
    pub fn lambda(&self, n: usize) -> f64 {
        self.lambda_override
            .unwrap_or_else(|| 1.5 * (2.0 * n as f64 / self.delta).ln())
    }

    fn validate(&self, n: usize) -> Result<(), CoreError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self.cardinality_cap == 0 || self.cardinality_cap > n {
            return Err(CoreError::InvalidParameter(format!(
                "cardinality cap must lie in 1..=n = {}, got {}",
                n, self.cardinality_cap
            )));
        }
        if self.cardinality_cap > 20 && n > 30 && !self.budget_override {
            return Err(CoreError::SearchBudget {
                n,
                cap: self.cardinality_cap,
            });
        }
        Ok(())
    }
}

/// Whether the thresholding rules may use the true column sparsity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SparsityMode {
    #[default]
    SKnown,
    SFree,
}

/// Tuning inputs shared by the thresholding estimators.
#[derive(Clone, Debug)]
pub struct ThresholdConfig {
    pub sigma: f64,
    pub sparsity: Option<usize>,
    pub mode: SparsityMode,
}

impl ThresholdConfig {
    pub fn s_known(sigma: f64, s: usize) -> Result<Self, CoreError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if s == 0 {
            return Err(CoreError::InvalidParameter(
                "s-known mode needs a positive sparsity".into(),
            ));
        }
        Ok(Self {
            sigma,
            sparsity: Some(s),
            mode: SparsityMode::SKnown,
        })
    }

    pub fn s_free(sigma: f64) -> Result<Self, CoreError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            sigma,
            sparsity: None,
            mode: SparsityMode::SFree,
        })
    }

    /// The sparsity the tuning formulas see: `s = 1` in s-free mode.
    pub fn effective_sparsity(&self) -> usize {
        match self.mode {
            SparsityMode::SKnown => self.sparsity.expect("s-known mode carries a sparsity"),
            SparsityMode::SFree => 1,
        }
    }
}

/// Sums the given columns of `y` in ascending index order.
pub(crate) fn sum_columns(y: &Matrix, indices: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; y.rows()];
    for &j in indices {
        for (o, v) in out.iter_mut().zip(y.col(j)) {
            *o += v;
        }
    }
    out
}

/// The naive estimator `L(Y)`: sums every column.
pub fn naive_estimate(y: &Matrix) -> EstimateResult {
    EstimateResult::closed_form(
        linear_functional(y),
        Some(SparsityPattern::full(y.cols())),
    )
}

/// The oracle estimator `L(Y_S)`: sums the columns of the true support.
/// Available only in simulation, as the benchmark the others chase.
pub fn oracle_estimate(y: &Matrix, support: &SparsityPattern) -> Result<EstimateResult, CoreError> {
    if support.n() != y.cols() {
        return Err(CoreError::DimensionMismatch(format!(
            "support is over n = {}, matrix has n = {}",
            support.n(),
            y.cols()
        )));
    }
    Ok(EstimateResult::closed_form(
        sum_columns(y, support.indices()),
        Some(support.clone()),
    ))
}

/// One greedy round: the minimum-cardinality subset of `active` (ties broken
/// by lexicographic order of the ascending index list) whose column sum
/// passes `‖L(Y_J)‖² ≥ 12σ²(|J|p + λ|J|²)`, or `None` when no subset of
/// cardinality at most `cap` passes.
pub fn gss_round_search(
    y: &Matrix,
    active: &[usize],
    cap: usize,
    sigma: f64,
    lambda: f64,
) -> Option<Vec<usize>> {
    let p = y.rows() as f64;
    for k in 1..=cap.min(active.len()) {
        let kf = k as f64;
        let threshold = 12.0 * sigma * sigma * (kf * p + lambda * kf * kf);
        let mut chosen = Vec::with_capacity(k);
        let sum = vec![0.0; y.rows()];
        if extend_subset(y, active, 0, k, threshold, &sum, &mut chosen) {
            return Some(chosen);
        }
    }
    None
}

fn extend_subset(
    y: &Matrix,
    active: &[usize],
    start: usize,
    remaining: usize,
    threshold: f64,
    sum: &[f64],
    chosen: &mut Vec<usize>,
) -> bool {
    if remaining == 0 {
        return squared_norm(sum) >= threshold;
    }
    for pos in start..=active.len() - remaining {
        let col = y.col(active[pos]);
        let next: Vec<f64> = sum.iter().zip(col).map(|(s, v)| s + v).collect();
        chosen.push(active[pos]);
        if extend_subset(y, active, pos + 1, remaining - 1, threshold, &next, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Greedy subset selection: repeatedly extracts the smallest passing subset
/// of the still-active columns, stopping when no subset passes or no column
/// remains, and returns the column sum over everything selected.
///
/// `iterations` counts the rounds that selected a subset. A
/// [`Flag::CardinalityCapBound`] warning marks terminations where a passing
/// set larger than the cap could have been missed.
pub fn gss_estimate(y: &Matrix, cfg: &GssConfig) -> Result<EstimateResult, CoreError> {
    let n = y.cols();
    cfg.validate(n)?;
    let lambda = cfg.lambda(n);

    let mut active: Vec<usize> = (0..n).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut rounds = 0;
    let mut warnings = Vec::new();
    while !active.is_empty() {
        match gss_round_search(y, &active, cfg.cardinality_cap, cfg.sigma, lambda) {
            Some(chosen) => {
                rounds += 1;
                active.retain(|i| !chosen.contains(i));
                selected.extend(chosen);
            }
            None => {
                if cfg.cardinality_cap < active.len() {
                    warnings.push(Flag::CardinalityCapBound);
                }
                break;
            }
        }
    }
    selected.sort_unstable();
    let estimate = sum_columns(y, &selected);
    let support = SparsityPattern::new(n, selected)?;
    Ok(EstimateResult {
        estimate,
        support: Some(support),
        iterations: rounds,
        warnings,
    })
}

/// Adaptive greedy subset selection: runs GSS at `λ = (3/2)·log(4n/δ)`,
/// estimates an effective sparsity from the distance to the naive estimate,
/// and keeps whichever of the two estimators the tighter confidence radius
/// favors. The chosen branch is recorded as a flag.
pub fn adgss_estimate(
    y: &Matrix,
    sigma: f64,
    delta: f64,
    cardinality_cap: usize,
) -> Result<EstimateResult, CoreError> {
    let n = y.cols();
    let p = y.rows() as f64;
    let lambda = 1.5 * (4.0 * n as f64 / delta).ln();
    let cfg = GssConfig {
        sigma,
        delta,
        cardinality_cap,
        lambda_override: Some(lambda),
        budget_override: false,
    };
    let gss = gss_estimate(y, &cfg)?;
    let naive = linear_functional(y);

    let dist = gss
        .estimate
        .iter()
        .zip(&naive)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
        / sigma;
    let log2d = (2.0 / delta).ln();
    let naive_radius = (n as f64 * (2.0 * p + 3.0 * log2d)).sqrt();
    let s_hat = (1..=n)
        .find(|&k| {
            let kf = k as f64;
            dist <= (60.0 * kf * (p + lambda * kf)).sqrt() + naive_radius
        })
        .unwrap_or(n);

    let s_hat_f = s_hat as f64;
    let keep_greedy =
        60.0 * s_hat_f * (p + lambda * s_hat_f) <= 2.0 * n as f64 * p + 3.0 * n as f64 * log2d;
    if keep_greedy {
        let mut warnings = gss.warnings.clone();
        warnings.push(Flag::AdaptiveChoseGreedy);
        Ok(EstimateResult {
            estimate: gss.estimate,
            support: gss.support,
            iterations: gss.iterations,
            warnings,
        })
    } else {
        Ok(EstimateResult {
            estimate: naive,
            support: Some(SparsityPattern::full(n)),
            iterations: gss.iterations,
            warnings: vec![Flag::AdaptiveChoseNaive],
        })
    }
}

fn threshold_log_terms(s: usize, p: usize, n: usize) -> f64 {
    let (s, p, n) = (s as f64, p as f64, n as f64);
    let ratio = (1.0 + n / (s * s)).ln();
    let dimensional = p.sqrt() * (1.0 + n * n * p / s.powi(4)).ln().sqrt();
    ratio.max(dimensional)
}

/// Group hard thresholding level:
/// `λ = σ·√(p + 4·{log(1+n/s²) ∨ √p·log^{1/2}(1+n²p/s⁴)})`.
pub fn ght_threshold(cfg: &ThresholdConfig, p: usize, n: usize) -> f64 {
    let s = cfg.effective_sparsity();
    cfg.sigma * (p as f64 + 4.0 * threshold_log_terms(s, p, n)).sqrt()
}

/// Group hard thresholding: keeps exactly the columns with Euclidean norm
/// at least `λ` (boundary kept) and sums them. Runs in `O(pn)`.
pub fn ght_estimate(y: &Matrix, lambda: f64) -> EstimateResult {
    assert!(lambda > 0.0, "threshold must be positive");
    let kept: Vec<usize> = (0..y.cols())
        .filter(|&j| euclidean_norm(y.col(j)) >= lambda)
        .collect();
    let estimate = sum_columns(y, &kept);
    let support = SparsityPattern::new(y.cols(), kept).expect("indices in range");
    EstimateResult::closed_form(estimate, Some(support))
}

/// Group soft thresholding shrink weight:
/// `γ = √(4·{log(1+n/s²) ∨ √p·log^{1/2}(1+n²p/s⁴)})`. The noise level enters
/// later, through the data-dependent radius of [`gst_estimate`].
pub fn gst_gamma(cfg: &ThresholdConfig, p: usize, n: usize) -> f64 {
    let s = cfg.effective_sparsity();
    (4.0 * threshold_log_terms(s, p, n)).sqrt()
}

/// Group soft thresholding with the data-dependent radius: column `i`
/// becomes `(1 − σγ/(‖Y_i‖² − σ²p)₊^{1/2})₊ · Y_i`, and is zeroed outright
/// whenever `‖Y_i‖² ≤ σ²p` — signals that weak are not worth fitting.
pub fn gst_estimate(y: &Matrix, sigma: f64, gamma: f64) -> EstimateResult {
    assert!(sigma > 0.0, "sigma must be positive");
    assert!(gamma >= 0.0, "gamma must be nonnegative");
    let p = y.rows() as f64;
    let noise_floor = sigma * sigma * p;
    let mut estimate = vec![0.0; y.rows()];
    let mut kept = Vec::new();
    for (j, col) in y.columns().enumerate() {
        let ns = squared_norm(col);
        if ns <= noise_floor {
            continue;
        }
        let factor = 1.0 - sigma * gamma / (ns - noise_floor).sqrt();
        if factor <= 0.0 {
            continue;
        }
        kept.push(j);
        for (e, v) in estimate.iter_mut().zip(col) {
            *e += factor * v;
        }
    }
    let support = SparsityPattern::new(y.cols(), kept).expect("indices in range");
    EstimateResult::closed_form(estimate, Some(support))
}

/// Element-wise hard threshold level: `λ = σ·√(2·log(1+n/s²))`.
pub fn ewht_threshold(sigma: f64, n: usize, s: usize) -> f64 {
    assert!(sigma > 0.0 && s >= 1);
    sigma * (2.0 * (1.0 + n as f64 / (s * s) as f64).ln()).sqrt()
}

/// Element-wise hard thresholding, one-sided: entry `(i,j)` contributes to
/// coordinate `i` of the estimate exactly when `Y_{i,j} > λ` (strict). The
/// selected support of columns is undefined for this estimator.
pub fn ewht_estimate(y: &Matrix, lambda: f64) -> EstimateResult {
    assert!(lambda > 0.0, "threshold must be positive");
    ewht_with_rule(y, |v| v > lambda)
}

/// Two-sided variant keeping entries with `|Y_{i,j}| > λ`. The default
/// estimator is the one-sided rule; this one exists for the symmetric
/// analysis.
pub fn ewht_estimate_two_sided(y: &Matrix, lambda: f64) -> EstimateResult {
    assert!(lambda > 0.0, "threshold must be positive");
    ewht_with_rule(y, |v| v.abs() > lambda)
}

fn ewht_with_rule(y: &Matrix, keep: impl Fn(f64) -> bool) -> EstimateResult {
    let mut estimate = vec![0.0; y.rows()];
    for col in y.columns() {
        for (e, &v) in estimate.iter_mut().zip(col) {
            if keep(v) {
                *e += v;
            }
        }
    }
    EstimateResult::closed_form(estimate, None)
}

/// Minimizer of `‖z − t‖² + λ‖t‖₂`: the group soft threshold
/// `(1 − λ/(2‖z‖₂))₊ · z`.
pub fn group_soft_threshold(z: &[f64], lambda: f64) -> Vec<f64> {
    let norm = euclidean_norm(z);
    if norm == 0.0 {
        return vec![0.0; z.len()];
    }
    let factor = (1.0 - lambda / (2.0 * norm)).max(0.0);
    z.iter().map(|v| factor * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::column_norms;

    fn assert_vec_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "got {got:?}, want {want:?}");
        }
    }

    #[test]
    fn naive_is_noiseless_passthrough() {
        let theta = Matrix::from_columns(&[vec![1.0, -2.0], vec![0.5, 0.5], vec![0.0, 0.0]])
            .unwrap();
        let result = naive_estimate(&theta);
        assert_eq!(result.estimate, linear_functional(&theta));
        assert_eq!(result.support.unwrap(), SparsityPattern::full(3));
        assert_eq!(result.iterations, 0);

        let zero = Matrix::zeros(4, 5);
        assert_eq!(naive_estimate(&zero).estimate, vec![0.0; 4]);
    }

    #[test]
    fn oracle_empty_and_full_support() {
        let y = Matrix::from_columns(&[vec![1.0, 2.0], vec![-1.0, 3.0]]).unwrap();
        let empty = oracle_estimate(&y, &SparsityPattern::empty(2)).unwrap();
        assert_eq!(empty.estimate, vec![0.0, 0.0]);
        assert_eq!(empty.support.unwrap().len(), 0);

        let full = oracle_estimate(&y, &SparsityPattern::full(2)).unwrap();
        assert_eq!(full.estimate, naive_estimate(&y).estimate);
    }

    #[test]
    fn gss_zero_matrix_selects_nothing() {
        let y = Matrix::zeros(3, 6);
        let cfg = GssConfig::new(1.0, 0.1, 6);
        let result = gss_estimate(&y, &cfg).unwrap();
        assert_eq!(result.estimate, vec![0.0; 3]);
        assert!(result.support.unwrap().is_empty());
        assert_eq!(result.iterations, 0);
    }

    #[test]
    fn gss_finds_single_dominant_column() {
        // Threshold for singletons is 12(p + λ) = 36 < 200 = ‖(10,10)‖².
        let mut cols = vec![vec![0.0, 0.0]; 4];
        cols[2] = vec![10.0, 10.0];
        let y = Matrix::from_columns(&cols).unwrap();
        let cfg = GssConfig::new(1.0, 0.1, 4).with_lambda(1.0);
        let result = gss_estimate(&y, &cfg).unwrap();
        assert_eq!(result.support.unwrap().indices(), &[2]);
        assert_eq!(result.estimate, vec![10.0, 10.0]);
        assert_eq!(result.iterations, 1);
        assert!(result.warnings.is_empty());
    }

    #[test]
    fn gss_cap_guard_requires_override() {
        // Columns strong enough that every round exits at the first
        // singleton, so the unlocked search stays cheap.
        let cols = vec![vec![100.0, 100.0]; 40];
        let y = Matrix::from_columns(&cols).unwrap();
        let cfg = GssConfig::new(1.0, 0.1, 40).with_cap(21);
        assert!(matches!(
            gss_estimate(&y, &cfg),
            Err(CoreError::SearchBudget { .. })
        ));
        let mut unlocked = GssConfig::new(1.0, 0.1, 40).with_cap(21);
        unlocked.budget_override = true;
        let result = gss_estimate(&y, &unlocked).unwrap();
        assert_eq!(result.support.unwrap().len(), 40);
    }

    #[test]
    fn gss_cap_bound_warning_when_cap_binds() {
        let y = Matrix::zeros(2, 6);
        let cfg = GssConfig::new(1.0, 0.1, 6).with_cap(2);
        let result = gss_estimate(&y, &cfg).unwrap();
        assert_eq!(result.warnings, vec![Flag::CardinalityCapBound]);

        let full = gss_estimate(&y, &GssConfig::new(1.0, 0.1, 6)).unwrap();
        assert!(full.warnings.is_empty());
    }

    #[test]
    fn adgss_zero_matrix_keeps_greedy_branch() {
        // p small relative to n so the greedy radius at ŝ = 1 wins. The cap
        // keeps the empty search over 64 columns to singleton scans.
        let y = Matrix::zeros(4, 64);
        let result = adgss_estimate(&y, 1.0, 0.1, 1).unwrap();
        assert_eq!(result.estimate, vec![0.0; 4]);
        assert!(result.warnings.contains(&Flag::AdaptiveChoseGreedy));
    }

    #[test]
    fn ght_threshold_matches_hand_evaluation() {
        let cfg = ThresholdConfig::s_known(1.0, 10).unwrap();
        let lambda = ght_threshold(&cfg, 100, 1000);
        let expected_sq = 100.0
            + 4.0 * f64::max(11.0f64.ln(), 10.0 * (10001.0f64.ln()).sqrt());
        assert!((lambda * lambda - expected_sq).abs() < 1e-10);
        assert!((lambda * lambda - 221.40).abs() < 0.01);

        // λ² scales with σ².
        let cfg2 = ThresholdConfig::s_known(2.0, 10).unwrap();
        let lambda2 = ght_threshold(&cfg2, 100, 1000);
        assert!((lambda2 * lambda2 - 4.0 * lambda * lambda).abs() < 1e-9);

        // s-free equals s-known at s = 1.
        let free = ThresholdConfig::s_free(1.0).unwrap();
        let known1 = ThresholdConfig::s_known(1.0, 1).unwrap();
        assert_eq!(ght_threshold(&free, 60, 500), ght_threshold(&known1, 60, 500));
    }

    #[test]
    fn ght_estimate_keeps_boundary_norm() {
        let y = Matrix::from_columns(&[vec![3.0, 4.0], vec![1.0, 1.0]]).unwrap();
        let result = ght_estimate(&y, 5.0);
        assert_eq!(result.estimate, vec![3.0, 4.0]);
        assert_eq!(result.support.unwrap().one_based(), vec![1]);
    }

    #[test]
    fn ght_estimate_kill_all_and_keep_all() {
        let y = Matrix::from_columns(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let killed = ght_estimate(&y, 10.0);
        assert_eq!(killed.estimate, vec![0.0, 0.0]);
        assert!(killed.support.unwrap().is_empty());

        let kept = ght_estimate(&y, 0.1);
        assert_eq!(kept.estimate, naive_estimate(&y).estimate);
    }

    #[test]
    fn gst_gamma_and_identity_with_ght() {
        let cfg = ThresholdConfig::s_known(1.0, 10).unwrap();
        let gamma = gst_gamma(&cfg, 100, 1000);
        assert!((gamma * gamma - 121.40).abs() < 0.01);

        // λ²_GHT = σ²(p + γ²) at matching inputs, for any σ.
        for sigma in [1.0, 2.0, 0.3] {
            let c = ThresholdConfig::s_known(sigma, 7).unwrap();
            let lam = ght_threshold(&c, 40, 300);
            let gam = gst_gamma(&c, 40, 300);
            assert!((lam * lam - sigma * sigma * (40.0 + gam * gam)).abs() < 1e-9);
        }

        let free = ThresholdConfig::s_free(1.0).unwrap();
        let known1 = ThresholdConfig::s_known(1.0, 1).unwrap();
        assert_eq!(gst_gamma(&free, 60, 500), gst_gamma(&known1, 60, 500));
    }

    #[test]
    fn gst_estimate_closed_form_cases() {
        // ‖Y_i‖² = 8 with σ = 1, p = 4, γ = 1: shrink factor 1 − 1/√4 = 0.5.
        let y = Matrix::from_columns(&[vec![2.0, 2.0, 0.0, 0.0]]).unwrap();
        let result = gst_estimate(&y, 1.0, 1.0);
        assert_vec_close(&result.estimate, &[1.0, 1.0, 0.0, 0.0], 1e-14);
        assert_eq!(result.support.unwrap().one_based(), vec![1]);

        // Below the noise floor everything dies, even at γ = 0.
        let weak = Matrix::from_columns(&[vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        let dead = gst_estimate(&weak, 1.0, 0.0);
        assert_eq!(dead.estimate, vec![0.0; 4]);
        assert!(dead.support.unwrap().is_empty());

        // γ = 0 above the floor keeps the column untouched.
        let kept = gst_estimate(&y, 1.0, 0.0);
        assert_eq!(kept.estimate, vec![2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn gst_support_matches_ght_at_shifted_threshold() {
        let cols: Vec<Vec<f64>> = (0..12)
            .map(|j| {
                (0..6)
                    .map(|i| ((i * 7 + j * 13) as f64 * 0.37).sin() * (j as f64 * 0.4))
                    .collect()
            })
            .collect();
        let y = Matrix::from_columns(&cols).unwrap();
        let sigma = 0.8f64;
        let gamma = 1.3f64;
        let p = 6.0f64;
        let lambda = (sigma * sigma * (p + gamma * gamma)).sqrt();
        let gst = gst_estimate(&y, sigma, gamma);
        let ght = ght_estimate(&y, lambda);
        // Off the boundary the supports agree exactly.
        let norms = column_norms(&y);
        for (j, nrm) in norms.iter().enumerate() {
            if ((nrm * nrm) - lambda * lambda).abs() < 1e-9 {
                continue;
            }
            assert_eq!(
                gst.support.as_ref().unwrap().contains(j),
                ght.support.as_ref().unwrap().contains(j),
                "column {j}"
            );
        }
    }

    #[test]
    fn ewht_threshold_formula() {
        let lambda = ewht_threshold(1.0, 100, 10);
        assert!((lambda * lambda - 2.0 * 2.0f64.ln()).abs() < 1e-12);
        // n = s² collapses to 2σ²·log 2.
        let collapsed = ewht_threshold(3.0, 49, 7);
        assert!((collapsed * collapsed - 18.0 * 2.0f64.ln()).abs() < 1e-12);
        // λ² proportional to σ².
        let base = ewht_threshold(1.0, 64, 2);
        let scaled = ewht_threshold(2.0, 64, 2);
        assert!((scaled * scaled - 4.0 * base * base).abs() < 1e-12);
    }

    #[test]
    fn ewht_one_sided_rule() {
        // Columns (2, 0.5) and (−2, 3) at λ = 1: only 2 and 3 survive.
        let y = Matrix::from_columns(&[vec![2.0, 0.5], vec![-2.0, 3.0]]).unwrap();
        let result = ewht_estimate(&y, 1.0);
        assert_eq!(result.estimate, vec![2.0, 3.0]);
        assert!(result.support.is_none());

        // Entries equal to λ are dropped by the strict inequality.
        let edge = Matrix::from_columns(&[vec![1.0, 0.2]]).unwrap();
        assert_eq!(ewht_estimate(&edge, 1.0).estimate, vec![0.0, 0.0]);

        let single = Matrix::from_columns(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(ewht_estimate(&single, 1.0).estimate, vec![2.0, 0.0]);
    }

    #[test]
    fn ewht_two_sided_rule() {
        let y = Matrix::from_columns(&[vec![2.0, 0.5], vec![-2.0, 3.0]]).unwrap();
        let result = ewht_estimate_two_sided(&y, 1.0);
        assert_eq!(result.estimate, vec![0.0, 3.0]);
    }

    #[test]
    fn group_soft_threshold_cases() {
        // λ ≥ 2‖z‖ kills the vector.
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 10.0), vec![0.0, 0.0]);
        // λ = 0 leaves it untouched.
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 0.0), vec![3.0, 4.0]);
        // (3,4) at λ = 5 shrinks by half.
        assert_vec_close(&group_soft_threshold(&[3.0, 4.0], 5.0), &[1.5, 2.0], 1e-15);
        // Zero input stays zero.
        assert_eq!(group_soft_threshold(&[0.0, 0.0], 3.0), vec![0.0, 0.0]);
    }

    #[test]
    fn estimates_are_permutation_invariant() {
        let cols: Vec<Vec<f64>> = (0..8)
            .map(|j| (0..5).map(|i| ((i + 2 * j) as f64 * 0.61).cos() * 2.0).collect())
            .collect();
        let y = Matrix::from_columns(&cols).unwrap();
        let perm = [5usize, 2, 7, 0, 3, 6, 1, 4];
        let permuted_cols: Vec<Vec<f64>> = perm.iter().map(|&j| cols[j].clone()).collect();
        let yp = Matrix::from_columns(&permuted_cols).unwrap();

        let tol = 1e-12;
        assert_vec_close(&naive_estimate(&y).estimate, &naive_estimate(&yp).estimate, tol);
        assert_vec_close(
            &ght_estimate(&y, 2.5).estimate,
            &ght_estimate(&yp, 2.5).estimate,
            tol,
        );
        assert_vec_close(
            &gst_estimate(&y, 0.7, 1.1).estimate,
            &gst_estimate(&yp, 0.7, 1.1).estimate,
            tol,
        );
        assert_vec_close(
            &ewht_estimate(&y, 1.2).estimate,
            &ewht_estimate(&yp, 1.2).estimate,
            tol,
        );

        // Supports map through the permutation: position k of yp is column
        // perm[k] of y.
        let sup = ght_estimate(&y, 2.5).support.unwrap();
        let sup_p = ght_estimate(&yp, 2.5).support.unwrap();
        let mapped: Vec<usize> = (0..8).filter(|&k| sup.contains(perm[k])).collect();
        assert_eq!(sup_p.indices(), mapped.as_slice());
    }
}
