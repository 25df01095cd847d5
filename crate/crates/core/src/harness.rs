//! Seeded instance generation for both observation models, Monte Carlo risk
//! estimation and parameter sweeps.
//!
//! Reproducibility contract: every trial draws from its own generator,
//! seeded by the pure function [`derive_trial_seed`]`(master_seed,
//! trial_index)` (SplitMix64 mixing) and consumed in a documented order —
//! support permutation, signal directions, then noise in column-major
//! order. The generator is ChaCha8 with the ziggurat standard-normal
//! sampler; the statistical payload of a run is therefore bit-identical
//! across repetitions and thread counts. Trials execute in parallel chunks
//! and are folded into the aggregates in trial order.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::functional::{
    adgss_estimate, ewht_estimate, ewht_estimate_two_sided, ewht_threshold, ght_estimate,
    ght_threshold, gss_estimate, gst_estimate, gst_gamma, naive_estimate, oracle_estimate,
    GssConfig, SparsityMode, ThresholdConfig,
};
use crate::model::{
    squared_distance, CoreError, EstimateResult, Flag, Matrix, SparsityPattern,
};
use crate::robust::{
    coordinatewise_median, group_lasso_fit, group_lasso_lambda, ist_estimate, sample_mean,
    RobustInstanceView,
};

/// Pure derivation of a per-trial seed from the master seed (SplitMix64).
pub fn derive_trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(
        trial_index
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifier of the generator stack, pinned into config sidecars so tables
/// stay re-derivable across versions.
pub const RNG_PEDIGREE: &str = "chacha8/splitmix64-trial-derivation/ziggurat-standard-normal";

/// How the nonzero signal columns are built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    /// No signal at all; the designated support still exists for oracles.
    Zero,
    /// Every entry of a support column equals `magnitude`.
    ConstantEps,
    /// Support columns drawn uniformly on the sphere of radius `magnitude`.
    Spherical,
    /// Every entry of a support column equals `σ·p^{-1/4}` — the hardest
    /// profile for norm-based column selection.
    WorstCaseQuartic,
    /// Support columns supplied explicitly.
    CustomMatrix,
}

/// Signal construction on the support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    #[serde(default)]
    pub magnitude: f64,
    /// Must agree with the experiment's `s` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_size: Option<usize>,
    /// The `s` support columns (each of length `p`) for `custom-matrix`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_columns: Option<Vec<Vec<f64>>>,
}

impl SignalSpec {
    pub fn zero() -> Self {
        Self {
            kind: SignalKind::Zero,
            magnitude: 0.0,
            support_size: None,
            custom_columns: None,
        }
    }

    pub fn spherical(magnitude: f64) -> Self {
        Self {
            kind: SignalKind::Spherical,
            magnitude,
            support_size: None,
            custom_columns: None,
        }
    }

    pub fn constant_eps(magnitude: f64) -> Self {
        Self {
            kind: SignalKind::ConstantEps,
            magnitude,
            support_size: None,
            custom_columns: None,
        }
    }

    pub fn worst_case_quartic() -> Self {
        Self {
            kind: SignalKind::WorstCaseQuartic,
            magnitude: 0.0,
            support_size: None,
            custom_columns: None,
        }
    }

    pub fn custom(columns: Vec<Vec<f64>>) -> Self {
        Self {
            kind: SignalKind::CustomMatrix,
            magnitude: 0.0,
            support_size: None,
            custom_columns: Some(columns),
        }
    }
}

/// Common mean of the robust model, either spelled out or constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Constant { constant: f64 },
    Vector(Vec<f64>),
}

impl MuSpec {
    pub fn resolve(&self, p: usize) -> Result<Vec<f64>, CoreError> {
        match self {
            MuSpec::Constant { constant } => Ok(vec![*constant; p]),
            MuSpec::Vector(v) => {
                if v.len() != p {
                    return Err(CoreError::InvalidParameter(format!(
                        "mu has length {}, expected p = {}",
                        v.len(),
                        p
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Default subset-search cap for an `n`-column instance.
pub fn default_cardinality_cap(n: usize) -> usize {
    n.min(12)
}

/// One estimator to run, by identifier plus tuning inputs. Omitted `delta`
/// fields inherit the experiment-level `delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "kebab-case")]
pub enum EstimatorConfig {
    Naive,
    Oracle,
    Gss {
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        cardinality_cap: Option<usize>,
        #[serde(default)]
        lambda_override: Option<f64>,
        #[serde(default)]
        budget_override: bool,
    },
    Adgss {
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        cardinality_cap: Option<usize>,
    },
    Ght {
        #[serde(default)]
        mode: SparsityMode,
        #[serde(default)]
        lambda_override: Option<f64>,
    },
    Gst {
        #[serde(default)]
        mode: SparsityMode,
        #[serde(default)]
        gamma_override: Option<f64>,
    },
    Ewht {
        #[serde(default)]
        mode: SparsityMode,
        #[serde(default)]
        lambda_override: Option<f64>,
        #[serde(default)]
        two_sided: bool,
    },
    SampleMean,
    Median,
    GroupLasso {
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iter: Option<usize>,
    },
    Ist {
        #[serde(default)]
        delta: Option<f64>,
        iterations: usize,
    },
}

impl EstimatorConfig {
    /// Whether the estimator targets `μ` (robust model) rather than `L(Θ)`.
    pub fn is_robust(&self) -> bool {
        matches!(
            self,
            EstimatorConfig::SampleMean
                | EstimatorConfig::Median
                | EstimatorConfig::GroupLasso { .. }
                | EstimatorConfig::Ist { .. }
        )
    }

    fn default_id(&self) -> String {
        let mode_suffix = |mode: &SparsityMode| match mode {
            SparsityMode::SKnown => "",
            SparsityMode::SFree => "-s-free",
        };
        match self {
            EstimatorConfig::Naive => "naive".into(),
            EstimatorConfig::Oracle => "oracle".into(),
            EstimatorConfig::Gss { .. } => "gss".into(),
            EstimatorConfig::Adgss { .. } => "adgss".into(),
            EstimatorConfig::Ght { mode, .. } => format!("ght{}", mode_suffix(mode)),
            EstimatorConfig::Gst { mode, .. } => format!("gst{}", mode_suffix(mode)),
            EstimatorConfig::Ewht {
                mode, two_sided, ..
            } => format!(
                "ewht{}{}",
                mode_suffix(mode),
                if *two_sided { "-two-sided" } else { "" }
            ),
            EstimatorConfig::SampleMean => "sample-mean".into(),
            EstimatorConfig::Median => "median".into(),
            EstimatorConfig::GroupLasso { .. } => "group-lasso".into(),
            EstimatorConfig::Ist { .. } => "ist".into(),
        }
    }
}

/// Estimator entry of an experiment: the configuration, an optional explicit
/// identifier and an optional squared-error deviation bound whose empirical
/// violation rate gets measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorEntry {
    #[serde(flatten)]
    pub config: EstimatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation_bound: Option<f64>,
}

impl EstimatorEntry {
    pub fn new(config: EstimatorConfig) -> Self {
        Self {
            config,
            id: None,
            deviation_bound: None,
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.deviation_bound = Some(bound);
        self
    }

    pub fn resolved_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.config.default_id())
    }
}

/// A full experiment: model dimensions, signal construction, estimators and
/// the trial budget. `mu` switches the generator to the robust model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub p: usize,
    pub n: usize,
    pub s: usize,
    pub sigma: f64,
    pub delta: f64,
    pub signal: SignalSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MuSpec>,
    pub estimators: Vec<EstimatorEntry>,
    pub trials: usize,
    pub master_seed: u64,
    /// Pin the support to the first `s` columns instead of a seeded
    /// permutation of positions.
    #[serde(default)]
    pub paper_layout: bool,
}

impl ExperimentSpec {
    /// A copy with every defaulted tuning field filled in with its effective
    /// value, as embedded in config sidecars.
    pub fn resolved(&self) -> ExperimentSpec {
        let mut spec = self.clone();
        spec.signal.support_size = Some(spec.s);
        for entry in &mut spec.estimators {
            entry.id = Some(entry.resolved_id());
            match &mut entry.config {
                EstimatorConfig::Gss {
                    delta,
                    cardinality_cap,
                    ..
                } => {
                    delta.get_or_insert(self.delta);
                    cardinality_cap.get_or_insert(default_cardinality_cap(self.n));
                }
                EstimatorConfig::Adgss {
                    delta,
                    cardinality_cap,
                } => {
                    delta.get_or_insert(self.delta);
                    cardinality_cap.get_or_insert(default_cardinality_cap(self.n));
                }
                EstimatorConfig::GroupLasso {
                    delta,
                    tol,
                    max_iter,
                } => {
                    delta.get_or_insert(self.delta);
                    tol.get_or_insert(1e-10);
                    max_iter.get_or_insert(10_000);
                }
                EstimatorConfig::Ist { delta, .. } => {
                    delta.get_or_insert(self.delta);
                }
                _ => {}
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.p == 0 || self.n == 0 {
            return Err(CoreError::InvalidParameter(
                "p and n must be positive".into(),
            ));
        }
        if self.s > self.n {
            return Err(CoreError::InvalidParameter(format!(
                "s = {} exceeds n = {}",
                self.s, self.n
            )));
        }
        crate::model::NoiseModel::new(self.sigma)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self.trials == 0 {
            return Err(CoreError::InvalidParameter("trials must be >= 1".into()));
        }
        if let Some(size) = self.signal.support_size {
            if size != self.s {
                return Err(CoreError::InvalidParameter(format!(
                    "signal support_size {} disagrees with s = {}",
                    size, self.s
                )));
            }
        }
        match self.signal.kind {
            SignalKind::ConstantEps | SignalKind::Spherical => {
                if !(self.signal.magnitude.is_finite() && self.signal.magnitude >= 0.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "signal magnitude must be nonnegative, got {}",
                        self.signal.magnitude
                    )));
                }
            }
            SignalKind::CustomMatrix => {
                let cols = self.signal.custom_columns.as_ref().ok_or_else(|| {
                    CoreError::InvalidParameter(
                        "custom-matrix signal needs custom_columns".into(),
                    )
                })?;
                if cols.len() != self.s {
                    return Err(CoreError::InvalidParameter(format!(
                        "custom-matrix supplies {} columns, expected s = {}",
                        cols.len(),
                        self.s
                    )));
                }
                if cols.iter().any(|c| c.len() != self.p) {
                    return Err(CoreError::InvalidParameter(format!(
                        "custom-matrix columns must have length p = {}",
                        self.p
                    )));
                }
            }
            SignalKind::Zero | SignalKind::WorstCaseQuartic => {}
        }
        if let Some(mu) = &self.mu {
            mu.resolve(self.p)?;
        }
        let robust_model = self.mu.is_some();
        for entry in &self.estimators {
            if entry.config.is_robust() != robust_model {
                return Err(CoreError::InvalidParameter(format!(
                    "estimator '{}' does not fit the {} model",
                    entry.resolved_id(),
                    if robust_model { "robust" } else { "functional" }
                )));
            }
            if let EstimatorConfig::Ght { mode, .. }
            | EstimatorConfig::Gst { mode, .. }
            | EstimatorConfig::Ewht { mode, .. } = &entry.config
            {
                if *mode == SparsityMode::SKnown && self.s == 0 {
                    return Err(CoreError::InvalidParameter(format!(
                        "estimator '{}' uses s-known tuning but s = 0",
                        entry.resolved_id()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One generated case of the sparse-functional model.
#[derive(Clone, Debug)]
pub struct FunctionalInstance {
    pub y: Matrix,
    pub theta: Matrix,
    pub support: SparsityPattern,
    pub sigma: f64,
    pub seed: u64,
}

/// One generated case of the robust model.
#[derive(Clone, Debug)]
pub struct RobustInstance {
    pub y: Matrix,
    pub mu: Vec<f64>,
    pub theta: Matrix,
    pub support: SparsityPattern,
    pub sigma: f64,
    pub seed: u64,
}

fn draw_support(rng: &mut ChaCha8Rng, n: usize, s: usize, paper_layout: bool) -> SparsityPattern {
    let indices: Vec<usize> = if paper_layout {
        (0..s).collect()
    } else {
        let mut positions: Vec<usize> = (0..n).collect();
        for i in 0..s {
            let j = rng.random_range(i..n);
            positions.swap(i, j);
        }
        positions.truncate(s);
        positions
    };
    SparsityPattern::new(n, indices).expect("support indices in range")
}

fn fill_signal(
    rng: &mut ChaCha8Rng,
    theta: &mut Matrix,
    support: &SparsityPattern,
    spec: &ExperimentSpec,
) {
    let p = spec.p;
    match spec.signal.kind {
        SignalKind::Zero => {}
        SignalKind::ConstantEps => {
            for &j in support.indices() {
                theta.col_mut(j).fill(spec.signal.magnitude);
            }
        }
        SignalKind::WorstCaseQuartic => {
            let eps = spec.sigma * (p as f64).powf(-0.25);
            for &j in support.indices() {
                theta.col_mut(j).fill(eps);
            }
        }
        SignalKind::Spherical => {
            for &j in support.indices() {
                let mut dir: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
                let norm = crate::model::euclidean_norm(&dir);
                let scale = if norm > 0.0 {
                    spec.signal.magnitude / norm
                } else {
                    0.0
                };
                dir.iter_mut().for_each(|v| *v *= scale);
                theta.col_mut(j).copy_from_slice(&dir);
            }
        }
        SignalKind::CustomMatrix => {
            let cols = spec
                .signal
                .custom_columns
                .as_ref()
                .expect("validated custom columns");
            for (&j, col) in support.indices().iter().zip(cols) {
                theta.col_mut(j).copy_from_slice(col);
            }
        }
    }
}

/// Generates trial `trial_index` of the functional model:
/// `Y = Θ + σΞ` with the support placed by a seeded permutation (or pinned
/// to the first `s` columns under `paper_layout`).
pub fn gen_functional_instance(
    spec: &ExperimentSpec,
    trial_index: u64,
) -> Result<FunctionalInstance, CoreError> {
    spec.validate()?;
    let seed = derive_trial_seed(spec.master_seed, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = draw_support(&mut rng, spec.n, spec.s, spec.paper_layout);
    let mut theta = Matrix::zeros(spec.p, spec.n);
    fill_signal(&mut rng, &mut theta, &support, spec);
    let mut y = theta.clone();
    for j in 0..spec.n {
        for v in y.col_mut(j) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *v += spec.sigma * noise;
        }
    }
    Ok(FunctionalInstance {
        y,
        theta,
        support,
        sigma: spec.sigma,
        seed,
    })
}

/// Generates trial `trial_index` of the robust model:
/// `Y = μ·1ᵀ + Θ + σΞ` with `Θ` supported on the outlier set.
pub fn gen_robust_instance(
    spec: &ExperimentSpec,
    trial_index: u64,
) -> Result<RobustInstance, CoreError> {
    let mu = spec
        .mu
        .as_ref()
        .ok_or_else(|| CoreError::InvalidParameter("robust model needs mu".into()))?
        .resolve(spec.p)?;
    let functional = gen_functional_instance(spec, trial_index)?;
    let mut y = functional.y;
    for j in 0..spec.n {
        for (v, m) in y.col_mut(j).iter_mut().zip(&mu) {
            *v += m;
        }
    }
    Ok(RobustInstance {
        y,
        mu,
        theta: functional.theta,
        support: functional.support,
        sigma: spec.sigma,
        seed: functional.seed,
    })
}

/// Monte Carlo summary for one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub estimator_id: String,
    pub mean_sq_error: f64,
    pub std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation_rate: Option<f64>,
    pub trials: usize,
    pub wall_time_ms: u64,
}

/// A risk report together with the grid point it was measured at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub p: usize,
    pub n: usize,
    pub s: usize,
    pub sigma: f64,
    #[serde(flatten)]
    pub report: RiskReport,
}

/// Applies one configured estimator to a functional-model instance,
/// producing its estimate of `L(Θ)` with the selected support and flags.
pub fn apply_functional_estimator(
    entry: &EstimatorConfig,
    instance: &FunctionalInstance,
    spec: &ExperimentSpec,
) -> Result<EstimateResult, CoreError> {
    let y = &instance.y;
    let n = y.cols();
    let p = y.rows();
    let sigma = spec.sigma;
    match entry {
        EstimatorConfig::Naive => Ok(naive_estimate(y)),
        EstimatorConfig::Oracle => oracle_estimate(y, &instance.support),
        EstimatorConfig::Gss {
            delta,
            cardinality_cap,
            lambda_override,
            budget_override,
        } => {
            let cfg = GssConfig {
                sigma,
                delta: delta.unwrap_or(spec.delta),
                cardinality_cap: cardinality_cap.unwrap_or_else(|| default_cardinality_cap(n)),
                lambda_override: *lambda_override,
                budget_override: *budget_override,
            };
            gss_estimate(y, &cfg)
        }
        EstimatorConfig::Adgss {
            delta,
            cardinality_cap,
        } => adgss_estimate(
            y,
            sigma,
            delta.unwrap_or(spec.delta),
            cardinality_cap.unwrap_or_else(|| default_cardinality_cap(n)),
        ),
        EstimatorConfig::Ght {
            mode,
            lambda_override,
        } => {
            let lambda = match lambda_override {
                Some(l) => *l,
                None => ght_threshold(&threshold_config(sigma, *mode, spec.s)?, p, n),
            };
            Ok(ght_estimate(y, lambda))
        }
        EstimatorConfig::Gst {
            mode,
            gamma_override,
        } => {
            let gamma = match gamma_override {
                Some(g) => *g,
                None => gst_gamma(&threshold_config(sigma, *mode, spec.s)?, p, n),
            };
            Ok(gst_estimate(y, sigma, gamma))
        }
        EstimatorConfig::Ewht {
            mode,
            lambda_override,
            two_sided,
        } => {
            let s_eff = match mode {
                SparsityMode::SKnown => spec.s,
                SparsityMode::SFree => 1,
            };
            let lambda = lambda_override.unwrap_or_else(|| ewht_threshold(sigma, n, s_eff));
            Ok(if *two_sided {
                ewht_estimate_two_sided(y, lambda)
            } else {
                ewht_estimate(y, lambda)
            })
        }
        other => Err(CoreError::InvalidParameter(format!(
            "estimator {other:?} does not estimate L(Θ)"
        ))),
    }
}

fn threshold_config(
    sigma: f64,
    mode: SparsityMode,
    s: usize,
) -> Result<ThresholdConfig, CoreError> {
    match mode {
        SparsityMode::SKnown => ThresholdConfig::s_known(sigma, s),
        SparsityMode::SFree => ThresholdConfig::s_free(sigma),
    }
}

/// Applies one configured estimator to a robust-model instance, producing
/// its estimate of `μ`. The support, when present, is the selected outlier
/// set.
pub fn apply_robust_estimator(
    entry: &EstimatorConfig,
    instance: &RobustInstance,
    spec: &ExperimentSpec,
) -> Result<EstimateResult, CoreError> {
    let y = &instance.y;
    match entry {
        EstimatorConfig::SampleMean => Ok(EstimateResult::closed_form(sample_mean(y), None)),
        EstimatorConfig::Median => Ok(EstimateResult::closed_form(coordinatewise_median(y), None)),
        EstimatorConfig::GroupLasso {
            delta,
            tol,
            max_iter,
        } => {
            let delta = delta.unwrap_or(spec.delta);
            let view = RobustInstanceView::new(y.clone(), spec.sigma, spec.s, delta)?;
            let mut warnings = view.guard_warnings();
            let lambda = group_lasso_lambda(spec.sigma, y.rows(), y.cols(), delta);
            let fit = group_lasso_fit(
                &view,
                lambda,
                tol.unwrap_or(1e-10),
                max_iter.unwrap_or(10_000),
            )?;
            if !fit.converged {
                warnings.push(Flag::GroupLassoNotConverged);
            }
            let outliers: Vec<usize> = (0..y.cols())
                .filter(|&j| fit.theta_hat.col(j).iter().any(|v| *v != 0.0))
                .collect();
            Ok(EstimateResult {
                estimate: fit.mu_hat,
                support: Some(SparsityPattern::new(y.cols(), outliers)?),
                iterations: fit.iterations,
                warnings,
            })
        }
        EstimatorConfig::Ist { delta, iterations } => {
            let view = RobustInstanceView::new(
                y.clone(),
                spec.sigma,
                spec.s,
                delta.unwrap_or(spec.delta),
            )?;
            let outcome = ist_estimate(&view, *iterations)?;
            Ok(EstimateResult {
                estimate: outcome.mu_hat.estimate,
                support: outcome.l_hat.support,
                iterations: outcome.mu_hat.iterations,
                warnings: outcome.mu_hat.warnings,
            })
        }
        other => Err(CoreError::InvalidParameter(format!(
            "estimator {other:?} does not estimate μ"
        ))),
    }
}

/// Streaming mean/variance accumulator (Welford).
#[derive(Clone, Debug, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let sample_var = self.m2 / (self.count - 1) as f64;
        (sample_var / self.count as f64).sqrt()
    }
}

const TRIAL_CHUNK: usize = 256;

/// Runs `spec.trials` independent instances and reports, per estimator, the
/// empirical mean squared error with its standard error, plus the violation
/// rate of any configured deviation bound. Trials are paired: every
/// estimator sees the same instances.
pub fn mc_risk(spec: &ExperimentSpec) -> Result<Vec<RiskReport>, CoreError> {
    spec.validate()?;
    let robust_model = spec.mu.is_some();
    let est_count = spec.estimators.len();

    let mut accs = vec![Welford::default(); est_count];
    let mut violations = vec![0u64; est_count];
    let mut nanos = vec![0u128; est_count];

    let mut start = 0usize;
    while start < spec.trials {
        let end = (start + TRIAL_CHUNK).min(spec.trials);
        let chunk: Result<Vec<Vec<(f64, u128)>>, CoreError> = (start..end)
            .into_par_iter()
            .map(|t| run_trial(spec, t as u64, robust_model))
            .collect();
        // Fold in trial order: aggregation stays independent of the thread
        // count.
        for trial in chunk? {
            for (k, (sq_err, ns)) in trial.into_iter().enumerate() {
                accs[k].push(sq_err);
                nanos[k] += ns;
                if let Some(bound) = spec.estimators[k].deviation_bound {
                    if sq_err > bound {
                        violations[k] += 1;
                    }
                }
            }
        }
        start = end;
    }

    Ok(spec
        .estimators
        .iter()
        .enumerate()
        .map(|(k, entry)| RiskReport {
            estimator_id: entry.resolved_id(),
            mean_sq_error: accs[k].mean(),
            std_error: accs[k].std_error(),
            deviation_bound: entry.deviation_bound,
            violation_rate: entry
                .deviation_bound
                .map(|_| violations[k] as f64 / spec.trials as f64),
            trials: spec.trials,
            wall_time_ms: (nanos[k] / 1_000_000) as u64,
        })
        .collect())
}

fn run_trial(
    spec: &ExperimentSpec,
    trial: u64,
    robust_model: bool,
) -> Result<Vec<(f64, u128)>, CoreError> {
    let mut out = Vec::with_capacity(spec.estimators.len());
    if robust_model {
        let instance = gen_robust_instance(spec, trial)?;
        for entry in &spec.estimators {
            let t0 = Instant::now();
            let result = apply_robust_estimator(&entry.config, &instance, spec)?;
            let elapsed = t0.elapsed().as_nanos();
            out.push((squared_distance(&result.estimate, &instance.mu), elapsed));
        }
    } else {
        let instance = gen_functional_instance(spec, trial)?;
        let target = crate::model::linear_functional(&instance.theta);
        for entry in &spec.estimators {
            let t0 = Instant::now();
            let result = apply_functional_estimator(&entry.config, &instance, spec)?;
            let elapsed = t0.elapsed().as_nanos();
            out.push((squared_distance(&result.estimate, &target), elapsed));
        }
    }
    Ok(out)
}

/// Grid axis of a parameter sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    P,
    N,
    S,
}

/// Runs `mc_risk` at every grid value of the chosen axis, ascending. Each
/// row carries the full grid point so ratios and curves can be computed
/// downstream.
pub fn rate_sweep(
    base: &ExperimentSpec,
    axis: SweepAxis,
    values: &[usize],
) -> Result<Vec<RiskRow>, CoreError> {
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::InvalidParameter(
            "sweep values must be strictly ascending".into(),
        ));
    }
    let mut rows = Vec::new();
    for &value in values {
        let mut spec = base.clone();
        match axis {
            SweepAxis::P => spec.p = value,
            SweepAxis::N => spec.n = value,
            SweepAxis::S => spec.s = value,
        }
        for report in mc_risk(&spec)? {
            rows.push(RiskRow {
                p: spec.p,
                n: spec.n,
                s: spec.s,
                sigma: spec.sigma,
                report,
            });
        }
    }
    Ok(rows)
}

/// MSE ratios `numerator/denominator` per grid value, ascending in the grid.
pub fn mse_ratio_series(
    rows: &[RiskRow],
    axis: SweepAxis,
    numerator_id: &str,
    denominator_id: &str,
) -> Vec<(usize, f64)> {
    let axis_value = |row: &RiskRow| match axis {
        SweepAxis::P => row.p,
        SweepAxis::N => row.n,
        SweepAxis::S => row.s,
    };
    let mut out: Vec<(usize, f64)> = Vec::new();
    for row in rows {
        if row.report.estimator_id != numerator_id {
            continue;
        }
        let value = axis_value(row);
        if let Some(denominator) = rows.iter().find(|r| {
            r.report.estimator_id == denominator_id && axis_value(r) == value
        }) {
            out.push((value, row.report.mean_sq_error / denominator.report.mean_sq_error));
        }
    }
    out.sort_by_key(|(v, _)| *v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn functional_spec() -> ExperimentSpec {
        ExperimentSpec {
            p: 4,
            n: 16,
            s: 2,
            sigma: 1.0,
            delta: 0.1,
            signal: SignalSpec::spherical(6.0),
            mu: None,
            estimators: vec![
                EstimatorEntry::new(EstimatorConfig::Naive),
                EstimatorEntry::new(EstimatorConfig::Oracle),
            ],
            trials: 64,
            master_seed: 42,
            paper_layout: false,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = functional_spec();
        let a = gen_functional_instance(&spec, 7).unwrap();
        let b = gen_functional_instance(&spec, 7).unwrap();
        assert_eq!(a.y.data(), b.y.data());
        assert_eq!(a.support, b.support);
        let c = gen_functional_instance(&spec, 8).unwrap();
        assert_ne!(a.y.data(), c.y.data());
    }

    #[test]
    fn zero_signal_noise_has_unit_variance() {
        let mut spec = functional_spec();
        spec.p = 64;
        spec.n = 64;
        spec.s = 0;
        spec.signal = SignalSpec::zero();
        let instance = gen_functional_instance(&spec, 0).unwrap();
        let data = instance.y.data();
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (data.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "sample variance {var}");
        assert!(instance.theta.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn worst_case_quartic_profile() {
        let mut spec = functional_spec();
        spec.p = 16;
        spec.s = 2;
        spec.signal = SignalSpec::worst_case_quartic();
        let instance = gen_functional_instance(&spec, 3).unwrap();
        let nonzero: Vec<usize> = (0..spec.n)
            .filter(|&j| instance.theta.col(j).iter().any(|v| *v != 0.0))
            .collect();
        assert_eq!(nonzero.len(), 2);
        assert_eq!(nonzero, instance.support.indices());
        for &j in &nonzero {
            for v in instance.theta.col(j) {
                assert_eq!(*v, 0.5); // 16^(-1/4) at σ = 1
            }
        }
    }

    #[test]
    fn custom_matrix_signal_places_columns_on_support() {
        let mut spec = functional_spec();
        spec.signal = SignalSpec::custom(vec![vec![1.0, 2.0, 3.0, 4.0], vec![-1.0, 0.0, 0.5, 0.0]]);
        let instance = gen_functional_instance(&spec, 2).unwrap();
        let support = instance.support.indices();
        assert_eq!(support.len(), 2);
        assert_eq!(instance.theta.col(support[0]), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(instance.theta.col(support[1]), &[-1.0, 0.0, 0.5, 0.0]);

        // Wrong column count or length is rejected up front.
        let mut bad = spec.clone();
        bad.signal = SignalSpec::custom(vec![vec![1.0; 4]]);
        assert!(bad.validate().is_err());
        bad.signal = SignalSpec::custom(vec![vec![1.0; 3], vec![2.0; 3]]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn paper_layout_pins_first_columns() {
        let mut spec = functional_spec();
        spec.paper_layout = true;
        spec.signal = SignalSpec::constant_eps(1.0);
        let instance = gen_functional_instance(&spec, 5).unwrap();
        assert_eq!(instance.support.indices(), &[0, 1]);
    }

    #[test]
    fn robust_model_nests_functional_at_zero_mu() {
        let mut spec = functional_spec();
        spec.mu = Some(MuSpec::Constant { constant: 0.0 });
        spec.estimators = vec![EstimatorEntry::new(EstimatorConfig::SampleMean)];
        let robust = gen_robust_instance(&spec, 11).unwrap();
        let mut functional_spec = spec.clone();
        functional_spec.mu = None;
        functional_spec.estimators = vec![EstimatorEntry::new(EstimatorConfig::Naive)];
        let functional = gen_functional_instance(&functional_spec, 11).unwrap();
        assert_eq!(robust.y.data(), functional.y.data());

        // s = 0 robust model: pure N(μ, σ²) columns.
        let mut clean = spec.clone();
        clean.s = 0;
        clean.signal = SignalSpec::zero();
        clean.mu = Some(MuSpec::Constant { constant: 2.0 });
        let instance = gen_robust_instance(&clean, 0).unwrap();
        assert!(instance.theta.data().iter().all(|v| *v == 0.0));
        assert!(instance.support.is_empty());
    }

    #[test]
    fn mc_risk_is_reproducible_across_thread_counts() {
        let spec = functional_spec();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mc_risk(&spec))
            .unwrap();
        let several = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| mc_risk(&spec))
            .unwrap();
        assert_eq!(single.len(), several.len());
        for (a, b) in single.iter().zip(&several) {
            assert_eq!(a.estimator_id, b.estimator_id);
            assert_eq!(a.mean_sq_error.to_bits(), b.mean_sq_error.to_bits());
            assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
            assert_eq!(a.trials, b.trials);
        }
    }

    #[test]
    fn mc_risk_std_error_shrinks_like_root_trials() {
        let mut spec = functional_spec();
        spec.estimators = vec![EstimatorEntry::new(EstimatorConfig::Naive)];
        spec.trials = 400;
        let base = mc_risk(&spec).unwrap()[0].std_error;
        spec.trials = 800;
        let doubled = mc_risk(&spec).unwrap()[0].std_error;
        let ratio = doubled / base;
        assert!(
            (0.6..=0.82).contains(&ratio),
            "std error ratio {ratio} outside [0.6, 0.82]"
        );
    }

    #[test]
    fn mc_risk_violation_rate_counts_bound_breaches() {
        let mut spec = functional_spec();
        // A bound of zero is violated by every trial; an enormous one never.
        spec.estimators = vec![
            EstimatorEntry::new(EstimatorConfig::Naive).with_bound(0.0),
            EstimatorEntry::new(EstimatorConfig::Naive).with_bound(1e12),
            EstimatorEntry::new(EstimatorConfig::Naive),
        ];
        spec.trials = 16;
        let reports = mc_risk(&spec).unwrap();
        assert_eq!(reports[0].violation_rate, Some(1.0));
        assert_eq!(reports[1].violation_rate, Some(0.0));
        assert_eq!(reports[2].violation_rate, None);
    }

    #[test]
    fn rate_sweep_shapes_and_flatness() {
        let mut spec = functional_spec();
        spec.estimators = vec![EstimatorEntry::new(EstimatorConfig::Naive)];
        spec.trials = 400;

        let empty = rate_sweep(&spec, SweepAxis::S, &[]).unwrap();
        assert!(empty.is_empty());

        assert!(rate_sweep(&spec, SweepAxis::S, &[4, 2]).is_err());

        // Naive risk is σ²np regardless of s: the s-axis curve is flat up to
        // Monte Carlo error.
        let rows = rate_sweep(&spec, SweepAxis::S, &[1, 2, 4]).unwrap();
        assert_eq!(rows.len(), 3);
        let target = (spec.n * spec.p) as f64;
        for row in &rows {
            assert!(
                (row.report.mean_sq_error - target).abs() <= 5.0 * row.report.std_error,
                "naive MSE {} at s={} strays from {}",
                row.report.mean_sq_error,
                row.s,
                target
            );
        }
    }

    #[test]
    fn ratio_series_orders_by_axis() {
        let mk = |p: usize, id: &str, mse: f64| RiskRow {
            p,
            n: 8,
            s: 1,
            sigma: 1.0,
            report: RiskReport {
                estimator_id: id.into(),
                mean_sq_error: mse,
                std_error: 0.0,
                deviation_bound: None,
                violation_rate: None,
                trials: 1,
                wall_time_ms: 0,
            },
        };
        let rows = vec![
            mk(16, "ht", 8.0),
            mk(16, "ght", 2.0),
            mk(4, "ht", 3.0),
            mk(4, "ght", 3.0),
        ];
        let series = mse_ratio_series(&rows, SweepAxis::P, "ht", "ght");
        assert_eq!(series, vec![(4, 1.0), (16, 4.0)]);
    }

    #[test]
    fn estimator_model_mismatch_is_rejected() {
        let mut spec = functional_spec();
        spec.estimators = vec![EstimatorEntry::new(EstimatorConfig::SampleMean)];
        assert!(spec.validate().is_err());

        spec.mu = Some(MuSpec::Constant { constant: 0.0 });
        spec.estimators = vec![EstimatorEntry::new(EstimatorConfig::Naive)];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn resolved_spec_fills_defaults() {
        let mut spec = functional_spec();
        spec.estimators = vec![
            EstimatorEntry::new(EstimatorConfig::Gss {
                delta: None,
                cardinality_cap: None,
                lambda_override: None,
                budget_override: false,
            }),
            EstimatorEntry::new(EstimatorConfig::Ist {
                delta: None,
                iterations: 3,
            }),
        ];
        let resolved = spec.resolved();
        assert_eq!(resolved.signal.support_size, Some(spec.s));
        match &resolved.estimators[0].config {
            EstimatorConfig::Gss {
                delta,
                cardinality_cap,
                ..
            } => {
                assert_eq!(*delta, Some(spec.delta));
                assert_eq!(*cardinality_cap, Some(default_cardinality_cap(spec.n)));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(resolved.estimators[1].id.as_deref(), Some("ist"));
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{
            "p": 16, "n": 32, "s": 4, "sigma": 1.0, "delta": 0.1,
            "signal": {"kind": "spherical", "magnitude": 10.0},
            "estimators": [
                {"estimator": "naive"},
                {"estimator": "ght", "mode": "s-free"},
                {"estimator": "gss", "cardinality_cap": 6, "deviation_bound": 100.0}
            ],
            "trials": 10,
            "master_seed": 7
        }"#;
        let spec: ExperimentSpec = serde_json::from_str(text).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.estimators.len(), 3);
        assert_eq!(spec.estimators[1].resolved_id(), "ght-s-free");
        assert_eq!(spec.estimators[2].deviation_bound, Some(100.0));
        let back = serde_json::to_string(&spec).unwrap();
        let again: ExperimentSpec = serde_json::from_str(&back).unwrap();
        assert_eq!(spec, again);

        let robust = r#"{
            "p": 3, "n": 8, "s": 1, "sigma": 1.0, "delta": 0.1,
            "signal": {"kind": "spherical", "magnitude": 5.0},
            "mu": {"constant": 1.5},
            "estimators": [{"estimator": "sample-mean"}, {"estimator": "ist", "iterations": 3}],
            "trials": 4,
            "master_seed": 1
        }"#;
        let spec: ExperimentSpec = serde_json::from_str(robust).unwrap();
        spec.validate().unwrap();
        let mu = spec.mu.as_ref().unwrap().resolve(3).unwrap();
        assert_eq!(mu, vec![1.5, 1.5, 1.5]);
    }
}
