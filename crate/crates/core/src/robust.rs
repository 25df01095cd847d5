//! Robust estimation of a common Gaussian mean when an unknown subset of
//! columns carries arbitrary shifts: `Y_i = μ + θ_i + σξ_i` with most
//! `θ_i = 0`.
//!
//! Three estimators of `μ` live here, in increasing order of sophistication:
//!
//! 1. baselines — the sample mean and the coordinate-wise median;
//! 2. the group-lasso profile-likelihood estimator, minimizing
//!    `Σ‖Y_i − m − t_i‖² + λΣ‖t_i‖₂` by exact alternating block
//!    minimization (the mean step and the group soft threshold step are both
//!    closed-form);
//! 3. iterative soft thresholding (IST), which alternates between a shrink
//!    of the centered observations `Z_i = (YΠ)_i + L̂_n` at a data-free
//!    level `γ` and an update of the theoretical error bound `ε` that
//!    determines the next `γ`. The `(ε, γ)` schedule is a pure function of
//!    `(s, n, p, δ)`; the data only enters through the shrunk matrix.
//!
//! Every estimator of `μ` is tied to the functional estimate through the
//! identity `μ̂ = L_n(Y) − L̂_n`.

use crate::model::{
    center_columns, euclidean_norm, normalized_functional, squared_distance, squared_norm,
    CoreError, EstimateResult, Flag, Matrix, SparsityPattern,
};

/// One experiment's worth of robust-model inputs: observations, known noise
/// level, the assumed outlier count and the confidence level.
#[derive(Clone, Debug)]
pub struct RobustInstanceView {
    pub y: Matrix,
    pub sigma: f64,
    pub s: usize,
    pub delta: f64,
}

impl RobustInstanceView {
    pub fn new(y: Matrix, sigma: f64, s: usize, delta: f64) -> Result<Self, CoreError> {
        crate::model::NoiseModel::new(sigma)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        if s > y.cols() {
            return Err(CoreError::InvalidParameter(format!(
                "assumed outlier count {} exceeds n = {}",
                s,
                y.cols()
            )));
        }
        Ok(Self { y, sigma, s, delta })
    }

    /// The deviation bounds need `s ≤ n/32`; violating that is legal but
    /// flagged.
    pub fn guard_warnings(&self) -> Vec<Flag> {
        if 32 * self.s > self.y.cols() {
            vec![Flag::OutlierGuardExceeded]
        } else {
            Vec::new()
        }
    }
}

/// Output of the group-lasso fit.
#[derive(Clone, Debug)]
pub struct GroupLassoResult {
    pub mu_hat: Vec<f64>,
    pub theta_hat: Matrix,
    pub objective: f64,
    /// Largest violation of the first-order conditions over columns.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The sample mean of the columns, `(1/n)·Y·1`.
pub fn sample_mean(y: &Matrix) -> Vec<f64> {
    normalized_functional(y)
}

/// Coordinate-wise median; even column counts use the midpoint of the two
/// central order statistics.
pub fn coordinatewise_median(y: &Matrix) -> Vec<f64> {
    let n = y.cols();
    let mut row = vec![0.0; n];
    (0..y.rows())
        .map(|i| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = y.get(i, j);
            }
            row.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
            if n % 2 == 1 {
                row[n / 2]
            } else {
                0.5 * (row[n / 2 - 1] + row[n / 2])
            }
        })
        .collect()
}

/// Penalty level of the group-lasso deviation bound:
/// `λ² = 32σ²p + 256σ²·log(n/δ)`, equal to `32σ²(p + 8·log(n/δ))`.
pub fn group_lasso_lambda(sigma: f64, p: usize, n: usize, delta: f64) -> f64 {
    assert!(sigma > 0.0 && delta > 0.0 && delta < 1.0);
    (32.0 * sigma * sigma * p as f64 + 256.0 * sigma * sigma * (n as f64 / delta).ln()).sqrt()
}

fn column_mean_of_residual(y: &Matrix, theta: &Matrix) -> Vec<f64> {
    let n = y.cols();
    let mut acc = vec![0.0; y.rows()];
    for j in 0..n {
        for ((a, yv), tv) in acc.iter_mut().zip(y.col(j)).zip(theta.col(j)) {
            *a += yv - tv;
        }
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

fn group_lasso_objective(y: &Matrix, mu: &[f64], theta: &Matrix, lambda: f64) -> f64 {
    let mut obj = 0.0;
    for j in 0..y.cols() {
        let tcol = theta.col(j);
        let fit: f64 = y
            .col(j)
            .iter()
            .zip(mu)
            .zip(tcol)
            .map(|((yv, m), t)| {
                let d = yv - m - t;
                d * d
            })
            .sum();
        obj += fit + lambda * euclidean_norm(tcol);
    }
    obj
}

fn group_lasso_kkt(y: &Matrix, mu: &[f64], theta: &Matrix, lambda: f64) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..y.cols() {
        let tcol = theta.col(j);
        let tnorm = euclidean_norm(tcol);
        let violation = if tnorm > 0.0 {
            let mut sq = 0.0;
            for ((yv, m), t) in y.col(j).iter().zip(mu).zip(tcol) {
                let g = -2.0 * (yv - m - t) + lambda * t / tnorm;
                sq += g * g;
            }
            sq.sqrt()
        } else {
            let resid: f64 = y
                .col(j)
                .iter()
                .zip(mu)
                .map(|(yv, m)| {
                    let d = yv - m;
                    d * d
                })
                .sum();
            (2.0 * resid.sqrt() - lambda).max(0.0)
        };
        worst = worst.max(violation);
    }
    worst
}

/// Minimizes `Σ‖Y_i − m − t_i‖² + λΣ‖t_i‖₂` by alternating the two exact
/// block updates: `θ_i ← group-soft-threshold of (Y_i − m)` at radius `λ/2`
/// and `m ← column mean of (Y − Θ)`.
///
/// Convergence means `kkt_residual ≤ tol`, measured against the closed-loop
/// mean so that `μ̂ = L_n(Y) − L_n(Θ̂)` holds exactly. Iteration stops on
/// convergence, on a bit-stationary residual (the iterate cannot move any
/// further in floating point) or at `max_iter`; exhausting the budget
/// reports the best iterate with `converged = false` rather than failing.
pub fn group_lasso_fit(
    view: &RobustInstanceView,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<GroupLassoResult, CoreError> {
    let y = &view.y;
    if y.cols() < 2 {
        return Err(CoreError::DegenerateCentering);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let n = y.cols();
    let mut theta = Matrix::zeros(y.rows(), n);
    let mut mu = column_mean_of_residual(y, &theta);
    let mut kkt_residual = f64::INFINITY;
    let mut prev_kkt = f64::NAN;
    let mut repeats = 0;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iter {
        iterations += 1;
        for j in 0..n {
            let residual: Vec<f64> = y.col(j).iter().zip(&mu).map(|(yv, m)| yv - m).collect();
            let shrunk = crate::functional::group_soft_threshold(&residual, lambda);
            theta.col_mut(j).copy_from_slice(&shrunk);
        }
        mu = column_mean_of_residual(y, &theta);
        kkt_residual = group_lasso_kkt(y, &mu, &theta, lambda);
        if kkt_residual <= tol {
            converged = true;
            break;
        }
        if kkt_residual.to_bits() == prev_kkt.to_bits() {
            repeats += 1;
            if repeats >= 2 {
                break;
            }
        } else {
            repeats = 0;
        }
        prev_kkt = kkt_residual;
    }
    let objective = group_lasso_objective(y, &mu, &theta, lambda);
    Ok(GroupLassoResult {
        mu_hat: mu,
        theta_hat: theta,
        objective,
        kkt_residual,
        iterations,
        converged,
    })
}

/// Shrinks one centered-plus-recentered observation `Z_i`:
/// `(1 − σγ/(‖Z_i‖² − ((n−1)/n)σ²p)₊^{1/2})₊ · Z_i`, zero whenever
/// `‖Z_i‖² ≤ ((n−1)/n)σ²p + σ²γ²`.
pub fn robust_shrink(z: &[f64], sigma: f64, gamma: f64, n: usize, p: usize) -> Vec<f64> {
    assert!(n >= 2, "the centered model needs n >= 2");
    assert!(sigma > 0.0 && gamma >= 0.0);
    let centered_noise = (n - 1) as f64 / n as f64 * sigma * sigma * p as f64;
    let excess = squared_norm(z) - centered_noise;
    if excess <= 0.0 {
        return vec![0.0; z.len()];
    }
    let factor: f64 = 1.0 - sigma * gamma / excess.sqrt();
    if factor <= 0.0 {
        return vec![0.0; z.len()];
    }
    z.iter().map(|v| factor * v).collect()
}

/// Shrink level from the current error bound:
/// `γ² = 8ε² + 4√(4ε⁴ + pε²)`.
pub fn ist_gamma(epsilon: f64, p: usize) -> f64 {
    assert!(epsilon >= 0.0);
    let e2 = epsilon * epsilon;
    (8.0 * e2 + 4.0 * (4.0 * e2 * e2 + p as f64 * e2).sqrt()).sqrt()
}

/// The `γ`-free part of the error-bound update:
/// `a = (4/n)·(s + √(sp) + √(2s·log(4/δ)))`.
pub fn ist_a(s: usize, n: usize, p: usize, delta: f64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0);
    let sf = s as f64;
    4.0 / n as f64 * (sf + (sf * p as f64).sqrt() + (2.0 * sf * (4.0 / delta).ln()).sqrt())
}

/// Error-bound update after a shrink round at level `γ`:
/// `ε ← (4/n)·(sγ + s + √(sp) + √(2s·log(4/δ)))`.
pub fn ist_epsilon_a(s: usize, n: usize, p: usize, gamma: f64, delta: f64) -> f64 {
    assert!(gamma >= 0.0 && delta > 0.0 && delta < 1.0);
    let sf = s as f64;
    4.0 / n as f64
        * (sf * gamma + sf + (sf * p as f64).sqrt() + (2.0 * sf * (4.0 / delta).ln()).sqrt())
}

/// State of the IST schedule after `iteration` shrink rounds: the current
/// error bound, the shrink level it implies for the next round, and the
/// functional estimate so far. `gamma = ist_gamma(epsilon, p)` holds in
/// every state.
#[derive(Clone, Debug)]
pub struct IstState {
    pub epsilon: f64,
    pub gamma: f64,
    pub l_hat: Vec<f64>,
    pub iteration: usize,
}

/// Per-iteration trace of the IST run. `envelope_applicable` records whether
/// the contraction envelope's preconditions (`ε₀² ≤ p`, `n ≥ 33s`,
/// `a ≤ √p/2`) held at initialization.
#[derive(Clone, Debug)]
pub struct IstTrace {
    pub states: Vec<IstState>,
    pub envelope_applicable: bool,
}

/// Full output of the IST pipeline.
#[derive(Clone, Debug)]
pub struct IstOutcome {
    pub l_hat: EstimateResult,
    pub mu_hat: EstimateResult,
    pub trace: IstTrace,
}

/// Iterative soft thresholding. Initializes `Θ̂` with the group-lasso fit at
/// `λ² = 32σ²(p + 8·log(n/δ))` and `ε ← √288·sλ/(nσ)`, then for `N` rounds
/// recomputes `L̂_n = L_n(Θ̂)`, shrinks every `Z_i = (YΠ)_i + L̂_n` at level
/// `γ(ε)` and updates `ε`. Returns `L̂_n` after the last round and
/// `μ̂ = L_n(Y) − L̂_n`.
///
/// `s = 0` short-circuits to the sample mean: the schedule would degenerate
/// to `γ = 0`, treating every observation as an outlier signal.
pub fn ist_estimate(view: &RobustInstanceView, n_iter: usize) -> Result<IstOutcome, CoreError> {
    let y = &view.y;
    let n = y.cols();
    let p = y.rows();
    if n < 2 {
        return Err(CoreError::DegenerateCentering);
    }
    let mut warnings = view.guard_warnings();

    if view.s == 0 {
        warnings.push(Flag::NoOutlierShortCircuit);
        let mu = sample_mean(y);
        let zeros = vec![0.0; p];
        let state = IstState {
            epsilon: 0.0,
            gamma: 0.0,
            l_hat: zeros.clone(),
            iteration: 0,
        };
        return Ok(IstOutcome {
            l_hat: EstimateResult {
                estimate: zeros,
                support: Some(SparsityPattern::empty(n)),
                iterations: 0,
                warnings: warnings.clone(),
            },
            mu_hat: EstimateResult {
                estimate: mu,
                support: None,
                iterations: 0,
                warnings,
            },
            trace: IstTrace {
                states: vec![state],
                envelope_applicable: false,
            },
        });
    }

    let sigma = view.sigma;
    let delta = view.delta;
    let lambda = group_lasso_lambda(sigma, p, n, delta);
    let init = group_lasso_fit(view, lambda, 1e-10, 10_000)?;
    if !init.converged {
        warnings.push(Flag::GroupLassoNotConverged);
    }
    let mut theta = init.theta_hat;
    let mut epsilon = 288.0f64.sqrt() * view.s as f64 * lambda / (n as f64 * sigma);

    let a = ist_a(view.s, n, p, delta);
    let envelope_applicable = epsilon * epsilon <= p as f64
        && n as f64 >= 33.0 * view.s as f64
        && a <= 0.5 * (p as f64).sqrt();

    let y_centered = center_columns(y)?;
    let log_term = (4.0 * n as f64 / delta).ln();
    let safe_floor = 4.0 * log_term + 4.0 * (p as f64 * log_term).sqrt();

    let mut states = Vec::with_capacity(n_iter + 1);
    states.push(IstState {
        epsilon,
        gamma: ist_gamma(epsilon, p),
        l_hat: normalized_functional(&theta),
        iteration: 0,
    });

    let mut shrink_warned = false;
    for k in 1..=n_iter {
        let l_hat = normalized_functional(&theta);
        let gamma = ist_gamma(epsilon, p);
        if gamma * gamma <= safe_floor && !shrink_warned {
            warnings.push(Flag::ShrinkLevelBelowSafe);
            shrink_warned = true;
        }
        for i in 0..n {
            let z: Vec<f64> = y_centered
                .col(i)
                .iter()
                .zip(&l_hat)
                .map(|(c, l)| c + l)
                .collect();
            let shrunk = robust_shrink(&z, sigma, gamma, n, p);
            theta.col_mut(i).copy_from_slice(&shrunk);
        }
        epsilon = ist_epsilon_a(view.s, n, p, gamma, delta);
        states.push(IstState {
            epsilon,
            gamma: ist_gamma(epsilon, p),
            l_hat: normalized_functional(&theta),
            iteration: k,
        });
    }

    let l_final = states.last().expect("at least the init state").l_hat.clone();
    let mu: Vec<f64> = normalized_functional(y)
        .iter()
        .zip(&l_final)
        .map(|(m, l)| m - l)
        .collect();
    let support: Vec<usize> = (0..n)
        .filter(|&j| theta.col(j).iter().any(|v| *v != 0.0))
        .collect();
    Ok(IstOutcome {
        l_hat: EstimateResult {
            estimate: l_final,
            support: Some(SparsityPattern::new(n, support)?),
            iterations: n_iter,
            warnings: warnings.clone(),
        },
        mu_hat: EstimateResult {
            estimate: mu,
            support: None,
            iterations: n_iter,
            warnings,
        },
        trace: IstTrace {
            states,
            envelope_applicable,
        },
    })
}

/// Whether one simulated trial satisfies the three group-lasso deviation
/// inequalities: the Frobenius bound on `Θ̂`, the functional bound on
/// `L_n(Θ̂)` and the mean bound on `μ̂`. Ground truth is simulation-only.
pub fn group_lasso_mu_deviation_check(
    result: &GroupLassoResult,
    mu: &[f64],
    theta: &Matrix,
    lambda: f64,
    sigma: f64,
    delta: f64,
    s: usize,
) -> (bool, bool, bool) {
    let n = theta.cols() as f64;
    let p = mu.len() as f64;
    let sf = s as f64;
    let lam2 = lambda * lambda;

    let frob_sq: f64 = theta
        .data()
        .iter()
        .zip(result.theta_hat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let first = frob_sq <= 9.0 * sf * lam2;

    let l_theta = normalized_functional(theta);
    let l_theta_hat = normalized_functional(&result.theta_hat);
    let functional_sq = squared_distance(&l_theta_hat, &l_theta);
    let functional_bound = 288.0 * sf * sf * lam2 / (n * n);
    let second = functional_sq <= functional_bound;

    let mu_sq = squared_distance(&result.mu_hat, mu);
    let mu_bound = functional_bound
        + 4.0 * sigma * sigma * p / n
        + 8.0 * sigma * sigma * (2.0 / delta).ln() / n;
    let third = mu_sq <= mu_bound;

    (first, second, third)
}
