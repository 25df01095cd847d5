//! Verb implementations.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sf_core::harness::{
    apply_functional_estimator, apply_robust_estimator, gen_functional_instance,
    gen_robust_instance, mc_risk, rate_sweep, EstimatorEntry, ExperimentSpec, FunctionalInstance,
    MuSpec, RiskRow, RobustInstance, SignalSpec, SweepAxis, RNG_PEDIGREE,
};
use sf_core::model::{EstimateResult, SparsityPattern};
use sf_core::report::{
    lemma_checks_to_csv, matrix_to_csv, parse_risk_csv, read_matrix, risk_rows_to_csv,
    support_to_csv, vector_to_csv_line, write_sidecar, MatrixHeader, TimingMode,
};
use sf_core::{bounds, Matrix};

use crate::{svg, CliError, CommonArgs, OutputFormat, Verb};

pub fn run(verb: Verb) -> Result<(), CliError> {
    match verb {
        Verb::Gen(args) => with_pool(&args, gen),
        Verb::Estimate(args) => with_pool(&args, estimate),
        Verb::Bench(args) => with_pool(&args, bench),
        Verb::Sweep(args) => with_pool(&args, sweep),
        Verb::Verify(args) => with_pool(&args, verify),
        Verb::Plot(args) => plot(&args),
    }
}

fn with_pool(
    args: &CommonArgs,
    body: impl FnOnce(&CommonArgs) -> Result<(), CliError> + Send,
) -> Result<(), CliError> {
    let threads = resolve_threads(args)?;
    let pool = rayon_pool(threads)?;
    pool.install(|| body(args))
}

fn resolve_threads(args: &CommonArgs) -> Result<usize, CliError> {
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        return Ok(t);
    }
    if let Ok(env) = std::env::var("SF_THREADS") {
        let t: usize = env
            .parse()
            .map_err(|_| CliError::validation(format!("SF_THREADS={env:?} is not a number")))?;
        if t == 0 {
            return Err(CliError::validation("SF_THREADS must be at least 1"));
        }
        return Ok(t);
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn rayon_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::internal(format!("thread pool: {e}")))
}

fn require_config(args: &CommonArgs) -> Result<&PathBuf, CliError> {
    args.config
        .as_ref()
        .ok_or_else(|| CliError::validation("--config is required for this verb"))
}

fn require_out(args: &CommonArgs) -> Result<&PathBuf, CliError> {
    args.out
        .as_ref()
        .ok_or_else(|| CliError::validation("--out is required for this verb"))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::validation(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::validation(format!(
            "malformed config {} (line {}, column {}): {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

fn sidecar(
    args: &CommonArgs,
    out: &Path,
    verb: &str,
    resolved_config: serde_json::Value,
) -> Result<(), CliError> {
    let value = serde_json::json!({
        "verb": verb,
        "config": resolved_config,
        "seed_override": args.seed,
        "format": args.format.as_str(),
        "stable_timing": args.stable_timing,
        "rng": RNG_PEDIGREE,
    });
    write_sidecar(out, &value).map_err(|e| CliError::internal(e.to_string()))
}

fn timing_mode(args: &CommonArgs) -> TimingMode {
    if args.stable_timing {
        TimingMode::Zeroed
    } else {
        TimingMode::Measured
    }
}

fn load_spec(args: &CommonArgs) -> Result<ExperimentSpec, CliError> {
    let mut spec: ExperimentSpec = load_json(require_config(args)?)?;
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn gen(args: &CommonArgs) -> Result<(), CliError> {
    let spec = load_spec(args)?;
    let out = require_out(args)?;
    let header = |seed: u64| MatrixHeader {
        p: spec.p,
        n: spec.n,
        s: spec.s,
        sigma: spec.sigma,
        seed,
    };
    let (y_text, theta, support, seed, mu) = if spec.mu.is_some() {
        let RobustInstance {
            y,
            mu,
            theta,
            support,
            seed,
            ..
        } = gen_robust_instance(&spec, 0)?;
        (matrix_to_csv(&y, &header(seed)), theta, support, seed, Some(mu))
    } else {
        let FunctionalInstance {
            y,
            theta,
            support,
            seed,
            ..
        } = gen_functional_instance(&spec, 0)?;
        (matrix_to_csv(&y, &header(seed)), theta, support, seed, None)
    };
    write_output(out, &y_text)?;
    write_output(
        &sibling(out, "theta.csv"),
        &matrix_to_csv(&theta, &header(seed)),
    )?;
    write_output(&sibling(out, "support.csv"), &support_to_csv(&support))?;
    if let Some(mu) = mu {
        write_output(
            &sibling(out, "mu.csv"),
            &format!("{}\n", vector_to_csv_line(&mu)),
        )?;
    }
    sidecar(args, out, "gen", serde_json::to_value(spec.resolved()).unwrap())?;
    println!("wrote instance to {}", out.display());
    Ok(())
}

fn sibling(path: &Path, extension: &str) -> PathBuf {
    path.with_extension(extension)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EstimateConfig {
    matrix: PathBuf,
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    s: Option<usize>,
    #[serde(default)]
    delta: Option<f64>,
    /// True support (1-based), required by the oracle estimator.
    #[serde(default)]
    support: Option<Vec<usize>>,
    #[serde(flatten)]
    entry: EstimatorEntry,
}

fn estimate(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: EstimateConfig = load_json(require_config(args)?)?;
    let (y, file_header) = read_matrix(&cfg.matrix)?;
    let sigma = cfg.sigma.unwrap_or(file_header.sigma);
    let s = cfg.s.unwrap_or(file_header.s);
    let delta = cfg.delta.unwrap_or(0.1);
    let n = y.cols();
    let p = y.rows();

    let support = match &cfg.support {
        Some(ids) => SparsityPattern::from_one_based(n, ids)?,
        None => SparsityPattern::empty(n),
    };
    if matches!(
        cfg.entry.config,
        sf_core::harness::EstimatorConfig::Oracle
    ) && cfg.support.is_none()
    {
        return Err(CliError::validation(
            "the oracle estimator needs the true `support` in the config",
        ));
    }

    let robust = cfg.entry.config.is_robust();
    let spec = ExperimentSpec {
        p,
        n,
        s,
        sigma,
        delta,
        signal: SignalSpec::zero(),
        mu: robust.then_some(MuSpec::Constant { constant: 0.0 }),
        estimators: vec![cfg.entry.clone()],
        trials: 1,
        master_seed: 0,
        paper_layout: false,
    };
    spec.validate()?;

    let result: EstimateResult = if robust {
        let instance = RobustInstance {
            y,
            mu: vec![0.0; p],
            theta: Matrix::zeros(p, n),
            support,
            sigma,
            seed: file_header.seed,
        };
        apply_robust_estimator(&cfg.entry.config, &instance, &spec)?
    } else {
        let instance = FunctionalInstance {
            y,
            theta: Matrix::zeros(p, n),
            support,
            sigma,
            seed: file_header.seed,
        };
        apply_functional_estimator(&cfg.entry.config, &instance, &spec)?
    };

    let text = match args.format {
        OutputFormat::Csv => {
            let mut out = vector_to_csv_line(&result.estimate);
            out.push('\n');
            match &result.support {
                Some(sup) => out.push_str(&format!(
                    "# support (1-based): {}\n",
                    sup.one_based()
                        .iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>()
                        .join(",")
                )),
                None => out.push_str("# support: undefined\n"),
            }
            if !result.warnings.is_empty() {
                let flags: Vec<String> =
                    result.warnings.iter().map(|w| w.to_string()).collect();
                out.push_str(&format!("# warnings: {}\n", flags.join(",")));
            }
            out
        }
        OutputFormat::Json => {
            let value = serde_json::json!({
                "estimator": cfg.entry.resolved_id(),
                "estimate": result.estimate,
                "support_one_based": result.support.as_ref().map(|s| s.one_based()),
                "iterations": result.iterations,
                "warnings": result.warnings,
            });
            serde_json::to_string_pretty(&value).expect("serializable") + "\n"
        }
    };
    print!("{text}");
    if let Some(out) = &args.out {
        write_output(out, &text)?;
        let resolved_cfg = EstimateConfig {
            matrix: cfg.matrix.clone(),
            sigma: Some(sigma),
            s: Some(s),
            delta: Some(delta),
            support: cfg.support.clone(),
            entry: {
                let mut entry = cfg.entry.clone();
                entry.id = Some(entry.resolved_id());
                entry
            },
        };
        sidecar(
            args,
            out,
            "estimate",
            serde_json::to_value(&resolved_cfg).unwrap(),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bench / sweep
// ---------------------------------------------------------------------------

fn bench(args: &CommonArgs) -> Result<(), CliError> {
    let spec = load_spec(args)?;
    let out = require_out(args)?;
    let reports = mc_risk(&spec)?;
    let rows: Vec<RiskRow> = reports
        .into_iter()
        .map(|report| RiskRow {
            p: spec.p,
            n: spec.n,
            s: spec.s,
            sigma: spec.sigma,
            report,
        })
        .collect();
    emit_rows(args, out, &rows)?;
    sidecar(args, out, "bench", serde_json::to_value(spec.resolved()).unwrap())?;
    print_rows(&rows);
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SweepConfig {
    axis: SweepAxis,
    values: Vec<usize>,
    spec: ExperimentSpec,
}

fn sweep(args: &CommonArgs) -> Result<(), CliError> {
    let mut cfg: SweepConfig = load_json(require_config(args)?)?;
    if let Some(seed) = args.seed {
        cfg.spec.master_seed = seed;
    }
    cfg.spec.validate()?;
    let out = require_out(args)?;
    let rows = rate_sweep(&cfg.spec, cfg.axis, &cfg.values)?;
    emit_rows(args, out, &rows)?;
    let resolved = SweepConfig {
        axis: cfg.axis,
        values: cfg.values.clone(),
        spec: cfg.spec.resolved(),
    };
    sidecar(args, out, "sweep", serde_json::to_value(&resolved).unwrap())?;
    print_rows(&rows);
    Ok(())
}

fn emit_rows(args: &CommonArgs, out: &Path, rows: &[RiskRow]) -> Result<(), CliError> {
    let text = match args.format {
        OutputFormat::Csv => risk_rows_to_csv(rows, timing_mode(args)),
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let mut v = serde_json::to_value(r).expect("serializable");
                    if args.stable_timing {
                        v["wall_time_ms"] = serde_json::json!(0);
                    }
                    v
                })
                .collect();
            serde_json::to_string_pretty(&rows).expect("serializable") + "\n"
        }
    };
    write_output(out, &text)
}

fn print_rows(rows: &[RiskRow]) {
    for row in rows {
        let r = &row.report;
        let mut line = format!(
            "{:<16} p={:<5} n={:<5} s={:<3} mse={:.6e} stderr={:.3e}",
            r.estimator_id, row.p, row.n, row.s, r.mean_sq_error, r.std_error
        );
        if let Some(rate) = r.violation_rate {
            line.push_str(&format!(" violation_rate={rate:.4}"));
        }
        println!("{line}");
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct VerifyConfig {
    #[serde(default)]
    master_seed: Option<u64>,
}

fn verify(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: VerifyConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => VerifyConfig::default(),
    };
    let seed = args.seed.or(cfg.master_seed).unwrap_or(2024);
    let checks = bounds::run_verification_suite(seed);

    println!(
        "{:<44} {:>14} {:>14} {:>7} {:>6}",
        "check", "observed", "allowed", "trials", "holds"
    );
    for c in &checks {
        println!(
            "{:<44} {:>14.6e} {:>14.6e} {:>7} {:>6}",
            c.name,
            c.observed,
            c.allowed,
            c.trials,
            if c.holds { "pass" } else { "FAIL" }
        );
    }
    if let Some(out) = &args.out {
        write_output(out, &lemma_checks_to_csv(&checks))?;
        sidecar(
            args,
            out,
            "verify",
            serde_json::json!({ "master_seed": seed }),
        )?;
    }
    if checks.iter().all(|c| c.holds) {
        Ok(())
    } else {
        Err(CliError::internal("one or more lemma checks failed"))
    }
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PlotConfig {
    input: PathBuf,
    axis: SweepAxis,
}

fn plot(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: PlotConfig = load_json(require_config(args)?)?;
    let out = require_out(args)?;
    let text = fs::read_to_string(&cfg.input).map_err(|e| {
        CliError::validation(format!("cannot read {}: {e}", cfg.input.display()))
    })?;
    let rows = parse_risk_csv(&text)?;
    let svg = svg::render_loglog(&rows, cfg.axis)?;
    write_output(out, &svg)?;
    sidecar(args, out, "plot", serde_json::to_value(&cfg).unwrap())?;
    println!("wrote plot to {}", out.display());
    Ok(())
}
