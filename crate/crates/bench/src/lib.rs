//! Shared fixtures for the criterion benchmarks.

use sf_core::harness::{
    gen_functional_instance, gen_robust_instance, EstimatorConfig, EstimatorEntry, ExperimentSpec,
    FunctionalInstance, MuSpec, RobustInstance, SignalSpec,
};

/// A functional-model instance with spherical signals at five noise sigmas.
pub fn functional_fixture(p: usize, n: usize, s: usize, seed: u64) -> FunctionalInstance {
    let spec = ExperimentSpec {
        p,
        n,
        s,
        sigma: 1.0,
        delta: 0.1,
        signal: SignalSpec::spherical(5.0 * (p as f64).sqrt()),
        mu: None,
        estimators: vec![EstimatorEntry::new(EstimatorConfig::Naive)],
        trials: 1,
        master_seed: seed,
        paper_layout: false,
    };
    gen_functional_instance(&spec, 0).expect("valid spec")
}

/// A robust-model instance with outliers at ten noise sigmas per coordinate
/// scale.
pub fn robust_fixture(p: usize, n: usize, s: usize, seed: u64) -> RobustInstance {
    let spec = ExperimentSpec {
        p,
        n,
        s,
        sigma: 1.0,
        delta: 0.1,
        signal: SignalSpec::spherical(10.0 * (p as f64).sqrt()),
        mu: Some(MuSpec::Constant { constant: 1.0 }),
        estimators: vec![EstimatorEntry::new(EstimatorConfig::SampleMean)],
        trials: 1,
        master_seed: seed,
        paper_layout: false,
    };
    gen_robust_instance(&spec, 0).expect("valid spec")
}
