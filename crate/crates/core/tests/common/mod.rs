#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::OnceLock;

use datri_core::metric::{ChartPoint, Vec3};
use datri_core::{ModelSetup, Registry};
use proptest::test_runner::{Config, RngSeed};

pub const MODELS: [&str; 7] = [
    "euclidean",
    "round_sphere",
    "hyperbolic",
    "product_s2xr",
    "berger_sphere",
    "heisenberg",
    "perturbed_conformal",
];

pub const DATRI_MODELS: [&str; 6] = [
    "euclidean",
    "round_sphere",
    "hyperbolic",
    "product_s2xr",
    "berger_sphere",
    "heisenberg",
];

pub fn setups() -> &'static [ModelSetup] {
    static SETUPS: OnceLock<Vec<ModelSetup>> = OnceLock::new();
    SETUPS.get_or_init(|| {
        let reg = Registry::builtin();
        MODELS
            .iter()
            .map(|n| reg.instantiate(n, &BTreeMap::new()).unwrap())
            .collect()
    })
}

pub fn setup(name: &str) -> &'static ModelSetup {
    setups().iter().find(|s| s.model.name == name).unwrap()
}

pub fn with_params(name: &str, params: &[(&str, f64)]) -> ModelSetup {
    let p = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    Registry::builtin().instantiate(name, &p).unwrap()
}

pub fn fixed(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}

/// Point of the central part of the chart; `f` in `[0, 1]³` spans it.
pub fn interior(s: &ModelSetup, f: [f64; 3]) -> ChartPoint {
    let d = &s.model.chart_domain;
    let c: [f64; 3] =
        std::array::from_fn(|i| d.lo[i] + (d.hi[i] - d.lo[i]) * (0.35 + 0.3 * f[i]));
    ChartPoint { coords: c }
}

/// Unit vector at `p` with orthonormal-frame components proportional to `d`.
pub fn unit(s: &ModelSetup, p: &ChartPoint, d: [f64; 3]) -> Vec3 {
    let b = s.model.orthonormal_basis(p).unwrap();
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    (b[0] * d[0] + b[1] * d[1] + b[2] * d[2]) / n
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
