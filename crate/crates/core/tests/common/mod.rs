#![allow(dead_code)]

use std::sync::Arc;

use indexmap::IndexMap;
use inflation_core::inflation::{InflationScenario, InflationSpec};
use inflation_core::relaxation::{distribution_from_fn, Relaxation, RelaxationOptions};
use inflation_core::scenario::CausalScenario;
use ndarray::ArrayD;

pub const CHSH: &str = "<A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>";
pub const MERMIN: &str = "<A1 B0 C0> + <A0 B1 C0> + <A0 B0 C1> - <A1 B1 C1>";
pub const BONET: &str =
    "pAB(00|00) + pA(1|0) - pAB(10|00) + pAB(00|10) + pAB(10|10) + pA(0|2) - pAB(00|20)";

pub fn dag(edges: &[(&str, &[&str])]) -> IndexMap<String, Vec<String>> {
    edges
        .iter()
        .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
        .collect()
}

pub fn inflate(s: &CausalScenario, copies: Vec<usize>) -> Arc<InflationScenario> {
    let spec = InflationSpec::new(s.interrupt(), copies).unwrap();
    Arc::new(InflationScenario::new(spec).unwrap())
}

pub fn bell_scenario() -> CausalScenario {
    CausalScenario::new(IndexMap::new(), vec![2, 2], vec![2, 2], None).unwrap()
}

pub fn triangle_scenario(settings: usize) -> CausalScenario {
    let d = dag(&[
        ("rhoAB", &["A", "B"]),
        ("rhoBC", &["B", "C"]),
        ("rhoAC", &["A", "C"]),
    ]);
    CausalScenario::new(d, vec![2, 2, 2], vec![settings; 3], None).unwrap()
}

pub fn instrumental_scenario() -> CausalScenario {
    let d = dag(&[("rhoAB", &["A", "B"]), ("A", &["B"])]);
    CausalScenario::new(d, vec![2, 2], vec![3, 1], None).unwrap()
}

pub fn relaxation(
    inf: &Arc<InflationScenario>,
    columns: &str,
    max_len: Option<usize>,
    commuting: bool,
    supports_problem: bool,
) -> Relaxation {
    Relaxation::from_spec(
        inf.clone(),
        columns,
        max_len,
        RelaxationOptions {
            commuting,
            supports_problem,
        },
    )
    .unwrap()
}

/// `ν·P_W + (1 − ν)/8`.
pub fn w_noisy(nu: f64) -> ArrayD<f64> {
    distribution_from_fn(&[2, 2, 2], &[1, 1, 1], |o, _| {
        let w = if o.iter().sum::<usize>() == 1 { 1.0 / 3.0 } else { 0.0 };
        nu * w + (1.0 - nu) / 8.0
    })
}

pub fn uniform(outcomes: &[usize], settings: &[usize]) -> ArrayD<f64> {
    let n: usize = outcomes.iter().product();
    distribution_from_fn(outcomes, settings, |_, _| 1.0 / n as f64)
}
