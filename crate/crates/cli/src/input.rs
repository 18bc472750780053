//! Scenario and distribution files.

use std::path::Path;
use std::sync::Arc;

use inflation_core::inflation::{InflationScenario, InflationSpec};
use inflation_core::scenario::{CausalScenario, ScenarioDocument};
use ndarray::{ArrayD, IxDyn};
use serde_json::Value;

use crate::CliError;

pub struct LoadedScenario {
    pub scenario: CausalScenario,
    pub inflation: Arc<InflationScenario>,
}

impl LoadedScenario {
    /// Shape `[out…, in…]` of distributions over the original scenario.
    pub fn distribution_shape(&self) -> Vec<usize> {
        let s = &self.scenario;
        s.outcomes_per_party()
            .iter()
            .chain(s.settings_per_party())
            .copied()
            .collect()
    }

    pub fn uniform(&self) -> ArrayD<f64> {
        let n: usize = self.scenario.outcomes_per_party().iter().product();
        ArrayD::from_elem(IxDyn(&self.distribution_shape()), 1.0 / n as f64)
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, CliError> {
    let doc = ScenarioDocument::from_json(&read(path)?)?;
    let (scenario, copies) = doc.build()?;
    let spec = InflationSpec::new(scenario.interrupt(), copies)?;
    let inflation = Arc::new(InflationScenario::new(spec)?);
    Ok(LoadedScenario { scenario, inflation })
}

fn nested(value: &Value, shape: &mut Vec<usize>, depth: usize, out: &mut Vec<f64>) -> Result<(), String> {
    match value {
        Value::Array(items) => {
            if depth == shape.len() {
                if !out.is_empty() {
                    return Err("ragged nesting".into());
                }
                shape.push(items.len());
            } else if shape[depth] != items.len() {
                return Err(format!("ragged array at depth {depth}"));
            }
            items.iter().try_for_each(|v| nested(v, shape, depth + 1, out))
        }
        Value::Number(n) => {
            if depth != shape.len() {
                return Err("ragged nesting".into());
            }
            out.push(n.as_f64().ok_or("number out of range")?);
            Ok(())
        }
        other => Err(format!("unexpected value {other}")),
    }
}

/// Nested JSON arrays, or text with a shape line followed by row-major
/// values. `#` starts a comment in the text form.
pub fn parse_distribution(text: &str) -> Result<ArrayD<f64>, String> {
    if let Ok(value) = serde_json::from_str::<Value>(text) {
        let mut shape = Vec::new();
        let mut data = Vec::new();
        nested(&value, &mut shape, 0, &mut data)?;
        return ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| e.to_string());
    }
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let shape: Vec<usize> = lines
        .next()
        .ok_or("empty distribution file")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad shape entry `{t}`")))
        .collect::<Result<_, _>>()?;
    let data: Vec<f64> = lines
        .flat_map(str::split_whitespace)
        .map(|t| t.parse().map_err(|_| format!("bad value `{t}`")))
        .collect::<Result<_, _>>()?;
    ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| e.to_string())
}

pub fn load_distribution(path: &Path) -> Result<ArrayD<f64>, CliError> {
    parse_distribution(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
