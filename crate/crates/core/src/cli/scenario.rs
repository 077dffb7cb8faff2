//! Scenario files: JSON documents describing one design problem.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::adversary::{invert_binary_channel, BinaryChannel};
use crate::probcore::{ChannelMatrix, ProbVector};
use crate::provider::ProviderScenario;
use crate::Budget;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Base,
    Adversary,
    Provider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    #[serde(default)]
    pub scale: SweepScale,
}

impl Sweep {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let invalid = |m: &str| Err(CliError::validation(format!("sweep: {m}")));
        if self.steps == 0 {
            return invalid("steps must be at least 1");
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return invalid("start and stop must be finite");
        }
        if self.steps == 1 {
            return Ok(vec![self.start]);
        }
        let n = (self.steps - 1) as f64;
        match self.scale {
            SweepScale::Linear => Ok((0..self.steps)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / n)
                .collect()),
            SweepScale::Log => {
                if self.start <= 0.0 || self.stop <= 0.0 {
                    return invalid("log scale needs positive start and stop");
                }
                let (a, b) = (self.start.ln(), self.stop.ln());
                Ok((0..self.steps)
                    .map(|i| (a + (b - a) * i as f64 / n).exp())
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bsc {
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSweep {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleGrid {
    Kernel,
    #[default]
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    pub resolution: Option<usize>,
    pub grid: Option<OracleGrid>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    pub x: Option<Vec<String>>,
    pub y: Option<Vec<String>>,
}

/// Raw scenario document. Matrices are row-major with rows indexing the output
/// symbol, so `leakage[x][y] = P(X=x | Y=y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub labels: Option<Labels>,
    #[serde(default)]
    pub leakage: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub p_y: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub bsc: Option<Bsc>,
    #[serde(default)]
    pub alpha_sweep: Option<AlphaSweep>,
    #[serde(default)]
    pub budget: Option<Budget>,
    #[serde(default)]
    pub oracle: Option<OracleSettings>,
    #[serde(default)]
    pub channel: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub p_y_given_x: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub p_z_given_x: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub p_x: Option<Vec<f64>>,
}

pub fn load(path: &Path) -> Result<ScenarioFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// Parses a scenario, reporting the JSON path and position of the first error.
pub fn parse(text: &str) -> Result<ScenarioFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::validation(format!(
            "{path}: {inner} (line {}, column {})",
            inner.line(),
            inner.column()
        ))
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::validation(format!(
            "schema_version: unsupported version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    Ok(file)
}

fn required<'a, T>(field: &str, v: &'a Option<T>) -> Result<&'a T, CliError> {
    v.as_ref()
        .ok_or_else(|| CliError::validation(format!("{field}: missing required field")))
}

pub fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<ChannelMatrix, CliError> {
    let Some(first) = rows.first() else {
        return Err(CliError::validation(format!("{field}: matrix is empty")));
    };
    for (i, r) in rows.iter().enumerate() {
        if r.len() != first.len() {
            return Err(CliError::validation(format!(
                "{field}[{i}]: row has {} entries, expected {}",
                r.len(),
                first.len()
            )));
        }
    }
    ChannelMatrix::from_rows(rows).map_err(|e| CliError::validation(format!("{field}: {e}")))
}

fn distribution(field: &str, entries: &[f64], labels: Option<&Vec<String>>) -> Result<ProbVector, CliError> {
    let v = ProbVector::new(entries.to_vec()).map_err(|e| CliError::validation(format!("{field}: {e}")))?;
    match labels {
        Some(l) => v
            .with_labels(l.clone())
            .map_err(|e| CliError::validation(format!("labels: {e}"))),
        None => Ok(v),
    }
}

pub fn bsc_matrix(alpha: f64) -> Result<ChannelMatrix, CliError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CliError::validation(format!("bsc.alpha: {alpha} is outside [0, 1]")));
    }
    matrix("bsc", &[vec![1.0 - alpha, alpha], vec![alpha, 1.0 - alpha]])
}

impl ScenarioFile {
    fn require_kind(&self, kind: ScenarioKind) -> Result<(), CliError> {
        if self.kind != kind {
            return Err(CliError::validation(format!(
                "kind: expected {kind:?} scenario, found {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn label_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| "scenario".into())
    }

    pub fn y_labels(&self) -> Option<&Vec<String>> {
        self.labels.as_ref().and_then(|l| l.y.as_ref())
    }

    pub fn x_labels(&self) -> Option<&Vec<String>> {
        self.labels.as_ref().and_then(|l| l.x.as_ref())
    }

    /// The base-problem leakage: an explicit matrix or a BSC with parameter `alpha`.
    pub fn leakage_matrix(&self) -> Result<ChannelMatrix, CliError> {
        match (&self.leakage, &self.bsc) {
            (Some(_), Some(_)) => Err(CliError::validation(
                "leakage: give either leakage or bsc, not both".to_string(),
            )),
            (Some(rows), None) => matrix("leakage", rows),
            (None, Some(b)) => bsc_matrix(b.alpha),
            (None, None) => Err(CliError::validation("leakage: missing required field".into())),
        }
    }

    pub fn py(&self) -> Result<ProbVector, CliError> {
        distribution("p_y", required("p_y", &self.p_y)?, self.y_labels())
    }

    pub fn epsilon(&self) -> Result<f64, CliError> {
        let eps = *required("epsilon", &self.epsilon)?;
        if !eps.is_finite() {
            return Err(CliError::validation("epsilon: must be finite".into()));
        }
        Ok(eps)
    }

    pub fn base(&self) -> Result<(ChannelMatrix, ProbVector), CliError> {
        self.require_kind(ScenarioKind::Base)?;
        Ok((self.leakage_matrix()?, self.py()?))
    }

    pub fn adversary(&self) -> Result<(ChannelMatrix, ProbVector, BinaryChannel), CliError> {
        self.require_kind(ScenarioKind::Adversary)?;
        let channel = matrix("channel", required("channel", &self.channel)?)?;
        let channel = invert_binary_channel(&channel).map_err(|e| CliError::from(e).context("channel"))?;
        Ok((self.leakage_matrix()?, self.py()?, channel))
    }

    pub fn provider(&self) -> Result<ProviderScenario, CliError> {
        self.require_kind(ScenarioKind::Provider)?;
        let pyx = matrix("p_y_given_x", required("p_y_given_x", &self.p_y_given_x)?)?;
        let pzx = matrix("p_z_given_x", required("p_z_given_x", &self.p_z_given_x)?)?;
        let px = distribution("p_x", required("p_x", &self.p_x)?, self.x_labels())?;
        ProviderScenario::new(pyx, pzx, px).map_err(CliError::from)
    }

    pub fn oracle(&self) -> OracleSettings {
        self.oracle.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_field_path_on_type_error() {
        let err = parse(r#"{"schema_version": 1, "kind": "base", "leakage": [[0.5, "x"]]}"#).unwrap_err();
        assert_eq!(err.code, 1);
        assert!(err.message.starts_with("leakage[0][1]"), "{}", err.message);
        assert!(err.message.contains("line 1"));
    }

    #[test]
    fn ragged_rows_are_located() {
        let f = parse(r#"{"schema_version": 1, "kind": "base", "leakage": [[0.5, 0.5], [0.5]], "p_y": [0.5, 0.5]}"#).unwrap();
        let err = f.base().unwrap_err();
        assert!(err.message.starts_with("leakage[1]"), "{}", err.message);
    }

    #[test]
    fn sweep_values() {
        let s = Sweep { start: 0.01, stop: 0.04, steps: 4, scale: SweepScale::Linear };
        let v = s.values().unwrap();
        assert_eq!(v.len(), 4);
        assert!((v[3] - 0.04).abs() < 1e-15);
        let s = Sweep { start: 0.001, stop: 0.1, steps: 3, scale: SweepScale::Log };
        assert!((s.values().unwrap()[1] - 0.01).abs() < 1e-15);
        assert!(Sweep { steps: 0, ..s }.values().is_err());
    }

    #[test]
    fn rejects_unknown_version_and_fields() {
        assert!(parse(r#"{"schema_version": 2, "kind": "base"}"#).is_err());
        assert!(parse(r#"{"schema_version": 1, "kind": "base", "lekage": []}"#).is_err());
    }
}
