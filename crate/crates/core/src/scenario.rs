//! JSON scenario files for batch simulation runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    simulate, Controller, ExoActuator, Integrator, SimError, SimulationOptions, Trajectory,
};
use crate::model::{load_native_model, parse_reference_model, ModelDoc, ModelError};
use crate::perturb::PerturbationSchedule;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario file not found: {0}")]
    ScenarioNotFound(String),
    #[error("model file not found: {0}")]
    ModelNotFound(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Native JSON model, or a reference XML model (`.osim` / `.xml`).
    /// Relative paths resolve against the scenario file's directory.
    pub model: PathBuf,
    pub duration: f64,
    pub dt: f64,
    pub controller: Controller,
    #[serde(default)]
    pub initial_q: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_activation: f64,
    #[serde(default)]
    pub exo: Option<ExoActuator>,
    #[serde(default)]
    pub perturbations: PerturbationSchedule,
    #[serde(default)]
    pub integrator: Integrator,
    /// Trajectory CSV destination, relative like `model`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Loads a model file, choosing the format by extension.
pub fn load_model_file(path: &Path) -> Result<ModelDoc, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ScenarioError::ModelNotFound(path.display().to_string()),
        _ => ScenarioError::Io {
            path: path.display().to_string(),
            source: e,
        },
    })?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    if ext == "osim" || ext == "xml" {
        let parsed = parse_reference_model(&text)?;
        for w in &parsed.warnings {
            log::warn!("{}: {w}", path.display());
        }
        Ok(parsed.model)
    } else {
        Ok(load_native_model(&text)?)
    }
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let spec: ScenarioSpec = serde_json::from_str(text)?;
        spec.check()?;
        Ok(spec)
    }

    /// Reads a scenario and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                ScenarioError::ScenarioNotFound(path.display().to_string())
            }
            _ => ScenarioError::Io {
                path: path.display().to_string(),
                source: e,
            },
        })?;
        let mut spec = ScenarioSpec::from_json(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        spec.model = dir.join(&spec.model);
        spec.output = spec.output.map(|o| dir.join(o));
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(ScenarioError::Invalid(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(ScenarioError::Invalid(format!(
                "dt must be in (0, 0.01], got {}",
                self.dt
            )));
        }
        self.controller.check().map_err(ScenarioError::Invalid)?;
        self.perturbations
            .check()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn options(&self) -> SimulationOptions {
        SimulationOptions {
            duration: self.duration,
            dt: self.dt,
            initial_q: self.initial_q.clone(),
            initial_activation: self.initial_activation,
            exo: self.exo.clone(),
            perturbations: self.perturbations.clone(),
            integrator: self.integrator,
        }
    }

    /// Runs the scenario on an already loaded model.
    pub fn run_with(&self, model: &ModelDoc) -> Result<Trajectory, ScenarioError> {
        let mut policy = self.controller.policy();
        Ok(simulate(model, policy.as_mut(), &self.options())?)
    }

    /// Loads the model and runs the scenario.
    pub fn run(&self) -> Result<Trajectory, ScenarioError> {
        let model = load_model_file(&self.model)?;
        self.run_with(&model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_reject() {
        let ok = r#"{"model": "m.json", "duration": 0.5, "dt": 0.001,
                     "controller": {"type": "constant", "u": {"flexor": 0.2}}}"#;
        let s = ScenarioSpec::from_json(ok).unwrap();
        assert_eq!(s.integrator, Integrator::SemiImplicitEuler);
        assert!(s.output.is_none());
        for bad in [
            r#"{"model": "m.json", "duration": 0, "dt": 0.001, "controller": {"type": "constant", "u": {}}}"#,
            r#"{"model": "m.json", "duration": 1, "dt": 0.1, "controller": {"type": "constant", "u": {}}}"#,
            r#"{"model": "m.json", "duration": 1, "dt": 0.001, "controller": {"type": "magic"}}"#,
            r#"{"model": "m.json", "duration": 1, "dt": 0.001, "controller": {"type": "constant", "u": {}}, "extra": 1}"#,
        ] {
            assert!(ScenarioSpec::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn missing_files() {
        let e = ScenarioSpec::load(Path::new("missing.json")).unwrap_err();
        assert_eq!(e.to_string(), "scenario file not found: missing.json");
        let e = load_model_file(Path::new("nowhere/model.json")).unwrap_err();
        assert!(matches!(e, ScenarioError::ModelNotFound(_)));
    }

    #[test]
    fn relative_paths_resolve_against_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(
            &path,
            r#"{"model": "m.json", "duration": 0.1, "dt": 0.001, "output": "out.csv",
                "controller": {"type": "constant", "u": {}}}"#,
        )
        .unwrap();
        let s = ScenarioSpec::load(&path).unwrap();
        assert_eq!(s.model, dir.path().join("m.json"));
        assert_eq!(s.output, Some(dir.path().join("out.csv")));
    }
}
