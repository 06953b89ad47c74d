//! Experiment configuration: one JSON document per experiment.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use serde_json::{Map, Value};

use obslab::bounds::{derived_certificate, oscillator_certificate, LinearCertificate};
use obslab::input::InputSignal;
use obslab::model::{builtin_linear, builtin_oscillator};
use obslab::noise::NoiseModel;
use obslab::predictor::{self, GainInputs, PredictorGain};
use obslab::schedule::{self, SamplingSchedule, ScheduleGenerator};
use obslab::sim::SimConfig;
use obslab::{ObserverSpec, PlantModel};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelConfig,
    /// Tagged predictor, e.g. `{"kind": "constant-minus-q", "q": 0.8}`.
    #[serde(default)]
    pub predictor: Option<Value>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub input: InputSignal,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    #[default]
    Oscillator,
    /// Row-major matrices; `P` is only needed for certification.
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        #[serde(rename = "C")]
        c: Vec<Vec<f64>>,
        #[serde(rename = "R")]
        r: Vec<Vec<f64>>,
        #[serde(rename = "P", default)]
        p: Option<Vec<Vec<f64>>>,
    },
}

/// `{"kind": ..., "T": ..., ...}`; everything except `T` goes to the schedule registry.
#[derive(Debug, Clone, Deserialize)]
pub struct ScheduleConfig(pub Map<String, Value>);

impl Default for ScheduleConfig {
    fn default() -> Self {
        let mut map = Map::new();
        map.insert("kind".into(), Value::from("uniform"));
        map.insert("T".into(), Value::from(0.3));
        Self(map)
    }
}

impl ScheduleConfig {
    pub fn diameter(&self) -> Result<f64, CliError> {
        self.0
            .get("T")
            .and_then(Value::as_f64)
            .ok_or_else(|| CliError::invalid("schedule.T is required and must be a number"))
    }

    pub fn kind(&self) -> Option<&str> {
        self.0.get("kind").and_then(Value::as_str)
    }

    pub fn min_gap_fraction(&self) -> Option<f64> {
        self.0.get("min_gap_fraction").and_then(Value::as_f64)
    }

    pub fn generator(&self) -> Result<Box<dyn ScheduleGenerator>, CliError> {
        let mut rest = self.0.clone();
        rest.remove("T");
        Ok(schedule::registry().build_tagged(&Value::Object(rest))?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Defaults to the first unit vector.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Defaults to zero.
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
}

fn default_step() -> f64 {
    0.01
}

fn default_horizon() -> f64 {
    40.0
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            step: default_step(),
            horizon: default_horizon(),
            x0: None,
            z0: None,
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub diameter: Option<f64>,
    pub q: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(step) = o.step {
            self.sim.step = step;
        }
        if let Some(horizon) = o.horizon {
            self.sim.horizon = horizon;
        }
        if let Some(t) = o.diameter {
            self.schedule.0.insert("T".into(), Value::from(t));
        }
        if let Some(q) = o.q {
            self.predictor = Some(serde_json::json!({"kind": "constant-minus-q", "q": q}));
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = Some(dir.clone());
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Validates every section and builds the library objects without running anything.
    pub fn resolve(&self) -> Result<Experiment, CliError> {
        let (model, mut spec, p) = match &self.model {
            ModelConfig::Oscillator => {
                let (model, spec) = builtin_oscillator();
                (model, spec, None)
            }
            ModelConfig::Linear { a, b, c, r, p } => {
                let (model, spec) = builtin_linear(
                    matrix("model.A", a)?,
                    matrix("model.B", b)?,
                    matrix("model.C", c)?,
                    matrix("model.R", r)?,
                )?;
                let p = p.as_ref().map(|p| matrix("model.P", p)).transpose()?;
                (model, spec, p)
            }
        };
        if let Some(tagged) = &self.predictor {
            let gain: Arc<dyn PredictorGain> = predictor::registry().build_tagged(tagged)?.into();
            spec = spec.with_predictor(gain);
        }

        let diameter = self.schedule.diameter()?;
        let generator = self.schedule.generator()?;
        if !(self.sim.horizon.is_finite() && self.sim.horizon > 0.0) {
            return Err(CliError::invalid(format!(
                "sim.horizon must be positive, got {}",
                self.sim.horizon
            )));
        }
        let schedule = generator.generate(diameter, self.sim.horizon)?;

        let x0 = match &self.sim.x0 {
            Some(v) => DVector::from_column_slice(v),
            None => DVector::from_fn(model.n, |i, _| if i == 0 { 1.0 } else { 0.0 }),
        };
        let z0 = match &self.sim.z0 {
            Some(v) => DVector::from_column_slice(v),
            None => DVector::zeros(model.n),
        };
        let sim = SimConfig::new(self.sim.step, self.sim.horizon, x0, z0);
        sim.validate(&model, &schedule)?;
        self.noise.validate(model.p)?;
        self.input.validate(model.m)?;

        Ok(Experiment {
            model,
            spec,
            p,
            oscillator: matches!(self.model, ModelConfig::Oscillator),
            diameter,
            schedule,
            noise: self.noise.clone(),
            input: self.input.clone(),
            sim,
            output_dir: self.output_dir(),
        })
    }
}

pub fn matrix(what: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(CliError::invalid(format!(
            "{what} must be a non-empty matrix"
        )));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(CliError::invalid(format!(
            "{what} row {i} has {} entries, expected {ncols}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flatten().copied(),
    ))
}

/// A validated, ready-to-run experiment.
pub struct Experiment {
    pub model: PlantModel,
    pub spec: ObserverSpec,
    pub p: Option<DMatrix<f64>>,
    pub oscillator: bool,
    pub diameter: f64,
    pub schedule: SamplingSchedule,
    pub noise: NoiseModel,
    pub input: InputSignal,
    pub sim: SimConfig,
    pub output_dir: PathBuf,
}

impl Experiment {
    /// `q` such that the predictor gain equals `-q I` on this linear model.
    pub fn effective_q(&self) -> Option<f64> {
        if let Some(q) = self.spec.predictor.constant_q() {
            return Some(q);
        }
        let lin = self.model.linear()?;
        let r = self.spec.gain_matrix()?;
        let (n, m, p) = (self.model.n, self.model.m, self.model.p);
        let z = DVector::zeros(n);
        let w = DVector::zeros(p);
        let u = DVector::zeros(m);
        let k = self.spec.predictor.gain(&GainInputs {
            z: &z,
            w: &w,
            u: &u,
            grad_h: &lin.c,
            innovation_gain: r,
        });
        let q = -k[(0, 0)];
        let scalar = DMatrix::<f64>::identity(p, p) * -q;
        ((k - scalar).amax() <= 1e-12 * q.abs().max(1.0)).then_some(q)
    }

    /// The certificates `q -> (omega, L(q), ...)` available for this model.
    pub fn certificate_family(&self) -> Result<CertificateFamily, CliError> {
        if self.oscillator {
            return Ok(CertificateFamily::Oscillator);
        }
        let lin = self
            .model
            .linear()
            .ok_or_else(|| CliError::invalid("certification needs a linear model"))?;
        let p = self
            .p
            .as_ref()
            .ok_or_else(|| CliError::invalid("certification needs model.P"))?;
        let r = self
            .spec
            .gain_matrix()
            .ok_or_else(|| CliError::invalid("certification needs a constant gain R"))?;
        Ok(CertificateFamily::Linear {
            a: lin.a.clone(),
            c: lin.c.clone(),
            r: r.clone(),
            p: p.clone(),
        })
    }

    pub fn certificate_for(&self, q: f64) -> Result<LinearCertificate, CliError> {
        Ok(self.certificate_family()?.at(q)?)
    }

    /// Certificate for the configured predictor, which must be of the form `-q I`.
    pub fn certificate(&self) -> Result<(f64, LinearCertificate), CliError> {
        let q = self.effective_q().ok_or_else(|| {
            CliError::invalid(format!(
                "predictor `{}` is not of the form K = -qI on this model",
                self.spec.predictor.name()
            ))
        })?;
        Ok((q, self.certificate_for(q)?))
    }
}

#[derive(Debug, Clone)]
pub enum CertificateFamily {
    /// Closed-form `omega = 1`, `L(q) = sqrt(2(1 + (1 - q)^2))`.
    Oscillator,
    Linear {
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        r: DMatrix<f64>,
        p: DMatrix<f64>,
    },
}

impl CertificateFamily {
    pub fn at(&self, q: f64) -> obslab::Result<LinearCertificate> {
        match self {
            CertificateFamily::Oscillator => oscillator_certificate(q),
            CertificateFamily::Linear { a, c, r, p } => derived_certificate(a, c, r, p, q),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_uses_defaults() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        let exp = cfg.resolve().unwrap();
        assert_eq!(exp.diameter, 0.3);
        assert_eq!(exp.effective_q(), Some(0.8));
        assert_eq!(exp.sim.x0.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"modle": {}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"sim": {"stepp": 0.1}}"#).is_err());
        let cfg = ExperimentConfig::from_json(
            r#"{"schedule": {"kind": "uniform", "T": 0.3, "seed": 1}}"#,
        )
        .unwrap();
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn step_error_names_field() {
        let cfg = ExperimentConfig::from_json(r#"{"sim": {"step": -1}}"#).unwrap();
        let err = cfg.resolve().err().unwrap().to_string();
        assert!(err.contains("sim.step"), "{err}");
    }

    #[test]
    fn zoh_on_oscillator_is_constant_q() {
        let cfg = ExperimentConfig::from_json(r#"{"predictor": {"kind": "zoh"}}"#).unwrap();
        assert_eq!(cfg.resolve().unwrap().effective_q(), Some(2.0));
        let cfg =
            ExperimentConfig::from_json(r#"{"predictor": {"kind": "zoh-exp-gain", "eta": 0.5}}"#)
                .unwrap();
        assert_eq!(cfg.resolve().unwrap().effective_q(), Some(1.5));
    }

    #[test]
    fn linear_model_with_p_certifies() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "model": {"kind": "linear", "A": [[0,1],[-1,0]], "B": [[0],[1]], "C": [[1,0]],
                          "R": [[2],[1]], "P": [[1,-0.5],[-0.5,0.5]]},
                "predictor": {"kind": "constant-minus-q", "q": 0.8}
            }"#,
        )
        .unwrap();
        let exp = cfg.resolve().unwrap();
        let (q, cert) = exp.certificate().unwrap();
        assert_eq!(q, 0.8);
        assert!((cert.omega() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ragged_matrix_rejected() {
        assert!(matrix("A", &[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(matrix("A", &[]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides {
            step: Some(0.005),
            diameter: Some(0.2),
            q: Some(2.0),
            ..Overrides::default()
        });
        let exp = cfg.resolve().unwrap();
        assert_eq!(exp.sim.step, 0.005);
        assert_eq!(exp.diameter, 0.2);
        assert_eq!(exp.effective_q(), Some(2.0));
    }
}
