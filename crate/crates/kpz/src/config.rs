//! Instance documents, one per subcommand. Every struct rejects unknown
//! fields; errors carry the JSON path of the offending value.

use kpz_core::asymptotic::{Abscissas, LimitInstance, LimitSettings};
use kpz_core::exact::ExactSettings;
use kpz_core::params::{discretize, KpzParams, ModelParams};
use kpz_core::theta::ThetaMode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Parse a document, reporting the failing path (`.` is the root).
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let v = serde_path_to_error::deserialize(&mut de).map_err(schema_error(""))?;
    de.end().map_err(|e| CliError::Schema {
        path: ".".into(),
        msg: e.to_string(),
    })?;
    Ok(v)
}

fn from_value<T: DeserializeOwned>(v: Value, prefix: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v).map_err(schema_error(prefix))
}

fn schema_error<E: std::fmt::Display>(prefix: &str) -> impl Fn(serde_path_to_error::Error<E>) -> CliError + '_ {
    move |e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner.as_str()) {
            (true, _) => inner.clone(),
            (false, ".") => prefix.to_string(),
            (false, _) => format!("{prefix}.{inner}"),
        };
        CliError::Schema {
            path,
            msg: e.into_inner().to_string(),
        }
    }
}

fn instance_error(path: &str) -> impl Fn(kpz_core::Error) -> CliError + '_ {
    move |e| CliError::Schema {
        path: path.to_string(),
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteInstance {
    pub q: f64,
    pub m: Vec<i64>,
    pub n: Vec<i64>,
    pub a: Vec<i64>,
}

impl DiscreteInstance {
    pub fn to_params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.q, self.m.clone(), self.n.clone(), self.a.clone()).map_err(instance_error("instance"))
    }
}

/// Continuum coordinates, mapped to lattice data with the KPZ scaling at time `T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ScaledInstance {
    pub q: f64,
    pub T: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl ScaledInstance {
    pub fn to_params(&self) -> Result<ModelParams, CliError> {
        let k = KpzParams {
            q: self.q,
            T: self.T,
            t: self.t.clone(),
            x: self.x.clone(),
            xi: self.xi.clone(),
            mu: None,
        };
        discretize(&k).map_err(instance_error("instance"))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateDoc {
    pub instance: DiscreteInstance,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMethod {
    /// Row-by-row transfer over truncated height profiles.
    #[default]
    Dp,
    /// Truncated sum of the determinantal transition weights.
    Sum,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleDoc {
    pub instance: DiscreteInstance,
    #[serde(default)]
    pub method: OracleMethod,
    /// State budget of the DP route.
    #[serde(default)]
    pub budget: Option<usize>,
    /// Height cutoff of the sum route.
    #[serde(default)]
    pub cutoff: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactQuadrature {
    pub nodes: Option<usize>,
    pub theta_mode: Option<ThetaMode>,
    pub r_theta: Option<f64>,
    pub theta_nodes: Option<usize>,
    pub tol: Option<f64>,
    pub max_doublings: Option<usize>,
    pub mu: Option<f64>,
    pub imag_tol: Option<f64>,
}

impl ExactQuadrature {
    pub fn settings(&self, tol: Option<f64>) -> ExactSettings {
        let d = ExactSettings::default();
        ExactSettings {
            nodes: self.nodes.unwrap_or(d.nodes),
            theta_mode: self.theta_mode.unwrap_or(d.theta_mode),
            r_theta: self.r_theta.unwrap_or(d.r_theta),
            theta_nodes: self.theta_nodes.or(d.theta_nodes),
            tol: tol.or(self.tol).unwrap_or(d.tol),
            max_doublings: self.max_doublings.unwrap_or(d.max_doublings),
            mu: self.mu.unwrap_or(d.mu),
            imag_tol: self.imag_tol.unwrap_or(d.imag_tol),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExactInstance {
    Discrete(DiscreteInstance),
    Scaled(ScaledInstance),
}

impl ExactInstance {
    pub fn to_params(&self) -> Result<ModelParams, CliError> {
        match self {
            ExactInstance::Discrete(d) => d.to_params(),
            ExactInstance::Scaled(s) => s.to_params(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactDoc {
    pub instance: ExactInstance,
    pub quadrature: ExactQuadrature,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExactRaw {
    instance: Value,
    #[serde(default)]
    quadrature: ExactQuadrature,
}

impl ExactDoc {
    /// An instance with a `T` field is read as continuum coordinates.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: ExactRaw = parse(text)?;
        let scaled = raw.instance.as_object().is_some_and(|o| o.contains_key("T"));
        let instance = if scaled {
            ExactInstance::Scaled(from_value(raw.instance, "instance")?)
        } else {
            ExactInstance::Discrete(from_value(raw.instance, "instance")?)
        };
        Ok(ExactDoc {
            instance,
            quadrature: raw.quadrature,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitDoc {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
}

impl LimitDoc {
    pub fn to_instance(&self) -> Result<LimitInstance, CliError> {
        let mut inst =
            LimitInstance::new(self.t.clone(), self.x.clone(), self.xi.clone()).map_err(instance_error("instance"))?;
        if let Some(mu) = self.mu {
            inst.mu = Some(mu);
            inst.validate().map_err(instance_error("instance.mu"))?;
        }
        Ok(inst)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitQuadrature {
    pub abscissas: Option<Abscissas>,
    pub line_scale: Option<f64>,
    pub grid_length: Option<f64>,
    pub grid_nodes: Option<usize>,
    pub lambda_max: Option<f64>,
    pub lambda_panels: Option<usize>,
    pub r_theta: Option<f64>,
    pub theta_nodes: Option<usize>,
    pub tol: Option<f64>,
    pub max_doublings: Option<usize>,
    pub imag_tol: Option<f64>,
}

impl LimitQuadrature {
    pub fn settings(&self, tol: Option<f64>) -> LimitSettings {
        let d = LimitSettings::default();
        LimitSettings {
            abscissas: self.abscissas.unwrap_or(d.abscissas),
            line_scale: self.line_scale.unwrap_or(d.line_scale),
            grid_length: self.grid_length.unwrap_or(d.grid_length),
            grid_nodes: self.grid_nodes.unwrap_or(d.grid_nodes),
            lambda_max: self.lambda_max.unwrap_or(d.lambda_max),
            lambda_panels: self.lambda_panels.unwrap_or(d.lambda_panels),
            r_theta: self.r_theta.unwrap_or(d.r_theta),
            theta_nodes: self.theta_nodes.unwrap_or(d.theta_nodes),
            tol: tol.or(self.tol).unwrap_or(d.tol),
            max_doublings: self.max_doublings.unwrap_or(d.max_doublings),
            imag_tol: self.imag_tol.unwrap_or(d.imag_tol),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticDoc {
    pub instance: LimitDoc,
    #[serde(default)]
    pub quadrature: LimitQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SGrid {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl SGrid {
    /// `from, from + step, …` up to `to` inclusive (within half a step).
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let ok = self.step > 0.0 && self.to >= self.from && self.from.is_finite() && self.to.is_finite();
        if !ok {
            return Err(CliError::Schema {
                path: "grid".into(),
                msg: "need from <= to and step > 0".into(),
            });
        }
        let n = ((self.to - self.from) / self.step + 0.5).floor() as usize + 1;
        if n > 100_000 {
            return Err(CliError::Schema {
                path: "grid".into(),
                msg: format!("{n} points is too many"),
            });
        }
        Ok((0..n).map(|i| self.from + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwDoc {
    #[serde(default)]
    pub s: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Option<SGrid>,
    #[serde(default)]
    pub nodes: Option<usize>,
}
