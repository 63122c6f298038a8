//! Scenario files: TOML with one section per subsystem.

use std::path::Path;

use adrflat::controller::{ControllerSpec, ControllerVariant};
use adrflat::flat::DerivativePolicy;
use adrflat::observer::ObserverForm;
use adrflat::plant::{DisturbanceSpec, NominalParams, PlantParams, Scenario, SimSettings};
use adrflat::reference::Reference;
use nalgebra::Complex;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("unknown scenario key '{0}'")]
    UnknownKey(String),
    #[error("scenario key '{0}' is not numeric")]
    NotNumeric(String),
    #[error("invalid value '{value}' for '{key}'")]
    BadValue { key: String, value: String },
    #[error(transparent)]
    Model(#[from] adrflat::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub plant: PlantParams,
    pub nominal: NominalSection,
    pub disturbance: DisturbanceSpec,
    pub controller: ControllerSection,
    pub observer: ObserverSection,
    pub reference: Reference,
    pub sim: SimSettings,
}

/// Nominal model. Explicit values win; otherwise masses and stiffness are the
/// true ones times the scale, and damping is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NominalSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b1n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b2n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kn: Option<f64>,
    pub m1_scale: f64,
    pub m2_scale: f64,
    pub k_scale: f64,
}

impl Default for NominalSection {
    fn default() -> Self {
        Self {
            m1n: None,
            m2n: None,
            b1n: None,
            b2n: None,
            kn: None,
            m1_scale: 0.65,
            m2_scale: 0.35,
            k_scale: 2.65,
        }
    }
}

impl NominalSection {
    pub fn resolve(&self, plant: &PlantParams) -> NominalParams {
        NominalParams {
            m1n: self.m1n.unwrap_or(self.m1_scale * plant.m1),
            m2n: self.m2n.unwrap_or(self.m2_scale * plant.m2),
            b1n: self.b1n.unwrap_or(0.0),
            b2n: self.b2n.unwrap_or(0.0),
            kn: self.kn.unwrap_or(self.k_scale * plant.k),
        }
    }
}

/// A real pole `-50.0` or a complex one `[-50.0, 10.0]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pole {
    Real(f64),
    Complex([f64; 2]),
}

impl Pole {
    fn value(self) -> Complex<f64> {
        match self {
            Pole::Real(re) => Complex::new(re, 0.0),
            Pole::Complex([re, im]) => Complex::new(re, im),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub variant: ControllerVariant,
    /// Closed-loop poles (rad/s); complex poles need their conjugate.
    pub poles: Vec<Pole>,
    pub policy: DerivativePolicy,
    /// Value `p₁` is pinned to at the controlled coordinate (N/m); defaults
    /// to the nominal stiffness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<f64>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let spec = ControllerSpec::benchmark(ControllerVariant::default());
        Self {
            variant: spec.variant,
            poles: spec.poles.iter().map(|p| Pole::Real(p.re)).collect(),
            policy: spec.policy,
            normalization: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverSection {
    pub order: usize,
    /// All observer eigenvalues are placed at `-bandwidth` (rad/s).
    pub bandwidth: f64,
    pub form: ObserverForm,
}

impl Default for ObserverSection {
    fn default() -> Self {
        let spec = ControllerSpec::benchmark(ControllerVariant::default());
        Self {
            order: spec.dob_order,
            bandwidth: spec.dob_bandwidth,
            form: spec.observer_form,
        }
    }
}

/// Keys accepted by `sweep` besides dotted section paths.
const ALIASES: &[(&str, &str)] = &[
    ("dob-bandwidth", "observer.bandwidth"),
    ("dob-order", "observer.order"),
    ("dt", "sim.dt"),
    ("duration", "sim.t_end"),
    ("seed", "sim.seed"),
];

/// Optional numeric keys absent from a serialized file.
const OPTIONAL_NUMERIC: &[&str] = &[
    "nominal.m1n",
    "nominal.m2n",
    "nominal.b1n",
    "nominal.b2n",
    "nominal.kn",
    "controller.normalization",
];

pub fn canonical_key(key: &str) -> String {
    ALIASES
        .iter()
        .find(|(alias, _)| *alias == key)
        .map_or_else(|| key.replace('-', "_"), |(_, path)| path.to_string())
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        let nominal = self.nominal.resolve(&self.plant);
        let sc = Scenario {
            plant: self.plant.clone(),
            nominal,
            disturbance: self.disturbance.clone(),
            controller: ControllerSpec {
                variant: self.controller.variant,
                poles: self.controller.poles.iter().map(|p| p.value()).collect(),
                dob_order: self.observer.order,
                dob_bandwidth: self.observer.bandwidth,
                observer_form: self.observer.form,
                policy: self.controller.policy,
                normalization: self.controller.normalization,
            },
            reference: self.reference.clone(),
            sim: self.sim.clone(),
        };
        sc.plant.validate()?;
        sc.nominal.validate()?;
        sc.disturbance.validate()?;
        Ok(sc)
    }

    /// Copy with the numeric field at `key` (dotted path or alias) set to
    /// `value`.
    pub fn with_value(&self, key: &str, value: &str) -> Result<Self, ConfigError> {
        let path = canonical_key(key);
        let mut doc: toml::Table = toml::from_str(&self.to_toml()).expect("serialized scenario parses");
        let parts: Vec<&str> = path.split('.').collect();
        let (last, sections) = parts.split_last().expect("split yields at least one part");
        let mut table = &mut doc;
        for s in sections {
            table = match table.get_mut(*s) {
                Some(toml::Value::Table(t)) => t,
                _ => return Err(ConfigError::UnknownKey(key.into())),
            };
        }
        let bad = || ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
        };
        let new = match table.get(*last) {
            Some(toml::Value::Integer(_)) => toml::Value::Integer(value.trim().parse().map_err(|_| bad())?),
            Some(toml::Value::Float(_)) => toml::Value::Float(value.trim().parse().map_err(|_| bad())?),
            Some(_) => return Err(ConfigError::NotNumeric(key.into())),
            None if OPTIONAL_NUMERIC.contains(&path.as_str()) => {
                toml::Value::Float(value.trim().parse().map_err(|_| bad())?)
            }
            None => return Err(ConfigError::UnknownKey(key.into())),
        };
        table.insert(last.to_string(), new);
        Self::parse(&toml::to_string(&doc).expect("table serializes"))
    }
}
