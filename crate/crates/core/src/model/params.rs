//! Named parameter sets and their TOML representation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Digester, FeedstockSpec, KineticParams, ReactorConfig};

#[derive(Debug, Error)]
pub enum ParameterError {
    #[error("cannot read parameter file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed parameter file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("parameter `{0}` must be finite and > 0, got {1}")]
    NotPositive(String, f64),
    #[error("parameter `{0}` must be finite and >= 0, got {1}")]
    Negative(String, f64),
    #[error("{0}")]
    Shape(String),
}

/// Unit conventions declared alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitConventions {
    /// COD content of one mmol of VFA (g_COD/mmol). s2, ks2 and ki2 are all
    /// stored in mmol/L; multiply by this constant to obtain g_COD/L.
    pub s2_gcod_per_mmol: f64,
}

/// Everything needed to build a [`Digester`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParameters {
    pub units: UnitConventions,
    pub reactor: ReactorSection,
    pub kinetics: KineticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactorSection {
    pub volume: f64,
    pub feedstocks: Vec<FeedstockSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedstockSection {
    pub name: String,
    pub theta_u: Vec<f64>,
    pub cod: f64,
    pub controllable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticSection {
    pub mu_max1: f64,
    pub mu_max2: f64,
    pub ks1: f64,
    pub ks2: f64,
    pub ki2: f64,
    pub k_hyd: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub kla: f64,
    pub kh_pc: f64,
}

impl ModelParameters {
    /// Built-in parameter set. Magnitudes follow the two-population
    /// literature; the steady diet gives D = 0.031 1/d and an OLR near
    /// 2.8 g_COD/L/d with S2 far below 20 mmol/L.
    pub fn default_set() -> Self {
        let feed = |name: &str, theta_u: [f64; 9], cod: f64, controllable: bool| FeedstockSection {
            name: name.to_string(),
            theta_u: theta_u.to_vec(),
            cod,
            controllable,
        };
        Self {
            units: UnitConventions {
                s2_gcod_per_mmol: 0.064,
            },
            reactor: ReactorSection {
                volume: 12.0,
                feedstocks: vec![
                    feed("tomato", [50.0, 0.0, 0.0, 0.0, 0.0, 30.0, 10.0, 5.0, 20.0], 81.0, true),
                    feed("slurry", [0.0, 22.0, 0.0, 0.3, 0.2, 3.0, 20.0, 80.0, 150.0], 66.8, false),
                    feed("maize", [0.0, 0.0, 170.0, 0.0, 0.0, 10.0, 30.0, 10.0, 30.0], 298.0, false),
                ],
            },
            kinetics: KineticSection {
                mu_max1: 1.2,
                mu_max2: 0.12,
                ks1: 7.1,
                ks2: 18.0,
                ki2: 150.0,
                k_hyd: vec![1.0, 0.08, 0.15],
                k1: 25.0,
                k2: 120.0,
                k3: 130.0,
                k4: 80.0,
                k5: 200.0,
                k6: 450.0,
                kla: 2.0,
                kh_pc: 50.0,
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ParameterError> {
        let p: Self = toml::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self, ParameterError> {
        let text = std::fs::read_to_string(path).map_err(|source| ParameterError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("parameter set serializes")
    }

    pub fn validate(&self) -> Result<(), ParameterError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ParameterError::NotPositive(name.to_string(), v))
            }
        };
        positive("units.s2_gcod_per_mmol", self.units.s2_gcod_per_mmol)?;
        positive("reactor.volume", self.reactor.volume)?;
        let m = self.reactor.feedstocks.len();
        if m == 0 {
            return Err(ParameterError::Shape("at least one feedstock is required".into()));
        }
        let n = m + 6;
        for f in &self.reactor.feedstocks {
            if f.theta_u.len() != n {
                return Err(ParameterError::Shape(format!(
                    "feedstock `{}` has {} inlet entries, expected {n}",
                    f.name,
                    f.theta_u.len()
                )));
            }
            for (i, v) in f.theta_u.iter().enumerate() {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(ParameterError::Negative(format!("{}.theta_u[{i}]", f.name), *v));
                }
            }
            positive(&format!("{}.cod", f.name), f.cod)?;
        }
        let n_ctrl = self.reactor.feedstocks.iter().filter(|f| f.controllable).count();
        if n_ctrl != 1 {
            return Err(ParameterError::Shape(format!(
                "exactly one feedstock must be controllable, found {n_ctrl}"
            )));
        }
        self.kinetic_params().validate(m)
    }

    pub fn reactor_config(&self) -> ReactorConfig {
        ReactorConfig {
            volume: self.reactor.volume,
            feedstocks: self
                .reactor
                .feedstocks
                .iter()
                .map(|f| FeedstockSpec {
                    name: f.name.clone(),
                    theta_u: f.theta_u.clone(),
                    cod: f.cod,
                    controllable: f.controllable,
                })
                .collect(),
        }
    }

    pub fn kinetic_params(&self) -> KineticParams {
        let k = &self.kinetics;
        KineticParams {
            mu_max1: k.mu_max1,
            mu_max2: k.mu_max2,
            ks1: k.ks1,
            ks2: k.ks2,
            ki2: k.ki2,
            k_hyd: k.k_hyd.clone(),
            k1: k.k1,
            k2: k.k2,
            k3: k.k3,
            k4: k.k4,
            k5: k.k5,
            k6: k.k6,
            kla: k.kla,
            kh_pc: k.kh_pc,
        }
    }

    pub fn digester(&self) -> Digester {
        Digester::new(self.reactor_config(), self.kinetic_params())
    }
}

/// TOML text of the built-in parameter set.
pub fn default_parameter_toml() -> String {
    ModelParameters::default_set().to_toml_string()
}
