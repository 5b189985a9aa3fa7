//! Trained coefficient models and their JSON snapshots.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aero::{ols_fit, AeroParams, CoeffKind};
use crate::data::FlightRecord;
use crate::error::{Error, Result};
use crate::learn::{train_online, TrainConfig, TrainingLog};
use crate::network::{Network, NetworkKind};

pub const MODEL_SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Et2qfnn,
    Et1qfnn,
    Ols,
}

impl ModelType {
    pub const ALL: [ModelType; 3] = [ModelType::Et2qfnn, ModelType::Et1qfnn, ModelType::Ols];

    pub fn name(self) -> &'static str {
        match self {
            ModelType::Et2qfnn => "et2qfnn",
            ModelType::Et1qfnn => "et1qfnn",
            ModelType::Ols => "ols",
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelType::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown model type '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelBody {
    Network(Network),
    Linear(AeroParams),
}

/// Anything that maps a flight record to one aerodynamic coefficient.
pub trait CoefficientPredictor {
    fn coeff_kind(&self) -> CoeffKind;
    fn predict_record(&self, record: &FlightRecord) -> Result<f64>;
}

impl CoefficientPredictor for AeroParams {
    fn coeff_kind(&self) -> CoeffKind {
        self.kind
    }

    fn predict_record(&self, record: &FlightRecord) -> Result<f64> {
        Ok(crate::aero::eval_coefficient_model(self, record))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientModel {
    pub coeff: CoeffKind,
    pub model_type: ModelType,
    pub body: ModelBody,
}

impl CoefficientPredictor for CoefficientModel {
    fn coeff_kind(&self) -> CoeffKind {
        self.coeff
    }

    fn predict_record(&self, record: &FlightRecord) -> Result<f64> {
        match &self.body {
            ModelBody::Linear(p) => p.predict_record(record),
            ModelBody::Network(n) => Ok(n.predict(&self.coeff.features(record))?[0]),
        }
    }
}

/// `(regressors, [target])` pairs for one coefficient.
pub fn training_stream(records: &[FlightRecord], coeff: CoeffKind) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    records
        .iter()
        .enumerate()
        .map(|(row, r)| {
            let t = r
                .coefficient(coeff)
                .ok_or_else(|| Error::Dataset(format!("row {row} has no {} target", coeff.column())))?;
            Ok((coeff.features(r), vec![t]))
        })
        .collect()
}

impl CoefficientModel {
    /// Fits a model of `model_type` to `train`; fuzzy models also return their training log.
    pub fn train(
        model_type: ModelType,
        coeff: CoeffKind,
        train: &[FlightRecord],
        cfg: &TrainConfig,
    ) -> Result<(Self, Option<TrainingLog>)> {
        let (body, log) = match model_type {
            ModelType::Ols => (ModelBody::Linear(ols_fit(train, coeff)?), None),
            ModelType::Et2qfnn | ModelType::Et1qfnn => {
                let kind = if model_type == ModelType::Et2qfnn {
                    NetworkKind::Type2
                } else {
                    NetworkKind::Type1
                };
                let (net, log) = train_online(&training_stream(train, coeff)?, cfg, kind)?;
                (ModelBody::Network(net), Some(log))
            }
        };
        Ok((
            Self {
                coeff,
                model_type,
                body,
            },
            log,
        ))
    }

    pub fn network(&self) -> Option<&Network> {
        match &self.body {
            ModelBody::Network(n) => Some(n),
            ModelBody::Linear(_) => None,
        }
    }

    pub fn predict_all(&self, records: &[FlightRecord]) -> Result<Vec<f64>> {
        records.iter().map(|r| self.predict_record(r)).collect()
    }
}

/// On-disk form of a [`CoefficientModel`]; `manifest` carries run provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub schema_version: u32,
    pub model: CoefficientModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

impl ModelSnapshot {
    pub fn new(model: CoefficientModel, manifest: Option<serde_json::Value>) -> Self {
        Self {
            schema_version: MODEL_SNAPSHOT_VERSION,
            model,
            manifest,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let snap: Self = serde_json::from_str(s)?;
        if snap.schema_version != MODEL_SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported schema version {}", snap.schema_version)));
        }
        if let ModelBody::Network(n) = &snap.model.body {
            if n.input_dim != snap.model.coeff.regressors().len() {
                return Err(Error::Snapshot(format!(
                    "{} network has {} inputs, expected {}",
                    snap.model.coeff,
                    n.input_dim,
                    snap.model.coeff.regressors().len()
                )));
            }
        }
        Ok(snap)
    }
}
