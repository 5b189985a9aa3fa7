//! Evolving interval type-2 quantum fuzzy neural networks for online
//! identification of aircraft aerodynamic coefficient models.

pub mod aero;
pub mod data;
pub mod derivatives;
pub mod error;
pub mod learn;
pub mod metrics;
pub mod model;
pub mod network;
pub mod qmf;

pub use aero::{AeroParams, CoeffKind, Input};
pub use data::FlightRecord;
pub use error::{Error, Result};
pub use learn::TrainConfig;
pub use model::{CoefficientModel, CoefficientPredictor, ModelSnapshot, ModelType};
pub use network::{FiringTrace, Network, NetworkKind, NormStats, Rule};
pub use qmf::{eval_it2qmf, eval_qmf, QuantumMFParams, Side};
