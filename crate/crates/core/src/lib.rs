//! Longitudinal safety controllers, their threat metrics, a closed-loop
//! simulator with dense-time guarantee monitoring, and falsification
//! studies.

pub mod analysis;
pub mod controller;
pub mod environment;
pub mod kinematics;
pub mod model;
pub mod simulator;
pub mod threat;

pub use controller::{ControlOutput, Controller, SafetyConstraint};
pub use kinematics::VehicleState;
pub use model::ModelId;
pub use threat::{SystemParams, ThresholdVariant};
