//! Sampled-data observers built from continuous-time observers through a
//! generalized inter-sample output predictor.
//!
//! The crate covers four concerns:
//!
//! * [`model`], [`predictor`], [`observer`]: plant/observer/predictor right-hand
//!   sides and the predictor-gain strategies (ZOH, exponentially weighted ZOH,
//!   pure inter-sample prediction, constant `-qI`).
//! * [`schedule`], [`noise`], [`input`], [`integrate`], [`sim`]: hybrid
//!   simulation with resets `w(t_k) = h(x(t_k)) + xi(t_k)` at every sampling time.
//! * [`bounds`]: certified maximum allowable sampling periods, the optimal
//!   predictor constant and the constants of the exponential/IOS error estimates.
//! * [`verify`]: empirical checks of those estimates against simulated runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod csv;
pub mod error;
pub mod input;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod observer;
pub mod predictor;
pub mod registry;
pub mod schedule;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use model::PlantModel;
pub use observer::ObserverSpec;
pub use predictor::PredictorGain;

pub use nalgebra::{DMatrix, DVector};
