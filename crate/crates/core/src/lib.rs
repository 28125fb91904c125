//! Platoon simulation with Bayesian time-gap estimation and Shewhart
//! monitoring.
//!
//! A lead vehicle follows a prescribed acceleration profile; each follower
//! runs a constant-time-headway controller with first-order actuation lag
//! and a delayed feedforward of the lead's acceleration. Every follower
//! estimates its realised time gap from noisy spacing measurements over a
//! trailing window, charts the estimate against control limits and, when
//! excursions cluster, switches to a new headway setting.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision for common use.

// `!(x > 0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod estimator;
pub mod linalg;
pub mod monitor;
pub mod oracle;
pub mod output;
mod scalar;
pub mod sim;
pub mod trajectory;

pub use scalar::Scalar;

pub type ControllerParamsF64 = controller::ControllerParams<f64>;
pub type ControllerParamsF32 = controller::ControllerParams<f32>;
pub type VehicleStateF64 = controller::VehicleState<f64>;
pub type GaussianBeliefF64 = estimator::GaussianBelief<f64>;
pub type GaussianBeliefF32 = estimator::GaussianBelief<f32>;
pub type MeasurementBatchF64 = estimator::MeasurementBatch<f64>;
pub type ChartSpecF64 = monitor::ChartSpec<f64>;
pub type ChartLimitsF64 = monitor::ChartLimits<f64>;
pub type AccelProfileF64 = trajectory::AccelProfile<f64>;
pub type SimConfigF64 = sim::SimConfig<f64>;
pub type SimConfigF32 = sim::SimConfig<f32>;
pub type SimOutputF64 = sim::SimOutput<f64>;
pub type SimRecordF64 = sim::SimRecord<f64>;
