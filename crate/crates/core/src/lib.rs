//! Reward-model evaluation and RL-dynamics toolkit.
//!
//! The numeric core is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for common use.

pub mod fmt;
pub mod metrics;
pub mod rewards;
pub mod scalar;
pub mod simlab;
pub mod trajdata;

pub type Record = trajdata::TrajectoryRecord<f64>;
pub type Instance = trajdata::InstanceRuns<f64>;
pub type Data = trajdata::Dataset<f64>;
pub type Report = metrics::MetricsReport<f64>;

pub type Record32 = trajdata::TrajectoryRecord<f32>;
pub type Instance32 = trajdata::InstanceRuns<f32>;
pub type Data32 = trajdata::Dataset<f32>;
pub type Report32 = metrics::MetricsReport<f32>;
