//! Joint-space simulation and identification of PD-controlled electric drives.
//!
//! Kernels are generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar for callers that only need one precision.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod excitation;
pub mod identify;
pub mod scalar;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type JointParamsF64 = dynamics::JointParams<f64>;
pub type JointParamsF32 = dynamics::JointParams<f32>;
pub type RobotModelF64 = dynamics::RobotModel<f64>;
pub type RobotModelF32 = dynamics::RobotModel<f32>;
pub type SimConfigF64 = dynamics::SimConfig<f64>;
pub type SimConfigF32 = dynamics::SimConfig<f32>;
pub type TrajectoryF64 = trajectory::Trajectory<f64>;
pub type TrajectoryF32 = trajectory::Trajectory<f32>;
pub type ParamVectorF64 = identify::ParamVector<f64>;
pub type ParamVectorF32 = identify::ParamVector<f32>;
pub type FitResultF64 = identify::FitResult<f64>;
pub type FitResultF32 = identify::FitResult<f32>;
pub type FrequencyResponseF64 = analysis::FrequencyResponse<f64>;
pub type FrequencyResponseF32 = analysis::FrequencyResponse<f32>;
