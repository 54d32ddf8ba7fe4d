//! Fixed-step simulation of independent PD-controlled joints.
//!
//! Each joint obeys
//!
//! ```text
//! I_a q̈ + d q̇ = sat(P (q̂ - q + q_b) - D q̇) - τ_f sgn(q̇)
//! ```
//!
//! with a command delay on the targets, an optional low-pass filter on the
//! velocity seen by the PD law, and a joint-limit guard on the targets.

mod control;
mod envelope;
mod integrate;
mod rollout;

pub use control::{limit_safe_target, pd_torque};
pub use envelope::{build_envelope, saturate_torque, SaturationEnvelope};
pub use integrate::{step_joint, VelocityFilter, STICTION_VELOCITY};
pub use rollout::rollout;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default bound on `|joint_bias|`, rad.
pub const DEFAULT_BIAS_BOUND: f64 = 0.2;

/// Identified per-joint dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointParams<T> {
    /// kg·m²
    pub armature_inertia: T,
    /// N·m·s/rad
    pub viscous_damping: T,
    /// N·m
    pub coulomb_friction: T,
    /// rad
    pub joint_bias: T,
}

impl<T: Real> JointParams<T> {
    pub fn new(armature_inertia: T, viscous_damping: T, coulomb_friction: T, joint_bias: T) -> Self {
        Self {
            armature_inertia,
            viscous_damping,
            coulomb_friction,
            joint_bias,
        }
    }

    pub fn validate(&self, bias_bound: T) -> Result<()> {
        let all = [
            self.armature_inertia,
            self.viscous_damping,
            self.coulomb_friction,
            self.joint_bias,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint parameters".into()));
        }
        if self.armature_inertia <= T::zero() {
            return Err(Error::invalid("armature_inertia", "must be > 0"));
        }
        if self.viscous_damping < T::zero() {
            return Err(Error::invalid("viscous_damping", "must be >= 0"));
        }
        if self.coulomb_friction < T::zero() {
            return Err(Error::invalid("coulomb_friction", "must be >= 0"));
        }
        if self.joint_bias.abs() > bias_bound {
            return Err(Error::invalid(
                "joint_bias",
                format!("|{}| exceeds bound {}", self.joint_bias, bias_bound),
            ));
        }
        Ok(())
    }
}

/// Joint-level PD gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveGains<T> {
    /// N·m/rad
    pub p_gain: T,
    /// N·m·s/rad
    pub d_gain: T,
}

impl<T: Real> DriveGains<T> {
    pub fn new(p_gain: T, d_gain: T) -> Self {
        Self { p_gain, d_gain }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_gain > T::zero()) || !self.p_gain.is_finite() {
            return Err(Error::invalid("p_gain", "must be > 0"));
        }
        if !(self.d_gain >= T::zero()) || !self.d_gain.is_finite() {
            return Err(Error::invalid("d_gain", "must be >= 0"));
        }
        Ok(())
    }
}

/// Motor and transmission constants of one drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams<T> {
    pub gear_ratio: T,
    /// N·m/A
    pub motor_constant: T,
    /// Ω
    pub coil_resistance: T,
    /// H
    pub phase_inductance: Option<T>,
    /// V·s/rad. Falls back to `motor_constant` when absent.
    pub back_emf_constant: Option<T>,
    /// Motor-side, N·m
    pub max_motor_torque: T,
    /// Motor-side, rad/s
    pub max_motor_speed: T,
    /// V
    pub bus_voltage: T,
    pub regen_coefficient: T,
}

impl<T: Real> MotorParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gear_ratio > T::zero()) {
            return Err(Error::invalid("gear_ratio", "must be > 0"));
        }
        if !(self.motor_constant > T::zero()) {
            return Err(Error::invalid("motor_constant", "must be > 0"));
        }
        if !(self.coil_resistance > T::zero()) {
            return Err(Error::invalid("coil_resistance", "must be > 0"));
        }
        if !(self.regen_coefficient >= T::zero() && self.regen_coefficient <= T::one()) {
            return Err(Error::invalid("regen_coefficient", "must lie in [0, 1]"));
        }
        if let Some(l) = self.phase_inductance {
            if !(l > T::zero()) {
                return Err(Error::invalid("phase_inductance", "must be > 0"));
            }
        }
        if let Some(k) = self.back_emf_constant {
            if !(k > T::zero()) {
                return Err(Error::invalid("back_emf_constant", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Back-EMF constant, defaulting to the torque constant (SI convention for PMSMs).
    pub fn back_emf(&self) -> T {
        self.back_emf_constant.unwrap_or(self.motor_constant)
    }
}

/// Soft and hard position bounds of one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits<T> {
    pub soft_lower: T,
    pub soft_upper: T,
    pub hard_lower: T,
    pub hard_upper: T,
}

impl<T: Real> JointLimits<T> {
    pub fn new(hard_lower: T, soft_lower: T, soft_upper: T, hard_upper: T) -> Result<Self> {
        let lim = Self {
            soft_lower,
            soft_upper,
            hard_lower,
            hard_upper,
        };
        lim.validate()?;
        Ok(lim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hard_lower < self.soft_lower
            && self.soft_lower < self.soft_upper
            && self.soft_upper < self.hard_upper)
        {
            return Err(Error::invalid(
                "joint limits",
                "require hard_lower < soft_lower < soft_upper < hard_upper",
            ));
        }
        Ok(())
    }
}

/// Kinematic state of one joint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState<T> {
    pub position: T,
    pub velocity: T,
    /// Velocity as seen by the PD law; equals `velocity` without a filter.
    pub filtered_velocity: T,
}

impl<T: Real> JointState<T> {
    pub fn at_rest(position: T) -> Self {
        Self {
            position,
            velocity: T::zero(),
            filtered_velocity: T::zero(),
        }
    }
}

/// Complete simulable description of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel<T> {
    pub joints: Vec<JointParams<T>>,
    pub gains: Vec<DriveGains<T>>,
    /// Torque saturation is applied only when motors are present.
    pub motors: Option<Vec<MotorParams<T>>>,
    pub limits: Option<Vec<JointLimits<T>>>,
    /// Global command delay, s.
    pub command_delay: T,
    /// Cut-off of the first-order low-pass on the PD velocity, Hz.
    pub velocity_filter_cutoff: Option<T>,
}

impl<T: Real> RobotModel<T> {
    /// Model without motors, limits or velocity filter.
    pub fn new(joints: Vec<JointParams<T>>, gains: Vec<DriveGains<T>>, command_delay: T) -> Result<Self> {
        let model = Self {
            joints,
            gains,
            motors: None,
            limits: None,
            command_delay,
            velocity_filter_cutoff: None,
        };
        model.validate_shape()?;
        Ok(model)
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    /// Structural checks needed to simulate.
    pub fn validate_shape(&self) -> Result<()> {
        let n = self.joints.len();
        if n == 0 {
            return Err(Error::invalid("robot model", "no joints"));
        }
        if self.gains.len() != n {
            return Err(Error::Shape(format!("{} gains for {n} joints", self.gains.len())));
        }
        if let Some(m) = &self.motors {
            if m.len() != n {
                return Err(Error::Shape(format!("{} motors for {n} joints", m.len())));
            }
        }
        if let Some(l) = &self.limits {
            if l.len() != n {
                return Err(Error::Shape(format!("{} limits for {n} joints", l.len())));
            }
        }
        if !(self.command_delay >= T::zero()) || !self.command_delay.is_finite() {
            return Err(Error::invalid("command_delay", "must be finite and >= 0"));
        }
        if let Some(fc) = self.velocity_filter_cutoff {
            if !(fc > T::zero()) || !fc.is_finite() {
                return Err(Error::invalid("velocity_filter_cutoff", "must be > 0"));
            }
        }
        for j in &self.joints {
            if !(j.armature_inertia > T::zero()) || !j.armature_inertia.is_finite() {
                return Err(Error::invalid("armature_inertia", "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Full invariant check, including every per-joint record.
    pub fn validate(&self, bias_bound: T) -> Result<()> {
        self.validate_shape()?;
        for j in &self.joints {
            j.validate(bias_bound)?;
        }
        for g in &self.gains {
            g.validate()?;
        }
        for m in self.motors.iter().flatten() {
            m.validate()?;
        }
        for l in self.limits.iter().flatten() {
            l.validate()?;
        }
        Ok(())
    }

    /// Multiply inertia, damping and both PD gains by a common factor.
    ///
    /// With zero Coulomb friction and no active saturation the closed loop is
    /// unchanged, which is why the gains are never part of the identified set.
    pub fn scale_dynamics(&self, factor: T) -> Self {
        let mut out = self.clone();
        for j in &mut out.joints {
            j.armature_inertia = j.armature_inertia * factor;
            j.viscous_damping = j.viscous_damping * factor;
        }
        for g in &mut out.gains {
            g.p_gain = g.p_gain * factor;
            g.d_gain = g.d_gain * factor;
        }
        out
    }
}

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    SemiImplicitEuler,
}

/// Physics and control rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub physics_dt: T,
    pub control_dt: T,
    pub integrator: Integrator,
}

impl<T: Real> Default for SimConfig<T> {
    /// 4 kHz physics under a 400 Hz control loop.
    fn default() -> Self {
        Self {
            physics_dt: T::lit(2.5e-4),
            control_dt: T::lit(2.5e-3),
            integrator: Integrator::SemiImplicitEuler,
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn new(physics_dt: T, control_dt: T) -> Result<Self> {
        let cfg = Self {
            physics_dt,
            control_dt,
            integrator: Integrator::SemiImplicitEuler,
        };
        cfg.substeps()?;
        Ok(cfg)
    }

    /// Number of physics steps per control step.
    pub fn substeps(&self) -> Result<usize> {
        if !(self.physics_dt > T::zero()) || !(self.control_dt > T::zero()) {
            return Err(Error::invalid("sim config", "time steps must be > 0"));
        }
        if self.physics_dt > self.control_dt {
            return Err(Error::invalid("sim config", "physics_dt must not exceed control_dt"));
        }
        let ratio = self.control_dt / self.physics_dt;
        let n = ratio.round();
        if (ratio - n).abs() > T::lit(1e-6) * n {
            return Err(Error::invalid(
                "sim config",
                format!("control_dt/physics_dt = {ratio} is not an integer"),
            ));
        }
        n.to_usize()
            .ok_or_else(|| Error::invalid("sim config", "substep count overflow"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substeps_require_integer_ratio() {
        assert_eq!(SimConfig::<f64>::default().substeps().unwrap(), 10);
        assert!(SimConfig::new(3e-4, 1e-3).is_err());
        assert!(SimConfig::new(2e-3, 1e-3).is_err());
        assert_eq!(SimConfig::new(1e-3, 1e-3).unwrap().substeps().unwrap(), 1);
    }

    #[test]
    fn limits_order_enforced() {
        assert!(JointLimits::new(-1.0, -0.8, 0.8, 1.0).is_ok());
        assert!(JointLimits::new(-1.0, -1.2, 0.8, 1.0).is_err());
    }

    #[test]
    fn joint_validation() {
        let ok = JointParams::new(0.1, 0.0, 0.0, 0.05);
        assert!(ok.validate(0.2).is_ok());
        assert!(JointParams::new(0.0, 0.0, 0.0, 0.0).validate(0.2).is_err());
        assert!(JointParams::new(0.1, -1.0, 0.0, 0.0).validate(0.2).is_err());
        assert!(JointParams::new(0.1, 0.0, 0.0, 0.3).validate(0.2).is_err());
        assert!(JointParams::new(0.1, 0.0, 0.0, 0.3).validate(0.5).is_ok());
    }

    #[test]
    fn model_shape_checks() {
        let j = JointParams::new(0.1f64, 0.1, 0.0, 0.0);
        let g = DriveGains::new(60.0, 2.0);
        assert!(RobotModel::new(vec![j; 2], vec![g; 1], 0.0).is_err());
        assert!(RobotModel::new(vec![j; 2], vec![g; 2], -0.1).is_err());
        let m = RobotModel::new(vec![j; 2], vec![g; 2], 0.0).unwrap();
        let s = m.scale_dynamics(3.0);
        assert!((s.joints[0].armature_inertia - 0.3).abs() < 1e-15);
        assert!((s.gains[1].d_gain - 6.0).abs() < 1e-15);
    }
}
