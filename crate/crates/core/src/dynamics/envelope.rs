use super::MotorParams;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Torque–speed envelope of a voltage-limited PMSM drive, expressed at the joint.
///
/// In the motoring quadrants (torque and speed with equal sign) the available
/// torque is the flat ceiling up to `emf_corner_speed`, then falls linearly
/// along the back-EMF line to zero at `zero_torque_speed`. Torque opposing the
/// motion is limited only by the ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationEnvelope<T> {
    pub max_torque: T,
    pub emf_corner_speed: T,
    pub zero_torque_speed: T,
    /// Motor-to-joint reduction used to express the motor-side view.
    pub gear_ratio: T,
}

impl<T: Real> SaturationEnvelope<T> {
    pub fn new(max_torque: T, emf_corner_speed: T, zero_torque_speed: T) -> Result<Self> {
        let env = Self {
            max_torque,
            emf_corner_speed,
            zero_torque_speed,
            gear_ratio: T::one(),
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_torque > T::zero())
            || !(self.emf_corner_speed >= T::zero())
            || !(self.emf_corner_speed < self.zero_torque_speed)
            || !self.zero_torque_speed.is_finite()
        {
            return Err(Error::invalid(
                "saturation envelope",
                "require max_torque > 0 and 0 <= emf_corner_speed < zero_torque_speed",
            ));
        }
        Ok(())
    }

    /// Available torque magnitude when torque and motion share a direction.
    pub fn motoring_limit(&self, speed: T) -> T {
        let w = speed.abs();
        if w <= self.emf_corner_speed {
            self.max_torque
        } else if w >= self.zero_torque_speed {
            T::zero()
        } else {
            self.max_torque * (self.zero_torque_speed - w)
                / (self.zero_torque_speed - self.emf_corner_speed)
        }
    }

    /// Available torque magnitude for a torque of the given sign at `speed`.
    pub fn limit(&self, torque_sign: T, speed: T) -> T {
        if torque_sign * speed > T::zero() {
            self.motoring_limit(speed)
        } else {
            self.max_torque
        }
    }

    /// The same envelope seen from the motor shaft.
    pub fn motor_side(&self) -> Self {
        Self {
            max_torque: self.max_torque / self.gear_ratio,
            emf_corner_speed: self.emf_corner_speed * self.gear_ratio,
            zero_torque_speed: self.zero_torque_speed * self.gear_ratio,
            gear_ratio: T::one(),
        }
    }
}

/// Joint-side envelope of a drive.
///
/// Motor side the available torque is `min(τ_max, k_i (u - k_ω ω) / R)`,
/// floored at zero; the joint sees torque multiplied and speed divided by the
/// gear ratio.
pub fn build_envelope<T: Real>(motor: &MotorParams<T>) -> Result<SaturationEnvelope<T>> {
    motor.validate()?;
    if !(motor.bus_voltage > T::zero()) {
        return Err(Error::Config("bus_voltage must be > 0 to build an envelope".into()));
    }
    if !(motor.max_motor_torque > T::zero()) {
        return Err(Error::Config("max_motor_torque must be > 0".into()));
    }
    let k_w = motor.back_emf();
    let stall = motor.motor_constant * motor.bus_voltage / motor.coil_resistance;
    let ceiling = motor.max_motor_torque.min(stall);
    let zero_speed = motor.bus_voltage / k_w;
    // speed at which the back-EMF line meets the ceiling
    let corner = ((motor.bus_voltage - ceiling * motor.coil_resistance / motor.motor_constant) / k_w)
        .max(T::zero());
    let r = motor.gear_ratio;
    let env = SaturationEnvelope {
        max_torque: ceiling * r,
        emf_corner_speed: corner / r,
        zero_torque_speed: zero_speed / r,
        gear_ratio: r,
    };
    env.validate()?;
    Ok(env)
}

/// Clamp a commanded torque to the envelope at the given speed.
///
/// Only the magnitude is reduced; the sign is preserved and torques inside the
/// envelope pass unchanged.
#[inline]
pub fn saturate_torque<T: Real>(cmd: T, speed: T, env: &SaturationEnvelope<T>) -> T {
    let limit = env.limit(cmd.sign0(), speed);
    if cmd > limit {
        limit
    } else if cmd < -limit {
        -limit
    } else {
        cmd
    }
}
