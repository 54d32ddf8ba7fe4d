use super::{JointParams, JointState};
use crate::scalar::Real;

/// Below this speed (rad/s) a joint is treated as at rest for Coulomb friction.
pub const STICTION_VELOCITY: f64 = 1e-6;

/// First-order low-pass on the velocity, discretized by exact pole mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityFilter<T> {
    /// Pole `exp(-2π f_c dt)`.
    pub pole: T,
}

impl<T: Real> VelocityFilter<T> {
    pub fn new(cutoff_hz: T, dt: T) -> Self {
        Self {
            pole: (-T::TAU() * cutoff_hz * dt).exp(),
        }
    }

    #[inline]
    pub fn apply(&self, previous: T, input: T) -> T {
        self.pole * previous + (T::one() - self.pole) * input
    }
}

/// One semi-implicit Euler step of `I_a q̈ = τ - d q̇ - τ_f sgn(q̇)`.
///
/// Coulomb friction follows a Karnopp rule: a joint at rest stays at rest
/// while `|τ| <= τ_f`, and a step whose velocity would cross zero under such a
/// torque ends at rest instead.
#[inline]
pub fn step_joint<T: Real>(
    state: &JointState<T>,
    applied_torque: T,
    params: &JointParams<T>,
    dt: T,
    filter: Option<&VelocityFilter<T>>,
) -> JointState<T> {
    let v = state.velocity;
    let tau = applied_torque;
    let tau_f = params.coulomb_friction;
    let holds = tau.abs() <= tau_f;

    let new_v = if v.abs() < T::lit(STICTION_VELOCITY) {
        if holds {
            T::zero()
        } else {
            let friction = tau_f * tau.sign0();
            v + dt * (tau - params.viscous_damping * v - friction) / params.armature_inertia
        }
    } else {
        let friction = tau_f * v.sign0();
        let nv = v + dt * (tau - params.viscous_damping * v - friction) / params.armature_inertia;
        if holds && nv * v < T::zero() {
            T::zero()
        } else {
            nv
        }
    };

    JointState {
        position: state.position + dt * new_v,
        velocity: new_v,
        filtered_velocity: match filter {
            Some(f) => f.apply(state.filtered_velocity, new_v),
            None => new_v,
        },
    }
}
