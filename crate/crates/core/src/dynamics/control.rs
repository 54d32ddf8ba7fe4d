use super::{DriveGains, JointLimits, JointState};
use crate::scalar::Real;

/// Unsaturated PD torque `P (target - q + bias) - D q̇`.
///
/// The velocity term uses `filtered_velocity`, which tracks the raw velocity
/// when no filter is configured.
#[inline]
pub fn pd_torque<T: Real>(target: T, state: &JointState<T>, gains: &DriveGains<T>, bias: T) -> T {
    gains.p_gain * (target - state.position + bias) - gains.d_gain * state.filtered_velocity
}

/// Guard a position target so the PD law never pushes into a hard stop.
///
/// While the joint sits in the band between a soft and a hard bound and the
/// target lies beyond the hard bound, the target is pulled toward the hard
/// bound in proportion to how deep the joint is in the band. At the hard
/// bound the target equals the bound. Past the hard bound the factor stays at
/// one, so the torque points back into the feasible range.
pub fn limit_safe_target<T: Real>(raw_target: T, position: T, limits: &JointLimits<T>) -> T {
    let upper = position >= limits.soft_upper && raw_target > limits.hard_upper;
    let lower = position <= limits.soft_lower && raw_target < limits.hard_lower;
    let (soft, hard) = if upper {
        (limits.soft_upper, limits.hard_upper)
    } else if lower {
        (limits.soft_lower, limits.hard_lower)
    } else {
        return raw_target;
    };
    let depth = ((position - soft) / (hard - soft)).min(T::one()).max(T::zero());
    raw_target - depth * (raw_target - hard)
}
