use super::{
    build_envelope, limit_safe_target, pd_torque, saturate_torque, step_joint, JointState,
    RobotModel, SimConfig, VelocityFilter,
};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trajectory::Trajectory;

/// Delays within this many samples of an integer are treated as integer.
const INTEGER_DELAY_SNAP: f64 = 1e-9;

/// Replay recorded targets through the model.
///
/// Targets are delayed by `command_delay` with linear interpolation between
/// the bracketing samples and held over each control interval. Every physics
/// substep evaluates the guarded target, the PD law, the torque envelope and
/// one integrator step. The returned trajectory holds the simulated state at
/// each target sample, the original targets, and the applied torque at the
/// start of each control interval.
pub fn rollout<T: Real>(
    model: &RobotModel<T>,
    targets: &Trajectory<T>,
    sim: &SimConfig<T>,
    initial: &[JointState<T>],
) -> Result<Trajectory<T>> {
    model.validate_shape()?;
    let n = model.n_joints();
    if targets.n_joints() != n {
        return Err(Error::Shape(format!(
            "trajectory has {} joints, model has {n}",
            targets.n_joints()
        )));
    }
    if initial.len() != n {
        return Err(Error::Shape(format!(
            "{} initial states for {n} joints",
            initial.len()
        )));
    }
    if initial
        .iter()
        .any(|s| !(s.position.is_finite() && s.velocity.is_finite() && s.filtered_velocity.is_finite()))
    {
        return Err(Error::NonFinite("initial state".into()));
    }
    targets.check_finite_targets()?;
    let step = targets.sample_step()?;
    if (step - sim.control_dt).abs() > sim.control_dt * T::lit(1e-6) + T::lit(4.0) * T::epsilon() {
        return Err(Error::NonUniformSampling(format!(
            "target step {step} differs from control_dt {}",
            sim.control_dt
        )));
    }
    let substeps = sim.substeps()?;
    let dt = sim.physics_dt;

    let envelopes = match &model.motors {
        Some(motors) => Some(motors.iter().map(build_envelope).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    let filter = model
        .velocity_filter_cutoff
        .map(|fc| VelocityFilter::new(fc, dt));

    let mut delay = model.command_delay / sim.control_dt;
    if (delay - delay.round()).abs() < T::lit(INTEGER_DELAY_SNAP) {
        delay = delay.round();
    }
    let whole = delay.floor().to_usize().unwrap_or(usize::MAX);
    let frac = delay - delay.floor();

    let k_len = targets.len();
    let mut positions = vec![vec![T::zero(); n]; k_len];
    let mut velocities = vec![vec![T::zero(); n]; k_len];
    let mut torques = vec![vec![T::zero(); n]; k_len];

    // joints are uncoupled, so each one is integrated over the whole horizon in turn
    for j in 0..n {
        let params = &model.joints[j];
        let gains = &model.gains[j];
        let limits = model.limits.as_ref().map(|l| &l[j]);
        let envelope = envelopes.as_ref().map(|e| &e[j]);
        let mut state = initial[j];
        if filter.is_none() {
            state.filtered_velocity = state.velocity;
        }

        for k in 0..k_len {
            positions[k][j] = state.position;
            velocities[k][j] = state.velocity;

            let raw = if k < whole {
                targets.targets[0][j]
            } else {
                let i = k - whole;
                if frac == T::zero() {
                    targets.targets[i][j]
                } else if i == 0 {
                    targets.targets[0][j]
                } else {
                    // sample at real index i - frac
                    targets.targets[i][j] * (T::one() - frac) + targets.targets[i - 1][j] * frac
                }
            };

            for sub in 0..substeps {
                let target = match limits {
                    Some(l) => limit_safe_target(raw, state.position, l),
                    None => raw,
                };
                let cmd = pd_torque(target, &state, gains, params.joint_bias);
                let applied = match envelope {
                    Some(env) => saturate_torque(cmd, state.velocity, env),
                    None => cmd,
                };
                if sub == 0 {
                    torques[k][j] = applied;
                }
                state = step_joint(&state, applied, params, dt, filter.as_ref());
            }
        }
    }

    Trajectory::new(
        targets.time.clone(),
        positions,
        velocities,
        targets.targets.clone(),
        Some(torques),
    )
}
