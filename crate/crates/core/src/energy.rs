//! Power model, locomotion reward terms and cost-of-transport bookkeeping.

use crate::dynamics::MotorParams;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trajectory::Trajectory;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

const SECONDS_PER_HOUR: f64 = 3600.0;

fn same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: {a} vs {b}")))
    }
}

/// Copper loss `Σ τ² R / (r² k_i²)` for joint-side torques, W.
pub fn joule_heating<T: Real>(torques: &[T], motors: &[MotorParams<T>]) -> Result<T> {
    same_len("torques vs motors", torques.len(), motors.len())?;
    let mut p = T::zero();
    for (tau, m) in torques.iter().zip(motors) {
        if m.gear_ratio == T::zero() || m.motor_constant == T::zero() {
            return Err(Error::invalid("motor", "gear ratio and motor constant must be non-zero"));
        }
        let rk = m.gear_ratio * m.motor_constant;
        p = p + *tau * *tau * m.coil_resistance / (rk * rk);
    }
    Ok(p)
}

/// Shaft power `s = τᵀq̇`, with negative (braking) power scaled by `k_regen`.
pub fn mech_power<T: Real>(torques: &[T], velocities: &[T], k_regen: T) -> Result<T> {
    same_len("torques vs velocities", torques.len(), velocities.len())?;
    let s: T = torques.iter().zip(velocities).map(|(t, v)| *t * *v).sum();
    Ok(if s < T::zero() { k_regen * s } else { s })
}

/// `Σ m_b g v_z`, with `v_z` measured against gravity.
pub fn pot_power<T: Real>(body_masses: &[T], vertical_velocities: &[T], g: T) -> Result<T> {
    same_len("masses vs velocities", body_masses.len(), vertical_velocities.len())?;
    Ok(body_masses
        .iter()
        .zip(vertical_velocities)
        .map(|(m, v)| *m * g * *v)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerBreakdown<T> {
    pub p_electrical: T,
    pub p_mechanical: T,
    pub p_potential: T,
    pub p_total: T,
}

impl<T: Real> PowerBreakdown<T> {
    pub fn new(p_electrical: T, p_mechanical: T, p_potential: T) -> Self {
        Self {
            p_electrical,
            p_mechanical,
            p_potential,
            p_total: p_electrical + p_mechanical + p_potential,
        }
    }
}

/// Instantaneous power of one time step.
pub fn power_breakdown<T: Real>(
    torques: &[T],
    velocities: &[T],
    motors: &[MotorParams<T>],
    k_regen: T,
    body_masses: &[T],
    vertical_velocities: &[T],
    g: T,
) -> Result<PowerBreakdown<T>> {
    Ok(PowerBreakdown::new(
        joule_heating(torques, motors)?,
        mech_power(torques, velocities, k_regen)?,
        pot_power(body_masses, vertical_velocities, g)?,
    ))
}

/// Per-sample electrical and mechanical power of a recorded trajectory.
///
/// The trajectory carries no body velocities, so the potential term is zero.
pub fn power_series<T: Real>(
    traj: &Trajectory<T>,
    motors: &[MotorParams<T>],
    k_regen: T,
) -> Result<Vec<PowerBreakdown<T>>> {
    let Some(torques) = &traj.torques else {
        return Err(Error::invalid("trajectory", "torque columns are required"));
    };
    same_len("trajectory joints vs motors", traj.n_joints(), motors.len())?;
    torques
        .iter()
        .zip(&traj.velocities)
        .map(|(tau, qd)| power_breakdown(tau, qd, motors, k_regen, &[], &[], T::zero()))
        .collect()
}

/// `1 / (‖v̂‖² + 1)`.
pub fn gamma_v<T: Real>(commanded_velocity: &[T]) -> T {
    let sq: T = commanded_velocity.iter().map(|v| *v * *v).sum();
    T::one() / (sq + T::one())
}

/// Planar base twist.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BaseVelocity<T> {
    pub vx: T,
    pub vy: T,
    pub yaw_rate: T,
}

impl<T: Real> BaseVelocity<T> {
    pub fn new(vx: T, vy: T, yaw_rate: T) -> Self {
        Self { vx, vy, yaw_rate }
    }
}

/// Sum of Gaussian kernels on the planar and yaw tracking errors, in (0, 2].
pub fn reward_velocity<T: Real>(cmd: &BaseVelocity<T>, measured: &BaseVelocity<T>, sigma_v: T) -> T {
    let ex = cmd.vx - measured.vx;
    let ey = cmd.vy - measured.vy;
    let ew = cmd.yaw_rate - measured.yaw_rate;
    (-(ex * ex + ey * ey) / sigma_v).exp() + (-(ew * ew) / sigma_v).exp()
}

/// Sum over feet touching down this step of the largest speed in the window.
pub fn reward_ftd<T: Real, H: AsRef<[T]>>(foot_speed_history: &[H], touchdown: &[bool]) -> Result<T> {
    same_len("feet in history vs touchdown flags", foot_speed_history.len(), touchdown.len())?;
    Ok(foot_speed_history
        .iter()
        .zip(touchdown)
        .filter(|(_, td)| **td)
        .map(|(h, _)| h.as_ref().iter().copied().fold(T::zero(), T::max))
        .sum())
}

/// Caller-owned per-foot speed window of fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct FootSpeedBuffer<T> {
    window: usize,
    speeds: Vec<std::collections::VecDeque<T>>,
}

impl<T: Real> FootSpeedBuffer<T> {
    pub fn new(n_feet: usize, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("ftd_buffer", "must be >= 1"));
        }
        Ok(Self {
            window,
            speeds: vec![std::collections::VecDeque::with_capacity(window); n_feet],
        })
    }

    pub fn push(&mut self, speeds: &[T]) -> Result<()> {
        same_len("foot speeds", speeds.len(), self.speeds.len())?;
        for (buf, v) in self.speeds.iter_mut().zip(speeds) {
            if buf.len() == self.window {
                buf.pop_front();
            }
            buf.push_back(*v);
        }
        Ok(())
    }

    pub fn reward(&self, touchdown: &[bool]) -> Result<T> {
        let hist: Vec<Vec<T>> = self.speeds.iter().map(|b| b.iter().copied().collect()).collect();
        reward_ftd(&hist, touchdown)
    }
}

/// `κ = 1 - e^{-λ t}`.
pub fn penalty_schedule<T: Real>(iteration: T, decay_rate: T) -> T {
    T::one() - (-decay_rate * iteration).exp()
}

/// Decay rate with the given half-life in iterations.
pub fn decay_rate_for_half_life<T: Real>(half_life: T) -> T {
    T::LN_2() / half_life
}

/// `E_∞ + ε (E_0 - E_∞)` with `ε = ½ - ½ tanh(η (t - T_E))`.
pub fn entropy_schedule<T: Real>(t: T, e0: T, e_inf: T, eta: T, t_turn: T) -> T {
    let half = T::lit(0.5);
    let eps = half - half * (eta * (t - t_turn)).tanh();
    e_inf + eps * (e0 - e_inf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights<T> {
    pub c_v: T,
    pub c_e: T,
    pub c_c: T,
    pub c_ftd: T,
    /// (m/s)²
    pub sigma_v: T,
    /// 1/iteration
    pub decay_rate: T,
    pub ftd_buffer: usize,
}

impl<T: Real> RewardWeights<T> {
    /// Scales used for the Tytan and ANYmal policies, 500-iteration half-life.
    pub fn tytan() -> Self {
        Self {
            c_v: T::lit(0.2),
            c_e: T::lit(-16e-5),
            c_c: T::lit(-1.0),
            c_ftd: T::lit(-0.1),
            sigma_v: T::lit(0.25),
            decay_rate: decay_rate_for_half_life(T::lit(500.0)),
            ftd_buffer: 3,
        }
    }

    pub fn anymal() -> Self {
        Self::tytan()
    }

    pub fn minimal() -> Self {
        Self {
            c_e: T::lit(-128e-5),
            ..Self::tytan()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_v > T::zero()) {
            return Err(Error::invalid("sigma_v", "must be > 0"));
        }
        if self.ftd_buffer < 1 {
            return Err(Error::invalid("ftd_buffer", "must be >= 1"));
        }
        if !(self.decay_rate >= T::zero()) {
            return Err(Error::invalid("decay_rate", "must be >= 0"));
        }
        Ok(())
    }
}

/// Inputs of one reward evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardStep<T> {
    pub command: BaseVelocity<T>,
    pub measured: BaseVelocity<T>,
    pub power: PowerBreakdown<T>,
    pub collision: bool,
    /// Output of [`reward_ftd`], m/s.
    pub ftd: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms<T> {
    pub r_v: T,
    pub r_e: T,
    pub r_c: T,
    pub r_ftd: T,
    pub kappa: T,
    pub total: T,
}

/// `r = c_v r_v + c_c r_c + κ (c_e r_e + c_ftd r_ftd)` with `r_e = γ_v P_total`.
pub fn total_reward<T: Real>(step: &RewardStep<T>, w: &RewardWeights<T>, iteration: T) -> Result<RewardTerms<T>> {
    w.validate()?;
    let c = &step.command;
    let r_v = reward_velocity(c, &step.measured, w.sigma_v);
    let r_e = gamma_v(&[c.vx, c.vy, c.yaw_rate]) * step.power.p_total;
    let r_c = if step.collision { T::one() } else { T::zero() };
    let kappa = penalty_schedule(iteration, w.decay_rate);
    let total = w.c_v * r_v + w.c_c * r_c + kappa * (w.c_e * r_e + w.c_ftd * step.ftd);
    Ok(RewardTerms {
        r_v,
        r_e,
        r_c,
        r_ftd: step.ftd,
        kappa,
        total,
    })
}

/// One battery discharge record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTrial<T> {
    /// Wh
    pub battery_capacity: T,
    pub soc_start: T,
    pub soc_end: T,
    /// s
    pub duration: T,
    /// m; absent for stationary calibration trials.
    pub distance: Option<T>,
    /// kg
    pub mass: T,
    /// m/s²
    pub gravity: T,
}

impl<T: Real> EnergyTrial<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.battery_capacity > T::zero()) {
            return Err(Error::invalid("battery_capacity", "must be > 0"));
        }
        if !(T::zero() <= self.soc_end && self.soc_end <= self.soc_start && self.soc_start <= T::one()) {
            return Err(Error::invalid("soc", "require 0 <= soc_end <= soc_start <= 1"));
        }
        if !(self.duration > T::zero()) {
            return Err(Error::invalid("duration", "must be > 0"));
        }
        if !(self.mass > T::zero() && self.gravity > T::zero()) {
            return Err(Error::invalid("trial", "mass and gravity must be > 0"));
        }
        if let Some(d) = self.distance {
            if !(d > T::zero()) {
                return Err(Error::invalid("distance", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Energy drawn, J.
    pub fn energy(&self) -> T {
        self.battery_capacity * (self.soc_start - self.soc_end) * T::lit(SECONDS_PER_HOUR)
    }
}

/// Mean battery power over the trial, W.
pub fn average_power<T: Real>(trial: &EnergyTrial<T>) -> Result<T> {
    trial.validate()?;
    Ok(trial.energy() / trial.duration)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CotBreakdown<T> {
    pub cot: T,
    /// Electronics share, from the drives-off trial.
    pub coe: T,
    /// Idle-drive share, rest minus off.
    pub cod: T,
    /// Remainder attributed to locomotion.
    pub col: T,
    pub p_track: T,
    pub p_rest: T,
    pub p_off: T,
}

/// Split the track cost of transport using the rest and off calibration trials.
///
/// Mass and gravity come from the track trial.
pub fn cot_decompose<T: Real>(
    track: &EnergyTrial<T>,
    rest: &EnergyTrial<T>,
    off: &EnergyTrial<T>,
) -> Result<CotBreakdown<T>> {
    let Some(distance) = track.distance else {
        return Err(Error::invalid("track", "distance is required"));
    };
    let p_track = average_power(track)?;
    let p_rest = average_power(rest)?;
    let p_off = average_power(off)?;
    if p_rest < p_off {
        return Err(Error::invalid(
            "calibration trials",
            format!("rest power {p_rest} W is below off power {p_off} W"),
        ));
    }
    let weight_distance = track.mass * track.gravity * distance;
    let cot = track.energy() / weight_distance;
    let coe = p_off * track.duration / weight_distance;
    let cod = (p_rest - p_off) * track.duration / weight_distance;
    let col = cot - coe - cod;
    Ok(CotBreakdown {
        cot,
        coe,
        cod,
        col,
        p_track,
        p_rest,
        p_off,
    })
}
