//! Parameter identification from recorded joint trajectories.
//!
//! The search vector is `[I_a(0..n), d(0..n), τ_f(0..n), q_b(0..n), T_d]`.
//! Its loss is the time-averaged squared joint-position error between the
//! recording and a rollout that replays the recorded targets.

mod cmaes;
mod eigen;

pub use cmaes::{minimize_box, CmaEsOptions, Minimum, StopReason};
pub use eigen::symmetric_eigen;

use rayon::prelude::*;

use crate::dynamics::{rollout, JointParams, JointState, RobotModel, SimConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trajectory::Trajectory;

/// Minimum recording length accepted by [`cma_es_fit`], s.
pub const MIN_FIT_DURATION: f64 = 2.0;

/// Flat identification vector of length `4n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    pub values: Vec<T>,
}

impl<T: Real> ParamVector<T> {
    pub fn len_for(n_joints: usize) -> usize {
        4 * n_joints + 1
    }

    pub fn n_joints(&self) -> usize {
        (self.values.len().saturating_sub(1)) / 4
    }

    /// Read the identified quantities out of a model.
    pub fn pack(model: &RobotModel<T>) -> Self {
        let j = &model.joints;
        let mut values = Vec::with_capacity(Self::len_for(j.len()));
        values.extend(j.iter().map(|p| p.armature_inertia));
        values.extend(j.iter().map(|p| p.viscous_damping));
        values.extend(j.iter().map(|p| p.coulomb_friction));
        values.extend(j.iter().map(|p| p.joint_bias));
        values.push(model.command_delay);
        Self { values }
    }

    pub fn joint(&self, j: usize) -> JointParams<T> {
        let n = self.n_joints();
        let v = &self.values;
        JointParams::new(v[j], v[n + j], v[2 * n + j], v[3 * n + j])
    }

    pub fn command_delay(&self) -> T {
        self.values[4 * self.n_joints()]
    }

    /// Copy of `base` with joints and delay taken from this vector.
    pub fn unpack(&self, base: &RobotModel<T>) -> Result<RobotModel<T>> {
        let n = base.n_joints();
        if self.values.len() != Self::len_for(n) {
            return Err(Error::Shape(format!(
                "parameter vector has {} entries, expected {} for {n} joints",
                self.values.len(),
                Self::len_for(n)
            )));
        }
        let mut model = base.clone();
        for j in 0..n {
            model.joints[j] = self.joint(j);
        }
        model.command_delay = self.command_delay();
        Ok(model)
    }
}

/// Per-entry search box for a [`ParamVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBounds<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> ParamBounds<T> {
    /// Per-quantity ranges broadcast over `n_joints`.
    pub fn uniform(
        n_joints: usize,
        inertia: (T, T),
        damping: (T, T),
        friction: (T, T),
        bias: (T, T),
        delay: (T, T),
    ) -> Self {
        let mut lower = Vec::with_capacity(ParamVector::<T>::len_for(n_joints));
        let mut upper = Vec::with_capacity(lower.capacity());
        for (lo, hi) in [inertia, damping, friction, bias] {
            lower.extend(std::iter::repeat_n(lo, n_joints));
            upper.extend(std::iter::repeat_n(hi, n_joints));
        }
        lower.push(delay.0);
        upper.push(delay.1);
        Self { lower, upper }
    }

    /// I_a ∈ [1e-6, 10], d ∈ [0, 50], τ_f ∈ [0, 10], q_b ∈ [-0.2, 0.2], T_d ∈ [0, 0.05].
    pub fn default_for(n_joints: usize) -> Self {
        let l = T::lit;
        Self::uniform(
            n_joints,
            (l(1e-6), l(10.0)),
            (l(0.0), l(50.0)),
            (l(0.0), l(10.0)),
            (l(-0.2), l(0.2)),
            (l(0.0), l(0.05)),
        )
    }

    pub fn n_joints(&self) -> usize {
        self.lower.len().saturating_sub(1) / 4
    }

    pub fn validate(&self, n_joints: usize) -> Result<()> {
        let len = ParamVector::<T>::len_for(n_joints);
        if self.lower.len() != len || self.upper.len() != len {
            return Err(Error::Shape(format!(
                "bounds have {}/{} entries, expected {len}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for i in 0..len {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::invalid("bounds", format!("entry {i}: [{lo}, {hi}]")));
            }
        }
        // inertia must stay positive, the rest non-negative except the bias
        for j in 0..n_joints {
            if !(self.lower[j] > T::zero()) {
                return Err(Error::invalid("bounds", format!("armature inertia {j} lower bound must be > 0")));
            }
            for (block, name) in [(1, "damping"), (2, "friction")] {
                if self.lower[block * n_joints + j] < T::zero() {
                    return Err(Error::invalid("bounds", format!("{name} {j} lower bound must be >= 0")));
                }
            }
        }
        if self.lower[len - 1] < T::zero() {
            return Err(Error::invalid("bounds", "command delay lower bound must be >= 0"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &ParamVector<T>) -> bool {
        p.values.len() == self.lower.len()
            && p.values
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T> {
    pub population_size: usize,
    pub max_iterations: usize,
    /// Fraction of each bound width.
    pub initial_sigma: T,
    pub seed: u64,
    /// Stop once the best loss reaches this value, rad².
    pub target_loss: Option<T>,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            population_size: 32,
            max_iterations: 800,
            initial_sigma: T::lit(0.3),
            seed: 0,
            target_loss: None,
        }
    }
}

impl<T: Real> FitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::invalid("population_size", "must be >= 4"));
        }
        if !(self.initial_sigma > T::zero() && self.initial_sigma <= T::one()) {
            return Err(Error::invalid("initial_sigma", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub best_params: ParamVector<T>,
    /// rad²
    pub best_loss: T,
    /// Running best loss per iteration.
    pub score_trace: Vec<T>,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    /// Target loss reached or search collapsed onto a point.
    pub converged: bool,
    pub stop: StopReason,
}

/// Time-averaged squared position error, summed over joints.
pub fn loss<T: Real>(real: &Trajectory<T>, sim: &Trajectory<T>) -> Result<T> {
    check_aligned(real, sim)?;
    if real.is_empty() {
        return Err(Error::Shape("empty trajectories".into()));
    }
    let total: T = real
        .positions
        .iter()
        .zip(&sim.positions)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>())
        .sum();
    Ok(total / T::lit(real.len() as f64))
}

fn check_aligned<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} samples vs {}", a.len(), b.len())));
    }
    if a.n_joints() != b.n_joints() {
        return Err(Error::Shape(format!("{} joints vs {}", a.n_joints(), b.n_joints())));
    }
    Ok(())
}

/// Rollout initial condition taken from the first recorded sample.
pub fn initial_states<T: Real>(data: &Trajectory<T>) -> Result<Vec<JointState<T>>> {
    let (Some(q), Some(qd)) = (data.positions.first(), data.velocities.first()) else {
        return Err(Error::Shape("empty trajectory".into()));
    };
    Ok(q.iter()
        .zip(qd)
        .map(|(&position, &velocity)| JointState {
            position,
            velocity,
            filtered_velocity: velocity,
        })
        .collect())
}

/// Loss of `params` on one recording.
pub fn evaluate<T: Real>(
    base: &RobotModel<T>,
    params: &ParamVector<T>,
    data: &Trajectory<T>,
    sim: &SimConfig<T>,
) -> Result<T> {
    let model = params.unpack(base)?;
    let out = rollout(&model, data, sim, &initial_states(data)?)?;
    loss(data, &out)
}

/// Losses of a population, in population order.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationLosses<T> {
    /// `+∞` where the rollout failed or produced non-finite states.
    pub losses: Vec<T>,
    /// Index and message of each failed candidate.
    pub failures: Vec<(usize, String)>,
}

/// Evaluate every candidate on every recording, in parallel.
///
/// A candidate's loss is the mean over recordings. The result does not
/// depend on the thread count.
pub fn evaluate_population<T: Real>(
    base: &RobotModel<T>,
    population: &[ParamVector<T>],
    data: &[Trajectory<T>],
    sim: &SimConfig<T>,
) -> Result<PopulationLosses<T>> {
    if population.is_empty() {
        return Err(Error::invalid("population", "must not be empty"));
    }
    if data.is_empty() {
        return Err(Error::invalid("data", "at least one trajectory is required"));
    }
    let per: Vec<Result<T>> = population
        .par_iter()
        .map(|p| {
            let mut sum = T::zero();
            for d in data {
                sum = sum + evaluate(base, p, d, sim)?;
            }
            let mean = sum / T::lit(data.len() as f64);
            if mean.is_finite() {
                Ok(mean)
            } else {
                Err(Error::NonFinite("rollout state".into()))
            }
        })
        .collect();
    let mut losses = Vec::with_capacity(per.len());
    let mut failures = Vec::new();
    for (i, r) in per.into_iter().enumerate() {
        match r {
            Ok(v) => losses.push(v),
            Err(e) => {
                losses.push(T::infinity());
                failures.push((i, e.to_string()));
            }
        }
    }
    Ok(PopulationLosses { losses, failures })
}

/// Fit the identification vector to one or more recordings with CMA-ES.
pub fn cma_es_fit<T: Real>(
    base: &RobotModel<T>,
    data: &[Trajectory<T>],
    bounds: &ParamBounds<T>,
    cfg: &FitConfig<T>,
    sim: &SimConfig<T>,
) -> Result<FitResult<T>> {
    cfg.validate()?;
    base.validate_shape()?;
    let n = base.n_joints();
    bounds.validate(n)?;
    if data.is_empty() {
        return Err(Error::invalid("data", "at least one trajectory is required"));
    }
    for d in data {
        if d.n_joints() != n {
            return Err(Error::Shape(format!("data has {} joints, model has {n}", d.n_joints())));
        }
        if d.duration() < T::lit(MIN_FIT_DURATION) {
            return Err(Error::invalid(
                "data",
                format!("recording covers {} s, need at least {MIN_FIT_DURATION} s", d.duration()),
            ));
        }
    }

    let opts = CmaEsOptions {
        population_size: cfg.population_size,
        max_iterations: cfg.max_iterations,
        initial_sigma: cfg.initial_sigma,
        seed: cfg.seed,
        target_loss: cfg.target_loss,
    };
    let mut setup_error = None;
    let min = minimize_box(&bounds.lower, &bounds.upper, &opts, |pop| {
        let pop: Vec<ParamVector<T>> = pop.iter().map(|v| ParamVector { values: v.clone() }).collect();
        match evaluate_population(base, &pop, data, sim) {
            Ok(r) => r.losses,
            Err(e) => {
                setup_error.get_or_insert(e);
                vec![T::infinity(); pop.len()]
            }
        }
    });
    if let Some(e) = setup_error {
        return Err(e);
    }
    let min = min?;
    Ok(FitResult {
        best_params: ParamVector { values: min.x },
        best_loss: min.value,
        converged: min.stop != StopReason::MaxIterations,
        score_trace: min.trace,
        evaluations: min.evaluations,
        failed_evaluations: min.failed_evaluations,
        stop: min.stop,
    })
}

/// Per-joint statistics of `Δq = q_sim - q_real` and `Δq̇`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePortraitMetrics<T> {
    /// rad
    pub rms_dq: Vec<T>,
    /// rad/s
    pub rms_dqd: Vec<T>,
    /// rad
    pub mean_dq: Vec<T>,
}

pub fn delta_phase_metrics<T: Real>(real: &Trajectory<T>, sim: &Trajectory<T>) -> Result<PhasePortraitMetrics<T>> {
    check_aligned(real, sim)?;
    if real.is_empty() {
        return Err(Error::Shape("empty trajectories".into()));
    }
    let n = real.n_joints();
    let k = T::lit(real.len() as f64);
    let mut sq = vec![T::zero(); n];
    let mut sqd = vec![T::zero(); n];
    let mut sum = vec![T::zero(); n];
    for i in 0..real.len() {
        for j in 0..n {
            let dq = sim.positions[i][j] - real.positions[i][j];
            let dqd = sim.velocities[i][j] - real.velocities[i][j];
            sq[j] = sq[j] + dq * dq;
            sqd[j] = sqd[j] + dqd * dqd;
            sum[j] = sum[j] + dq;
        }
    }
    Ok(PhasePortraitMetrics {
        rms_dq: sq.iter().map(|v| (*v / k).sqrt()).collect(),
        rms_dqd: sqd.iter().map(|v| (*v / k).sqrt()).collect(),
        // clamp so |mean| never exceeds rms through rounding
        mean_dq: sum
            .iter()
            .zip(&sq)
            .map(|(s, q)| {
                let m = *s / k;
                let r = (*q / k).sqrt();
                m.max(-r).min(r)
            })
            .collect(),
    })
}

/// Per-sample `(Δq, Δq̇)` for joint `j`.
pub fn delta_phase_series<T: Real>(real: &Trajectory<T>, sim: &Trajectory<T>, j: usize) -> Result<Vec<(T, T)>> {
    check_aligned(real, sim)?;
    if j >= real.n_joints() {
        return Err(Error::Shape(format!("joint {j} out of range")));
    }
    Ok((0..real.len())
        .map(|i| {
            (
                sim.positions[i][j] - real.positions[i][j],
                sim.velocities[i][j] - real.velocities[i][j],
            )
        })
        .collect())
}
