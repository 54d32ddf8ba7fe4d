//! TOML input files.
//!
//! Every file carries `schema_version = 1` and rejects unknown keys. Per-joint
//! quantities are arrays indexed by joint; their lengths must agree. Errors
//! name the file and the line of the offending key.
//!
//! Robot model:
//!
//! ```toml
//! schema_version = 1
//! command_delay = 0.0075          # s
//! velocity_filter_cutoff = 50.0   # Hz, optional
//! bias_bound = 0.2                # rad, optional
//!
//! [joints]
//! names = ["LF_HAA", "LF_HFE"]    # optional
//! armature_inertia = [0.05, 0.05] # I_a, kg·m²
//! viscous_damping = [0.4, 0.4]    # d, N·m·s/rad
//! coulomb_friction = [0.0, 0.0]   # τ_f, N·m
//! joint_bias = [0.0, 0.0]         # q̃_b, rad
//! p_gain = [80.0, 80.0]           # P_τ, N·m/rad
//! d_gain = [2.0, 2.0]             # D_τ, N·m·s/rad
//!
//! [motors]                        # optional, all arrays per joint
//! gear_ratio = [...]
//! motor_constant = [...]          # k_i
//! coil_resistance = [...]
//! phase_inductance = [...]        # optional
//! back_emf_constant = [...]       # optional, defaults to motor_constant
//! max_motor_torque = [...]
//! max_motor_speed = [...]
//! bus_voltage = [...]
//! regen_coefficient = [...]
//!
//! [limits]                        # optional
//! hard_lower = [...]
//! soft_lower = [...]
//! soft_upper = [...]
//! hard_upper = [...]
//!
//! [sim]                           # optional
//! physics_dt = 2.5e-4
//! control_dt = 2.5e-3
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DriveGains, JointLimits, JointParams, MotorParams, RobotModel, SimConfig, DEFAULT_BIAS_BOUND};
use crate::energy::{EnergyTrial, RewardWeights, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::excitation::{ChirpSpec, StepSpec};
use crate::identify::{FitConfig, ParamBounds};
use crate::analysis::{Branch, PendulumMeasurement, PlanarLegModel};
use crate::scalar::Real;

pub const SCHEMA_VERSION: u32 = 1;

/// Source text with its name, kept for anchoring errors to lines.
struct Source<'a> {
    name: &'a str,
    text: &'a str,
}

impl Source<'_> {
    fn line_of_offset(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let col = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
        (line, col)
    }

    /// First line assigning `key`, if any.
    fn line_of_key(&self, key: &str) -> Option<usize> {
        self.text.lines().position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
    }

    fn error_at_key(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        match self.line_of_key(key) {
            Some(line) => Error::Config(format!("{}:{line}: {msg}", self.name)),
            None => Error::Config(format!("{}: {msg}", self.name)),
        }
    }

    fn parse<C: DeserializeOwned + Versioned>(&self) -> Result<C> {
        let cfg: C = toml::from_str(self.text).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(span) => {
                    let (line, col) = self.line_of_offset(span.start);
                    Error::Config(format!("{}:{line}:{col}: {msg}", self.name))
                }
                None => Error::Config(format!("{}: {msg}", self.name)),
            }
        })?;
        if cfg.schema_version() != SCHEMA_VERSION {
            return Err(self.error_at_key(
                "schema_version",
                format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", cfg.schema_version()),
            ));
        }
        Ok(cfg)
    }
}

trait Versioned {
    fn schema_version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        }
    )*};
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Parse a file of any schema in this module.
fn load<C: DeserializeOwned + Versioned>(path: &Path) -> Result<C> {
    let text = read_file(path)?;
    let name = path.display().to_string();
    Source { name: &name, text: &text }.parse()
}

/// A scalar applied to every joint, or one value per joint.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PerJoint {
    Scalar(f64),
    Each(Vec<f64>),
}

impl PerJoint {
    pub fn expand(&self, n: usize) -> std::result::Result<Vec<f64>, String> {
        match self {
            PerJoint::Scalar(v) => Ok(vec![*v; n]),
            PerJoint::Each(v) if v.len() == n => Ok(v.clone()),
            PerJoint::Each(v) => Err(format!("{} values for {n} joints", v.len())),
        }
    }
}

// ---------------------------------------------------------------- model

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub command_delay: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity_filter_cutoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias_bound: Option<f64>,
    pub joints: JointsSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motors: Option<MotorsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct JointsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    pub armature_inertia: PerJoint,
    pub viscous_damping: PerJoint,
    pub coulomb_friction: PerJoint,
    pub joint_bias: PerJoint,
    pub p_gain: PerJoint,
    pub d_gain: PerJoint,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MotorsSection {
    pub gear_ratio: PerJoint,
    pub motor_constant: PerJoint,
    pub coil_resistance: PerJoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_inductance: Option<PerJoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub back_emf_constant: Option<PerJoint>,
    pub max_motor_torque: PerJoint,
    pub max_motor_speed: PerJoint,
    pub bus_voltage: PerJoint,
    pub regen_coefficient: PerJoint,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub hard_lower: PerJoint,
    pub soft_lower: PerJoint,
    pub soft_upper: PerJoint,
    pub hard_upper: PerJoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub physics_dt: f64,
    pub control_dt: f64,
}

/// A parsed and validated robot model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig<T> {
    pub model: RobotModel<T>,
    pub names: Vec<String>,
    pub bias_bound: T,
    pub sim: SimConfig<T>,
}

fn expand(src: &Source, key: &str, v: &PerJoint, n: usize) -> Result<Vec<f64>> {
    v.expand(n).map_err(|e| src.error_at_key(key, format!("`{key}`: {e}")))
}

fn lit_vec<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

impl ModelFile {
    /// From `names` if given, else from the first per-joint array.
    fn joint_count(&self, src: &Source) -> Result<usize> {
        let j = &self.joints;
        let n = match &j.names {
            Some(names) => names.len(),
            None => [
                &j.armature_inertia,
                &j.viscous_damping,
                &j.coulomb_friction,
                &j.joint_bias,
                &j.p_gain,
                &j.d_gain,
            ]
            .into_iter()
            .find_map(|v| match v {
                PerJoint::Each(v) => Some(v.len()),
                PerJoint::Scalar(_) => None,
            })
            .ok_or_else(|| src.error_at_key("armature_inertia", "joint count unknown: give `names` or one per-joint array"))?,
        };
        if n == 0 {
            return Err(src.error_at_key("armature_inertia", "no joints"));
        }
        Ok(n)
    }

    fn build<T: Real>(&self, src: &Source) -> Result<ModelConfig<T>> {
        let j = &self.joints;
        let n = self.joint_count(src)?;
        let names = match &j.names {
            Some(names) => names.clone(),
            None => (0..n).map(|i| format!("joint{i}")).collect(),
        };
        let ia = expand(src, "armature_inertia", &j.armature_inertia, n)?;
        let d = expand(src, "viscous_damping", &j.viscous_damping, n)?;
        let tf = expand(src, "coulomb_friction", &j.coulomb_friction, n)?;
        let bias = expand(src, "joint_bias", &j.joint_bias, n)?;
        let p = expand(src, "p_gain", &j.p_gain, n)?;
        let dg = expand(src, "d_gain", &j.d_gain, n)?;
        let joints = (0..n)
            .map(|i| JointParams::new(T::lit(ia[i]), T::lit(d[i]), T::lit(tf[i]), T::lit(bias[i])))
            .collect();
        let gains = (0..n).map(|i| DriveGains::new(T::lit(p[i]), T::lit(dg[i]))).collect();
        let motors = match &self.motors {
            None => None,
            Some(m) => {
                let gear = expand(src, "gear_ratio", &m.gear_ratio, n)?;
                let kt = expand(src, "motor_constant", &m.motor_constant, n)?;
                let r = expand(src, "coil_resistance", &m.coil_resistance, n)?;
                let l = m
                    .phase_inductance
                    .as_ref()
                    .map(|v| expand(src, "phase_inductance", v, n))
                    .transpose()?;
                let kw = m
                    .back_emf_constant
                    .as_ref()
                    .map(|v| expand(src, "back_emf_constant", v, n))
                    .transpose()?;
                let tau = expand(src, "max_motor_torque", &m.max_motor_torque, n)?;
                let speed = expand(src, "max_motor_speed", &m.max_motor_speed, n)?;
                let u = expand(src, "bus_voltage", &m.bus_voltage, n)?;
                let regen = expand(src, "regen_coefficient", &m.regen_coefficient, n)?;
                Some(
                    (0..n)
                        .map(|i| MotorParams {
                            gear_ratio: T::lit(gear[i]),
                            motor_constant: T::lit(kt[i]),
                            coil_resistance: T::lit(r[i]),
                            phase_inductance: l.as_ref().map(|v| T::lit(v[i])),
                            back_emf_constant: kw.as_ref().map(|v| T::lit(v[i])),
                            max_motor_torque: T::lit(tau[i]),
                            max_motor_speed: T::lit(speed[i]),
                            bus_voltage: T::lit(u[i]),
                            regen_coefficient: T::lit(regen[i]),
                        })
                        .collect(),
                )
            }
        };
        let limits = match &self.limits {
            None => None,
            Some(l) => {
                let hl = expand(src, "hard_lower", &l.hard_lower, n)?;
                let sl = expand(src, "soft_lower", &l.soft_lower, n)?;
                let su = expand(src, "soft_upper", &l.soft_upper, n)?;
                let hu = expand(src, "hard_upper", &l.hard_upper, n)?;
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    out.push(
                        JointLimits::new(T::lit(hl[i]), T::lit(sl[i]), T::lit(su[i]), T::lit(hu[i]))
                            .map_err(|e| src.error_at_key("hard_lower", format!("joint {i}: {e}")))?,
                    );
                }
                Some(out)
            }
        };
        let model = RobotModel {
            joints,
            gains,
            motors,
            limits,
            command_delay: T::lit(self.command_delay),
            velocity_filter_cutoff: self.velocity_filter_cutoff.map(T::lit),
        };
        let bias_bound = T::lit(self.bias_bound.unwrap_or(DEFAULT_BIAS_BOUND));
        model
            .validate(bias_bound)
            .map_err(|e| Error::Config(format!("{}: {e}", src.name)))?;
        let sim = match self.sim {
            None => SimConfig::default(),
            Some(s) => SimConfig::new(T::lit(s.physics_dt), T::lit(s.control_dt))
                .map_err(|e| src.error_at_key("physics_dt", e))?,
        };
        Ok(ModelConfig {
            model,
            names,
            bias_bound,
            sim,
        })
    }
}

impl<T: Real> ModelConfig<T> {
    /// Inverse of [`ModelConfig::from_toml`].
    pub fn to_toml(&self) -> Result<String> {
        let m = &self.model;
        let col = |f: &dyn Fn(usize) -> T| PerJoint::Each((0..m.n_joints()).map(|i| f(i).to_f64_lossy()).collect());
        let file = ModelFile {
            schema_version: SCHEMA_VERSION,
            command_delay: m.command_delay.to_f64_lossy(),
            velocity_filter_cutoff: m.velocity_filter_cutoff.map(|v| v.to_f64_lossy()),
            bias_bound: Some(self.bias_bound.to_f64_lossy()),
            joints: JointsSection {
                names: Some(self.names.clone()),
                armature_inertia: col(&|i| m.joints[i].armature_inertia),
                viscous_damping: col(&|i| m.joints[i].viscous_damping),
                coulomb_friction: col(&|i| m.joints[i].coulomb_friction),
                joint_bias: col(&|i| m.joints[i].joint_bias),
                p_gain: col(&|i| m.gains[i].p_gain),
                d_gain: col(&|i| m.gains[i].d_gain),
            },
            motors: m.motors.as_ref().map(|mo| {
                let opt = |f: &dyn Fn(&MotorParams<T>) -> Option<T>| {
                    mo.iter()
                        .map(|x| f(x).map(|v| v.to_f64_lossy()))
                        .collect::<Option<Vec<_>>>()
                        .map(PerJoint::Each)
                };
                MotorsSection {
                    gear_ratio: col(&|i| mo[i].gear_ratio),
                    motor_constant: col(&|i| mo[i].motor_constant),
                    coil_resistance: col(&|i| mo[i].coil_resistance),
                    phase_inductance: opt(&|x| x.phase_inductance),
                    back_emf_constant: opt(&|x| x.back_emf_constant),
                    max_motor_torque: col(&|i| mo[i].max_motor_torque),
                    max_motor_speed: col(&|i| mo[i].max_motor_speed),
                    bus_voltage: col(&|i| mo[i].bus_voltage),
                    regen_coefficient: col(&|i| mo[i].regen_coefficient),
                }
            }),
            limits: m.limits.as_ref().map(|l| LimitsSection {
                hard_lower: col(&|i| l[i].hard_lower),
                soft_lower: col(&|i| l[i].soft_lower),
                soft_upper: col(&|i| l[i].soft_upper),
                hard_upper: col(&|i| l[i].hard_upper),
            }),
            sim: Some(SimSection {
                physics_dt: self.sim.physics_dt.to_f64_lossy(),
                control_dt: self.sim.control_dt.to_f64_lossy(),
            }),
        };
        let body = toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))?;
        Ok(body)
    }

    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        let src = Source { name, text };
        let file: ModelFile = src.parse()?;
        file.build(&src)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml(&read_file(path)?, &path.display().to_string())
    }
}

// ---------------------------------------------------------------- bounds

/// Uniform `[lower, upper]` search box per parameter kind. Omitted kinds take
/// the defaults of [`ParamBounds::default_for`].
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub schema_version: u32,
    pub armature_inertia: Option<[f64; 2]>,
    pub viscous_damping: Option<[f64; 2]>,
    pub coulomb_friction: Option<[f64; 2]>,
    pub joint_bias: Option<[f64; 2]>,
    pub command_delay: Option<[f64; 2]>,
}

impl BoundsFile {
    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        Source { name, text }.parse()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load(path.as_ref())
    }

    pub fn bounds<T: Real>(&self, n_joints: usize) -> Result<ParamBounds<T>> {
        let d = ParamBounds::<f64>::default_for(n_joints);
        // default_for is uniform, so the first entry of each block describes it
        let pick = |o: Option<[f64; 2]>, k: usize| o.map_or((d.lower[k], d.upper[k]), |[a, b]| (a, b));
        let n = n_joints;
        let b = ParamBounds::uniform(
            n,
            pick(self.armature_inertia, 0),
            pick(self.viscous_damping, n),
            pick(self.coulomb_friction, 2 * n),
            pick(self.joint_bias, 3 * n),
            pick(self.command_delay, 4 * n),
        );
        b.validate(n_joints)
            .map_err(|e| Error::Config(format!("bounds: {e}")))?;
        Ok(ParamBounds {
            lower: lit_vec(&b.lower),
            upper: lit_vec(&b.upper),
        })
    }
}

// ---------------------------------------------------------------- fit

/// Optimizer settings. The seed comes from the command line.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub schema_version: u32,
    pub population_size: Option<usize>,
    pub max_iterations: Option<usize>,
    pub initial_sigma: Option<f64>,
    pub target_loss: Option<f64>,
}

impl FitFile {
    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        Source { name, text }.parse()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load(path.as_ref())
    }

    pub fn fit_config<T: Real>(&self, seed: u64) -> Result<FitConfig<T>> {
        let d = FitConfig::<T>::default();
        let cfg = FitConfig {
            population_size: self.population_size.unwrap_or(d.population_size),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            initial_sigma: self.initial_sigma.map_or(d.initial_sigma, T::lit),
            seed,
            target_loss: self.target_loss.map(T::lit),
        };
        cfg.validate()
            .map_err(|e| Error::Config(format!("fit: {e}")))?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------- excitation

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationFile {
    pub schema_version: u32,
    pub chirp: Option<ChirpSection>,
    pub steps: Option<StepsSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpSection {
    /// Hz
    pub f_start: f64,
    pub f_end: f64,
    /// s
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
    /// rad, one value or one per joint
    pub amplitude: PerJoint,
    #[serde(default = "zero_per_joint")]
    pub center: PerJoint,
    /// rad, optional per-joint phase offsets
    pub phase_offsets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepsSection {
    /// s
    pub dwell: f64,
    /// rad
    pub amplitude_range: f64,
    #[serde(default)]
    pub center: f64,
    pub duration: f64,
    pub sample_rate: f64,
}

fn zero_per_joint() -> PerJoint {
    PerJoint::Scalar(0.0)
}

impl ExcitationFile {
    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        Source { name, text }.parse()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load(path.as_ref())
    }

    /// Chirp spec and phase offsets for `n_joints`.
    pub fn chirp_spec<T: Real>(&self, n_joints: usize) -> Result<(ChirpSpec<T>, Vec<T>)> {
        let c = self
            .chirp
            .as_ref()
            .ok_or_else(|| Error::Config("excitation file has no [chirp] table".into()))?;
        let amplitude = c
            .amplitude
            .expand(n_joints)
            .map_err(|e| Error::Config(format!("chirp amplitude: {e}")))?;
        let center = c
            .center
            .expand(n_joints)
            .map_err(|e| Error::Config(format!("chirp center: {e}")))?;
        let offsets = match &c.phase_offsets {
            Some(v) if v.len() != n_joints => {
                return Err(Error::Config(format!("chirp phase_offsets: {} values for {n_joints} joints", v.len())))
            }
            Some(v) => lit_vec(v),
            None => Vec::new(),
        };
        let spec = ChirpSpec {
            f_start: T::lit(c.f_start),
            f_end: T::lit(c.f_end),
            duration: T::lit(c.duration),
            amplitude: lit_vec(&amplitude),
            center: lit_vec(&center),
            sample_rate: T::lit(c.sample_rate),
        };
        spec.validate()
            .map_err(|e| Error::Config(format!("chirp: {e}")))?;
        Ok((spec, offsets))
    }

    pub fn step_spec<T: Real>(&self, seed: u64) -> Result<StepSpec<T>> {
        let s = self
            .steps
            .as_ref()
            .ok_or_else(|| Error::Config("excitation file has no [steps] table".into()))?;
        let spec = StepSpec {
            dwell: T::lit(s.dwell),
            amplitude_range: T::lit(s.amplitude_range),
            center: T::lit(s.center),
            duration: T::lit(s.duration),
            sample_rate: T::lit(s.sample_rate),
            seed,
        };
        spec.validate()
            .map_err(|e| Error::Config(format!("steps: {e}")))?;
        Ok(spec)
    }
}

// ---------------------------------------------------------------- energy

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialFile {
    pub schema_version: u32,
    /// Wh
    pub battery_capacity: f64,
    pub soc_start: f64,
    pub soc_end: f64,
    /// s
    pub duration: f64,
    /// m
    pub distance: Option<f64>,
    /// kg
    pub mass: f64,
    pub gravity: Option<f64>,
}

impl TrialFile {
    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        Source { name, text }.parse()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load(path.as_ref())
    }

    pub fn trial<T: Real>(&self) -> Result<EnergyTrial<T>> {
        let t = EnergyTrial {
            battery_capacity: T::lit(self.battery_capacity),
            soc_start: T::lit(self.soc_start),
            soc_end: T::lit(self.soc_end),
            duration: T::lit(self.duration),
            distance: self.distance.map(T::lit),
            mass: T::lit(self.mass),
            gravity: T::lit(self.gravity.unwrap_or(STANDARD_GRAVITY)),
        };
        t.validate()
            .map_err(|e| Error::Config(format!("trial: {e}")))?;
        Ok(t)
    }
}

/// Reward scales. Omitted keys fall back to the named preset.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardFile {
    pub schema_version: u32,
    #[serde(default)]
    pub preset: RewardPreset,
    pub c_v: Option<f64>,
    pub c_e: Option<f64>,
    pub c_c: Option<f64>,
    pub c_ftd: Option<f64>,
    pub sigma_v: Option<f64>,
    pub decay_rate: Option<f64>,
    pub ftd_buffer: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardPreset {
    #[default]
    Tytan,
    Anymal,
    Minimal,
}

impl RewardFile {
    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        Source { name, text }.parse()
    }

    pub fn weights<T: Real>(&self) -> Result<RewardWeights<T>> {
        let mut w = match self.preset {
            RewardPreset::Tytan => RewardWeights::tytan(),
            RewardPreset::Anymal => RewardWeights::anymal(),
            RewardPreset::Minimal => RewardWeights::minimal(),
        };
        let set = |dst: &mut T, v: Option<f64>| {
            if let Some(v) = v {
                *dst = T::lit(v);
            }
        };
        set(&mut w.c_v, self.c_v);
        set(&mut w.c_e, self.c_e);
        set(&mut w.c_c, self.c_c);
        set(&mut w.c_ftd, self.c_ftd);
        set(&mut w.sigma_v, self.sigma_v);
        set(&mut w.decay_rate, self.decay_rate);
        if let Some(b) = self.ftd_buffer {
            w.ftd_buffer = b;
        }
        w.validate()
            .map_err(|e| Error::Config(format!("reward: {e}")))?;
        Ok(w)
    }
}

// ---------------------------------------------------------------- inertia

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumFile {
    pub schema_version: u32,
    pub mass: f64,
    pub com_distance: f64,
    pub eigenfrequency: f64,
    pub gravity: Option<f64>,
    pub sigma_r: f64,
    pub sigma_f: f64,
}

impl PendulumFile {
    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        Source { name, text }.parse()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load(path.as_ref())
    }

    pub fn measurement<T: Real>(&self) -> PendulumMeasurement<T> {
        PendulumMeasurement {
            mass: T::lit(self.mass),
            com_distance: T::lit(self.com_distance),
            eigenfrequency: T::lit(self.eigenfrequency),
            gravity: T::lit(self.gravity.unwrap_or(STANDARD_GRAVITY)),
            sigma_r: T::lit(self.sigma_r),
            sigma_f: T::lit(self.sigma_f),
        }
    }
}

/// Leg geometry plus the joint angles to evaluate.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegFile {
    pub schema_version: u32,
    pub base_mass: f64,
    pub link_length: f64,
    pub hip_inertia: f64,
    pub knee_inertia: f64,
    /// rad; knee angles for the vertical case, hip angles for the horizontal case
    pub angles: Vec<f64>,
    #[serde(default)]
    pub branch: BranchChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchChoice {
    #[default]
    Plus,
    Minus,
}

impl From<BranchChoice> for Branch {
    fn from(b: BranchChoice) -> Self {
        match b {
            BranchChoice::Plus => Branch::Plus,
            BranchChoice::Minus => Branch::Minus,
        }
    }
}

impl LegFile {
    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        Source { name, text }.parse()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load(path.as_ref())
    }

    pub fn leg<T: Real>(&self) -> Result<PlanarLegModel<T>> {
        let leg = PlanarLegModel {
            base_mass: T::lit(self.base_mass),
            link_length: T::lit(self.link_length),
            hip_inertia: T::lit(self.hip_inertia),
            knee_inertia: T::lit(self.knee_inertia),
        };
        leg.validate()
            .map_err(|e| Error::Config(format!("leg: {e}")))?;
        Ok(leg)
    }
}

/// Components `(inertia, ratio)` reflected through their gear ratios.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceFile {
    pub schema_version: u32,
    pub component: Vec<ReduceComponent>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceComponent {
    pub name: Option<String>,
    /// kg·m²
    pub inertia: f64,
    /// speed of the component over the output speed
    pub ratio: f64,
}

impl ReduceFile {
    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        Source { name, text }.parse()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load(path.as_ref())
    }

    pub fn components<T: Real>(&self) -> Vec<(T, T)> {
        self.component
            .iter()
            .map(|c| (T::lit(c.inertia), T::lit(c.ratio)))
            .collect()
    }
}

versioned!(
    ModelFile, BoundsFile, FitFile, ExcitationFile, TrialFile, RewardFile, PendulumFile, LegFile, ReduceFile
);

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"
schema_version = 1
command_delay = 0.0075

[joints]
armature_inertia = [0.05, 0.06]
viscous_damping = [0.4, 0.5]
coulomb_friction = [0.0, 0.01]
joint_bias = [0.0, -0.01]
p_gain = [80.0, 80.0]
d_gain = [2.0, 2.0]
"#;

    fn msg(e: Error) -> String {
        e.to_string()
    }

    #[test]
    fn model_round_trip() {
        let cfg = ModelConfig::<f64>::from_toml(MODEL, "m.toml").unwrap();
        assert_eq!(cfg.model.n_joints(), 2);
        assert_eq!(cfg.model.joints[1].joint_bias, -0.01);
        assert_eq!(cfg.model.gains[0].d_gain, 2.0);
        assert_eq!(cfg.names, vec!["joint0", "joint1"]);
        assert_eq!(cfg.sim, SimConfig::default());
        let single = ModelConfig::<f32>::from_toml(MODEL, "m.toml").unwrap();
        assert_eq!(single.model.joints[0].armature_inertia, 0.05f32);
    }

    #[test]
    fn model_toml_round_trip() {
        let mut cfg = ModelConfig::<f64>::from_toml(MODEL, "m.toml").unwrap();
        cfg.model.velocity_filter_cutoff = Some(40.0);
        cfg.model.joints[0].armature_inertia = 0.1 + 0.2;
        let text = cfg.to_toml().unwrap();
        assert_eq!(ModelConfig::<f64>::from_toml(&text, "out.toml").unwrap(), cfg);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = MODEL.replace("p_gain", "p_gian");
        let e = msg(ModelConfig::<f64>::from_toml(&text, "m.toml").unwrap_err());
        assert!(e.contains("m.toml:10:"), "{e}");
        assert!(e.contains("p_gian"), "{e}");
    }

    #[test]
    fn length_mismatch_reports_line() {
        let text = MODEL.replace("d_gain = [2.0, 2.0]", "d_gain = [2.0]");
        let e = msg(ModelConfig::<f64>::from_toml(&text, "m.toml").unwrap_err());
        assert!(e.contains("m.toml:11:"), "{e}");
    }

    #[test]
    fn joint_scalars_broadcast() {
        let text = MODEL
            .replace("coulomb_friction = [0.0, 0.01]", "coulomb_friction = 0.0")
            .replace("p_gain = [80.0, 80.0]", "p_gain = 80.0");
        let c = ModelConfig::<f64>::from_toml(&text, "m.toml").unwrap();
        assert_eq!(c.model.joints[1].coulomb_friction, 0.0);
        assert_eq!(c.model.gains[1].p_gain, 80.0);

        let scalars = "schema_version = 1\ncommand_delay = 0.0\n[joints]\narmature_inertia = 0.05\nviscous_damping = 0.4\ncoulomb_friction = 0.0\njoint_bias = 0.0\np_gain = 60.0\nd_gain = 2.0\n";
        let e = ModelConfig::<f64>::from_toml(scalars, "s.toml").unwrap_err().to_string();
        assert!(e.contains("s.toml:4:") && e.contains("joint count"), "{e}");
        let named = scalars.replace("[joints]\n", "[joints]\nnames = [\"a\", \"b\", \"c\"]\n");
        assert_eq!(ModelConfig::<f64>::from_toml(&named, "s.toml").unwrap().model.n_joints(), 3);
    }

    #[test]
    fn wrong_schema_version() {
        let text = MODEL.replace("schema_version = 1", "schema_version = 7");
        let e = msg(ModelConfig::<f64>::from_toml(&text, "m.toml").unwrap_err());
        assert!(e.contains("m.toml:2:") && e.contains("schema_version 7"), "{e}");
    }

    #[test]
    fn syntax_error_is_anchored() {
        let text = MODEL.replace("command_delay = 0.0075", "command_delay = ");
        let e = msg(ModelConfig::<f64>::from_toml(&text, "m.toml").unwrap_err());
        assert!(e.starts_with("config error: m.toml:3:"), "{e}");
    }

    #[test]
    fn bias_bound_is_enforced() {
        let text = MODEL.replace("joint_bias = [0.0, -0.01]", "joint_bias = [0.0, -0.3]");
        assert!(ModelConfig::<f64>::from_toml(&text, "m.toml").is_err());
        let text = format!("bias_bound = 0.5\n{text}");
        assert!(ModelConfig::<f64>::from_toml(&text, "m.toml").is_ok());
    }

    #[test]
    fn bounds_defaults_and_overrides() {
        let b = BoundsFile::from_toml("schema_version = 1\njoint_bias = [-0.05, 0.05]\n", "b.toml").unwrap();
        let pb = b.bounds::<f64>(2).unwrap();
        let d = ParamBounds::<f64>::default_for(2);
        assert_eq!(pb.lower[6], -0.05);
        assert_eq!(pb.upper[7], 0.05);
        assert_eq!(pb.lower[0], d.lower[0]);
        assert_eq!(pb.upper[8], d.upper[8]);
        let bad = BoundsFile::from_toml("schema_version = 1\nviscous_damping = [5.0, 1.0]\n", "b.toml").unwrap();
        assert!(bad.bounds::<f64>(2).is_err());
    }

    #[test]
    fn fit_defaults() {
        let f = FitFile::from_toml("schema_version = 1\nmax_iterations = 10\n", "f.toml").unwrap();
        let c = f.fit_config::<f64>(9).unwrap();
        assert_eq!((c.population_size, c.max_iterations, c.seed), (32, 10, 9));
        assert!(FitFile::from_toml("schema_version = 1\npopulation_size = 2\n", "f.toml")
            .unwrap()
            .fit_config::<f64>(0)
            .is_err());
    }

    #[test]
    fn chirp_scalar_broadcast() {
        let text = "schema_version = 1\n[chirp]\nf_start = 0.1\nf_end = 10.0\nduration = 20.0\nsample_rate = 400.0\namplitude = 0.2\n";
        let f = ExcitationFile::from_toml(text, "e.toml").unwrap();
        let (spec, offsets) = f.chirp_spec::<f64>(3).unwrap();
        assert_eq!(spec.amplitude, vec![0.2; 3]);
        assert_eq!(spec.center, vec![0.0; 3]);
        assert!(offsets.is_empty());
        assert!(f.step_spec::<f64>(0).is_err());
        let per = text.replace("amplitude = 0.2", "amplitude = [0.1, 0.2]");
        let f = ExcitationFile::from_toml(&per, "e.toml").unwrap();
        assert!(f.chirp_spec::<f64>(3).is_err());
    }

    #[test]
    fn trial_default_gravity() {
        let text = "schema_version = 1\nbattery_capacity = 100.0\nsoc_start = 0.9\nsoc_end = 0.5\nduration = 600.0\nmass = 50.0\n";
        let t = TrialFile::from_toml(text, "t.toml").unwrap().trial::<f64>().unwrap();
        assert_eq!(t.gravity, STANDARD_GRAVITY);
        assert_eq!(t.distance, None);
    }

    #[test]
    fn reward_presets_load() {
        let w = RewardFile::from_toml("schema_version = 1\n", "r.toml").unwrap().weights::<f64>().unwrap();
        assert_eq!(w, RewardWeights::tytan());
        let w = RewardFile::from_toml("schema_version = 1\npreset = \"anymal\"\nsigma_v = 0.5\n", "r.toml")
            .unwrap()
            .weights::<f64>()
            .unwrap();
        assert_eq!(w.c_e, RewardWeights::<f64>::anymal().c_e);
        assert_eq!(w.sigma_v, 0.5);
    }

    #[test]
    fn reduce_components() {
        let text = "schema_version = 1\n[[component]]\ninertia = 1e-5\nratio = 10.0\n[[component]]\ninertia = 2e-6\nratio = 50.0\n";
        let r = ReduceFile::from_toml(text, "r.toml").unwrap();
        assert_eq!(r.components::<f64>(), vec![(1e-5, 10.0), (2e-6, 50.0)]);
    }

    #[test]
    fn leg_branch_parses() {
        let text = "schema_version = 1\nbase_mass = 50.0\nlink_length = 0.3\nhip_inertia = 0.07\nknee_inertia = 0.07\nangles = [0.5]\nbranch = \"minus\"\n";
        let l = LegFile::from_toml(text, "l.toml").unwrap();
        assert_eq!(Branch::from(l.branch), Branch::Minus);
        assert!(l.leg::<f64>().is_ok());
    }
}
