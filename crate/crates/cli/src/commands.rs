use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use drivefit::analysis::{
    effective_inertia_horizontal, effective_inertia_vertical, empirical_frf, h_q_bode, horizontal_stance,
    log_grid, pendulum_inertia, reduced_inertia_sum, FrequencyResponse,
};
use drivefit::config::{
    BoundsFile, ExcitationFile, FitFile, LegFile, ModelConfig, PendulumFile, ReduceFile, TrialFile,
};
use drivefit::dynamics::{rollout, RobotModel};
use drivefit::energy::{cot_decompose, power_series};
use drivefit::excitation::{chirp, random_steps};
use drivefit::identify::{
    cma_es_fit, delta_phase_metrics, delta_phase_series, initial_states, loss, ParamBounds, StopReason,
};
use drivefit::trajectory::Trajectory;

use crate::output::{manifest_sidecar, sibling, to_json, OutputSet, RunManifest};
use crate::{Cli, CliError, Command, ExciteKind, InertiaKind};

type Res<T = ()> = Result<T, CliError>;

pub fn run(cli: &Cli) -> Res {
    match &cli.command {
        Command::GenExcite(a) => gen_excite(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Bode(a) => bode(cli, a),
        Command::EnergyReport(a) => energy_report(cli, a),
        Command::Cot(a) => cot(cli, a),
        Command::Inertia(a) => inertia(cli, &a.kind),
    }
}

fn required_out(cli: &Cli) -> Res<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| CliError::Input("--out is required for this command".into()))
}

fn read_trajectory(path: &Path) -> Res<Trajectory<f64>> {
    Trajectory::read_csv_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn csv_bytes(traj: &Trajectory<f64>) -> Res<Vec<u8>> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    Ok(buf)
}

/// Write a CSV and its manifest sidecar.
fn emit_csv(out: &Path, csv: Vec<u8>, manifest: &RunManifest) -> Res {
    let mut set = OutputSet::default();
    set.add(out, &csv)?;
    set.add(&manifest_sidecar(out), &to_json(manifest, json!({}))?)?;
    set.commit()
}

/// Write JSON to `--out`, or print it.
fn emit_json<B: Serialize>(cli: &Cli, manifest: &RunManifest, body: B) -> Res {
    let bytes = to_json(manifest, body)?;
    match &cli.out {
        Some(out) => {
            let mut set = OutputSet::default();
            set.add(out, &bytes)?;
            set.commit()
        }
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn check_joints(model: &RobotModel<f64>, traj: &Trajectory<f64>, path: &Path) -> Res {
    if model.n_joints() != traj.n_joints() {
        return Err(CliError::Input(format!(
            "{}: {} joints, model has {}",
            path.display(),
            traj.n_joints(),
            model.n_joints()
        )));
    }
    Ok(())
}

fn gen_excite(cli: &Cli, a: &crate::GenExciteArgs) -> Res {
    let out = required_out(cli)?;
    let manifest = RunManifest::new("gen-excite", &[&a.spec, &a.model], &[], Some(out), cli.seed)?;
    let spec = ExcitationFile::load(&a.spec)?;
    let n = ModelConfig::<f64>::load(&a.model)?.model.n_joints();
    let traj = match a.kind {
        ExciteKind::Chirp => {
            let (c, offsets) = spec.chirp_spec::<f64>(n)?;
            chirp(&c, n, &offsets)?
        }
        ExciteKind::Steps => random_steps(&spec.step_spec::<f64>(cli.seed)?, n)?,
    };
    emit_csv(out, csv_bytes(&traj)?, &manifest)
}

fn simulate(cli: &Cli, a: &crate::SimulateArgs) -> Res {
    let out = required_out(cli)?;
    let manifest = RunManifest::new("simulate", &[&a.model], &[&a.targets], Some(out), cli.seed)?;
    let cfg = ModelConfig::<f64>::load(&a.model)?;
    let targets = read_trajectory(&a.targets)?;
    check_joints(&cfg.model, &targets, &a.targets)?;
    let mut sim = rollout(&cfg.model, &targets, &cfg.sim, &initial_states(&targets)?)?;
    if a.position_noise > 0.0 {
        sim = sim.with_position_noise(a.position_noise, cli.seed)?;
    } else if a.position_noise < 0.0 {
        return Err(CliError::Input("--position-noise must be >= 0".into()));
    }
    if sim.positions.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("rollout produced non-finite positions".into()));
    }
    emit_csv(out, csv_bytes(&sim)?, &manifest)
}

#[derive(Serialize)]
struct JointFit<'a> {
    name: &'a str,
    armature_inertia: f64,
    viscous_damping: f64,
    coulomb_friction: f64,
    joint_bias: f64,
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::MaxIterations => "max_iterations",
        StopReason::TargetLoss => "target_loss",
        StopReason::Stagnation => "stagnation",
    }
}

fn fit(cli: &Cli, a: &crate::FitArgs) -> Res {
    let out = required_out(cli)?;
    let mut configs: Vec<&Path> = vec![&a.model];
    configs.extend(a.bounds.as_deref());
    configs.extend(a.fit.as_deref());
    let inputs: Vec<&Path> = a.data.iter().map(PathBuf::as_path).collect();
    let manifest = RunManifest::new("fit", &configs, &inputs, Some(out), cli.seed)?;

    let base = ModelConfig::<f64>::load(&a.model)?;
    let n = base.model.n_joints();
    let bounds = match &a.bounds {
        Some(p) => BoundsFile::load(p)?.bounds::<f64>(n)?,
        None => ParamBounds::default_for(n),
    };
    let fit_cfg = match &a.fit {
        Some(p) => FitFile::load(p)?.fit_config::<f64>(cli.seed)?,
        None => drivefit::identify::FitConfig {
            seed: cli.seed,
            ..Default::default()
        },
    };
    let data = a
        .data
        .iter()
        .map(|p| {
            let t = read_trajectory(p)?;
            check_joints(&base.model, &t, p)?;
            Ok(t)
        })
        .collect::<Res<Vec<_>>>()?;

    let res = cma_es_fit(&base.model, &data, &bounds, &fit_cfg, &base.sim)?;
    let fitted = res.best_params.unpack(&base.model)?;

    let trace_path = sibling(out, "trace.csv");
    let model_path = sibling(out, "model.toml");
    let mut trace = String::from("iteration,best_loss\n");
    for (i, v) in res.score_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{v}\n"));
    }
    let fitted_cfg = ModelConfig {
        model: fitted.clone(),
        ..base.clone()
    };
    let joints: Vec<JointFit> = fitted
        .joints
        .iter()
        .zip(&base.names)
        .map(|(j, name)| JointFit {
            name,
            armature_inertia: j.armature_inertia,
            viscous_damping: j.viscous_damping,
            coulomb_friction: j.coulomb_friction,
            joint_bias: j.joint_bias,
        })
        .collect();
    let body = json!({
        "joints": joints,
        "command_delay": fitted.command_delay,
        "best_loss": res.best_loss,
        "iterations": res.score_trace.len(),
        "evaluations": res.evaluations,
        "failed_evaluations": res.failed_evaluations,
        "converged": res.converged,
        "stop": stop_name(res.stop),
        "trace_csv": trace_path.display().to_string(),
        "model_toml": model_path.display().to_string(),
    });
    let mut set = OutputSet::default();
    set.add(out, &to_json(&manifest, body)?)?;
    set.add(&trace_path, trace.as_bytes())?;
    set.add(&model_path, fitted_cfg.to_toml()?.as_bytes())?;
    set.commit()
}

fn evaluate(cli: &Cli, a: &crate::EvaluateArgs) -> Res {
    let out = required_out(cli)?;
    let manifest = RunManifest::new("evaluate", &[&a.model], &[&a.data], Some(out), cli.seed)?;
    let cfg = ModelConfig::<f64>::load(&a.model)?;
    let data = read_trajectory(&a.data)?;
    check_joints(&cfg.model, &data, &a.data)?;
    let sim = rollout(&cfg.model, &data, &cfg.sim, &initial_states(&data)?)?;
    let value = loss(&data, &sim)?;
    if !value.is_finite() {
        return Err(CliError::Numerical("loss is not finite".into()));
    }
    let metrics = delta_phase_metrics(&data, &sim)?;
    let n = cfg.model.n_joints();
    let series = (0..n)
        .map(|j| delta_phase_series(&data, &sim, j))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("t");
    for j in 0..n {
        csv.push_str(&format!(",dq{j},dqd{j}"));
    }
    csv.push('\n');
    for k in 0..data.len() {
        csv.push_str(&data.time[k].to_string());
        for s in &series {
            csv.push_str(&format!(",{},{}", s[k].0, s[k].1));
        }
        csv.push('\n');
    }
    let delta_path = sibling(out, "delta.csv");
    let joints: Vec<_> = (0..n)
        .map(|j| {
            json!({
                "name": cfg.names[j],
                "rms_dq": metrics.rms_dq[j],
                "rms_dqd": metrics.rms_dqd[j],
                "mean_dq": metrics.mean_dq[j],
            })
        })
        .collect();
    let body = json!({
        "loss": value,
        "joints": joints,
        "delta_csv": delta_path.display().to_string(),
    });
    let mut set = OutputSet::default();
    set.add(out, &to_json(&manifest, body)?)?;
    set.add(&delta_path, csv.as_bytes())?;
    set.commit()
}

fn bode(cli: &Cli, a: &crate::BodeArgs) -> Res {
    let out = required_out(cli)?;
    let mut configs: Vec<&Path> = vec![&a.model];
    configs.extend(a.excitation.as_deref());
    let inputs: Vec<&Path> = a.data.as_deref().into_iter().collect();
    let manifest = RunManifest::new("bode", &configs, &inputs, Some(out), cli.seed)?;
    let cfg = ModelConfig::<f64>::load(&a.model)?;
    let n = cfg.model.n_joints();
    if a.joint >= n {
        return Err(CliError::Input(format!("--joint {} out of range for {n} joints", a.joint)));
    }
    let grid = log_grid(a.f_start, a.f_end, a.points)?;
    let resp: FrequencyResponse<f64> = match (&a.data, &a.excitation) {
        (Some(data), Some(exc)) => {
            let traj = read_trajectory(data)?;
            check_joints(&cfg.model, &traj, data)?;
            let (spec, _) = ExcitationFile::load(exc)?.chirp_spec::<f64>(n)?;
            empirical_frf(&traj, &traj, a.joint, &spec, &grid)?
        }
        _ => h_q_bode(&cfg.model.joints[a.joint], &cfg.model.gains[a.joint], cfg.model.command_delay, &grid)?,
    };
    let mut csv = String::from("f_hz,mag_db,phase_deg\n");
    for k in 0..resp.frequencies.len() {
        csv.push_str(&format!("{},{},{}\n", resp.frequencies[k], resp.magnitude[k], resp.phase[k]));
    }
    emit_csv(out, csv.into_bytes(), &manifest)
}

fn energy_report(cli: &Cli, a: &crate::EnergyReportArgs) -> Res {
    let out = required_out(cli)?;
    let manifest = RunManifest::new("energy-report", &[&a.model], &[&a.data], Some(out), cli.seed)?;
    let cfg = ModelConfig::<f64>::load(&a.model)?;
    let motors = cfg
        .model
        .motors
        .as_ref()
        .ok_or_else(|| CliError::Input(format!("{}: a [motors] table is required", a.model.display())))?;
    let k_regen = motors[0].regen_coefficient;
    if motors.iter().any(|m| m.regen_coefficient != k_regen) {
        return Err(CliError::Input("regen_coefficient must be equal across motors".into()));
    }
    let data = read_trajectory(&a.data)?;
    check_joints(&cfg.model, &data, &a.data)?;
    let series = power_series(&data, motors, k_regen)?;
    let mut csv = String::from("t,p_electrical,p_mechanical,p_potential,p_total\n");
    for (t, p) in data.time.iter().zip(&series) {
        csv.push_str(&format!(
            "{t},{},{},{},{}\n",
            p.p_electrical, p.p_mechanical, p.p_potential, p.p_total
        ));
    }
    emit_csv(out, csv.into_bytes(), &manifest)
}

fn cot(cli: &Cli, a: &crate::CotArgs) -> Res {
    let manifest = RunManifest::new("cot", &[&a.track, &a.rest, &a.off], &[], cli.out.as_deref(), cli.seed)?;
    let track = TrialFile::load(&a.track)?.trial::<f64>()?;
    let rest = TrialFile::load(&a.rest)?.trial::<f64>()?;
    let off = TrialFile::load(&a.off)?.trial::<f64>()?;
    let c = cot_decompose(&track, &rest, &off)?;
    emit_json(
        cli,
        &manifest,
        json!({
            "cot": c.cot,
            "coe": c.coe,
            "cod": c.cod,
            "col": c.col,
            "p_track": c.p_track,
            "p_rest": c.p_rest,
            "p_off": c.p_off,
        }),
    )
}

fn inertia(cli: &Cli, kind: &InertiaKind) -> Res {
    let (name, config) = match kind {
        InertiaKind::Pendulum { config } => ("inertia pendulum", config),
        InertiaKind::Vertical { config } => ("inertia vertical", config),
        InertiaKind::Horizontal { config } => ("inertia horizontal", config),
        InertiaKind::Reduce { config } => ("inertia reduce", config),
    };
    let manifest = RunManifest::new(name, &[config], &[], cli.out.as_deref(), cli.seed)?;
    let body = match kind {
        InertiaKind::Pendulum { config } => {
            let r = pendulum_inertia(&PendulumFile::load(config)?.measurement::<f64>())?;
            json!({ "pivot": r.pivot, "com": r.com, "sigma_com": r.sigma_com })
        }
        InertiaKind::Vertical { config } => {
            let f = LegFile::load(config)?;
            let leg = f.leg::<f64>()?;
            let rows = f
                .angles
                .iter()
                .map(|&q| Ok(json!({ "knee_angle": q, "inertia": effective_inertia_vertical(&leg, q)? })))
                .collect::<Res<Vec<_>>>()?;
            json!({ "points": rows })
        }
        InertiaKind::Horizontal { config } => {
            let f = LegFile::load(config)?;
            let leg = f.leg::<f64>()?;
            let rows = f
                .angles
                .iter()
                .map(|&q| {
                    let s = horizontal_stance(&leg, q, f.branch.into())?;
                    let i = effective_inertia_horizontal(&leg, q, f.branch.into())?;
                    Ok(json!({
                        "hip_angle": q,
                        "knee_angle": s.knee_angle,
                        "x": s.x,
                        "z": s.z,
                        "inertia": i,
                    }))
                })
                .collect::<Res<Vec<_>>>()?;
            json!({ "points": rows })
        }
        InertiaKind::Reduce { config } => {
            let f = ReduceFile::load(config)?;
            json!({ "inertia": reduced_inertia_sum(&f.components::<f64>())? })
        }
    };
    emit_json(cli, &manifest, body)
}
