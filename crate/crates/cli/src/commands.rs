//! The subcommands. Each writes its tables into the output directory and
//! returns the process exit code.

use std::f64::consts::TAU;

use levirotor::analysis::periodogram;
use levirotor::circuit::{adiabatic_contraction_rate, damping_rate_vs_frequency, friction_diffusion_tensors, PickupConfig};
use levirotor::dynamics::{effective_energy, run_trajectory, total_energy, Dynamics, System, SystemState};
use levirotor::linear::{simulate_linear, LinearModel, LinearSimulator, Mode, BETA, Q, Z};
use levirotor::rotor::{conjugate_from_angular_momentum, Orientation};
use levirotor::trap::{
    critical_field, effective_potential, find_minima, linear_trap_stability, mathieu_parameters,
    momentum_micromotion_correction, Alignment, MinimizerOptions,
};
use nalgebra::{Vector3, Vector6};
use rayon::prelude::*;

use crate::config::{Axis, ScenarioConfig, Stage, TrapKind};
use crate::error::{model_exit_code, CliError};
use crate::output::{num, Manifest, OutDir};

/// Everything a subcommand needs.
pub struct Context {
    pub cfg: ScenarioConfig,
    pub manifest: Manifest,
    pub out: OutDir,
    pub pool: rayon::ThreadPool,
}

const TRAJECTORY_COLUMNS: [&str; 17] = [
    "t", "x", "y", "z", "px", "py", "pz", "alpha", "beta", "gamma", "jx", "jy", "jz", "Q", "Phi", "energy", "p_beta",
];

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        n => (0..n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn member_file(stem: &str, k: usize, members: usize) -> String {
    if members == 1 {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{k:03}.csv")
    }
}

fn trajectory_row(s: &SystemState, energy: f64) -> Vec<f64> {
    let [a, b, c] = s.orientation.euler();
    let p_beta = conjugate_from_angular_momentum(&s.orientation, &s.j).p_beta;
    vec![
        s.t, s.r.x, s.r.y, s.r.z, s.p.x, s.p.y, s.p.z, a, b, c, s.j.x, s.j.y, s.j.z, s.circuit.q, s.circuit.phi, energy,
        p_beta,
    ]
}

/// Snapshots of one run through all stages, tagged with the stage index.
struct Run {
    rows: Vec<(usize, SystemState)>,
    failure: Option<levirotor::Error>,
}

#[allow(clippy::too_many_arguments)]
fn run_stages(
    cfg: &ScenarioConfig,
    systems: &[System],
    stages: &[Stage],
    init: &SystemState,
    dynamics: Dynamics,
    steps_per_cycle: usize,
    stride: usize,
    seed: u64,
) -> Result<Run, CliError> {
    let mut rows = vec![(0, *init)];
    let mut state = *init;
    for (i, (stage, sys)) in stages.iter().zip(systems).enumerate() {
        let duration = stage.end - stage.start;
        if duration <= 0.0 {
            continue;
        }
        let ic = cfg.integrator(steps_per_cycle, seed ^ ((i as u64) << 32));
        let tr = run_trajectory(sys, &state, dynamics, &ic, duration, stride)?;
        rows.extend(tr.snapshots[1..].iter().map(|s| (i, *s)));
        state = *tr.snapshots.last().expect("initial snapshot");
        if tr.failure.is_some() {
            return Ok(Run { rows, failure: tr.failure });
        }
    }
    Ok(Run { rows, failure: None })
}

pub fn simulate(ctx: &mut Context) -> Result<u8, CliError> {
    let cfg = &ctx.cfg;
    let stages = cfg.stages();
    let systems = stages.iter().map(|s| cfg.system(s)).collect::<Result<Vec<_>, _>>()?;
    let (macro_state, exact_state) = cfg.initial_states()?;
    let dynamics = cfg.dynamics();
    let start = if dynamics == Dynamics::Effective { macro_state } else { exact_state };
    let it = &cfg.integrator;
    let steps = if dynamics == Dynamics::Effective { it.effective_steps_per_cycle } else { it.steps_per_cycle };
    let members = cfg.run.members;
    let header_only = cfg.run.duration.si == 0.0;

    let runs: Vec<Run> = if header_only {
        (0..members).map(|_| Run { rows: Vec::new(), failure: None }).collect()
    } else {
        ctx.pool.install(|| {
            (0..members)
                .into_par_iter()
                .map(|k| run_stages(cfg, &systems, &stages, &start, dynamics, steps, it.stride, cfg.run.seed ^ k as u64))
                .collect::<Result<Vec<_>, _>>()
        })?
    };

    let mut code = 0;
    for (k, run) in runs.iter().enumerate() {
        let mut m = ctx.manifest.with("dynamics", format!("{:?}", dynamics).to_lowercase()).with("member", k);
        if let Some(f) = &run.failure {
            m = m.with("failure", f);
            code = code.max(model_exit_code(f));
        }
        let mut table = ctx.out.table(&member_file("trajectory", k, members), &m, &TRAJECTORY_COLUMNS)?;
        for (i, s) in &run.rows {
            let e = if dynamics == Dynamics::Effective { effective_energy(&systems[*i], s) } else { total_energy(&systems[*i], s) };
            table.row(&trajectory_row(s, e))?;
        }
        table.finish()?;
    }

    if it.compare_effective {
        let eff_stride = (it.stride * it.effective_steps_per_cycle / it.steps_per_cycle).max(1);
        let run = if header_only {
            Run { rows: Vec::new(), failure: None }
        } else {
            let eff_steps = it.effective_steps_per_cycle;
            run_stages(cfg, &systems, &stages, &macro_state, Dynamics::Effective, eff_steps, eff_stride, cfg.run.seed)?
        };
        let mut m = ctx.manifest.with("dynamics", "effective");
        if let Some(f) = &run.failure {
            m = m.with("failure", f);
            code = code.max(model_exit_code(f));
        }
        let mut columns = TRAJECTORY_COLUMNS.to_vec();
        columns.push("p_beta_micro");
        let mut table = ctx.out.table("effective.csv", &m, &columns)?;
        let trap = cfg.trap()?;
        for (i, s) in &run.rows {
            let sys = &systems[*i];
            let mut row = trajectory_row(s, effective_energy(sys, s));
            let (_, dj) = momentum_micromotion_correction(&trap, &sys.particle.dist, &s.r, &s.orientation, s.t);
            row.push(conjugate_from_angular_momentum(&s.orientation, &(s.j - dj)).p_beta);
            table.row(&row)?;
        }
        table.finish()?;
    }
    Ok(code)
}

fn linear_pickup(cfg: &ScenarioConfig) -> Result<(f64, f64, PickupConfig), CliError> {
    match (&cfg.pickup, cfg.pickup()?) {
        (Some(p), Some(pc)) if p.k.is_some() => Ok((p.k.expect("checked").si, p.z0.si, pc)),
        _ => Err(config_error("rates need a linear [pickup] with k and z0")),
    }
}

pub fn rates(ctx: &mut Context) -> Result<u8, CliError> {
    let cfg = &ctx.cfg;
    let sweep = cfg.rates.as_ref().ok_or_else(|| config_error("rates need a [rates] section"))?;
    let c = cfg.circuit.as_ref().ok_or_else(|| config_error("rates need a [circuit] section"))?;
    let spec = crate::config::circuit_spec(c)?;
    let (k1, z0, pickup) = linear_pickup(cfg)?;
    let particle = cfg.particle()?;
    let (q, m) = (particle.charge(), particle.mass);
    let (r, o) = cfg.initial_pose()?;
    let gamma_ps = adiabatic_contraction_rate(&pickup, &particle, &r, &o, spec.resistance);
    let at_zero = damping_rate_vs_frequency(&spec, k1, z0, q, m, 0.0);

    let manifest = ctx
        .manifest
        .with("omega_lc", num(spec.omega_lc()))
        .with("gamma_ps", num(gamma_ps))
        .with("gamma_at_zero", num(at_zero));
    let mut table = ctx.out.table("rates.csv", &manifest, &["f", "omega", "gamma"])?;
    let mut best = (0.0, f64::MIN);
    for f in grid(sweep.f_min.si, sweep.f_max.si, sweep.points) {
        let w = TAU * f;
        let g = damping_rate_vs_frequency(&spec, k1, z0, q, m, w);
        if g > best.1 {
            best = (w, g);
        }
        table.row(&[f, w, g])?;
    }
    table.finish()?;

    let fd = friction_diffusion_tensors(&spec, &pickup, &particle, &r, &o, best.0);
    let manifest = ctx.manifest.with("omega", num(best.0));
    let mut table = ctx.out.table("tensors.csv", &manifest, &["i", "j", "gamma_cm", "gamma_rot", "d_cm", "d_rot"])?;
    for i in 0..3 {
        for j in 0..3 {
            table.row(&[i as f64, j as f64, fd.gamma_cm[(i, j)], fd.gamma_rot[(i, j)], fd.d_cm[(i, j)], fd.d_rot[(i, j)]])?;
        }
    }
    table.finish()?;
    Ok(0)
}

fn alignment_code(a: Alignment) -> f64 {
    match a {
        Alignment::ParallelZ => 0.0,
        Alignment::PerpendicularZ => 1.0,
        Alignment::RingDegenerate => 2.0,
        Alignment::Tilted => 3.0,
    }
}

pub fn pseudopotential(ctx: &mut Context) -> Result<u8, CliError> {
    let cfg = &ctx.cfg;
    let trap = cfg.trap()?;
    let particle = cfg.particle()?;
    let (r0, o0) = cfg.initial_pose()?;
    let mut starts = vec![(r0, o0)];
    for alpha in [0.0, TAU / 4.0] {
        for beta in [0.3, TAU / 4.0, TAU / 2.0 - 0.3] {
            starts.push((r0, Orientation::from_euler(alpha, beta, 0.0)));
        }
    }
    let minima = find_minima(&trap, &particle, &starts, &MinimizerOptions::default())?;

    let ell_cm = cfg.grid.as_ref().map(|g| g.half_width.si).unwrap_or(1e-3 * trap.ell0());
    let mp = mathieu_parameters(&trap, &particle, ell_cm)?;
    let mut manifest = ctx
        .manifest
        .with("mathieu", mp.values().map(num).join(" "))
        .with("mathieu_warnings", mp.warnings().join(" "));
    if trap.endcap().is_some() && cfg.trap.kind == TrapKind::Linear {
        let st = linear_trap_stability(&trap, particle.charge(), particle.mass)?;
        manifest = manifest.with("kappa", num(st.kappa)).with("stable", st.stable);
    }
    if cfg.trap.kind == TrapKind::Ring {
        if let Ok(spec) = cfg.symmetric_spec() {
            if let Ok(e) = critical_field(&trap, &spec, particle.mass) {
                manifest = manifest.with("critical_field", num(e));
            }
        }
    }

    let columns = ["x", "y", "z", "alpha", "beta", "gamma", "energy", "gradient_norm", "alignment"];
    let mut table = ctx.out.table("minima.csv", &manifest, &columns)?;
    for m in &minima {
        let [a, b, c] = m.orientation.euler();
        table.row(&[m.r.x, m.r.y, m.r.z, a, b, c, m.energy, m.gradient_norm, alignment_code(m.alignment)])?;
    }
    table.finish()?;

    if let Some(g) = &cfg.grid {
        let axis = match g.axis {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        };
        let (rm, om) = (minima[0].r, minima[0].orientation);
        let mut table = ctx.out.table("veff.csv", &ctx.manifest, &["offset", "x", "y", "z", "v_eff"])?;
        for s in grid(-g.half_width.si, g.half_width.si, g.points) {
            let r = rm + axis * s;
            table.row(&[s, r.x, r.y, r.z, effective_potential(&trap, &particle, &r, &om)])?;
        }
        table.finish()?;
    }
    Ok(0)
}

fn stage_models(cfg: &ScenarioConfig, stages: &[Stage]) -> Result<Vec<LinearModel>, CliError> {
    stages.iter().map(|s| cfg.linear_model(s)).collect()
}

fn temperatures(manifest: Manifest, stages: &[Stage], models: &[LinearModel]) -> Result<Manifest, CliError> {
    let mut m = manifest;
    for (s, model) in stages.iter().zip(models) {
        let tz = model.effective_temperature(Mode::Z)?;
        let tb = model.effective_temperature(Mode::Beta)?;
        m = m.with(&format!("stage {}", s.name), format!("T_z {} K, T_beta {} K", num(tz), num(tb)));
    }
    Ok(m)
}

pub fn psd(ctx: &mut Context) -> Result<u8, CliError> {
    let cfg = &ctx.cfg;
    let p = cfg.psd.as_ref().ok_or_else(|| config_error("psd needs a [psd] section"))?;
    let settings = cfg.all_settings();
    let models = stage_models(cfg, &settings)?;
    let manifest = temperatures(ctx.manifest.clone(), &settings, &models)?;
    let mut columns = vec!["f".to_string()];
    for s in &settings {
        for v in ["S_z", "S_beta", "S_Q"] {
            columns.push(format!("{v}:{}", s.name));
        }
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = ctx.out.table("psd.csv", &manifest, &cols)?;
    for f in grid(p.f_min.si, p.f_max.si, p.points) {
        let mut row = vec![f];
        for model in &models {
            let s = model.psd_matrix(TAU * f)?;
            row.extend([s[(Z, Z)].re, s[(BETA, BETA)].re, s[(Q, Q)].re]);
        }
        table.row(&row)?;
    }
    table.finish()?;

    if p.periodogram {
        let stage = &cfg.stages()[0];
        let model = cfg.linear_model(stage)?;
        let dt = cfg.integrator.linear_dt.si;
        let burn = p.segment_length;
        let total = p.segments * p.segment_length + burn;
        let tr = simulate_linear(&model, Vector6::zeros(), total as f64 * dt, dt, 1, cfg.linear_scheme(), cfg.run.seed)?;
        let series = |i: usize| -> Vec<f64> { tr.states[burn + 1..=total].iter().map(|s| s[i]).collect() };
        let gz = periodogram(&series(Z), dt, p.segments)?;
        let gb = periodogram(&series(BETA), dt, p.segments)?;
        let m = ctx.manifest.with("stage", &stage.name).with("segments", p.segments).with("linear_dt", num(dt));
        let mut table = ctx.out.table("periodogram.csv", &m, &["f", "G_z", "G_beta", "2S_z", "2S_beta"])?;
        for (k, w) in gz.omega.iter().enumerate() {
            let s = model.psd_matrix(*w)?;
            table.row(&[w / TAU, gz.psd[k], gb.psd[k], 2.0 * s[(Z, Z)].re, 2.0 * s[(BETA, BETA)].re])?;
        }
        table.finish()?;
    }
    Ok(0)
}

/// Window-averaged energies of one linear-model run through all stages.
fn cool_member(
    cfg: &ScenarioConfig,
    stages: &[Stage],
    models: &[LinearModel],
    x0: Vector6<f64>,
    window_steps: u64,
    seed: u64,
) -> Result<Vec<[f64; 9]>, CliError> {
    let dt = cfg.integrator.linear_dt.si;
    let mut sim = LinearSimulator::new(x0, dt, cfg.linear_scheme(), seed)?;
    let mut rows = Vec::new();
    for (stage, model) in stages.iter().zip(models) {
        let mut left = ((stage.end - stage.start) / dt).round() as u64;
        while left > 0 {
            let n = window_steps.min(left);
            let tr = sim.run(model, n as f64 * dt, 1)?;
            let (mut ez, mut eb) = (0.0, 0.0);
            for s in &tr.states[1..] {
                let (a, b) = model.kinetic_energies(s);
                ez += a;
                eb += b;
            }
            let x = sim.state();
            let len = (tr.states.len() - 1) as f64;
            rows.push([sim.time(), x[0], x[1], x[2], x[3], x[4], x[5], ez / len, eb / len]);
            left -= n;
        }
    }
    Ok(rows)
}

pub fn cool(ctx: &mut Context) -> Result<u8, CliError> {
    let cfg = &ctx.cfg;
    let stages = cfg.stages();
    let models = stage_models(cfg, &stages)?;
    let dt = cfg.integrator.linear_dt.si;
    let window = cfg.cool.as_ref().map(|c| c.window.si).unwrap_or(0.1);
    let window_steps = ((window / dt).round() as u64).max(1);
    let x0 = cfg.linear_initial(&models[0]);
    let members = cfg.run.members;
    let runs: Vec<Vec<[f64; 9]>> = ctx.pool.install(|| {
        (0..members)
            .into_par_iter()
            .map(|k| cool_member(cfg, &stages, &models, x0, window_steps, cfg.run.seed ^ k as u64))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let manifest = temperatures(ctx.manifest.clone(), &stages, &models)?.with("window", num(window_steps as f64 * dt));
    let columns = ["t", "z", "beta", "Q", "p", "p_beta", "Phi", "E_z", "E_beta"];
    for (k, rows) in runs.iter().enumerate() {
        let mut table = ctx.out.table(&member_file("cool", k, members), &manifest.with("member", k), &columns)?;
        for r in rows {
            table.row(r)?;
        }
        table.finish()?;
    }
    if members > 1 {
        let mut table = ctx.out.table("cool_mean.csv", &manifest, &["t", "E_z", "E_beta"])?;
        for i in 0..runs[0].len() {
            let ez = runs.iter().map(|r| r[i][7]).sum::<f64>() / members as f64;
            let eb = runs.iter().map(|r| r[i][8]).sum::<f64>() / members as f64;
            table.row(&[runs[0][i][0], ez, eb])?;
        }
        table.finish()?;
    }
    Ok(0)
}
