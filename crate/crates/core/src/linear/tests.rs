use super::*;
use crate::circuit::damping_rate_vs_frequency;
use crate::presets::{fig5_mass, fig5_particle, fig5_trap, fig5_z0, Fig5Stage, FIG5_K};
use crate::rotor::Orientation;
use crate::trap::effective_potential;
use approx::assert_relative_eq;
use nalgebra::Vector3;
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, TAU};

fn fig5(stage: Fig5Stage) -> LinearModel {
    build_model(&fig5_trap(), FIG5_K, fig5_z0(), &fig5_particle(), fig5_mass(), &stage.circuit(), &stage.gas()).unwrap()
}

fn with(stage: Fig5Stage, f: impl FnOnce(&mut ModeParameters)) -> LinearModel {
    let mut p = *fig5(stage).params();
    f(&mut p);
    LinearModel::new(p).unwrap()
}

#[test]
fn resonance_frequencies() {
    let cm = fig5(Fig5Stage::CenterOfMass).params().omega_lc() / TAU;
    let rot = fig5(Fig5Stage::Rotation).params().omega_lc() / TAU;
    assert!((cm / 2117.4 - 1.0).abs() < 5e-4, "{cm}");
    assert!((rot / 4999.4 - 1.0).abs() < 5e-4, "{rot}");
}

#[test]
fn dipole_free_rod_decouples() {
    let mut spec = fig5_particle();
    spec.p3 = 0.0;
    let stage = Fig5Stage::CenterOfMass;
    let m = build_model(&fig5_trap(), FIG5_K, fig5_z0(), &spec, fig5_mass(), &stage.circuit(), &stage.gas()).unwrap();
    assert_eq!(m.params().g_bq, 0.0);
    assert_eq!(m.params().g_zb, 0.0);
    assert_eq!(m.b()[(BETA, P_BETA)], 1.0 / spec.i_perp);
}

#[test]
fn stiffness_matches_effective_potential() {
    let trap = fig5_trap();
    let spec = fig5_particle();
    let mass = fig5_mass();
    let particle = spec.particle(mass).unwrap();
    let circuit = Fig5Stage::CenterOfMass.circuit();
    let model = fig5(Fig5Stage::CenterOfMass);
    let pm = model.params();
    let y0 = -spec.p3 / spec.q;
    let v = |z: f64, b: f64| {
        effective_potential(&trap, &particle, &Vector3::new(0.0, y0, z), &Orientation::from_euler(FRAC_PI_2, FRAC_PI_2 + b, 0.0))
    };
    let (h, a) = (1e-8, 1e-5);
    let v_zz = (v(h, 0.0) - 2.0 * v(0.0, 0.0) + v(-h, 0.0)) / (h * h);
    let v_bb = (v(0.0, a) - 2.0 * v(0.0, 0.0) + v(0.0, -a)) / (a * a);
    let v_zb = (v(h, a) - v(h, -a) - v(-h, a) + v(-h, -a)) / (4.0 * h * a);
    // the circuit stiffness enters through (Q + Q_ind)^2 / 2C
    let kc = (FIG5_K / fig5_z0()).powi(2) / circuit.capacitance;
    assert_relative_eq!(mass * pm.omega_z.powi(2) - kc * spec.q * spec.q, v_zz, max_relative = 1e-5);
    assert_relative_eq!(spec.i_perp * pm.omega_beta.powi(2) - kc * spec.p3 * spec.p3, v_bb, max_relative = 1e-5);
    assert_relative_eq!(pm.g_zb + kc * spec.q * spec.p3, v_zb, max_relative = 1e-4);
}

#[test]
fn rejects_unsupported_setups() {
    let stage = Fig5Stage::CenterOfMass;
    let series = CircuitSpec::new(Topology::Series, 1.0, 1.0, 1.0, 0.0).unwrap();
    let args = (FIG5_K, fig5_z0(), fig5_particle(), fig5_mass());
    assert!(build_model(&fig5_trap(), args.0, args.1, &args.2, args.3, &series, &stage.gas()).is_err());
    let ring = TrapGeometry::ring(1e-3, 0.0, 100.0, 1e6).unwrap();
    assert!(build_model(&ring, args.0, args.1, &args.2, args.3, &stage.circuit(), &stage.gas()).is_err());
    // repulsive endcaps
    let trap = crate::presets::fig5_trap_with(-8.24).unwrap();
    assert!(build_model(&trap, args.0, args.1, &args.2, args.3, &stage.circuit(), &stage.gas()).is_err());
}

#[test]
fn unstable_model_is_rejected() {
    let m = with(Fig5Stage::Hot, |p| p.g_zb = 2.0 * p.mass.sqrt() * p.i1.sqrt() * p.omega_z * p.omega_beta);
    assert!(m.max_real_eigenvalue() > 0.0);
    assert!(matches!(m.psd_matrix(1.0), Err(Error::NotHurwitz { .. })));
    assert!(matches!(m.stationary_covariance(), Err(Error::NotHurwitz { .. })));
}

#[test]
fn noiseless_model_has_no_spectrum() {
    let m = with(Fig5Stage::Hot, |p| {
        p.t_gas = 0.0;
        p.t_circuit = 0.0;
    });
    assert_eq!(m.psd_matrix(1e4).unwrap(), Matrix6::zeros());
    assert_eq!(m.effective_temperature(Mode::Z).unwrap(), 0.0);
    assert_eq!(m.effective_temperature_psd(Mode::Beta).unwrap(), 0.0);
}

fn decoupled(stage: Fig5Stage) -> LinearModel {
    with(stage, |p| {
        p.g_zq = 0.0;
        p.g_bq = 0.0;
        p.g_zb = 0.0;
    })
}

#[test]
fn decoupled_oscillator_is_lorentzian() {
    let m = decoupled(Fig5Stage::Hot);
    let pm = *m.params();
    for w in [0.0, 0.3 * pm.omega_z, 0.999 * pm.omega_z, pm.omega_z, 1.7 * pm.omega_z, 40.0 * pm.omega_z] {
        let expect =
            2.0 * pm.d_z() / TAU / pm.mass.powi(2) / ((w * w - pm.omega_z.powi(2)).powi(2) + (pm.gamma_z * w).powi(2));
        assert_relative_eq!(m.psd(Z, w).unwrap(), expect, max_relative = 1e-10);
    }
}

#[test]
fn single_bath_equipartition() {
    let m = decoupled(Fig5Stage::Hot);
    let pm = *m.params();
    let s = m.stationary_covariance().unwrap();
    let kt = K_B * pm.t_gas;
    assert_relative_eq!(s[(P, P)], pm.mass * kt, max_relative = 1e-9);
    assert_relative_eq!(s[(Z, Z)], kt / (pm.mass * pm.omega_z.powi(2)), max_relative = 1e-9);
    assert_relative_eq!(s[(P_BETA, P_BETA)], pm.i1 * kt, max_relative = 1e-9);
    assert_relative_eq!(m.effective_temperature(Mode::Z).unwrap(), pm.t_gas, max_relative = 1e-9);

    // one temperature for both baths, couplings on
    let m = with(Fig5Stage::Hot, |p| p.t_circuit = p.t_gas);
    for mode in [Mode::Z, Mode::Beta] {
        assert_relative_eq!(m.effective_temperature(mode).unwrap(), 300.0, max_relative = 1e-8);
    }
    let s = m.stationary_covariance().unwrap();
    assert_relative_eq!(s[(Q, Q)] / (m.params().capacitance * K_B), 300.0, max_relative = 1e-6);
}

#[test]
fn psd_area_is_the_covariance() {
    for stage in [Fig5Stage::Hot, Fig5Stage::CenterOfMass, Fig5Stage::Rotation] {
        let m = fig5(stage);
        let s = m.stationary_covariance().unwrap();
        for i in 0..6 {
            let area = m.integrate_psd(i).unwrap();
            assert!((area / s[(i, i)] - 1.0).abs() < 1e-3, "{stage:?} {}: {area:e} vs {:e}", LABELS[i], s[(i, i)]);
        }
        for mode in [Mode::Z, Mode::Beta] {
            let (a, b) = (m.effective_temperature(mode).unwrap(), m.effective_temperature_psd(mode).unwrap());
            assert!((a / b - 1.0).abs() < 5e-3);
        }
    }
}

#[test]
fn resonant_circuit_cools_the_z_mode() {
    let m = fig5(Fig5Stage::CenterOfMass);
    let t = m.effective_temperature(Mode::Z).unwrap();
    assert!(t > 4.0 && t < 20.0, "{t}");
    let m = fig5(Fig5Stage::Rotation);
    let t = m.effective_temperature(Mode::Beta).unwrap();
    assert!(t > 4.0 && t < 20.0, "{t}");
}

#[test]
fn eigenvalue_damping_matches_circuit_rate() {
    // z alone on the center-of-mass circuit, no gas
    let m = with(Fig5Stage::CenterOfMass, |p| {
        p.g_bq = 0.0;
        p.g_zb = 0.0;
        p.gamma_z = 0.0;
    });
    let pm = *m.params();
    let spec = Fig5Stage::CenterOfMass.circuit();
    let q = fig5_particle().q;
    // bare mechanical frequency, without the circuit stiffness
    let w0 = (pm.omega_z.powi(2) - (FIG5_K * q / fig5_z0()).powi(2) / (pm.mass * pm.capacitance)).sqrt();
    let rate = damping_rate_vs_frequency(&spec, FIG5_K, fig5_z0(), q, pm.mass, w0);
    let mode = m.eigenvalues().iter().filter(|e| e.im > 0.0).min_by(|a, b| (a.im - w0).abs().total_cmp(&(b.im - w0).abs())).unwrap();
    let energy_rate = -2.0 * mode.re;
    assert!((energy_rate / rate - 1.0).abs() < 0.1, "{energy_rate} vs {rate}");
}

#[test]
fn noiseless_rest_stays_at_rest() {
    let m = with(Fig5Stage::Hot, |p| {
        p.t_gas = 0.0;
        p.t_circuit = 0.0;
    });
    for scheme in [LinearScheme::Exact, LinearScheme::EulerMaruyama] {
        let t = simulate_linear(&m, Vector6::zeros(), 0.01, 1e-5, 10, scheme, 3).unwrap();
        assert_eq!(t.states.len(), 101);
        assert!(t.states.iter().all(|s| *s == Vector6::zeros()));
    }
}

#[test]
fn euler_maruyama_converges_to_exact() {
    let m = with(Fig5Stage::Hot, |p| {
        p.t_gas = 0.0;
        p.t_circuit = 0.0;
    });
    let x0 = cooling_initial_state(&m, 300.0);
    let end = |scheme, dt| {
        let mut sim = LinearSimulator::new(x0, dt, scheme, 0).unwrap();
        sim.run(&m, 2e-3, 1).unwrap();
        *sim.state()
    };
    let exact = end(LinearScheme::Exact, 2e-3);
    let fine = end(LinearScheme::Exact, 1e-6);
    assert!((fine - exact).norm() < 1e-10 * (exact.norm()));
    let err = |dt| (end(LinearScheme::EulerMaruyama, dt)[P] - exact[P]).abs();
    let ratio = err(1e-7) / err(5e-8);
    assert!(ratio > 1.8 && ratio < 2.2, "{ratio}");
}

#[test]
fn long_run_covariance_matches_lyapunov() {
    let m = fig5(Fig5Stage::Hot);
    let sigma = m.stationary_covariance().unwrap();
    let x0 = Vector6::from_fn(|i, _| sigma[(i, i)].sqrt());
    let t = simulate_linear(&m, x0, 400.0, 2e-4, 1, LinearScheme::Exact, 17).unwrap();
    let burn = 2500;
    let samples = &t.states[burn..];
    let n = samples.len() as f64;
    let emp = samples.iter().fold(Matrix6::zeros(), |acc, s| acc + s * s.transpose()) / n;
    for i in 0..6 {
        for j in 0..6 {
            let scale = (sigma[(i, i)] * sigma[(j, j)]).sqrt();
            assert!((emp[(i, j)] - sigma[(i, j)]).abs() < 0.05 * scale, "{i}{j}: {:e} vs {:e}", emp[(i, j)], sigma[(i, j)]);
        }
    }
    let temp = temperature_from_samples(&m, samples, Mode::Z);
    assert!((temp / m.effective_temperature(Mode::Z).unwrap() - 1.0).abs() < 0.05);
}

#[test]
fn schedule_equals_chained_runs() {
    let a = fig5(Fig5Stage::CenterOfMass);
    let b = fig5(Fig5Stage::Rotation);
    let x0 = cooling_initial_state(&a, 300.0);
    let sched = simulate_schedule(&[(&a, 0.05), (&b, 0.03)], x0, 1e-5, 7, LinearScheme::Exact, 5).unwrap();
    let mut sim = LinearSimulator::new(x0, 1e-5, LinearScheme::Exact, 5).unwrap();
    let first = sim.run(&a, 0.05, 7).unwrap();
    let second = sim.run(&b, 0.03, 7).unwrap();
    let states: Vec<_> = first.states.iter().chain(&second.states[1..]).copied().collect();
    assert_eq!(sched.states, states);
    assert_eq!(sched.t.last(), second.t.last());
    let other = simulate_schedule(&[(&a, 0.05), (&b, 0.03)], x0, 1e-5, 7, LinearScheme::Exact, 6).unwrap();
    assert_ne!(other.states.last(), sched.states.last());
}

#[test]
fn initial_condition() {
    let m = fig5(Fig5Stage::Hot);
    let x = cooling_initial_state(&m, 300.0);
    let (ez, eb) = m.kinetic_energies(&x);
    assert_relative_eq!(ez, K_B * 300.0, max_relative = 1e-12);
    assert_relative_eq!(eb, K_B * 300.0, max_relative = 1e-12);
    assert!(x[P] < 0.0 && x[P_BETA] < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn psd_is_hermitian_and_even(w in 0.0f64..1e5) {
        let m = fig5(Fig5Stage::CenterOfMass);
        let s = m.psd_matrix(w).unwrap();
        let s_neg = m.psd_matrix(-w).unwrap();
        let scale = s.iter().map(|x| x.norm()).fold(0.0, f64::max);
        prop_assert!((s - s.adjoint()).iter().all(|x| x.norm() <= 1e-10 * scale));
        prop_assert!((s_neg - s.transpose()).iter().all(|x| x.norm() <= 1e-10 * scale));
        for i in 0..6 {
            prop_assert!(s[(i, i)].re >= 0.0);
        }
    }
}


