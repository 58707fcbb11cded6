use super::*;
use crate::charge::{multipoles_from_point_charges, PointChargeSet};
use crate::constants::{AMU, ELEMENTARY_CHARGE as E};
use crate::rotor::InertiaSpec;
use approx::assert_relative_eq;
use proptest::prelude::*;
use std::f64::consts::TAU;

const Z0: f64 = 1e-3;

fn geometry() -> Matrix3<f64> {
    Matrix3::new(0.7, 0.2, -0.1, 0.2, -0.3, 0.25, -0.1, 0.25, -0.4)
}

fn pickups() -> [PickupConfig; 2] {
    [
        PickupConfig::linear(0.4, Z0).unwrap(),
        PickupConfig::quadrupole(0.8, Z0, geometry()).unwrap(),
    ]
}

fn charges() -> PointChargeSet {
    let l = 1e-6;
    PointChargeSet::new(vec![
        (3.0 * E, Vector3::new(0.3, -0.1, 0.5) * l),
        (-E, Vector3::new(-0.6, 0.4, 0.2) * l),
        (2.0 * E, Vector3::new(0.1, 0.7, -0.8) * l),
        (-0.5 * E, Vector3::new(0.0, -0.5, 0.3) * l),
    ])
    .unwrap()
}

fn particle() -> Particle {
    let dist = multipoles_from_point_charges(&charges());
    Particle::new(dist, InertiaSpec::new(3e-25, 2.1e-25, 1.4e-25).unwrap(), 1e9 * AMU).unwrap()
}

fn pose() -> (Vector3<f64>, Orientation) {
    (Vector3::new(2e-5, -1e-5, 3e-5), Orientation::from_euler(0.4, 1.1, -0.7))
}

fn grad_phi0(cfg: &PickupConfig, r: &Vector3<f64>) -> Vector3<f64> {
    match cfg {
        PickupConfig::Linear { k1, z0 } => Vector3::z() * (k1 / z0),
        PickupConfig::Quadrupole { k2, z0, g } => g * r * (k2 / (z0 * z0)),
    }
}

fn series() -> CircuitSpec {
    CircuitSpec::new(Topology::Series, 2e6, 0.565, 1e-8, 4.0).unwrap()
}

fn parallel() -> CircuitSpec {
    CircuitSpec::new(Topology::Parallel, 2e6, 0.565, 1e-8, 4.0).unwrap()
}

#[test]
fn validation() {
    assert!(PickupConfig::linear(0.5, 0.0).is_err());
    assert!(PickupConfig::quadrupole(1.0, Z0, Matrix3::identity()).is_err());
    assert!(PickupConfig::quadrupole(1.0, Z0, Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)).is_err());
    assert!(CircuitSpec::new(Topology::Series, 0.0, 1.0, 1.0, 0.0).is_err());
    assert!(CircuitSpec::new(Topology::Series, 1.0, 1.0, 1.0, -1.0).is_err());
}

#[test]
fn reference_potential_examples() {
    let plate = PickupConfig::plate_capacitor(Z0).unwrap();
    assert_eq!(reference_potential(&plate, &Vector3::zeros()), 0.0);
    assert_relative_eq!(reference_potential(&plate, &(Vector3::z() * Z0)), 0.5, epsilon = 1e-15);
    let quad = pickups()[1];
    let r = Vector3::new(1e-4, -3e-4, 2e-4);
    assert_relative_eq!(reference_potential(&quad, &r), reference_potential(&quad, &-r), max_relative = 1e-15);
}

#[test]
fn induced_charge_examples() {
    let plate = PickupConfig::plate_capacitor(Z0).unwrap();
    let point = MultipoleDistribution::monopole(E);
    let o = Orientation::identity();
    assert_relative_eq!(induced_charge(&plate, &point, &(Vector3::z() * Z0), &o), E / 2.0, max_relative = 1e-15);

    let quad = pickups()[1];
    let dist = particle().dist;
    let only_quad = {
        let m = space_frame_multipoles(&dist, &o);
        0.8 / (2.0 * Z0 * Z0) * (geometry() * m.quad).trace() / 3.0
    };
    let d = MultipoleDistribution::new(0.0, Vector3::new(1e-25, 2e-25, 3e-25), *dist.quadrupole_body()).unwrap();
    // with R = 0 the dipole and charge terms drop out
    assert_relative_eq!(induced_charge(&quad, &d, &Vector3::zeros(), &o), only_quad, max_relative = 1e-12);
}

#[test]
fn reciprocity_sum_oracle() {
    let set = charges();
    let p = particle();
    let (r, o) = pose();
    for cfg in pickups() {
        let placed = set.placed(&r, &o);
        let direct: f64 = placed.iter().map(|(q, x)| q * reference_potential(&cfg, x)).sum();
        let closed = induced_charge(&cfg, &p.dist, &r, &o);
        assert_relative_eq!(closed, direct, max_relative = 1e-10);

        let torque: Vector3<f64> =
            placed.iter().map(|(q, x)| (x - r).cross(&grad_phi0(&cfg, x)) * *q).sum();
        let t = torque_per_voltage(&cfg, &p.dist, &r, &o);
        assert!((t - torque).norm() <= 1e-10 * torque.norm(), "{t} vs {torque}");
    }
}

#[test]
fn gradient_examples() {
    let [lin, quad] = pickups();
    let p = particle();
    let (r, o) = pose();
    let g = induced_charge_gradient(&lin, &p.dist, &r, &o);
    assert_relative_eq!(g, Vector3::z() * (0.4 * p.charge() / Z0), max_relative = 1e-15);
    let neutral = MultipoleDistribution::new(p.charge(), Vector3::zeros(), *p.dist.quadrupole_body()).unwrap();
    assert_eq!(induced_charge_gradient(&quad, &neutral, &Vector3::zeros(), &o), Vector3::zeros());
}

#[test]
fn gradient_matches_finite_differences() {
    let p = particle();
    let (r, o) = pose();
    for cfg in pickups() {
        let g = induced_charge_gradient(&cfg, &p.dist, &r, &o);
        let h = 1e-7;
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            let fd = (induced_charge(&cfg, &p.dist, &(r + e), &o) - induced_charge(&cfg, &p.dist, &(r - e), &o))
                / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-8 * g.norm(), "axis {k}: {fd} vs {}", g[k]);
        }
    }
}

#[test]
fn torque_vanishing_cases() {
    let [lin, quad] = pickups();
    let axial = MultipoleDistribution::symmetric(E, 1e-25, 0.0);
    let o = Orientation::identity();
    assert_eq!(torque_per_voltage(&lin, &axial, &Vector3::new(1e-5, 2e-5, 0.0), &o), Vector3::zeros());

    // Q diagonal in the eigenbasis of G
    let axes = quad.geometry_axes().unwrap();
    let basis = Matrix3::from_columns(&[axes[0].1, axes[1].1, axes[2].1]);
    let q_diag = basis * Matrix3::from_diagonal(&Vector3::new(2.0, -0.5, -1.5)) * basis.transpose() * 1e-40;
    let d = MultipoleDistribution::new(E, Vector3::zeros(), q_diag).unwrap();
    let t = torque_per_voltage(&quad, &d, &Vector3::new(1e-5, 0.0, 0.0), &o);
    assert!(t.norm() < 1e-12 * 0.8 / (Z0 * Z0) * 1e-40, "{t}");
}

#[test]
fn euler_derivative_identities() {
    let p = particle();
    let (r, _) = pose();
    let [a, b, c] = [0.4, 1.1, -0.7];
    let o = Orientation::from_euler(a, b, c);
    let h = 1e-5;
    for cfg in pickups() {
        let t = torque_per_voltage(&cfg, &p.dist, &r, &o);
        let qi = |a: f64, b: f64, c: f64| induced_charge(&cfg, &p.dist, &r, &Orientation::from_euler(a, b, c));
        let d_a = (qi(a + h, b, c) - qi(a - h, b, c)) / (2.0 * h);
        let d_b = (qi(a, b + h, c) - qi(a, b - h, c)) / (2.0 * h);
        let d_c = (qi(a, b, c + h) - qi(a, b, c - h)) / (2.0 * h);
        let scale = t.norm();
        assert!((d_a - t.z).abs() < 1e-8 * scale);
        assert!((d_b - o.nodal_line().dot(&t)).abs() < 1e-8 * scale);
        assert!((d_c - o.axis(2).dot(&t)).abs() < 1e-8 * scale);
    }
}

#[test]
fn circuit_fixed_point() {
    for spec in [series(), parallel()] {
        let q_ind = 3e-15;
        let s = CircuitState { q: -q_ind, phi: 0.0 };
        assert_eq!(circuit_rhs(&spec, &s, q_ind, 0.0), (0.0, 0.0));
    }
}

fn rk4_circuit(spec: &CircuitSpec, s: CircuitState, q_ind: impl Fn(f64) -> f64, dt: f64, n: usize) -> Vec<CircuitState> {
    let f = |t: f64, s: &CircuitState| {
        let (dq, dp) = circuit_rhs(spec, s, q_ind(t), 0.0);
        Vector3::new(dq, dp, 0.0)
    };
    let mut out = vec![s];
    let mut cur = s;
    for i in 0..n {
        let t = i as f64 * dt;
        let add = |s: &CircuitState, k: &Vector3<f64>, h: f64| CircuitState { q: s.q + h * k.x, phi: s.phi + h * k.y };
        let k1 = f(t, &cur);
        let k2 = f(t + dt / 2.0, &add(&cur, &k1, dt / 2.0));
        let k3 = f(t + dt / 2.0, &add(&cur, &k2, dt / 2.0));
        let k4 = f(t + dt, &add(&cur, &k3, dt));
        cur = add(&cur, &(k1 + k2 * 2.0 + k3 * 2.0 + k4), dt / 6.0);
        out.push(cur);
    }
    out
}

#[test]
fn free_series_circuit_rings_down() {
    let spec = CircuitSpec::new(Topology::Series, 500.0, 0.565, 1e-8, 0.0).unwrap();
    let delta = (spec.omega_lc().powi(2) - spec.gamma_s().powi(2) / 4.0).sqrt();
    let dt = TAU / spec.omega_lc() / 400.0;
    let n = 4000;
    let traj = rk4_circuit(&spec, CircuitState { q: 1e-12, phi: 0.0 }, |_| 0.0, dt, n);
    for (i, s) in traj.iter().enumerate().step_by(97) {
        let t = i as f64 * dt;
        let g = spec.gamma_s() / 2.0;
        let expect = 1e-12 * (-g * t).exp() * ((delta * t).cos() + g / delta * (delta * t).sin());
        assert!((s.q - expect).abs() < 1e-7 * 1e-12, "t={t}: {} vs {expect}", s.q);
    }
}

#[test]
fn quasi_adiabatic_response() {
    let spec = series();
    let w0 = spec.omega_lc() / 100.0;
    let amp = 1e-14;
    let q_ind = |t: f64| amp * (w0 * t).sin();
    let dt = TAU / spec.omega_lc() / 50.0;
    let n = (12.0 * TAU / w0 / dt) as usize;
    let traj = rk4_circuit(&spec, CircuitState { q: 0.0, phi: 0.0 }, q_ind, dt, n);
    let lag = spec.gamma_s() / spec.omega_lc().powi(2) * amp * w0;
    let mut worst: f64 = 0.0;
    for (i, s) in traj.iter().enumerate().skip(n / 2) {
        let t = i as f64 * dt;
        let expect = -q_ind(t) + lag * (w0 * t).cos();
        worst = worst.max((s.q - expect).abs());
    }
    assert!(worst < 0.02 * lag, "worst {worst:e} vs lag {lag:e}");
}

#[test]
fn contraction_rate_matches_primitives() {
    let p = particle();
    let (r, o) = pose();
    let res = 3e5;
    for cfg in pickups() {
        let g = induced_charge_gradient(&cfg, &p.dist, &r, &o);
        let t = torque_per_voltage(&cfg, &p.dist, &r, &o);
        let inv = inverse_inertia(&o, &p.inertia);
        let expect = res * (g.norm_squared() / p.mass + t.dot(&(inv * t)));
        assert_relative_eq!(adiabatic_contraction_rate(&cfg, &p, &r, &o, res), expect, max_relative = 1e-10);
    }
}

#[test]
fn contraction_rate_examples() {
    let lin = PickupConfig::linear(0.4, Z0).unwrap();
    let q = 1e4 * E;
    let axial = Particle::new(
        MultipoleDistribution::symmetric(q, 1e-20, 0.0),
        InertiaSpec::symmetric(1e-25, 5e-26).unwrap(),
        1e9 * AMU,
    )
    .unwrap();
    let res = 1e6;
    let rate = adiabatic_contraction_rate(&lin, &axial, &Vector3::zeros(), &Orientation::identity(), res);
    assert_relative_eq!(rate, res * 0.16 * q * q / (axial.mass * Z0 * Z0), max_relative = 1e-14);

    let quad = pickups()[1];
    let p = particle();
    let o = pose().1;
    let neutral_at_center = Particle { dist: MultipoleDistribution::new(p.charge(), Vector3::zeros(), *p.dist.quadrupole_body()).unwrap(), ..p };
    let g = induced_charge_gradient(&quad, &neutral_at_center.dist, &Vector3::zeros(), &o);
    assert_eq!(g, Vector3::zeros());
}

#[test]
fn rate_identities() {
    let (q, m, k1) = (1e5 * E, 3.5e12 * AMU, 0.4);
    let res = 2e6;
    let expect = res * q * q * k1 * k1 / (m * Z0 * Z0);
    let gs0 = damping_rate_vs_frequency(&series(), k1, Z0, q, m, 0.0);
    let par = parallel();
    let gp = damping_rate_vs_frequency(&par, k1, Z0, q, m, par.omega_lc());
    assert_relative_eq!(gs0, expect, max_relative = 1e-12);
    assert_relative_eq!(gp, expect, max_relative = 1e-12);
    assert_eq!(damping_rate_vs_frequency(&par, k1, Z0, q, m, 0.0), 0.0);
    // no frequency exceeds the resonant value
    for k in 1..200 {
        let w = par.omega_lc() * k as f64 / 100.0;
        assert!(damping_rate_vs_frequency(&par, k1, Z0, q, m, w) <= gp * (1.0 + 1e-12));
    }
}

#[test]
fn closed_forms_match_impedance() {
    let (q, m, k1) = (1e5 * E, 3.5e12 * AMU, 0.4);
    for spec in [series(), parallel()] {
        for w in [10.0, 1e3, spec.omega_lc(), 3e4, 1e6] {
            let re = effective_resistance(spec.impedance(w), spec.capacitance, w);
            let via_z = q * q * k1 * k1 / (m * Z0 * Z0) * re;
            let closed = damping_rate_vs_frequency(&spec, k1, Z0, q, m, w);
            assert_relative_eq!(via_z, closed, max_relative = 1e-9);
        }
    }
}

#[test]
fn impedance_table_interpolates() {
    let spec = parallel();
    let grid: Vec<(f64, Complex64)> = (1..=2000).map(|k| {
        let w = k as f64 * 20.0;
        (w, spec.impedance(w))
    }).collect();
    let table = ImpedanceTable::new(grid).unwrap();
    let (q, m, k1) = (1e5 * E, 3.5e12 * AMU, 0.4);
    let w = 20.0 * 663.0;
    let a = damping_rate_from_impedance(&table, spec.capacitance, k1, Z0, q, m, w).unwrap();
    assert_relative_eq!(a, damping_rate_vs_frequency(&spec, k1, Z0, q, m, w), max_relative = 1e-9);
    assert!(table.at(1.0).is_err());
    assert!(ImpedanceTable::new(vec![]).is_err());
}

#[test]
fn series_peak_location() {
    let (q, m, k1) = (E, AMU, 0.4);
    let wlc = 1e4;
    for gamma in [0.1 * wlc, 0.9 * wlc, 1.3 * wlc, 2.0 * wlc] {
        let l = 0.5;
        let spec = CircuitSpec::new(Topology::Series, gamma * l, l, 1.0 / (wlc * wlc * l), 0.0).unwrap();
        let n = 40_000;
        let (mut best, mut arg) = (f64::MIN, 0.0);
        for k in 0..=n {
            let w = 2.0 * wlc * k as f64 / n as f64;
            let r = damping_rate_vs_frequency(&spec, k1, Z0, q, m, w);
            if r > best {
                best = r;
                arg = w;
            }
        }
        let expect = if gamma < std::f64::consts::SQRT_2 * wlc { (wlc * wlc - gamma * gamma / 2.0).sqrt() } else { 0.0 };
        assert!((arg - expect).abs() <= 2.0 * 2.0 * wlc / n as f64, "gamma {gamma}: {arg} vs {expect}");
    }
}

#[test]
fn friction_tensors() {
    let p = particle();
    let (r, o) = pose();
    let spec = parallel();
    let lin = PickupConfig::linear(0.4, Z0).unwrap();
    let fd = friction_diffusion_tensors(&spec, &lin, &p, &r, &o, 1.2e4);
    // rank one along e_z
    let mut only_zz = Matrix3::zeros();
    only_zz[(2, 2)] = fd.gamma_cm[(2, 2)];
    assert_eq!(fd.gamma_cm, only_zz);
    assert!(fd.gamma_cm[(2, 2)] > 0.0);
    assert!((fd.gamma_rot - fd.gamma_rot.transpose()).amax() > 1e-6 * fd.gamma_rot.amax());
    assert_relative_eq!(fd.d_cm, fd.gamma_cm * (K_B * 4.0 * p.mass), max_relative = 1e-14);

    let cold = CircuitSpec { temperature: 0.0, ..spec };
    let fd0 = friction_diffusion_tensors(&cold, &lin, &p, &r, &o, 1.2e4);
    assert_eq!(fd0.d_cm, Matrix3::zeros());
    assert_eq!(fd0.d_rot, Matrix3::zeros());
}

proptest! {
    #[test]
    fn contraction_rate_non_negative(
        x in -1e-4..1e-4f64, y in -1e-4..1e-4f64, z in -1e-4..1e-4f64,
        a in 0.0..TAU, b in 0.05..3.0f64, c in 0.0..TAU,
    ) {
        let p = particle();
        let o = Orientation::from_euler(a, b, c);
        for cfg in pickups() {
            prop_assert!(adiabatic_contraction_rate(&cfg, &p, &Vector3::new(x, y, z), &o, 1e6) >= 0.0);
        }
    }

    #[test]
    fn damping_rates_non_negative(w in 0.0..1e6f64, r in 1.0..1e8f64) {
        for top in [Topology::Series, Topology::Parallel] {
            let spec = CircuitSpec::new(top, r, 0.5, 1e-9, 0.0).unwrap();
            prop_assert!(damping_rate_vs_frequency(&spec, 0.5, Z0, E, AMU, w) >= 0.0);
        }
    }
}
