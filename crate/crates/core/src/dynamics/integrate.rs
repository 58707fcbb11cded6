//! Fixed-step integrators and trajectory drivers.
//!
//! The rotation is carried as the matrix of body axes and re-orthonormalized
//! after every step. Stochastic runs split each step into an exact
//! Ornstein-Uhlenbeck update of the damped momenta (half step), the
//! conservative RK4 drift (full step) and a second OU half step; the plain
//! Euler-Maruyama scheme is available for comparison.

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{pickup_derivatives, System, SystemState};
use crate::charge::SpaceMultipoles;
use crate::circuit::{circuit_rhs_with, CircuitState, Topology};
use crate::constants::K_B;
use crate::error::{Error, Result};
use crate::image::image_force_torque_space;
use crate::rotor::Orientation;
use crate::trap::{effective_force_torque_space, trap_force_torque_space, trap_power_space};

/// Which equations of motion to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    /// Time-dependent trap field and circuit, RK4, no noise.
    Exact,
    /// Cycle-averaged potential, RK4, no circuit.
    Effective,
    /// Exact forces plus gas friction and thermal noise from the gas and the
    /// resistor.
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScheme {
    /// Exact OU half steps around a deterministic RK4 step.
    SplitOu,
    /// Explicit Euler drift with Gaussian increments.
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Steps per drive period; the time step is `2 pi / (omega_ac n)`.
    pub steps_per_cycle: usize,
    pub noise: NoiseScheme,
    pub seed: u64,
    /// Escape radius in units of `l0`.
    pub escape_radius: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { steps_per_cycle: 256, noise: NoiseScheme::SplitOu, seed: 0, escape_radius: 10.0 }
    }
}

impl IntegratorConfig {
    pub fn dt(&self, sys: &System) -> f64 {
        sys.trap.drive_period() / self.steps_per_cycle as f64
    }

    fn validate(&self, dynamics: Dynamics) -> Result<()> {
        let min = if dynamics == Dynamics::Effective { 1 } else { 64 };
        if self.steps_per_cycle < min {
            return Err(Error::param("steps_per_cycle", format!("must be at least {min}")));
        }
        if !(self.escape_radius > 0.0) {
            return Err(Error::param("escape_radius", "must be positive"));
        }
        Ok(())
    }
}

/// Seeded Gaussian source for one trajectory (ChaCha8 stream cipher,
/// ziggurat normals).
#[derive(Debug, Clone)]
pub struct NoiseStream(ChaCha8Rng);

impl NoiseStream {
    /// Stream for ensemble member `index`, seeded with `seed ^ index`.
    pub fn new(seed: u64, index: u64) -> Self {
        NoiseStream(ChaCha8Rng::seed_from_u64(seed ^ index))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    fn normal3(&mut self) -> Vector3<f64> {
        Vector3::new(self.normal(), self.normal(), self.normal())
    }
}

/// Flat integration state with an unconstrained rotation matrix.
#[derive(Debug, Clone, Copy)]
struct Raw {
    r: Vector3<f64>,
    p: Vector3<f64>,
    m: Matrix3<f64>,
    j: Vector3<f64>,
    q: f64,
    phi: f64,
    w: f64,
}

impl Raw {
    fn of(s: &SystemState) -> Raw {
        Raw {
            r: s.r,
            p: s.p,
            m: *s.orientation.matrix(),
            j: s.j,
            q: s.circuit.q,
            phi: s.circuit.phi,
            w: s.drive_work,
        }
    }

    fn plus(&self, h: f64, k: &Raw) -> Raw {
        Raw {
            r: self.r + k.r * h,
            p: self.p + k.p * h,
            m: self.m + k.m * h,
            j: self.j + k.j * h,
            q: self.q + k.q * h,
            phi: self.phi + k.phi * h,
            w: self.w + k.w * h,
        }
    }

    fn into_state(self, t: f64) -> Result<SystemState> {
        let finite = self.r.iter().chain(self.p.iter()).chain(self.j.iter()).chain(self.m.iter()).all(|x| x.is_finite())
            && self.q.is_finite()
            && self.phi.is_finite()
            && self.w.is_finite();
        if !finite {
            return Err(Error::NonFinite { t });
        }
        Ok(SystemState {
            t,
            r: self.r,
            p: self.p,
            orientation: Orientation::from_matrix(&self.m),
            j: self.j,
            circuit: CircuitState { q: self.q, phi: self.phi },
            drive_work: self.w,
        })
    }
}

fn multipoles(sys: &System, m: &Matrix3<f64>) -> (SpaceMultipoles, Matrix3<f64>) {
    let d = &sys.particle.dist;
    let sm = SpaceMultipoles { q: d.charge(), p: m * d.dipole_body(), quad: m * d.quadrupole_body() * m.transpose() };
    (sm, m * sys.particle.inertia.body_inverse() * m.transpose())
}

fn derivative(sys: &System, t: f64, x: &Raw, effective: bool, circuit_damping: bool) -> Raw {
    let (sm, inv_i) = multipoles(sys, &x.m);
    let omega = inv_i * x.j;
    let (mut f, mut n, w) = if effective {
        let (f, n) = effective_force_torque_space(&sys.trap, &sm, sys.particle.mass, &inv_i, &x.r);
        (f, n, 0.0)
    } else {
        let (f, n) = trap_force_torque_space(&sys.trap, &sm, &x.r, t);
        (f, n, trap_power_space(&sys.trap, &sm, &x.r, t))
    };
    if let Some(k) = &sys.harmonic {
        f -= k * x.r;
    }
    let (mut dq, mut dphi) = (0.0, 0.0);
    if let Some(c) = &sys.coupling {
        if let Some(cap) = &c.images {
            let (fi, ni) = image_force_torque_space(cap, &sm, &x.r);
            f += fi;
            n += ni;
        }
        if !effective {
            let (q_ind, grad, tv) = pickup_derivatives(c, &sm, &x.r);
            let u = (x.q + q_ind) / c.circuit.capacitance;
            f -= grad * u;
            n -= tv * u;
            let state = CircuitState { q: x.q, phi: x.phi };
            (dq, dphi) = circuit_rhs_with(&c.circuit, &state, q_ind, 0.0, circuit_damping);
        }
    }
    Raw { r: x.p / sys.particle.mass, p: f, m: omega.cross_matrix() * x.m, j: n, q: dq, phi: dphi, w }
}

fn rk4(sys: &System, s: &SystemState, dt: f64, effective: bool, circuit_damping: bool) -> Raw {
    let x = Raw::of(s);
    let t = s.t;
    let k1 = derivative(sys, t, &x, effective, circuit_damping);
    let k2 = derivative(sys, t + dt / 2.0, &x.plus(dt / 2.0, &k1), effective, circuit_damping);
    let k3 = derivative(sys, t + dt / 2.0, &x.plus(dt / 2.0, &k2), effective, circuit_damping);
    let k4 = derivative(sys, t + dt, &x.plus(dt, &k3), effective, circuit_damping);
    x.plus(dt / 6.0, &k1).plus(dt / 3.0, &k2).plus(dt / 3.0, &k3).plus(dt / 6.0, &k4)
}

/// One RK4 step of the exact particle-circuit dynamics without noise.
pub fn step_exact(sys: &System, s: &SystemState, dt: f64) -> Result<SystemState> {
    rk4(sys, s, dt, false, sys.dissipative).into_state(s.t + dt)
}

/// One RK4 step of the macromotion in the effective potential.
pub fn step_effective(sys: &System, s: &SystemState, dt: f64) -> Result<SystemState> {
    let mut out = rk4(sys, s, dt, true, false).into_state(s.t + dt)?;
    out.circuit = s.circuit;
    out.drive_work = s.drive_work;
    Ok(out)
}

/// Exact OU update over `tau` of every damped channel.
fn ou_update(sys: &System, s: &mut SystemState, tau: f64, noise: &mut NoiseStream) {
    let decay = |g: f64| (-g * tau).exp();
    if let Some(gas) = &sys.gas {
        let kt = K_B * gas.temperature;
        let m = sys.particle.mass;
        let xi = noise.normal3();
        for k in 0..3 {
            let a = decay(gas.gamma_cm[k]);
            s.p[k] = s.p[k] * a + (m * kt * (1.0 - a * a)).sqrt() * xi[k];
        }
        let rot = *s.orientation.matrix();
        let mut jb = rot.transpose() * s.j;
        let moments = sys.particle.inertia.moments();
        let xi = noise.normal3();
        for k in 0..3 {
            let a = decay(gas.gamma_rot[k]);
            jb[k] = jb[k] * a + (moments[k] * kt * (1.0 - a * a)).sqrt() * xi[k];
        }
        s.j = rot * jb;
    }
    if let Some(c) = sys.coupling.as_ref().filter(|_| sys.dissipative) {
        let spec = &c.circuit;
        let kt = K_B * spec.temperature;
        let xi = noise.normal();
        match spec.topology {
            Topology::Series => {
                let a = decay(spec.gamma_s());
                s.circuit.phi = s.circuit.phi * a + (spec.inductance * kt * (1.0 - a * a)).sqrt() * xi;
            }
            Topology::Parallel => {
                let a = decay(spec.gamma_p());
                let q_ind = sys.induced_charge(&s.r, &s.orientation);
                let qc = (s.circuit.q + q_ind) * a + (spec.capacitance * kt * (1.0 - a * a)).sqrt() * xi;
                s.circuit.q = qc - q_ind;
            }
        }
    }
}

fn euler_maruyama(sys: &System, s: &SystemState, dt: f64, noise: &mut NoiseStream) -> Result<SystemState> {
    let x = Raw::of(s);
    let d = derivative(sys, s.t, &x, false, sys.dissipative);
    let mut out = x.plus(dt, &d).into_state(s.t + dt)?;
    if let Some(gas) = &sys.gas {
        let kt = K_B * gas.temperature;
        let m = sys.particle.mass;
        let xi = noise.normal3();
        for k in 0..3 {
            let g = gas.gamma_cm[k];
            out.p[k] += -g * s.p[k] * dt + (2.0 * m * g * kt * dt).sqrt() * xi[k];
        }
        let rot = *s.orientation.matrix();
        let jb = rot.transpose() * s.j;
        let moments = sys.particle.inertia.moments();
        let xi = noise.normal3();
        let mut kick = Vector3::zeros();
        for k in 0..3 {
            let g = gas.gamma_rot[k];
            kick[k] = -g * jb[k] * dt + (2.0 * moments[k] * g * kt * dt).sqrt() * xi[k];
        }
        out.j += rot * kick;
    }
    if let Some(c) = sys.coupling.as_ref().filter(|_| sys.dissipative) {
        let kick = (c.circuit.noise_intensity() * dt).sqrt() * noise.normal();
        match c.circuit.topology {
            Topology::Series => out.circuit.phi += kick,
            Topology::Parallel => out.circuit.q += kick,
        }
    }
    Ok(out)
}

/// One step with gas friction and thermal noise from the gas and the
/// resistor.
pub fn step_stochastic(
    sys: &System,
    s: &SystemState,
    dt: f64,
    scheme: NoiseScheme,
    noise: &mut NoiseStream,
) -> Result<SystemState> {
    match scheme {
        NoiseScheme::EulerMaruyama => euler_maruyama(sys, s, dt, noise),
        NoiseScheme::SplitOu => {
            let mut a = *s;
            ou_update(sys, &mut a, dt / 2.0, noise);
            let mut b = rk4(sys, &a, dt, false, false).into_state(s.t + dt)?;
            ou_update(sys, &mut b, dt / 2.0, noise);
            Ok(b)
        }
    }
}

/// Decimated snapshots of one run. A run that stops early keeps the
/// snapshots up to the failure and records the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub snapshots: Vec<SystemState>,
    pub failure: Option<Error>,
}

/// Integrates for `duration` and keeps every `stride`-th state, starting
/// with the initial one.
pub fn run_trajectory(
    sys: &System,
    initial: &SystemState,
    dynamics: Dynamics,
    cfg: &IntegratorConfig,
    duration: f64,
    stride: usize,
) -> Result<Trajectory> {
    run_member(sys, initial, dynamics, cfg, duration, stride, 0)
}

/// Independent trajectories from several initial states; member `k` uses
/// the noise stream `seed ^ k`. Results are independent of thread count.
pub fn run_ensemble(
    sys: &System,
    initials: &[SystemState],
    dynamics: Dynamics,
    cfg: &IntegratorConfig,
    duration: f64,
    stride: usize,
) -> Result<Vec<Trajectory>> {
    initials
        .par_iter()
        .enumerate()
        .map(|(k, s)| run_member(sys, s, dynamics, cfg, duration, stride, k as u64))
        .collect()
}

fn run_member(
    sys: &System,
    initial: &SystemState,
    dynamics: Dynamics,
    cfg: &IntegratorConfig,
    duration: f64,
    stride: usize,
    index: u64,
) -> Result<Trajectory> {
    cfg.validate(dynamics)?;
    if stride == 0 {
        return Err(Error::param("stride", "must be at least 1"));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::param("duration", "must be non-negative"));
    }
    let dt = cfg.dt(sys);
    let steps = (duration / dt).round() as usize;
    let radius = cfg.escape_radius * sys.trap.ell0();
    let mut noise = NoiseStream::new(cfg.seed, index);
    let mut snapshots = Vec::with_capacity(steps / stride + 1);
    snapshots.push(*initial);
    let mut s = *initial;
    let mut failure = None;
    for k in 1..=steps {
        let next = match dynamics {
            Dynamics::Exact => step_exact(sys, &s, dt),
            Dynamics::Effective => step_effective(sys, &s, dt),
            Dynamics::Stochastic => step_stochastic(sys, &s, dt, cfg.noise, &mut noise),
        };
        match next {
            Ok(mut n) => {
                n.t = initial.t + k as f64 * dt;
                if n.r.norm() > radius {
                    failure = Some(Error::Escaped { t: n.t, radius });
                    break;
                }
                s = n;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        if k % stride == 0 {
            snapshots.push(s);
        }
    }
    Ok(Trajectory { dt, snapshots, failure })
}
