//! Linearized coupled `z`/`beta`/circuit model of a symmetric rod in a linear
//! trap with endcaps, read out by a parallel RLC circuit.
//!
//! The state is `xi = (z, beta - pi/2, Q, p, p_beta, Phi)` with
//! `d xi = B xi dt + N dW`. `Q` is the capacitor charge; the pickup voltage
//! is `(Q + Q_ind)/C` with `Q_ind` linear in `z` and `beta`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix6, SMatrix, SymmetricEigen, Vector6};
use num_complex::Complex64;

use crate::charge::SymmetricParticleSpec;
use crate::circuit::{CircuitSpec, Topology};
use crate::constants::K_B;
use crate::dynamics::{GasCoupling, NoiseStream};
use crate::error::{Error, Result};
use crate::trap::TrapGeometry;

pub const LABELS: [&str; 6] = ["z", "beta", "Q", "p", "p_beta", "Phi"];

/// Indices into the state vector.
pub const Z: usize = 0;
pub const BETA: usize = 1;
pub const Q: usize = 2;
pub const P: usize = 3;
pub const P_BETA: usize = 4;
pub const PHI: usize = 5;

/// The two mechanical modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Z,
    Beta,
}

impl Mode {
    fn momentum_index(self) -> usize {
        match self {
            Mode::Z => P,
            Mode::Beta => P_BETA,
        }
    }
}

/// Coefficients of the drift and noise matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParameters {
    pub mass: f64,
    /// Transverse moment of inertia.
    pub i1: f64,
    pub omega_z: f64,
    pub omega_beta: f64,
    pub g_zq: f64,
    pub g_bq: f64,
    pub g_zb: f64,
    pub gamma_z: f64,
    pub gamma_beta: f64,
    pub resistance: f64,
    pub capacitance: f64,
    pub inductance: f64,
    pub t_circuit: f64,
    pub t_gas: f64,
}

impl ModeParameters {
    pub fn gamma_p(&self) -> f64 {
        1.0 / (self.resistance * self.capacitance)
    }

    pub fn omega_lc(&self) -> f64 {
        1.0 / (self.inductance * self.capacitance).sqrt()
    }

    pub fn d_cir(&self) -> f64 {
        self.capacitance * self.gamma_p() * K_B * self.t_circuit
    }

    pub fn d_z(&self) -> f64 {
        self.mass * self.gamma_z * K_B * self.t_gas
    }

    pub fn d_beta(&self) -> f64 {
        self.i1 * self.gamma_beta * K_B * self.t_gas
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    params: ModeParameters,
    b: Matrix6<f64>,
    n: Matrix6<f64>,
    /// Thermal scales of the coordinates at 1 K; `B / N` are well
    /// conditioned in the scaled variables.
    scale: Vector6<f64>,
    eigenvalues: [Complex64; 6],
}

impl LinearModel {
    pub fn new(params: ModeParameters) -> Result<Self> {
        let pm = &params;
        let positive = [pm.mass, pm.i1, pm.resistance, pm.capacitance, pm.inductance];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::param("linear model", "mass, inertia and circuit elements must be positive"));
        }
        let rates = [pm.gamma_z, pm.gamma_beta, pm.t_circuit, pm.t_gas];
        if rates.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::param("linear model", "damping rates and temperatures must be non-negative"));
        }
        if !(pm.omega_z > 0.0 && pm.omega_beta > 0.0) {
            return Err(Error::param("linear model", "mode frequencies must be positive"));
        }
        let (m, i1, r, c, l) = (pm.mass, pm.i1, pm.resistance, pm.capacitance, pm.inductance);
        #[rustfmt::skip]
        let b = Matrix6::from_row_slice(&[
            0.0, 0.0, 0.0, 1.0 / m, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 1.0 / i1, 0.0,
            -pm.g_zq / r, -pm.g_bq / r, -1.0 / (r * c), 0.0, 0.0, 1.0 / l,
            -m * pm.omega_z.powi(2), -pm.g_zb, -pm.g_zq, -pm.gamma_z, 0.0, 0.0,
            -pm.g_zb, -i1 * pm.omega_beta.powi(2), -pm.g_bq, 0.0, -pm.gamma_beta, 0.0,
            -pm.g_zq, -pm.g_bq, -1.0 / c, 0.0, 0.0, 0.0,
        ]);
        let n = Matrix6::from_diagonal(&Vector6::new(
            0.0,
            0.0,
            (2.0 * pm.d_cir()).sqrt(),
            (2.0 * pm.d_z()).sqrt(),
            (2.0 * pm.d_beta()).sqrt(),
            0.0,
        ));
        let kt = K_B;
        let scale = Vector6::new(
            (kt / (m * pm.omega_z.powi(2))).sqrt(),
            (kt / (i1 * pm.omega_beta.powi(2))).sqrt(),
            (c * kt).sqrt(),
            (m * kt).sqrt(),
            (i1 * kt).sqrt(),
            (l * kt).sqrt(),
        );
        let mut model = LinearModel { params, b, n, scale, eigenvalues: [Complex64::new(0.0, 0.0); 6] };
        let ev = model.scaled_b().complex_eigenvalues();
        for (k, e) in ev.iter().enumerate() {
            model.eigenvalues[k] = *e;
        }
        Ok(model)
    }

    pub fn params(&self) -> &ModeParameters {
        &self.params
    }

    /// Drift matrix.
    pub fn b(&self) -> &Matrix6<f64> {
        &self.b
    }

    /// Diagonal noise matrix.
    pub fn n(&self) -> &Matrix6<f64> {
        &self.n
    }

    pub fn eigenvalues(&self) -> &[Complex64; 6] {
        &self.eigenvalues
    }

    /// Largest real part of the eigenvalues of `B`.
    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
    }

    fn require_hurwitz(&self) -> Result<()> {
        let max_real = self.max_real_eigenvalue();
        if max_real < 0.0 {
            Ok(())
        } else {
            Err(Error::NotHurwitz { max_real })
        }
    }

    fn scaled_b(&self) -> Matrix6<f64> {
        let s = Matrix6::from_diagonal(&self.scale);
        let s_inv = Matrix6::from_diagonal(&self.scale.map(|x| 1.0 / x));
        s_inv * self.b * s
    }

    fn scaled_diffusion(&self) -> Matrix6<f64> {
        let s_inv = Matrix6::from_diagonal(&self.scale.map(|x| 1.0 / x));
        let n = s_inv * self.n;
        n * n.transpose()
    }

    fn unscale(&self, m: &Matrix6<f64>) -> Matrix6<f64> {
        let s = Matrix6::from_diagonal(&self.scale);
        s * m * s
    }

    /// Steady-state spectral density matrix
    /// `S = (i w - B)^-1 N N^T [(-i w - B)^-1]^T / 2 pi`, normalized so that
    /// `int S dw` over the whole real line is the covariance.
    pub fn psd_matrix(&self, omega: f64) -> Result<Matrix6<Complex64>> {
        self.require_hurwitz()?;
        let b = self.scaled_b().map(|x| Complex64::new(x, 0.0));
        let d = self.scaled_diffusion().map(|x| Complex64::new(x, 0.0));
        let iw = Matrix6::<Complex64>::identity() * Complex64::new(0.0, omega);
        let plus = (iw - b).try_inverse().ok_or_else(|| Error::Singular("i w - B".into()))?;
        let minus = (-iw - b).try_inverse().ok_or_else(|| Error::Singular("-i w - B".into()))?;
        let s = plus * d * minus.transpose() / Complex64::new(2.0 * PI, 0.0);
        let scale = Matrix6::from_diagonal(&self.scale.map(|x| Complex64::new(x, 0.0)));
        Ok(scale * s * scale)
    }

    /// Diagonal entry `S_ii(w)`, real by construction.
    pub fn psd(&self, index: usize, omega: f64) -> Result<f64> {
        Ok(self.psd_matrix(omega)?[(index, index)].re)
    }

    /// Solution of `B S + S B^T + N N^T = 0`.
    pub fn stationary_covariance(&self) -> Result<Matrix6<f64>> {
        self.require_hurwitz()?;
        let b = self.scaled_b();
        let d = self.scaled_diffusion();
        let mut op = DMatrix::<f64>::zeros(36, 36);
        // column-major vec: vec(B S) = (1 (x) B) vec S, vec(S B^T) = (B (x) 1) vec S
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    op[(j * 6 + i, j * 6 + k)] += b[(i, k)];
                    op[(j * 6 + i, k * 6 + i)] += b[(j, k)];
                }
            }
        }
        let rhs = DVector::from_iterator(36, d.iter().map(|x| -x));
        let sol = op.lu().solve(&rhs).ok_or_else(|| Error::Singular("Lyapunov operator".into()))?;
        let s = Matrix6::from_column_slice(sol.as_slice());
        Ok(self.unscale(&((s + s.transpose()) * 0.5)))
    }

    /// Mode temperature `<p^2> / (M k_B)` of the stationary state.
    pub fn effective_temperature(&self, mode: Mode) -> Result<f64> {
        let k = mode.momentum_index();
        Ok(self.stationary_covariance()?[(k, k)] / (self.inertial_factor(mode) * K_B))
    }

    /// Mode temperature from the area under the momentum PSD.
    pub fn effective_temperature_psd(&self, mode: Mode) -> Result<f64> {
        Ok(self.integrate_psd(mode.momentum_index())? / (self.inertial_factor(mode) * K_B))
    }

    fn inertial_factor(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Z => self.params.mass,
            Mode::Beta => self.params.i1,
        }
    }

    /// Kinetic energies `p^2/2m` and `p_beta^2/2I_1` of a state.
    pub fn kinetic_energies(&self, xi: &Vector6<f64>) -> (f64, f64) {
        (xi[P] * xi[P] / (2.0 * self.params.mass), xi[P_BETA] * xi[P_BETA] / (2.0 * self.params.i1))
    }

    /// `int S_ii dw` over the real line by adaptive Simpson quadrature with
    /// breakpoints around every resonance and a power-law tail.
    pub fn integrate_psd(&self, index: usize) -> Result<f64> {
        self.require_hurwitz()?;
        let f = |w: f64| self.psd(index, w).expect("Hurwitz checked");
        let top = self.eigenvalues.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let w_max = 20.0 * top.max(self.params.omega_z).max(self.params.omega_beta).max(self.params.omega_lc());
        let mut points = vec![0.0, w_max];
        for e in &self.eigenvalues {
            let (a, b) = (-e.re, e.im.abs());
            points.push(b);
            for j in -2..=12 {
                let d = a * 10f64.powi(j);
                points.push(b - d);
                points.push(b + d);
            }
        }
        points.retain(|w| *w >= 0.0 && *w <= w_max && w.is_finite());
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * w_max);

        let coarse: f64 = points.windows(2).map(|w| simpson_composite(&f, w[0], w[1], 64)).sum();
        let tol = 1e-10 * coarse.abs();
        let mut total = 0.0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            total += adaptive_simpson(&f, a, b, fa, fm, fb, whole, tol, 24);
        }
        // S ~ c w^-n beyond w_max
        let (s1, s2) = (f(w_max), f(2.0 * w_max));
        let n = (s1 / s2).log2();
        if s1 > 0.0 && n > 1.0 {
            total += s1 * w_max / (n - 1.0);
        }
        Ok(2.0 * total)
    }
}

fn simpson_composite(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // S carries ~1e-6 relative rounding near sharp resonances; the
    // breakpoints keep each piece smooth, so a local relative test suffices
    if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= 1e-6 * (left + right).abs() {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Linearizes the dynamics about the minimum `x = z = 0`, `y = -p3/q`,
/// `alpha = beta = pi/2` of a linear trap with endcaps along `e_z`, with a
/// parallel circuit on a plate pickup with factor `k` at distance `z0`.
pub fn build_model(
    trap: &TrapGeometry,
    k: f64,
    z0: f64,
    spec: &SymmetricParticleSpec,
    mass: f64,
    circuit: &CircuitSpec,
    gas: &GasCoupling,
) -> Result<LinearModel> {
    let linear = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(-1.0, 1.0, 0.0));
    let ring = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -2.0));
    let ec = match trap.endcap() {
        Some(ec) if *trap.a_tensor() == linear && ec.a_ec == ring => ec,
        _ => return Err(Error::param("trap", "expected a linear trap with endcaps along e_z")),
    };
    if circuit.topology != Topology::Parallel {
        return Err(Error::param("circuit", "the linear model uses a parallel circuit"));
    }
    if !(z0 > 0.0) || !(mass > 0.0) || spec.q == 0.0 {
        return Err(Error::param("linear model", "z0 and mass must be positive and the particle charged"));
    }
    let SymmetricParticleSpec { q, p3, q3, i_perp: i1, .. } = *spec;
    let c = circuit.capacitance;
    let ku = ec.k_ec * ec.u_ec / (ec.ell_ec * ec.ell_ec);
    let w2l4 = (trap.omega_ac() * trap.ell0() * trap.ell0()).powi(2);
    let omega_z2 = 4.0 * ku * q / mass + (k * q / z0).powi(2) / (mass * c);
    let omega_b2 = 2.0 * ku / i1 * (3.0 * q3 - p3 * p3 / q)
        + (k * p3 / z0).powi(2) / (i1 * c)
        + trap.u_ac().powi(2) / (2.0 * i1 * i1 * w2l4) * (q3 - p3 * p3 / q).powi(2);
    if !(omega_z2 > 0.0) {
        return Err(Error::param("omega_z^2", format!("{omega_z2:e} is not positive; not a minimum")));
    }
    if !(omega_b2 > 0.0) {
        return Err(Error::param("omega_beta^2", format!("{omega_b2:e} is not positive; not a minimum")));
    }
    LinearModel::new(ModeParameters {
        mass,
        i1,
        omega_z: omega_z2.sqrt(),
        omega_beta: omega_b2.sqrt(),
        g_zq: k * q / (c * z0),
        g_bq: -k * p3 / (c * z0),
        g_zb: -4.0 * ku * p3 - k * k * q * p3 / (c * z0 * z0),
        gamma_z: gas.gamma_cm.z,
        gamma_beta: gas.gamma_rot.x,
        resistance: circuit.resistance,
        capacitance: c,
        inductance: circuit.inductance,
        t_circuit: circuit.temperature,
        t_gas: gas.temperature,
    })
}

/// Time stepping of the linear SDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearScheme {
    /// Exact transition matrix and noise covariance of one step.
    Exact,
    /// Explicit Euler-Maruyama.
    EulerMaruyama,
}

/// Uniformly sampled states.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrajectory {
    pub t: Vec<f64>,
    pub states: Vec<Vector6<f64>>,
}

/// State and noise stream of a running simulation; successive `run` calls
/// continue the same stream.
#[derive(Debug, Clone)]
pub struct LinearSimulator {
    state: Vector6<f64>,
    step: u64,
    dt: f64,
    scheme: LinearScheme,
    noise: NoiseStream,
}

impl LinearSimulator {
    pub fn new(initial: Vector6<f64>, dt: f64, scheme: LinearScheme, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        Ok(LinearSimulator { state: initial, step: 0, dt, scheme, noise: NoiseStream::new(seed, 0) })
    }

    pub fn state(&self) -> &Vector6<f64> {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// Advances by `duration` under `model`, recording the current state
    /// and every `stride`-th step after it.
    pub fn run(&mut self, model: &LinearModel, duration: f64, stride: usize) -> Result<LinearTrajectory> {
        if !(duration >= 0.0) || stride == 0 {
            return Err(Error::param("run", "duration must be non-negative and stride positive"));
        }
        let steps = (duration / self.dt).round() as u64;
        let (a, g) = match self.scheme {
            LinearScheme::Exact => exact_discretization(model, self.dt)?,
            LinearScheme::EulerMaruyama => {
                (Matrix6::identity() + model.b * self.dt, model.n * self.dt.sqrt())
            }
        };
        let mut out = LinearTrajectory { t: vec![self.time()], states: vec![self.state] };
        for k in 1..=steps {
            let w = Vector6::from_fn(|_, _| self.noise.normal());
            self.state = a * self.state + g * w;
            self.step += 1;
            if k % stride as u64 == 0 {
                out.t.push(self.time());
                out.states.push(self.state);
            }
        }
        Ok(out)
    }
}

/// Transition matrix `exp(B dt)` and a square root of the one-step noise
/// covariance, from Van Loan's block exponential in scaled variables.
fn exact_discretization(model: &LinearModel, dt: f64) -> Result<(Matrix6<f64>, Matrix6<f64>)> {
    let b = model.scaled_b();
    let d = model.scaled_diffusion();
    let mut m = SMatrix::<f64, 12, 12>::zeros();
    m.fixed_view_mut::<6, 6>(0, 0).copy_from(&(-b * dt));
    m.fixed_view_mut::<6, 6>(0, 6).copy_from(&(d * dt));
    m.fixed_view_mut::<6, 6>(6, 6).copy_from(&(b.transpose() * dt));
    let e = m.exp();
    let f22t: Matrix6<f64> = e.fixed_view::<6, 6>(6, 6).transpose();
    let cov = f22t * e.fixed_view::<6, 6>(0, 6);
    let cov = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(cov);
    let root = eig.eigenvectors * Matrix6::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt()));
    if !root.iter().chain(f22t.iter()).all(|x| x.is_finite()) {
        return Err(Error::Singular("step discretization".into()));
    }
    let s = Matrix6::from_diagonal(&model.scale);
    let s_inv = Matrix6::from_diagonal(&model.scale.map(|x| 1.0 / x));
    Ok((s * f22t * s_inv, s * root))
}

pub fn simulate_linear(
    model: &LinearModel,
    initial: Vector6<f64>,
    duration: f64,
    dt: f64,
    stride: usize,
    scheme: LinearScheme,
    seed: u64,
) -> Result<LinearTrajectory> {
    LinearSimulator::new(initial, dt, scheme, seed)?.run(model, duration, stride)
}

/// Piecewise-constant protocol: each stage runs its model for its duration,
/// continuing state and noise stream. Samples restart their stride at every
/// stage boundary, which is recorded once.
pub fn simulate_schedule(
    stages: &[(&LinearModel, f64)],
    initial: Vector6<f64>,
    dt: f64,
    stride: usize,
    scheme: LinearScheme,
    seed: u64,
) -> Result<LinearTrajectory> {
    let mut sim = LinearSimulator::new(initial, dt, scheme, seed)?;
    let mut out = LinearTrajectory { t: vec![sim.time()], states: vec![initial] };
    for (model, duration) in stages {
        let part = sim.run(model, *duration, stride)?;
        out.t.extend_from_slice(&part.t[1..]);
        out.states.extend_from_slice(&part.states[1..]);
    }
    Ok(out)
}

/// `<p^2> / (M k_B)` over sampled states.
pub fn temperature_from_samples(model: &LinearModel, states: &[Vector6<f64>], mode: Mode) -> f64 {
    let k = mode.momentum_index();
    let mean = states.iter().map(|s| s[k] * s[k]).sum::<f64>() / states.len() as f64;
    mean / (model.inertial_factor(mode) * K_B)
}

/// The initial condition of the cooling protocol: thermal momenta pointing
/// down, `Q = -4.8 e`, `Phi = 0.4 e L omega_z`.
pub fn cooling_initial_state(model: &LinearModel, t_gas: f64) -> Vector6<f64> {
    let pm = &model.params;
    let e = crate::constants::ELEMENTARY_CHARGE;
    Vector6::new(
        0.0,
        0.0,
        -4.8 * e,
        -(2.0 * pm.mass * K_B * t_gas).sqrt(),
        -(2.0 * pm.i1 * K_B * t_gas).sqrt(),
        0.4 * e * pm.inductance * pm.omega_z,
    )
}

#[cfg(test)]
mod tests;
