//! Pickup electrodes and the RLC circuit they feed.
//!
//! The particle induces a charge `Q_ind` on the pickup electrode; the circuit
//! sees it through the capacitor voltage `U_z = (Q + Q_ind) / C`, and the
//! particle feels `-U_z dQ_ind/dR` and the torque `-U_z T`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::charge::{space_frame_multipoles, MultipoleDistribution, Particle, SpaceMultipoles};
use crate::error::{Error, Result};
use crate::rotor::{inverse_inertia, inertia_tensor, Orientation};
use crate::trap::quadrupole_cross;
use crate::constants::K_B;

/// Electrode geometry, through the potential `Phi0` it produces per volt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PickupConfig {
    /// `Phi0(r) = (k1/z0) e_z . r`; a plate capacitor has `k1 = 1/2`.
    Linear { k1: f64, z0: f64 },
    /// `Phi0(r) = (k2/2z0^2) r . G r` with traceless symmetric `G`.
    Quadrupole { k2: f64, z0: f64, g: Matrix3<f64> },
}

impl PickupConfig {
    pub fn linear(k1: f64, z0: f64) -> Result<Self> {
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(Error::param("z0", "must be positive"));
        }
        if !k1.is_finite() {
            return Err(Error::param("k1", "must be finite"));
        }
        Ok(PickupConfig::Linear { k1, z0 })
    }

    pub fn plate_capacitor(z0: f64) -> Result<Self> {
        Self::linear(0.5, z0)
    }

    pub fn quadrupole(k2: f64, z0: f64, g: Matrix3<f64>) -> Result<Self> {
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(Error::param("z0", "must be positive"));
        }
        let scale = g.amax();
        if !(scale > 0.0 && scale.is_finite() && k2.is_finite()) {
            return Err(Error::param("G", "must be non-zero and finite"));
        }
        if (g - g.transpose()).amax() > 1e-12 * scale || g.trace().abs() > 1e-12 * scale {
            return Err(Error::param("G", "must be symmetric and traceless"));
        }
        Ok(PickupConfig::Quadrupole { k2, z0, g })
    }

    pub fn z0(&self) -> f64 {
        match *self {
            PickupConfig::Linear { z0, .. } | PickupConfig::Quadrupole { z0, .. } => z0,
        }
    }

    /// Eigenpairs `(g_i, g_i)` of the geometry tensor.
    pub fn geometry_axes(&self) -> Option<[(f64, Vector3<f64>); 3]> {
        match self {
            PickupConfig::Linear { .. } => None,
            PickupConfig::Quadrupole { g, .. } => {
                let eig = SymmetricEigen::new(*g);
                Some(std::array::from_fn(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())))
            }
        }
    }
}

/// Potential at `r` when the pickup electrode is held at one volt.
pub fn reference_potential(cfg: &PickupConfig, r: &Vector3<f64>) -> f64 {
    match cfg {
        PickupConfig::Linear { k1, z0 } => k1 / z0 * r.z,
        PickupConfig::Quadrupole { k2, z0, g } => k2 / (2.0 * z0 * z0) * r.dot(&(g * r)),
    }
}

pub fn induced_charge(cfg: &PickupConfig, dist: &MultipoleDistribution, r: &Vector3<f64>, o: &Orientation) -> f64 {
    induced_charge_space(cfg, &space_frame_multipoles(dist, o), r)
}

pub fn induced_charge_gradient(
    cfg: &PickupConfig,
    dist: &MultipoleDistribution,
    r: &Vector3<f64>,
    o: &Orientation,
) -> Vector3<f64> {
    induced_charge_gradient_space(cfg, &space_frame_multipoles(dist, o), r)
}

/// Torque per unit voltage `T`; the rotational derivative of `Q_ind` about
/// a unit axis `u` is `u . T`.
pub fn torque_per_voltage(
    cfg: &PickupConfig,
    dist: &MultipoleDistribution,
    r: &Vector3<f64>,
    o: &Orientation,
) -> Vector3<f64> {
    torque_per_voltage_space(cfg, &space_frame_multipoles(dist, o), r)
}

pub(crate) fn induced_charge_space(cfg: &PickupConfig, m: &SpaceMultipoles, r: &Vector3<f64>) -> f64 {
    match cfg {
        PickupConfig::Linear { k1, z0 } => k1 / z0 * (m.q * r.z + m.p.z),
        PickupConfig::Quadrupole { k2, z0, g } => {
            let gr = g * r;
            // sum_i g_i g_i . Q g_i = tr(G Q)
            let quad = (g * m.quad).trace() / 3.0;
            k2 / (2.0 * z0 * z0) * (m.q * r.dot(&gr) + 2.0 * m.p.dot(&gr) + quad)
        }
    }
}

pub(crate) fn induced_charge_gradient_space(cfg: &PickupConfig, m: &SpaceMultipoles, r: &Vector3<f64>) -> Vector3<f64> {
    match cfg {
        PickupConfig::Linear { k1, z0 } => Vector3::z() * (k1 / z0 * m.q),
        PickupConfig::Quadrupole { k2, z0, g } => g * (r * m.q + m.p) * (k2 / (z0 * z0)),
    }
}

pub(crate) fn torque_per_voltage_space(cfg: &PickupConfig, m: &SpaceMultipoles, r: &Vector3<f64>) -> Vector3<f64> {
    match cfg {
        PickupConfig::Linear { k1, z0 } => m.p.cross(&Vector3::z()) * (k1 / z0),
        PickupConfig::Quadrupole { k2, z0, g } => {
            (m.p.cross(&(g * r)) - quadrupole_cross(g, &m.quad) / 3.0) * (k2 / (z0 * z0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Resistor in series with the inductor; voltage noise.
    Series,
    /// Resistor across the capacitor; current noise.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitSpec {
    pub topology: Topology,
    pub resistance: f64,
    pub inductance: f64,
    pub capacitance: f64,
    pub temperature: f64,
}

impl CircuitSpec {
    pub fn new(topology: Topology, resistance: f64, inductance: f64, capacitance: f64, temperature: f64) -> Result<Self> {
        for (name, v) in [("R", resistance), ("L", inductance), ("C", capacitance)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v:e}")));
            }
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::param("T", "must be non-negative"));
        }
        Ok(CircuitSpec { topology, resistance, inductance, capacitance, temperature })
    }

    pub fn omega_lc(&self) -> f64 {
        1.0 / (self.inductance * self.capacitance).sqrt()
    }

    pub fn gamma_s(&self) -> f64 {
        self.resistance / self.inductance
    }

    pub fn gamma_p(&self) -> f64 {
        1.0 / (self.resistance * self.capacitance)
    }

    /// Damping rate of the topology in use.
    pub fn gamma(&self) -> f64 {
        match self.topology {
            Topology::Series => self.gamma_s(),
            Topology::Parallel => self.gamma_p(),
        }
    }

    /// White-noise intensity: `2 k_B T R` (series, V^2 s) or `2 k_B T / R`
    /// (parallel, A^2 s).
    pub fn noise_intensity(&self) -> f64 {
        match self.topology {
            Topology::Series => 2.0 * K_B * self.temperature * self.resistance,
            Topology::Parallel => 2.0 * K_B * self.temperature / self.resistance,
        }
    }

    /// Circuit impedance seen by the capacitor.
    pub fn impedance(&self, omega: f64) -> Complex64 {
        let (r, l) = (self.resistance, self.inductance);
        match self.topology {
            Topology::Series => Complex64::new(r, omega * l),
            Topology::Parallel => 1.0 / Complex64::new(1.0 / r, -1.0 / (omega * l)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CircuitState {
    pub q: f64,
    pub phi: f64,
}

/// Capacitor voltage `U_z`.
pub fn capacitor_voltage(spec: &CircuitSpec, state: &CircuitState, q_ind: f64) -> f64 {
    (state.q + q_ind) / spec.capacitance
}

/// Right-hand side `(dQ/dt, dPhi/dt)`. `noise` is the instantaneous value of
/// the fluctuating source: `U_fl` for series, `I_fl` for parallel.
pub fn circuit_rhs(spec: &CircuitSpec, state: &CircuitState, q_ind: f64, noise: f64) -> (f64, f64) {
    circuit_rhs_with(spec, state, q_ind, noise, true)
}

pub(crate) fn circuit_rhs_with(
    spec: &CircuitSpec,
    state: &CircuitState,
    q_ind: f64,
    noise: f64,
    dissipative: bool,
) -> (f64, f64) {
    let u = capacitor_voltage(spec, state, q_ind);
    let damp = if dissipative { 1.0 } else { 0.0 };
    match spec.topology {
        Topology::Series => (
            state.phi / spec.inductance,
            -u - damp * spec.resistance * state.phi / spec.inductance + noise,
        ),
        Topology::Parallel => (state.phi / spec.inductance - damp * u / spec.resistance + noise, -u),
    }
}

/// Energy stored in the circuit, `Phi^2/2L + (Q+Q_ind)^2/2C`.
pub fn circuit_energy(spec: &CircuitSpec, state: &CircuitState, q_ind: f64) -> f64 {
    let qt = state.q + q_ind;
    state.phi * state.phi / (2.0 * spec.inductance) + qt * qt / (2.0 * spec.capacitance)
}

/// Phase-space contraction rate of the quasi-adiabatic series circuit,
/// `R [ |dQ_ind/dR|^2 / m + T . I^-1 T ]`.
pub fn adiabatic_contraction_rate(
    cfg: &PickupConfig,
    particle: &Particle,
    r: &Vector3<f64>,
    o: &Orientation,
    resistance: f64,
) -> f64 {
    let m = space_frame_multipoles(&particle.dist, o);
    let inv_i = inverse_inertia(o, &particle.inertia);
    match cfg {
        PickupConfig::Linear { k1, z0 } => {
            let pe = m.p.cross(&Vector3::z());
            resistance * k1 * k1 / (z0 * z0) * (m.q * m.q / particle.mass + pe.dot(&(inv_i * pe)))
        }
        PickupConfig::Quadrupole { k2, z0, g } => {
            let grad = g * (r * m.q + m.p);
            let t = m.p.cross(&(g * r)) - quadrupole_cross(g, &m.quad) / 3.0;
            resistance * k2 * k2 / z0.powi(4) * (grad.norm_squared() / particle.mass + t.dot(&(inv_i * t)))
        }
    }
}

/// `Re[Z / (1 + i omega C Z)]`, the effective resistance seen by a
/// mechanical mode at `omega`.
pub fn effective_resistance(z: Complex64, capacitance: f64, omega: f64) -> f64 {
    (z / (1.0 + Complex64::i() * omega * capacitance * z)).re
}

/// Damping rate of a harmonic center-of-mass mode at `omega0` coupled to
/// the circuit through a linear pickup (closed forms).
pub fn damping_rate_vs_frequency(spec: &CircuitSpec, k1: f64, z0: f64, q: f64, mass: f64, omega0: f64) -> f64 {
    let pre = q * q * k1 * k1 / (spec.capacitance * mass * z0 * z0);
    let w2 = omega0 * omega0;
    let wlc2 = spec.omega_lc().powi(2);
    let detune = (w2 - wlc2).powi(2);
    match spec.topology {
        Topology::Series => {
            let g = spec.gamma_s();
            pre * g * wlc2 / (w2 * g * g + detune)
        }
        Topology::Parallel => {
            let g = spec.gamma_p();
            pre * g * w2 / (w2 * g * g + detune)
        }
    }
}

/// Tabulated complex impedance `Z(omega)`, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceTable {
    points: Vec<(f64, Complex64)>,
}

impl ImpedanceTable {
    pub fn new(mut points: Vec<(f64, Complex64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("impedance", "table is empty"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("impedance", "duplicate frequencies"));
        }
        Ok(ImpedanceTable { points })
    }

    pub fn at(&self, omega: f64) -> Result<Complex64> {
        let pts = &self.points;
        let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
        if omega < lo || omega > hi {
            return Err(Error::Domain(format!("omega {omega:e} outside table [{lo:e}, {hi:e}]")));
        }
        let k = pts.partition_point(|p| p.0 <= omega);
        if k == pts.len() {
            return Ok(pts[k - 1].1);
        }
        let (w0, z0) = pts[k - 1];
        let (w1, z1) = pts[k];
        let s = (omega - w0) / (w1 - w0);
        Ok(z0 + (z1 - z0) * s)
    }
}

/// Damping rate at `omega0` for an arbitrary impedance in series with
/// the pickup capacitance.
pub fn damping_rate_from_impedance(
    z: &ImpedanceTable,
    capacitance: f64,
    k1: f64,
    z0: f64,
    q: f64,
    mass: f64,
    omega0: f64,
) -> Result<f64> {
    let re = effective_resistance(z.at(omega0)?, capacitance, omega0);
    Ok(q * q * k1 * k1 / (mass * z0 * z0) * re)
}

/// Linearized friction and diffusion tensors for small oscillations about
/// an equilibrium `(r, o)` at mode frequency `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionDiffusion {
    pub gamma_cm: Matrix3<f64>,
    pub gamma_rot: Matrix3<f64>,
    pub d_cm: Matrix3<f64>,
    pub d_rot: Matrix3<f64>,
}

pub fn friction_diffusion_tensors(
    spec: &CircuitSpec,
    cfg: &PickupConfig,
    particle: &Particle,
    r: &Vector3<f64>,
    o: &Orientation,
    omega: f64,
) -> FrictionDiffusion {
    let re = effective_resistance(spec.impedance(omega), spec.capacitance, omega);
    let m = space_frame_multipoles(&particle.dist, o);
    let grad = induced_charge_gradient_space(cfg, &m, r);
    let t = torque_per_voltage_space(cfg, &m, r);
    let (inertia, inv_i) = inertia_tensor(o, &particle.inertia);
    let gamma_cm = grad * grad.transpose() * (re / particle.mass);
    let gamma_rot = t * t.transpose() * inv_i * re;
    let kt = K_B * spec.temperature;
    FrictionDiffusion {
        gamma_cm,
        gamma_rot,
        d_cm: gamma_cm * (kt * particle.mass),
        d_rot: gamma_rot * inertia * kt,
    }
}

#[cfg(test)]
mod tests;
