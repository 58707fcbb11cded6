//! Time integration of the particle, optionally coupled to a pickup circuit
//! and a thermal gas.
//!
//! The exact dynamics use the time-dependent trap field; the effective
//! dynamics use the cycle-averaged potential and ignore the circuit.

mod axial;
mod integrate;

pub use axial::{AxialLangevin, AxialState};
pub use integrate::{
    run_ensemble, run_trajectory, step_effective, step_exact, step_stochastic, Dynamics, IntegratorConfig,
    NoiseScheme, NoiseStream, Trajectory,
};

use nalgebra::{Matrix3, Vector3};

use crate::charge::{space_frame_multipoles, Particle, SpaceMultipoles};
use crate::circuit::{
    circuit_energy, induced_charge_gradient_space, induced_charge_space, torque_per_voltage_space, CircuitSpec,
    CircuitState, PickupConfig,
};
use crate::error::{Error, Result};
use crate::image::{image_potential_space, PlateCapacitor};
use crate::rotor::{inverse_inertia, kinetic_energy_of, Orientation};
use crate::trap::{effective_potential_space, trap_potential_space, TrapGeometry};

/// Pickup electrode, the circuit it drives, and optionally the image
/// interaction of the plate capacitor forming a linear pickup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub pickup: PickupConfig,
    pub circuit: CircuitSpec,
    pub images: Option<PlateCapacitor>,
}

impl Coupling {
    pub fn new(pickup: PickupConfig, circuit: CircuitSpec) -> Self {
        Coupling { pickup, circuit, images: None }
    }

    /// Adds the image force and torque of the plates; requires a linear
    /// pickup.
    pub fn with_images(mut self) -> Result<Self> {
        match self.pickup {
            PickupConfig::Linear { z0, .. } => {
                self.images = Some(PlateCapacitor::new(z0)?);
                Ok(self)
            }
            PickupConfig::Quadrupole { .. } => {
                Err(Error::param("images", "image charges are modelled for plate capacitors only"))
            }
        }
    }
}

/// Linear gas friction with matching thermal noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasCoupling {
    /// Center-of-mass damping rates along the space axes.
    pub gamma_cm: Vector3<f64>,
    /// Rotational damping rates about the body axes.
    pub gamma_rot: Vector3<f64>,
    pub temperature: f64,
}

impl GasCoupling {
    pub fn new(gamma_cm: Vector3<f64>, gamma_rot: Vector3<f64>, temperature: f64) -> Result<Self> {
        if gamma_cm.iter().chain(gamma_rot.iter()).any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::param("gamma", "rates must be non-negative"));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::param("T_gas", "must be non-negative"));
        }
        Ok(GasCoupling { gamma_cm, gamma_rot, temperature })
    }

    pub fn isotropic(gamma_cm: f64, gamma_rot: f64, temperature: f64) -> Result<Self> {
        Self::new(Vector3::repeat(gamma_cm), Vector3::repeat(gamma_rot), temperature)
    }
}

/// Everything that acts on the particle.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub particle: Particle,
    pub trap: TrapGeometry,
    /// Static harmonic confinement `V = r.K r / 2` about the origin.
    pub harmonic: Option<Matrix3<f64>>,
    pub coupling: Option<Coupling>,
    pub gas: Option<GasCoupling>,
    /// Resistive damping of the circuit; switched off for conservation
    /// checks.
    pub dissipative: bool,
}

impl System {
    pub fn new(particle: Particle, trap: TrapGeometry) -> Self {
        System { particle, trap, harmonic: None, coupling: None, gas: None, dissipative: true }
    }

    pub fn with_harmonic(mut self, k: Matrix3<f64>) -> Self {
        self.harmonic = Some(k);
        self
    }

    pub fn with_coupling(mut self, c: Coupling) -> Self {
        self.coupling = Some(c);
        self
    }

    pub fn with_gas(mut self, g: GasCoupling) -> Self {
        self.gas = Some(g);
        self
    }

    pub fn lossless(mut self) -> Self {
        self.dissipative = false;
        self
    }

    /// Induced charge at a configuration, zero without a pickup.
    pub fn induced_charge(&self, r: &Vector3<f64>, o: &Orientation) -> f64 {
        match &self.coupling {
            Some(c) => induced_charge_space(&c.pickup, &space_frame_multipoles(&self.particle.dist, o), r),
            None => 0.0,
        }
    }

    /// Static potentials shared by the exact and effective dynamics.
    pub(crate) fn static_potential(&self, m: &SpaceMultipoles, r: &Vector3<f64>) -> f64 {
        let mut v = 0.0;
        if let Some(k) = &self.harmonic {
            v += 0.5 * r.dot(&(k * r));
        }
        if let Some(cap) = self.coupling.as_ref().and_then(|c| c.images.as_ref()) {
            v += image_potential_space(cap, m, r);
        }
        v
    }
}

/// Particle and circuit phase-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub r: Vector3<f64>,
    pub p: Vector3<f64>,
    pub orientation: Orientation,
    /// Space-frame angular momentum.
    pub j: Vector3<f64>,
    pub circuit: CircuitState,
    /// Work done on the particle by the explicit time dependence of the
    /// drive, `int dV_tr/dt dt`; `H - drive_work` is conserved without
    /// dissipation.
    pub drive_work: f64,
}

impl SystemState {
    /// Particle at rest with an uncharged, current-free circuit.
    pub fn at_rest(r: Vector3<f64>, orientation: Orientation) -> Self {
        SystemState {
            t: 0.0,
            r,
            p: Vector3::zeros(),
            orientation,
            j: Vector3::zeros(),
            circuit: CircuitState::default(),
            drive_work: 0.0,
        }
    }

    pub fn with_momenta(mut self, p: Vector3<f64>, j: Vector3<f64>) -> Self {
        self.p = p;
        self.j = j;
        self
    }
}

/// Kinetic energy of translation and rotation.
pub fn kinetic_energy(sys: &System, s: &SystemState) -> f64 {
    s.p.norm_squared() / (2.0 * sys.particle.mass) + kinetic_energy_of(&s.orientation, &s.j, &sys.particle.inertia)
}

/// `H = H_np + Phi^2/2L + (Q + Q_ind)^2/2C` with the exact trap potential.
pub fn total_energy(sys: &System, s: &SystemState) -> f64 {
    let m = space_frame_multipoles(&sys.particle.dist, &s.orientation);
    let mut h = kinetic_energy(sys, s) + trap_potential_space(&sys.trap, &m, &s.r, s.t) + sys.static_potential(&m, &s.r);
    if let Some(c) = &sys.coupling {
        h += circuit_energy(&c.circuit, &s.circuit, induced_charge_space(&c.pickup, &m, &s.r));
    }
    h
}

/// Macromotion energy: kinetic energy plus effective and static potentials.
pub fn effective_energy(sys: &System, s: &SystemState) -> f64 {
    let m = space_frame_multipoles(&sys.particle.dist, &s.orientation);
    let inv_i = inverse_inertia(&s.orientation, &sys.particle.inertia);
    kinetic_energy(sys, s)
        + effective_potential_space(&sys.trap, &m, sys.particle.mass, &inv_i, &s.r)
        + sys.static_potential(&m, &s.r)
}

/// Canonical momenta after taking the capacitor charge `Q' = Q + Q_ind` as
/// the circuit coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimedMomenta {
    pub p: Vector3<f64>,
    /// Angular momentum built from the primed Euler momenta.
    pub j: Vector3<f64>,
    pub q: f64,
    pub phi: f64,
}

fn pickup_derivatives(c: &Coupling, m: &SpaceMultipoles, r: &Vector3<f64>) -> (f64, Vector3<f64>, Vector3<f64>) {
    (
        induced_charge_space(&c.pickup, m, r),
        induced_charge_gradient_space(&c.pickup, m, r),
        torque_per_voltage_space(&c.pickup, m, r),
    )
}

pub fn to_primed(sys: &System, s: &SystemState) -> Result<PrimedMomenta> {
    let c = sys.coupling.as_ref().ok_or_else(|| Error::param("coupling", "no circuit configured"))?;
    let m = space_frame_multipoles(&sys.particle.dist, &s.orientation);
    let (q_ind, grad, t) = pickup_derivatives(c, &m, &s.r);
    let phi = s.circuit.phi;
    Ok(PrimedMomenta { p: s.p - grad * phi, j: s.j - t * phi, q: s.circuit.q + q_ind, phi })
}

pub fn from_primed(sys: &System, r: Vector3<f64>, o: Orientation, t: f64, pm: &PrimedMomenta) -> Result<SystemState> {
    let c = sys.coupling.as_ref().ok_or_else(|| Error::param("coupling", "no circuit configured"))?;
    let m = space_frame_multipoles(&sys.particle.dist, &o);
    let (q_ind, grad, tv) = pickup_derivatives(c, &m, &r);
    Ok(SystemState {
        t,
        r,
        p: pm.p + grad * pm.phi,
        orientation: o,
        j: pm.j + tv * pm.phi,
        circuit: CircuitState { q: pm.q - q_ind, phi: pm.phi },
        drive_work: 0.0,
    })
}

/// `H'` in the primed coordinates.
pub fn total_energy_primed(sys: &System, r: &Vector3<f64>, o: &Orientation, t: f64, pm: &PrimedMomenta) -> Result<f64> {
    let c = sys.coupling.as_ref().ok_or_else(|| Error::param("coupling", "no circuit configured"))?;
    let m = space_frame_multipoles(&sys.particle.dist, o);
    let (_, grad, tv) = pickup_derivatives(c, &m, r);
    let p = pm.p + grad * pm.phi;
    let j = pm.j + tv * pm.phi;
    let circuit = &c.circuit;
    Ok(p.norm_squared() / (2.0 * sys.particle.mass)
        + kinetic_energy_of(o, &j, &sys.particle.inertia)
        + pm.phi * pm.phi / (2.0 * circuit.inductance)
        + pm.q * pm.q / (2.0 * circuit.capacitance)
        + trap_potential_space(&sys.trap, &m, r, t)
        + sys.static_potential(&m, r))
}
