//! Parameter sets of the worked examples.

use std::f64::consts::{SQRT_2, TAU};

use nalgebra::Vector3;

use crate::charge::{MultipoleDistribution, Particle, SymmetricParticleSpec};
use crate::circuit::{CircuitSpec, Topology};
use crate::constants::{AMU, ELEMENTARY_CHARGE as E};
use crate::dynamics::GasCoupling;
use crate::error::Result;
use crate::linear::{build_model, LinearModel};
use crate::rotor::InertiaSpec;
use crate::trap::{Endcap, TrapGeometry};

/// Asymmetric 10^6 amu silicon rotor with `q = 200 e`, `l = 12 nm`.
pub fn fig2_particle() -> Particle {
    let q = 200.0 * E;
    let l = 12e-9;
    let dist = MultipoleDistribution::from_components(
        q,
        Vector3::new(0.0025, 0.0022, 0.007) * q * l,
        [-0.13, 0.08, 0.24, -0.04, 0.03].map(|x| x * q * l * l),
    )
    .expect("finite components");
    let i0 = 2.8e-38;
    let inertia = InertiaSpec::new(i0, 0.92 * i0, 0.55 * i0).expect("positive moments");
    Particle::new(dist, inertia, 1e6 * AMU).expect("positive mass")
}

/// Ring trap driven at 750 V and 75 MHz.
pub fn fig2_trap() -> TrapGeometry {
    TrapGeometry::ring(0.25e-3 * SQRT_2, 0.0, 750.0, TAU * 75e6).expect("valid ring trap")
}

/// Dimensionless thermal-equilibrium parameters, all in units of `m omega^2 l0^2` and
/// `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig4 {
    /// `q U_ac / (m omega^2 l0^2)`
    pub drive: f64,
    /// `k_B T / (m omega^2 l0^2)`
    pub temperature: f64,
    /// `Gamma / omega`
    pub damping: f64,
}

pub const FIG4: Fig4 = Fig4 { drive: 0.0034, temperature: 0.034, damping: 0.02 };

pub const FIG5_U_EC: f64 = 8.24;
pub const FIG5_INDUCTANCE: f64 = 0.565;
pub const FIG5_T_CIRCUIT: f64 = 4.0;
pub const FIG5_T_GAS: f64 = 300.0;
/// Pickup factor `k` of the endcap pickup.
pub const FIG5_K: f64 = 0.4;
/// Time of the circuit switch from center-of-mass to rotational cooling.
pub const FIG5_SWITCH: f64 = 45.0;

pub fn fig5_ell0() -> f64 {
    250e-6 * SQRT_2
}

/// Pickup plate distance, `z0 = l_ec / 2 = l0`.
pub fn fig5_z0() -> f64 {
    fig5_ell0()
}

/// Linear trap with floating endcaps at `U_ec`.
pub fn fig5_trap_with(u_ec: f64) -> Result<TrapGeometry> {
    let ell0 = fig5_ell0();
    let ec = Endcap::along_z(2.0 * ell0, u_ec, 1.0)?;
    TrapGeometry::linear(ell0, 5000.0, TAU * 750e3, Some(ec))
}

pub fn fig5_trap() -> TrapGeometry {
    fig5_trap_with(FIG5_U_EC).expect("valid linear trap")
}

/// Silicon rod with `q = 10^5 e`, `l = 2500 nm`; `I_3` is not given and
/// only enters through the spin about the symmetry axis.
pub fn fig5_particle() -> SymmetricParticleSpec {
    let q = 1e5 * E;
    let l = 2.5e-6;
    SymmetricParticleSpec::new(q, 0.1 * q * l, 0.15 * q * l * l, 3.52e-27, 1.0e-27).expect("positive moments")
}

pub fn fig5_mass() -> f64 {
    3.5e12 * AMU
}

/// Circuit and gas settings of the three stages of the cooling protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig5Stage {
    /// Thermalized in 0.1 mbar of gas, off-resonant circuit.
    Hot,
    /// Circuit resonant with the `z` mode, high vacuum.
    CenterOfMass,
    /// Circuit resonant with the `beta` mode, high vacuum.
    Rotation,
}

impl Fig5Stage {
    pub fn circuit(self) -> CircuitSpec {
        let (r, c) = match self {
            Fig5Stage::Hot => (2e6, 5.8e-9),
            Fig5Stage::CenterOfMass => (2e6, 10e-9),
            Fig5Stage::Rotation => (11.15e6, 1.794e-9),
        };
        CircuitSpec::new(Topology::Parallel, r, FIG5_INDUCTANCE, c, FIG5_T_CIRCUIT).expect("positive parameters")
    }

    /// Gas damping with `Gamma_z` on every axis and `Gamma_beta` about every
    /// body axis.
    pub fn gas(self) -> GasCoupling {
        let (gz, gb) = match self {
            Fig5Stage::Hot => (44.5, 77.8),
            _ => (4.5e-6, 7.8e-6),
        };
        GasCoupling::isotropic(gz, gb, FIG5_T_GAS).expect("non-negative rates")
    }
}

/// Linearized rod model of one protocol stage.
pub fn fig5_model(stage: Fig5Stage) -> Result<LinearModel> {
    build_model(&fig5_trap(), FIG5_K, fig5_z0(), &fig5_particle(), fig5_mass(), &stage.circuit(), &stage.gas())
}
