//! Point charge on a trap axis with gas friction: a one-dimensional Langevin
//! equation `dP = F(z,t) dt - Gamma P dt + sqrt(2 m Gamma k_B T) dW`.
//!
//! The axial force of a ring or linear trap does not depend on the other
//! coordinates, so long equilibration runs can skip the 3D machinery.

use super::integrate::NoiseStream;
use crate::constants::K_B;
use crate::error::{Error, Result};
use crate::trap::TrapGeometry;

#[derive(Debug, Clone, PartialEq)]
pub struct AxialLangevin {
    mass: f64,
    /// `F = -(k_dc + k_ac cos(omega t)) z + f0`.
    k_dc: f64,
    k_ac: f64,
    f0: f64,
    gamma: f64,
    temperature: f64,
    dt: f64,
    steps_per_cycle: usize,
    /// `cos(omega t)` on the half-step grid of one cycle.
    table: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxialState {
    pub z: f64,
    pub p: f64,
    /// Steps taken since `t = 0`.
    pub step: u64,
}

impl AxialLangevin {
    /// Motion of charge `q` along `e_z`, which must be a principal axis of
    /// the trap tensors.
    pub fn from_trap(
        g: &TrapGeometry,
        q: f64,
        mass: f64,
        gamma: f64,
        temperature: f64,
        steps_per_cycle: usize,
    ) -> Result<Self> {
        let a = g.a_tensor();
        if a[(0, 2)] != 0.0 || a[(1, 2)] != 0.0 {
            return Err(Error::param("trap", "e_z is not a principal axis"));
        }
        if steps_per_cycle < 64 {
            return Err(Error::param("steps_per_cycle", "must be at least 64"));
        }
        if !(mass > 0.0 && gamma >= 0.0 && temperature >= 0.0) {
            return Err(Error::param("axial", "mass must be positive, gamma and T non-negative"));
        }
        let l2 = g.ell0() * g.ell0();
        let mut k_dc = q * g.u_dc() * a[(2, 2)] / l2;
        if let Some(ec) = g.endcap() {
            if ec.a_ec[(0, 2)] != 0.0 || ec.a_ec[(1, 2)] != 0.0 {
                return Err(Error::param("endcap", "e_z is not a principal axis"));
            }
            k_dc += q * ec.strength() * ec.a_ec[(2, 2)];
        }
        let n = 2 * steps_per_cycle;
        let table = (0..n).map(|k| (std::f64::consts::TAU * k as f64 / n as f64).cos()).collect();
        Ok(AxialLangevin {
            mass,
            k_dc,
            k_ac: q * g.u_ac() * a[(2, 2)] / l2,
            f0: q * g.homogeneous_field().z,
            gamma,
            temperature,
            dt: g.drive_period() / steps_per_cycle as f64,
            steps_per_cycle,
            table,
        })
    }

    pub fn steps_per_cycle(&self) -> usize {
        self.steps_per_cycle
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, s: &AxialState) -> f64 {
        s.step as f64 * self.dt()
    }

    /// Drive phase index of the state within a cycle, `0..steps_per_cycle`.
    pub fn phase_index(&self, s: &AxialState) -> usize {
        (s.step % self.steps_per_cycle as u64) as usize
    }

    fn force(&self, z: f64, half_step: u64) -> f64 {
        let c = self.table[(half_step % self.table.len() as u64) as usize];
        -(self.k_dc + self.k_ac * c) * z + self.f0
    }

    /// OU half step, conservative RK4 step, OU half step.
    pub fn step(&self, s: &mut AxialState, noise: &mut NoiseStream) {
        let dt = self.dt();
        let a = (-self.gamma * dt / 2.0).exp();
        let sigma = (self.mass * K_B * self.temperature * (1.0 - a * a)).sqrt();
        s.p = s.p * a + sigma * noise.normal();

        let h = 2 * s.step;
        let inv_m = 1.0 / self.mass;
        let (z, p) = (s.z, s.p);
        let (k1z, k1p) = (p * inv_m, self.force(z, h));
        let (k2z, k2p) = ((p + 0.5 * dt * k1p) * inv_m, self.force(z + 0.5 * dt * k1z, h + 1));
        let (k3z, k3p) = ((p + 0.5 * dt * k2p) * inv_m, self.force(z + 0.5 * dt * k2z, h + 1));
        let (k4z, k4p) = ((p + dt * k3p) * inv_m, self.force(z + dt * k3z, h + 2));
        s.z = z + dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        s.p = p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        s.step += 1;

        s.p = s.p * a + sigma * noise.normal();
    }
}
