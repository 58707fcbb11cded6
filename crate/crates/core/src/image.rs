//! Image charges induced in a grounded flat-plate capacitor with plates at
//! `z = +-z0`, to quadrupole order in the particle's multipoles and second
//! order in its displacement from the center.

use nalgebra::Vector3;

use crate::charge::{space_frame_multipoles, MultipoleDistribution, PointChargeSet, SpaceMultipoles};
use crate::constants::{FOUR_PI_EPS0, ZETA_3};
use crate::error::{Error, Result};
use crate::rotor::Orientation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateCapacitor {
    z0: f64,
}

impl PlateCapacitor {
    /// Plates at `z = +-z0` (normal `e_z`).
    pub fn new(z0: f64) -> Result<Self> {
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(Error::param("z0", "must be positive"));
        }
        Ok(PlateCapacitor { z0 })
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// `zeta(3) / (64 pi eps0 z0^3)`.
    pub fn unit(&self) -> f64 {
        ZETA_3 / (16.0 * FOUR_PI_EPS0 * self.z0.powi(3))
    }
}

pub fn image_potential(cap: &PlateCapacitor, dist: &MultipoleDistribution, r: &Vector3<f64>, o: &Orientation) -> f64 {
    image_potential_space(cap, &space_frame_multipoles(dist, o), r)
}

pub fn image_force_torque(
    cap: &PlateCapacitor,
    dist: &MultipoleDistribution,
    r: &Vector3<f64>,
    o: &Orientation,
) -> (Vector3<f64>, Vector3<f64>) {
    image_force_torque_space(cap, &space_frame_multipoles(dist, o), r)
}

pub(crate) fn image_potential_space(cap: &PlateCapacitor, m: &SpaceMultipoles, r: &Vector3<f64>) -> f64 {
    let (q, z, pz) = (m.q, r.z, m.p.z);
    -cap.unit() * (7.0 * q * q * z * z + 2.5 * pz * pz + 14.0 * q * z * pz + 1.5 * q * m.quad[(2, 2)])
}

pub(crate) fn image_force_torque_space(
    cap: &PlateCapacitor,
    m: &SpaceMultipoles,
    r: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let u = cap.unit();
    let ez = Vector3::z();
    let f = ez * (14.0 * u * m.q * (m.q * r.z + m.p.z));
    // 7 q u/2 [ (e_z.R) p + 5/(14 q) (e_z.p) p + 3/14 Q e_z ] x e_z, without dividing by q
    let lever = m.p * (14.0 * u * m.q * r.z + 5.0 * u * m.p.z) + m.quad * ez * (3.0 * u * m.q);
    (f, lever.cross(&ez))
}

/// Sums over the truncated image series for a set of point charges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSums {
    pub force: Vector3<f64>,
    /// Torque about the supplied center of mass.
    pub torque: Vector3<f64>,
    /// Interaction energy with the images, `(1/2) sum_k q_k phi_im(r_k)`,
    /// minus its value for the total charge placed at the origin. To second
    /// order this is the closed form plus the constant
    /// `-(3/2) zeta(3) |p|^2 / (64 pi eps0 z0^3)`, which the closed form
    /// omits.
    pub energy: f64,
}

/// Image positions and signs of a source at `r0`, shells `1..=n_max`.
fn images(z0: f64, r0: &Vector3<f64>, n: usize) -> [(f64, Vector3<f64>); 4] {
    let mirrored = Vector3::new(r0.x, r0.y, -r0.z);
    let even = 4.0 * n as f64 * z0;
    let odd = (4.0 * n as f64 - 2.0) * z0;
    [
        (1.0, r0 + Vector3::z() * even),
        (1.0, r0 - Vector3::z() * even),
        (-1.0, mirrored + Vector3::z() * odd),
        (-1.0, mirrored - Vector3::z() * odd),
    ]
}

/// Electric field at `x` of every image of the `sources`.
pub fn image_series_field(cap: &PlateCapacitor, sources: &[(f64, Vector3<f64>)], x: &Vector3<f64>, n_max: usize) -> Vector3<f64> {
    let mut e = Vector3::zeros();
    for (q, r0) in sources {
        // innermost shells last so the small terms accumulate first
        for n in (1..=n_max).rev() {
            for (sign, s) in images(cap.z0, r0, n) {
                let d = x - s;
                e += d * (sign * q / d.norm().powi(3));
            }
        }
    }
    e / FOUR_PI_EPS0
}

/// Brute-force image-series force, torque and energy of a rigid set of
/// point charges placed at `r_cm` with orientation `o`.
pub fn image_series(
    cap: &PlateCapacitor,
    set: &PointChargeSet,
    r_cm: &Vector3<f64>,
    o: &Orientation,
    n_max: usize,
) -> Result<ImageSums> {
    if n_max == 0 {
        return Err(Error::param("n_max", "at least one image shell is required"));
    }
    let placed = set.placed(r_cm, o);
    let mut force = Vector3::zeros();
    let mut torque = Vector3::zeros();
    for (q, x) in &placed {
        let f = image_series_field(cap, &placed, x, n_max) * *q;
        force += f;
        torque += (x - r_cm).cross(&f);
    }

    // 1/|x - s| - 1/|s0| with s = s0 + d evaluated without cancellation;
    // s0 is the matching image of a source at the origin.
    let mut energy = 0.0;
    for (qk, x) in &placed {
        for (ql, y) in &placed {
            let mut acc = 0.0;
            for n in (1..=n_max).rev() {
                let at_origin = images(cap.z0, &Vector3::zeros(), n);
                for ((sign, s), (_, s0)) in images(cap.z0, y, n).into_iter().zip(at_origin) {
                    let w = x - (s - s0);
                    let a = (w - s0).norm();
                    let b = s0.norm();
                    let num = 2.0 * s0.dot(&w) - w.norm_squared();
                    acc += sign * num / (a * b * (a + b));
                }
            }
            energy += 0.5 * qk * ql * acc;
        }
    }
    Ok(ImageSums { force, torque, energy: energy / FOUR_PI_EPS0 })
}
