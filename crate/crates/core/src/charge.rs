//! Particle charge distributions: body-frame multipoles, point-charge
//! reductions and closed forms for metallic spheroids.
//!
//! Quadrupole convention: `Q_ij = sum_k q_k (3 r_ki r_kj - r_k^2 delta_ij)`.
//! A cylindrically symmetric quadrupole is `Q3 (3 m (x) m - 1)` with
//! `Q3 = Q33 / 2`.

use nalgebra::{Matrix3, Vector3};

use crate::constants::FOUR_PI_EPS0;
use crate::error::{Error, Result};
use crate::rotor::{InertiaSpec, Orientation};
use crate::trap::TrapGeometry;

/// Total charge plus dipole and quadrupole moments in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultipoleDistribution {
    q: f64,
    p_body: Vector3<f64>,
    q_body: Matrix3<f64>,
}

/// Multipoles expressed in the space frame for a given orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceMultipoles {
    pub q: f64,
    pub p: Vector3<f64>,
    pub quad: Matrix3<f64>,
}

impl MultipoleDistribution {
    pub fn new(q: f64, p_body: Vector3<f64>, q_body: Matrix3<f64>) -> Result<Self> {
        let scale = q_body.amax();
        if !(q.is_finite() && p_body.iter().all(|x| x.is_finite()) && scale.is_finite()) {
            return Err(Error::param("multipoles", "non-finite entry"));
        }
        if (q_body - q_body.transpose()).amax() > 1e-12 * scale {
            return Err(Error::param("quadrupole", "tensor is not symmetric"));
        }
        if q_body.trace().abs() > 1e-12 * scale {
            return Err(Error::param("quadrupole", format!("trace {:e} is not zero", q_body.trace())));
        }
        Ok(MultipoleDistribution { q, p_body, q_body })
    }

    /// Point charge (no dipole, no quadrupole).
    pub fn monopole(q: f64) -> Self {
        MultipoleDistribution { q, p_body: Vector3::zeros(), q_body: Matrix3::zeros() }
    }

    /// Builds the quadrupole from its five independent components, with
    /// `Q33 = -Q11 - Q22`.
    pub fn from_components(
        q: f64,
        p_body: Vector3<f64>,
        [q11, q12, q13, q22, q23]: [f64; 5],
    ) -> Result<Self> {
        let q33 = -q11 - q22;
        let m = Matrix3::new(q11, q12, q13, q12, q22, q23, q13, q23, q33);
        Self::new(q, p_body, m)
    }

    /// Cylindrically symmetric distribution about the body 3-axis.
    pub fn symmetric(q: f64, p3: f64, q3: f64) -> Self {
        MultipoleDistribution {
            q,
            p_body: Vector3::new(0.0, 0.0, p3),
            q_body: Matrix3::from_diagonal(&Vector3::new(-q3, -q3, 2.0 * q3)),
        }
    }

    pub fn charge(&self) -> f64 {
        self.q
    }
    pub fn dipole_body(&self) -> &Vector3<f64> {
        &self.p_body
    }
    pub fn quadrupole_body(&self) -> &Matrix3<f64> {
        &self.q_body
    }

    /// True when all moments vanish except possibly the charge.
    pub fn is_monopole(&self) -> bool {
        self.p_body == Vector3::zeros() && self.q_body == Matrix3::zeros()
    }
}

/// Rotates the body-frame moments into the space frame.
pub fn space_frame_multipoles(dist: &MultipoleDistribution, o: &Orientation) -> SpaceMultipoles {
    let r = o.matrix();
    SpaceMultipoles {
        q: dist.q,
        p: r * dist.p_body,
        quad: r * dist.q_body * r.transpose(),
    }
}

/// Discrete charges at body-frame positions relative to the center of mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PointChargeSet {
    charges: Vec<(f64, Vector3<f64>)>,
}

impl PointChargeSet {
    pub fn new(charges: Vec<(f64, Vector3<f64>)>) -> Result<Self> {
        if charges.is_empty() {
            return Err(Error::param("point charges", "at least one charge is required"));
        }
        if charges.iter().any(|(c, r)| !c.is_finite() || r.iter().any(|x| !x.is_finite())) {
            return Err(Error::param("point charges", "non-finite entry"));
        }
        Ok(PointChargeSet { charges })
    }

    pub fn charges(&self) -> &[(f64, Vector3<f64>)] {
        &self.charges
    }

    /// Space-frame charge positions for center `r_cm` and orientation `o`.
    pub fn placed(&self, r_cm: &Vector3<f64>, o: &Orientation) -> Vec<(f64, Vector3<f64>)> {
        self.charges.iter().map(|(c, r)| (*c, r_cm + o.matrix() * r)).collect()
    }
}

pub fn multipoles_from_point_charges(set: &PointChargeSet) -> MultipoleDistribution {
    let mut q = 0.0;
    let mut p = Vector3::zeros();
    let mut quad = Matrix3::zeros();
    for (c, r) in &set.charges {
        q += c;
        p += r * *c;
        quad += (r * r.transpose() * 3.0 - Matrix3::identity() * r.norm_squared()) * *c;
    }
    // remove rounding asymmetry and trace
    let quad = (quad + quad.transpose()) * 0.5;
    let quad = quad - Matrix3::identity() * (quad.trace() / 3.0);
    MultipoleDistribution { q, p_body: p, q_body: quad }
}

/// Surface charge density of an isolated conducting prolate/oblate spheroid
/// `(x^2 + y^2)/r^2 + z^2/a^2 = 1` carrying total charge `q`, at a surface
/// point given in the body frame.
pub fn spheroid_surface_density(q: f64, a: f64, r: f64, point: &Vector3<f64>) -> f64 {
    let rho2 = point.x * point.x + point.y * point.y;
    let s = rho2 / r.powi(4) + point.z * point.z / a.powi(4);
    q / (4.0 * std::f64::consts::PI * a * r * r) / s.sqrt()
}

/// Permanent quadrupole of a charged metallic spheroid with half-length `a`
/// along the body 3-axis and radius `r`: `Q3 = q (a^2 - r^2) / 3`.
pub fn spheroid_quadrupole(q: f64, a: f64, r: f64) -> Result<MultipoleDistribution> {
    if !(a > 0.0 && r > 0.0) {
        return Err(Error::param("spheroid", "a and r must be positive"));
    }
    let d2 = a * a - r * r;
    Ok(MultipoleDistribution::symmetric(q, 0.0, q * d2 / 3.0))
}

/// Quadrupole induced on a nearly spherical conductor of radius `a` at the
/// center of a Paul trap held at voltage `u`. Diagnostic only; it is not fed
/// back into the dynamics.
pub fn induced_quadrupole(u: f64, a: f64, trap: &TrapGeometry) -> Matrix3<f64> {
    trap.a_tensor() * (-FOUR_PI_EPS0 * u * a.powi(5) / trap.ell0().powi(2))
}

/// `artanh(x) - x`, accurate also for small `x`.
fn artanh_minus_x(x: f64) -> f64 {
    if x < 0.1 {
        // x^3/3 + x^5/5 + ...; 12 terms reach 1e-25 relative at x = 0.1
        let x2 = x * x;
        let mut term = x * x2;
        let mut sum = 0.0;
        for k in 1..=12 {
            sum += term / (2 * k + 1) as f64;
            term *= x2;
        }
        sum
    } else {
        x.atanh() - x
    }
}

/// Maximum polarizability of a conducting prolate spheroid (field along the
/// long axis). Requires `a > r`.
pub fn max_polarizability(a: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) || !(a > r) {
        return Err(Error::Domain(format!(
            "polarizability formula needs a prolate spheroid (a > r > 0), got a = {a:e}, r = {r:e}"
        )));
    }
    let d = (a * a - r * r).sqrt();
    // ln((a + d)/r) = artanh(d/a)
    let denom = artanh_minus_x(d / a);
    Ok(FOUR_PI_EPS0 * d.powi(3) / 3.0 / denom)
}

/// Rough permanent dipole of two joined half-spheroids of lengths `a` and
/// `a + delta_a` carrying charge `q`: `q delta_a / 8`. An order-of-magnitude
/// estimate, not a derived result.
pub fn joined_half_spheroid_dipole(q: f64, delta_a: f64) -> f64 {
    q * delta_a / 8.0
}

/// A rigid particle: charge distribution, principal moments and mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub dist: MultipoleDistribution,
    pub inertia: InertiaSpec,
    pub mass: f64,
}

impl Particle {
    pub fn new(dist: MultipoleDistribution, inertia: InertiaSpec, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::param("mass", format!("must be positive, got {mass:e}")));
        }
        Ok(Particle { dist, inertia, mass })
    }

    pub fn charge(&self) -> f64 {
        self.dist.charge()
    }
}

/// Cylindrically symmetric particle: charge, axial dipole and quadrupole,
/// plus the two distinct moments of inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricParticleSpec {
    pub q: f64,
    pub p3: f64,
    pub q3: f64,
    pub i_perp: f64,
    pub i3: f64,
}

impl SymmetricParticleSpec {
    pub fn new(q: f64, p3: f64, q3: f64, i_perp: f64, i3: f64) -> Result<Self> {
        InertiaSpec::symmetric(i_perp, i3)?;
        Ok(SymmetricParticleSpec { q, p3, q3, i_perp, i3 })
    }

    pub fn distribution(&self) -> MultipoleDistribution {
        MultipoleDistribution::symmetric(self.q, self.p3, self.q3)
    }

    pub fn inertia(&self) -> InertiaSpec {
        InertiaSpec::symmetric(self.i_perp, self.i3).expect("validated on construction")
    }

    pub fn particle(&self, mass: f64) -> Result<Particle> {
        Particle::new(self.distribution(), self.inertia(), mass)
    }
}
