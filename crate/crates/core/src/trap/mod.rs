//! Paul-trap fields: exact time-dependent force and torque, micromotion
//! amplitudes, Mathieu-type validity parameters and the effective
//! (cycle-averaged) potential with its force and torque.

mod minima;

pub use minima::{find_minima, Alignment, Minimum, MinimizerOptions};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::charge::{space_frame_multipoles, MultipoleDistribution, Particle, SpaceMultipoles, SymmetricParticleSpec};
use crate::error::{Error, Result};
use crate::rotor::{inverse_inertia, Orientation};

/// Threshold above which a Mathieu parameter is flagged as outside the
/// regime where the micro/macro separation is reliable.
pub const MATHIEU_WARNING_THRESHOLD: f64 = 0.3;

/// `sum_i a_i (a_i x Q a_i)` for `A = sum_i a_i a_i (x) a_i`, i.e. the axial
/// vector of the antisymmetric part of `A Q` (times two).
pub fn quadrupole_cross(a: &Matrix3<f64>, q: &Matrix3<f64>) -> Vector3<f64> {
    let m = a * q;
    Vector3::new(m[(1, 2)] - m[(2, 1)], m[(2, 0)] - m[(0, 2)], m[(0, 1)] - m[(1, 0)])
}

/// Static or time-dependent quadrupole potential `phi(r) = s r.A r / 2`.
#[derive(Debug, Clone, Copy)]
struct QuadPotential<'a> {
    a: &'a Matrix3<f64>,
    strength: f64,
}

impl QuadPotential<'_> {
    fn energy(&self, m: &SpaceMultipoles, r: &Vector3<f64>) -> f64 {
        let ar = self.a * r;
        self.strength * (0.5 * m.q * r.dot(&ar) + m.p.dot(&ar) + (self.a * m.quad).trace() / 6.0)
    }
    fn force(&self, m: &SpaceMultipoles, r: &Vector3<f64>) -> Vector3<f64> {
        -self.strength * (self.a * (r * m.q + m.p))
    }
    fn torque(&self, m: &SpaceMultipoles, r: &Vector3<f64>) -> Vector3<f64> {
        -self.strength * (m.p.cross(&(self.a * r)) - quadrupole_cross(self.a, &m.quad) / 3.0)
    }
}

/// DC endcap electrodes closing the axial direction of a linear trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endcap {
    pub a_ec: Matrix3<f64>,
    pub ell_ec: f64,
    pub u_ec: f64,
    pub k_ec: f64,
}

impl Endcap {
    /// Endcaps along `e_z` with geometry tensor `1 - 3 e_z (x) e_z`.
    pub fn along_z(ell_ec: f64, u_ec: f64, k_ec: f64) -> Result<Self> {
        if !(ell_ec > 0.0) {
            return Err(Error::param("ell_ec", "must be positive"));
        }
        if k_ec > 1.0 {
            return Err(Error::param("k_ec", format!("must not exceed 1, got {k_ec}")));
        }
        Ok(Endcap { a_ec: ring_tensor(), ell_ec, u_ec, k_ec })
    }

    /// Coefficient `s` of the equivalent static potential `s r.A_ec r / 2`.
    pub fn strength(&self) -> f64 {
        -2.0 * self.k_ec * self.u_ec / (self.ell_ec * self.ell_ec)
    }
}

fn ring_tensor() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -2.0))
}

/// Electrode geometry and drive of a quadrupole ion trap.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapGeometry {
    a: Matrix3<f64>,
    axes: [(f64, Vector3<f64>); 3],
    ell0: f64,
    u_dc: f64,
    u_ac: f64,
    omega_ac: f64,
    endcap: Option<Endcap>,
    e_hom: Option<Vector3<f64>>,
}

impl TrapGeometry {
    pub fn new(a: Matrix3<f64>, ell0: f64, u_dc: f64, u_ac: f64, omega_ac: f64) -> Result<Self> {
        let scale = a.amax();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param("A", "geometry tensor must be non-zero and finite"));
        }
        if (a - a.transpose()).amax() > 1e-12 * scale {
            return Err(Error::param("A", "geometry tensor must be symmetric"));
        }
        if a.trace().abs() > 1e-12 * scale {
            return Err(Error::param("A", "geometry tensor must be traceless"));
        }
        if !(ell0 > 0.0) {
            return Err(Error::param("ell0", "must be positive"));
        }
        if !(omega_ac > 0.0) {
            return Err(Error::param("omega_ac", "must be positive"));
        }
        let eig = SymmetricEigen::new(a);
        let axes = [0, 1, 2].map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()));
        Ok(TrapGeometry { a, axes, ell0, u_dc, u_ac, omega_ac, endcap: None, e_hom: None })
    }

    /// Hyperbolic ring trap, `A = 1 - 3 e_z (x) e_z`.
    pub fn ring(ell0: f64, u_dc: f64, u_ac: f64, omega_ac: f64) -> Result<Self> {
        Self::new(ring_tensor(), ell0, u_dc, u_ac, omega_ac)
    }

    /// Linear four-rod trap, `A = e_y (x) e_y - e_x (x) e_x`, optionally with
    /// endcaps.
    pub fn linear(ell0: f64, u_ac: f64, omega_ac: f64, endcap: Option<Endcap>) -> Result<Self> {
        let a = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 0.0));
        let mut g = Self::new(a, ell0, 0.0, u_ac, omega_ac)?;
        g.endcap = endcap;
        Ok(g)
    }

    pub fn with_endcap(mut self, endcap: Endcap) -> Self {
        self.endcap = Some(endcap);
        self
    }

    pub fn with_homogeneous_field(mut self, e: Vector3<f64>) -> Self {
        self.e_hom = if e == Vector3::zeros() { None } else { Some(e) };
        self
    }

    pub fn a_tensor(&self) -> &Matrix3<f64> {
        &self.a
    }
    /// Eigenpairs `(a_i, a_i)` of the geometry tensor.
    pub fn axes(&self) -> &[(f64, Vector3<f64>); 3] {
        &self.axes
    }
    pub fn ell0(&self) -> f64 {
        self.ell0
    }
    pub fn u_dc(&self) -> f64 {
        self.u_dc
    }
    pub fn u_ac(&self) -> f64 {
        self.u_ac
    }
    pub fn omega_ac(&self) -> f64 {
        self.omega_ac
    }
    pub fn endcap(&self) -> Option<&Endcap> {
        self.endcap.as_ref()
    }
    pub fn homogeneous_field(&self) -> Vector3<f64> {
        self.e_hom.unwrap_or_else(Vector3::zeros)
    }

    pub fn drive_period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_ac
    }

    /// `U(t) = U_dc + U_ac cos(omega_ac t)`.
    pub fn voltage(&self, t: f64) -> f64 {
        self.u_dc + self.u_ac * (self.omega_ac * t).cos()
    }

    /// `dU/dt`.
    pub fn voltage_rate(&self, t: f64) -> f64 {
        -self.u_ac * self.omega_ac * (self.omega_ac * t).sin()
    }

    fn ell0_sq(&self) -> f64 {
        self.ell0 * self.ell0
    }

    fn drive(&self, t: f64) -> QuadPotential<'_> {
        QuadPotential { a: &self.a, strength: self.voltage(t) / self.ell0_sq() }
    }

    fn dc(&self) -> QuadPotential<'_> {
        QuadPotential { a: &self.a, strength: self.u_dc / self.ell0_sq() }
    }

    fn endcap_potential(&self) -> Option<QuadPotential<'_>> {
        self.endcap.as_ref().map(|e| QuadPotential { a: &e.a_ec, strength: e.strength() })
    }

    /// Rotation axis about which the trap (electrodes, endcaps and
    /// homogeneous field) is invariant, if any.
    pub fn symmetry_axis(&self) -> Option<Vector3<f64>> {
        let scale = self.a.amax();
        for (i, (ai, vi)) in self.axes.iter().enumerate() {
            let others: Vec<f64> = (0..3).filter(|&j| j != i).map(|j| self.axes[j].0).collect();
            if (others[0] - others[1]).abs() > 1e-12 * scale || (others[0] - ai).abs() < 1e-12 * scale {
                continue;
            }
            let axis = *vi;
            let invariant = |m: &Matrix3<f64>| {
                let rotated = m * axis;
                (rotated - axis * axis.dot(&rotated)).norm() < 1e-12 * m.amax().max(1e-300)
                    && {
                        // in-plane block must be isotropic
                        let e1 = axis.cross(&Vector3::x()).try_normalize(1e-6)
                            .unwrap_or_else(|| axis.cross(&Vector3::y()).normalize());
                        let e2 = axis.cross(&e1);
                        let d1 = e1.dot(&(m * e1));
                        let d2 = e2.dot(&(m * e2));
                        let off = e1.dot(&(m * e2));
                        (d1 - d2).abs() < 1e-12 * m.amax().max(1e-300) && off.abs() < 1e-12 * m.amax().max(1e-300)
                    }
            };
            if let Some(e) = &self.endcap {
                if !invariant(&e.a_ec) {
                    continue;
                }
            }
            if let Some(eh) = &self.e_hom {
                if eh.cross(&axis).norm() > 1e-12 * eh.norm() {
                    continue;
                }
            }
            return Some(axis);
        }
        None
    }
}

/// Electric field of the trap at `r` and time `t`.
pub fn trap_field(g: &TrapGeometry, r: &Vector3<f64>, t: f64) -> Vector3<f64> {
    let mut e = -(g.a * r) * (g.voltage(t) / g.ell0_sq()) + g.homogeneous_field();
    if let Some(ec) = g.endcap_potential() {
        e -= ec.a * r * ec.strength;
    }
    e
}

/// Exact trapping force and torque at time `t`.
pub fn trap_force_torque(
    g: &TrapGeometry,
    dist: &MultipoleDistribution,
    r: &Vector3<f64>,
    o: &Orientation,
    t: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let m = space_frame_multipoles(dist, o);
    trap_force_torque_space(g, &m, r, t)
}

pub(crate) fn trap_force_torque_space(
    g: &TrapGeometry,
    m: &SpaceMultipoles,
    r: &Vector3<f64>,
    t: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let drive = g.drive(t);
    let mut f = drive.force(m, r);
    let mut n = drive.torque(m, r);
    if let Some(ec) = g.endcap_potential() {
        f += ec.force(m, r);
        n += ec.torque(m, r);
    }
    if let Some(e) = &g.e_hom {
        f += e * m.q;
        n += m.p.cross(e);
    }
    (f, n)
}

/// Exact trapping potential energy at time `t`.
pub fn trap_potential(
    g: &TrapGeometry,
    dist: &MultipoleDistribution,
    r: &Vector3<f64>,
    o: &Orientation,
    t: f64,
) -> f64 {
    trap_potential_space(g, &space_frame_multipoles(dist, o), r, t)
}

pub(crate) fn trap_potential_space(g: &TrapGeometry, m: &SpaceMultipoles, r: &Vector3<f64>, t: f64) -> f64 {
    let mut v = g.drive(t).energy(m, r);
    if let Some(ec) = g.endcap_potential() {
        v += ec.energy(m, r);
    }
    if let Some(e) = &g.e_hom {
        v -= e.dot(&(r * m.q + m.p));
    }
    v
}

/// `dV_tr/dt` from the explicit time dependence of the drive.
pub(crate) fn trap_power_space(g: &TrapGeometry, m: &SpaceMultipoles, r: &Vector3<f64>, t: f64) -> f64 {
    let unit = QuadPotential { a: &g.a, strength: g.voltage_rate(t) / g.ell0_sq() };
    unit.energy(m, r)
}

/// Zero-mean micromotion amplitudes: `epsilon = eps0 cos(omega t)`,
/// `delta = delta0 cos(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicromotionAmplitudes {
    pub eps0: Vector3<f64>,
    pub delta0: Vector3<f64>,
}

/// The AC torque bracket `p x A r - (1/3) sum_i a_i a_i x Q a_i`.
fn ac_torque_bracket(g: &TrapGeometry, m: &SpaceMultipoles, r: &Vector3<f64>) -> Vector3<f64> {
    m.p.cross(&(g.a * r)) - quadrupole_cross(&g.a, &m.quad) / 3.0
}

pub fn micromotion_amplitudes(
    g: &TrapGeometry,
    particle: &Particle,
    r: &Vector3<f64>,
    o: &Orientation,
) -> MicromotionAmplitudes {
    let m = space_frame_multipoles(&particle.dist, o);
    micromotion_amplitudes_space(g, &m, particle.mass, &inverse_inertia(o, &particle.inertia), r)
}

pub(crate) fn micromotion_amplitudes_space(
    g: &TrapGeometry,
    m: &SpaceMultipoles,
    mass: f64,
    inv_i: &Matrix3<f64>,
    r: &Vector3<f64>,
) -> MicromotionAmplitudes {
    let w2l2 = g.omega_ac * g.omega_ac * g.ell0_sq();
    let eps0 = g.a * (r * m.q + m.p) * (g.u_ac / (mass * w2l2));
    let delta0 = inv_i * ac_torque_bracket(g, m, r) * (g.u_ac / w2l2);
    MicromotionAmplitudes { eps0, delta0 }
}

/// The four dimensionless smallness parameters of the micro/macro
/// separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MathieuParameters {
    /// `U_ac |q| / (m w^2 l0^2)`
    pub charge: f64,
    /// `U_ac |p| / (m w^2 l0^2 l_cm)`
    pub dipole_translation: f64,
    /// `max_j U_ac max|Q_lm| / (I_j w^2 l0^2)`
    pub quadrupole_rotation: f64,
    /// `max_j U_ac |p| l_cm / (I_j w^2 l0^2)`
    pub dipole_rotation: f64,
}

impl MathieuParameters {
    pub fn values(&self) -> [f64; 4] {
        [self.charge, self.dipole_translation, self.quadrupole_rotation, self.dipole_rotation]
    }

    /// Names of the parameters exceeding [`MATHIEU_WARNING_THRESHOLD`].
    pub fn warnings(&self) -> Vec<&'static str> {
        let names = ["charge", "dipole_translation", "quadrupole_rotation", "dipole_rotation"];
        names
            .iter()
            .zip(self.values())
            .filter(|(_, v)| *v > MATHIEU_WARNING_THRESHOLD)
            .map(|(n, _)| *n)
            .collect()
    }
}

pub fn mathieu_parameters(g: &TrapGeometry, particle: &Particle, ell_cm: f64) -> Result<MathieuParameters> {
    if !(ell_cm > 0.0) {
        return Err(Error::param("ell_cm", "must be positive"));
    }
    let w2l2 = g.omega_ac * g.omega_ac * g.ell0_sq();
    let u = g.u_ac.abs();
    let m = particle.mass;
    let p = particle.dist.dipole_body().norm();
    let qmax = particle.dist.quadrupole_body().amax();
    let i_min = particle.inertia.moments().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MathieuParameters {
        charge: u * particle.charge().abs() / (m * w2l2),
        dipole_translation: u * p / (m * w2l2 * ell_cm),
        quadrupole_rotation: u * qmax / (i_min * w2l2),
        dipole_rotation: u * p * ell_cm / (i_min * w2l2),
    })
}

/// Coefficients of the AC (ponderomotive) part of the effective potential.
fn ac_coefficients(g: &TrapGeometry, mass: f64) -> (f64, f64) {
    let base = g.u_ac * g.u_ac / (4.0 * g.omega_ac * g.omega_ac * g.ell0_sq() * g.ell0_sq());
    (base / mass, base)
}

/// Time-independent effective potential governing the macromotion.
pub fn effective_potential(g: &TrapGeometry, particle: &Particle, r: &Vector3<f64>, o: &Orientation) -> f64 {
    let m = space_frame_multipoles(&particle.dist, o);
    effective_potential_space(g, &m, particle.mass, &inverse_inertia(o, &particle.inertia), r)
}

pub(crate) fn effective_potential_space(
    g: &TrapGeometry,
    m: &SpaceMultipoles,
    mass: f64,
    inv_i: &Matrix3<f64>,
    r: &Vector3<f64>,
) -> f64 {
    let (c_m, c_i) = ac_coefficients(g, mass);
    let s = r * m.q + m.p;
    let as_ = g.a * s;
    let k = ac_torque_bracket(g, m, r);
    let mut v = g.dc().energy(m, r) + c_m * as_.norm_squared() + c_i * k.dot(&(inv_i * k));
    if let Some(ec) = g.endcap_potential() {
        v += ec.energy(m, r);
    }
    if let Some(e) = &g.e_hom {
        v -= e.dot(&s);
    }
    v
}

/// Effective force and torque from the closed forms in terms of the
/// micromotion amplitudes.
pub fn effective_force_torque(
    g: &TrapGeometry,
    particle: &Particle,
    r: &Vector3<f64>,
    o: &Orientation,
) -> (Vector3<f64>, Vector3<f64>) {
    let m = space_frame_multipoles(&particle.dist, o);
    effective_force_torque_space(g, &m, particle.mass, &inverse_inertia(o, &particle.inertia), r)
}

pub(crate) fn effective_force_torque_space(
    g: &TrapGeometry,
    m: &SpaceMultipoles,
    mass: f64,
    inv_i: &Matrix3<f64>,
    r: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let MicromotionAmplitudes { eps0, delta0 } = micromotion_amplitudes_space(g, m, mass, inv_i, r);
    let half = g.u_ac / (2.0 * g.ell0_sq());
    let p = m.p;
    let a = &g.a;

    let dc = g.dc();
    let mut f = dc.force(m, r) - a * (eps0 * m.q + delta0.cross(&p)) * half;

    let mut quad_terms = Vector3::zeros();
    for (ai, vi) in &g.axes {
        quad_terms += vi.cross(&(m.quad * vi.cross(&delta0))) * *ai;
        quad_terms += vi.cross(&delta0.cross(&(m.quad * vi))) * *ai;
    }
    let bracket = delta0.cross(&p).cross(&(a * r)) + p.cross(&(a * eps0)) - quad_terms / 3.0;
    let mut n = dc.torque(m, r) - bracket * half;

    if let Some(ec) = g.endcap_potential() {
        f += ec.force(m, r);
        n += ec.torque(m, r);
    }
    if let Some(e) = &g.e_hom {
        f += e * m.q;
        n += p.cross(e);
    }
    (f, n)
}

/// Micromotion momentum amplitudes `(dP_t, dJ_t)`; the exact momenta are
/// approximately `P = m r_dot - dP_t` and `J = I omega - dJ_t`.
pub fn momentum_micromotion_correction(
    g: &TrapGeometry,
    dist: &MultipoleDistribution,
    r: &Vector3<f64>,
    o: &Orientation,
    t: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let m = space_frame_multipoles(dist, o);
    let c = g.u_ac * (g.omega_ac * t).sin() / (g.omega_ac * g.ell0_sq());
    (g.a * (r * m.q + m.p) * c, ac_torque_bracket(g, &m, r) * c)
}

/// Center-of-mass stability of a linear trap with endcaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// `B = A^2 - kappa A_ec`
    pub b: Matrix3<f64>,
    pub kappa: f64,
    pub stable: bool,
}

/// Stability of the center-of-mass confinement: stable iff `0 < kappa < 1`.
pub fn linear_trap_stability(g: &TrapGeometry, q: f64, mass: f64) -> Result<StabilityReport> {
    let ec = g.endcap.as_ref().ok_or_else(|| Error::param("endcap", "stability requires endcaps"))?;
    let ratio = g.omega_ac * g.ell0_sq() / (ec.ell_ec * g.u_ac);
    let kappa = 4.0 * mass * ec.k_ec * ec.u_ec / q * ratio * ratio;
    let b = g.a * g.a - ec.a_ec * kappa;
    Ok(StabilityReport { b, kappa, stable: kappa > 0.0 && kappa < 1.0 })
}

/// Homogeneous field strength at which the ring of minima of a symmetric
/// particle in a ring trap merges with the isolated on-axis minimum.
pub fn critical_field(g: &TrapGeometry, spec: &SymmetricParticleSpec, mass: f64) -> Result<f64> {
    if spec.p3 == 0.0 {
        return Err(Error::Domain("critical field is undefined for p3 = 0".into()));
    }
    let num = 3.0 * g.u_ac * g.u_ac * (spec.p3 * spec.p3 - spec.q * spec.q3);
    let den = mass * spec.p3 * g.omega_ac * g.omega_ac * g.ell0_sq() * g.ell0_sq();
    Ok((num / den).abs())
}

/// Two-term effective potential of a cylindrically symmetric particle with
/// symmetry axis `m_axis` (valid for `U_dc = 0`), plus the endcap and
/// homogeneous-field terms in their symmetric-particle form.
pub fn symmetric_effective_potential(
    g: &TrapGeometry,
    spec: &SymmetricParticleSpec,
    mass: f64,
    r: &Vector3<f64>,
    m_axis: &Vector3<f64>,
) -> f64 {
    let (c_m, _) = ac_coefficients(g, mass);
    let c_i = g.u_ac * g.u_ac / (4.0 * spec.i_perp * g.omega_ac.powi(2) * g.ell0_sq().powi(2));
    let s = r * spec.q + m_axis * spec.p3;
    let a2 = g.a * g.a;
    let k = m_axis.cross(&(g.a * (r * spec.p3 + m_axis * spec.q3)));
    let mut v = c_m * s.dot(&(a2 * s)) + c_i * k.norm_squared();
    if let Some(ec) = &g.endcap {
        let c = ec.k_ec * ec.u_ec / (spec.q * ec.ell_ec * ec.ell_ec);
        v += -c * s.dot(&(ec.a_ec * s))
            + c * (spec.p3 * spec.p3 - spec.q * spec.q3) * m_axis.dot(&(ec.a_ec * m_axis));
    }
    if let Some(e) = &g.e_hom {
        v -= e.dot(&s);
    }
    v
}
