//! Rigid-body orientation algebra: z-y'-z'' Euler angles, body axes, inertia
//! tensors and the maps between canonical Euler momenta and the space-frame
//! angular momentum vector.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Below this value of |sin beta| the Euler-angle momentum maps are refused.
pub const GIMBAL_TOLERANCE: f64 = 1e-9;

/// Orientation of the body frame.
///
/// Columns of [`Orientation::matrix`] are the body axes `N1, N2, N3`
/// expressed in the space frame. The Euler angles are derived from the matrix
/// and canonicalized to `alpha, gamma in [0, 2 pi)`, `beta in [0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    alpha: f64,
    beta: f64,
    gamma: f64,
    frame: Matrix3<f64>,
}

fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Rotation matrix `Rz(alpha) Ry(beta) Rz(gamma)`.
fn euler_matrix(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    Matrix3::new(
        ca * cb * cg - sa * sg,
        -ca * cb * sg - sa * cg,
        ca * sb,
        sa * cb * cg + ca * sg,
        -sa * cb * sg + ca * cg,
        sa * sb,
        -sb * cg,
        sb * sg,
        cb,
    )
}

/// Gram-Schmidt on the columns, keeping the third axis fixed first so that
/// the symmetry axis of a rotor is the least disturbed direction.
pub(crate) fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let n3 = m.column(2).normalize();
    let c1 = m.column(0).into_owned();
    let n1 = (c1 - n3 * n3.dot(&c1)).normalize();
    let n2 = n3.cross(&n1);
    Matrix3::from_columns(&[n1, n2, n3])
}

impl Orientation {
    pub fn identity() -> Self {
        Self::from_euler(0.0, 0.0, 0.0)
    }

    /// Builds an orientation from z-y'-z'' Euler angles. Angles outside the
    /// canonical ranges are accepted and re-extracted from the matrix.
    pub fn from_euler(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self::from_matrix(&euler_matrix(alpha, beta, gamma))
    }

    /// Builds an orientation from a (nearly) orthonormal matrix whose columns
    /// are the body axes. The matrix is re-orthonormalized first.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let frame = orthonormalize(m);
        let (alpha, beta, gamma) = extract_euler(&frame);
        Orientation { alpha, beta, gamma, frame }
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Self::from_matrix(q.to_rotation_matrix().matrix())
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.frame))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn euler(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    /// Rotation matrix; its columns are `N1, N2, N3`.
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.frame
    }

    pub fn axis(&self, i: usize) -> Vector3<f64> {
        self.frame.column(i).into_owned()
    }

    /// Nodal line `e_xi = -sin(alpha) e_x + cos(alpha) e_y`.
    pub fn nodal_line(&self) -> Vector3<f64> {
        Vector3::new(-self.alpha.sin(), self.alpha.cos(), 0.0)
    }

    /// Orientation obtained by rotating this one by `angle` about the
    /// space-fixed `axis`.
    pub fn rotated(&self, axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return *self;
        }
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(axis / n), angle);
        Self::from_matrix(&(rot.matrix() * self.frame))
    }

    /// Orientation after applying the rotation vector `phi` (space frame).
    pub fn rotated_by_vector(&self, phi: &Vector3<f64>) -> Self {
        self.rotated(phi, phi.norm())
    }
}

fn extract_euler(m: &Matrix3<f64>) -> (f64, f64, f64) {
    let n3x = m[(0, 2)];
    let n3y = m[(1, 2)];
    let n3z = m[(2, 2)];
    let sb = (n3x * n3x + n3y * n3y).sqrt();
    let beta = sb.atan2(n3z);
    if sb > 1e-12 {
        let alpha = n3y.atan2(n3x);
        // N1z = -sin(beta) cos(gamma), N2z = sin(beta) sin(gamma)
        let gamma = m[(2, 1)].atan2(-m[(2, 0)]);
        (wrap_angle(alpha), beta, wrap_angle(gamma))
    } else if n3z > 0.0 {
        // beta = 0: only alpha + gamma is defined; put it all into gamma.
        let g = m[(1, 0)].atan2(m[(0, 0)]);
        (0.0, 0.0, wrap_angle(g))
    } else {
        // beta = pi: only alpha - gamma is defined.
        let d = (-m[(1, 0)]).atan2(-m[(0, 0)]);
        (0.0, PI, wrap_angle(-d))
    }
}

/// Principal moments of inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaSpec {
    moments: [f64; 3],
}

impl InertiaSpec {
    pub fn new(i1: f64, i2: f64, i3: f64) -> Result<Self> {
        let m = [i1, i2, i3];
        if m.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::param("inertia", format!("moments must be positive, got {m:?}")));
        }
        let slack = 1e-12 * (i1 + i2 + i3);
        for k in 0..3 {
            let (a, b) = (m[(k + 1) % 3], m[(k + 2) % 3]);
            if a + b + slack < m[k] {
                return Err(Error::param(
                    "inertia",
                    format!("triangle inequality violated by {m:?}"),
                ));
            }
        }
        Ok(InertiaSpec { moments: m })
    }

    pub fn isotropic(i0: f64) -> Result<Self> {
        Self::new(i0, i0, i0)
    }

    /// Symmetric top with moment `i_perp` about the axes perpendicular to the
    /// body 3-axis and `i3` about it.
    pub fn symmetric(i_perp: f64, i3: f64) -> Result<Self> {
        Self::new(i_perp, i_perp, i3)
    }

    pub fn moments(&self) -> [f64; 3] {
        self.moments
    }

    pub fn body_inverse(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(
            1.0 / self.moments[0],
            1.0 / self.moments[1],
            1.0 / self.moments[2],
        ))
    }
}

/// Canonical momenta conjugate to the Euler angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateMomenta {
    pub p_alpha: f64,
    pub p_beta: f64,
    pub p_gamma: f64,
}

/// Body axes `N1, N2, N3` in the space frame.
pub fn body_axes(o: &Orientation) -> [Vector3<f64>; 3] {
    [o.axis(0), o.axis(1), o.axis(2)]
}

/// Space-frame inertia tensor `sum_i I_i N_i (x) N_i` and its inverse.
pub fn inertia_tensor(o: &Orientation, s: &InertiaSpec) -> (Matrix3<f64>, Matrix3<f64>) {
    let r = o.matrix();
    let [i1, i2, i3] = s.moments;
    let d = Matrix3::from_diagonal(&Vector3::new(i1, i2, i3));
    let inv = s.body_inverse();
    (r * d * r.transpose(), r * inv * r.transpose())
}

/// Space-frame inverse inertia tensor only.
pub fn inverse_inertia(o: &Orientation, s: &InertiaSpec) -> Matrix3<f64> {
    let r = o.matrix();
    r * s.body_inverse() * r.transpose()
}

fn check_gimbal(o: &Orientation) -> Result<f64> {
    let sb = o.beta.sin();
    if sb.abs() < GIMBAL_TOLERANCE {
        return Err(Error::GimbalSingularity { sin_beta: sb.abs(), tolerance: GIMBAL_TOLERANCE });
    }
    Ok(sb)
}

/// Space-frame angular momentum from the Euler momenta.
pub fn angular_momentum_from_conjugate(
    o: &Orientation,
    pm: &ConjugateMomenta,
) -> Result<Vector3<f64>> {
    let sb = check_gimbal(o)?;
    let cot = o.beta.cos() / sb;
    let (sg, cg) = o.gamma.sin_cos();
    let j1 = -cg / sb * pm.p_alpha + sg * pm.p_beta + cot * cg * pm.p_gamma;
    let j2 = sg / sb * pm.p_alpha + cg * pm.p_beta - cot * sg * pm.p_gamma;
    let j3 = pm.p_gamma;
    let [n1, n2, n3] = body_axes(o);
    Ok(n1 * j1 + n2 * j2 + n3 * j3)
}

/// Euler momenta as projections of `J` on `e_z`, the nodal line and `N3`.
pub fn conjugate_from_angular_momentum(o: &Orientation, j: &Vector3<f64>) -> ConjugateMomenta {
    ConjugateMomenta {
        p_alpha: j.z,
        p_beta: j.dot(&o.nodal_line()),
        p_gamma: j.dot(&o.axis(2)),
    }
}

/// `J . I^-1 J / 2` with `J` reconstructed from the Euler momenta.
pub fn rotational_kinetic_energy(
    o: &Orientation,
    pm: &ConjugateMomenta,
    s: &InertiaSpec,
) -> Result<f64> {
    let j = angular_momentum_from_conjugate(o, pm)?;
    Ok(kinetic_energy_of(o, &j, s))
}

pub fn kinetic_energy_of(o: &Orientation, j: &Vector3<f64>, s: &InertiaSpec) -> f64 {
    // Evaluate in the body frame so that the result is exactly non-negative.
    let jb = o.matrix().transpose() * j;
    let [i1, i2, i3] = s.moments;
    0.5 * (jb.x * jb.x / i1 + jb.y * jb.y / i2 + jb.z * jb.z / i3)
}

/// `dN_i/dt = omega x N_i` for every body axis, as a matrix with the same
/// column layout as [`Orientation::matrix`].
pub fn orientation_rate(o: &Orientation, omega: &Vector3<f64>) -> Matrix3<f64> {
    omega.cross_matrix() * o.matrix()
}
