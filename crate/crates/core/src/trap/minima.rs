//! Local minimization of the effective potential over position and
//! orientation.
//!
//! Coordinates are the position in units of a length scale and a rotation
//! vector applied on the left of the current orientation. The gradient is
//! analytic (`-F_eff`, `-N_eff`); the Hessian is a finite difference of the
//! gradient. Steps use the absolute eigenvalues of the Hessian so that
//! saddle points repel, followed by a backtracking line search on `V_eff`.

use nalgebra::{SMatrix, SVector, SymmetricEigen, Vector3};

use super::{effective_force_torque, effective_potential, TrapGeometry};
use crate::charge::Particle;
use crate::error::{Error, Result};
use crate::rotor::Orientation;

type V6 = SVector<f64, 6>;
type M6 = SMatrix<f64, 6, 6>;

/// Orientation class of the body 3-axis `m = N3` at a minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    /// `m = +-e_z`.
    ParallelZ,
    /// `m` in the x-y plane, isolated minimum.
    PerpendicularZ,
    /// Member of a continuous set generated by the trap's rotational
    /// symmetry about its axis.
    RingDegenerate,
    /// Any other direction.
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizerOptions {
    /// Length unit for the position coordinates; `None` picks `|p|/|q|`
    /// when both are non-zero and `1e-3 l0` otherwise.
    pub length_scale: Option<f64>,
    pub max_iterations: usize,
    /// Convergence when the Newton step (scaled position, radians) is
    /// below this.
    pub step_tolerance: f64,
    /// Tolerance on `|m_z|` and `1 - |m_z|` used for classification.
    pub alignment_tolerance: f64,
    /// Points used to sample a ring-degenerate minimum.
    pub ring_samples: usize,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        MinimizerOptions {
            length_scale: None,
            max_iterations: 500,
            step_tolerance: 1e-11,
            alignment_tolerance: 1e-6,
            ring_samples: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub r: Vector3<f64>,
    pub orientation: Orientation,
    pub energy: f64,
    /// Norm of the scaled gradient at the returned point.
    pub gradient_norm: f64,
    /// Smallest eigenvalue of the scaled Hessian divided by the largest.
    pub curvature_ratio: f64,
    pub iterations: usize,
    pub alignment: Alignment,
    /// Sampled members of the degenerate set (empty unless
    /// `alignment == RingDegenerate`).
    pub ring: Vec<(Vector3<f64>, Orientation)>,
}

impl Minimum {
    /// Symmetry axis of the particle, `m = N3`.
    pub fn axis(&self) -> Vector3<f64> {
        self.orientation.axis(2)
    }
}

struct Problem<'a> {
    g: &'a TrapGeometry,
    particle: &'a Particle,
    scale: f64,
}

impl Problem<'_> {
    fn at(&self, r: &Vector3<f64>, o: &Orientation, x: &V6) -> (Vector3<f64>, Orientation) {
        let dr = Vector3::new(x[0], x[1], x[2]) * self.scale;
        let phi = Vector3::new(x[3], x[4], x[5]);
        (r + dr, o.rotated_by_vector(&phi))
    }

    fn energy(&self, r: &Vector3<f64>, o: &Orientation) -> f64 {
        effective_potential(self.g, self.particle, r, o)
    }

    fn gradient(&self, r: &Vector3<f64>, o: &Orientation) -> V6 {
        let (f, n) = effective_force_torque(self.g, self.particle, r, o);
        let gr = -f * self.scale;
        V6::new(gr.x, gr.y, gr.z, -n.x, -n.y, -n.z)
    }

    fn hessian(&self, r: &Vector3<f64>, o: &Orientation) -> M6 {
        let h = 1e-6;
        let mut m = M6::zeros();
        for k in 0..6 {
            let mut e = V6::zeros();
            e[k] = h;
            let (rp, op) = self.at(r, o, &e);
            let (rm, om) = self.at(r, o, &-e);
            let col = (self.gradient(&rp, &op) - self.gradient(&rm, &om)) / (2.0 * h);
            m.set_column(k, &col);
        }
        (m + m.transpose()) * 0.5
    }
}

/// Multi-start local minimization of the effective potential.
///
/// Each start is refined independently; converged points closer than the
/// step tolerance to an earlier one are merged. Fails only when no start
/// converges.
pub fn find_minima(
    g: &TrapGeometry,
    particle: &Particle,
    starts: &[(Vector3<f64>, Orientation)],
    opts: &MinimizerOptions,
) -> Result<Vec<Minimum>> {
    if starts.is_empty() {
        return Err(Error::param("starts", "at least one initial guess is required"));
    }
    let q = particle.charge();
    let p = particle.dist.dipole_body().norm();
    let scale = opts.length_scale.unwrap_or(if q != 0.0 && p > 0.0 {
        p / q.abs()
    } else {
        1e-3 * g.ell0()
    });
    if !(scale > 0.0) {
        return Err(Error::param("length_scale", "must be positive"));
    }
    let prob = Problem { g, particle, scale };

    let mut found: Vec<Minimum> = Vec::new();
    let mut last_failure = None;
    for (r0, o0) in starts {
        match minimize(&prob, r0, o0, opts) {
            Ok(m) => {
                let duplicate = found.iter().any(|f| {
                    (f.r - m.r).norm() < 1e-6 * scale
                        && (f.orientation.matrix() - m.orientation.matrix()).amax() < 1e-6
                });
                if !duplicate {
                    found.push(m);
                }
            }
            Err(e) => last_failure = Some(e),
        }
    }
    match (found.is_empty(), last_failure) {
        (true, Some(e)) => Err(e),
        _ => Ok(found),
    }
}

fn minimize(prob: &Problem, r0: &Vector3<f64>, o0: &Orientation, opts: &MinimizerOptions) -> Result<Minimum> {
    let mut r = *r0;
    let mut o = *o0;
    let mut v = prob.energy(&r, &o);
    let mut last_step = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let grad = prob.gradient(&r, &o);
        let hess = prob.hessian(&r, &o);
        let eig = SymmetricEigen::new(hess);
        let lmax = eig.eigenvalues.amax();
        let floor = (lmax * 1e-10).max(f64::MIN_POSITIVE);
        let mut step = V6::zeros();
        for k in 0..6 {
            let vk = eig.eigenvectors.column(k);
            let lk = eig.eigenvalues[k].abs().max(floor);
            step -= vk * (vk.dot(&grad) / lk);
        }
        // keep rotations within a fraction of a radian per iteration
        let rot = Vector3::new(step[3], step[4], step[5]).norm();
        if rot > 0.5 {
            step *= 0.5 / rot;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (rn, on) = prob.at(&r, &o, &(step * t));
            let vn = prob.energy(&rn, &on);
            if vn <= v + 1e-4 * t * grad.dot(&step) || (vn - v).abs() <= 1e-15 * v.abs() {
                r = rn;
                o = on;
                v = vn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        last_step = step.norm() * t;
        if !accepted || last_step < opts.step_tolerance {
            let grad = prob.gradient(&r, &o);
            let hess = prob.hessian(&r, &o);
            let eig = SymmetricEigen::new(hess);
            let lmax = eig.eigenvalues.amax();
            let curvature_ratio = if lmax > 0.0 { eig.eigenvalues.min() / lmax } else { 0.0 };
            if !accepted && grad.norm() > 1e-6 * lmax.max(f64::MIN_POSITIVE) {
                return Err(Error::NoConvergence { iterations: it + 1, residual: grad.norm() });
            }
            return Ok(classify(prob, r, o, v, grad.norm(), curvature_ratio, it + 1, opts));
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual: last_step })
}

#[allow(clippy::too_many_arguments)]
fn classify(
    prob: &Problem,
    r: Vector3<f64>,
    o: Orientation,
    energy: f64,
    gradient_norm: f64,
    curvature_ratio: f64,
    iterations: usize,
    opts: &MinimizerOptions,
) -> Minimum {
    let m = o.axis(2);
    let tol = opts.alignment_tolerance;
    let sym = prob.g.symmetry_axis();
    let on_axis = |u: &Vector3<f64>| 1.0 - m.dot(u).abs() < tol && r.cross(u).norm() < tol * prob.scale;
    let mut alignment = if 1.0 - m.z.abs() < tol {
        Alignment::ParallelZ
    } else if m.z.abs() < tol {
        Alignment::PerpendicularZ
    } else {
        Alignment::Tilted
    };
    let mut ring = Vec::new();
    if let Some(axis) = sym {
        // the set is degenerate unless the configuration is itself invariant
        let invariant = on_axis(&axis) && body_axisymmetric(prob.particle);
        if !invariant {
            alignment = Alignment::RingDegenerate;
            let n = opts.ring_samples.max(1);
            ring = (0..n)
                .map(|k| {
                    let angle = std::f64::consts::TAU * k as f64 / n as f64;
                    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
                    (rot * r, o.rotated(&axis, angle))
                })
                .collect();
        }
    }
    Minimum { r, orientation: o, energy, gradient_norm, curvature_ratio, iterations, alignment, ring }
}

/// True when the particle is invariant under rotations about its body
/// 3-axis.
fn body_axisymmetric(particle: &Particle) -> bool {
    let [i1, i2, _] = particle.inertia.moments();
    let p = particle.dist.dipole_body();
    let q = particle.dist.quadrupole_body();
    let qs = q.amax().max(f64::MIN_POSITIVE);
    let ps = p.amax().max(f64::MIN_POSITIVE);
    (i1 - i2).abs() <= 1e-12 * i1
        && p.x.abs() <= 1e-12 * ps
        && p.y.abs() <= 1e-12 * ps
        && (q[(0, 0)] - q[(1, 1)]).abs() <= 1e-12 * qs
        && [q[(0, 1)], q[(0, 2)], q[(1, 2)]].iter().all(|x| x.abs() <= 1e-12 * qs)
}
