//! Physical constants (CODATA 2018 exact values where defined).

use std::f64::consts::PI;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Riemann zeta(3) (Apery's constant).
pub const ZETA_3: f64 = 1.202_056_903_159_594_2;

/// 4 pi epsilon_0.
pub const FOUR_PI_EPS0: f64 = 4.0 * PI * EPSILON_0;
