//! Charged rigid rotors in quadrupole ion traps, coupled to RLC circuits.
//!
//! All quantities are SI. Orientations use z-y'-z'' Euler angles as derived
//! output; dynamics integrate rotation matrices directly.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod charge;
pub mod circuit;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod image;
pub mod linear;
pub mod presets;
pub mod rotor;
pub mod trap;

pub use error::{Error, Result};
