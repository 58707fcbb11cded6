//! Quantities with explicit unit suffixes, normalized to SI.
//!
//! A value is written as a number followed by a unit expression, e.g.
//! `"750 kHz"`, `"3.5e12 amu"`, `"2.8e-38 kg m^2"` or `"44.5 /s"`. Unit
//! factors are separated by spaces or `*`; everything after `/` goes to the
//! denominator. Bare numbers are accepted only for dimensionless fields.

use std::fmt;
use std::marker::PhantomData;

use levirotor::constants::{AMU, ELEMENTARY_CHARGE};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// Exponents of kg, m, s, A, K.
pub type Dim = [i8; 5];

const NONE: Dim = [0, 0, 0, 0, 0];

struct Unit {
    symbol: &'static str,
    factor: f64,
    dim: Dim,
    prefixable: bool,
}

const UNITS: &[Unit] = &[
    Unit { symbol: "kg", factor: 1.0, dim: [1, 0, 0, 0, 0], prefixable: false },
    Unit { symbol: "g", factor: 1e-3, dim: [1, 0, 0, 0, 0], prefixable: true },
    Unit { symbol: "amu", factor: AMU, dim: [1, 0, 0, 0, 0], prefixable: false },
    Unit { symbol: "m", factor: 1.0, dim: [0, 1, 0, 0, 0], prefixable: true },
    Unit { symbol: "s", factor: 1.0, dim: [0, 0, 1, 0, 0], prefixable: true },
    Unit { symbol: "Hz", factor: 1.0, dim: [0, 0, -1, 0, 0], prefixable: true },
    Unit { symbol: "A", factor: 1.0, dim: [0, 0, 0, 1, 0], prefixable: true },
    Unit { symbol: "K", factor: 1.0, dim: [0, 0, 0, 0, 1], prefixable: true },
    Unit { symbol: "C", factor: 1.0, dim: [0, 0, 1, 1, 0], prefixable: true },
    Unit { symbol: "e", factor: ELEMENTARY_CHARGE, dim: [0, 0, 1, 1, 0], prefixable: false },
    Unit { symbol: "V", factor: 1.0, dim: [1, 2, -3, -1, 0], prefixable: true },
    Unit { symbol: "F", factor: 1.0, dim: [-1, -2, 4, 2, 0], prefixable: true },
    Unit { symbol: "H", factor: 1.0, dim: [1, 2, -2, -2, 0], prefixable: true },
    Unit { symbol: "Ohm", factor: 1.0, dim: [1, 2, -3, -2, 0], prefixable: true },
    Unit { symbol: "\u{3a9}", factor: 1.0, dim: [1, 2, -3, -2, 0], prefixable: true },
    Unit { symbol: "J", factor: 1.0, dim: [1, 2, -2, 0, 0], prefixable: true },
    Unit { symbol: "N", factor: 1.0, dim: [1, 1, -2, 0, 0], prefixable: true },
    Unit { symbol: "Wb", factor: 1.0, dim: [1, 2, -2, -1, 0], prefixable: true },
    Unit { symbol: "rad", factor: 1.0, dim: NONE, prefixable: true },
    Unit { symbol: "deg", factor: std::f64::consts::PI / 180.0, dim: NONE, prefixable: false },
];

const PREFIXES: &[(char, f64)] = &[
    ('f', 1e-15),
    ('p', 1e-12),
    ('n', 1e-9),
    ('u', 1e-6),
    ('\u{b5}', 1e-6),
    ('\u{3bc}', 1e-6),
    ('m', 1e-3),
    ('c', 1e-2),
    ('k', 1e3),
    ('M', 1e6),
    ('G', 1e9),
];

fn lookup(symbol: &str) -> Option<(f64, Dim)> {
    if let Some(u) = UNITS.iter().find(|u| u.symbol == symbol) {
        return Some((u.factor, u.dim));
    }
    let mut chars = symbol.chars();
    let first = chars.next()?;
    let rest = chars.as_str();
    let (_, scale) = PREFIXES.iter().find(|(p, _)| *p == first)?;
    let u = UNITS.iter().find(|u| u.symbol == rest && u.prefixable)?;
    Some((scale * u.factor, u.dim))
}

/// Parses a unit expression into its SI factor and dimension.
pub fn parse_unit(expr: &str) -> Result<(f64, Dim), String> {
    let mut factor = 1.0;
    let mut dim = NONE;
    let mut sign = 1i32;
    let spaced = expr.replace('/', " / ").replace(['*', '\u{b7}'], " ");
    for token in spaced.split_whitespace() {
        if token == "/" {
            if sign < 0 {
                return Err(format!("unit `{expr}` has more than one `/`"));
            }
            sign = -1;
            continue;
        }
        let (symbol, power) = match token.split_once('^') {
            Some((s, p)) => (s, p.parse::<i32>().map_err(|_| format!("bad exponent in `{token}`"))?),
            None => (token, 1),
        };
        let (f, d) = lookup(symbol).ok_or_else(|| format!("unknown unit `{symbol}`"))?;
        let p = sign * power;
        factor *= f.powi(p);
        for (acc, x) in dim.iter_mut().zip(d) {
            *acc += (x as i32 * p) as i8;
        }
    }
    Ok((factor, dim))
}

/// Parses `"<number> <unit>"` into an SI value and its dimension.
pub fn parse_quantity(text: &str) -> Result<(f64, Dim), String> {
    let text = text.trim();
    let split = text.find(char::is_whitespace).unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let value: f64 = number.parse().map_err(|_| format!("`{text}` does not start with a number"))?;
    let (factor, dim) = parse_unit(unit)?;
    // Powers of ten go into the exponent so "0.4 us" parses exactly as 0.4e-6.
    let exponent = factor.log10().round();
    if 10f64.powi(exponent as i32) == factor {
        let (mantissa, own) = number.split_once(['e', 'E']).unwrap_or((number, "0"));
        if let Ok(own) = own.parse::<i32>() {
            let shifted = format!("{mantissa}e{}", own + exponent as i32);
            return Ok((shifted.parse().unwrap_or(value * factor), dim));
        }
    }
    Ok((value * factor, dim))
}

/// SI unit expression for a dimension, e.g. `kg m^2 s^-3 A^-1`.
pub fn si_unit(dim: &Dim) -> String {
    let names = ["kg", "m", "s", "A", "K"];
    let parts: Vec<String> = names
        .iter()
        .zip(dim)
        .filter(|(_, p)| **p != 0)
        .map(|(n, p)| if *p == 1 { n.to_string() } else { format!("{n}^{p}") })
        .collect();
    parts.join(" ")
}

/// Physical kind of a field: its dimension and a name for messages.
pub trait Kind {
    const DIM: Dim;
    const NAME: &'static str;
    const EXAMPLE: &'static str;
}

macro_rules! kinds {
    ($($ty:ident => $dim:expr, $name:literal, $ex:literal;)*) => {
        $(
            #[derive(Debug, Clone, Copy, PartialEq)]
            pub struct $ty;
            impl Kind for $ty {
                const DIM: Dim = $dim;
                const NAME: &'static str = $name;
                const EXAMPLE: &'static str = $ex;
            }
        )*
    };
}

kinds! {
    Dimensionless => NONE, "dimensionless number", "0.4";
    Mass => [1, 0, 0, 0, 0], "mass", "3.5e12 amu";
    Length => [0, 1, 0, 0, 0], "length", "250 um";
    Time => [0, 0, 1, 0, 0], "time", "45 s";
    Frequency => [0, 0, -1, 0, 0], "frequency", "750 kHz";
    Temperature => [0, 0, 0, 0, 1], "temperature", "4 K";
    Charge => [0, 0, 1, 1, 0], "charge", "200 e";
    Voltage => [1, 2, -3, -1, 0], "voltage", "750 V";
    Field => [1, 1, -3, -1, 0], "electric field", "100 V/m";
    Capacitance => [-1, -2, 4, 2, 0], "capacitance", "10 nF";
    Inductance => [1, 2, -2, -2, 0], "inductance", "0.565 H";
    Resistance => [1, 2, -3, -2, 0], "resistance", "2 MOhm";
    Dipole => [0, 1, 1, 1, 0], "dipole moment", "1e-24 C m";
    Quadrupole => [0, 2, 1, 1, 0], "quadrupole moment", "1e-33 C m^2";
    Inertia => [1, 2, 0, 0, 0], "moment of inertia", "3.52e-27 kg m^2";
    Momentum => [1, 1, -1, 0, 0], "momentum", "1e-20 kg m/s";
    AngularMomentum => [1, 2, -1, 0, 0], "angular momentum", "1e-28 J s";
    Flux => [1, 2, -2, -1, 0], "magnetic flux", "1e-15 Wb";
}

/// Angles are dimensionless; bare numbers are radians.
pub type Angle = Dimensionless;

/// A value of kind `K` stored in SI units.
#[derive(Clone, Copy, PartialEq)]
pub struct Qty<K> {
    pub si: f64,
    kind: PhantomData<K>,
}

impl<K> Qty<K> {
    pub fn new(si: f64) -> Self {
        Qty { si, kind: PhantomData }
    }
}

impl<K: Kind> Qty<K> {
    pub fn parse(text: &str) -> Result<Self, String> {
        let (si, dim) = parse_quantity(text)?;
        if dim != K::DIM {
            return Err(format!("`{text}` is not a {} (expected e.g. \"{}\")", K::NAME, K::EXAMPLE));
        }
        Ok(Qty::new(si))
    }
}

impl<K> fmt::Debug for Qty<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.si)
    }
}

impl<K: Kind> Serialize for Qty<K> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if K::DIM == NONE {
            s.serialize_f64(self.si)
        } else {
            s.serialize_str(&format!("{:e} {}", self.si, si_unit(&K::DIM)))
        }
    }
}

impl<'de, K: Kind> Deserialize<'de> for Qty<K> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<K>(PhantomData<K>);
        impl<K: Kind> Visitor<'_> for V<K> {
            type Value = Qty<K>;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a {} with unit, e.g. \"{}\"", K::NAME, K::EXAMPLE)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Qty<K>, E> {
                Qty::parse(v).map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Qty<K>, E> {
                if K::DIM == NONE {
                    Ok(Qty::new(v))
                } else {
                    Err(E::custom(format!("{v} needs a unit (a {}, e.g. \"{}\")", K::NAME, K::EXAMPLE)))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Qty<K>, E> {
                self.visit_f64(v as f64)
            }
        }
        d.deserialize_any(V(PhantomData))
    }
}
