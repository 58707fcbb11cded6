//! Scenario files: schema, overrides, normalization and conversion to the
//! library's types.

use std::f64::consts::TAU;

use levirotor::charge::{multipoles_from_point_charges, MultipoleDistribution, Particle, PointChargeSet, SymmetricParticleSpec};
use levirotor::circuit::{CircuitSpec, PickupConfig, Topology};
use levirotor::dynamics::{Coupling, Dynamics, GasCoupling, IntegratorConfig, NoiseScheme, System, SystemState};
use levirotor::linear::{build_model, cooling_initial_state, LinearModel, LinearScheme};
use levirotor::rotor::{InertiaSpec, Orientation};
use levirotor::trap::{find_minima, micromotion_amplitudes, Endcap, MinimizerOptions, TrapGeometry};
use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::units::*;

fn is_default<T: Default + PartialEq>(x: &T) -> bool {
    *x == T::default()
}

impl<K> Default for Qty<K> {
    fn default() -> Self {
        Qty::new(0.0)
    }
}

fn vec3<K>(v: &[Qty<K>; 3]) -> Vector3<f64> {
    Vector3::new(v[0].si, v[1].si, v[2].si)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub particle: ParticleConfig,
    pub trap: TrapConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pickup: Option<PickupToml>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas: Option<GasConfig>,
    #[serde(default)]
    pub integrator: IntegratorToml,
    #[serde(default)]
    pub initial: InitialConfig,
    pub run: RunConfig,
    /// Parameter switches at given times; later entries inherit unset
    /// sections from earlier ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<StageConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd: Option<PsdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cool: Option<CoolConfig>,
}

/// Charge distribution, inertia and mass. Either `point_charges` or
/// `charge` with optional multipoles; `*_ql` multipoles are in units of
/// `q l` and `q l^2` with `l = length_scale`. Quadrupole components are
/// `[Q11, Q12, Q13, Q22, Q23]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub mass: Qty<Mass>,
    pub inertia: [Qty<Inertia>; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<Qty<Charge>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_scale: Option<Qty<Length>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole: Option<[Qty<Dipole>; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrupole: Option<[Qty<Quadrupole>; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole_ql: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrupole_ql2: Option<[f64; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_charges: Option<Vec<PointChargeToml>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointChargeToml {
    pub charge: Qty<Charge>,
    pub position: [Qty<Length>; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrapKind {
    Ring,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapConfig {
    pub kind: TrapKind,
    pub ell0: Qty<Length>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub u_dc: Qty<Voltage>,
    pub u_ac: Qty<Voltage>,
    /// Drive frequency `omega_ac / 2 pi`.
    pub frequency: Qty<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneous_field: Option<[Qty<Field>; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endcap: Option<EndcapConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndcapConfig {
    pub length: Qty<Length>,
    pub voltage: Qty<Voltage>,
    #[serde(default = "one")]
    pub k: Qty<Dimensionless>,
}

fn one() -> Qty<Dimensionless> {
    Qty::new(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PickupKind {
    Linear,
    Plate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickupToml {
    pub kind: PickupKind,
    /// Pickup factor; required for the linear pickup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Qty<Dimensionless>>,
    pub z0: Qty<Length>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub images: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyToml {
    Series,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub topology: TopologyToml,
    pub resistance: Qty<Resistance>,
    pub inductance: Qty<Inductance>,
    pub capacitance: Qty<Capacitance>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub temperature: Qty<Temperature>,
}

/// Gas damping rates, the same on every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasConfig {
    pub gamma_cm: Qty<Frequency>,
    pub gamma_rot: Qty<Frequency>,
    pub temperature: Qty<Temperature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsToml {
    #[default]
    Exact,
    Effective,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseToml {
    #[default]
    SplitOu,
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorToml {
    #[serde(default)]
    pub dynamics: DynamicsToml,
    #[serde(default = "default_steps")]
    pub steps_per_cycle: usize,
    /// Steps per drive cycle of the companion effective run.
    #[serde(default = "default_effective_steps")]
    pub effective_steps_per_cycle: usize,
    #[serde(default)]
    pub noise: NoiseToml,
    /// In units of `l0`.
    #[serde(default = "default_escape")]
    pub escape_radius: Qty<Dimensionless>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Also run the effective dynamics from the macromotion start.
    #[serde(default, skip_serializing_if = "is_default")]
    pub compare_effective: bool,
    /// Time step of the linearized model.
    #[serde(default = "default_linear_dt")]
    pub linear_dt: Qty<Time>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub linear_euler_maruyama: bool,
}

fn default_steps() -> usize {
    256
}
fn default_effective_steps() -> usize {
    8
}
fn default_escape() -> Qty<Dimensionless> {
    Qty::new(10.0)
}
fn default_stride() -> usize {
    1
}
fn default_linear_dt() -> Qty<Time> {
    Qty::new(1e-4)
}

impl Default for IntegratorToml {
    fn default() -> Self {
        IntegratorToml {
            dynamics: DynamicsToml::default(),
            steps_per_cycle: default_steps(),
            effective_steps_per_cycle: default_effective_steps(),
            noise: NoiseToml::default(),
            escape_radius: default_escape(),
            stride: default_stride(),
            compare_effective: false,
            linear_dt: default_linear_dt(),
            linear_euler_maruyama: false,
        }
    }
}

/// Initial state. With `from_minimum` the position and orientation are
/// replaced by the effective-potential minimum nearest to them; `tilt`
/// then rotates the orientation about its nodal line. `micromotion`
/// adds the micromotion offsets to the exact start. For the linear model
/// `protocol` selects the cooling start; otherwise `position.z`, `tilt`,
/// `p_beta`, `momentum.z`, `circuit_charge` and `circuit_flux` are used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default, skip_serializing_if = "is_default")]
    pub position: [Qty<Length>; 3],
    #[serde(default, skip_serializing_if = "is_default")]
    pub momentum: [Qty<Momentum>; 3],
    #[serde(default, skip_serializing_if = "is_default")]
    pub euler: [Qty<Angle>; 3],
    #[serde(default, skip_serializing_if = "is_default")]
    pub angular_momentum: [Qty<AngularMomentum>; 3],
    #[serde(default, skip_serializing_if = "is_default")]
    pub circuit_charge: Qty<Charge>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub circuit_flux: Qty<Flux>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub from_minimum: bool,
    #[serde(default, skip_serializing_if = "is_default")]
    pub tilt: Qty<Angle>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub micromotion: bool,
    #[serde(default, skip_serializing_if = "is_default")]
    pub protocol: bool,
    #[serde(default, skip_serializing_if = "is_default")]
    pub p_beta: Qty<AngularMomentum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub duration: Qty<Time>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_member")]
    pub members: usize,
}

fn one_member() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub at: Qty<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas: Option<GasConfig>,
}

/// Frequency grid `f_min..=f_max` with `points` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub f_min: Qty<Frequency>,
    pub f_max: Qty<Frequency>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdConfig {
    pub f_min: Qty<Frequency>,
    pub f_max: Qty<Frequency>,
    pub points: usize,
    /// Also simulate the first stage and write its periodogram.
    #[serde(default, skip_serializing_if = "is_default")]
    pub periodogram: bool,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_segment_length")]
    pub segment_length: usize,
}

fn default_segments() -> usize {
    64
}
fn default_segment_length() -> usize {
    4096
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Line scan of the effective potential through the first minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub axis: Axis,
    pub half_width: Qty<Length>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolConfig {
    /// Averaging window of the energy columns.
    pub window: Qty<Time>,
}

/// A contiguous piece of the run with fixed circuit and gas.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub name: String,
    pub start: f64,
    pub end: f64,
    pub circuit: Option<CircuitConfig>,
    pub gas: Option<GasConfig>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Sets `path = value` in a TOML table, creating intermediate tables.
/// The value is read as TOML and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{assignment}` is not of the form key=value")))?;
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields one item");
    let mut node = table;
    for key in parents {
        let entry = node.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override `{path}`: `{key}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl ScenarioConfig {
    /// Parses scenario text and applies `key=value` overrides.
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let merged = toml::to_string(&table).map_err(|e| config_error(e.to_string()))?;
        let cfg: ScenarioConfig = toml::from_str(&merged).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The config with all quantities in SI, as TOML.
    pub fn normalized(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.normalized().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn validate(&self) -> Result<(), CliError> {
        let p = &self.particle;
        let has_multipoles = p.charge.is_some() || p.dipole.is_some() || p.quadrupole.is_some();
        let has_scaled = p.dipole_ql.is_some() || p.quadrupole_ql2.is_some();
        if p.point_charges.is_some() && (has_multipoles || has_scaled) {
            return Err(config_error("particle: give either point_charges or charge/multipoles, not both"));
        }
        if p.point_charges.is_none() && p.charge.is_none() {
            return Err(config_error("particle: missing `charge` (or `point_charges`)"));
        }
        if (p.dipole.is_some() && p.dipole_ql.is_some()) || (p.quadrupole.is_some() && p.quadrupole_ql2.is_some()) {
            return Err(config_error("particle: a multipole is given both in SI and in units of q l"));
        }
        if has_scaled && p.length_scale.is_none() {
            return Err(config_error("particle: dipole_ql/quadrupole_ql2 need `length_scale`"));
        }
        if self.trap.kind == TrapKind::Linear && self.trap.u_dc.si != 0.0 {
            return Err(config_error("trap: a linear trap has no u_dc"));
        }
        if let Some(pk) = &self.pickup {
            if pk.kind == PickupKind::Linear && pk.k.is_none() {
                return Err(config_error("pickup: the linear pickup needs `k`"));
            }
        }
        if self.run.members == 0 {
            return Err(config_error("run.members must be at least 1"));
        }
        if self.integrator.stride == 0 {
            return Err(config_error("integrator.stride must be at least 1"));
        }
        let mut last = 0.0;
        for (i, s) in self.schedule.iter().enumerate() {
            if s.at.si < last {
                return Err(config_error(format!("schedule[{i}].at is earlier than the previous entry")));
            }
            last = s.at.si;
        }
        Ok(())
    }

    pub fn distribution(&self) -> Result<MultipoleDistribution, CliError> {
        let p = &self.particle;
        if let Some(pcs) = &p.point_charges {
            let set = PointChargeSet::new(pcs.iter().map(|c| (c.charge.si, vec3(&c.position))).collect())?;
            return Ok(multipoles_from_point_charges(&set));
        }
        let q = p.charge.map(|c| c.si).unwrap_or(0.0);
        let l = p.length_scale.map(|l| l.si).unwrap_or(0.0);
        let dipole = match (&p.dipole, &p.dipole_ql) {
            (Some(d), _) => vec3(d),
            (_, Some(d)) => Vector3::from(*d) * (q * l),
            _ => Vector3::zeros(),
        };
        let quad = match (&p.quadrupole, &p.quadrupole_ql2) {
            (Some(c), _) => c.map(|x| x.si),
            (_, Some(c)) => c.map(|x| x * q * l * l),
            _ => [0.0; 5],
        };
        Ok(MultipoleDistribution::from_components(q, dipole, quad)?)
    }

    pub fn particle(&self) -> Result<Particle, CliError> {
        let [i1, i2, i3] = self.particle.inertia.map(|x| x.si);
        Ok(Particle::new(self.distribution()?, InertiaSpec::new(i1, i2, i3)?, self.particle.mass.si)?)
    }

    /// Cylindrically symmetric description, if the particle has one.
    pub fn symmetric_spec(&self) -> Result<SymmetricParticleSpec, CliError> {
        let d = self.distribution()?;
        let [i1, i2, i3] = self.particle.inertia.map(|x| x.si);
        let (p, qm) = (d.dipole_body(), d.quadrupole_body());
        let scale = qm.amax().max(f64::MIN_POSITIVE);
        let off = qm[(0, 1)].abs().max(qm[(0, 2)].abs()).max(qm[(1, 2)].abs());
        let symmetric = i1 == i2
            && p.x == 0.0
            && p.y == 0.0
            && off <= 1e-12 * scale
            && (qm[(0, 0)] - qm[(1, 1)]).abs() <= 1e-12 * scale;
        if !symmetric {
            return Err(config_error("particle: not cylindrically symmetric about its body 3-axis"));
        }
        Ok(SymmetricParticleSpec::new(d.charge(), p.z, -qm[(0, 0)], i1, i3)?)
    }

    pub fn omega_ac(&self) -> f64 {
        TAU * self.trap.frequency.si
    }

    pub fn trap(&self) -> Result<TrapGeometry, CliError> {
        let t = &self.trap;
        let endcap = match &t.endcap {
            Some(e) => Some(Endcap::along_z(e.length.si, e.voltage.si, e.k.si)?),
            None => None,
        };
        let mut g = match t.kind {
            TrapKind::Ring => {
                let g = TrapGeometry::ring(t.ell0.si, t.u_dc.si, t.u_ac.si, self.omega_ac())?;
                match endcap {
                    Some(e) => g.with_endcap(e),
                    None => g,
                }
            }
            TrapKind::Linear => TrapGeometry::linear(t.ell0.si, t.u_ac.si, self.omega_ac(), endcap)?,
        };
        if let Some(e) = &t.homogeneous_field {
            g = g.with_homogeneous_field(vec3(e));
        }
        Ok(g)
    }

    pub fn pickup(&self) -> Result<Option<PickupConfig>, CliError> {
        match &self.pickup {
            None => Ok(None),
            Some(p) => Ok(Some(match p.kind {
                PickupKind::Linear => PickupConfig::linear(p.k.expect("validated").si, p.z0.si)?,
                PickupKind::Plate => PickupConfig::plate_capacitor(p.z0.si)?,
            })),
        }
    }

    /// The run split at the schedule's switch times.
    pub fn stages(&self) -> Vec<Stage> {
        let end = self.run.duration.si;
        let mut out = Vec::new();
        let first = self.schedule.first().map(|s| s.at.si).unwrap_or(end).min(end);
        let mut circuit = self.circuit.clone();
        let mut gas = self.gas.clone();
        if first > 0.0 || self.schedule.is_empty() {
            out.push(Stage { name: "base".into(), start: 0.0, end: first, circuit: circuit.clone(), gas: gas.clone() });
        }
        for (i, s) in self.schedule.iter().enumerate() {
            let start = s.at.si.min(end);
            let stop = self.schedule.get(i + 1).map(|n| n.at.si).unwrap_or(end).min(end);
            if s.circuit.is_some() {
                circuit = s.circuit.clone();
            }
            if s.gas.is_some() {
                gas = s.gas.clone();
            }
            let name = s.name.clone().unwrap_or_else(|| format!("stage{}", i + 1));
            out.push(Stage { name, start, end: stop, circuit: circuit.clone(), gas: gas.clone() });
        }
        out
    }

    /// The run's stages plus the base configuration when the schedule
    /// replaces it from `t = 0`.
    pub fn all_settings(&self) -> Vec<Stage> {
        let mut stages = self.stages();
        if stages.first().map(|s| s.name != "base").unwrap_or(true) {
            stages.insert(0, Stage { name: "base".into(), start: 0.0, end: 0.0, circuit: self.circuit.clone(), gas: self.gas.clone() });
        }
        stages
    }

    pub fn system(&self, stage: &Stage) -> Result<System, CliError> {
        let mut sys = System::new(self.particle()?, self.trap()?);
        if let Some(c) = &stage.circuit {
            let pickup = self.pickup()?.ok_or_else(|| config_error("a circuit needs a [pickup] section"))?;
            let mut coupling = Coupling::new(pickup, circuit_spec(c)?);
            if self.pickup.as_ref().is_some_and(|p| p.images) {
                coupling = coupling.with_images()?;
            }
            sys = sys.with_coupling(coupling);
        }
        if let Some(g) = &stage.gas {
            sys = sys.with_gas(gas(g)?);
        }
        Ok(sys)
    }

    pub fn dynamics(&self) -> Dynamics {
        match self.integrator.dynamics {
            DynamicsToml::Exact => Dynamics::Exact,
            DynamicsToml::Effective => Dynamics::Effective,
            DynamicsToml::Stochastic => Dynamics::Stochastic,
        }
    }

    pub fn integrator(&self, steps_per_cycle: usize, seed: u64) -> IntegratorConfig {
        IntegratorConfig {
            steps_per_cycle,
            noise: match self.integrator.noise {
                NoiseToml::SplitOu => NoiseScheme::SplitOu,
                NoiseToml::EulerMaruyama => NoiseScheme::EulerMaruyama,
            },
            seed,
            escape_radius: self.integrator.escape_radius.si,
        }
    }

    /// Macromotion start position and orientation.
    pub fn initial_pose(&self) -> Result<(Vector3<f64>, Orientation), CliError> {
        let init = &self.initial;
        let [a, b, c] = init.euler.map(|x| x.si);
        let (mut r, mut o) = (vec3(&init.position), Orientation::from_euler(a, b, c));
        if init.from_minimum {
            let min = find_minima(&self.trap()?, &self.particle()?, &[(r, o)], &MinimizerOptions::default())?.remove(0);
            r = min.r;
            o = min.orientation;
        }
        if init.tilt.si != 0.0 {
            o = o.rotated(&o.nodal_line(), init.tilt.si);
        }
        Ok((r, o))
    }

    /// Initial states of the macromotion and of the exact dynamics.
    pub fn initial_states(&self) -> Result<(SystemState, SystemState), CliError> {
        let (r, o) = self.initial_pose()?;
        let init = &self.initial;
        let mut macro_state = SystemState::at_rest(r, o).with_momenta(vec3(&init.momentum), vec3(&init.angular_momentum));
        macro_state.circuit.q = init.circuit_charge.si;
        macro_state.circuit.phi = init.circuit_flux.si;
        let mut exact = macro_state;
        if init.micromotion {
            let mm = micromotion_amplitudes(&self.trap()?, &self.particle()?, &r, &o);
            exact.r = r + mm.eps0;
            exact.orientation = o.rotated_by_vector(&mm.delta0);
        }
        Ok((macro_state, exact))
    }

    /// Linearized model for one stage's circuit and gas.
    pub fn linear_model(&self, stage: &Stage) -> Result<LinearModel, CliError> {
        let pk = self.pickup.as_ref().ok_or_else(|| config_error("the linear model needs a [pickup] section"))?;
        let k = pk.k.ok_or_else(|| config_error("the linear model needs pickup.k"))?.si;
        let c = stage.circuit.as_ref().ok_or_else(|| config_error(format!("stage `{}` has no circuit", stage.name)))?;
        let gas = match &stage.gas {
            Some(g) => gas(g)?,
            None => GasCoupling::isotropic(0.0, 0.0, 0.0)?,
        };
        Ok(build_model(&self.trap()?, k, pk.z0.si, &self.symmetric_spec()?, self.particle.mass.si, &circuit_spec(c)?, &gas)?)
    }

    pub fn linear_scheme(&self) -> LinearScheme {
        if self.integrator.linear_euler_maruyama {
            LinearScheme::EulerMaruyama
        } else {
            LinearScheme::Exact
        }
    }

    /// Linear-model start: the cooling protocol or the `[initial]` values.
    pub fn linear_initial(&self, first: &LinearModel) -> Vector6<f64> {
        let init = &self.initial;
        if init.protocol {
            let t_gas = self.gas.as_ref().map(|g| g.temperature.si).unwrap_or(0.0);
            return cooling_initial_state(first, t_gas);
        }
        Vector6::new(
            init.position[2].si,
            init.tilt.si,
            init.circuit_charge.si,
            init.momentum[2].si,
            init.p_beta.si,
            init.circuit_flux.si,
        )
    }
}

pub fn circuit_spec(c: &CircuitConfig) -> Result<CircuitSpec, CliError> {
    let topology = match c.topology {
        TopologyToml::Series => Topology::Series,
        TopologyToml::Parallel => Topology::Parallel,
    };
    Ok(CircuitSpec::new(topology, c.resistance.si, c.inductance.si, c.capacitance.si, c.temperature.si)?)
}

pub fn gas(g: &GasConfig) -> Result<GasCoupling, CliError> {
    Ok(GasCoupling::isotropic(g.gamma_cm.si, g.gamma_rot.si, g.temperature.si)?)
}
