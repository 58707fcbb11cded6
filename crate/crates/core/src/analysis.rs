//! Post-processing of simulated series: cycle averages, decay-rate fits,
//! periodograms and the thermal distributions of a driven particle.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::charge::Particle;
use crate::constants::K_B;
use crate::error::{Error, Result};
use crate::rotor::{inverse_inertia, Orientation};
use crate::trap::{effective_potential, momentum_micromotion_correction, TrapGeometry};

/// Number of bootstrap resamples behind every reported uncertainty.
pub const BOOTSTRAP_RESAMPLES: usize = 100;
const BOOTSTRAP_SEED: u64 = 0x5eed;

/// Uniformly sampled columns sharing one time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    labels: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, labels: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        if labels.len() != columns.len() || columns.is_empty() {
            return Err(Error::param("columns", "need one label per column and at least one column"));
        }
        if columns.iter().any(|c| c.len() != columns[0].len()) {
            return Err(Error::param("columns", "columns differ in length"));
        }
        Ok(TimeSeries { t0, dt, labels, columns })
    }

    pub fn single(t0: f64, dt: f64, label: &str, values: Vec<f64>) -> Result<Self> {
        Self::new(t0, dt, vec![label.to_string()], vec![values])
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.labels.iter().position(|l| l == label).map(|i| self.columns[i].as_slice())
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}

/// Sliding boxcar mean over one drive period `2 pi / omega_ac`, rounded to
/// whole samples, stamped at the window centers.
pub fn cycle_average(series: &TimeSeries, omega_ac: f64) -> Result<TimeSeries> {
    if !(omega_ac > 0.0) {
        return Err(Error::param("omega_ac", "must be positive"));
    }
    let n = ((TAU / omega_ac) / series.dt).round().max(1.0) as usize;
    if n > series.len() {
        return Err(Error::SeriesTooShort(format!("window of {n} samples exceeds {} samples", series.len())));
    }
    let columns = series
        .columns
        .iter()
        .map(|c| {
            let mut out = Vec::with_capacity(c.len() - n + 1);
            for k in 0..=c.len() - n {
                out.push(c[k..k + n].iter().sum::<f64>() / n as f64);
            }
            out
        })
        .collect();
    TimeSeries::new(series.t0 + 0.5 * (n - 1) as f64 * series.dt, series.dt, series.labels.clone(), columns)
}

/// Exponential decay rate with a bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub uncertainty: f64,
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mt, my) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (mt / n, my / n);
    let (sty, stt) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt).powi(2)));
    sty / stt
}

/// Least-squares slope of `-ln E` against time.
pub fn fit_decay_rate(t: &[f64], energy: &[f64]) -> Result<DecayFit> {
    if t.len() != energy.len() || t.len() < 3 {
        return Err(Error::SeriesTooShort("need at least three (t, E) pairs".into()));
    }
    if let Some(bad) = energy.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Domain(format!("energies must be positive, found {bad}")));
    }
    let points: Vec<(f64, f64)> = t.iter().zip(energy).map(|(t, e)| (*t, e.ln())).collect();
    let rate = -slope(&points);
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut rates = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut sample = vec![(0.0, 0.0); points.len()];
    while rates.len() < BOOTSTRAP_RESAMPLES {
        for s in sample.iter_mut() {
            *s = points[rng.random_range(0..points.len())];
        }
        let r = -slope(&sample);
        if r.is_finite() {
            rates.push(r);
        }
    }
    Ok(DecayFit { rate, uncertainty: std_dev(&rates) })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Segment-averaged one-sided spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Angular frequencies `2 pi k / (L dt)`, `k = 0..=L/2`.
    pub omega: Vec<f64>,
    /// One-sided density `G = 2 S` in the `1/2 pi` convention, so that
    /// `sum G d_omega` is the mean segment variance.
    pub psd: Vec<f64>,
    /// Standard error of each bin from the spread over segments.
    pub stderr: Vec<f64>,
    pub d_omega: f64,
}

/// Splits `values` into `segments` equal pieces, removes each piece's mean
/// and averages `|FFT|^2` with a rectangular window.
pub fn periodogram(values: &[f64], dt: f64, segments: usize) -> Result<Periodogram> {
    if segments == 0 || values.len() < 16 * segments {
        return Err(Error::SeriesTooShort(format!("{} samples for {segments} segments", values.len())));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let len = values.len() / segments;
    let bins = len / 2 + 1;
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut per_segment = vec![vec![0.0; bins]; segments];
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (s, out) in per_segment.iter_mut().enumerate() {
        let seg = &values[s * len..(s + 1) * len];
        let m = mean(seg);
        for (b, v) in buf.iter_mut().zip(seg) {
            *b = Complex::new(v - m, 0.0);
        }
        fft.process(&mut buf);
        for (k, o) in out.iter_mut().enumerate() {
            let twice = if k == 0 || (len.is_multiple_of(2) && k == len / 2) { 1.0 } else { 2.0 };
            *o = twice * buf[k].norm_sqr() * dt / (TAU * len as f64);
        }
    }
    let d_omega = TAU / (len as f64 * dt);
    let mut psd = vec![0.0; bins];
    let mut stderr = vec![0.0; bins];
    for k in 0..bins {
        let column: Vec<f64> = per_segment.iter().map(|s| s[k]).collect();
        psd[k] = mean(&column);
        stderr[k] = if segments > 1 { std_dev(&column) / (segments as f64).sqrt() } else { psd[k] };
    }
    Ok(Periodogram { omega: (0..bins).map(|k| k as f64 * d_omega).collect(), psd, stderr, d_omega })
}

/// Standard deviation of the `z` momentum of a dipole-free particle in
/// thermal equilibrium in a ring trap at drive phase `omega_ac t`.
pub fn momentum_marginal_sigma(t: f64, mass: f64, temperature: f64, omega_ac: f64) -> f64 {
    (mass * K_B * temperature * (2.0 - (2.0 * omega_ac * t).cos())).sqrt()
}

/// `f_t(P_z)`, a normalized Gaussian with variance `m k_B T (2 - cos 2 w t)`.
pub fn momentum_marginal_density(p_z: f64, t: f64, mass: f64, temperature: f64, omega_ac: f64) -> Result<f64> {
    let s = checked_sigma(t, mass, temperature, omega_ac)?;
    Ok((-0.5 * (p_z / s).powi(2)).exp() / (s * (TAU).sqrt()))
}

pub fn momentum_marginal_cdf(p_z: f64, t: f64, mass: f64, temperature: f64, omega_ac: f64) -> Result<f64> {
    let s = checked_sigma(t, mass, temperature, omega_ac)?;
    Ok(standard_normal_cdf(p_z / s))
}

fn checked_sigma(t: f64, mass: f64, temperature: f64, omega_ac: f64) -> Result<f64> {
    if !(temperature > 0.0 && mass > 0.0) {
        return Err(Error::param("T", "temperature and mass must be positive"));
    }
    Ok(momentum_marginal_sigma(t, mass, temperature, omega_ac))
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

/// Exponent of the driven thermal state: Boltzmann weight of the
/// macromotion momenta `P + dP_t`, `J + dJ_t` in the effective potential.
#[allow(clippy::too_many_arguments)]
pub fn equilibrium_log_weight(
    trap: &TrapGeometry,
    particle: &Particle,
    r: &Vector3<f64>,
    p: &Vector3<f64>,
    o: &Orientation,
    j: &Vector3<f64>,
    t: f64,
    temperature: f64,
) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::param("T", "must be positive"));
    }
    let kt = K_B * temperature;
    let (dp, dj) = momentum_micromotion_correction(trap, &particle.dist, r, o, t);
    let pm = p + dp;
    let jm = j + dj;
    let inv_i = inverse_inertia(o, &particle.inertia);
    let energy =
        pm.norm_squared() / (2.0 * particle.mass) + 0.5 * jm.dot(&(inv_i * jm)) + effective_potential(trap, particle, r, o);
    Ok(-energy / kt)
}

#[allow(clippy::too_many_arguments)]
pub fn equilibrium_weight(
    trap: &TrapGeometry,
    particle: &Particle,
    r: &Vector3<f64>,
    p: &Vector3<f64>,
    o: &Orientation,
    j: &Vector3<f64>,
    t: f64,
    temperature: f64,
) -> Result<f64> {
    Ok(equilibrium_log_weight(trap, particle, r, p, o, j, t, temperature)?.exp())
}

/// Time-independent coordinate marginal `sin(beta) exp(-V_eff / k_B T)`,
/// unnormalized.
pub fn coordinate_marginal_weight(
    trap: &TrapGeometry,
    particle: &Particle,
    r: &Vector3<f64>,
    o: &Orientation,
    temperature: f64,
) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::param("T", "must be positive"));
    }
    Ok(o.beta().sin() * (-effective_potential(trap, particle, r, o) / (K_B * temperature)).exp())
}

/// One-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    /// Asymptotic p-value.
    pub p_value: f64,
    pub n: usize,
}

pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsTest> {
    if samples.is_empty() {
        return Err(Error::SeriesTooShort("no samples".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let statistic = x.iter().enumerate().fold(0.0f64, |d, (i, v)| {
        let f = cdf(*v);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    });
    Ok(KsTest { statistic, p_value: kolmogorov_q(statistic, x.len()), n: x.len() })
}

/// `P(D > d)` for `n` samples with the Stephens finite-size correction.
fn kolmogorov_q(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Mean of the `P_z^2 / 2m` series over whole drive periods divided by
/// `k_B T`; unity in equilibrium.
pub fn kinetic_energy_ratio(p_z: &[f64], mass: f64, temperature: f64) -> f64 {
    p_z.iter().map(|p| p * p).sum::<f64>() / (2.0 * mass * p_z.len() as f64) / (K_B * temperature)
}

#[cfg(test)]
mod tests;
