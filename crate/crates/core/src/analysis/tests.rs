use super::*;
use crate::charge::MultipoleDistribution;
use crate::rotor::InertiaSpec;
use approx::assert_relative_eq;
use std::f64::consts::PI;
use proptest::prelude::{prop_assert, proptest};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const OMEGA: f64 = TAU * 1e6;

fn series(values: Vec<f64>, dt: f64) -> TimeSeries {
    TimeSeries::single(0.0, dt, "x", values).unwrap()
}

#[test]
fn constant_survives_averaging() {
    let s = series(vec![3.5; 500], 1e-8);
    let avg = cycle_average(&s, OMEGA).unwrap();
    assert_eq!(avg.len(), 401);
    assert!(avg.column("x").unwrap().iter().all(|v| (v - 3.5).abs() < 1e-14));
    assert_relative_eq!(avg.t0(), 49.5e-8, max_relative = 1e-12);
}

#[test]
fn drive_harmonics_average_out() {
    let dt = 1e-8;
    let values = (0..2000).map(|k| (OMEGA * k as f64 * dt + 0.3).cos() + 0.5 * (2.0 * OMEGA * k as f64 * dt).sin()).collect();
    let avg = cycle_average(&series(values, dt), OMEGA).unwrap();
    let worst = avg.columns()[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn slow_tone_is_attenuated_by_a_sinc() {
    let dt = 1e-8;
    let w = OMEGA / 7.0;
    let values = (0..5000).map(|k| (w * k as f64 * dt).cos()).collect();
    let avg = cycle_average(&series(values, dt), OMEGA).unwrap();
    let x = w * TAU / OMEGA / 2.0;
    let expected = x.sin() / x;
    let amplitude = avg.columns()[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert_relative_eq!(amplitude, expected, max_relative = 2e-3);
}

#[test]
fn short_series_is_rejected() {
    let s = series(vec![1.0; 50], 1e-8);
    assert!(matches!(cycle_average(&s, OMEGA), Err(Error::SeriesTooShort(_))));
    assert!(TimeSeries::new(0.0, 1.0, vec!["a".into()], vec![vec![1.0], vec![2.0]]).is_err());
    assert!(TimeSeries::new(0.0, 0.0, vec!["a".into()], vec![vec![1.0]]).is_err());
}

#[test]
fn exact_exponential_has_exact_rate() {
    let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let e: Vec<f64> = t.iter().map(|t| 7.0 * (-0.8 * t).exp()).collect();
    let fit = fit_decay_rate(&t, &e).unwrap();
    assert_relative_eq!(fit.rate, 0.8, max_relative = 1e-12);
    assert!(fit.uncertainty < 1e-10);
}

#[test]
fn noisy_decay_uncertainty_covers_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
    let e: Vec<f64> = t
        .iter()
        .map(|t| {
            let n: f64 = StandardNormal.sample(&mut rng);
            (-0.5 * t + 0.05 * n).exp()
        })
        .collect();
    let fit = fit_decay_rate(&t, &e).unwrap();
    // slope error of an ordinary least-squares fit
    let st = t.iter().map(|x| (x - 4.975f64).powi(2)).sum::<f64>().sqrt();
    let analytic = 0.05 / st;
    assert!((fit.rate - 0.5).abs() < 4.0 * analytic);
    assert!(fit.uncertainty > 0.6 * analytic && fit.uncertainty < 1.5 * analytic, "{} vs {analytic}", fit.uncertainty);
    assert_eq!(fit, fit_decay_rate(&t, &e).unwrap());
}

#[test]
fn non_positive_energy_is_a_domain_error() {
    let t = [0.0, 1.0, 2.0];
    assert!(matches!(fit_decay_rate(&t, &[1.0, 0.0, 0.5]), Err(Error::Domain(_))));
    assert!(matches!(fit_decay_rate(&t, &[1.0, f64::NAN, 0.5]), Err(Error::Domain(_))));
}

#[test]
fn periodogram_satisfies_parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..4096).map(|_| StandardNormal.sample(&mut rng)).collect();
    let dt = 1e-3;
    for segments in [1, 4, 16] {
        let pg = periodogram(&x, dt, segments).unwrap();
        let len = x.len() / segments;
        let var = (0..segments)
            .map(|s| {
                let seg = &x[s * len..(s + 1) * len];
                let m = mean(seg);
                seg.iter().map(|v| (v - m).powi(2)).sum::<f64>() / len as f64
            })
            .sum::<f64>()
            / segments as f64;
        let area: f64 = pg.psd.iter().sum::<f64>() * pg.d_omega;
        assert_relative_eq!(area, var, max_relative = 1e-10);
    }
}

#[test]
fn white_noise_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sigma = 2.0;
    let dt = 1e-4;
    let x: Vec<f64> = (0..1 << 16).map(|_| { let n: f64 = StandardNormal.sample(&mut rng); sigma * n }).collect();
    let pg = periodogram(&x, dt, 64).unwrap();
    let interior = &pg.psd[1..pg.psd.len() - 1];
    let level = mean(interior);
    assert_relative_eq!(level, sigma * sigma * dt / PI, max_relative = 0.01);
    let rel = mean(&pg.stderr[1..pg.stderr.len() - 1]) / level;
    assert_relative_eq!(rel, 1.0 / 8.0, max_relative = 0.1);
}

#[test]
fn tone_lands_in_its_bin() {
    let dt = 1e-3;
    let len = 1024;
    let k0 = 100;
    let w = TAU * k0 as f64 / (len as f64 * dt);
    let x: Vec<f64> = (0..4 * len).map(|k| (w * k as f64 * dt).sin()).collect();
    let pg = periodogram(&x, dt, 4).unwrap();
    let peak = pg.psd.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(peak, k0);
    assert_relative_eq!(pg.psd[k0] * pg.d_omega, 0.5, max_relative = 1e-9);
    assert_relative_eq!(pg.omega[k0], w, max_relative = 1e-12);
    assert!(periodogram(&x[..100], dt, 8).is_err());
}

#[test]
fn marginal_is_normalized_with_phase_dependent_width() {
    let (m, t) = (1e-18, 2.0);
    for phase in [0.0, 0.4, PI / 2.0] {
        let time = phase / OMEGA;
        let s = momentum_marginal_sigma(time, m, t, OMEGA);
        let n = 4000;
        let h = 20.0 * s / n as f64;
        let integral: f64 =
            (0..=n).map(|k| momentum_marginal_density(-10.0 * s + k as f64 * h, time, m, t, OMEGA).unwrap()).sum::<f64>()
                * h;
        assert_relative_eq!(integral, 1.0, max_relative = 1e-8);
    }
    let quarter = PI / 2.0 / OMEGA;
    assert_relative_eq!(momentum_marginal_sigma(quarter, m, t, OMEGA).powi(2), 3.0 * m * K_B * t, max_relative = 1e-12);
    assert_relative_eq!(momentum_marginal_sigma(0.0, m, t, OMEGA).powi(2), m * K_B * t, max_relative = 1e-12);
    assert_relative_eq!(momentum_marginal_cdf(0.0, 0.3, m, t, OMEGA).unwrap(), 0.5, epsilon = 1e-15);
    assert!(momentum_marginal_density(0.0, 0.0, m, 0.0, OMEGA).is_err());
}

/// Integrating the full driven Boltzmann weight of a point charge over `z`
/// reproduces the Gaussian marginal of `P_z`.
#[test]
fn weight_marginalizes_to_momentum_gaussian() {
    let mass = 1e-18;
    let q = 1e4 * crate::constants::ELEMENTARY_CHARGE;
    let ell0 = 1e-3;
    let u = 0.02 * mass * OMEGA * OMEGA * ell0 * ell0 / q;
    let trap = TrapGeometry::ring(ell0, 0.0, u, OMEGA).unwrap();
    let particle = Particle::new(MultipoleDistribution::monopole(q), InertiaSpec::isotropic(1e-33).unwrap(), mass).unwrap();
    let temperature = 1e3;
    let o = Orientation::identity();
    let time = 0.37 / OMEGA;
    let sigma = momentum_marginal_sigma(time, mass, temperature, OMEGA);
    let z_scale = {
        let probe = 1e-6;
        let v = effective_potential(&trap, &particle, &Vector3::new(0.0, 0.0, probe), &o);
        (K_B * temperature * probe * probe / (2.0 * v)).sqrt()
    };
    let n = 600;
    let hz = 16.0 * z_scale / n as f64;
    let marginal = |pz: f64| {
        (0..=n)
            .map(|k| {
                let r = Vector3::new(0.0, 0.0, -8.0 * z_scale + k as f64 * hz);
                equilibrium_weight(&trap, &particle, &r, &Vector3::new(0.0, 0.0, pz), &o, &Vector3::zeros(), time, temperature)
                    .unwrap()
            })
            .sum::<f64>()
    };
    let reference = marginal(0.0);
    for x in [0.5, 1.0, 2.0] {
        let ratio = marginal(x * sigma) / reference;
        assert_relative_eq!(ratio, (-0.5 * x * x).exp(), max_relative = 1e-6);
    }
}

#[test]
fn coordinate_marginal_carries_the_haar_factor() {
    let trap = TrapGeometry::ring(1e-3, 0.0, 10.0, OMEGA).unwrap();
    let particle = Particle::new(MultipoleDistribution::monopole(1e-15), InertiaSpec::isotropic(1e-33).unwrap(), 1e-18).unwrap();
    let r = Vector3::zeros();
    let w = |b: f64| coordinate_marginal_weight(&trap, &particle, &r, &Orientation::from_euler(0.2, b, 0.1), 10.0).unwrap();
    assert_relative_eq!(w(0.3) / w(1.2), 0.3f64.sin() / 1.2f64.sin(), max_relative = 1e-9);
}

#[test]
fn ks_accepts_matching_and_rejects_shifted_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let good = ks_test(&x, standard_normal_cdf).unwrap();
    assert!(good.p_value > 0.01, "{good:?}");
    let bad = ks_test(&x, |v| standard_normal_cdf(v - 0.2)).unwrap();
    assert!(bad.p_value < 1e-6, "{bad:?}");
    assert!(ks_test(&[], standard_normal_cdf).is_err());
}

#[test]
fn ks_distribution_tail() {
    // classical critical value of the Kolmogorov distribution at 5%
    assert_relative_eq!(kolmogorov_q(1.3581 / (1e8f64.sqrt() + 0.12), 100_000_000), 0.05, max_relative = 1e-3);
    assert_eq!(kolmogorov_q(0.0, 10), 1.0);
}

#[test]
fn kinetic_ratio_of_equipartition() {
    let m = 2.0;
    let t = 1.0 / K_B;
    assert_relative_eq!(kinetic_energy_ratio(&[1.0, -1.0, 1.0], m, t), 0.25);
}

proptest! {
    #[test]
    fn averaging_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let z: Vec<f64> = x.iter().zip(&y).map(|(x, y)| a * x + b * y).collect();
        let avg = |v: Vec<f64>| cycle_average(&series(v, 1e-8), OMEGA).unwrap().columns()[0].clone();
        let (ax, ay, az) = (avg(x), avg(y), avg(z));
        for k in 0..az.len() {
            prop_assert!((az[k] - a * ax[k] - b * ay[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn periodogram_is_non_negative(seed in 0u64..1000, segments in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..512).map(|_| rng.random::<f64>() - 0.5).collect();
        let pg = periodogram(&x, 0.1, segments).unwrap();
        prop_assert!(pg.psd.iter().all(|v| *v >= 0.0));
        prop_assert!(pg.psd[0] < 1e-20);
    }
}
