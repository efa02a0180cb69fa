//! Finite-difference and closed-form oracles for the joint survival function
//! and its density family. None of these checks reuse the code under test:
//! derivatives come from central differences of the survival function, and
//! special cases come from the plain exponential law.

use curefrail::frailty::{FrailtySurvival, LagDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(rng: &mut ChaCha8Rng, dim: usize) -> FrailtySurvival {
    let trunc = if rng.gen_bool(0.5) { Some(10.0) } else { None };
    let rates = (0..dim)
        .map(|_| LagDistribution::new(rng.gen_range(0.2..2.0), trunc).unwrap())
        .collect();
    let alpha = if dim >= 2 && rng.gen_bool(0.8) {
        rng.gen_range(0.55..0.999)
    } else {
        1.0
    };
    FrailtySurvival::new(rates, alpha).unwrap()
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-12)
}

/// The marginal screening-density atom must equal -dS/dy_k, checked against
/// a central difference of the survival function itself.
#[test]
fn neg_partial_density_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for trial in 0..300 {
        let dim = 1 + (trial % 2);
        let fs = random_model(&mut rng, dim);
        let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..4.0)).collect();
        let k = rng.gen_range(0..dim);
        let h = 1e-5 * y[k].max(1.0);
        let mut hi = y.clone();
        let mut lo = y.clone();
        hi[k] += h;
        lo[k] -= h;
        let fd = (fs.joint_survival(&lo).unwrap() - fs.joint_survival(&hi).unwrap()) / (2.0 * h);
        let got = fs.neg_partial_density(&y, k).unwrap();
        assert!(
            rel_err(got, fd) < 1e-5,
            "trial {trial}: density {got} vs FD {fd} at y={y:?}, k={k}"
        );
        let lg = fs.log_neg_partial_density(&y, k).unwrap();
        assert!(rel_err(lg.exp(), got) < 1e-12);
    }
}

/// The two-screening density atom must equal d2S/dy1dy2, checked against a
/// mixed central difference of the survival function.
#[test]
fn full_density_matches_mixed_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..300 {
        let fs = random_model(&mut rng, 2);
        let y = [rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)];
        let h = 1e-4;
        let s = |a: f64, b: f64| fs.joint_survival(&[a, b]).unwrap();
        let fd = (s(y[0] + h, y[1] + h) - s(y[0] + h, y[1] - h) - s(y[0] - h, y[1] + h)
            + s(y[0] - h, y[1] - h))
            / (4.0 * h * h);
        let got = fs.full_density(&y).unwrap();
        assert!(
            rel_err(got, fd) < 1e-5,
            "trial {trial}: density {got} vs FD {fd} at y={y:?}"
        );
        let lg = fs.log_full_density(&y).unwrap();
        assert!(rel_err(lg.exp(), got) < 1e-12);
    }
}

/// At alpha = 1 the joint law factorizes into independent exponentials, so
/// every atom has an elementary closed form.
#[test]
fn independence_reduces_to_exponential_products() {
    let fs = FrailtySurvival::new(
        vec![
            LagDistribution::untruncated(0.6).unwrap(),
            LagDistribution::untruncated(1.3).unwrap(),
        ],
        1.0,
    )
    .unwrap();
    let y = [0.8, 1.7];
    let s = (-0.6f64 * y[0] - 1.3 * y[1]).exp();
    assert!((fs.joint_survival(&y).unwrap() - s).abs() < 1e-14);
    assert!((fs.neg_partial_density(&y, 0).unwrap() - 0.6 * s).abs() < 1e-14);
    assert!((fs.full_density(&y).unwrap() - 0.6 * 1.3 * s).abs() < 1e-14);
}

/// Box mass (the truncation normalizer) against a Monte Carlo estimate from
/// the untruncated joint law.
#[test]
fn box_mass_matches_monte_carlo() {
    let fs = FrailtySurvival::new(
        vec![
            LagDistribution::new(0.5, Some(3.0)).unwrap(),
            LagDistribution::new(0.9, Some(3.0)).unwrap(),
        ],
        0.8,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 400_000;
    let mut hits = 0usize;
    for _ in 0..n {
        let z = curefrail::simulator::draw_frailty_stable(0.8, &mut rng).unwrap();
        let y1 = rng.gen::<f64>().ln() / (-0.5 * z);
        let y2 = rng.gen::<f64>().ln() / (-0.9 * z);
        if y1 <= 3.0 && y2 <= 3.0 {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / n as f64;
    let mass = fs.box_mass().unwrap();
    let se = (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    assert!(
        (mass - p_hat).abs() < 4.0 * se,
        "box mass {mass} vs MC {p_hat} (se {se})"
    );
}

/// Median lag: the boxed tail mass at the reported median must be half the
/// box mass, and the untruncated case has a closed form.
#[test]
fn median_lag_bisects_boxed_mass() {
    let fs = FrailtySurvival::new(
        vec![
            LagDistribution::new(0.7, Some(10.0)).unwrap(),
            LagDistribution::new(1.1, Some(10.0)).unwrap(),
        ],
        0.9,
    )
    .unwrap();
    for k in 0..2 {
        let med = fs.median_lag(k).unwrap();
        let ratio = fs.boxed_tail_mass(k, med).unwrap() / fs.box_mass().unwrap();
        assert!((ratio - 0.5).abs() < 1e-8, "k={k}: tail ratio {ratio}");
    }
    let free = FrailtySurvival::new(vec![LagDistribution::untruncated(0.25).unwrap()], 1.0).unwrap();
    assert!((free.median_lag(0).unwrap() - 2f64.ln() / 0.25).abs() < 1e-10);
}
