//! Acceptance gate: one test per release criterion, each ending with a
//! single pass line. The two desk-scale recovery studies run the full
//! published design and are `#[ignore]`d by default; their smoke-scale
//! counterparts run in CI time.

use curefrail::diagnostics::{gelman_rubin, geweke, summarize};
use curefrail::frailty::{FrailtySurvival, LagDistribution};
use curefrail::model::{ModelConfig, ParameterState};
use curefrail::sampler::{run_chain, run_chains, ChainConfig, PriorConfig};
use curefrail::simulator::{draw_frailty_stable, CensoringModel, Scenario};
use curefrail::study::{replicate_study, StudyReport, STUDY_PARAMS};
use curefrail::subject::{EligibilityTimeline, SubjectRecord};
use curefrail::trajectory::{
    case_probability, category_models, expected_eta, observable_count_probs, prepare_dataset,
    CategoryModel, Placement,
};
use curefrail::{integrate_1d, QuadMethod, QuadratureSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::Command;

const LAG_BOUND: f64 = 10.0;

fn fit_quad() -> QuadratureSpec {
    QuadratureSpec {
        method: QuadMethod::FixedGaussLegendre,
        node_count: 32,
        ..QuadratureSpec::default()
    }
}

fn pass(n: usize, what: &str) {
    println!("acceptance criterion {n:02} ({what}): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 1: parameter recovery on the reference scenario.
// ---------------------------------------------------------------------------

fn recovery_report(n_subjects: usize, replicates: usize, ccfg: &ChainConfig) -> StudyReport {
    let mut sc = Scenario::from_grid(1, 1).unwrap();
    sc.n_subjects = n_subjects;
    let priors = PriorConfig::defaults(2);
    replicate_study(&[sc], replicates, &priors, ccfg, &mut |_| {}).unwrap()
}

fn cell<'r>(report: &'r StudyReport, parameter: &str) -> &'r curefrail::study::StudyCell {
    report
        .cells
        .iter()
        .find(|c| c.parameter == parameter)
        .unwrap()
}

#[test]
fn criterion_01_parameter_recovery_smoke_scale() {
    let ccfg = ChainConfig {
        iterations: 5_000,
        burn_in: 1_500,
        thin: 5,
        n_chains: 1,
        seed: 71,
        quad: fit_quad(),
        ..Default::default()
    };
    let report = recovery_report(300, 3, &ccfg);
    for p in ["theta0", "theta1", "theta2"] {
        let c = cell(&report, p);
        assert_eq!(c.n_failed, 0, "{p}: replicates failed");
        assert!(
            c.bias.abs() <= 0.10,
            "{p}: bias {} exceeds smoke tolerance 0.10",
            c.bias
        );
    }
    pass(1, "theta recovered on 3 smoke replicates of the reference scenario");
}

#[test]
#[ignore = "full published design: ~20 fits of 20k sweeps each, runs for hours"]
fn criterion_01_parameter_recovery_desk_scale() {
    let ccfg = ChainConfig {
        iterations: 20_000,
        burn_in: 5_000,
        thin: 5,
        n_chains: 1,
        seed: 71,
        quad: fit_quad(),
        ..Default::default()
    };
    let report = recovery_report(1_000, 20, &ccfg);
    for p in ["theta0", "theta1", "theta2"] {
        let c = cell(&report, p);
        assert!(c.bias.abs() <= 0.05, "{p}: bias {}", c.bias);
        assert!(c.rmse <= 0.06, "{p}: rmse {}", c.rmse);
    }
    let c = cell(&report, "median_lag_1_1");
    assert!(c.bias.abs() <= 0.75 && c.rmse <= 1.2, "lag_1_1 bias {} rmse {}", c.bias, c.rmse);
    assert!(cell(&report, "median_lag_2_1").rmse <= 1.6);
    assert!(cell(&report, "median_lag_2_2").rmse <= 4.0);
    assert!(cell(&report, "alpha").bias.abs() <= 0.15);
    pass(1, "full-scale recovery study within published tolerances");
}

// ---------------------------------------------------------------------------
// Criterion 2: the full scenario grid runs end to end with streamed partials.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_full_grid_study_streams_partials() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.json");
    std::fs::write(
        &cfg,
        r#"{
  "schema_version": 1,
  "replicates": 1,
  "n_subjects": 60,
  "chain": {
    "iterations": 300, "burn_in": 100, "thin": 2, "n_chains": 1, "seed": 5,
    "proposal_scales": {"gamma": 0.5, "lambda": 0.3, "kappa": 0.5, "alpha": 0.5, "tau": 0.5, "beta": 0.3, "omega": 0.3},
    "adapt_during_burnin": true,
    "quad": {"method": "fixed-gauss-legendre", "abs_tol": 1e-10, "rel_tol": 1e-8, "max_depth": 40, "node_count": 32}
  }
}"#,
    )
    .unwrap();
    let out = dir.path().join("study");
    let res = Command::new(env!("CARGO_BIN_EXE_curefrail"))
        .args(["study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let partials = std::fs::read_to_string(out.join("replicates.csv")).unwrap();
    let rows: Vec<&str> = partials.lines().collect();
    assert_eq!(rows.len(), 1 + 6, "one streamed row per grid cell");
    for lt in 1..=3 {
        for nls in 1..=2 {
            assert!(partials.contains(&format!("LT{lt}xNLS{nls}")), "cell LT{lt}xNLS{nls} missing");
        }
    }
    let cells = std::fs::read_to_string(out.join("study.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 6 * STUDY_PARAMS.len());
    pass(2, "all six grid scenarios fitted with streamed per-replicate rows");
}

// ---------------------------------------------------------------------------
// Criterion 3: a binary covariate shifting the cure mixture is recovered.
// ---------------------------------------------------------------------------

const THETA_GROUP_A: (f64, f64, f64) = (0.40, 0.35, 0.25);
const THETA_GROUP_B: (f64, f64, f64) = (0.25, 0.50, 0.25);

fn covariate_dataset(n_per_group: usize, seed: u64) -> Vec<SubjectRecord> {
    let mut records = Vec::new();
    for (group, theta) in [(0.0, THETA_GROUP_A), (1.0, THETA_GROUP_B)] {
        let mut sc = Scenario::from_grid(2, 1).unwrap();
        sc.theta = theta;
        sc.n_subjects = n_per_group;
        let (mut recs, _) = curefrail::simulator::generate_dataset(&sc, seed + group as u64).unwrap();
        for (i, r) in recs.iter_mut().enumerate() {
            r.id = format!("g{group}_{i}");
            r.covariates_theta = vec![group];
        }
        records.extend(recs);
    }
    records
}

fn covariate_recovery(n_per_group: usize, ccfg: &ChainConfig, tol: f64) {
    let records = covariate_dataset(n_per_group, 1234);
    let mut cfg = ModelConfig::new(2, EligibilityTimeline::default()).unwrap();
    cfg.theta_link = true;
    let prepared = prepare_dataset(records, &cfg.timeline, 2).unwrap();
    let chains = run_chains(&prepared, &cfg, &PriorConfig::defaults(2), ccfg).unwrap();
    let summary = summarize(&chains).unwrap();
    let b = |name: &str| summary.get(name).unwrap().median;
    let beta = [[b("beta_1_0"), b("beta_1_1")], [b("beta_2_0"), b("beta_2_1")]];
    for (x, truth) in [(0.0, THETA_GROUP_A), (1.0, THETA_GROUP_B)] {
        let e1 = (beta[0][0] + beta[0][1] * x).exp();
        let e2 = (beta[1][0] + beta[1][1] * x).exp();
        let denom = 1.0 + e1 + e2;
        let implied = [1.0 / denom, e1 / denom, e2 / denom];
        let want = [truth.0, truth.1, truth.2];
        for j in 0..3 {
            assert!(
                (implied[j] - want[j]).abs() <= tol,
                "group x={x}, theta{j}: implied {} vs true {} (tol {tol})",
                implied[j],
                want[j]
            );
        }
    }
}

#[test]
fn criterion_03_covariate_shift_recovery_smoke_scale() {
    let ccfg = ChainConfig {
        iterations: 1_800,
        burn_in: 600,
        thin: 4,
        n_chains: 1,
        seed: 81,
        quad: fit_quad(),
        ..Default::default()
    };
    covariate_recovery(2_000, &ccfg, 0.04);
    pass(3, "15-point covariate shift in theta recovered within 4 points");
}

#[test]
#[ignore = "full design at 20k subjects, runs for roughly an hour"]
fn criterion_03_covariate_shift_recovery_desk_scale() {
    let ccfg = ChainConfig {
        iterations: 4_000,
        burn_in: 1_500,
        thin: 5,
        n_chains: 1,
        seed: 81,
        quad: fit_quad(),
        ..Default::default()
    };
    covariate_recovery(10_000, &ccfg, 0.04);
    pass(3, "covariate shift recovered within 4 points at full scale");
}

// ---------------------------------------------------------------------------
// Criterion 4: randomized finite-difference checks of the density family.
// ---------------------------------------------------------------------------

fn random_model(rng: &mut ChaCha8Rng, dim: usize) -> FrailtySurvival {
    let trunc = if rng.gen_bool(0.5) { Some(LAG_BOUND) } else { None };
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

#[test]
fn criterion_04_finite_difference_derivative_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1e-12);
    for trial in 0..600 {
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
        assert!(rel(got, fd) < 1e-5, "trial {trial}: {got} vs {fd}");
    }
    for trial in 0..400 {
        let fs = random_model(&mut rng, 2);
        let y = [rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)];
        let h = 1e-4;
        let s = |a: f64, b: f64| fs.joint_survival(&[a, b]).unwrap();
        let fd = (s(y[0] + h, y[1] + h) - s(y[0] + h, y[1] - h) - s(y[0] - h, y[1] + h)
            + s(y[0] - h, y[1] - h))
            / (4.0 * h * h);
        let got = fs.full_density(&y).unwrap();
        assert!(rel(got, fd) < 1e-5, "trial {trial}: {got} vs {fd}");
    }
    pass(4, "1000 randomized derivative checks within 1e-5 relative error");
}

// ---------------------------------------------------------------------------
// Criterion 5: quadrature pattern probabilities against brute-force MC.
// ---------------------------------------------------------------------------

fn draw_truncated_pair(rates: (f64, f64), alpha: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let z = draw_frailty_stable(alpha, rng).unwrap();
        let y1 = -rng.gen::<f64>().ln() / (rates.0 * z);
        let y2 = -rng.gen::<f64>().ln() / (rates.1 * z);
        if y1 <= LAG_BOUND && y2 <= LAG_BOUND {
            return (y1, y2);
        }
    }
}

struct PairSetup {
    record: SubjectRecord,
    timeline: EligibilityTimeline,
    models: Vec<CategoryModel>,
}

fn pair_setup(rates: (f64, f64), alpha: f64, window: (f64, f64)) -> PairSetup {
    let timeline = EligibilityTimeline::default();
    let record = SubjectRecord {
        id: "w".into(),
        entry_time: window.0,
        exit_time: window.1,
        observed_screenings: vec![],
        covariates_theta: vec![],
        covariates_lag: vec![],
    };
    let mk = |fs: FrailtySurvival| CategoryModel {
        log_mass: fs.box_mass().unwrap().ln(),
        fs,
    };
    PairSetup {
        record,
        timeline,
        models: vec![
            mk(FrailtySurvival::new(
                vec![LagDistribution::new(rates.0, Some(LAG_BOUND)).unwrap()],
                1.0,
            )
            .unwrap()),
            mk(FrailtySurvival::new(
                vec![
                    LagDistribution::new(rates.0, Some(LAG_BOUND)).unwrap(),
                    LagDistribution::new(rates.1, Some(LAG_BOUND)).unwrap(),
                ],
                alpha,
            )
            .unwrap()),
        ],
    }
}

impl PairSetup {
    fn latent_prob(&self, pattern: Vec<Placement>, quad: &QuadratureSpec) -> f64 {
        let case = curefrail::trajectory::TrajectoryCase {
            m: 2,
            pattern,
            feasible: true,
        };
        case_probability(&case, &self.record, &self.timeline, &self.models, quad).unwrap_or(0.0)
    }

    /// Window-class probabilities (BB, BO, BA, OO, OA, AA) for a
    /// two-screening subject; the all-observed cell is the complement.
    fn class_probs(&self, quad: &QuadratureSpec) -> [f64; 6] {
        use Placement::*;
        let (t_l, t_r) = (self.record.entry_time, self.record.exit_time);
        let r = self.timeline.refractory_years;
        let bb = self.latent_prob(vec![Before, Before], quad);
        let ba = self.latent_prob(vec![Before, After], quad);
        let aa = self.latent_prob(vec![After, After], quad);
        let clamped = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
            if hi > lo {
                integrate_1d(f, lo, hi, quad).unwrap()
            } else {
                0.0
            }
        };
        let bo = clamped(
            &|t| self.latent_prob(vec![Before, Observed(t)], quad),
            t_l.max(r),
            t_r.min(t_l + r + LAG_BOUND),
        );
        let oa = clamped(
            &|t| self.latent_prob(vec![Observed(t), After], quad),
            t_l,
            t_r.min(LAG_BOUND),
        );
        let oo = (1.0 - bb - ba - aa - bo - oa).max(0.0);
        [bb, bo, ba, oo, oa, aa]
    }
}

#[test]
fn criterion_05_quadrature_matches_million_draw_monte_carlo() {
    let quad = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let n = 1_000_000usize;
    for trial in 0..50 {
        let rates = (rng.gen_range(0.3..1.8), rng.gen_range(0.3..1.8));
        let alpha = if trial % 5 == 0 {
            1.0
        } else {
            rng.gen_range(0.55..0.98)
        };
        let t_l: f64 = rng.gen_range(0.5..18.0);
        let t_r = (t_l + rng.gen_range(5.0..22.0)).min(40.0);
        let setup = pair_setup(rates, alpha, (t_l, t_r));
        let model = setup.class_probs(&quad);

        let mut counts = [0usize; 6];
        let r = setup.timeline.refractory_years;
        for _ in 0..n {
            let (y1, y2) = draw_truncated_pair(rates, alpha, &mut rng);
            let pos = |s: f64| (s >= t_l) as usize + (s > t_r) as usize;
            let cell = match (pos(y1), pos(y1 + r + y2)) {
                (0, 0) => 0,
                (0, 1) => 1,
                (0, 2) => 2,
                (1, 1) => 3,
                (1, 2) => 4,
                (2, 2) => 5,
                other => panic!("impossible class {other:?}"),
            };
            counts[cell] += 1;
        }
        for (cell, (&c, &p)) in counts.iter().zip(&model).enumerate() {
            let p_hat = c as f64 / n as f64;
            let se = (p_hat * (1.0 - p_hat) / n as f64).sqrt();
            assert!(
                (p_hat - p).abs() <= 3.0 * se + 5.0 / n as f64,
                "trial {trial} cell {cell}: model {p} vs MC {p_hat} (se {se}), \
                 rates {rates:?}, alpha {alpha}, window ({t_l}, {t_r})"
            );
        }
    }
    pass(5, "pattern probabilities within 3 SE of 1e6-draw Monte Carlo on 50 configs");
}

// ---------------------------------------------------------------------------
// Criterion 6: likelihood versus simulator on the observable-count law.
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_likelihood_agrees_with_simulator() {
    let quad = fit_quad();
    let n = 100_000usize;
    for (combo, (alpha, censoring)) in [
        (0, (1.0, CensoringModel::none())),
        (1, (1.0, CensoringModel::default())),
        (2, (0.9, CensoringModel::none())),
        (3, (0.9, CensoringModel::default())),
    ] {
        let mut sc = Scenario::from_grid(2, 1).unwrap();
        sc.alpha = alpha;
        sc.censoring = censoring;
        sc.n_subjects = n;
        let (records, _) = curefrail::simulator::generate_dataset(&sc, 600 + combo).unwrap();
        let cfg = ModelConfig::new(2, sc.timeline).unwrap();
        let state = ParameterState {
            theta: vec![sc.theta.0, sc.theta.1, sc.theta.2],
            gamma: vec![1.0; 3],
            lambda: vec![vec![sc.lambda_single], vec![sc.lambda_pair.0, sc.lambda_pair.1]],
            kappa: vec![vec![(1.0, 1.0)], vec![(1.0, 1.0), (1.0, 1.0)]],
            alpha: sc.alpha,
            tau: (1.0, 1.0),
            beta: None,
            omega: None,
            eta: vec![],
        };
        let models = category_models(&state, &cfg, &[]).unwrap();
        let mut expected = [0.0f64; 3];
        let mut observed = [0usize; 3];
        for r in &records {
            let p = observable_count_probs(r, &cfg.timeline, &models, &state.theta, &quad).unwrap();
            for k in 0..3 {
                expected[k] += p[k];
            }
            observed[r.k().min(2)] += 1;
        }
        for k in 0..3 {
            let p = expected[k] / n as f64;
            let p_hat = observed[k] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (p_hat - p).abs() <= 4.0 * se,
                "combo {combo} (alpha {alpha}), k={k}: model {p} vs simulated {p_hat} (se {se})"
            );
        }
    }
    pass(6, "observable-count law matches 1e5-subject simulation in all four regimes");
}

// ---------------------------------------------------------------------------
// Criterion 7: normalization identities.
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_normalization_identities() {
    // Truncated densities integrate to one over their box.
    let quad = QuadratureSpec::default();
    let single = FrailtySurvival::new(
        vec![LagDistribution::new(0.23, Some(LAG_BOUND)).unwrap()],
        1.0,
    )
    .unwrap();
    let mass1 = single.box_mass().unwrap();
    let total1 = integrate_1d(
        |y| single.neg_partial_density(&[y], 0).unwrap(),
        0.0,
        LAG_BOUND,
        &quad,
    )
    .unwrap()
        / mass1;
    assert!((total1 - 1.0).abs() < 1e-6, "single-lag density mass {total1}");

    let pair = FrailtySurvival::new(
        vec![
            LagDistribution::new(0.6, Some(LAG_BOUND)).unwrap(),
            LagDistribution::new(1.1, Some(LAG_BOUND)).unwrap(),
        ],
        0.85,
    )
    .unwrap();
    let mass2 = pair.box_mass().unwrap();

    // Nested numeric integration of the joint density over an interior box
    // (away from the integrable singularity at the origin) must match the
    // exact inclusion-exclusion mass of that box.
    let a = 0.5;
    let s = |y1: f64, y2: f64| pair.joint_survival(&[y1, y2]).unwrap();
    let interior_exact = s(a, a) - s(LAG_BOUND, a) - s(a, LAG_BOUND) + s(LAG_BOUND, LAG_BOUND);
    let interior_num = integrate_1d(
        |y1| {
            integrate_1d(
                |y2| pair.full_density(&[y1, y2]).unwrap(),
                a,
                LAG_BOUND,
                &quad.relaxed_inner(),
            )
            .unwrap()
        },
        a,
        LAG_BOUND,
        &quad,
    )
    .unwrap();
    assert!(
        (interior_num - interior_exact).abs() < 1e-6,
        "interior pair mass {interior_num} vs exact {interior_exact}"
    );

    // Total mass over the full box: the inner coordinate integrates out
    // analytically to a difference of first partial derivatives; the
    // substitution y1 = L t^2 removes the y1^(alpha-1) endpoint singularity.
    let total2 = integrate_1d(
        |t| {
            if t == 0.0 {
                return 0.0;
            }
            let y1 = LAG_BOUND * t * t;
            let g = pair.neg_partial_density(&[y1, 0.0], 0).unwrap()
                - pair.neg_partial_density(&[y1, LAG_BOUND], 0).unwrap();
            g * 2.0 * LAG_BOUND * t
        },
        0.0,
        1.0,
        &quad,
    )
    .unwrap()
        / mass2;
    assert!((total2 - 1.0).abs() < 1e-6, "pair density mass {total2}");

    // Posterior category weights sum to one for randomized subjects.
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let cfg = ModelConfig::new(2, EligibilityTimeline::default()).unwrap();
    let sc = Scenario::from_grid(1, 1).unwrap();
    let (records, _) = curefrail::simulator::generate_dataset(
        &Scenario { n_subjects: 300, ..sc },
        rng.gen(),
    )
    .unwrap();
    let prepared = prepare_dataset(records, &cfg.timeline, 2).unwrap();
    let state = ParameterState {
        theta: vec![0.3, 0.45, 0.25],
        gamma: vec![1.0; 3],
        lambda: vec![vec![0.1], vec![0.6, 0.9]],
        kappa: vec![vec![(1.0, 1.0)], vec![(1.0, 1.0), (1.0, 1.0)]],
        alpha: 0.9,
        tau: (1.0, 1.0),
        beta: None,
        omega: None,
        eta: vec![],
    };
    let models = category_models(&state, &cfg, &[]).unwrap();
    for p in &prepared {
        let eta = expected_eta(p, &state, &cfg, &models, &fit_quad()).unwrap();
        let sum: f64 = eta.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12, "eta sums to {sum}");
    }

    // Sampled mixture weights stay on the simplex in every stored draw.
    let ccfg = ChainConfig {
        iterations: 700,
        burn_in: 200,
        thin: 1,
        n_chains: 1,
        seed: 7,
        quad: fit_quad(),
        ..Default::default()
    };
    let chain = run_chain(&prepared[..50], &cfg, &PriorConfig::defaults(2), &ccfg, 0).unwrap();
    let names = &chain.parameter_names;
    let idx: Vec<usize> = (0..3)
        .map(|j| names.iter().position(|n| n == &format!("theta{j}")).unwrap())
        .collect();
    for row in &chain.draws {
        let sum: f64 = idx.iter().map(|&i| row[i]).sum();
        assert!((sum - 1.0).abs() < 1e-9, "draw theta sums to {sum}");
    }
    pass(7, "densities, eta weights, and sampled theta all normalize");
}

// ---------------------------------------------------------------------------
// Criterion 8: the sampler reproduces its prior on an empty dataset.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_prior_recovery_on_empty_dataset() {
    let cfg = ModelConfig::new(2, EligibilityTimeline::default()).unwrap();
    let priors = PriorConfig::defaults(2);
    let stored = 40_000usize;
    let thin = 25usize;
    let ccfg = ChainConfig {
        iterations: 2_000 + stored * thin,
        burn_in: 2_000,
        thin,
        n_chains: 1,
        seed: 808,
        quad: QuadratureSpec::default(),
        ..Default::default()
    };
    let chain = run_chain(&[], &cfg, &priors, &ccfg, 0).unwrap();

    // Kolmogorov-Smirnov against the Exp(1) prior of a gamma component, with
    // a conservative effective sample size absorbing residual autocorrelation
    // of the thinned random-walk draws.
    let mut g = chain.column("gamma1").unwrap();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = g.len();
    let mut d: f64 = 0.0;
    for (i, &x) in g.iter().enumerate() {
        let cdf = 1.0 - (-x).exp();
        d = d.max(((i + 1) as f64 / n as f64 - cdf).max(cdf - i as f64 / n as f64));
    }
    let crit = 1.628 / ((n as f64) / 10.0).sqrt();
    assert!(d < crit, "KS distance {d} vs 1% critical value {crit}");

    // Conjugate/exchangeability moment identities, within 4 batch-mean SE.
    let batch_se = |v: &[f64]| {
        let b = 100;
        let k = v.len() / b;
        let means: Vec<f64> = (0..k)
            .map(|i| v[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / k as f64;
        let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    };
    for (name, want) in [("theta0", 1.0 / 3.0), ("gamma0", 1.0), ("alpha", 0.5)] {
        let col = chain.column(name).unwrap();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let se = batch_se(&col);
        assert!(
            (m - want).abs() <= 4.0 * se.max(1e-4),
            "{name}: mean {m} vs prior mean {want} (se {se})"
        );
    }
    pass(8, "empty-dataset chain reproduces the prior (KS 1% + moment identities)");
}

// ---------------------------------------------------------------------------
// Criterion 9: convergence diagnostics behave under the null.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_diagnostics_null_behavior() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut normal = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
                (-2.0 * u1.max(1e-300).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect()
    };
    let chains: Vec<Vec<f64>> = (0..4).map(|_| normal(5_000, &mut rng)).collect();
    let rhat = gelman_rubin(&chains).unwrap();
    assert!(rhat < 1.05, "null R-hat {rhat}");

    let mut rejections = 0usize;
    for _ in 0..1_000 {
        let z = geweke(&normal(2_000, &mut rng), 0.1, 0.5).unwrap();
        if z.abs() >= 3.0 {
            rejections += 1;
        }
    }
    assert!(
        rejections <= 10,
        "{rejections}/1000 null Geweke rejections exceeds 1%"
    );
    pass(9, "R-hat < 1.05 on iid chains; Geweke |z| < 3 in >= 99% of null replicates");
}

// ---------------------------------------------------------------------------
// Criterion 10: reruns with the same seed are byte-identical.
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_reruns_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let scfg = dir.path().join("sim.json");
    std::fs::write(&scfg, r#"{"schema_version": 1, "n_subjects": 200}"#).unwrap();
    let run = |args: &[&str]| {
        let res = Command::new(env!("CARGO_BIN_EXE_curefrail")).args(args).output().unwrap();
        assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    };
    run(&["simulate", "--config", scfg.to_str().unwrap(), "--out", sim.to_str().unwrap(), "--seed", "3"]);

    let fit = |out: &Path| {
        run(&[
            "fit",
            sim.join("dataset.csv").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "11",
            "--chains",
            "2",
            "--iterations",
            "150",
            "--burn-in",
            "50",
        ]);
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    fit(&a);
    fit(&b);
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json") // sole carrier of wall-clock time
        .collect();
    names.sort();
    assert!(names.len() >= 7, "fit artifacts present: {names:?}");
    for name in &names {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "file {name} differs between identical runs"
        );
    }
    pass(10, "identical seeds reproduce every artifact byte-for-byte");
}
