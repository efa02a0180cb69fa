//! Synthetic screening-history generator.
//!
//! Draws a lifetime screening count, frailty-correlated lag times, builds
//! screening times through the due-time/refractory arithmetic, then overlays
//! an observation window to produce the censored record. Trajectory truth and
//! censoring use separate RNG substreams so the truth sidecar is invariant to
//! the censoring model for a fixed seed.

use crate::error::{Error, Result};
use crate::frailty::check_alpha;
use crate::subject::{EligibilityTimeline, SubjectRecord};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Lag-rate scenario rows: (single-screening rate, pair rates).
pub const LT_SCENARIOS: [(f64, (f64, f64)); 3] = [
    (0.02, (0.70, 0.70)),
    (0.09, (0.50, 1.05)),
    (0.35, (0.50, 1.05)),
];

/// Lifetime-screening-count scenario rows: (theta0, theta1, theta2).
pub const NLS_SCENARIOS: [(f64, f64, f64); 2] = [
    (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    (0.5, 0.25, 0.25),
];

/// One marginal draw used by the censoring model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WindowDraw {
    /// Degenerate: no censoring contribution.
    None,
    Uniform { lo: f64, hi: f64 },
    /// `point` with probability `point_weight`, otherwise uniform(lo, hi).
    Mixture {
        point: f64,
        point_weight: f64,
        lo: f64,
        hi: f64,
    },
}

impl WindowDraw {
    fn validate(&self) -> Result<()> {
        match *self {
            WindowDraw::None => Ok(()),
            WindowDraw::Uniform { lo, hi } | WindowDraw::Mixture { lo, hi, .. } => {
                if !(lo >= 0.0 && hi > lo) {
                    return Err(Error::Config(format!(
                        "window draw needs 0 <= lo < hi, got ({lo}, {hi})"
                    )));
                }
                if let WindowDraw::Mixture { point, point_weight, .. } = *self {
                    if !(point >= 0.0) || !(0.0..=1.0).contains(&point_weight) {
                        return Err(Error::Config("bad mixture point/weight".into()));
                    }
                }
                Ok(())
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, none_value: f64) -> f64 {
        match *self {
            WindowDraw::None => none_value,
            WindowDraw::Uniform { lo, hi } => rng.gen_range(lo..hi),
            WindowDraw::Mixture {
                point,
                point_weight,
                lo,
                hi,
            } => {
                if rng.gen::<f64>() < point_weight {
                    point
                } else {
                    rng.gen_range(lo..hi)
                }
            }
        }
    }
}

/// Observation-window generator. `entry` draws the study entry time on the
/// eligibility clock; `duration` draws the years of follow-up after entry
/// (exit is capped at the eligibility end, so entry < exit always holds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoringModel {
    pub entry: WindowDraw,
    pub duration: WindowDraw,
}

impl CensoringModel {
    /// No censoring: every subject is watched over the full eligibility span.
    pub fn none() -> Self {
        CensoringModel {
            entry: WindowDraw::None,
            duration: WindowDraw::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.entry.validate()?;
        self.duration.validate()
    }

    /// Draw an (entry, exit) window.
    pub fn sample_window<R: Rng>(&self, rng: &mut R, timeline: &EligibilityTimeline) -> (f64, f64) {
        let e = timeline.eligibility_length;
        let entry = self.entry.sample(rng, 0.0).min(e * 0.999);
        let duration = self.duration.sample(rng, e);
        (entry, (entry + duration).min(e))
    }
}

impl Default for CensoringModel {
    /// Calibrated to land near 50% left-censored, 40% right-censored, 40%
    /// with at least one observed screening and 15% with two (under the
    /// equal-theta, slow-single-lag scenario).
    fn default() -> Self {
        CensoringModel {
            entry: WindowDraw::Mixture {
                point: 0.0,
                point_weight: 0.5,
                lo: 0.0,
                hi: 30.0,
            },
            duration: WindowDraw::Mixture {
                point: 40.0,
                point_weight: 0.6,
                lo: 4.0,
                hi: 10.0,
            },
        }
    }
}

/// Full generative configuration for one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Lag rate when the subject has a single lifetime screening.
    pub lambda_single: f64,
    /// Lag rates for the two-screening category.
    pub lambda_pair: (f64, f64),
    pub theta: (f64, f64, f64),
    pub alpha: f64,
    pub timeline: EligibilityTimeline,
    pub n_subjects: usize,
    pub censoring: CensoringModel,
}

impl Scenario {
    /// Scenario from the lag-rate grid row `lt` (1-based, 1..=3) and the
    /// screening-count grid row `nls` (1-based, 1..=2).
    pub fn from_grid(lt: usize, nls: usize) -> Result<Self> {
        if !(1..=3).contains(&lt) || !(1..=2).contains(&nls) {
            return Err(Error::Config(format!("no grid cell LT{lt} x NLS{nls}")));
        }
        let (lambda_single, lambda_pair) = LT_SCENARIOS[lt - 1];
        let theta = NLS_SCENARIOS[nls - 1];
        Ok(Scenario {
            name: format!("LT{lt}xNLS{nls}"),
            lambda_single,
            lambda_pair,
            theta,
            alpha: 0.9,
            timeline: EligibilityTimeline::default(),
            n_subjects: 1000,
            censoring: CensoringModel::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, t1, t2) = self.theta;
        if !(t0 >= 0.0 && t1 >= 0.0 && t2 >= 0.0) || ((t0 + t1 + t2) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("theta must sum to 1, got {:?}", self.theta)));
        }
        if !(self.lambda_single > 0.0 && self.lambda_pair.0 > 0.0 && self.lambda_pair.1 > 0.0) {
            return Err(Error::Config("scenario rates must be > 0".into()));
        }
        check_alpha(self.alpha)?;
        self.timeline.validate()?;
        self.censoring.validate()
    }
}

/// The uncensored truth behind one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueTrajectory {
    /// Lifetime screening count drawn from theta.
    pub m_drawn: usize,
    /// Screenings actually fitting before the eligibility end.
    pub m_realized: usize,
    pub lag_times: Vec<f64>,
    /// Absolute years on the eligibility clock, only the realized ones.
    pub screening_times: Vec<f64>,
}

/// Positive stable variate with Laplace transform exp(-s^alpha), by the
/// classic uniform-exponential construction; alpha = 1 is the point mass at 1.
pub fn draw_frailty_stable<R: Rng>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(1.0);
    }
    let u: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let w = draw_exp1(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * u).sin() / w;
    Ok(a * b.powf((1.0 - alpha) / alpha))
}

/// ln(1 - u) for u in [0, 1).
fn ln_one_minus(u: f64) -> f64 {
    (-u).ln_1p()
}

fn draw_exp1<R: Rng>(rng: &mut R) -> f64 {
    -ln_one_minus(rng.gen())
}

/// Inverse-CDF draw from a (possibly truncated) exponential lag law.
fn draw_single_lag<R: Rng>(rate: f64, truncation: Option<f64>, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    match truncation {
        None => -ln_one_minus(u) / rate,
        Some(l) => {
            let c = 1.0 - (-rate * l).exp();
            -ln_one_minus(u * c) / rate
        }
    }
}

/// Correlated pair of lags: conditional on the frailty Z, each lag is
/// exponential with hazard scaled by Z; truncation rejects the whole
/// (Z, lags) draw so the accepted law matches the box-renormalized joint.
fn draw_pair_lags<R: Rng>(
    rates: (f64, f64),
    alpha: f64,
    truncation: Option<f64>,
    rng: &mut R,
) -> Result<(f64, f64)> {
    for _ in 0..1_000_000 {
        let z = draw_frailty_stable(alpha, rng)?;
        let y1 = draw_exp1(rng) / (z * rates.0);
        let y2 = draw_exp1(rng) / (z * rates.1);
        match truncation {
            Some(l) if y1 > l || y2 > l => continue,
            _ => return Ok((y1, y2)),
        }
    }
    Err(Error::domain(
        "lag rejection sampler failed to land in the truncation box",
    ))
}

/// One subject: truth plus censored record. `traj_rng` feeds everything that
/// defines the truth; `cens_rng` feeds only the observation window.
pub fn generate_subject<R: Rng>(
    scenario: &Scenario,
    id: &str,
    traj_rng: &mut R,
    cens_rng: &mut R,
) -> Result<(TrueTrajectory, SubjectRecord)> {
    let tl = &scenario.timeline;
    let (t0, t1, _) = scenario.theta;
    let u: f64 = traj_rng.gen();
    let m_drawn = if u < t0 {
        0
    } else if u < t0 + t1 {
        1
    } else {
        2
    };

    let lag_times: Vec<f64> = match m_drawn {
        0 => vec![],
        1 => vec![draw_single_lag(
            scenario.lambda_single,
            tl.max_lag_years,
            traj_rng,
        )],
        _ => {
            let (y1, y2) =
                draw_pair_lags(scenario.lambda_pair, scenario.alpha, tl.max_lag_years, traj_rng)?;
            vec![y1, y2]
        }
    };

    // Due-time arithmetic: first screening due at eligibility start, each
    // subsequent one a refractory period after the previous screening.
    let mut screening_times = Vec::with_capacity(lag_times.len());
    let mut due = 0.0;
    for &y in &lag_times {
        let s = due + y;
        if s > tl.eligibility_length {
            break;
        }
        screening_times.push(s);
        due = s + tl.refractory_years;
    }
    let truth = TrueTrajectory {
        m_drawn,
        m_realized: screening_times.len(),
        lag_times,
        screening_times: screening_times.clone(),
    };

    let (entry, exit) = scenario.censoring.sample_window(cens_rng, tl);
    let observed: Vec<f64> = screening_times
        .iter()
        .copied()
        .filter(|&s| s >= entry && s <= exit)
        .collect();
    let record = SubjectRecord {
        id: id.to_string(),
        entry_time: entry,
        exit_time: exit,
        observed_screenings: observed,
        covariates_theta: vec![],
        covariates_lag: vec![],
    };
    record.validate(tl)?;
    Ok((truth, record))
}

/// Generate a full dataset with its truth sidecar. Subjects use independent
/// RNG substreams keyed by index, so output is deterministic per seed and
/// independent of thread scheduling.
pub fn generate_dataset(scenario: &Scenario, seed: u64) -> Result<(Vec<SubjectRecord>, Vec<TrueTrajectory>)> {
    scenario.validate()?;
    let pairs: Vec<(TrueTrajectory, SubjectRecord)> = (0..scenario.n_subjects)
        .into_par_iter()
        .map(|i| {
            let mut traj_rng = ChaCha8Rng::seed_from_u64(seed);
            traj_rng.set_stream(2 * i as u64);
            let mut cens_rng = ChaCha8Rng::seed_from_u64(seed);
            cens_rng.set_stream(2 * i as u64 + 1);
            generate_subject(scenario, &format!("{:06}", i + 1), &mut traj_rng, &mut cens_rng)
        })
        .collect::<Result<_>>()?;
    let (truths, records) = pairs.into_iter().map(|(t, r)| (t, r)).unzip();
    Ok((records, truths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn stable_degenerate_at_one() {
        let mut r = rng(1);
        for _ in 0..10 {
            assert_eq!(draw_frailty_stable(1.0, &mut r).unwrap(), 1.0);
        }
    }

    #[test]
    fn stable_laplace_monte_carlo() {
        // E exp(-sZ) = exp(-s^alpha), checked at (alpha, s) pairs.
        let mut r = rng(7);
        for &(alpha, s) in &[(0.9, 1.0), (0.5, 4.0), (0.7, 2.0)] {
            let n = 200_000;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let v = (-s * draw_frailty_stable(alpha, &mut r).unwrap()).exp();
                sum += v;
                sumsq += v * v;
            }
            let mean = sum / n as f64;
            let sd = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
            let want = (-(s as f64).powf(alpha)).exp();
            assert!(
                (mean - want).abs() < 4.0 * sd,
                "alpha={alpha} s={s}: mean {mean} want {want} sd {sd}"
            );
        }
    }

    #[test]
    fn stable_variates_positive() {
        let mut r = rng(3);
        for _ in 0..10_000 {
            let z = draw_frailty_stable(0.3, &mut r).unwrap();
            assert!(z > 0.0 && z.is_finite());
        }
    }

    #[test]
    fn all_cured_scenario() {
        let mut s = Scenario::from_grid(1, 1).unwrap();
        s.theta = (1.0, 0.0, 0.0);
        s.n_subjects = 50;
        let (records, truths) = generate_dataset(&s, 9).unwrap();
        assert!(truths.iter().all(|t| t.m_drawn == 0));
        assert!(records.iter().all(|r| r.observed_screenings.is_empty()));
    }

    #[test]
    fn single_lag_truncated_exponential_ks() {
        // Empirical CDF of single-category lags vs the truncated-exp CDF.
        let mut s = Scenario::from_grid(1, 1).unwrap();
        s.theta = (0.0, 1.0, 0.0);
        s.alpha = 1.0;
        s.n_subjects = 20_000;
        s.censoring = CensoringModel::none();
        let (_, truths) = generate_dataset(&s, 11).unwrap();
        let mut lags: Vec<f64> = truths.iter().map(|t| t.lag_times[0]).collect();
        lags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = crate::frailty::LagDistribution::new(0.02, Some(10.0)).unwrap();
        let n = lags.len() as f64;
        let ks = lags
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let f = d.cdf(y).unwrap();
                let lo = (f - i as f64 / n).abs();
                let hi = ((i + 1) as f64 / n - f).abs();
                lo.max(hi)
            })
            .fold(0.0f64, f64::max);
        // 1% KS critical value.
        assert!(ks < 1.628 / n.sqrt(), "ks = {ks}");
    }

    #[test]
    fn pair_lag_marginal_frailty_ks() {
        // Untruncated first-lag marginal is exp(-(rate*t)^alpha).
        let mut s = Scenario::from_grid(1, 1).unwrap();
        s.theta = (0.0, 0.0, 1.0);
        s.timeline.max_lag_years = None;
        s.n_subjects = 20_000;
        s.censoring = CensoringModel::none();
        let (_, truths) = generate_dataset(&s, 13).unwrap();
        let mut lags: Vec<f64> = truths.iter().map(|t| t.lag_times[0]).collect();
        lags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = lags.len() as f64;
        let cdf = |t: f64| 1.0 - (-(0.70 * t).powf(0.9)).exp();
        let ks = lags
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let f = cdf(y);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 1.628 / n.sqrt(), "ks = {ks}");
    }

    #[test]
    fn pair_lags_positively_dependent() {
        // Kendall tau estimated by random concordance sampling: positive for
        // alpha < 1, near zero for alpha = 1.
        let tau = |alpha: f64, seed: u64| {
            let mut s = Scenario::from_grid(1, 1).unwrap();
            s.theta = (0.0, 0.0, 1.0);
            s.alpha = alpha;
            s.n_subjects = 20_000;
            s.censoring = CensoringModel::none();
            let (_, truths) = generate_dataset(&s, seed).unwrap();
            let pairs: Vec<(f64, f64)> = truths
                .iter()
                .map(|t| (t.lag_times[0], t.lag_times[1]))
                .collect();
            let mut r = rng(seed ^ 0xabcd);
            let mut acc = 0.0;
            let trials = 200_000;
            for _ in 0..trials {
                let a = pairs[r.gen_range(0..pairs.len())];
                let b = pairs[r.gen_range(0..pairs.len())];
                let c = (a.0 - b.0) * (a.1 - b.1);
                if c > 0.0 {
                    acc += 1.0;
                } else if c < 0.0 {
                    acc -= 1.0;
                }
            }
            acc / trials as f64
        };
        assert!(tau(0.6, 21) > 0.2, "tau(0.6) = {}", tau(0.6, 21));
        assert!(tau(1.0, 22).abs() < 0.02, "tau(1.0) = {}", tau(1.0, 22));
    }

    #[test]
    fn truth_invariant_to_censoring() {
        let mut a = Scenario::from_grid(2, 2).unwrap();
        a.n_subjects = 200;
        let mut b = a.clone();
        b.censoring = CensoringModel::none();
        let (_, ta) = generate_dataset(&a, 5).unwrap();
        let (_, tb) = generate_dataset(&b, 5).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn deterministic_per_seed() {
        let mut s = Scenario::from_grid(3, 1).unwrap();
        s.n_subjects = 100;
        let (ra, ta) = generate_dataset(&s, 42).unwrap();
        let (rb, tb) = generate_dataset(&s, 42).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(ta, tb);
        let (rc, _) = generate_dataset(&s, 43).unwrap();
        assert_ne!(ra, rc);
    }

    #[test]
    fn records_always_valid() {
        let mut s = Scenario::from_grid(2, 1).unwrap();
        s.n_subjects = 2_000;
        let (records, truths) = generate_dataset(&s, 17).unwrap();
        for (r, t) in records.iter().zip(&truths) {
            r.validate(&s.timeline).unwrap();
            assert!(t.m_realized <= t.m_drawn);
            assert!(r.observed_screenings.len() <= t.m_realized);
        }
    }

    #[test]
    fn empty_dataset() {
        let mut s = Scenario::from_grid(1, 1).unwrap();
        s.n_subjects = 0;
        let (records, truths) = generate_dataset(&s, 1).unwrap();
        assert!(records.is_empty() && truths.is_empty());
    }

    #[test]
    fn censoring_calibration_targets() {
        // Defaults should land near the documented marginal targets.
        let mut s = Scenario::from_grid(1, 1).unwrap();
        s.n_subjects = 40_000;
        let (records, _) = generate_dataset(&s, 99).unwrap();
        let n = records.len() as f64;
        let left = records.iter().filter(|r| r.is_left_censored()).count() as f64 / n;
        let right = records
            .iter()
            .filter(|r| r.is_right_censored(&s.timeline))
            .count() as f64
            / n;
        let one_plus = records.iter().filter(|r| r.k() >= 1).count() as f64 / n;
        let two = records.iter().filter(|r| r.k() == 2).count() as f64 / n;
        assert!((left - 0.50).abs() < 0.05, "left-censored {left}");
        assert!((right - 0.40).abs() < 0.05, "right-censored {right}");
        assert!((one_plus - 0.40).abs() < 0.05, "one-plus {one_plus}");
        assert!((two - 0.15).abs() < 0.05, "two observed {two}");
    }
}
