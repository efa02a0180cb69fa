//! Latent trajectory enumeration and the censored-data likelihood.
//!
//! Each subject's record pins down the number of observed screenings but may
//! be compatible with several latent lifetime counts. Every compatible
//! placement of unobserved screenings (before study entry / after study exit)
//! becomes a `TrajectoryCase`; case probabilities combine density coordinates
//! for observed lags, survival tails for post-exit lags, and integrals over
//! pre-entry lags. Lag truncation is handled by conditioning the joint law on
//! the support box and dividing by its mass.

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ParameterState};
use crate::quad::{integrate_1d, QuadratureSpec};
use crate::subject::{EligibilityTimeline, SubjectRecord};
use crate::frailty::FrailtySurvival;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// Latent screening before study entry.
    Before,
    /// Screening observed at this time on the analysis clock.
    Observed(f64),
    /// Latent screening after study exit.
    After,
}

/// One latent lifetime-count hypothesis compatible with a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryCase {
    pub m: usize,
    pub pattern: Vec<Placement>,
    pub feasible: bool,
}

/// Enumerate every m in [k, ell] with every temporal placement of the m - k
/// unobserved screenings, marking due-time feasibility. m = 0 appears iff
/// k = 0.
pub fn enumerate_cases(
    record: &SubjectRecord,
    timeline: &EligibilityTimeline,
    ell: usize,
) -> Result<Vec<TrajectoryCase>> {
    record.validate(timeline)?;
    let k = record.k();
    if ell < k {
        return Err(Error::InvalidRecord {
            id: record.id.clone(),
            reason: format!("{k} observed screenings exceed ell = {ell}"),
        });
    }
    let mut cases = Vec::new();
    for m in k..=ell {
        if m == 0 {
            cases.push(TrajectoryCase {
                m: 0,
                pattern: vec![],
                feasible: true,
            });
            continue;
        }
        let latent = m - k;
        for n_before in 0..=latent {
            let n_after = latent - n_before;
            let mut pattern = Vec::with_capacity(m);
            pattern.extend(std::iter::repeat(Placement::Before).take(n_before));
            pattern.extend(record.observed_screenings.iter().map(|&t| Placement::Observed(t)));
            pattern.extend(std::iter::repeat(Placement::After).take(n_after));
            let feasible = pattern_feasible(&pattern, record, timeline);
            cases.push(TrajectoryCase { m, pattern, feasible });
        }
    }
    Ok(cases)
}

fn within(l: Option<f64>, y: f64) -> bool {
    l.map_or(true, |l| y <= l + 1e-12)
}

fn pattern_feasible(pattern: &[Placement], record: &SubjectRecord, timeline: &EligibilityTimeline) -> bool {
    let l = timeline.max_lag_years;
    let r = timeline.refractory_years;
    let (t_l, t_r) = (record.entry_time, record.exit_time);
    let inf = f64::INFINITY;
    let lsup = l.unwrap_or(inf);
    match pattern {
        [] => true,
        [Placement::Observed(t)] => *t > 0.0 && within(l, *t),
        [Placement::Before] => t_l > 0.0,
        [Placement::After] => t_r < lsup,
        [Placement::Observed(t1), Placement::Observed(t2)] => {
            let y1 = *t1;
            let y2 = *t2 - *t1 - r;
            y1 > 0.0 && y2 > 0.0 && within(l, y1) && within(l, y2)
        }
        [Placement::Before, Placement::Observed(t1)] => {
            let lo = (t1 - r - lsup).max(0.0);
            let hi = t_l.min(t1 - r).min(lsup);
            hi > lo
        }
        [Placement::Observed(t1), Placement::After] => {
            let w = (t_r - t1 - r).max(0.0);
            *t1 > 0.0 && within(l, *t1) && w < lsup
        }
        [Placement::Before, Placement::After] => {
            let lo = (t_r - r - lsup).max(0.0);
            let hi = t_l.min(lsup);
            hi > lo
        }
        [Placement::Before, Placement::Before] => t_l > r,
        [Placement::After, Placement::After] => t_r < lsup,
        _ => false, // m >= 3 placements are not shipped
    }
}

/// A record together with its enumerated cases, ready for likelihood work.
#[derive(Debug, Clone)]
pub struct PreparedSubject {
    pub record: SubjectRecord,
    pub cases: Vec<TrajectoryCase>,
}

pub fn prepare_subject(
    record: SubjectRecord,
    timeline: &EligibilityTimeline,
    ell: usize,
) -> Result<PreparedSubject> {
    let cases = enumerate_cases(&record, timeline, ell)?;
    if !cases.iter().any(|c| c.feasible) {
        return Err(Error::NoFeasibleCase { id: record.id });
    }
    Ok(PreparedSubject { record, cases })
}

pub fn prepare_dataset(
    records: Vec<SubjectRecord>,
    timeline: &EligibilityTimeline,
    ell: usize,
) -> Result<Vec<PreparedSubject>> {
    records
        .into_iter()
        .map(|r| prepare_subject(r, timeline, ell))
        .collect()
}

/// Joint survival model for one latent count, plus the log mass of its
/// truncation box.
#[derive(Debug, Clone)]
pub struct CategoryModel {
    pub fs: FrailtySurvival,
    pub log_mass: f64,
}

/// Category models for j = 1..=ell; pass the subject's lag covariates when
/// the lag link is active (they are ignored otherwise).
pub fn category_models(
    state: &ParameterState,
    cfg: &ModelConfig,
    covs_lag: &[f64],
) -> Result<Vec<CategoryModel>> {
    (1..=cfg.ell)
        .map(|j| {
            let fs = state.category_survival(cfg, covs_lag, j)?;
            let log_mass = fs.box_mass()?.ln();
            Ok(CategoryModel { fs, log_mass })
        })
        .collect()
}

/// Log probability of one trajectory case, p_ij on the log scale.
/// Infeasible cases return -inf.
pub fn log_case_probability(
    case: &TrajectoryCase,
    record: &SubjectRecord,
    timeline: &EligibilityTimeline,
    models: &[CategoryModel],
    quad: &QuadratureSpec,
) -> Result<f64> {
    if !case.feasible {
        return Ok(f64::NEG_INFINITY);
    }
    if case.m == 0 {
        return Ok(0.0);
    }
    let cat = &models[case.m - 1];
    let fs = &cat.fs;
    let l = timeline.max_lag_years;
    let lsup = l.unwrap_or(f64::INFINITY);
    let r = timeline.refractory_years;
    let (t_l, t_r) = (record.entry_time, record.exit_time);

    let value = match case.pattern.as_slice() {
        [Placement::Observed(t)] => {
            return Ok(fs.log_neg_partial_density(&[*t], 0)? - cat.log_mass);
        }
        [Placement::Before] => {
            let u = t_l.min(lsup);
            1.0 - fs.joint_survival(&[u])?
        }
        [Placement::After] => {
            let tail = match l {
                Some(l) => fs.joint_survival(&[l])?,
                None => 0.0,
            };
            fs.joint_survival(&[t_r])? - tail
        }
        [Placement::Observed(t1), Placement::Observed(t2)] => {
            let y = [*t1, *t2 - *t1 - r];
            return Ok(fs.log_full_density(&y)? - cat.log_mass);
        }
        [Placement::Before, Placement::Observed(t1)] => {
            // First lag integrated over (lo, hi); the observed time pins the
            // second lag to t1 - refractory - y1.
            let lo = (t1 - r - lsup).max(0.0);
            let hi = t_l.min(t1 - r).min(lsup);
            integrate_1d(
                |y1| fs.full_density(&[y1, t1 - r - y1]).unwrap_or(0.0),
                lo,
                hi,
                quad,
            )?
        }
        [Placement::Observed(t1), Placement::After] => {
            let w = (t_r - t1 - r).max(0.0);
            let tail = match l {
                Some(l) => fs.neg_partial_density(&[*t1, l], 0)?,
                None => 0.0,
            };
            fs.neg_partial_density(&[*t1, w], 0)? - tail
        }
        [Placement::Before, Placement::After] => {
            // Second screening is due at y1 + refractory and lands past exit:
            // y2 in (max(0, t_R - refractory - y1), lag support].
            let lo = (t_r - r - lsup).max(0.0);
            let hi = t_l.min(lsup);
            integrate_1d(
                |y1| {
                    let c = (t_r - r - y1).max(0.0).min(lsup);
                    let head = fs.neg_partial_density(&[y1, c], 0).unwrap_or(0.0);
                    let tail = match l {
                        Some(l) => fs.neg_partial_density(&[y1, l], 0).unwrap_or(0.0),
                        None => 0.0,
                    };
                    head - tail
                },
                lo,
                hi,
                quad,
            )?
        }
        [Placement::Before, Placement::Before] => {
            // Both pre-entry: the inner integral over y2 in (0, c(y1)) of the
            // full density telescopes to a difference of partial derivatives.
            let hi = (t_l - r).min(lsup);
            integrate_1d(
                |y1| {
                    let c = (t_l - r - y1).min(lsup);
                    let head = fs.neg_partial_density(&[y1, 0.0], 0).unwrap_or(0.0);
                    let tail = fs.neg_partial_density(&[y1, c], 0).unwrap_or(0.0);
                    head - tail
                },
                0.0,
                hi,
                quad,
            )?
        }
        [Placement::After, Placement::After] => {
            // y1 in (t_R, support]; y2 anywhere in its support box.
            let s = |a: f64, b: f64| fs.joint_survival(&[a, b]);
            match l {
                Some(l) => s(t_r, 0.0)? - s(t_r, l)? - s(l, 0.0)? + s(l, l)?,
                None => s(t_r, 0.0)?,
            }
        }
        other => {
            return Err(Error::domain(format!(
                "case probability not shipped for pattern of length {}",
                other.len()
            )));
        }
    };
    Ok(value.max(0.0).ln() - cat.log_mass)
}

/// Linear-scale case probability.
pub fn case_probability(
    case: &TrajectoryCase,
    record: &SubjectRecord,
    timeline: &EligibilityTimeline,
    models: &[CategoryModel],
    quad: &QuadratureSpec,
) -> Result<f64> {
    log_case_probability(case, record, timeline, models, quad).map(f64::exp)
}

/// ln p_ij for j = 0..=ell, summing mutually exclusive patterns within each
/// latent count. Categories with no feasible pattern get -inf.
pub fn log_category_probs(
    prep: &PreparedSubject,
    timeline: &EligibilityTimeline,
    models: &[CategoryModel],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let ell = models.len();
    let mut probs = vec![0.0f64; ell + 1];
    let mut seen = vec![false; ell + 1];
    for case in &prep.cases {
        if !case.feasible {
            continue;
        }
        let lp = log_case_probability(case, &prep.record, timeline, models, quad)?;
        probs[case.m] += lp.exp();
        seen[case.m] = true;
    }
    Ok(probs
        .iter()
        .zip(&seen)
        .map(|(&p, &s)| if s { p.ln() } else { f64::NEG_INFINITY })
        .collect())
}

/// Expected eta weights: eta_ij proportional to theta_j * p_ij over feasible
/// categories. Deterministic given the state.
pub fn expected_eta(
    prep: &PreparedSubject,
    state: &ParameterState,
    cfg: &ModelConfig,
    models: &[CategoryModel],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let theta = state.resolve_theta(&prep.record.covariates_theta);
    let log_p = log_category_probs(prep, &cfg.timeline, models, quad)?;
    let mut w: Vec<f64> = theta
        .iter()
        .zip(&log_p)
        .map(|(&t, &lp)| if lp.is_finite() { t * lp.exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroProbability {
            id: prep.record.id.clone(),
        });
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Model-implied distribution of the number of screenings falling inside a
/// subject's observation window, marginalized over the latent lifetime count
/// with weights `theta`. Patterns with observed coordinates are integrated
/// over the window; the all-observed cell is the complement, so the result
/// always sums to one.
pub fn observable_count_probs(
    record: &SubjectRecord,
    timeline: &EligibilityTimeline,
    models: &[CategoryModel],
    theta: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let ell = models.len();
    if ell > 2 {
        return Err(Error::domain("observable count distribution is shipped for ell <= 2"));
    }
    let base = SubjectRecord {
        observed_screenings: vec![],
        ..record.clone()
    };
    let prob = |m: usize, pattern: Vec<Placement>| -> Result<f64> {
        let feasible = pattern_feasible(&pattern, &base, timeline);
        let case = TrajectoryCase { m, pattern, feasible };
        case_probability(&case, &base, timeline, models, quad)
    };
    let (t_l, t_r) = (record.entry_time, record.exit_time);
    let r = timeline.refractory_years;
    let lsup = timeline.max_lag_years.unwrap_or(f64::INFINITY);
    let window_integral = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| -> Result<f64> {
        if hi > lo {
            integrate_1d(f, lo, hi, quad)
        } else {
            Ok(0.0)
        }
    };

    let mut out = vec![0.0; ell + 1];
    out[0] += theta[0];
    if ell >= 1 {
        let none = (prob(1, vec![Placement::Before])? + prob(1, vec![Placement::After])?).min(1.0);
        out[0] += theta[1] * none;
        out[1] += theta[1] * (1.0 - none);
    }
    if ell == 2 {
        let none = prob(2, vec![Placement::Before, Placement::Before])?
            + prob(2, vec![Placement::Before, Placement::After])?
            + prob(2, vec![Placement::After, Placement::After])?;
        // First observed, second past exit: the density support in t is
        // capped by the lag bound.
        let oa = window_integral(
            &|t| prob(2, vec![Placement::Observed(t), Placement::After]).unwrap_or(0.0),
            t_l,
            t_r.min(lsup),
        )?;
        // First pre-entry, second observed at t: needs t past the refractory
        // span and a first lag that fits under the bound.
        let bo = window_integral(
            &|t| prob(2, vec![Placement::Before, Placement::Observed(t)]).unwrap_or(0.0),
            t_l.max(r),
            t_r.min(t_l + r + lsup),
        )?;
        let one = oa + bo;
        let two = (1.0 - none - one).max(0.0);
        out[0] += theta[2] * none;
        out[1] += theta[2] * one;
        out[2] += theta[2] * two;
    }
    Ok(out)
}

fn with_subject_models<T: Send>(
    dataset: &[PreparedSubject],
    state: &ParameterState,
    cfg: &ModelConfig,
    per_subject: impl Fn(usize, &PreparedSubject, &[CategoryModel]) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let shared = if cfg.lag_link {
        None
    } else {
        Some(category_models(state, cfg, &[])?)
    };
    dataset
        .par_iter()
        .enumerate()
        .map(|(i, prep)| {
            let owned;
            let models = match &shared {
                Some(m) => m.as_slice(),
                None => {
                    owned = category_models(state, cfg, &prep.record.covariates_lag)?;
                    owned.as_slice()
                }
            };
            per_subject(i, prep, models)
        })
        .collect()
}

/// Complete-data log-likelihood: sum_i sum_j eta_ij (ln theta_ij + ln p_ij).
/// The per-subject map is parallel; the reduction is an ordered sequential
/// sum so results are bit-stable for a fixed dataset ordering.
pub fn log_likelihood(
    dataset: &[PreparedSubject],
    state: &ParameterState,
    cfg: &ModelConfig,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let terms = with_subject_models(dataset, state, cfg, |i, prep, models| {
        let eta = &state.eta[i];
        let theta = state.resolve_theta(&prep.record.covariates_theta);
        let log_p = log_category_probs(prep, &cfg.timeline, models, quad)?;
        let mut acc = 0.0;
        for j in 0..=cfg.ell {
            if eta[j] > 0.0 {
                acc += eta[j] * (theta[j].ln() + log_p[j]);
            }
        }
        if !acc.is_finite() {
            return Err(Error::NonFiniteLikelihood {
                id: prep.record.id.clone(),
            });
        }
        Ok(acc)
    })?;
    Ok(terms.iter().sum())
}

/// sum_i eta_ij * ln p_ij for one category j (the likelihood factor touched
/// by the lambda and alpha blocks).
pub fn category_loglik(
    dataset: &[PreparedSubject],
    state: &ParameterState,
    cfg: &ModelConfig,
    quad: &QuadratureSpec,
    j: usize,
) -> Result<f64> {
    if j == 0 {
        return Ok(0.0);
    }
    let terms = with_subject_models(dataset, state, cfg, |i, prep, models| {
        let eta_ij = state.eta[i][j];
        if eta_ij <= 0.0 {
            return Ok(0.0);
        }
        let mut p = 0.0;
        let mut seen = false;
        for case in prep.cases.iter().filter(|c| c.feasible && c.m == j) {
            p += log_case_probability(case, &prep.record, &cfg.timeline, models, quad)?.exp();
            seen = true;
        }
        if !seen {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(eta_ij * p.ln())
    })?;
    Ok(terms.iter().sum())
}

/// sum_i sum_j eta_ij ln theta_ij (the factor touched by the beta block).
pub fn theta_loglik(dataset: &[PreparedSubject], state: &ParameterState) -> f64 {
    dataset
        .iter()
        .enumerate()
        .map(|(i, prep)| {
            let theta = state.resolve_theta(&prep.record.covariates_theta);
            state.eta[i]
                .iter()
                .zip(&theta)
                .filter(|(&e, _)| e > 0.0)
                .map(|(&e, &t)| e * t.ln())
                .sum::<f64>()
        })
        .sum()
}

/// Recompute all eta weights from the current state (Gibbs step 7).
pub fn update_all_eta(
    dataset: &[PreparedSubject],
    state: &ParameterState,
    cfg: &ModelConfig,
    quad: &QuadratureSpec,
) -> Result<Vec<Vec<f64>>> {
    with_subject_models(dataset, state, cfg, |_, prep, models| {
        expected_eta(prep, state, cfg, models, quad)
    })
}
