//! Chain post-processing: posterior summaries, convergence statistics, and
//! survival-curve grids for reporting.

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ParameterState};
use crate::sampler::ChainOutput;
use crate::subject::{EligibilityTimeline, SubjectRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParameterSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Median with central 95% interval per labeled column; chains are pooled
/// when more than one is supplied.
pub fn summarize(chains: &[ChainOutput]) -> Result<PosteriorSummary> {
    let first = chains.first().ok_or_else(|| Error::DegenerateChain("no chains".into()))?;
    if first.draws.is_empty() {
        return Err(Error::DegenerateChain("empty chain".into()));
    }
    let names = &first.parameter_names;
    let parameters = names
        .par_iter()
        .enumerate()
        .map(|(idx, name)| {
            let mut col: Vec<f64> = chains
                .iter()
                .flat_map(|c| c.draws.iter().map(move |row| row[idx]))
                .collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ParameterSummary {
                name: name.clone(),
                median: quantile_sorted(&col, 0.5),
                lower: quantile_sorted(&col, 0.025),
                upper: quantile_sorted(&col, 0.975),
                n_draws: col.len(),
            }
        })
        .collect();
    Ok(PosteriorSummary { parameters })
}

/// Spectral density at frequency zero via a Bartlett lag window over the
/// first ~4% of lags.
fn spectral_variance(x: &[f64]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let max_lag = ((0.04 * n as f64).floor() as usize).max(1).min(n - 1);
    let acov = |k: usize| -> f64 {
        centered[..n - k]
            .iter()
            .zip(&centered[k..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let mut s = acov(0);
    for k in 1..=max_lag {
        let w = 1.0 - k as f64 / (max_lag + 1) as f64;
        s += 2.0 * w * acov(k);
    }
    s.max(0.0)
}

/// Geweke convergence z-score comparing the first `frac_a` of the chain to
/// the last `frac_b`, with spectral-density variance estimates.
pub fn geweke(column: &[f64], frac_a: f64, frac_b: f64) -> Result<f64> {
    if column.len() < 100 {
        return Err(Error::DegenerateChain(format!(
            "geweke needs >= 100 draws, got {}",
            column.len()
        )));
    }
    if !(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0) {
        return Err(Error::Config("geweke fractions must be positive with sum <= 1".into()));
    }
    let n = column.len();
    let na = ((n as f64 * frac_a) as usize).max(2);
    let nb = ((n as f64 * frac_b) as usize).max(2);
    let a = &column[..na];
    let b = &column[n - nb..];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let va = spectral_variance(a);
    let vb = spectral_variance(b);
    let denom = (va / na as f64 + vb / nb as f64).sqrt();
    if !(denom > 0.0) {
        return Err(Error::DegenerateChain("zero variance in geweke windows".into()));
    }
    Ok((mean(a) - mean(b)) / denom)
}

/// Classic potential scale reduction factor across chains of equal length.
pub fn gelman_rubin(columns: &[Vec<f64>]) -> Result<f64> {
    if columns.len() < 2 {
        return Err(Error::DegenerateChain("gelman_rubin needs >= 2 chains".into()));
    }
    let n = columns[0].len();
    if n < 100 || columns.iter().any(|c| c.len() != n) {
        return Err(Error::DegenerateChain(
            "gelman_rubin needs equal chain lengths >= 100".into(),
        ));
    }
    let m = columns.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b_over_n = means.iter().map(|&mu| (mu - grand) * (mu - grand)).sum::<f64>() / (m - 1.0);
    let w = columns
        .iter()
        .zip(&means)
        .map(|(c, &mu)| c.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b_over_n == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::DegenerateChain("zero within-chain variance".into()))
        };
    }
    Ok((((nf - 1.0) / nf * w + b_over_n) / w).sqrt())
}

// ---- survival curve grids --------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_max: f64,
    pub points: usize,
    pub bivariate_max: f64,
    pub bivariate_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            t_max: 10.0,
            points: 101,
            bivariate_max: 5.0,
            bivariate_points: 26,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub kind: String,
    pub time1: f64,
    pub time2: Option<f64>,
    pub value: f64,
}

fn grid(n: usize, max: f64) -> Vec<f64> {
    (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect()
}

/// All reporting grids for one parameter state:
///   population        — P(no screening by t) mixing over categories,
///   marginal_j_k      — 1 - theta_j * F_jk(t),
///   conditional_j_k   — P(lag k of category j exceeds t | M = j),
///   bivariate         — conditional joint survival over the square grid.
pub fn survival_grids(
    state: &ParameterState,
    cfg: &ModelConfig,
    spec: &GridSpec,
) -> Result<Vec<CurvePoint>> {
    if spec.points < 2 || spec.bivariate_points < 2 {
        return Err(Error::Config("grid needs at least 2 points per axis".into()));
    }
    if let Some(l) = cfg.timeline.max_lag_years {
        if spec.t_max > l + 1e-9 || spec.bivariate_max > l + 1e-9 {
            return Err(Error::Config(format!(
                "grid extends past the lag support bound {l}"
            )));
        }
    }
    let models: Vec<_> = (1..=cfg.ell)
        .map(|j| state.category_survival(cfg, &[], j))
        .collect::<Result<_>>()?;
    let masses: Vec<f64> = models.iter().map(|fs| fs.box_mass()).collect::<Result<_>>()?;

    let times = grid(spec.points, spec.t_max);
    let mut out = Vec::new();

    // Population curve: theta_0 + sum_j theta_j * P(first lag > t | M=j).
    for &t in &times {
        let mut v = state.theta[0];
        for j in 1..=cfg.ell {
            let tail = models[j - 1].boxed_tail_mass(0, t)? / masses[j - 1];
            v += state.theta[j] * tail;
        }
        out.push(CurvePoint {
            kind: "population".into(),
            time1: t,
            time2: None,
            value: v,
        });
    }

    for j in 1..=cfg.ell {
        let fs = &models[j - 1];
        for k in 0..j {
            for &t in &times {
                let cond = fs.boxed_tail_mass(k, t)? / masses[j - 1];
                out.push(CurvePoint {
                    kind: format!("conditional_{j}_{}", k + 1),
                    time1: t,
                    time2: None,
                    value: cond,
                });
                out.push(CurvePoint {
                    kind: format!("marginal_{j}_{}", k + 1),
                    time1: t,
                    time2: None,
                    value: 1.0 - state.theta[j] * (1.0 - cond),
                });
            }
        }
    }

    if cfg.ell >= 2 {
        let fs = &models[1];
        let l = cfg.timeline.max_lag_years;
        let b = grid(spec.bivariate_points, spec.bivariate_max);
        let s = |a: f64, c: f64| fs.joint_survival(&[a, c]);
        for &y1 in &b {
            for &y2 in &b {
                let v = match l {
                    Some(l) => {
                        (s(y1, y2)? - s(y1, l)? - s(l, y2)? + s(l, l)?) / masses[1]
                    }
                    None => s(y1, y2)?,
                };
                out.push(CurvePoint {
                    kind: "bivariate".into(),
                    time1: y1,
                    time2: Some(y2),
                    value: v.clamp(0.0, 1.0),
                });
            }
        }
    }
    Ok(out)
}

/// Per-draw population-curve values at the grid times (the draw-density
/// artifact behind credible bands).
pub fn draw_population_grid(
    chain: &ChainOutput,
    cfg: &ModelConfig,
    times: &[f64],
) -> Result<Vec<CurvePoint>> {
    let rows: Vec<Vec<CurvePoint>> = chain
        .draws
        .par_iter()
        .map(|row| {
            let state = ParameterState::from_flat(cfg, row)?;
            let mut pts = Vec::with_capacity(times.len());
            for &t in times {
                let mut v = state.theta[0];
                for j in 1..=cfg.ell {
                    let fs = state.category_survival(cfg, &[], j)?;
                    v += state.theta[j] * (fs.boxed_tail_mass(0, t)? / fs.box_mass()?);
                }
                pts.push(CurvePoint {
                    kind: "draw_population".into(),
                    time1: t,
                    time2: None,
                    value: v,
                });
            }
            Ok(pts)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Unsmoothed empirical hazard of the first observed screening: events per
/// person-year at risk within each bin, accounting for entry/exit windows.
pub fn empirical_hazard(
    records: &[SubjectRecord],
    timeline: &EligibilityTimeline,
    bin_width: f64,
) -> Result<Vec<CurvePoint>> {
    if !(bin_width > 0.0) {
        return Err(Error::Config("bin_width must be > 0".into()));
    }
    let n_bins = (timeline.eligibility_length / bin_width).ceil() as usize;
    let mut events = vec![0.0f64; n_bins];
    let mut exposure = vec![0.0f64; n_bins];
    for r in records {
        let first = r.observed_screenings.first().copied();
        let end = first.unwrap_or(r.exit_time);
        for (i, (ev, ex)) in events.iter_mut().zip(exposure.iter_mut()).enumerate() {
            let lo = i as f64 * bin_width;
            let hi = lo + bin_width;
            let overlap = (end.min(hi) - r.entry_time.max(lo)).max(0.0);
            *ex += overlap;
            if let Some(t) = first {
                if t >= lo && t < hi {
                    *ev += 1.0;
                }
            }
        }
    }
    Ok(events
        .iter()
        .zip(&exposure)
        .enumerate()
        .filter(|(_, (_, &ex))| ex > 0.0)
        .map(|(i, (&ev, &ex))| CurvePoint {
            kind: "empirical_hazard".into(),
            time1: (i as f64 + 0.5) * bin_width,
            time2: None,
            value: ev / ex,
        })
        .collect())
}
