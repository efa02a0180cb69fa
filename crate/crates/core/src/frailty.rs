//! Positive-stable-frailty joint survival and its derivative probabilities.
//!
//! The joint survival of M lag times with exponential cumulative hazards
//! `L_j(y) = rate_j * y` and a shared positive stable frailty with index
//! `alpha` is `S(y) = exp(-(L_1(y_1) + ... + L_M(y_M))^alpha)`. Closed-form
//! mixed partials are shipped for M <= 2; alpha = 1 is the independence
//! case.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Smallest admissible alpha; the stable law degenerates as alpha -> 0.
pub const ALPHA_MIN: f64 = 1e-6;

/// Laplace transform of the positive stable law: E{exp(-sZ)} = exp(-s^alpha).
pub fn stable_laplace(s: f64, alpha: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("stable_laplace: s must be >= 0, got {s}")));
    }
    check_alpha(alpha)?;
    Ok((-s.powf(alpha)).exp())
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must be in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// One exponential lag-time distribution, optionally right-truncated at
/// `truncation` years (renormalized on (0, truncation]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagDistribution {
    pub rate: f64,
    pub truncation: Option<f64>,
}

impl LagDistribution {
    pub fn new(rate: f64, truncation: Option<f64>) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::domain(format!("lag rate must be > 0, got {rate}")));
        }
        if let Some(t) = truncation {
            if !(t > 0.0) {
                return Err(Error::domain(format!("lag truncation must be > 0, got {t}")));
            }
        }
        Ok(LagDistribution { rate, truncation })
    }

    pub fn untruncated(rate: f64) -> Result<Self> {
        Self::new(rate, None)
    }

    /// Cumulative hazard Lambda(t) = rate * t.
    pub fn cum_hazard(&self, t: f64) -> f64 {
        self.rate * t
    }

    /// CDF of the (possibly truncated) exponential lag law.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("lag_cdf: t must be >= 0, got {t}")));
        }
        match self.truncation {
            None => Ok(1.0 - (-self.rate * t).exp()),
            Some(l) => {
                let tt = t.min(l);
                Ok((1.0 - (-self.rate * tt).exp()) / (1.0 - (-self.rate * l).exp()))
            }
        }
    }

    /// Survival 1 - cdf(t).
    pub fn survival(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.cdf(t)?)
    }
}

/// Joint survival model for M correlated lag times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrailtySurvival {
    rates: Vec<LagDistribution>,
    alpha: f64,
}

impl FrailtySurvival {
    pub fn new(rates: Vec<LagDistribution>, alpha: f64) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::domain("FrailtySurvival needs at least one lag distribution"));
        }
        check_alpha(alpha)?;
        Ok(FrailtySurvival { rates, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[LagDistribution] {
        &self.rates
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.rates.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rates.len(),
                got: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::domain(format!("negative lag time {bad}")));
        }
        Ok(())
    }

    fn hazard_sum(&self, y: &[f64]) -> f64 {
        self.rates
            .iter()
            .zip(y)
            .map(|(d, &t)| d.cum_hazard(t))
            .sum()
    }

    /// S(y_1, ..., y_M | M) = exp(-(sum_j Lambda_j(y_j))^alpha).
    pub fn joint_survival(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        stable_laplace(self.hazard_sum(y), self.alpha)
    }

    /// -d/dy_k S(y | M): density in coordinate `observed_index`, survival in
    /// the rest. For exponential lags this is
    /// `alpha * rate_k * L^(alpha-1) * exp(-L^alpha)` with L the hazard sum.
    pub fn neg_partial_density(&self, y: &[f64], observed_index: usize) -> Result<f64> {
        self.check_dim(y)?;
        if observed_index >= self.rates.len() {
            return Err(Error::domain(format!(
                "observed_index {observed_index} out of range for M={}",
                self.rates.len()
            )));
        }
        let lam = self.hazard_sum(y);
        if lam == 0.0 && self.alpha < 1.0 {
            return Err(Error::domain(
                "neg_partial_density is singular at the origin for alpha < 1",
            ));
        }
        let a = self.alpha;
        let rate = self.rates[observed_index].rate;
        if lam == 0.0 {
            // alpha = 1, plain exponential density at the origin.
            return Ok(rate);
        }
        Ok(a * rate * lam.powf(a - 1.0) * (-lam.powf(a)).exp())
    }

    /// Log of `neg_partial_density`.
    pub fn log_neg_partial_density(&self, y: &[f64], observed_index: usize) -> Result<f64> {
        self.check_dim(y)?;
        let lam = self.hazard_sum(y);
        if lam == 0.0 && self.alpha < 1.0 {
            return Err(Error::domain(
                "neg_partial_density is singular at the origin for alpha < 1",
            ));
        }
        let a = self.alpha;
        let rate = self.rates[observed_index].rate;
        if lam == 0.0 {
            return Ok(rate.ln());
        }
        Ok(a.ln() + rate.ln() + (a - 1.0) * lam.ln() - lam.powf(a))
    }

    /// (-1)^M d^M/dy_1..dy_M S(y | M), the joint density of observing all M
    /// lag times. Closed forms cover M <= 2:
    ///
    ///   M = 2: rate_1*rate_2 * alpha * L^(alpha-2) * (alpha*L^alpha + 1 - alpha) * exp(-L^alpha)
    pub fn full_density(&self, y: &[f64]) -> Result<f64> {
        self.log_full_density(y).map(f64::exp)
    }

    pub fn log_full_density(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        match self.rates.len() {
            1 => self.log_neg_partial_density(y, 0),
            2 => {
                let lam = self.hazard_sum(y);
                if lam == 0.0 {
                    return Err(Error::domain(
                        "full_density is singular at the origin",
                    ));
                }
                let a = self.alpha;
                let r1 = self.rates[0].rate.ln();
                let r2 = self.rates[1].rate.ln();
                let la = lam.powf(a);
                Ok(r1 + r2 + a.ln() + (a - 2.0) * lam.ln() + (a * la + 1.0 - a).ln() - la)
            }
            m => Err(Error::domain(format!(
                "full_density closed form is only shipped for M <= 2, got M={m}"
            ))),
        }
    }

    /// Normalizing mass P(all Y_j <= truncation_j) of the joint law restricted
    /// to the truncated box, by inclusion-exclusion over truncated
    /// coordinates. Equals 1 when no coordinate is truncated.
    pub fn box_mass(&self) -> Result<f64> {
        let truncated: Vec<(usize, f64)> = self
            .rates
            .iter()
            .enumerate()
            .filter_map(|(k, d)| d.truncation.map(|l| (k, l)))
            .collect();
        if truncated.is_empty() {
            return Ok(1.0);
        }
        let mut mass = 0.0;
        let n = truncated.len();
        let mut y = vec![0.0; self.rates.len()];
        for subset in 0..(1usize << n) {
            y.iter_mut().for_each(|v| *v = 0.0);
            let mut sign = 1.0;
            for (bit, &(k, l)) in truncated.iter().enumerate() {
                if subset & (1 << bit) != 0 {
                    y[k] = l;
                    sign = -sign;
                }
            }
            mass += sign * self.joint_survival(&y)?;
        }
        Ok(mass)
    }

    /// Median of the k-th lag time under the configured model, integrating the
    /// remaining coordinates over their full support. Untruncated closed form
    /// is (ln 2)^(1/alpha) / rate_k; truncated medians are found by bisection
    /// to 1e-10.
    pub fn median_lag(&self, k: usize) -> Result<f64> {
        if k >= self.rates.len() {
            return Err(Error::domain(format!("median_lag: index {k} out of range")));
        }
        let any_trunc = self.rates.iter().any(|d| d.truncation.is_some());
        if !any_trunc {
            return Ok(std::f64::consts::LN_2.powf(1.0 / self.alpha) / self.rates[k].rate);
        }
        let upper = self.rates[k]
            .truncation
            .unwrap_or(1e6 / self.rates[k].rate);
        let mass = self.box_mass()?;
        let surv = |t: f64| -> f64 {
            // P(Y_k > t, all coords within their boxes) / box mass.
            self.boxed_tail_mass(k, t).unwrap() / mass
        };
        let (mut lo, mut hi) = (0.0, upper);
        if surv(hi) > 0.5 {
            return Ok(hi);
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if surv(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Unnormalized P(Y_k > t, every truncated coordinate <= its bound).
    pub fn boxed_tail_mass(&self, k: usize, t: f64) -> Result<f64> {
        let truncated: Vec<(usize, f64)> = self
            .rates
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .filter_map(|(j, d)| d.truncation.map(|l| (j, l)))
            .collect();
        let mut mass = 0.0;
        let n = truncated.len();
        let mut y = vec![0.0; self.rates.len()];
        let lk = self.rates[k].truncation;
        for subset in 0..(1usize << n) {
            y.iter_mut().for_each(|v| *v = 0.0);
            let mut sign = 1.0;
            for (bit, &(j, l)) in truncated.iter().enumerate() {
                if subset & (1 << bit) != 0 {
                    y[j] = l;
                    sign = -sign;
                }
            }
            y[k] = t;
            let lower = self.joint_survival(&y)?;
            let upper = match lk {
                Some(l) => {
                    y[k] = l.max(t);
                    self.joint_survival(&y)?
                }
                None => 0.0,
            };
            mass += sign * (lower - upper);
        }
        Ok(mass)
    }
}
