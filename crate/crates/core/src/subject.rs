//! Subject records and the screening eligibility timeline.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Structural timeline constants on the analysis clock, which starts when a
/// subject first becomes eligible (age 50 maps to time 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EligibilityTimeline {
    /// Years after a screening during which a subject is not due (10).
    pub refractory_years: f64,
    /// Maximum lag support in years; `None` means unrestricted.
    pub max_lag_years: Option<f64>,
    /// Total years of screening eligibility (ages 50-90 -> 40).
    pub eligibility_length: f64,
    /// Length of the observation study in years.
    pub study_length: f64,
}

impl EligibilityTimeline {
    pub fn validate(&self) -> Result<()> {
        if !(self.refractory_years > 0.0) {
            return Err(Error::Config("refractory_years must be > 0".into()));
        }
        if let Some(l) = self.max_lag_years {
            if !(l > 0.0) {
                return Err(Error::Config("max_lag_years must be > 0".into()));
            }
        }
        if !(self.eligibility_length > 0.0) || !(self.study_length > 0.0) {
            return Err(Error::Config("timeline lengths must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for EligibilityTimeline {
    fn default() -> Self {
        EligibilityTimeline {
            refractory_years: 10.0,
            max_lag_years: Some(10.0),
            eligibility_length: 40.0,
            study_length: 25.0,
        }
    }
}

/// One individual's observation window, observed event times, and covariates.
/// All times are years on the analysis clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    /// t_L: 0 if not left-censored.
    pub entry_time: f64,
    /// t_R: equals eligibility_length if not right-censored.
    pub exit_time: f64,
    /// Observed screening times, strictly increasing.
    pub observed_screenings: Vec<f64>,
    /// X_i, covariates entering the theta link (no implicit intercept here;
    /// the link prepends one).
    pub covariates_theta: Vec<f64>,
    /// Z_i, covariates entering the lag-rate link.
    pub covariates_lag: Vec<f64>,
}

impl SubjectRecord {
    pub fn validate(&self, timeline: &EligibilityTimeline) -> Result<()> {
        let fail = |reason: String| Error::InvalidRecord {
            id: self.id.clone(),
            reason,
        };
        if !(self.entry_time >= 0.0) || !(self.entry_time < self.exit_time) {
            return Err(fail(format!(
                "need 0 <= entry_time < exit_time, got ({}, {})",
                self.entry_time, self.exit_time
            )));
        }
        if self.exit_time > timeline.eligibility_length + 1e-9 {
            return Err(fail(format!(
                "exit_time {} exceeds eligibility_length {}",
                self.exit_time, timeline.eligibility_length
            )));
        }
        let mut prev: Option<f64> = None;
        for &t in &self.observed_screenings {
            if t < self.entry_time - 1e-9 || t > self.exit_time + 1e-9 {
                return Err(fail(format!(
                    "observed screening at {t} outside window [{}, {}]",
                    self.entry_time, self.exit_time
                )));
            }
            if let Some(p) = prev {
                if t - p <= timeline.refractory_years {
                    return Err(fail(format!(
                        "screenings at {p} and {t} violate the {}-year refractory period",
                        timeline.refractory_years
                    )));
                }
            }
            prev = Some(t);
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.observed_screenings.len()
    }

    pub fn is_left_censored(&self) -> bool {
        self.entry_time > 0.0
    }

    pub fn is_right_censored(&self, timeline: &EligibilityTimeline) -> bool {
        self.exit_time < timeline.eligibility_length - 1e-9
    }
}
