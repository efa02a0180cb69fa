//! Model structure and the full parameter state of one posterior draw.

use crate::error::{Error, Result};
use crate::frailty::{check_alpha, FrailtySurvival, LagDistribution};
use crate::subject::EligibilityTimeline;
use serde::{Deserialize, Serialize};

/// Structural constants of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Maximum number of lifetime screenings.
    pub ell: usize,
    pub timeline: EligibilityTimeline,
    /// Covariates on theta via a multinomial-logit link (category 0 is the
    /// reference; reduces to expit for ell = 1).
    pub theta_link: bool,
    /// Covariates on the lag rates via a log link.
    pub lag_link: bool,
}

impl ModelConfig {
    pub fn new(ell: usize, timeline: EligibilityTimeline) -> Result<Self> {
        if ell == 0 {
            return Err(Error::Config("ell must be >= 1".into()));
        }
        timeline.validate()?;
        Ok(ModelConfig {
            ell,
            timeline,
            theta_link: false,
            lag_link: false,
        })
    }
}

/// One full draw of the sampler state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    /// theta_0..theta_ell, sums to 1. Ignored per subject when `beta` is set.
    pub theta: Vec<f64>,
    /// Dirichlet prior parameters gamma_0..gamma_ell.
    pub gamma: Vec<f64>,
    /// lambda[j-1][k-1] = lambda_jk for j = 1..ell, k = 1..j.
    pub lambda: Vec<Vec<f64>>,
    /// kappa[j-1][k-1] = (kappa_jk1, kappa_jk2): Gamma shape/scale hyperpriors.
    pub kappa: Vec<Vec<(f64, f64)>>,
    pub alpha: f64,
    pub tau: (f64, f64),
    /// Theta-link coefficients, beta[j-1] for j = 1..ell; each vector is
    /// (intercept, coefficients...).
    pub beta: Option<Vec<Vec<f64>>>,
    /// Lag-link coefficients, omega[j-1][k-1]; each vector is
    /// (intercept, coefficients...).
    pub omega: Option<Vec<Vec<Vec<f64>>>>,
    /// Per-subject eta weights, each of length ell + 1.
    pub eta: Vec<Vec<f64>>,
}

pub fn expit(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Dot product with an implicit leading intercept in `coef`.
fn link_dot(coef: &[f64], covs: &[f64]) -> f64 {
    debug_assert_eq!(coef.len(), covs.len() + 1);
    coef[0]
        + coef[1..]
            .iter()
            .zip(covs)
            .map(|(c, x)| c * x)
            .sum::<f64>()
}

impl ParameterState {
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let ell = cfg.ell;
        if self.theta.len() != ell + 1 || self.gamma.len() != ell + 1 {
            return Err(Error::Config("theta/gamma length must be ell + 1".into()));
        }
        let tsum: f64 = self.theta.iter().sum();
        if (tsum - 1.0).abs() > 1e-9 || self.theta.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Config(format!(
                "theta must lie in the open simplex, got {:?}",
                self.theta
            )));
        }
        if self.lambda.len() != ell {
            return Err(Error::Config("lambda must have ell rows".into()));
        }
        for (j, row) in self.lambda.iter().enumerate() {
            if row.len() != j + 1 {
                return Err(Error::Config(format!("lambda row {} must have {} entries", j + 1, j + 1)));
            }
            if row.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::Config("lambda entries must be > 0".into()));
            }
        }
        if self.gamma.iter().any(|&g| !(g > 0.0))
            || !(self.tau.0 > 0.0)
            || !(self.tau.1 > 0.0)
            || self
                .kappa
                .iter()
                .flatten()
                .any(|&(a, b)| !(a > 0.0 && b > 0.0))
        {
            return Err(Error::Config("positivity constraint violated".into()));
        }
        check_alpha(self.alpha)?;
        Ok(())
    }

    /// Theta vector for one subject: the link-resolved probabilities when the
    /// multinomial-logit link is active, the shared vector otherwise.
    pub fn resolve_theta(&self, covs_theta: &[f64]) -> Vec<f64> {
        match &self.beta {
            None => self.theta.clone(),
            Some(beta) => {
                let exps: Vec<f64> = beta.iter().map(|b| link_dot(b, covs_theta).exp()).collect();
                let denom = 1.0 + exps.iter().sum::<f64>();
                let mut out = Vec::with_capacity(beta.len() + 1);
                out.push(1.0 / denom);
                out.extend(exps.iter().map(|e| e / denom));
                out
            }
        }
    }

    /// Rate lambda_jk for one subject (log link when omega is set).
    pub fn resolve_lambda(&self, covs_lag: &[f64], j: usize, k: usize) -> f64 {
        match &self.omega {
            None => self.lambda[j - 1][k - 1],
            Some(omega) => link_dot(&omega[j - 1][k - 1], covs_lag).exp(),
        }
    }

    /// Frailty survival model for the category M = j of one subject.
    /// The single-screening branch is plain exponential (alpha enters only
    /// when a subject has two or more correlated lag times).
    pub fn category_survival(&self, cfg: &ModelConfig, covs_lag: &[f64], j: usize) -> Result<FrailtySurvival> {
        let trunc = cfg.timeline.max_lag_years;
        let rates = (1..=j)
            .map(|k| LagDistribution::new(self.resolve_lambda(covs_lag, j, k), trunc))
            .collect::<Result<Vec<_>>>()?;
        let alpha = if j <= 1 { 1.0 } else { self.alpha };
        FrailtySurvival::new(rates, alpha)
    }

    /// Flattened column labels matching `flatten`.
    pub fn parameter_names(&self, cfg: &ModelConfig) -> Vec<String> {
        let mut names = Vec::new();
        if self.beta.is_none() {
            for j in 0..=cfg.ell {
                names.push(format!("theta{j}"));
            }
            for j in 0..=cfg.ell {
                names.push(format!("gamma{j}"));
            }
        } else {
            for (j, b) in self.beta.as_ref().unwrap().iter().enumerate() {
                for k in 0..b.len() {
                    names.push(format!("beta_{}_{k}", j + 1));
                }
            }
        }
        if self.omega.is_none() {
            for j in 1..=cfg.ell {
                for k in 1..=j {
                    names.push(format!("lambda_{j}_{k}"));
                }
            }
            for j in 1..=cfg.ell {
                for k in 1..=j {
                    names.push(format!("kappa_{j}_{k}_1"));
                    names.push(format!("kappa_{j}_{k}_2"));
                }
            }
        } else {
            for (j, row) in self.omega.as_ref().unwrap().iter().enumerate() {
                for (k, w) in row.iter().enumerate() {
                    for c in 0..w.len() {
                        names.push(format!("omega_{}_{}_{c}", j + 1, k + 1));
                    }
                }
            }
        }
        names.push("alpha".into());
        names.push("tau1".into());
        names.push("tau2".into());
        names
    }

    /// Rebuild a state from one flattened chain row (no-covariate layout).
    pub fn from_flat(cfg: &ModelConfig, row: &[f64]) -> Result<Self> {
        let ell = cfg.ell;
        let n_rates = ell * (ell + 1) / 2;
        let expect = 2 * (ell + 1) + n_rates + 2 * n_rates + 3;
        if row.len() != expect {
            return Err(Error::DimensionMismatch {
                expected: expect,
                got: row.len(),
            });
        }
        let mut it = row.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { (&mut it).take(n).collect() };
        let theta = take(ell + 1);
        let gamma = take(ell + 1);
        let mut lambda = Vec::with_capacity(ell);
        for j in 1..=ell {
            lambda.push(take(j));
        }
        let mut kappa = Vec::with_capacity(ell);
        for j in 1..=ell {
            let flat = take(2 * j);
            kappa.push(flat.chunks(2).map(|c| (c[0], c[1])).collect());
        }
        let tail = take(3);
        Ok(ParameterState {
            theta,
            gamma,
            lambda,
            kappa,
            alpha: tail[0],
            tau: (tail[1], tail[2]),
            beta: None,
            omega: None,
            eta: vec![],
        })
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut row = Vec::new();
        if self.beta.is_none() {
            row.extend_from_slice(&self.theta);
            row.extend_from_slice(&self.gamma);
        } else {
            for b in self.beta.as_ref().unwrap() {
                row.extend_from_slice(b);
            }
        }
        if self.omega.is_none() {
            for r in &self.lambda {
                row.extend_from_slice(r);
            }
            for r in &self.kappa {
                for &(a, b) in r {
                    row.push(a);
                    row.push(b);
                }
            }
        } else {
            for r in self.omega.as_ref().unwrap() {
                for w in r {
                    row.extend_from_slice(w);
                }
            }
        }
        row.push(self.alpha);
        row.push(self.tau.0);
        row.push(self.tau.1);
        row
    }
}
