//! Metropolis-within-Gibbs posterior sampler.
//!
//! One sweep runs, in order: theta (exact Dirichlet draw, or the logit-link
//! coefficients when covariates act on theta), the Dirichlet hyperparameters
//! gamma, the lag rates lambda (or their log-link coefficients), the lag-rate
//! hyperpriors kappa, the frailty index alpha, its Beta hyperparameters tau,
//! and finally the deterministic eta update. Metropolis blocks random-walk on
//! unconstrained transforms (log for positive parameters, logit for alpha)
//! with Robbins-Monro scale adaptation during burn-in targeting 0.35
//! acceptance, frozen afterward.

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ParameterState};
use crate::quad::QuadratureSpec;
use crate::trajectory::{self, PreparedSubject};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Exponential hyperprior rates for gamma_j, length ell + 1.
    pub s: Vec<f64>,
    /// kappa_1 hyperprior rate.
    pub b: f64,
    /// kappa_2 Inverse-Gamma shape offset.
    pub c: f64,
    /// kappa_2 Inverse-Gamma rate offset.
    pub d: f64,
    /// Exponential rate for tau_1 and tau_2.
    pub tau_rate: f64,
    /// (mean, variance) of the normal prior on theta-link coefficients.
    pub beta_prior: (f64, f64),
    /// (mean, variance) of the normal prior on lag-link coefficients.
    pub omega_prior: (f64, f64),
}

impl PriorConfig {
    pub fn defaults(ell: usize) -> Self {
        PriorConfig {
            s: vec![1.0; ell + 1],
            b: 1.0,
            c: 2.0,
            d: 1.0,
            tau_rate: 1.0,
            beta_prior: (0.0, 10.0),
            omega_prior: (0.0, 10.0),
        }
    }

    pub fn validate(&self, ell: usize) -> Result<()> {
        if self.s.len() != ell + 1 {
            return Err(Error::Config("prior s must have ell + 1 entries".into()));
        }
        let pos = self.s.iter().all(|&v| v > 0.0)
            && self.b > 0.0
            && self.c > 0.0
            && self.d > 0.0
            && self.tau_rate > 0.0
            && self.beta_prior.1 > 0.0
            && self.omega_prior.1 > 0.0;
        if !pos {
            return Err(Error::Config("prior constants must be positive".into()));
        }
        Ok(())
    }
}

/// Initial random-walk scales per block family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalScales {
    pub gamma: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub tau: f64,
    pub beta: f64,
    pub omega: f64,
}

impl Default for ProposalScales {
    fn default() -> Self {
        ProposalScales {
            gamma: 0.5,
            lambda: 0.3,
            kappa: 0.5,
            alpha: 0.5,
            tau: 0.5,
            beta: 0.3,
            omega: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub proposal_scales: ProposalScales,
    pub adapt_during_burnin: bool,
    pub quad: QuadratureSpec,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 20_000,
            burn_in: 5_000,
            thin: 1,
            n_chains: 5,
            seed: 0,
            proposal_scales: ProposalScales::default(),
            adapt_during_burnin: true,
            quad: QuadratureSpec::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn_in {} must be < iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 || self.n_chains == 0 {
            return Err(Error::Config("thin and n_chains must be >= 1".into()));
        }
        self.quad.validate()
    }

    /// Number of stored draws per chain.
    pub fn stored_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub chain_index: usize,
    pub parameter_names: Vec<String>,
    /// One row per stored draw (post burn-in, thinned).
    pub draws: Vec<Vec<f64>>,
    /// Per-Metropolis-block acceptance rates, post burn-in.
    pub acceptance_rates: Vec<(String, f64)>,
    pub wall_seconds: f64,
}

impl ChainOutput {
    /// Column of draws for a named parameter.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.parameter_names.iter().position(|n| n == name)?;
        Some(self.draws.iter().map(|row| row[idx]).collect())
    }
}

// ---- low-level draws ----------------------------------------------------

fn draw_normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_gamma<R: Rng>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    GammaDist::new(shape, scale)
        .expect("positive gamma parameters")
        .sample(rng)
}

/// Exact Dirichlet draw with concentration eta_sums + gamma.
pub fn sample_theta<R: Rng>(eta_sums: &[f64], gamma: &[f64], rng: &mut R) -> Vec<f64> {
    let mut draws: Vec<f64> = eta_sums
        .iter()
        .zip(gamma)
        .map(|(&e, &g)| draw_gamma(e + g, 1.0, rng).max(1e-300))
        .collect();
    let total: f64 = draws.iter().sum();
    draws.iter_mut().for_each(|v| *v /= total);
    // Keep strictly inside the simplex.
    let eps = 1e-12;
    let mut sum = 0.0;
    for v in draws.iter_mut() {
        *v = v.max(eps);
        sum += *v;
    }
    draws.iter_mut().for_each(|v| *v /= sum);
    draws
}

/// Inverse-Gamma(shape, rate) draw (the kappa_2 conjugate update).
pub fn draw_inverse_gamma<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    1.0 / draw_gamma(shape, 1.0 / rate, rng)
}

/// One random-walk Metropolis step on an unconstrained coordinate.
/// `log_post` must include the Jacobian of the back-transform; a non-finite
/// proposal target rejects.
fn mh_step<R: Rng>(
    x: f64,
    lp_x: f64,
    scale: f64,
    rng: &mut R,
    mut log_post: impl FnMut(f64) -> f64,
) -> (f64, f64, bool) {
    let prop = x + scale * draw_normal(rng);
    let lp_prop = log_post(prop);
    if lp_prop.is_finite() && (lp_prop - lp_x >= 0.0 || rng.gen::<f64>().ln() < lp_prop - lp_x) {
        (prop, lp_prop, true)
    } else {
        (x, lp_x, false)
    }
}

/// Robbins-Monro adaptation state for one Metropolis block.
#[derive(Debug, Clone)]
struct BlockState {
    name: String,
    scale: f64,
    steps: u64,
    accepts: u64,
    proposals: u64,
}

impl BlockState {
    fn new(name: String, scale: f64) -> Self {
        BlockState {
            name,
            scale,
            steps: 0,
            accepts: 0,
            proposals: 0,
        }
    }

    fn record(&mut self, accepted: bool, adapting: bool) {
        self.proposals += 1;
        if accepted {
            self.accepts += 1;
        }
        if adapting {
            self.steps += 1;
            let step = (self.steps as f64).powf(-0.6);
            let target = 0.35;
            let delta = if accepted { 1.0 - target } else { -target };
            self.scale = (self.scale.ln() + step * delta).exp().clamp(1e-4, 20.0);
        }
    }

    fn reset_counts(&mut self) {
        self.accepts = 0;
        self.proposals = 0;
    }

    fn rate(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepts as f64 / self.proposals as f64
        }
    }
}

// ---- conditional log densities -------------------------------------------

/// ln of the gamma_j full conditional (up to a constant):
/// Gamma(sum gamma) / Gamma(gamma_j) * theta_j^(gamma_j - 1) * exp(-s_j gamma_j).
pub fn log_gamma_conditional(gamma: &[f64], j: usize, theta_j: f64, s_j: f64) -> f64 {
    let total: f64 = gamma.iter().sum();
    ln_gamma(total) - ln_gamma(gamma[j]) + (gamma[j] - 1.0) * theta_j.ln() - s_j * gamma[j]
}

/// ln Gamma(x; shape, scale) density.
fn ln_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    (shape - 1.0) * x.ln() - x / scale - shape * scale.ln() - ln_gamma(shape)
}

/// ln of the kappa_1 full conditional:
/// (kappa_2^kappa_1 Gamma(kappa_1))^-1 * lambda^(kappa_1 - 1) * exp(-b kappa_1).
pub fn log_kappa1_conditional(kappa1: f64, kappa2: f64, lambda: f64, b: f64) -> f64 {
    -kappa1 * kappa2.ln() - ln_gamma(kappa1) + (kappa1 - 1.0) * lambda.ln() - b * kappa1
}

/// ln Beta(alpha; tau1, tau2) density.
fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
}

/// ln of the tau_1 full conditional:
/// Gamma(tau1 + tau2)/Gamma(tau1) * alpha^(tau1 - 1) * exp(-rate * tau1);
/// tau_2 is symmetric with 1 - alpha.
pub fn log_tau_conditional(tau_own: f64, tau_other: f64, alpha_part: f64, rate: f64) -> f64 {
    ln_gamma(tau_own + tau_other) - ln_gamma(tau_own) + (tau_own - 1.0) * alpha_part.ln()
        - rate * tau_own
}

fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (x - mean) * (x - mean) / var
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

// ---- chain runner ---------------------------------------------------------

struct Runner<'a> {
    dataset: &'a [PreparedSubject],
    cfg: &'a ModelConfig,
    priors: &'a PriorConfig,
    quad: QuadratureSpec,
    state: ParameterState,
    blocks: Vec<BlockState>,
    adapting: bool,
    sweep: usize,
}

impl<'a> Runner<'a> {
    fn block_index(&self, name: &str) -> usize {
        self.blocks
            .iter()
            .position(|b| b.name == name)
            .expect("block registered at init")
    }

    fn abort(&self, block: &str, err: Error) -> Error {
        Error::SamplerAbort {
            sweep: self.sweep,
            block: block.to_string(),
            reason: err.to_string(),
        }
    }

    /// Likelihood factor touched by category-j parameters; empty datasets
    /// contribute nothing (prior sampling).
    fn cat_loglik(&self, state: &ParameterState, j: usize) -> Result<f64> {
        if self.dataset.is_empty() {
            return Ok(0.0);
        }
        trajectory::category_loglik(self.dataset, state, self.cfg, &self.quad, j)
    }

    fn eta_sums(&self) -> Vec<f64> {
        let ell = self.cfg.ell;
        let mut sums = vec![0.0; ell + 1];
        for eta in &self.state.eta {
            for (s, &e) in sums.iter_mut().zip(eta) {
                *s += e;
            }
        }
        sums
    }

    fn step_theta<R: Rng>(&mut self, rng: &mut R) {
        let sums = self.eta_sums();
        self.state.theta = sample_theta(&sums, &self.state.gamma, rng);
    }

    fn step_gamma<R: Rng>(&mut self, rng: &mut R) {
        for j in 0..=self.cfg.ell {
            let bi = self.block_index(&format!("gamma_{j}"));
            let scale = self.blocks[bi].scale;
            let theta_j = self.state.theta[j];
            let s_j = self.priors.s[j];
            let mut gamma = self.state.gamma.clone();
            let lp = |x: f64, g: &mut Vec<f64>| {
                g[j] = x.exp();
                log_gamma_conditional(g, j, theta_j, s_j) + x
            };
            let x0 = self.state.gamma[j].ln();
            let lp0 = lp(x0, &mut gamma);
            let (x1, _, acc) = mh_step(x0, lp0, scale, rng, |x| lp(x, &mut gamma));
            self.state.gamma[j] = x1.exp();
            self.blocks[bi].record(acc, self.adapting);
        }
    }

    fn step_lambda<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        for j in 1..=self.cfg.ell {
            for k in 1..=j {
                let bi = self.block_index(&format!("lambda_{j}_{k}"));
                let scale = self.blocks[bi].scale;
                let (k1, k2) = self.state.kappa[j - 1][k - 1];
                let cur = self.state.lambda[j - 1][k - 1];
                let x0 = cur.ln();
                let lp_of = |lam: f64, st: &ParameterState| -> Result<f64> {
                    Ok(self.cat_loglik(st, j)? + ln_gamma_pdf(lam, k1, k2) + lam.ln())
                };
                let lp0 = lp_of(cur, &self.state)
                    .map_err(|e| self.abort(&format!("lambda_{j}_{k}"), e))?;
                let mut prop_state = self.state.clone();
                let (x1, _, acc) = mh_step(x0, lp0, scale, rng, |x| {
                    prop_state.lambda[j - 1][k - 1] = x.exp();
                    lp_of(x.exp(), &prop_state).unwrap_or(f64::NEG_INFINITY)
                });
                self.state.lambda[j - 1][k - 1] = x1.exp();
                self.blocks[bi].record(acc, self.adapting);
            }
        }
        Ok(())
    }

    fn step_kappa<R: Rng>(&mut self, rng: &mut R) {
        for j in 1..=self.cfg.ell {
            for k in 1..=j {
                let lam = self.state.lambda[j - 1][k - 1];
                let bi = self.block_index(&format!("kappa_{j}_{k}_1"));
                let scale = self.blocks[bi].scale;
                let (k1, k2) = self.state.kappa[j - 1][k - 1];
                let lp = |x: f64| log_kappa1_conditional(x.exp(), k2, lam, self.priors.b) + x;
                let x0 = k1.ln();
                let (x1, _, acc) = mh_step(x0, lp(x0), scale, rng, lp);
                let k1_new = x1.exp();
                self.blocks[bi].record(acc, self.adapting);
                let k2_new = draw_inverse_gamma(k1_new + self.priors.c, lam + self.priors.d, rng);
                self.state.kappa[j - 1][k - 1] = (k1_new, k2_new);
            }
        }
    }

    // Alpha enters only multivariate categories; with none present the
    // target reduces to the Beta(tau) prior, still sampled for the chain.
    fn step_alpha<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let bi = self.block_index("alpha");
        let scale = self.blocks[bi].scale;
        let (t1, t2) = self.state.tau;
        let lp_of = |a: f64, st: &ParameterState| -> Result<f64> {
            let mut ll = 0.0;
            for j in 2..=self.cfg.ell {
                ll += self.cat_loglik(st, j)?;
            }
            // Logit-scale random walk: Jacobian ln a + ln(1 - a).
            Ok(ll + ln_beta_pdf(a, t1, t2) + a.ln() + (1.0 - a).ln())
        };
        // The support is truncated symmetrically at both ends: the stable law
        // degenerates as alpha -> 0, and an asymmetric cut would bias the
        // U-shaped Beta-mixture prior (it holds non-negligible mass within
        // ALPHA_MIN of each endpoint).
        let cur = self
            .state
            .alpha
            .clamp(crate::frailty::ALPHA_MIN, 1.0 - crate::frailty::ALPHA_MIN);
        let lp0 = lp_of(cur, &self.state).map_err(|e| self.abort("alpha", e))?;
        let mut prop_state = self.state.clone();
        let x0 = logit(cur);
        let (x1, _, acc) = mh_step(x0, lp0, scale, rng, |x| {
            let a = crate::model::expit(x);
            if !(a > crate::frailty::ALPHA_MIN && a < 1.0 - crate::frailty::ALPHA_MIN) {
                return f64::NEG_INFINITY;
            }
            prop_state.alpha = a;
            lp_of(a, &prop_state).unwrap_or(f64::NEG_INFINITY)
        });
        self.state.alpha = crate::model::expit(x1);
        self.blocks[bi].record(acc, self.adapting);
        Ok(())
    }

    fn step_tau<R: Rng>(&mut self, rng: &mut R) {
        let a = self.state.alpha.clamp(1e-12, 1.0 - 1e-12);
        for (which, part) in [("tau1", a), ("tau2", 1.0 - a)] {
            let bi = self.block_index(which);
            let scale = self.blocks[bi].scale;
            let (t1, t2) = self.state.tau;
            let (own, other) = if which == "tau1" { (t1, t2) } else { (t2, t1) };
            let rate = self.priors.tau_rate;
            let lp = |x: f64| log_tau_conditional(x.exp(), other, part, rate) + x;
            let x0 = own.ln();
            let (x1, _, acc) = mh_step(x0, lp(x0), scale, rng, lp);
            let new = x1.exp();
            if which == "tau1" {
                self.state.tau.0 = new;
            } else {
                self.state.tau.1 = new;
            }
            self.blocks[bi].record(acc, self.adapting);
        }
    }

    fn step_beta<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let n_coef = self.state.beta.as_ref().map(|b| b[0].len()).unwrap_or(0);
        let (mu, var) = self.priors.beta_prior;
        for j in 1..=self.cfg.ell {
            for c in 0..n_coef {
                let bi = self.block_index(&format!("beta_{j}_{c}"));
                let scale = self.blocks[bi].scale;
                let cur = self.state.beta.as_ref().unwrap()[j - 1][c];
                let lp_of = |x: f64, st: &ParameterState| {
                    trajectory::theta_loglik(self.dataset, st) + ln_normal_pdf(x, mu, var)
                };
                let lp0 = lp_of(cur, &self.state);
                if !lp0.is_finite() {
                    return Err(self.abort(
                        &format!("beta_{j}_{c}"),
                        Error::Config("non-finite theta-link target".into()),
                    ));
                }
                let mut prop_state = self.state.clone();
                let (x1, _, acc) = mh_step(cur, lp0, scale, rng, |x| {
                    prop_state.beta.as_mut().unwrap()[j - 1][c] = x;
                    lp_of(x, &prop_state)
                });
                self.state.beta.as_mut().unwrap()[j - 1][c] = x1;
                self.blocks[bi].record(acc, self.adapting);
            }
        }
        Ok(())
    }

    fn step_omega<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let (mu, var) = self.priors.omega_prior;
        for j in 1..=self.cfg.ell {
            for k in 1..=j {
                let n_coef = self.state.omega.as_ref().unwrap()[j - 1][k - 1].len();
                for c in 0..n_coef {
                    let bi = self.block_index(&format!("omega_{j}_{k}_{c}"));
                    let scale = self.blocks[bi].scale;
                    let cur = self.state.omega.as_ref().unwrap()[j - 1][k - 1][c];
                    let lp0 = self
                        .cat_loglik(&self.state, j)
                        .map_err(|e| self.abort(&format!("omega_{j}_{k}_{c}"), e))?
                        + ln_normal_pdf(cur, mu, var);
                    let mut prop_state = self.state.clone();
                    let (x1, _, acc) = mh_step(cur, lp0, scale, rng, |x| {
                        prop_state.omega.as_mut().unwrap()[j - 1][k - 1][c] = x;
                        match self.cat_loglik(&prop_state, j) {
                            Ok(ll) => ll + ln_normal_pdf(x, mu, var),
                            Err(_) => f64::NEG_INFINITY,
                        }
                    });
                    self.state.omega.as_mut().unwrap()[j - 1][k - 1][c] = x1;
                    self.blocks[bi].record(acc, self.adapting);
                }
            }
        }
        Ok(())
    }

    fn step_eta(&mut self) -> Result<()> {
        if self.dataset.is_empty() {
            return Ok(());
        }
        self.state.eta =
            trajectory::update_all_eta(self.dataset, &self.state, self.cfg, &self.quad)
                .map_err(|e| self.abort("eta", e))?;
        Ok(())
    }

    fn run_sweep<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        if self.cfg.theta_link {
            self.step_beta(rng)?;
        } else {
            self.step_theta(rng);
            self.step_gamma(rng);
        }
        if self.cfg.lag_link {
            self.step_omega(rng)?;
        } else {
            self.step_lambda(rng)?;
            self.step_kappa(rng);
        }
        self.step_alpha(rng)?;
        self.step_tau(rng);
        self.step_eta()
    }
}

/// Starting state: theta from observed-pattern frequencies, lambda from
/// method-of-moments on observed lags, hyperparameters at prior means.
pub fn initial_state(
    dataset: &[PreparedSubject],
    cfg: &ModelConfig,
    priors: &PriorConfig,
) -> Result<ParameterState> {
    let ell = cfg.ell;
    let mut counts = vec![1.0f64; ell + 1]; // one pseudo-count each
    for p in dataset {
        counts[p.record.k().min(ell)] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    let theta: Vec<f64> = counts.iter().map(|c| c / total).collect();

    // Moment-matched rates from observed gaps, clamped to a sane range.
    let rate_from = |vals: Vec<f64>| -> f64 {
        if vals.is_empty() {
            return 0.5;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (1.0 / mean.max(1e-3)).clamp(0.01, 10.0)
    };
    let mut lambda: Vec<Vec<f64>> = Vec::with_capacity(ell);
    for j in 1..=ell {
        let mut row = Vec::with_capacity(j);
        for k in 1..=j {
            let gaps: Vec<f64> = dataset
                .iter()
                .filter(|p| p.record.k() == j)
                .filter_map(|p| {
                    let s = &p.record.observed_screenings;
                    if k == 1 {
                        Some(s[0])
                    } else {
                        Some(s[k - 1] - s[k - 2] - cfg.timeline.refractory_years)
                    }
                })
                .filter(|&g| g > 0.0)
                .collect();
            row.push(rate_from(gaps));
        }
        lambda.push(row);
    }

    let gamma: Vec<f64> = priors.s.iter().map(|&s| 1.0 / s).collect();
    let kappa1 = 1.0 / priors.b;
    let kappa2 = priors.d / (kappa1 + priors.c - 1.0).max(0.5);
    let kappa: Vec<Vec<(f64, f64)>> = (1..=ell).map(|j| vec![(kappa1, kappa2); j]).collect();

    let beta = if cfg.theta_link {
        let width = dataset
            .first()
            .map(|p| p.record.covariates_theta.len())
            .unwrap_or(0);
        Some(
            (1..=ell)
                .map(|j| {
                    let mut v = vec![0.0; width + 1];
                    v[0] = (theta[j] / theta[0]).ln();
                    v
                })
                .collect(),
        )
    } else {
        None
    };
    let omega = if cfg.lag_link {
        let width = dataset
            .first()
            .map(|p| p.record.covariates_lag.len())
            .unwrap_or(0);
        Some(
            (1..=ell)
                .map(|j| {
                    (1..=j)
                        .map(|k| {
                            let mut v = vec![0.0; width + 1];
                            v[0] = lambda[j - 1][k - 1].ln();
                            v
                        })
                        .collect()
                })
                .collect(),
        )
    } else {
        None
    };

    let state = ParameterState {
        theta,
        gamma,
        lambda,
        kappa,
        alpha: 0.95,
        tau: (1.0 / priors.tau_rate, 1.0 / priors.tau_rate),
        beta,
        omega,
        eta: vec![vec![0.0; ell + 1]; dataset.len()],
    };
    state.validate(cfg)?;
    Ok(state)
}

fn block_names(cfg: &ModelConfig, state: &ParameterState, scales: &ProposalScales) -> Vec<BlockState> {
    let mut blocks = Vec::new();
    if cfg.theta_link {
        for (j, b) in state.beta.as_ref().unwrap().iter().enumerate() {
            for c in 0..b.len() {
                blocks.push(BlockState::new(format!("beta_{}_{c}", j + 1), scales.beta));
            }
        }
    } else {
        for j in 0..=cfg.ell {
            blocks.push(BlockState::new(format!("gamma_{j}"), scales.gamma));
        }
    }
    if cfg.lag_link {
        for (j, row) in state.omega.as_ref().unwrap().iter().enumerate() {
            for (k, w) in row.iter().enumerate() {
                for c in 0..w.len() {
                    blocks.push(BlockState::new(
                        format!("omega_{}_{}_{c}", j + 1, k + 1),
                        scales.omega,
                    ));
                }
            }
        }
    } else {
        for j in 1..=cfg.ell {
            for k in 1..=j {
                blocks.push(BlockState::new(format!("lambda_{j}_{k}"), scales.lambda));
                blocks.push(BlockState::new(format!("kappa_{j}_{k}_1"), scales.kappa));
            }
        }
    }
    blocks.push(BlockState::new("alpha".into(), scales.alpha));
    blocks.push(BlockState::new("tau1".into(), scales.tau));
    blocks.push(BlockState::new("tau2".into(), scales.tau));
    blocks
}

/// Run one chain. RNG stream is keyed by (seed, chain_index) so chains are
/// independent and the whole run reproduces bit-identically per seed.
pub fn run_chain(
    dataset: &[PreparedSubject],
    cfg: &ModelConfig,
    priors: &PriorConfig,
    ccfg: &ChainConfig,
    chain_index: usize,
) -> Result<ChainOutput> {
    ccfg.validate()?;
    priors.validate(cfg.ell)?;
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(ccfg.seed);
    rng.set_stream((1u64 << 32) + chain_index as u64);

    let state = initial_state(dataset, cfg, priors)?;
    let blocks = block_names(cfg, &state, &ccfg.proposal_scales);
    let mut runner = Runner {
        dataset,
        cfg,
        priors,
        quad: ccfg.quad,
        state,
        blocks,
        adapting: ccfg.adapt_during_burnin,
        sweep: 0,
    };
    runner.step_eta()?;

    let names = runner.state.parameter_names(cfg);
    let mut draws = Vec::with_capacity(ccfg.stored_draws());
    for sweep in 0..ccfg.iterations {
        runner.sweep = sweep;
        if sweep == ccfg.burn_in {
            runner.adapting = false;
            runner.blocks.iter_mut().for_each(BlockState::reset_counts);
        }
        runner.run_sweep(&mut rng)?;
        if sweep >= ccfg.burn_in && (sweep - ccfg.burn_in) % ccfg.thin == ccfg.thin - 1 {
            draws.push(runner.state.flatten());
        }
    }
    while draws.len() > ccfg.stored_draws() {
        draws.pop();
    }

    let acceptance_rates = runner
        .blocks
        .iter()
        .map(|b| (b.name.clone(), b.rate()))
        .collect();
    Ok(ChainOutput {
        chain_index,
        parameter_names: names,
        draws,
        acceptance_rates,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Run `n_chains` chains concurrently; output order is by chain index.
pub fn run_chains(
    dataset: &[PreparedSubject],
    cfg: &ModelConfig,
    priors: &PriorConfig,
    ccfg: &ChainConfig,
) -> Result<Vec<ChainOutput>> {
    (0..ccfg.n_chains)
        .into_par_iter()
        .map(|i| run_chain(dataset, cfg, priors, ccfg, i))
        .collect()
}
