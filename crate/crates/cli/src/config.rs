//! JSON configuration schemas for each subcommand, with command-line
//! overrides layered on top.

use curefrail::diagnostics::GridSpec;
use curefrail::model::ModelConfig;
use curefrail::sampler::{ChainConfig, PriorConfig};
use curefrail::simulator::Scenario;
use curefrail::subject::EligibilityTimeline;
use curefrail::{Error, QuadMethod, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::path::Path;

use crate::{ChainArgs, ModelArgs};

pub const SCHEMA_VERSION: u32 = 1;

/// Eligibility begins at this age; `--max-age` is converted relative to it.
const ELIGIBILITY_START_AGE: f64 = 50.0;

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Parse a config file, or fall back to `Default` when no file is given.
pub fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> std::result::Result<T, (u8, String)> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let data = std::fs::read_to_string(p)
                .map_err(|e| (1u8, format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&data)
                .map_err(|e| (1u8, format!("invalid config {}: {e}", p.display())))
        }
    }
}

fn apply_timeline_overrides(timeline: &mut EligibilityTimeline, args: &ModelArgs) -> Result<()> {
    if let Some(raw) = &args.truncate_lag {
        timeline.max_lag_years = if raw.eq_ignore_ascii_case("none") {
            None
        } else {
            let years: f64 = raw
                .parse()
                .map_err(|e| Error::Config(format!("bad --truncate-lag value {raw:?}: {e}")))?;
            Some(years)
        };
    }
    if let Some(max_age) = args.max_age {
        if max_age <= ELIGIBILITY_START_AGE {
            return Err(Error::Config(format!(
                "--max-age must exceed {ELIGIBILITY_START_AGE}, got {max_age}"
            )));
        }
        timeline.eligibility_length = max_age - ELIGIBILITY_START_AGE;
    }
    timeline.validate()
}

fn apply_chain_overrides(chain: &mut ChainConfig, args: &ChainArgs, seed: Option<u64>) -> Result<()> {
    if let Some(n) = args.chains {
        chain.n_chains = n;
    }
    if let Some(n) = args.iterations {
        chain.iterations = n;
    }
    if let Some(n) = args.burn_in {
        chain.burn_in = n;
    }
    if let Some(n) = args.thin {
        chain.thin = n;
    }
    if let Some(s) = seed {
        chain.seed = s;
    }
    chain.validate()
}

/// `simulate` config: either one grid cell or an explicit scenario.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Grid coordinates (lag-rate row, screening-count row), both 1-based.
    #[serde(default)]
    pub grid: Option<(usize, usize)>,
    /// Full scenario; overrides `grid` when present.
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub n_subjects: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            schema_version: SCHEMA_VERSION,
            grid: Some((1, 1)),
            scenario: None,
            n_subjects: None,
            alpha: None,
            seed: 0,
        }
    }
}

impl SimulateConfig {
    pub fn resolve(&self, args: &ModelArgs, _seed: Option<u64>) -> Result<Scenario> {
        check_schema(self.schema_version)?;
        if let Some(ell) = args.ell {
            // The trajectory generator always carries the two-screening
            // structure; a single-screening population is expressed through
            // theta, not through ell.
            if ell != 2 {
                return Err(Error::Config(format!(
                    "simulate only supports --ell 2, got {ell}; set theta to suppress categories"
                )));
            }
        }
        let mut sc = match (&self.scenario, self.grid) {
            (Some(sc), _) => sc.clone(),
            (None, Some((lt, nls))) => Scenario::from_grid(lt, nls)?,
            (None, None) => Scenario::from_grid(1, 1)?,
        };
        if let Some(n) = self.n_subjects {
            sc.n_subjects = n;
        }
        if let Some(a) = self.alpha {
            sc.alpha = a;
        }
        apply_timeline_overrides(&mut sc.timeline, args)?;
        sc.validate()?;
        Ok(sc)
    }
}

/// Quadrature defaults for fitting: fixed Gauss-Legendre is much faster in
/// the sampler's hot loop than adaptive bisection at equivalent accuracy.
fn fit_quad_default() -> curefrail::QuadratureSpec {
    curefrail::QuadratureSpec {
        method: QuadMethod::FixedGaussLegendre,
        node_count: 32,
        ..Default::default()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default = "default_ell")]
    pub ell: usize,
    #[serde(default)]
    pub timeline: EligibilityTimeline,
    /// Model subject theta on covariates via a multinomial-logit link.
    #[serde(default)]
    pub theta_link: bool,
    /// Model lag rates on covariates via a log link.
    #[serde(default)]
    pub lag_link: bool,
    #[serde(default)]
    pub priors: Option<PriorConfig>,
    #[serde(default)]
    pub chain: Option<ChainConfig>,
}

fn default_ell() -> usize {
    2
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            schema_version: SCHEMA_VERSION,
            ell: 2,
            timeline: EligibilityTimeline::default(),
            theta_link: false,
            lag_link: false,
            priors: None,
            chain: None,
        }
    }
}

impl FitConfig {
    pub fn resolve(
        &self,
        model_args: &ModelArgs,
        chain_args: &ChainArgs,
        seed: Option<u64>,
    ) -> Result<(ModelConfig, PriorConfig, ChainConfig)> {
        check_schema(self.schema_version)?;
        let ell = model_args.ell.unwrap_or(self.ell);
        if !(1..=2).contains(&ell) {
            return Err(Error::Config(format!("--ell must be 1 or 2, got {ell}")));
        }
        let mut timeline = self.timeline;
        apply_timeline_overrides(&mut timeline, model_args)?;
        let mut cfg = ModelConfig::new(ell, timeline)?;
        cfg.theta_link = self.theta_link;
        cfg.lag_link = self.lag_link;
        let priors = self.priors.clone().unwrap_or_else(|| PriorConfig::defaults(ell));
        priors.validate(ell)?;
        let mut chain = self.chain.clone().unwrap_or_else(|| ChainConfig {
            quad: fit_quad_default(),
            ..Default::default()
        });
        apply_chain_overrides(&mut chain, chain_args, seed)?;
        Ok((cfg, priors, chain))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Grid cells to run, each (lag-rate row, screening-count row), 1-based.
    #[serde(default = "full_grid")]
    pub grid: Vec<(usize, usize)>,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub n_subjects: Option<usize>,
    #[serde(default)]
    pub priors: Option<PriorConfig>,
    #[serde(default)]
    pub chain: Option<ChainConfig>,
}

fn full_grid() -> Vec<(usize, usize)> {
    vec![(1, 1), (2, 1), (3, 1), (1, 2), (2, 2), (3, 2)]
}

fn default_replicates() -> usize {
    100
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            schema_version: SCHEMA_VERSION,
            grid: full_grid(),
            scenarios: vec![],
            replicates: default_replicates(),
            n_subjects: None,
            priors: None,
            chain: None,
        }
    }
}

impl StudyConfig {
    pub fn resolve(
        &self,
        chain_args: &ChainArgs,
        seed: Option<u64>,
    ) -> Result<(Vec<Scenario>, usize, PriorConfig, ChainConfig)> {
        check_schema(self.schema_version)?;
        let mut scenarios = self.scenarios.clone();
        if scenarios.is_empty() {
            for &(lt, nls) in &self.grid {
                scenarios.push(Scenario::from_grid(lt, nls)?);
            }
        }
        if scenarios.is_empty() {
            return Err(Error::Config("study needs at least one scenario".into()));
        }
        if let Some(n) = self.n_subjects {
            for sc in &mut scenarios {
                sc.n_subjects = n;
            }
        }
        for sc in &scenarios {
            sc.validate()?;
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        let priors = self.priors.clone().unwrap_or_else(|| PriorConfig::defaults(2));
        priors.validate(2)?;
        let mut chain = self.chain.clone().unwrap_or_else(|| ChainConfig {
            quad: fit_quad_default(),
            ..Default::default()
        });
        apply_chain_overrides(&mut chain, chain_args, seed)?;
        Ok((scenarios, self.replicates, priors, chain))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

impl Default for CurvesConfig {
    fn default() -> Self {
        CurvesConfig {
            schema_version: SCHEMA_VERSION,
            grid: None,
        }
    }
}

impl CurvesConfig {
    /// Grid from the config, defaulting `t_max` to the fitted lag support.
    pub fn grid(&self, cfg: &ModelConfig) -> GridSpec {
        self.grid.clone().unwrap_or_else(|| {
            let mut g = GridSpec::default();
            if let Some(l) = cfg.timeline.max_lag_years {
                g.t_max = g.t_max.min(l);
                g.bivariate_max = g.bivariate_max.min(l);
            }
            g
        })
    }
}
