//! Parametric cure survival modelling for repeated screening histories with
//! left- and right-censored observation windows: positive-stable-frailty
//! joint lag-time laws, latent trajectory enumeration, a
//! Metropolis-within-Gibbs posterior sampler, a trajectory simulator, and
//! chain diagnostics.

pub mod diagnostics;
pub mod error;
pub mod frailty;
pub mod io;
pub mod model;
pub mod quad;
pub mod sampler;
pub mod simulator;
pub mod study;
pub mod subject;
pub mod trajectory;

pub use diagnostics::{GridSpec, PosteriorSummary};
pub use error::{Error, Result};
pub use frailty::{FrailtySurvival, LagDistribution, ALPHA_MIN};
pub use model::{ModelConfig, ParameterState};
pub use quad::{integrate_1d, QuadMethod, QuadratureSpec};
pub use sampler::{ChainConfig, ChainOutput, PriorConfig};
pub use simulator::{CensoringModel, Scenario, TrueTrajectory};
pub use subject::{EligibilityTimeline, SubjectRecord};
pub use trajectory::{PreparedSubject, TrajectoryCase};
