//! Command-line front end: simulate, fit, study, and curves.
//!
//! Exit codes: 0 success, 1 config/ingestion error, 2 numerical failure.

mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use curefrail::diagnostics::{gelman_rubin, geweke, summarize};
use curefrail::io;
use curefrail::model::{ModelConfig, ParameterState};
use curefrail::sampler::run_chains;
use curefrail::study::{replicate_study, write_study_csv};
use curefrail::trajectory::prepare_dataset;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{CurvesConfig, FitConfig, SimulateConfig, StudyConfig};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "curefrail", version, about = "Cure survival model for screening histories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap the worker thread pool.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Maximum lifetime screenings.
    #[arg(long, value_parser = clap::value_parser!(usize))]
    ell: Option<usize>,
    /// Lag support bound in years, or "none" for unrestricted.
    #[arg(long, value_name = "years|none")]
    truncate_lag: Option<String>,
    /// Maximum eligible age in years (eligibility starts at 50).
    #[arg(long)]
    max_age: Option<f64>,
}

#[derive(Args, Clone)]
struct ChainArgs {
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with its truth sidecar.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit the model to a dataset CSV.
    Fit {
        /// Dataset CSV path.
        dataset: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Replicated simulation study with a bias/RMSE report.
    Study {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Survival-curve grids from a completed fit directory.
    Curves {
        /// Directory produced by `fit`.
        fit_dir: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// 1 for configuration/ingestion problems, 2 for numerical failures.
fn exit_code_for(err: &curefrail::Error) -> u8 {
    use curefrail::Error::*;
    match err {
        Config(_) | CsvRow { .. } | InvalidRecord { .. } | Io(_) | Json(_) | Csv(_)
        | DimensionMismatch { .. } => 1,
        _ => 2,
    }
}

fn run() -> Result<(), (u8, String)> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap prints its own help/version output on stdout with success.
        if e.use_stderr() {
            (1u8, e.to_string())
        } else {
            print!("{e}");
            (0u8, String::new())
        }
    })?;
    let fail = |e: curefrail::Error| (exit_code_for(&e), e.to_string());

    match cli.command {
        Command::Simulate { common, model } => {
            setup(&common)?;
            let cfg: SimulateConfig = config::load_or_default(common.config.as_deref())?;
            let scenario = cfg.resolve(&model, common.seed).map_err(fail)?;
            let seed = common.seed.unwrap_or(cfg.seed);
            let start = std::time::Instant::now();
            let (records, truths) = curefrail::simulator::generate_dataset(&scenario, seed).map_err(fail)?;
            let out = &common.out;
            io::write_dataset(&out.join("dataset.csv"), &records).map_err(fail)?;
            let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
            io::write_truth(&out.join("dataset.truth.csv"), &ids, &truths).map_err(fail)?;
            io::write_json(&out.join("scenario.json"), &scenario).map_err(fail)?;
            RunManifest::new("simulate", &scenario, seed, out, start.elapsed())
                .write(out)
                .map_err(fail)?;
            eprintln!("wrote {} subjects to {}", records.len(), out.display());
            Ok(())
        }
        Command::Fit {
            dataset,
            common,
            model,
            chain,
        } => {
            setup(&common)?;
            let cfg: FitConfig = config::load_or_default(common.config.as_deref())?;
            let (model_cfg, priors, chain_cfg) = cfg.resolve(&model, &chain, common.seed).map_err(fail)?;
            let start = std::time::Instant::now();
            let records = io::read_dataset(&dataset).map_err(fail)?;
            let prepared = prepare_dataset(records, &model_cfg.timeline, model_cfg.ell).map_err(fail)?;
            let chains = run_chains(&prepared, &model_cfg, &priors, &chain_cfg).map_err(fail)?;
            let out = &common.out;
            for c in &chains {
                io::write_chain_csv(&out.join(format!("chain_{}.csv", c.chain_index)), c).map_err(fail)?;
                io::write_json(
                    &out.join(format!("chain_{}.json", c.chain_index)),
                    &serde_json::json!({
                        "chain_index": c.chain_index,
                        "seed": chain_cfg.seed,
                        "config": &chain_cfg,
                        "acceptance_rates": &c.acceptance_rates,
                    }),
                )
                .map_err(fail)?;
            }
            let summary = summarize(&chains).map_err(fail)?;
            io::write_summary_csv(&out.join("summary.csv"), &summary).map_err(fail)?;
            io::write_json(&out.join("summary.json"), &summary).map_err(fail)?;
            write_convergence_report(out, &chains).map_err(fail)?;
            io::write_json(
                &out.join("model.json"),
                &serde_json::json!({
                    "model": &model_cfg,
                    "priors": &priors,
                    "chain": &chain_cfg,
                }),
            )
            .map_err(fail)?;
            RunManifest::new("fit", &(&model_cfg, &priors, &chain_cfg), chain_cfg.seed, out, start.elapsed())
                .with_input(&dataset)
                .write(out)
                .map_err(fail)?;
            eprintln!(
                "fit complete: {} chains x {} draws in {}",
                chains.len(),
                chain_cfg.stored_draws(),
                out.display()
            );
            Ok(())
        }
        Command::Study { common, chain } => {
            setup(&common)?;
            let cfg: StudyConfig = config::load_or_default(common.config.as_deref())?;
            let (scenarios, replicates, priors, chain_cfg) = cfg.resolve(&chain, common.seed).map_err(fail)?;
            let start = std::time::Instant::now();
            let out = &common.out;
            // Stream partial results as each replicate lands.
            let stream_path = out.join("replicates.csv");
            let mut stream = std::io::BufWriter::new(
                std::fs::File::create(&stream_path).map_err(|e| fail(e.into()))?,
            );
            writeln!(stream, "scenario,replicate,status,{}", curefrail::study::STUDY_PARAMS.join(","))
                .map_err(|e| fail(e.into()))?;
            let report = replicate_study(&scenarios, replicates, &priors, &chain_cfg, &mut |r| {
                let tail = match &r.estimates {
                    Some(est) => format!(
                        "ok,{}",
                        est.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
                    ),
                    None => format!("failed ({}),", r.error.as_deref().unwrap_or("unknown")),
                };
                let _ = writeln!(stream, "{},{},{}", r.scenario, r.replicate, tail);
                let _ = stream.flush();
            })
            .map_err(fail)?;
            drop(stream);
            write_study_csv(&out.join("study.csv"), &report).map_err(fail)?;
            io::write_json(&out.join("study.json"), &report).map_err(fail)?;
            RunManifest::new("study", &(&scenarios, replicates, &chain_cfg), chain_cfg.seed, out, start.elapsed())
                .write(out)
                .map_err(fail)?;
            eprintln!("study complete: {}", out.display());
            Ok(())
        }
        Command::Curves { fit_dir, common } => {
            setup(&common)?;
            let cfg: CurvesConfig = config::load_or_default(common.config.as_deref())?;
            let start = std::time::Instant::now();
            let model_json: serde_json::Value = io::read_json(&fit_dir.join("model.json")).map_err(fail)?;
            let model_cfg: ModelConfig = serde_json::from_value(model_json["model"].clone())
                .map_err(|e| fail(e.into()))?;
            let grid = cfg.grid(&model_cfg);
            let chain = io::read_chain_csv(&fit_dir.join("chain_0.csv"), 0).map_err(fail)?;
            let summary = summarize(&[chain.clone()]).map_err(fail)?;
            let medians: Vec<f64> = summary.parameters.iter().map(|p| p.median).collect();
            let mut state = ParameterState::from_flat(&model_cfg, &medians).map_err(fail)?;
            let tsum: f64 = state.theta.iter().sum();
            state.theta.iter_mut().for_each(|t| *t /= tsum);
            let out = &common.out;
            let points = curefrail::diagnostics::survival_grids(&state, &model_cfg, &grid).map_err(fail)?;
            io::write_curves_csv(&out.join("curves.csv"), &points).map_err(fail)?;
            let times: Vec<f64> = (0..=10).map(|i| grid.t_max * i as f64 / 10.0).collect();
            let density = curefrail::diagnostics::draw_population_grid(&chain, &model_cfg, &times)
                .map_err(fail)?;
            io::write_curves_csv(&out.join("curve_densities.csv"), &density).map_err(fail)?;
            RunManifest::new("curves", &grid, 0, out, start.elapsed())
                .with_input(&fit_dir)
                .write(out)
                .map_err(fail)?;
            eprintln!("curves written to {}", out.display());
            Ok(())
        }
    }
}

fn setup(common: &CommonArgs) -> Result<(), (u8, String)> {
    if let Some(n) = common.threads {
        // Ignore the error if a pool already exists (tests call run() twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&common.out).map_err(|e| (1u8, format!("cannot create output dir: {e}")))
}

/// Geweke z per chain and R-hat across chains, one CSV row per statistic.
fn write_convergence_report(
    out: &Path,
    chains: &[curefrail::ChainOutput],
) -> curefrail::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("convergence.csv"))?);
    writeln!(f, "parameter,statistic,chain,value")?;
    let names = &chains[0].parameter_names;
    for name in names {
        for c in chains {
            let col = c.column(name).unwrap();
            let z = geweke(&col, 0.1, 0.5)
                .map(|v| v.to_string())
                .unwrap_or_else(|_| "nan".into());
            writeln!(f, "{name},geweke_z,{},{z}", c.chain_index)?;
        }
        if chains.len() >= 2 {
            let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.column(name).unwrap()).collect();
            let rhat = gelman_rubin(&cols)
                .map(|v| v.to_string())
                .unwrap_or_else(|_| "nan".into());
            writeln!(f, "{name},rhat,,{rhat}")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(code)
        }
    }
}
