//! File formats: dataset CSV, truth sidecar, chain CSV + JSON sidecar,
//! summary and curve-grid CSVs. All writers are deterministic byte-for-byte
//! for fixed inputs.

use crate::diagnostics::{CurvePoint, PosteriorSummary};
use crate::error::{Error, Result};
use crate::sampler::ChainOutput;
use crate::simulator::TrueTrajectory;
use crate::subject::SubjectRecord;
use serde::{de::DeserializeOwned, Serialize};
use std::io::Write;
use std::path::Path;

fn join_list(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| format!("{v:.6}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_list(s: &str, row: usize) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(';')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|e| Error::CsvRow {
                row,
                reason: format!("bad number {p:?}: {e}"),
            })
        })
        .collect()
}

pub const DATASET_HEADER: &str = "id,entry_time,exit_time,screenings,covariates_theta,covariates_lag";

pub fn write_dataset(path: &Path, records: &[SubjectRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{DATASET_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:.6},{:.6},{},{},{}",
            r.id,
            r.entry_time,
            r.exit_time,
            join_list(&r.observed_screenings),
            join_list(&r.covariates_theta),
            join_list(&r.covariates_lag),
        )?;
    }
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<SubjectRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let expect = ["id", "entry_time", "exit_time", "screenings", "covariates_theta", "covariates_lag"];
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).ne(expect.iter().copied()) {
        return Err(Error::CsvRow {
            row: 1,
            reason: format!("unexpected header {headers:?}"),
        });
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let rownum = i + 2; // 1-based, after header
        let row = row.map_err(|e| Error::CsvRow {
            row: rownum,
            reason: e.to_string(),
        })?;
        let field = |k: usize| row.get(k).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64> {
            field(k).parse::<f64>().map_err(|e| Error::CsvRow {
                row: rownum,
                reason: format!("column {}: {e}", expect[k]),
            })
        };
        records.push(SubjectRecord {
            id: field(0).to_string(),
            entry_time: num(1)?,
            exit_time: num(2)?,
            observed_screenings: parse_list(field(3), rownum)?,
            covariates_theta: parse_list(field(4), rownum)?,
            covariates_lag: parse_list(field(5), rownum)?,
        });
    }
    Ok(records)
}

pub fn write_truth(path: &Path, ids: &[String], truths: &[TrueTrajectory]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "id,m_drawn,m_realized,lag_times,screening_times")?;
    for (id, t) in ids.iter().zip(truths) {
        writeln!(
            out,
            "{},{},{},{},{}",
            id,
            t.m_drawn,
            t.m_realized,
            join_list(&t.lag_times),
            join_list(&t.screening_times),
        )?;
    }
    Ok(())
}

/// Chain draws as CSV with labeled columns; `{}` formatting round-trips f64.
pub fn write_chain_csv(path: &Path, chain: &ChainOutput) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", chain.parameter_names.join(","))?;
    for row in &chain.draws {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_chain_csv(path: &Path, chain_index: usize) -> Result<ChainOutput> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let parameter_names: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let mut draws = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::CsvRow {
            row: i + 2,
            reason: e.to_string(),
        })?;
        let vals = row
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|e| Error::CsvRow {
                    row: i + 2,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != parameter_names.len() {
            return Err(Error::CsvRow {
                row: i + 2,
                reason: "column count mismatch".into(),
            });
        }
        draws.push(vals);
    }
    Ok(ChainOutput {
        chain_index,
        parameter_names,
        draws,
        acceptance_rates: vec![],
        wall_seconds: 0.0,
    })
}

pub fn write_summary_csv(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "parameter,median,lower_2_5,upper_97_5,n_draws")?;
    for p in &summary.parameters {
        writeln!(out, "{},{},{},{},{}", p.name, p.median, p.lower, p.upper, p.n_draws)?;
    }
    Ok(())
}

pub fn write_curves_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "kind,time1,time2,value")?;
    for p in points {
        let t2 = p.time2.map(|t| format!("{t}")).unwrap_or_default();
        writeln!(out, "{},{},{},{}", p.kind, p.time1, t2, p.value)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let data = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&data)?)
}
