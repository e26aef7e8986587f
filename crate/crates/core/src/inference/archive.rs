//! Newline-delimited JSON archive of posterior draws and its summary.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::gibbs::Draw;
use crate::stats;

/// Append one draw as a JSON line.
pub fn write_draw<W: Write>(draw: &Draw, mut out: W) -> Result<()> {
    serde_json::to_writer(&mut out, draw)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_draws<W: Write>(draws: &[Draw], mut out: W) -> Result<()> {
    for d in draws {
        write_draw(d, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

/// Read every draw; blank lines are skipped.
pub fn read_draws<R: BufRead>(input: R) -> Result<Vec<Draw>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Draw = serde_json::from_str(&line).map_err(|e| Error::Format(format!("draw on line {}: {e}", n + 1)))?;
        out.push(d);
    }
    Ok(out)
}

/// Marginal posterior summary of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub draws: usize,
    pub params: Vec<ParamSummary>,
    pub acceptance: Vec<(String, f64)>,
}

impl ChainSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Column `name` of the draws, in order.
pub fn trace(draws: &[Draw], name: &str) -> Option<Vec<f64>> {
    draws
        .iter()
        .map(|d| d.named_values().into_iter().find(|(n, _)| n == name).map(|(_, v)| v))
        .collect()
}

pub fn summarize(draws: &[Draw], acceptance: Vec<(String, f64)>) -> Result<ChainSummary> {
    let first = draws.first().ok_or(Error::NoDraws)?;
    let names: Vec<String> = first.named_values().into_iter().map(|(n, _)| n).collect();
    let mut params = Vec::with_capacity(names.len());
    for name in names {
        let xs = trace(draws, &name).ok_or_else(|| Error::Format(format!("parameter {name} missing from some draws")))?;
        let (mean, var) = stats::mean_var(&xs);
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        params.push(ParamSummary {
            mean,
            sd: var.sqrt(),
            q025: stats::quantile_sorted(&sorted, 0.025),
            q50: stats::quantile_sorted(&sorted, 0.5),
            q975: stats::quantile_sorted(&sorted, 0.975),
            ess: stats::ess(&xs),
            name,
        });
    }
    Ok(ChainSummary { draws: draws.len(), params, acceptance })
}
