//! The batch commands. Each reads a [`RunConfig`], writes its files into
//! `Options::out` and returns the paths it wrote.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use snmarg::analytics::{cv_field, fit_diagnostics, intensity_d1, iqr_norm, pair_correlation};
use snmarg::inference::state::kappa_from;
use snmarg::inference::{
    forecast, read_draws, run_chain, summarize, write_draws, ChainOutput, ChainState, ChainSummary, Draw,
    InferenceData,
};
use snmarg::io::{read_point_series, write_latent_path, write_point_series};
use snmarg::obs::simulate_series;
use snmarg::{Grid, ModelSpec, PointSeries, SeedKey};

use crate::config::{DataFormat, RunConfig};
use crate::error::{CliError, Result};
use crate::ingest::{ingest_events, IngestFilter, IngestReport};
use crate::output::{write_atomic, write_csv, write_json, GRID_HEADER};

pub const LATENT_FILE: &str = "latent_path.csv";
pub const POINTS_FILE: &str = "points.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const DRAWS_FILE: &str = "draws.ndjson";
pub const SUMMARY_FILE: &str = "summary.json";
pub const INTENSITY_FILE: &str = "intensity.csv";
pub const D1_FILE: &str = "d1.csv";
pub const PAIR_FILE: &str = "pair_correlation.csv";
pub const FORECAST_CSV: &str = "forecast.csv";
pub const FORECAST_JSON: &str = "forecast.json";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const DIAGNOSTICS_JSON: &str = "diagnostics.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Analyze,
    Forecast,
    Diagnose,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Options {
    pub out: PathBuf,
    /// Worker threads for parallel chains; `None` lets rayon decide.
    pub workers: Option<usize>,
}

pub fn run(command: Command, cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    match command {
        Command::Simulate => simulate(cfg, opts),
        Command::Fit => fit(cfg, opts),
        Command::Analyze => analyze(cfg, opts),
        Command::Forecast => forecast_cmd(cfg, opts),
        Command::Diagnose => diagnose(cfg, opts),
    }
}

// ---------------------------------------------------------------------------
// Inputs

/// Observations split at `T`: the fitting data and the counts beyond it.
pub struct Observed {
    pub data: InferenceData,
    pub tail_counts: Vec<usize>,
    pub report: Option<IngestReport>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

/// Read events covering at least `T` steps and at most `T + extra`.
fn read_series(cfg: &RunConfig, path: &Path, extra: usize) -> Result<(PointSeries<f64>, Option<IngestReport>)> {
    match cfg.ingest.format {
        DataFormat::Points => {
            let s = read_point_series(BufReader::new(open(path)?), None)?;
            Ok((s, None))
        }
        DataFormat::Modis => {
            let filter = IngestFilter {
                window: cfg.window.rect()?,
                confidence: (cfg.ingest.confidence_min, cfg.ingest.confidence_max),
                start: cfg.start,
                horizon: cfg.horizon + extra,
                date_from: cfg.ingest.date_from,
                date_to: cfg.ingest.date_to,
            };
            let (s, r) = ingest_events(BufReader::new(open(path)?), &filter)?;
            Ok((s, Some(r)))
        }
    }
}

pub fn load_observed(cfg: &RunConfig, extra: usize) -> Result<Observed> {
    let (series, report) = read_series(cfg, cfg.require_data()?, extra)?;
    if series.horizon() < cfg.horizon {
        return Err(CliError::Schema(format!(
            "data cover {} steps but the config needs T = {}",
            series.horizon(),
            cfg.horizon
        )));
    }
    let steps = series.steps();
    let mut train = PointSeries::from_steps(steps[..cfg.horizon].to_vec());
    train.clear_allocations();
    let tail_counts = steps[cfg.horizon..].iter().take(extra).map(Vec::len).collect();
    let data = InferenceData::new(cfg.grid(1.0)?, train, cfg.design()).map_err(|e| CliError::Schema(e.to_string()))?;
    Ok(Observed { data, tail_counts, report })
}

/// Counts for `T+1..=T+h` from the held-out file, else from the data tail.
fn held_out_counts(cfg: &RunConfig, obs: &Observed) -> Result<Option<Vec<usize>>> {
    let h = cfg.forecast_horizon;
    if let Some(p) = &cfg.held_out {
        let (s, _) = read_series(cfg, p, h)?;
        let counts: Vec<usize> = s.steps().iter().skip(cfg.horizon).take(h).map(Vec::len).collect();
        return Ok((!counts.is_empty()).then_some(counts));
    }
    Ok((!obs.tail_counts.is_empty()).then(|| obs.tail_counts.clone()))
}

pub fn load_draws(path: &Path) -> Result<Vec<Draw>> {
    let draws = read_draws(BufReader::new(open(path)?))?;
    if draws.is_empty() {
        return Err(CliError::Usage(format!("{} holds no draws", path.display())));
    }
    Ok(draws)
}

fn out_path(opts: &Options, name: &str) -> PathBuf {
    opts.out.join(name)
}

// ---------------------------------------------------------------------------
// simulate

/// Simulate the configured model over `T` plus the forecast horizon and
/// write the latent path, the points and a config that fits them.
pub fn simulate(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    let spec = cfg.model_spec_over(cfg.simulation_horizon())?;
    let (path, series) = simulate_series(&spec, SeedKey::new(cfg.seed).at("simulate", 0))?;

    let latent = out_path(opts, LATENT_FILE);
    let mut buf = Vec::new();
    write_latent_path(&path, &mut buf)?;
    write_atomic(&latent, &buf)?;

    let points = out_path(opts, POINTS_FILE);
    let mut buf = Vec::new();
    write_point_series(&series, &mut buf)?;
    write_atomic(&points, &buf)?;

    let mut next = cfg.clone();
    next.data = Some(POINTS_FILE.into());
    next.draws = Some(DRAWS_FILE.into());
    next.held_out = None;
    next.ingest.format = DataFormat::Points;
    let config = out_path(opts, CONFIG_FILE);
    write_json(&config, &next)?;
    Ok(vec![latent, points, config])
}

// ---------------------------------------------------------------------------
// fit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: usize,
    pub draws: usize,
    pub acceptance: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub config: RunConfig,
    pub ingest: Option<IngestReport>,
    pub chains: Vec<ChainReport>,
    pub posterior: ChainSummary,
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn mean_acceptance(outputs: &[ChainOutput]) -> Vec<(String, f64)> {
    let mut acc = outputs[0].acceptance.clone();
    for o in &outputs[1..] {
        for (a, (_, v)) in acc.iter_mut().zip(&o.acceptance) {
            a.1 += v;
        }
    }
    acc.iter_mut().for_each(|a| a.1 /= outputs.len() as f64);
    acc
}

/// Run `chain.chains` independent chains in parallel. Chain `c` draws from
/// its own stream, so the archive does not depend on the worker count.
pub fn fit(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    let obs = load_observed(cfg, 0)?;
    let priors = cfg.priors();
    let chain = cfg.chain_config();
    let root = SeedKey::new(cfg.seed);
    let data = &obs.data;
    let one = |c: usize| -> Result<ChainOutput> {
        let init = ChainState::initialize(data, &priors, cfg.regime_from(&[1.0]))?;
        let mut rng = root.at("chain", c as u64).rng();
        Ok(run_chain(data, &priors, &chain, init, &mut rng, |_| Ok(()))?)
    };
    let outputs = with_pool(opts.workers, || {
        (0..cfg.chain.chains).into_par_iter().map(one).collect::<Result<Vec<_>>>()
    })??;

    let mut draws = Vec::new();
    let mut reports = Vec::new();
    for (c, o) in outputs.iter().enumerate() {
        reports.push(ChainReport { chain: c, draws: o.draws.len(), acceptance: o.acceptance.clone() });
        draws.extend(o.draws.iter().cloned().map(|mut d| {
            d.chain = c;
            d
        }));
    }
    if draws.is_empty() {
        return Err(CliError::Config("the chain keeps no draws; check iterations, burn_in and thin".into()));
    }
    let posterior = summarize(&draws, mean_acceptance(&outputs))?;

    let archive = out_path(opts, DRAWS_FILE);
    let mut buf = Vec::new();
    write_draws(&draws, &mut buf)?;
    write_atomic(&archive, &buf)?;
    let summary = out_path(opts, SUMMARY_FILE);
    write_json(&summary, &FitSummary { config: cfg.clone(), ingest: obs.report, chains: reports, posterior })?;
    Ok(vec![archive, summary])
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityRow {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub mean: f64,
    pub cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D1Row {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub d1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub t: usize,
    pub h: usize,
    pub cx: f64,
    pub cy: f64,
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

/// Raster points: cell centres of an `nx × ny` partition of the window.
pub fn raster(cfg: &RunConfig) -> Result<Vec<[f64; 2]>> {
    let nx = cfg.analyze.nx.unwrap_or(cfg.grid.nx);
    let ny = cfg.analyze.ny.unwrap_or(cfg.grid.ny);
    Ok(Grid::uniform(cfg.window.rect()?, nx, ny, 1.0)?.atoms().to_vec())
}

fn analysis_times(cfg: &RunConfig) -> Result<Vec<usize>> {
    let times = cfg.analyze.times.clone().unwrap_or_else(|| (1..=cfg.horizon).collect());
    if times.iter().any(|&t| t == 0 || t > cfg.horizon) {
        return Err(CliError::Config(format!("analyze.times must lie in 1..={}", cfg.horizon)));
    }
    Ok(times)
}

/// Model used for the closed-form grids: posterior means of the draws, or
/// the configured model when there are none.
pub fn plugin_spec(cfg: &RunConfig, draws: Option<&[Draw]>) -> Result<ModelSpec<f64>> {
    let Some(draws) = draws else {
        return cfg.model_spec();
    };
    let n = draws.len() as f64;
    let mean_of = |f: &dyn Fn(&Draw) -> Vec<f64>| -> Vec<f64> {
        let mut acc = f(&draws[0]);
        for d in &draws[1..] {
            acc.iter_mut().zip(f(d)).for_each(|(a, v)| *a += v);
        }
        acc.into_iter().map(|a| a / n).collect()
    };
    let alpha = mean_of(&|d| d.params.alpha.clone());
    let mut m = cfg.clone();
    m.model.beta = mean_of(&|d| vec![d.params.beta])[0];
    m.model.scales = mean_of(&|d| d.params.scales.values());
    m.model.phi = mean_of(&|d| vec![d.params.phi])[0];
    m.model.eta = mean_of(&|d| d.params.eta.clone());
    let mut spec = m.model_spec()?;
    spec.latent.grid = spec.latent.grid.clone().with_masses(alpha)?;
    spec.validate()?;
    Ok(spec)
}

/// `Λ_t(y)` of one draw at every raster point; the Gaussian kernel factors
/// over grid columns and rows.
fn draw_intensity(draw: &Draw, t: usize, cfg: &RunConfig, grid: &Grid<f64>, points: &[[f64; 2]]) -> Result<Vec<f64>> {
    let path = draw.path.as_ref().expect("checked by caller");
    let row = path.row(t);
    let (nx, ny) = (grid.nx(), grid.ny());
    let atoms = grid.atoms();
    let phi = draw.params.phi;
    let inv2v = 0.5 / (phi * phi);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * phi * phi);
    let kappa = kappa_from(&draw.params.eta, &cfg.design().row(t)?);
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let ex: Vec<f64> = (0..nx).map(|ix| (-(p[0] - atoms[ix][0]).powi(2) * inv2v).exp()).collect();
        let mut s = 0.0;
        for iy in 0..ny {
            let ey = (-(p[1] - atoms[iy * nx][1]).powi(2) * inv2v).exp();
            s += ey * row[iy * nx..(iy + 1) * nx].iter().zip(&ex).map(|(w, k)| w * k).sum::<f64>();
        }
        out.push(kappa * norm * s);
    }
    Ok(out)
}

/// Write the posterior intensity field (when the archive carries latent
/// paths), the closed-form `D¹` grid and the pair-correlation grids.
pub fn analyze(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    let draws = cfg.draws.as_deref().map(load_draws).transpose()?;
    let points = raster(cfg)?;
    let times = analysis_times(cfg)?;
    let mut written = Vec::new();

    if let Some(draws) = &draws {
        let with_path: Vec<&Draw> = draws.iter().filter(|d| d.path.is_some()).collect();
        if with_path.is_empty() {
            return Err(CliError::Usage("the draw archive has no latent paths; fit with chain.store_paths".into()));
        }
        if with_path.iter().any(|d| d.path.as_ref().unwrap().horizon() != cfg.horizon) {
            return Err(CliError::Schema("latent paths in the archive do not cover T steps".into()));
        }
        let grid = cfg.grid(1.0)?;
        let mut rows = Vec::with_capacity(times.len() * points.len());
        for &t in &times {
            let fields = with_path
                .iter()
                .map(|d| draw_intensity(d, t, cfg, &grid, &points))
                .collect::<Result<Vec<_>>>()?;
            for (k, p) in points.iter().enumerate() {
                let vals: Vec<f64> = fields.iter().map(|f| f[k]).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                rows.push(IntensityRow { t, x: p[0], y: p[1], mean, cv: cv_field(&vals)? });
            }
        }
        let f = out_path(opts, INTENSITY_FILE);
        write_csv(&f, &[GRID_HEADER, "# mean and cv of the posterior intensity density"], rows)?;
        written.push(f);
    }

    let spec = plugin_spec(cfg, draws.as_deref())?;
    let mut d1 = Vec::with_capacity(times.len() * points.len());
    for &t in &times {
        for p in &points {
            d1.push(D1Row { t, x: p[0], y: p[1], d1: intensity_d1(*p, t, &spec)? });
        }
    }
    let f = out_path(opts, D1_FILE);
    write_csv(&f, &[GRID_HEADER, "# first-order intensity at the plug-in parameters"], d1)?;
    written.push(f);

    let centers = cfg.analyze.centers.clone().unwrap_or_else(|| vec![cfg.window.rect().expect("validated").center()]);
    let mut pairs = Vec::new();
    for &t in &times {
        for &h in &cfg.analyze.lags {
            if t + h > cfg.horizon {
                continue;
            }
            for c in &centers {
                for p in &points {
                    let r = pair_correlation(*c, *p, t, h, &spec)?;
                    pairs.push(PairRow { t, h, cx: c[0], cy: c[1], x: p[0], y: p[1], r });
                }
            }
        }
    }
    let f = out_path(opts, PAIR_FILE);
    write_csv(&f, &[GRID_HEADER, "# cross pair correlation between the centre at t and (x, y) at t + h"], pairs)?;
    written.push(f);
    Ok(written)
}

// ---------------------------------------------------------------------------
// forecast

/// Posterior predictive forecast over `forecast_horizon` steps, scored
/// against held-out counts when the data or `held_out` reach past `T`.
pub fn forecast_cmd(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    let obs = load_observed(cfg, cfg.forecast_horizon)?;
    let draws = load_draws(cfg.require_draws()?)?;
    let held = held_out_counts(cfg, &obs)?;
    let mut rng = SeedKey::new(cfg.seed).at("forecast", 0).rng();
    let fc = forecast(&draws, &obs.data, &cfg.priors(), cfg.forecast_horizon, held.as_deref(), &mut rng)?;
    let csv = out_path(opts, FORECAST_CSV);
    write_csv(&csv, &[], &fc.steps)?;
    let json = out_path(opts, FORECAST_JSON);
    write_json(&json, &fc)?;
    Ok(vec![csv, json])
}

// ---------------------------------------------------------------------------
// diagnose

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: usize,
    pub observed: usize,
    pub fitted_mean: f64,
    pub fitted_q025: f64,
    pub fitted_q975: f64,
    pub iqr_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub draws: usize,
    pub mse: f64,
    pub mae: f64,
    /// Mean of the per-step `IQR_norm` over steps where it is defined.
    pub iqr_norm: Option<f64>,
}

/// In-sample fit of the posterior total intensity `Λ_t(𝕐)` to the counts.
pub fn diagnose(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    let obs = load_observed(cfg, 0)?;
    let draws = load_draws(cfg.require_draws()?)?;
    let (rows, diag) = diagnostics(&obs.data.series.counts(), &draws)?;
    let csv = out_path(opts, DIAGNOSTICS_CSV);
    write_csv(&csv, &[], rows)?;
    let json = out_path(opts, DIAGNOSTICS_JSON);
    write_json(&json, &diag)?;
    Ok(vec![csv, json])
}

/// Per-step table and summary of fitted totals against `counts`.
pub fn diagnostics(counts: &[usize], draws: &[Draw]) -> Result<(Vec<DiagnosticRow>, Diagnostics)> {
    if draws.iter().any(|d| d.fitted_totals.len() != counts.len()) {
        return Err(CliError::Schema("fitted totals in the archive do not cover T steps".into()));
    }
    let mut rows = Vec::with_capacity(counts.len());
    for (k, &n) in counts.iter().enumerate() {
        let mut v: Vec<f64> = draws.iter().map(|d| d.fitted_totals[k]).collect();
        let iqr = iqr_norm(&v).ok();
        v.sort_by(f64::total_cmp);
        rows.push(DiagnosticRow {
            t: k + 1,
            observed: n,
            fitted_mean: v.iter().sum::<f64>() / v.len() as f64,
            fitted_q025: snmarg::stats::quantile_sorted(&v, 0.025),
            fitted_q975: snmarg::stats::quantile_sorted(&v, 0.975),
            iqr_norm: iqr,
        });
    }
    let obs: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    let fitted: Vec<f64> = rows.iter().map(|r| r.fitted_mean).collect();
    let (mse, mae) = fit_diagnostics(&obs, &fitted)?;
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.iqr_norm).collect();
    let iqr = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok((rows, Diagnostics { draws: draws.len(), mse, mae, iqr_norm: iqr }))
}
