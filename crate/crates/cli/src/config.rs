//! JSON run configuration.
//!
//! Every field except `seed` has a default; [`RunConfig::load`] resolves
//! relative paths against the config file's directory and fills in the
//! priors so the materialised config written next to each output fully
//! describes the run.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use snmarg::inference::{ChainConfig, PhiTarget, Priors, RegimeKind, SmcConfig};
use snmarg::marg::{InitialLaw, MargParams, ScaleRegime};
use snmarg::obs::{CovariateDesign, CovariateModel, ModelSpec, DEFAULT_DRY_MONTHS, DEFAULT_FREQUENCIES};
use snmarg::{Grid, Rect};

use crate::error::{CliError, Result};

/// Study window in degrees; longitude is `x`, latitude is `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window { lon_min: -82.0, lon_max: -34.0, lat_min: -40.0, lat_max: 0.0 }
    }
}

impl Window {
    pub fn rect(&self) -> Result<Rect<f64>> {
        Rect::new(self.lon_min, self.lon_max, self.lat_min, self.lat_max)
            .map_err(|e| CliError::Config(format!("window: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nx: 10, ny: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Intercept,
    Trend,
    Dummy,
    Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateConfig {
    pub kind: CovariateKind,
    pub frequencies: Vec<f64>,
    pub dry_months: Vec<u32>,
}

impl Default for CovariateConfig {
    fn default() -> Self {
        CovariateConfig {
            kind: CovariateKind::Trend,
            frequencies: DEFAULT_FREQUENCIES.to_vec(),
            dry_months: DEFAULT_DRY_MONTHS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeConfig {
    Constant,
    TimeVarying,
    Monthly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    Stationary,
    Innovation,
}

/// Generating parameters used by `simulate` (and as a reference elsewhere).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Shape `α_j`, the same in every cell.
    pub alpha: f64,
    pub beta: f64,
    /// Scale values: one for a constant regime, `T` for time-varying, 12 for monthly.
    pub scales: Vec<f64>,
    pub phi: f64,
    pub eta: Vec<f64>,
    pub init: InitConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            alpha: 1.0,
            beta: 1.2,
            scales: vec![0.4],
            phi: 2.0,
            eta: vec![1.0, 0.03],
            init: InitConfig::Stationary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcSettings {
    pub particles: usize,
    pub block_size: usize,
}

impl Default for SmcSettings {
    fn default() -> Self {
        SmcSettings { particles: 16, block_size: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub adapt: bool,
    pub phi_target: PhiTarget,
    pub store_paths: bool,
    /// Independent chains, run in parallel and concatenated in order.
    pub chains: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            iterations: 20_000,
            burn_in: 10_000,
            thin: 10,
            adapt: true,
            phi_target: PhiTarget::Exact,
            store_paths: true,
            chains: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `t,x,y,z` point-series CSV as written by `simulate`.
    Points,
    /// MODIS-style detections with `longitude,latitude,acq_date,confidence`.
    Modis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub format: DataFormat,
    pub confidence_min: f64,
    pub confidence_max: f64,
    /// Inclusive date range; defaults to the months covered by `start` and `horizon`.
    pub date_from: Option<NaiveDate>,
    pub date_to: Option<NaiveDate>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            format: DataFormat::Points,
            confidence_min: 80.0,
            confidence_max: 100.0,
            date_from: None,
            date_to: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Output raster resolution; defaults to the model grid.
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    /// Time steps to export; all by default.
    pub times: Option<Vec<usize>>,
    pub lags: Vec<usize>,
    /// Reference locations of the pair-correlation maps; the window centre by default.
    pub centers: Option<Vec<[f64; 2]>>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig { nx: None, ny: None, times: None, lags: vec![0, 1, 2], centers: None }
    }
}

/// First month of the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    /// 1-based index of the month containing `date`, counting from `self`.
    pub fn index_of(&self, date: NaiveDate) -> i64 {
        use chrono::Datelike;
        (date.year() as i64 - self.year as i64) * 12 + date.month() as i64 - self.month as i64 + 1
    }

    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("validated month")
    }

    /// First day of the month `n` months later.
    pub fn plus_months(&self, n: usize) -> YearMonth {
        let m0 = self.year as i64 * 12 + self.month as i64 - 1 + n as i64;
        YearMonth { year: (m0 / 12) as i32, month: (m0 % 12) as u32 + 1 }
    }
}

impl TryFrom<String> for YearMonth {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        let (y, m) = s.split_once('-').ok_or_else(|| format!("expected YYYY-MM, got '{s}'"))?;
        let year: i32 = y.parse().map_err(|_| format!("bad year in '{s}'"))?;
        let month: u32 = m.parse().map_err(|_| format!("bad month in '{s}'"))?;
        if !(1..=12).contains(&month) {
            return Err(format!("month out of range in '{s}'"));
        }
        Ok(YearMonth { year, month })
    }
}

impl From<YearMonth> for String {
    fn from(v: YearMonth) -> String {
        format!("{:04}-{:02}", v.year, v.month)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub window: Window,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_start")]
    pub start: YearMonth,
    #[serde(default)]
    pub covariates: CovariateConfig,
    #[serde(default = "default_regime")]
    pub regime: RegimeConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub priors: Option<Priors>,
    #[serde(default)]
    pub smc: SmcSettings,
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub draws: Option<PathBuf>,
    #[serde(default)]
    pub held_out: Option<PathBuf>,
    #[serde(default = "default_forecast_horizon")]
    pub forecast_horizon: usize,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
}

fn default_horizon() -> usize {
    24
}

fn default_start() -> YearMonth {
    YearMonth { year: 2018, month: 2 }
}

fn default_regime() -> RegimeConfig {
    RegimeConfig::Constant
}

fn default_forecast_horizon() -> usize {
    6
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.materialize();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data, &mut cfg.draws, &mut cfg.held_out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn materialize(&mut self) {
        if self.priors.is_none() {
            let hier = self.regime != RegimeConfig::Constant;
            self.priors = Some(Priors::default_for(self.design().dim(), hier));
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        self.window.rect()?;
        if self.grid.nx == 0 || self.grid.ny == 0 {
            return bad("grid needs nx, ny >= 1");
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1");
        }
        if self.covariates.kind == CovariateKind::Harmonic && self.covariates.frequencies.len() != 4 {
            return bad("the harmonic design needs 4 frequencies");
        }
        self.design().validate()?;
        let want = match self.regime {
            RegimeConfig::Constant => 1,
            RegimeConfig::TimeVarying => self.horizon,
            RegimeConfig::Monthly => 12,
        };
        if self.model.scales.len() != want && !(self.model.scales.len() == 1 && want > 1) {
            return bad("model.scales must have 1, T or 12 entries to match the regime");
        }
        if self.model.eta.len() != self.design().dim() {
            return bad("model.eta does not match the covariate design");
        }
        if self.chain.thin == 0 || self.chain.burn_in > self.chain.iterations || self.chain.chains == 0 {
            return bad("chain needs thin >= 1, chains >= 1 and burn_in <= iterations");
        }
        if self.smc.particles < 2 || self.smc.block_size == 0 {
            return bad("smc needs particles >= 2 and block_size >= 1");
        }
        if !(0.0..=100.0).contains(&self.ingest.confidence_min)
            || !(0.0..=100.0).contains(&self.ingest.confidence_max)
            || self.ingest.confidence_min > self.ingest.confidence_max
        {
            return bad("confidence bounds must satisfy 0 <= min <= max <= 100");
        }
        self.priors().validate()?;
        Ok(())
    }

    pub fn priors(&self) -> Priors {
        self.priors.clone().expect("materialized on load")
    }

    pub fn design(&self) -> CovariateDesign<f64> {
        match self.covariates.kind {
            CovariateKind::Intercept => CovariateDesign::Intercept,
            CovariateKind::Trend => CovariateDesign::Trend,
            CovariateKind::Dummy => CovariateDesign::Dummy {
                dry_months: self.covariates.dry_months.clone(),
                start_month: self.start.month,
            },
            CovariateKind::Harmonic => CovariateDesign::Harmonic { frequencies: self.covariates.frequencies.clone() },
        }
    }

    pub fn grid(&self, alpha: f64) -> Result<Grid<f64>> {
        Ok(Grid::uniform(self.window.rect()?, self.grid.nx, self.grid.ny, alpha)?)
    }

    /// Scale regime built from `values` (one value is broadcast).
    pub fn regime_from(&self, values: &[f64]) -> ScaleRegime<f64> {
        self.regime_over(values, self.horizon)
    }

    fn regime_over(&self, values: &[f64], horizon: usize) -> ScaleRegime<f64> {
        let fill = |n: usize| if values.len() == 1 { vec![values[0]; n] } else { values.to_vec() };
        match self.regime {
            RegimeConfig::Constant => ScaleRegime::Constant { c: values[0] },
            RegimeConfig::TimeVarying => ScaleRegime::TimeVarying { c: fill(horizon) },
            RegimeConfig::Monthly => {
                let mut xi = [0.0; 12];
                xi.copy_from_slice(&fill(12));
                ScaleRegime::Monthly { xi, start_month: self.start.month }
            }
        }
    }

    pub fn regime_kind(&self) -> RegimeKind {
        match self.regime {
            RegimeConfig::Constant => RegimeKind::Constant,
            RegimeConfig::TimeVarying => RegimeKind::TimeVarying,
            RegimeConfig::Monthly => RegimeKind::Monthly { start_month: self.start.month },
        }
    }

    /// Generating model from `model`.
    pub fn model_spec(&self) -> Result<ModelSpec<f64>> {
        self.model_spec_over(self.horizon)
    }

    /// Longest horizon the generating model can be simulated over: `T` plus
    /// the forecast horizon, unless explicit per-step scales stop at `T`.
    pub fn simulation_horizon(&self) -> usize {
        if self.regime == RegimeConfig::TimeVarying && self.model.scales.len() > 1 {
            self.horizon
        } else {
            self.horizon + self.forecast_horizon
        }
    }

    /// Generating model over `horizon` steps.
    pub fn model_spec_over(&self, horizon: usize) -> Result<ModelSpec<f64>> {
        let m = &self.model;
        let grid = self.grid(m.alpha)?;
        let latent = MargParams::new(grid, m.beta, self.regime_over(&m.scales, horizon), horizon)?;
        let covariates = CovariateModel::new(self.design(), m.eta.clone(), horizon)?;
        let init = match m.init {
            InitConfig::Stationary => InitialLaw::Stationary,
            InitConfig::Innovation => InitialLaw::Innovation,
        };
        let spec = ModelSpec { latent, phi: m.phi, covariates, init };
        spec.validate()?;
        Ok(spec)
    }

    pub fn chain_config(&self) -> ChainConfig {
        let n = self.grid.nx * self.grid.ny;
        let mut c = ChainConfig::new(self.chain.iterations, n);
        c.burn_in = self.chain.burn_in;
        c.thin = self.chain.thin;
        c.adapt = self.chain.adapt;
        c.phi_target = self.chain.phi_target;
        c.store_paths = self.chain.store_paths;
        c.smc = SmcConfig::new(self.smc.particles, n, self.smc.block_size);
        c
    }

    pub fn require_data(&self) -> Result<&Path> {
        self.data.as_deref().ok_or_else(|| CliError::Usage("config has no `data` path".into()))
    }

    pub fn require_draws(&self) -> Result<&Path> {
        self.draws.as_deref().ok_or_else(|| CliError::Usage("config has no `draws` path".into()))
    }
}
