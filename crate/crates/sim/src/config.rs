//! Experiment configuration: defaults, a flat key/value config-file format
//! and validation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use ramp_core::channel::ChannelParams;

/// Allocation scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Message passing.
    Mp,
    /// BABS + rate-craving greedy + bit loading.
    Brcg,
    /// Fixed-format balanced assignment.
    Lp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mp => "mp",
            Algorithm::Brcg => "brcg",
            Algorithm::Lp => "lp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Algorithm> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mp" => Ok(Algorithm::Mp),
            "brcg" => Ok(Algorithm::Brcg),
            "lp" => Ok(Algorithm::Lp),
            other => bail!("unknown algorithm {other:?} (expected mp, brcg or lp)"),
        }
    }
}

/// Output file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<OutputFormat> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => bail!("unknown output format {other:?} (expected csv or jsonl)"),
        }
    }
}

/// Everything a run needs; mirrors the flat config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub channel: ChannelParams,
    /// User counts N to sweep.
    pub users: Vec<usize>,
    /// Candidate set size P per entry of `users` (same length).
    pub candidates: Vec<usize>,
    /// Number of nonzero formats Q.
    pub num_formats: usize,
    /// Spectral-efficiency step η̃ in b/s/Hz.
    pub eta_step: f64,
    /// Average spectral efficiency η_avg used for demands and the fixed
    /// format of the LP baseline.
    pub eta_avg: f64,
    pub trials: usize,
    pub inner_iterations: usize,
    pub max_outer_cycles: usize,
    pub damping: f64,
    pub normalization: bool,
    /// Power caps swept by the outage experiment; empty selects an
    /// automatic percentile grid from an uncapped calibration pass.
    pub pmax_sweep: Vec<f64>,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub out: String,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            channel: ChannelParams::default(),
            users: vec![2, 4, 8, 16],
            candidates: vec![4, 8, 12, 24],
            num_formats: 4,
            eta_step: 1.0,
            eta_avg: 1.0,
            trials: 500,
            inner_iterations: 80,
            max_outer_cycles: 10,
            damping: 0.2,
            normalization: true,
            pmax_sweep: Vec::new(),
            seed: 1,
            algorithms: vec![Algorithm::Mp, Algorithm::Brcg, Algorithm::Lp],
            out: "results.csv".into(),
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        if self.users.is_empty() || self.users.len() != self.candidates.len() {
            bail!(
                "users ({}) and candidates ({}) must be nonempty lists of equal length",
                self.users.len(),
                self.candidates.len()
            );
        }
        if self.users.contains(&0) || self.candidates.contains(&0) {
            bail!("user counts and candidate sizes must be >= 1");
        }
        if self.trials == 0 {
            bail!("trials must be >= 1");
        }
        if self.num_formats == 0 {
            bail!("num_formats must be >= 1");
        }
        if self.inner_iterations == 0 || self.max_outer_cycles == 0 {
            bail!("inner_iterations and max_outer_cycles must be >= 1");
        }
        if !(0.0..1.0).contains(&self.damping) {
            bail!("damping must lie in [0, 1)");
        }
        if !(self.eta_step > 0.0 && self.eta_step.is_finite()) {
            bail!("eta_step must be positive");
        }
        if !(self.eta_avg > 0.0 && self.eta_avg.is_finite()) {
            bail!("eta_avg must be positive");
        }
        if self.pmax_sweep.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            bail!("pmax_sweep entries must be finite and positive");
        }
        if self.algorithms.is_empty() {
            bail!("at least one algorithm must be selected");
        }
        Ok(())
    }

    /// Parses the flat `key = value` config file; unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected `key = value`", path.display(), lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value)
                .with_context(|| format!("{}:{}: key {key:?}", path.display(), lineno + 1))?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(value: &str) -> Result<T>
        where
            T::Err: std::error::Error + Send + Sync + 'static,
        {
            value.parse::<T>().with_context(|| format!("cannot parse {value:?}"))
        }
        fn list<T: FromStr>(value: &str) -> Result<Vec<T>>
        where
            T::Err: std::error::Error + Send + Sync + 'static,
        {
            if value.is_empty() {
                return Ok(Vec::new());
            }
            value.split(',').map(|v| num::<T>(v.trim())).collect()
        }
        match key {
            "cell_radius_m" => self.channel.cell_radius_m = num(value)?,
            "bandwidth_hz" => self.channel.bandwidth_hz = num(value)?,
            "num_subchannels" => self.channel.num_subchannels = num(value)?,
            "path_loss_exponent" => self.channel.path_loss_exponent = num(value)?,
            "delay_spread_s" => self.channel.delay_spread_s = num(value)?,
            "sample_time_s" => self.channel.sample_time_s = num(value)?,
            "noise_psd" => self.channel.noise_psd = num(value)?,
            "min_user_distance_m" => self.channel.min_user_distance_m = num(value)?,
            "users" => self.users = list(value)?,
            "candidates" => self.candidates = list(value)?,
            "num_formats" => self.num_formats = num(value)?,
            "eta_step" => self.eta_step = num(value)?,
            "eta_avg" => self.eta_avg = num(value)?,
            "trials" => self.trials = num(value)?,
            "inner_iterations" => self.inner_iterations = num(value)?,
            "max_outer_cycles" => self.max_outer_cycles = num(value)?,
            "damping" => self.damping = num(value)?,
            "normalization" => self.normalization = num(value)?,
            "pmax_sweep" => self.pmax_sweep = list(value)?,
            "seed" => self.seed = num(value)?,
            "algorithms" => {
                self.algorithms = value
                    .split(',')
                    .map(|v| v.trim().parse::<Algorithm>())
                    .collect::<Result<Vec<_>>>()?
            }
            "out" => self.out = value.to_string(),
            "format" => self.format = value.parse()?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }
}
