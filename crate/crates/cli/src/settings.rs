//! Command-line flags, the optional config file, and their merge into one
//! resolved [`Settings`].
//!
//! Config file grammar: one `key = value` per line, keys are the long flag
//! names (`-` and `_` interchangeable), `#` starts a comment, blank lines are
//! ignored, values may be wrapped in double quotes. Flags override the file.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use proxmc::linops::Augmentation;
use proxmc::samplers::config::{covariance_label, parse_covariance};
use proxmc::samplers::{Drift, SamplerConfig, Scheme};

use crate::error::CliError;

pub const DATA_ENV: &str = "PROXMC_DATA_DIR";
pub const DATA_FILE: &str = "jhu_confirmed_synthetic.csv";

#[derive(Debug, Parser)]
#[command(name = "proxmc", version, about = "Reproduction number and outlier estimation by proximal MCMC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Cut the count window and write window.csv
    Ingest,
    /// Compute the MAP estimate: map.csv, map_meta.json
    Map,
    /// Run the chains: trace_<k>.bin, path_<k>.bin, acceptance.csv, stepsizes.csv
    Sample,
    /// Bands and diagnostics from saved traces: bands.csv, diagnostics.csv
    Report,
    /// ingest, map, sample and report in sequence
    All,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Map => "map",
            Command::Sample => "sample",
            Command::Report => "report",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// JHU-format cumulative confirmed-cases CSV [default: $PROXMC_DATA_DIR/jhu_confirmed_synthetic.csv, else data/...]
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Country/Region to aggregate [default: United Kingdom]
    #[arg(long, global = true)]
    pub country: Option<String>,
    /// First day of the window, YYYY-MM-DD [default: 2021-12-06]
    #[arg(long, global = true)]
    pub start: Option<String>,
    /// Window length in days [default: 35]
    #[arg(long, global = true)]
    pub days: Option<usize>,
    /// Proposal drift: rw, pgdec or pgdual [default: pgdual]
    #[arg(long, global = true)]
    pub drift: Option<String>,
    /// Scheme: mh or gibbs [default: gibbs]
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Covariance augmentation: i or o [default: o]
    #[arg(long, global = true)]
    pub cov: Option<String>,
    /// Number of chains [default: 15]
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    /// Iterations per chain, burn-in included [default: 200000]
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    /// Burn-in iterations [default: 50000]
    #[arg(long, global = true)]
    pub burnin: Option<usize>,
    /// Keep every n-th post-burn-in state [default: 10]
    #[arg(long, global = true)]
    pub thin: Option<usize>,
    /// Stride of the stored R path, burn-in included [default: 100]
    #[arg(long, global = true)]
    pub path_stride: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Bands at level 1 - alpha [default: 0.05]
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Override the data-driven lambda_R
    #[arg(long, global = true)]
    pub lambda_r: Option<f64>,
    /// Override lambda_O [default: 0.05]
    #[arg(long, global = true)]
    pub lambda_o: Option<f64>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for the chains [default: available cores]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// key = value config file; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Fully resolved run configuration, written to run.json.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub data: PathBuf,
    pub country: String,
    pub start: NaiveDate,
    pub days: usize,
    pub drift: Drift,
    pub scheme: Scheme,
    pub cov: String,
    pub chains: usize,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub path_stride: usize,
    pub seed: u64,
    pub alpha: f64,
    pub lambda_r: Option<f64>,
    pub lambda_o: Option<f64>,
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub jobs: usize,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| usage(format!("invalid value '{value}' for {key}: {e}")))
}

/// Reads a config file into the same option set as the flags.
pub fn parse_config(text: &str) -> Result<Opts, CliError> {
    let mut o = Opts::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        let v = value.as_str();
        match key.as_str() {
            "data" => o.data = Some(PathBuf::from(v)),
            "country" => o.country = Some(value),
            "start" => o.start = Some(value),
            "days" => o.days = Some(parse_value(&key, v)?),
            "drift" => o.drift = Some(value),
            "scheme" => o.scheme = Some(value),
            "cov" => o.cov = Some(value),
            "chains" => o.chains = Some(parse_value(&key, v)?),
            "iters" => o.iters = Some(parse_value(&key, v)?),
            "burnin" => o.burnin = Some(parse_value(&key, v)?),
            "thin" => o.thin = Some(parse_value(&key, v)?),
            "path-stride" => o.path_stride = Some(parse_value(&key, v)?),
            "seed" => o.seed = Some(parse_value(&key, v)?),
            "alpha" => o.alpha = Some(parse_value(&key, v)?),
            "lambda-r" => o.lambda_r = Some(parse_value(&key, v)?),
            "lambda-o" => o.lambda_o = Some(parse_value(&key, v)?),
            "out-dir" => o.out_dir = Some(PathBuf::from(v)),
            "jobs" => o.jobs = Some(parse_value(&key, v)?),
            other => return Err(usage(format!("config line {}: unknown key '{other}'", n + 1))),
        }
    }
    Ok(o)
}

impl Opts {
    /// `self` where set, else `file`.
    pub fn or(self, file: Opts) -> Opts {
        Opts {
            data: self.data.or(file.data),
            country: self.country.or(file.country),
            start: self.start.or(file.start),
            days: self.days.or(file.days),
            drift: self.drift.or(file.drift),
            scheme: self.scheme.or(file.scheme),
            cov: self.cov.or(file.cov),
            chains: self.chains.or(file.chains),
            iters: self.iters.or(file.iters),
            burnin: self.burnin.or(file.burnin),
            thin: self.thin.or(file.thin),
            path_stride: self.path_stride.or(file.path_stride),
            seed: self.seed.or(file.seed),
            alpha: self.alpha.or(file.alpha),
            lambda_r: self.lambda_r.or(file.lambda_r),
            lambda_o: self.lambda_o.or(file.lambda_o),
            out_dir: self.out_dir.or(file.out_dir),
            jobs: self.jobs.or(file.jobs),
            config: self.config,
        }
    }
}

fn default_data(env: Option<&Path>) -> PathBuf {
    match env {
        Some(dir) => dir.join(DATA_FILE),
        None => PathBuf::from("data").join(DATA_FILE),
    }
}

impl Settings {
    /// Merges flags over the config file over defaults. `data_dir` stands in
    /// for `$PROXMC_DATA_DIR`.
    pub fn resolve(flags: Opts, data_dir: Option<&Path>) -> Result<Settings, CliError> {
        let opts = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Data(format!("config file {}: {e}", path.display())))?;
                flags.or(parse_config(&text)?)
            }
            None => flags,
        };
        let start = match &opts.start {
            Some(s) => NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| usage(format!("--start {s}: {e}")))?,
            None => NaiveDate::from_ymd_opt(2021, 12, 6).expect("valid date"),
        };
        let drift: Drift = opts.drift.as_deref().unwrap_or("pgdual").parse()?;
        let scheme: Scheme = opts.scheme.as_deref().unwrap_or("gibbs").parse()?;
        let cov = covariance_label(parse_covariance(opts.cov.as_deref().unwrap_or("o"))?).to_string();
        let settings = Settings {
            data: opts.data.unwrap_or_else(|| default_data(data_dir)),
            country: opts.country.unwrap_or_else(|| "United Kingdom".into()),
            start,
            days: opts.days.unwrap_or(35),
            drift,
            scheme,
            cov,
            chains: opts.chains.unwrap_or(15),
            iters: opts.iters.unwrap_or(200_000),
            burnin: opts.burnin.unwrap_or(50_000),
            thin: opts.thin.unwrap_or(10),
            path_stride: opts.path_stride.unwrap_or(100),
            seed: opts.seed.unwrap_or(0),
            alpha: opts.alpha.unwrap_or(0.05),
            lambda_r: opts.lambda_r,
            lambda_o: opts.lambda_o,
            out_dir: opts.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            jobs: opts
                .jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        };
        if settings.days < 3 {
            return Err(usage("--days must be at least 3"));
        }
        if settings.chains == 0 {
            return Err(usage("--chains must be positive"));
        }
        if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
            return Err(usage(format!("--alpha must lie in (0, 1), got {}", settings.alpha)));
        }
        settings.sampler_config().validate()?;
        Ok(settings)
    }

    pub fn covariance(&self) -> Augmentation {
        parse_covariance(&self.cov).expect("validated on resolve")
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let mut c = SamplerConfig::new(self.drift, self.scheme, self.covariance())
            .with_iterations(self.iters, self.burnin)
            .with_seed(self.seed)
            .with_thinning(self.thin);
        c.r_trace_stride = Some(self.path_stride);
        c
    }
}
