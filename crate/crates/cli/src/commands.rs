//! The subcommands and the files they write.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use proxmc::diagnostics::{distance_to_map, gelman_rubin, mean_abs_acf_at};
use proxmc::estimators::{credibility_band, denoised_band, Target};
use proxmc::ingest::{lambda_defaults, parse_jhu_csv, to_daily, window, write_window_csv};
use proxmc::linops::SecondDiffOp;
use proxmc::map_solver::{map_uniqueness_check, solve_map, MapEstimate, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use proxmc::samplers::{run_chains, ChainTrace};
use proxmc::{CountSeries, EpiModel, Hyperparams, SerialInterval, Theta};

use crate::error::CliError;
use crate::settings::{Command, Settings};
use crate::trace_file::{read_path, read_trace, write_path, write_trace, PathTrace};

const UNIQUENESS_TOL: f64 = 1e-6;
/// Largest autocorrelation lag reported, in iterations.
const MAX_ACF_LAG: usize = 100_000;
const GR_CHECKPOINTS: usize = 50;

pub fn run(command: Command, s: &Settings) -> Result<(), CliError> {
    fs::create_dir_all(&s.out_dir)?;
    match command {
        Command::Ingest => {
            cmd_ingest(s)?;
        }
        Command::Map => {
            cmd_map(s)?;
        }
        Command::Sample => {
            cmd_sample(s)?;
        }
        Command::Report => cmd_report(s)?,
        Command::All => {
            cmd_ingest(s)?;
            cmd_map(s)?;
            cmd_sample(s)?;
            cmd_report(s)?;
        }
    }
    write_run_json(command, s)
}

fn out(s: &Settings, name: &str) -> PathBuf {
    s.out_dir.join(name)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn load_window(s: &Settings) -> Result<CountSeries, CliError> {
    if !s.data.exists() {
        return Err(CliError::Data(format!("data file {} not found", s.data.display())));
    }
    let cumulative = parse_jhu_csv(&s.data, &s.country)?;
    let daily = to_daily(&cumulative)?;
    let tau = SerialInterval::default().tau();
    Ok(window(&daily, s.start, s.days, tau)?)
}

pub fn build_model(s: &Settings, counts: CountSeries) -> Result<EpiModel, CliError> {
    let defaults = match (s.lambda_r, s.lambda_o) {
        (Some(r), Some(o)) => Hyperparams::new(r, o)?,
        _ => lambda_defaults(&counts)?,
    };
    let hyper = Hyperparams::new(s.lambda_r.unwrap_or(defaults.lambda_r), s.lambda_o.unwrap_or(defaults.lambda_o))?;
    Ok(EpiModel::new(counts, SerialInterval::default(), hyper)?)
}

pub fn load_model(s: &Settings) -> Result<EpiModel, CliError> {
    build_model(s, load_window(s)?)
}

pub fn cmd_ingest(s: &Settings) -> Result<CountSeries, CliError> {
    let counts = load_window(s)?;
    let mut w = create(&out(s, "window.csv"))?;
    write_window_csv(&counts, &mut w)?;
    w.flush()?;
    info!("window of {} days from {} written", counts.len(), s.start);
    Ok(counts)
}

#[derive(Debug, Serialize)]
struct MapMeta<'a> {
    objective: f64,
    iterations: usize,
    converged: bool,
    uniqueness: &'a str,
    fermat_residual: f64,
    lambda_r: f64,
    lambda_o: f64,
}

pub fn solve(model: &EpiModel) -> Result<MapEstimate, CliError> {
    let diff = SecondDiffOp::new(model.dim())?;
    Ok(solve_map(model, &diff, DEFAULT_MAX_ITERS, DEFAULT_TOL)?)
}

pub fn cmd_map(s: &Settings) -> Result<MapEstimate, CliError> {
    let model = load_model(s)?;
    let est = solve(&model)?;
    let diff = SecondDiffOp::new(model.dim())?;
    let check = map_uniqueness_check(&est.theta, &model, &diff, UNIQUENESS_TOL)?;
    let intensity = model.intensity(&est.theta);
    let mut w = csv::Writer::from_writer(create(&out(s, "map.csv"))?);
    w.write_record(["date", "R_map", "O_map", "intensity"])?;
    for (t, d) in model.counts().dates().iter().enumerate() {
        w.write_record([
            d.to_string(),
            est.theta.r[t].to_string(),
            est.theta.o[t].to_string(),
            intensity[t].to_string(),
        ])?;
    }
    w.flush()?;
    let hyper = model.hyper();
    let meta = MapMeta {
        objective: est.objective,
        iterations: est.iterations,
        converged: est.converged,
        uniqueness: check.verdict.as_str(),
        fermat_residual: check.residual,
        lambda_r: hyper.lambda_r,
        lambda_o: hyper.lambda_o,
    };
    write_json(&out(s, "map_meta.json"), &meta)?;
    info!("MAP objective {} after {} iterations ({})", est.objective, est.iterations, check.verdict.as_str());
    Ok(est)
}

pub fn cmd_sample(s: &Settings) -> Result<Vec<ChainTrace>, CliError> {
    let model = load_model(s)?;
    let config = s.sampler_config();
    info!("running {} chains of {} on {} threads", s.chains, config.label(), s.jobs);
    let traces = run_chains(&model, &config, s.chains, s.jobs)?;
    for tr in &traces {
        let mut w = create(&out(s, &format!("trace_{}.bin", tr.chain)))?;
        write_trace(&mut w, tr.dim, &tr.samples)?;
        w.flush()?;
        let mut w = create(&out(s, &format!("path_{}.bin", tr.chain)))?;
        write_path(&mut w, tr.dim, s.path_stride, &tr.r_trace)?;
        w.flush()?;
    }
    let mut acc = csv::Writer::from_writer(create(&out(s, "acceptance.csv"))?);
    let mut steps = csv::Writer::from_writer(create(&out(s, "stepsizes.csv"))?);
    acc.write_record(["chain", "window", "iteration", "phase", "acc_r", "acc_o"])?;
    steps.write_record(["chain", "window", "iteration", "phase", "gamma1", "gamma2"])?;
    for tr in &traces {
        for w in &tr.windows {
            let phase = if w.burnin { "burnin" } else { "sampling" };
            let key = [tr.chain.to_string(), w.window.to_string(), w.iteration.to_string(), phase.to_string()];
            acc.write_record(key.iter().cloned().chain([w.acc_r.to_string(), w.acc_o.to_string()]))?;
            steps.write_record(key.into_iter().chain([w.gamma1.to_string(), w.gamma2.to_string()]))?;
        }
    }
    acc.flush()?;
    steps.flush()?;
    Ok(traces)
}

/// Indices `k` of the files `<prefix><k>.bin` in `dir`, ascending.
fn indexed_files(dir: &Path, prefix: &str) -> Result<Vec<(usize, PathBuf)>, CliError> {
    let mut found = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(_) => return Ok(found),
    };
    for entry in entries {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(k) = name
            .strip_prefix(prefix)
            .and_then(|r| r.strip_suffix(".bin"))
            .and_then(|k| k.parse::<usize>().ok())
        {
            found.push((k, path));
        }
    }
    found.sort();
    Ok(found)
}

/// Chains saved by `sample` in `dir`.
pub fn load_traces(dir: &Path, dim: usize) -> Result<Vec<ChainTrace>, CliError> {
    let files = indexed_files(dir, "trace_")?;
    if files.is_empty() {
        return Err(CliError::Empty(format!("no trace files in {}", dir.display())));
    }
    let mut traces = Vec::with_capacity(files.len());
    for (k, path) in files {
        let t = read_trace(&mut BufReader::new(File::open(&path)?))?;
        if t.dim != dim {
            return Err(CliError::Data(format!("{} holds {} days, the window has {dim}", path.display(), t.dim)));
        }
        traces.push(ChainTrace {
            chain: k,
            dim,
            samples: t.samples,
            windows: Vec::new(),
            r_trace: Vec::new(),
            r_trace_stride: None,
            initial: Theta::neutral(dim),
            gamma1: f64::NAN,
            gamma2: f64::NAN,
            post_burnin_acceptance: (f64::NAN, f64::NAN),
        });
    }
    if traces.iter().all(|t| t.n_samples() == 0) {
        return Err(CliError::Empty("trace files hold no post-burn-in samples".into()));
    }
    Ok(traces)
}

pub fn load_paths(dir: &Path, dim: usize) -> Result<Vec<PathTrace>, CliError> {
    let mut paths = Vec::new();
    for (_, path) in indexed_files(dir, "path_")? {
        let p = read_path(&mut BufReader::new(File::open(&path)?))?;
        if p.dim != dim {
            return Err(CliError::Data(format!("{} holds {} days, the window has {dim}", path.display(), p.dim)));
        }
        paths.push(p);
    }
    Ok(paths)
}

/// One row of bands.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub date: String,
    pub z: u64,
    pub zd: [f64; 3],
    pub r: [f64; 3],
    pub o: [f64; 3],
}

pub const BANDS_HEADER: [&str; 11] = [
    "date", "Z", "ZD_lo", "ZD_med", "ZD_hi", "R_lo", "R_med", "R_hi", "O_lo", "O_med", "O_hi",
];

pub fn bands_table(counts: &CountSeries, traces: &[ChainTrace], alpha: f64) -> Result<Vec<BandRow>, CliError> {
    let r = credibility_band(traces, Target::R, alpha, counts.dates())?;
    let o = credibility_band(traces, Target::O, alpha, counts.dates())?;
    let zd = denoised_band(counts, &o)?;
    Ok((0..counts.len())
        .map(|t| BandRow {
            date: counts.dates()[t].to_string(),
            z: counts.values()[t],
            zd: [zd.lower[t], zd.median[t], zd.upper[t]],
            r: [r.lower[t], r.median[t], r.upper[t]],
            o: [o.lower[t], o.median[t], o.upper[t]],
        })
        .collect())
}

/// One row of diagnostics.csv. `index` counts iterations: the lag for
/// `acf`, the iterations completed for `gr` and `dist_map`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagRow {
    pub index: usize,
    pub acf: Option<f64>,
    pub gr: Option<f64>,
    pub dist_map: Option<f64>,
}

pub const DIAGNOSTICS_HEADER: [&str; 4] = ["index", "acf", "gr", "dist_map"];

/// Lags `0, 1, …` spaced roughly geometrically up to `max`.
pub fn log_lags(max: usize) -> Vec<usize> {
    let mut lags = vec![0];
    let mut x = 1.0f64;
    while (x.round() as usize) <= max {
        let l = x.round() as usize;
        if *lags.last().unwrap() != l {
            lags.push(l);
        }
        x *= 1.1;
    }
    lags
}

pub fn diagnostics_table(
    traces: &[ChainTrace],
    paths: &[PathTrace],
    r_map: &[f64],
    burnin: usize,
    thin: usize,
) -> Result<Vec<DiagRow>, CliError> {
    let mut rows: BTreeMap<usize, DiagRow> = BTreeMap::new();
    let n = traces.iter().map(|t| t.n_samples()).min().unwrap_or(0);
    if n >= 2 {
        let lags = log_lags((n - 1).min(MAX_ACF_LAG / thin));
        let mut acc = vec![0.0; lags.len()];
        let mut used = 0;
        for tr in traces {
            let head = ChainTrace {
                samples: tr.samples[..n * 2 * tr.dim].to_vec(),
                ..tr.clone()
            };
            match mean_abs_acf_at(&head, &lags) {
                Ok(a) => {
                    acc.iter_mut().zip(a).for_each(|(s, v)| *s += v);
                    used += 1;
                }
                Err(e) => warn!("chain {}: autocorrelation skipped: {e}", tr.chain),
            }
        }
        if used > 0 {
            for (l, a) in lags.iter().zip(acc) {
                rows.entry(l * thin).or_default().acf = Some(a / used as f64);
            }
        }
    }
    if traces.len() >= 2 && n >= 2 {
        let mut checkpoints: Vec<usize> = (1..=GR_CHECKPOINTS).map(|k| (k * n).div_ceil(GR_CHECKPOINTS).max(2)).collect();
        checkpoints.dedup();
        let equal: Vec<ChainTrace> = traces
            .iter()
            .map(|t| ChainTrace {
                samples: t.samples[..n * 2 * t.dim].to_vec(),
                ..t.clone()
            })
            .collect();
        match gelman_rubin(&equal, &checkpoints) {
            Ok(stats) => {
                for g in stats {
                    rows.entry(burnin + g.n * thin).or_default().gr = Some(g.max);
                }
            }
            Err(e) => warn!("Gelman-Rubin statistic skipped: {e}"),
        }
    }
    if !paths.is_empty() {
        let per_chain: Vec<Vec<f64>> = paths
            .iter()
            .map(|p| distance_to_map(&p.rows, r_map))
            .collect::<proxmc::Result<_>>()?;
        let len = per_chain.iter().map(|d| d.len()).min().unwrap_or(0);
        let stride = paths[0].stride;
        for j in 0..len {
            let m = per_chain.iter().map(|d| d[j]).sum::<f64>() / per_chain.len() as f64;
            rows.entry((j + 1) * stride).or_default().dist_map = Some(m);
        }
    }
    Ok(rows
        .into_iter()
        .map(|(index, mut r)| {
            r.index = index;
            r
        })
        .collect())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn cmd_report(s: &Settings) -> Result<(), CliError> {
    let model = load_model(s)?;
    let traces = load_traces(&s.out_dir, model.dim())?;
    let paths = load_paths(&s.out_dir, model.dim())?;
    let bands = bands_table(model.counts(), &traces, s.alpha)?;
    let mut w = csv::Writer::from_writer(create(&out(s, "bands.csv"))?);
    w.write_record(BANDS_HEADER)?;
    for b in &bands {
        let mut rec = vec![b.date.clone(), b.z.to_string()];
        rec.extend(b.zd.iter().chain(&b.r).chain(&b.o).map(|v| v.to_string()));
        w.write_record(rec)?;
    }
    w.flush()?;

    let est = solve(&model)?;
    let diag = diagnostics_table(&traces, &paths, &est.theta.r, s.burnin, s.thin)?;
    let mut w = csv::Writer::from_writer(create(&out(s, "diagnostics.csv"))?);
    w.write_record(DIAGNOSTICS_HEADER)?;
    for d in &diag {
        w.write_record([d.index.to_string(), cell(d.acf), cell(d.gr), cell(d.dist_map)])?;
    }
    w.flush()?;
    info!("report over {} chains written", traces.len());
    Ok(())
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'a str,
    settings: &'a Settings,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_run_json(command: Command, s: &Settings) -> Result<(), CliError> {
    let record = RunRecord {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        settings: s,
    };
    write_json(&out(s, "run.json"), &record)
}
