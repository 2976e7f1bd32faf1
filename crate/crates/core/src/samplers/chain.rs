//! Chain driver: initialization, adaptive burn-in, frozen sampling phase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adapt::{adapt_step_sizes, initial_step_sizes, WindowStats};
use super::config::{Scheme, SamplerConfig};
use super::kernel::{gibbs_step, mh_step, ChainState, SamplerOps, StepOutcome};
use crate::error::{Error, Result};
use crate::model::{EpiModel, Theta};

pub const MAX_INIT_ATTEMPTS: usize = 1000;
const INIT_HALF_WIDTH: f64 = 0.1;

/// Acceptance rates and step sizes at the end of one adaptation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRecord {
    /// One-based window index.
    pub window: usize,
    /// Iterations completed when the window closed.
    pub iteration: usize,
    pub burnin: bool,
    pub acc_r: f64,
    pub acc_o: f64,
    /// Step sizes in force after the window (adapted during burn-in).
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub chain: usize,
    pub dim: usize,
    /// Post-burn-in samples, `R` then `O`, `2T` values each.
    pub samples: Vec<f64>,
    pub windows: Vec<WindowRecord>,
    /// Every `r_trace_stride` iterations from the start, burn-in included.
    pub r_trace: Vec<f64>,
    pub r_trace_stride: Option<usize>,
    pub initial: Theta,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Acceptance over the whole post-burn-in phase, per block.
    pub post_burnin_acceptance: (f64, f64),
}

impl ChainTrace {
    pub fn n_samples(&self) -> usize {
        self.samples.len() / (2 * self.dim)
    }

    pub fn sample(&self, k: usize) -> (&[f64], &[f64]) {
        let s = &self.samples[2 * self.dim * k..2 * self.dim * (k + 1)];
        s.split_at(self.dim)
    }

    /// Trace of component `c` (`c < T` is `R_c`, otherwise `O_{c−T}`).
    pub fn component(&self, c: usize) -> Vec<f64> {
        let stride = 2 * self.dim;
        self.samples.iter().skip(c).step_by(stride).copied().collect()
    }

    pub fn r_trace_len(&self) -> usize {
        self.r_trace.len() / self.dim
    }

    pub fn r_trace_row(&self, k: usize) -> &[f64] {
        &self.r_trace[self.dim * k..self.dim * (k + 1)]
    }

    /// Mean acceptance over the last `n` burn-in windows.
    pub fn terminal_burnin_acceptance(&self, n: usize) -> Option<(f64, f64)> {
        let burn: Vec<&WindowRecord> = self.windows.iter().filter(|w| w.burnin).collect();
        if burn.is_empty() {
            return None;
        }
        let tail = &burn[burn.len().saturating_sub(n)..];
        let m = tail.len() as f64;
        Some((
            tail.iter().map(|w| w.acc_r).sum::<f64>() / m,
            tail.iter().map(|w| w.acc_o).sum::<f64>() / m,
        ))
    }
}

fn tally(stats: &mut WindowStats, out: StepOutcome) {
    stats.steps += 1;
    stats.accepted_r += u64::from(out.r == Some(true));
    stats.accepted_o += u64::from(out.o == Some(true));
}

/// Chain `index` draws from stream `index` of the generator seeded with the
/// master seed, so chains are independent and individually reproducible.
pub fn chain_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `R⁰ = max(1 + U(−0.1, 0.1), 0)`, `O⁰ = U(−0.1, 0.1)`, redrawn until in
/// the domain.
pub fn initial_point<G: Rng + ?Sized>(model: &EpiModel, rng: &mut G) -> Result<Theta> {
    let t = model.dim();
    for _ in 0..MAX_INIT_ATTEMPTS {
        let r = (0..t)
            .map(|_| (1.0 + rng.random_range(-INIT_HALF_WIDTH..INIT_HALF_WIDTH)).max(0.0))
            .collect();
        let o = (0..t)
            .map(|_| rng.random_range(-INIT_HALF_WIDTH..INIT_HALF_WIDTH))
            .collect();
        let theta = Theta::new(r, o);
        if model.in_domain(&theta) {
            return Ok(theta);
        }
    }
    Err(Error::Initialization(format!(
        "no feasible starting point in {MAX_INIT_ATTEMPTS} draws"
    )))
}

pub fn run_chain(model: &EpiModel, ops: &SamplerOps, config: &SamplerConfig, index: usize) -> Result<ChainTrace> {
    config.validate()?;
    let dim = model.dim();
    let mut rng = chain_rng(config.seed, index);
    let initial = initial_point(model, &mut rng)?;
    let (g1, g2) = initial_step_sizes(model, ops, config, &initial);
    let mut state = ChainState::new(initial.clone(), model, ops, g1, g2, rng)
        .ok_or_else(|| Error::Initialization("initial point has zero posterior density".into()))?;
    let hyper = model.hyper();

    let mut samples = Vec::with_capacity(config.n_samples() * 2 * dim);
    let mut windows = Vec::with_capacity(config.n_max / config.adapt_window + 1);
    let mut r_trace = Vec::new();
    let mut window = WindowStats::default();
    let mut post = WindowStats::default();
    let mut k = 0;
    for n in 1..=config.n_max {
        let out = match config.scheme {
            Scheme::Mh => mh_step(&mut state, model, ops, config),
            Scheme::Gibbs => gibbs_step(&mut state, model, ops, config),
        };
        let burnin = n <= config.n_burnin;
        tally(&mut window, out);
        if !burnin {
            tally(&mut post, out);
        }
        if n % config.adapt_window == 0 || n == config.n_burnin {
            k += 1;
            if burnin {
                adapt_step_sizes(&mut state, &window, k, config, &hyper);
            }
            windows.push(WindowRecord {
                window: k,
                iteration: n,
                burnin,
                acc_r: window.rate_r(),
                acc_o: window.rate_o(),
                gamma1: state.gamma1,
                gamma2: state.gamma2,
            });
            window = WindowStats::default();
        }
        if let Some(stride) = config.r_trace_stride {
            if n % stride == 0 {
                r_trace.extend_from_slice(&state.theta.r);
            }
        }
        if !burnin && (n - config.n_burnin) % config.thinning == 0 {
            samples.extend_from_slice(&state.theta.r);
            samples.extend_from_slice(&state.theta.o);
        }
    }
    Ok(ChainTrace {
        chain: index,
        dim,
        samples,
        windows,
        r_trace,
        r_trace_stride: config.r_trace_stride,
        initial,
        gamma1: state.gamma1,
        gamma2: state.gamma2,
        post_burnin_acceptance: (post.rate_r(), post.rate_o()),
    })
}

/// Runs `n_chains` independent chains on at most `jobs` threads.
pub fn run_chains(model: &EpiModel, config: &SamplerConfig, n_chains: usize, jobs: usize) -> Result<Vec<ChainTrace>> {
    config.validate()?;
    let ops = SamplerOps::new(model.dim(), config.covariance)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..n_chains)
            .into_par_iter()
            .map(|i| run_chain(model, &ops, config, i))
            .collect()
    })
}
