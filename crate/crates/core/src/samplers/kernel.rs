//! Metropolis-Hastings and Metropolis-within-Gibbs transition kernels.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{Drift, SamplerConfig};
use super::drift::{pg_o_from_grad, pgdec_r_from_grad, pgdual_r_from_grad};
use super::proposal::{log_q_o, log_q_r, propose_block_o, propose_block_r};
use crate::error::Result;
use crate::linops::{Augmentation, AugmentedDiffOp, DecimatedDiffOp, SecondDiffOp};
use crate::model::{neg_log_posterior, EpiModel, Theta};

/// Operators shared by every chain of a run.
#[derive(Debug, Clone)]
pub struct SamplerOps {
    pub diff: SecondDiffOp,
    pub dbar: AugmentedDiffOp,
    pub blocks: [DecimatedDiffOp; 3],
}

impl SamplerOps {
    pub fn new(dim: usize, covariance: Augmentation) -> Result<Self> {
        Ok(Self {
            diff: SecondDiffOp::new(dim)?,
            dbar: AugmentedDiffOp::new(dim, covariance)?,
            blocks: DecimatedDiffOp::all(dim)?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub proposed: u64,
    pub accepted: u64,
}

impl Tally {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Current point of one chain. `theta` is always in the domain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub theta: Theta,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rng: ChaCha8Rng,
    pub tally_r: Tally,
    pub tally_o: Tally,
    neg_log_post: f64,
}

impl ChainState {
    /// Fails with `None` when `theta` is outside the domain.
    pub fn new(theta: Theta, model: &EpiModel, ops: &SamplerOps, gamma1: f64, gamma2: f64, rng: ChaCha8Rng) -> Option<Self> {
        let nlp = neg_log_posterior(&theta, model, &ops.diff);
        nlp.is_finite().then_some(Self {
            theta,
            gamma1,
            gamma2,
            rng,
            tally_r: Tally::default(),
            tally_o: Tally::default(),
            neg_log_post: nlp,
        })
    }

    pub fn neg_log_post(&self) -> f64 {
        self.neg_log_post
    }
}

/// Acceptance decisions of one step; `None` for a block that did not move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    pub r: Option<bool>,
    pub o: Option<bool>,
}

struct Drifts<'a> {
    model: &'a EpiModel,
    ops: &'a SamplerOps,
    drift: Drift,
}

impl Drifts<'_> {
    fn mean(&self, theta: &Theta, block: usize, gamma1: f64, gamma2: f64, move_r: bool, move_o: bool) -> Theta {
        if self.drift == Drift::Rw {
            return theta.clone();
        }
        let (gr, go) = self
            .model
            .grad_f(theta)
            .expect("gradient is defined at every in-domain point");
        let h = self.model.hyper();
        let r = if move_r {
            match self.drift {
                Drift::PgDec => pgdec_r_from_grad(&theta.r, &gr, &self.ops.blocks[block], gamma1, h.lambda_r),
                _ => pgdual_r_from_grad(&theta.r, &gr, &self.ops.dbar, gamma1, h.lambda_r),
            }
        } else {
            theta.r.clone()
        };
        let o = if move_o {
            pg_o_from_grad(&theta.o, &go, gamma2, h.lambda_o)
        } else {
            theta.o.clone()
        };
        Theta::new(r, o)
    }
}

/// One Metropolis-Hastings update of the blocks selected by `move_r` /
/// `move_o`, with a single accept for all of them. Blocks with zero step
/// size stay frozen and consume no randomness.
fn update(state: &mut ChainState, model: &EpiModel, ops: &SamplerOps, drift: Drift, move_r: bool, move_o: bool) -> Option<bool> {
    let move_r = move_r && state.gamma1 > 0.0;
    let move_o = move_o && state.gamma2 > 0.0;
    if !move_r && !move_o {
        return None;
    }
    let (g1, g2) = (state.gamma1, state.gamma2);
    let block = if drift == Drift::PgDec && move_r {
        state.rng.random_range(0..3)
    } else {
        0
    };
    let drifts = Drifts { model, ops, drift };
    let mu_fwd = drifts.mean(&state.theta, block, g1, g2, move_r, move_o);
    let r_new = if move_r {
        propose_block_r(&mu_fwd.r, &ops.dbar, g1, &mut state.rng)
    } else {
        state.theta.r.clone()
    };
    let o_new = if move_o {
        propose_block_o(&mu_fwd.o, g2, &mut state.rng)
    } else {
        state.theta.o.clone()
    };
    let proposal = Theta::new(r_new, o_new);
    if !model.in_domain(&proposal) {
        return Some(false);
    }
    let nlp_new = neg_log_posterior(&proposal, model, &ops.diff);
    if !nlp_new.is_finite() {
        return Some(false);
    }
    let mu_rev = drifts.mean(&proposal, block, g1, g2, move_r, move_o);
    let mut log_alpha = state.neg_log_post - nlp_new;
    if move_r {
        log_alpha += log_q_r(&state.theta.r, &mu_rev.r, &ops.dbar, g1) - log_q_r(&proposal.r, &mu_fwd.r, &ops.dbar, g1);
    }
    if move_o {
        log_alpha += log_q_o(&state.theta.o, &mu_rev.o, g2) - log_q_o(&proposal.o, &mu_fwd.o, g2);
    }
    let u: f64 = state.rng.random();
    let accepted = log_alpha >= 0.0 || u.ln() < log_alpha;
    if accepted {
        state.theta = proposal;
        state.neg_log_post = nlp_new;
    }
    debug_assert!(model.in_domain(&state.theta));
    Some(accepted)
}

/// Joint proposal of `(R, O)` with one accept/reject.
pub fn mh_step(state: &mut ChainState, model: &EpiModel, ops: &SamplerOps, config: &SamplerConfig) -> StepOutcome {
    let acc = update(state, model, ops, config.drift, true, true);
    if let Some(a) = acc {
        state.tally_r.record(a);
        state.tally_o.record(a);
    }
    StepOutcome { r: acc, o: acc }
}

/// `R` block then `O` block, each with its own accept/reject against the
/// full posterior.
pub fn gibbs_step(state: &mut ChainState, model: &EpiModel, ops: &SamplerOps, config: &SamplerConfig) -> StepOutcome {
    let r = update(state, model, ops, config.drift, true, false);
    if let Some(a) = r {
        state.tally_r.record(a);
    }
    let o = update(state, model, ops, config.drift, false, true);
    if let Some(a) = o {
        state.tally_o.record(a);
    }
    StepOutcome { r, o }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CountSeries, Hyperparams, SerialInterval};
    use crate::samplers::config::Scheme;
    use chrono::NaiveDate;
    use rand::SeedableRng;

    fn toy() -> (EpiModel, SamplerOps) {
        let counts = CountSeries::from_start(
            NaiveDate::from_ymd_opt(2021, 5, 1).unwrap(),
            vec![40, 44, 39, 47, 52, 50],
            vec![38, 41, 40],
        )
        .unwrap();
        let phi = SerialInterval::from_weights(vec![0.5, 0.3, 0.2]).unwrap();
        let model = EpiModel::new(counts, phi, Hyperparams::new(5.0, 0.5).unwrap()).unwrap();
        let ops = SamplerOps::new(6, Augmentation::Invert).unwrap();
        (model, ops)
    }

    fn start(model: &EpiModel, ops: &SamplerOps, g1: f64, g2: f64, seed: u64) -> ChainState {
        ChainState::new(Theta::neutral(6), model, ops, g1, g2, ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn infeasible_start_is_refused() {
        let (model, ops) = toy();
        let bad = Theta::new(vec![-1.0; 6], vec![0.0; 6]);
        assert!(ChainState::new(bad, &model, &ops, 0.1, 0.1, ChaCha8Rng::seed_from_u64(0)).is_none());
    }

    #[test]
    fn off_domain_proposals_are_rejected() {
        let (model, ops) = toy();
        let cfg = SamplerConfig::new(Drift::Rw, Scheme::Mh, Augmentation::Invert);
        // Huge steps put almost every proposal outside R ≥ 0.
        let mut s = start(&model, &ops, 1e6, 1e6, 1);
        let mut rejected = 0;
        for _ in 0..50 {
            if mh_step(&mut s, &model, &ops, &cfg).r == Some(false) {
                rejected += 1;
            }
            assert!(model.in_domain(&s.theta));
        }
        assert!(rejected >= 49);
        assert_eq!(s.tally_r.proposed, 50);
    }

    #[test]
    fn tiny_steps_are_almost_always_accepted() {
        let (model, ops) = toy();
        for drift in Drift::ALL {
            let cfg = SamplerConfig::new(drift, Scheme::Mh, Augmentation::Invert);
            let mut s = start(&model, &ops, 1e-14, 1e-12, 2);
            for _ in 0..200 {
                mh_step(&mut s, &model, &ops, &cfg);
            }
            assert!(s.tally_r.rate() > 0.99, "{drift}: {}", s.tally_r.rate());
        }
    }

    #[test]
    fn blocks_accept_independently() {
        let (model, ops) = toy();
        let cfg = SamplerConfig::new(Drift::PgDual, Scheme::Gibbs, Augmentation::Invert);
        let (g1, g2) = crate::samplers::adapt::initial_step_sizes(&model, &ops, &cfg, &Theta::neutral(6));
        let mut s = start(&model, &ops, 4.0 * g1, g2, 3);
        let mut seen = false;
        for _ in 0..2000 {
            let out = gibbs_step(&mut s, &model, &ops, &cfg);
            if out.r == Some(false) && out.o == Some(true) {
                seen = true;
                break;
            }
        }
        assert!(seen, "{:?} {:?} {} {}", s.tally_r, s.tally_o, g1, g2);
    }

    #[test]
    fn gibbs_with_frozen_o_reduces_to_mh() {
        let (model, ops) = toy();
        for drift in Drift::ALL {
            let mh_cfg = SamplerConfig::new(drift, Scheme::Mh, Augmentation::Invert);
            let gibbs_cfg = SamplerConfig::new(drift, Scheme::Gibbs, Augmentation::Invert);
            let mut a = start(&model, &ops, 1e-4, 0.0, 4);
            let mut b = start(&model, &ops, 1e-4, 0.0, 4);
            for _ in 0..300 {
                let oa = mh_step(&mut a, &model, &ops, &mh_cfg);
                let ob = gibbs_step(&mut b, &model, &ops, &gibbs_cfg);
                assert_eq!(oa.r, ob.r);
                assert_eq!(ob.o, None);
                assert_eq!(a.theta, b.theta);
            }
        }
    }
}
