use super::problem::{rank_by_error, GroupProblem, GroupRecon};
use crate::error::{Error, Result};
use crate::image::BlockMask;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlbeConfig {
    /// Fraction of non-kept blocks drawn as insertion candidates.
    pub c_nlbe: f64,
    /// Fraction of the candidates inserted.
    pub r_nlbe: f64,
    pub max_cycles: usize,
    /// Consecutive rejected cycles before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for NlbeConfig {
    fn default() -> Self {
        Self {
            c_nlbe: 0.10,
            r_nlbe: 0.30,
            max_cycles: 200,
            patience: 10,
            seed: 0,
        }
    }
}

impl NlbeConfig {
    fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.c_nlbe) || !unit(self.r_nlbe) || self.max_cycles == 0 || self.patience == 0 {
            return Err(Error::InvalidInput(format!("invalid exchange config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NlbeOutcome {
    pub mask: BlockMask,
    /// Group error of the starting mask followed by every accepted step.
    pub mse_trace: Vec<f64>,
    pub cycles: usize,
    pub accepted: usize,
    pub recon: GroupRecon,
}

impl NlbeOutcome {
    pub fn initial_mse(&self) -> f64 {
        self.mse_trace[0]
    }

    pub fn final_mse(&self) -> f64 {
        *self.mse_trace.last().expect("trace is never empty")
    }
}

/// Nonlocal block exchange. A cycle is accepted only if the group error
/// strictly decreases and `admit` approves the new mask.
pub fn nlbe_with(
    problem: &GroupProblem,
    mask: &BlockMask,
    cfg: &NlbeConfig,
    admit: &mut dyn FnMut(&BlockMask) -> Result<bool>,
) -> Result<NlbeOutcome> {
    cfg.validate()?;
    if *mask.grid() != problem.grid() {
        return Err(Error::DimensionMismatch("mask grid does not match the image".into()));
    }
    let n = mask.grid().len();
    let kept = mask.kept_count();
    if kept == 0 || kept == n {
        return Err(Error::InvalidInput(format!(
            "block exchange needs a density strictly between 0 and 1, mask keeps {kept} of {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = mask.clone();
    let mut recon = problem.solve(&current, None)?;
    let mut mse = problem.mse(&recon);
    let mut trace = vec![mse];
    let mut stale = 0;
    let mut cycles = 0;
    let mut accepted = 0;

    while cycles < cfg.max_cycles && stale < cfg.patience {
        cycles += 1;
        let outside = current.dropped_indices();
        let inside = current.kept_indices();
        let c = ((cfg.c_nlbe * outside.len() as f64).ceil() as usize).min(outside.len());
        let k = ((cfg.r_nlbe * c as f64).ceil() as usize).min(c).min(inside.len());
        if k == 0 {
            stale += 1;
            continue;
        }
        let candidates: Vec<usize> = sample(&mut rng, outside.len(), c).into_iter().map(|i| outside[i]).collect();
        let errors = problem.block_errors(&recon, &candidates);
        let removed: Vec<usize> = sample(&mut rng, inside.len(), k).into_iter().map(|i| inside[i]).collect();

        let mut trial = current.clone();
        for &i in rank_by_error(&candidates, &errors).iter().take(k) {
            trial.set(i, true);
        }
        for &i in &removed {
            trial.set(i, false);
        }
        debug_assert_eq!(trial.kept_count(), kept);

        // cold start, as the decoder does
        let next = problem.solve(&trial, None)?;
        let next_mse = problem.mse(&next);
        if next_mse < mse && admit(&trial)? {
            current = trial;
            recon = next;
            mse = next_mse;
            trace.push(mse);
            accepted += 1;
            stale = 0;
        } else {
            stale += 1;
        }
    }
    log::debug!(
        "exchange {}: {} cycles, {} accepted, mse {:.4} -> {:.4}",
        problem.group.name(),
        cycles,
        accepted,
        trace[0],
        mse
    );
    Ok(NlbeOutcome {
        mask: current,
        mse_trace: trace,
        cycles,
        accepted,
        recon,
    })
}

/// Nonlocal block exchange without extra admission checks.
pub fn nlbe(problem: &GroupProblem, mask: &BlockMask, cfg: &NlbeConfig) -> Result<NlbeOutcome> {
    nlbe_with(problem, mask, cfg, &mut |_| Ok(true))
}
