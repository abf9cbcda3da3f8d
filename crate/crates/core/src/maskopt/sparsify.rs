use super::problem::{rank_by_error, GroupProblem, GroupRecon};
use crate::error::{Error, Result};
use crate::image::BlockMask;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsifyConfig {
    /// Fraction of kept blocks drawn as removal candidates per round.
    pub c_ps: f64,
    /// Fraction of the candidates that stays removed.
    pub r_ps: f64,
    pub target_density: f64,
    pub seed: u64,
}

impl Default for SparsifyConfig {
    fn default() -> Self {
        Self {
            c_ps: 0.10,
            r_ps: 0.50,
            target_density: 1.0,
            seed: 0,
        }
    }
}

impl SparsifyConfig {
    fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.c_ps) || !unit(self.r_ps) || !(self.target_density > 0.0 && self.target_density <= 1.0) {
            return Err(Error::InvalidInput(format!("invalid sparsification config {self:?}")));
        }
        Ok(())
    }
}

/// Kept-block count for a density; at least one block must remain.
pub fn target_count(density: f64, blocks: usize) -> Result<usize> {
    let n = (density * blocks as f64 + 1e-9).floor() as usize;
    if n == 0 {
        return Err(Error::InvalidInput(format!(
            "density {density} keeps no block out of {blocks}"
        )));
    }
    Ok(n.min(blocks))
}

/// One sparsification round.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyRound {
    pub kept: usize,
    pub candidates: usize,
    /// Group error with all candidates removed.
    pub mse: f64,
}

/// Every intermediate mask of a sparsification run, densest first.
#[derive(Debug, Clone)]
pub struct SparsifyTrace {
    pub masks: Vec<BlockMask>,
    pub rounds: Vec<SparsifyRound>,
}

impl SparsifyTrace {
    pub fn last(&self) -> &BlockMask {
        self.masks.last().expect("trace holds the initial mask")
    }
}

/// Probabilistic sparsification starting from `start`. Runs until the
/// target count is met or `stop` returns true for the current mask.
pub fn sparsify_from(
    problem: &GroupProblem,
    start: BlockMask,
    cfg: &SparsifyConfig,
    stop: &mut dyn FnMut(&BlockMask) -> Result<bool>,
) -> Result<SparsifyTrace> {
    cfg.validate()?;
    let grid = problem.grid();
    if *start.grid() != grid {
        return Err(Error::DimensionMismatch("mask grid does not match the image".into()));
    }
    let target = target_count(cfg.target_density, grid.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mask = start;
    let mut masks = vec![mask.clone()];
    let mut rounds = Vec::new();
    let mut warm: Option<GroupRecon> = None;

    while mask.kept_count() > target && !stop(&mask)? {
        let kept = mask.kept_indices();
        let n = kept.len();
        // n > target >= 1, so one block always stays in the trial mask
        let c = ((cfg.c_ps * n as f64).ceil() as usize).clamp(1, n - 1);
        let mut candidates: Vec<usize> = sample(&mut rng, n, c).into_iter().map(|i| kept[i]).collect();
        candidates.sort_unstable();
        // re-add count: at least one removal, never below the target
        let readd = (((1.0 - cfg.r_ps) * c as f64).ceil() as usize)
            .min(c - 1)
            .max(c.saturating_sub(n - target));

        let mut trial = mask.clone();
        for &i in &candidates {
            trial.set(i, false);
        }
        let recon = problem.solve(&trial, warm.as_ref())?;
        let errors = problem.block_errors(&recon, &candidates);
        for &i in rank_by_error(&candidates, &errors).iter().take(readd) {
            trial.set(i, true);
        }
        rounds.push(SparsifyRound {
            kept: trial.kept_count(),
            candidates: c,
            mse: problem.mse(&recon),
        });
        log::debug!(
            "sparsify {}: {} -> {} blocks",
            problem.group.name(),
            n,
            trial.kept_count()
        );
        mask = trial;
        masks.push(mask.clone());
        warm = Some(recon);
    }
    Ok(SparsifyTrace { masks, rounds })
}

/// Sparsifies a full mask down to `cfg.target_density`.
pub fn sparsify(problem: &GroupProblem, cfg: &SparsifyConfig) -> Result<BlockMask> {
    let trace = sparsify_from(problem, BlockMask::full(problem.grid()), cfg, &mut |_| Ok(false))?;
    Ok(trace.last().clone())
}
