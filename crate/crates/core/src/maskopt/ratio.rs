use super::nlbe::{nlbe_with, NlbeConfig};
use super::problem::GroupProblem;
use super::search::{optimize_group_params, ParamSearchConfig};
use super::sparsify::{sparsify_from, SparsifyConfig};
use crate::bitstream::{arith_encode, pack_blocks, quantize_params, read_container, write_container, HEADER_LEN};
use crate::codec::{
    baseline_init, build_container, container_size, decode_container_ycbcr, reconstruct, uncompressed_bytes,
    EncodeSetup,
};
use crate::eed::{EedParams, SolverConfig};
use crate::error::{Error, Result};
use crate::image::{mse, rgb_to_ycbcr, ycbcr_to_rgb, BlockGrid, BlockMask, Psnr, RgbImage, YCbCrImage};
use crate::jpeg::{encode_gray, TableClass};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioTarget {
    /// Uncompressed bytes over container bytes.
    pub target_ratio: f64,
    /// Relative slack above the target that still counts as a hit.
    pub tolerance: f64,
}

impl RatioTarget {
    pub fn new(target_ratio: f64) -> Result<Self> {
        if !(target_ratio > 1.0) || !target_ratio.is_finite() {
            return Err(Error::InvalidInput(format!("target ratio must exceed 1, got {target_ratio}")));
        }
        Ok(Self {
            target_ratio,
            tolerance: 0.05,
        })
    }

    pub fn budget(&self, width: usize, height: usize) -> usize {
        (uncompressed_bytes(width, height) as f64 / self.target_ratio).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub qualities: Vec<u8>,
    /// Chroma to luma kept-block ratios tried.
    pub alphas: Vec<f64>,
    /// `target_density` is ignored; paths run as deep as the budget needs.
    pub sparsify: SparsifyConfig,
    pub nlbe: NlbeConfig,
    pub params: ParamSearchConfig,
    pub run_nlbe: bool,
    pub run_param_search: bool,
    /// Parameters that replace the search result for a group.
    pub fixed_luma_params: Option<EedParams>,
    pub fixed_chroma_params: Option<EedParams>,
    /// Solver used while searching; the final figure always comes from a
    /// full decode.
    pub search_solver: SolverConfig,
    /// Solver for the sparsification paths, where only the ranking of
    /// block errors matters.
    pub path_solver: SolverConfig,
    /// Luma paths stop once luma alone fits in this fraction of the
    /// smallest budget.
    pub path_floor: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            qualities: vec![5, 8, 10, 15, 20, 30, 40, 50, 60, 70],
            alphas: vec![0.25, 0.5, 1.0],
            sparsify: SparsifyConfig::default(),
            nlbe: NlbeConfig::default(),
            params: ParamSearchConfig::default(),
            run_nlbe: true,
            run_param_search: true,
            fixed_luma_params: None,
            fixed_chroma_params: None,
            search_solver: SolverConfig::relaxed(),
            path_solver: SolverConfig {
                residual_tol: 1e-3,
                ..SolverConfig::default()
            },
            path_floor: 0.4,
        }
    }
}

impl OptimizeConfig {
    fn validate(&self) -> Result<()> {
        if self.qualities.is_empty() || self.qualities.iter().any(|&q| q == 0 || q > 100) {
            return Err(Error::InvalidInput(format!("invalid quality set {:?}", self.qualities)));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::InvalidInput(format!("invalid alpha set {:?}", self.alphas)));
        }
        if !(self.path_floor > 0.0 && self.path_floor <= 1.0) {
            return Err(Error::InvalidInput(format!("invalid path floor {}", self.path_floor)));
        }
        Ok(())
    }
}

/// One line of the optimisation log.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: String,
    pub quality: u8,
    pub luma_density: f64,
    pub chroma_density: f64,
    pub mse: f64,
    pub bytes: usize,
}

impl StageRecord {
    pub const CSV_HEADER: [&'static str; 6] = ["stage", "quality", "luma_density", "chroma_density", "mse", "bytes"];

    pub fn csv_fields(&self) -> [String; 6] {
        [
            self.stage.clone(),
            self.quality.to_string(),
            format!("{:.6}", self.luma_density),
            format!("{:.6}", self.chroma_density),
            format!("{:.6}", self.mse),
            self.bytes.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub quality: u8,
    pub alpha: f64,
    pub luma_density: f64,
    pub chroma_density: f64,
    pub luma_params: EedParams,
    pub chroma_params: EedParams,
    /// Relative MSE reduction of the parameter search (luma, chroma).
    pub param_improvement: (f64, f64),
    /// Relative MSE reduction of block exchange (luma, chroma).
    pub nlbe_improvement: (f64, f64),
    pub nlbe_trace_luma: Vec<f64>,
    pub nlbe_trace_chroma: Vec<f64>,
    pub stages: Vec<StageRecord>,
    /// Measured on the decoded container.
    pub final_psnr: f64,
    pub container_bytes: usize,
    pub achieved_ratio: f64,
    pub target_ratio: f64,
    pub within_tolerance: bool,
    /// Set when the chosen chroma density exceeds the luma density.
    pub chroma_exceeds_luma: bool,
    /// Residual tolerance used during search.
    pub search_tolerance: f64,
    pub decode_converged: bool,
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub setup: EncodeSetup,
    pub report: OptimizationReport,
}

/// Sparsification paths for one base quality.
#[derive(Debug, Clone)]
pub struct QualityPaths {
    pub quality: u8,
    pub init: YCbCrImage,
    pub luma: Vec<BlockMask>,
    pub chroma: Vec<BlockMask>,
}

/// Per-image search state shared by every target ratio.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub rgb: RgbImage,
    pub orig: YCbCrImage,
    pub paths: Vec<QualityPaths>,
    pub smallest_budget: usize,
}

fn luma_only_bytes(orig: &YCbCrImage, mask: &BlockMask, quality: u8) -> Result<usize> {
    let payload = encode_gray(&pack_blocks(&orig.y, mask)?, quality, TableClass::Luma)?;
    Ok(HEADER_LEN + arith_encode(mask.bits()).len() + payload.len())
}

fn quality_paths(orig: &YCbCrImage, quality: u8, smallest_budget: usize, cfg: &OptimizeConfig) -> Result<QualityPaths> {
    let grid = BlockGrid::new(orig.width(), orig.height());
    let init = baseline_init(orig, quality)?;
    let standard = EedParams::STANDARD;
    let floor = cfg.path_floor * smallest_budget as f64;

    let luma_problem = GroupProblem::luma(&init, orig, standard, cfg.path_solver);
    let luma_cfg = SparsifyConfig {
        target_density: 1.0 / grid.len() as f64,
        ..cfg.sparsify
    };
    let luma = sparsify_from(&luma_problem, BlockMask::full(grid), &luma_cfg, &mut |m| {
        Ok(luma_only_bytes(orig, m, quality)? as f64 <= floor)
    })?
    .masks;

    let min_alpha = cfg.alphas.iter().copied().fold(1.0, f64::min);
    let last_kept = luma.last().map_or(1, BlockMask::kept_count);
    let chroma_target = ((min_alpha * last_kept as f64).round() as usize).max(1);
    let chroma_problem = GroupProblem::chroma(&init, orig, &init.y, standard, cfg.path_solver);
    let chroma_cfg = SparsifyConfig {
        target_density: chroma_target as f64 / grid.len() as f64,
        seed: cfg.sparsify.seed ^ 0x9E37_79B9_7F4A_7C15,
        ..cfg.sparsify
    };
    let chroma = sparsify_from(&chroma_problem, BlockMask::full(grid), &chroma_cfg, &mut |_| Ok(false))?.masks;
    log::info!(
        "q{quality}: luma path {} masks (down to {} blocks), chroma path {} masks",
        luma.len(),
        last_kept,
        chroma.len()
    );
    Ok(QualityPaths {
        quality,
        init,
        luma,
        chroma,
    })
}

/// Builds the sparsification paths of every base quality, deep enough for
/// all ratios up to `max_ratio`.
pub fn prepare(rgb: &RgbImage, max_ratio: f64, cfg: &OptimizeConfig) -> Result<Prepared> {
    cfg.validate()?;
    let rgb = rgb.quantized();
    let orig = rgb_to_ycbcr(&rgb)?;
    let smallest_budget = RatioTarget::new(max_ratio)?.budget(rgb.width(), rgb.height());
    let paths = cfg
        .qualities
        .par_iter()
        .map(|&q| quality_paths(&orig, q, smallest_budget, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        rgb,
        orig,
        paths,
        smallest_budget,
    })
}

/// Chroma mask of the path closest to `alpha` times the luma count from
/// above.
fn chroma_for(path: &[BlockMask], luma_kept: usize, alpha: f64) -> &BlockMask {
    let want = ((alpha * luma_kept as f64).round() as usize).max(1);
    path.iter()
        .find(|m| m.kept_count() <= want)
        .unwrap_or_else(|| path.last().expect("path is never empty"))
}

#[derive(Debug, Clone)]
struct Candidate {
    setup: EncodeSetup,
    alpha: f64,
    bytes: usize,
}

fn standard_setup(quality: u8, luma_mask: BlockMask, chroma_mask: BlockMask) -> EncodeSetup {
    EncodeSetup {
        quality,
        luma_mask,
        chroma_mask,
        luma_params: EedParams::STANDARD,
        chroma_params: EedParams::STANDARD,
    }
}

/// Densest mask pair along the path that fits the budget, with blocks of
/// the next denser luma mask added back while they still fit.
/// `Err(bytes)` carries the smallest size seen when nothing fits.
fn fit_budget(
    orig: &YCbCrImage,
    paths: &QualityPaths,
    alpha: f64,
    budget: usize,
) -> Result<std::result::Result<Candidate, usize>> {
    let q = paths.quality;
    let size_at = |i: usize| -> Result<usize> {
        let luma = &paths.luma[i];
        let chroma = chroma_for(&paths.chroma, luma.kept_count(), alpha);
        container_size(orig, &standard_setup(q, luma.clone(), chroma.clone()))
    };
    let last = paths.luma.len() - 1;
    let tail = size_at(last)?;
    if tail > budget {
        return Ok(Err(tail));
    }
    let (mut lo, mut hi) = (0usize, last);
    if size_at(0)? <= budget {
        hi = 0;
    }
    // invariant: size(hi) fits, size(lo) does not (unless hi == 0)
    while hi > 0 && hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if size_at(mid)? <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let base = &paths.luma[hi];
    let chroma = chroma_for(&paths.chroma, base.kept_count(), alpha).clone();
    let mut setup = standard_setup(q, base.clone(), chroma);
    let mut bytes = container_size(orig, &setup)?;
    if hi > 0 {
        let extra: Vec<usize> = paths.luma[hi - 1]
            .kept_indices()
            .into_iter()
            .filter(|&i| !base.is_kept(i))
            .collect();
        let with = |k: usize| {
            let mut m = base.clone();
            for &i in &extra[..k] {
                m.set(i, true);
            }
            m
        };
        let (mut good, mut bad) = (0usize, extra.len());
        while bad - good > 1 {
            let mid = (good + bad) / 2;
            let s = EncodeSetup {
                luma_mask: with(mid),
                ..setup.clone()
            };
            let sz = container_size(orig, &s)?;
            if sz <= budget {
                good = mid;
            } else {
                bad = mid;
            }
        }
        if good > 0 {
            setup.luma_mask = with(good);
            bytes = container_size(orig, &setup)?;
        }
    }
    Ok(Ok(Candidate { setup, alpha, bytes }))
}

fn rgb_mse(rec: &YCbCrImage, rgb: &RgbImage) -> Result<f64> {
    let out = ycbcr_to_rgb(rec)?.quantized();
    mse(&out.planes(), &rgb.planes())
}

fn record(stage: &str, setup: &EncodeSetup, mse: f64, bytes: usize) -> StageRecord {
    StageRecord {
        stage: stage.to_string(),
        quality: setup.quality,
        luma_density: setup.luma_mask.density(),
        chroma_density: setup.chroma_mask.density(),
        mse,
        bytes,
    }
}

/// Runs the ratio search on prepared paths.
pub fn optimize_prepared(prep: &Prepared, target: &RatioTarget, cfg: &OptimizeConfig) -> Result<Encoded> {
    cfg.validate()?;
    let orig = &prep.orig;
    let (w, h) = (orig.width(), orig.height());
    let budget = target.budget(w, h);
    let uncompressed = uncompressed_bytes(w, h) as f64;

    // fit every (quality, alpha) tuple to the budget
    let tuples: Vec<(usize, f64)> = (0..prep.paths.len())
        .flat_map(|p| cfg.alphas.iter().map(move |&a| (p, a)))
        .collect();
    let fitted = tuples
        .par_iter()
        .map(|&(p, a)| fit_budget(orig, &prep.paths[p], a, budget).map(|r| (p, r)))
        .collect::<Result<Vec<_>>>()?;
    let smallest = fitted
        .iter()
        .map(|(_, r)| match r {
            Ok(c) => c.bytes,
            Err(b) => *b,
        })
        .min()
        .unwrap_or(usize::MAX);
    let feasible: Vec<(usize, Candidate)> = fitted
        .into_iter()
        .filter_map(|(p, r)| r.ok().map(|c| (p, c)))
        .collect();
    if feasible.is_empty() {
        return Err(Error::Unattainable {
            target: target.target_ratio,
            closest: uncompressed / smallest as f64,
        });
    }

    // score with standard parameters
    let scored = feasible
        .par_iter()
        .map(|(p, c)| {
            let rec = reconstruct(&prep.paths[*p].init, &c.setup, &cfg.search_solver)?;
            Ok(rgb_mse(&rec.image, &prep.rgb)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut stages: Vec<StageRecord> = feasible
        .iter()
        .zip(&scored)
        .map(|((_, c), &m)| record(&format!("candidate_a{}", c.alpha), &c.setup, m, c.bytes))
        .collect();
    let best = (0..feasible.len())
        .min_by(|&a, &b| scored[a].total_cmp(&scored[b]).then(a.cmp(&b)))
        .expect("feasible is not empty");
    let (p, chosen) = &feasible[best];
    let paths = &prep.paths[*p];
    let init = &paths.init;
    let mut setup = chosen.setup.clone();
    log::info!(
        "chose q{} alpha {} luma {:.4} chroma {:.4} ({} bytes, budget {budget})",
        setup.quality,
        chosen.alpha,
        setup.luma_mask.density(),
        setup.chroma_mask.density(),
        chosen.bytes
    );

    let fits = |s: &EncodeSetup| -> Result<bool> { Ok(container_size(orig, s)? <= budget) };
    let solver = cfg.search_solver;
    let full = |m: &BlockMask| m.kept_count() == m.grid().len();

    // luma: parameters, then block exchange
    let luma_problem = GroupProblem::luma(init, orig, EedParams::STANDARD, solver);
    let mut param_improvement = (0.0, 0.0);
    let mut luma_recon = if let Some(p) = cfg.fixed_luma_params {
        let p = quantize_params(p)?;
        setup.luma_params = p;
        luma_problem.with_params(p).solve(&setup.luma_mask, None)?
    } else if cfg.run_param_search {
        let ps = optimize_group_params(&luma_problem, &setup.luma_mask, &cfg.params)?;
        setup.luma_params = ps.params;
        param_improvement.0 = ps.improvement();
        stages.push(record("params_luma", &setup, ps.mse, chosen.bytes));
        ps.recon
    } else {
        luma_problem.solve(&setup.luma_mask, None)?
    };
    let mut nlbe_improvement = (0.0, 0.0);
    let mut nlbe_trace_luma = Vec::new();
    if cfg.run_nlbe && !full(&setup.luma_mask) {
        let problem = luma_problem.with_params(setup.luma_params);
        let base = setup.clone();
        let out = nlbe_with(&problem, &setup.luma_mask, &cfg.nlbe, &mut |m| {
            fits(&EncodeSetup {
                luma_mask: m.clone(),
                ..base.clone()
            })
        })?;
        setup.luma_mask = out.mask.clone();
        nlbe_improvement.0 = 1.0 - out.final_mse() / out.initial_mse();
        stages.push(record("nlbe_luma", &setup, out.final_mse(), container_size(orig, &setup)?));
        nlbe_trace_luma = out.mse_trace;
        luma_recon = out.recon;
    }

    // chroma, guided by the optimised luma reconstruction
    let guide = luma_recon.planes[0].clone();
    let chroma_problem = GroupProblem::chroma(init, orig, &guide, EedParams::STANDARD, solver);
    if let Some(p) = cfg.fixed_chroma_params {
        setup.chroma_params = quantize_params(p)?;
    } else if cfg.run_param_search {
        let ps = optimize_group_params(&chroma_problem, &setup.chroma_mask, &cfg.params)?;
        setup.chroma_params = ps.params;
        param_improvement.1 = ps.improvement();
        stages.push(record("params_chroma", &setup, ps.mse, container_size(orig, &setup)?));
    }
    let mut nlbe_trace_chroma = Vec::new();
    if cfg.run_nlbe && !full(&setup.chroma_mask) {
        let problem = chroma_problem.with_params(setup.chroma_params);
        let base = setup.clone();
        let nlbe_cfg = NlbeConfig {
            seed: cfg.nlbe.seed ^ 0x9E37_79B9_7F4A_7C15,
            ..cfg.nlbe
        };
        let out = nlbe_with(&problem, &setup.chroma_mask, &nlbe_cfg, &mut |m| {
            fits(&EncodeSetup {
                chroma_mask: m.clone(),
                ..base.clone()
            })
        })?;
        setup.chroma_mask = out.mask.clone();
        nlbe_improvement.1 = 1.0 - out.final_mse() / out.initial_mse();
        stages.push(record("nlbe_chroma", &setup, out.final_mse(), container_size(orig, &setup)?));
        nlbe_trace_chroma = out.mse_trace;
    }

    // final container, measured through the real decoder
    let container = build_container(orig, &setup)?;
    let bytes = write_container(&container)?;
    let decoded = decode_container_ycbcr(&read_container(&bytes)?)?;
    let decode_converged = decoded.converged;
    let final_mse = rgb_mse(&decoded.image, &prep.rgb)?;
    stages.push(record("final", &setup, final_mse, bytes.len()));
    let achieved_ratio = uncompressed / bytes.len() as f64;
    let within_tolerance = achieved_ratio >= target.target_ratio * (1.0 - 1e-12)
        && achieved_ratio <= target.target_ratio * (1.0 + target.tolerance);
    if !within_tolerance {
        log::warn!(
            "achieved ratio {achieved_ratio:.2}:1 is outside the tolerance of {:.2}:1",
            target.target_ratio
        );
    }
    let report = OptimizationReport {
        quality: setup.quality,
        alpha: chosen.alpha,
        luma_density: setup.luma_mask.density(),
        chroma_density: setup.chroma_mask.density(),
        luma_params: container.luma_params,
        chroma_params: container.chroma_params,
        param_improvement,
        nlbe_improvement,
        nlbe_trace_luma,
        nlbe_trace_chroma,
        stages,
        final_psnr: Psnr::from_mse(final_mse).db(),
        container_bytes: bytes.len(),
        achieved_ratio,
        target_ratio: target.target_ratio,
        within_tolerance,
        chroma_exceeds_luma: setup.chroma_mask.density() > setup.luma_mask.density(),
        search_tolerance: solver.residual_tol,
        decode_converged,
    };
    Ok(Encoded { bytes, setup, report })
}

/// Full encoder: finds the base quality, masks and parameters giving the
/// best PSNR within the byte budget of `target`.
pub fn optimize_for_ratio(rgb: &RgbImage, target: &RatioTarget, cfg: &OptimizeConfig) -> Result<Encoded> {
    let prep = prepare(rgb, target.target_ratio, cfg)?;
    optimize_prepared(&prep, target, cfg)
}
