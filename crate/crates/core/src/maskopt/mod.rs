//! Choosing which blocks to keep and the diffusion parameters.

mod nlbe;
mod problem;
mod ratio;
mod search;
mod sparsify;

pub use nlbe::{nlbe, nlbe_with, NlbeConfig, NlbeOutcome};
pub use problem::{block_local_error, group_mse, ChannelGroup, GroupProblem, GroupRecon};
pub use ratio::{
    optimize_for_ratio, optimize_prepared, prepare, Encoded, OptimizationReport, OptimizeConfig, Prepared,
    QualityPaths, RatioTarget, StageRecord,
};
pub use search::{
    golden_section, optimize_group_params, GoldenSearch, ParamSearch, ParamSearchConfig, LAMBDA_RANGE, SIGMA_RANGE,
};
pub use sparsify::{sparsify, sparsify_from, target_count, SparsifyConfig, SparsifyRound, SparsifyTrace};
