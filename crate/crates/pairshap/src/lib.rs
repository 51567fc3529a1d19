//! Model-agnostic Shapley-value attribution engine built around explicit
//! explicand pairs, with the standard feature-removal baselines and a
//! diagnostic suite (normalized attributions, monotonicity, dummy ratios,
//! perturbation tests, benchmarks) for comparing them.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod pairing;
pub mod shapley;
pub mod valuefn;

pub use data::{
    compute_stats, generate_synthetic, load_csv, standardize, write_csv, Dataset, FeatureKind,
    FeatureStats, SyntheticFeature, SyntheticSpec, SyntheticTarget,
};
pub use error::{Error, ErrorCategory, Result};
pub use model::{
    load_model, load_model_spec, ExternalConfig, ExternalPredictor, LinearModel, Link, ModelSpec,
    OutputKind, Predictor, Tree, TreeEnsemble, TreeNode,
};
pub use pairing::{
    select_pair, select_pairs_batch, similarity, ExplicandPair, MatchCondition, MatchMode, Metric,
    PairSelector, PairStrategy,
};
pub use shapley::{
    exact_shapley, explain_batch, explain_eval, explain_pair, kernelshap, prune_and_solve, solve,
    waterfall, ExplainRequest, Explanation, GameValues, PairInfo, SolverConfig, SolverMode,
    WaterfallRow,
};
pub use valuefn::{
    kmeans_summary, Coalition, ConditionalState, KmeansSummary, MethodConfig, RemovalMethod,
    ValueFnEval,
};
