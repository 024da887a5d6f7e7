//! Dirichlet-process mixture machinery: the no-gaps Gibbs sampler over
//! a generic cluster model, the conditional vine copula model that
//! plugs into it, and posterior trace recording.

mod model;
mod sampler;
mod trace;

pub use model::{
    CenteringMeasure, CovariateParam, CovariatePrior, KernelMode, VineClusterParam,
    VineMixtureModel,
};
pub use sampler::{run_chain, sweep, ClusterModel, DpConfig, MixtureState};
pub use trace::{
    align_modal_records, predictive_draws, ClusterRecord, PosteriorTrace, TraceMeta, TraceRecord,
};
