//! Prior hierarchy, fully factorized variational family, closed-form ELBO,
//! conjugate coordinate updates and the local step.

mod elbo;
mod factors;
mod families;
mod init;
mod local;
mod prior;
mod stats;
mod update;

pub use elbo::{elbo, factor_contribution, ElboBreakdown};
pub use factors::{
    ComponentFactors, FactorId, FactorKind, GlobalFactors, LayerFactors, LayerLocal, LocalFactors,
    PointSummary, RowLocal,
};
pub use families::{DirichletFactor, Factor, Family, GammaFactor, GaussianFactor, InvGammaFactor};
pub use init::{init_variational, kmeans};
pub use local::{local_step, update_local_categorical, LocalContext, LOCAL_VARIANCE_FLOOR};
pub use prior::{PriorHyperparams, PriorSettings};
pub use stats::{ComponentStats, SufficientStats};
pub use update::{cavi_sweep, update_global_factor};
