//! Generative model, collapsed mixture representation, densities and the
//! first-layer clustering rule.

mod gaussian;
mod gmm;
mod params;
mod sample;

pub use gaussian::Mvn;
pub use gmm::{
    argmax_lowest, assign_clusters, cluster_scores, collapse_from, collapse_to_gmm, log_density,
    CollapsedGmm, GmmComponent, PathIndex,
};
pub use params::{ComponentParams, DmfaParams, LayerParams};
pub use sample::{random_params, sample_dataset, LatentRecord};
