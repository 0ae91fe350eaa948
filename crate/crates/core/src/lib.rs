//! Bayesian deep mixtures of factor analyzers.
//!
//! A deep mixture of factor analyzers stacks mixtures of factor analyzers:
//! the latent factors of one layer are themselves modelled by a mixture of
//! factor analyzers at the next. Collapsing all layers gives an ordinary
//! Gaussian mixture with one component per path through the layers, while
//! the parameter count stays small.
//!
//! Inference is mean-field variational Bayes with horseshoe shrinkage on the
//! loadings and half-Cauchy priors on the scales, optimized by stochastic
//! natural-gradient ascent over minibatches.
//!
//! ```
//! use dmfa::prelude::*;
//!
//! let arch: Architecture = "K=2;D=1".parse::<ArchSpec>()?.with_observed_dim(3)?;
//! let truth = random_params(&arch, 4);
//! let (data, _) = sample_dataset(&arch, &truth, 200, 9)?;
//! let prior = PriorHyperparams::known_components(&arch);
//! let config = FitConfig { max_iterations: 50, ..FitConfig::default() };
//! let fitted = fit(&data, &arch, &prior, &config)?;
//! let labels = assign_clusters(&data, &arch, &fitted.params)?;
//! assert_eq!(labels.len(), 200);
//! # Ok::<(), dmfa::Error>(())
//! ```

pub mod arch;
pub mod data;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod selection;
pub mod special;
pub mod variational;

pub use error::{Error, Result};

/// The most commonly used items.
pub mod prelude {
    pub use crate::arch::{ArchSpec, Architecture};
    pub use crate::dataset::Dataset;
    pub use crate::error::{Error, Result};
    pub use crate::metrics::{
        adjusted_mutual_information, adjusted_rand_index, misclassification_rate,
    };
    pub use crate::model::{
        assign_clusters, cluster_scores, collapse_to_gmm, log_density, random_params,
        sample_dataset, DmfaParams,
    };
    pub use crate::optim::{fit, FitConfig, FitResult};
    pub use crate::variational::PriorHyperparams;
}
