//! Stochastic natural-gradient variational inference for the global factors.

mod checkpoint;
mod config;
mod fit;
mod gradient;
mod step;

pub use checkpoint::{read_trace_csv, write_trace_csv, Checkpoint, CHECKPOINT_VERSION};
pub use config::{Convergence, FitConfig, StepRule};
pub use fit::{fit, fit_from, full_elbo, FitResult, FitTrace, RngState, TraceRecord};
pub use gradient::{
    draw_minibatch, elbo_gradient_stored, elbo_gradient_unconstrained, estimate_gradient,
    fisher_block, gradient_from_stats, minibatch_stats, NaturalGradient,
};
pub use step::{adaptive_step, robbins_monro, StepState, MIN_STEP};
