//! The nested local/global stochastic optimization loop.

use std::time::Instant;

use nalgebra::DVector;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use super::gradient::{draw_minibatch, gradient_from_stats, group_key, minibatch_stats};
use super::step::StepState;
use crate::arch::Architecture;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::DmfaParams;
use crate::variational::{
    elbo, init_variational, local_step, update_global_factor, ElboBreakdown, GlobalFactors,
    LocalFactors, PointSummary, PriorHyperparams, SufficientStats,
};

/// Stream of the minibatch generator; initialization uses stream 0.
const MINIBATCH_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Minibatch ELBO estimate at the start of the iteration.
    pub elbo: f64,
    /// Mean step size over factor groups.
    pub step: f64,
    /// Wall-clock seconds since the fit started.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
    /// Factor updates rejected because they left the valid domain.
    pub rejected_updates: usize,
}

impl FitTrace {
    pub fn elbo_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.elbo).collect()
    }
}

/// Position of the minibatch generator when the fit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Point estimate: Gaussian and Dirichlet means, inverse-gamma modes.
    pub params: DmfaParams,
    pub global: GlobalFactors,
    /// Local factors of every row against the final `λ_G`.
    pub locals: LocalFactors,
    pub trace: FitTrace,
    /// Full-data ELBO at the final state.
    pub elbo: ElboBreakdown,
    pub rng: RngState,
}

/// Full-data local step followed by the closed-form ELBO.
pub fn full_elbo(
    data: &Dataset,
    prior: &PriorHyperparams,
    g: &GlobalFactors,
) -> Result<(ElboBreakdown, LocalFactors, SufficientStats)> {
    let rows = data.rows();
    let refs: Vec<&DVector<f64>> = rows.iter().collect();
    let locals = local_step(&refs, g)?;
    let stats = SufficientStats::from_rows(&g.architecture(), rows.iter().zip(&locals), 1.0);
    Ok((elbo(&stats, prior, g)?, locals, stats))
}

/// Initializes from the data and runs the optimizer.
pub fn fit(
    data: &Dataset,
    arch: &Architecture,
    prior: &PriorHyperparams,
    config: &FitConfig,
) -> Result<FitResult> {
    arch.validate(false)?;
    let (global, _) = init_variational(arch, data, prior, config.seed)?;
    fit_from(data, prior, config, global)
}

/// Runs the optimizer from a given global state.
pub fn fit_from(
    data: &Dataset,
    prior: &PriorHyperparams,
    config: &FitConfig,
    mut g: GlobalFactors,
) -> Result<FitResult> {
    config.validate()?;
    let n = data.n();
    if n == 0 {
        return Err(Error::TooFewObservations { n, needed: 1 });
    }
    let arch = g.architecture();
    prior.validate(&arch)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(MINIBATCH_STREAM);
    let mut steps = StepState::new(config.step_rule);
    let mut trace = FitTrace::default();
    let ids = g.factor_ids();
    let full: Vec<usize> = (0..n).collect();

    for t in 1..=config.max_iterations {
        let batch = if config.batch_size(n) == n {
            full.clone()
        } else {
            draw_minibatch(n, config, &mut rng)
        };
        let (stats, _) = minibatch_stats(data, &g, &batch)?;
        let estimate = match elbo(&stats, prior, &g) {
            Ok(e) => e.total,
            Err(_) => {
                trace.iterations = t;
                return Err(Error::Diverged {
                    iteration: t,
                    trace: Box::new(trace),
                });
            }
        };
        let grad = gradient_from_stats(&stats, prior, &g);
        let group_steps = steps.next(&grad, t, batch.len() == n);

        for &id in &ids {
            let a = group_steps[&group_key(id)];
            let target = update_global_factor(id, &stats, prior, &g);
            let next = if a == 1.0 {
                target
            } else {
                let current = g.get(id);
                let eta: Vec<f64> = current
                    .natural()
                    .iter()
                    .zip(target.natural())
                    .map(|(c, t)| c + a * (t - c))
                    .collect();
                current.with_natural(&eta)
            };
            if next.is_valid() {
                g.set(id, next);
            } else {
                trace.rejected_updates += 1;
            }
        }

        trace.iterations = t;
        if t % config.elbo_record_stride == 0 {
            let mean_step = group_steps.values().sum::<f64>() / group_steps.len() as f64;
            trace.records.push(TraceRecord {
                iter: t,
                elbo: estimate,
                step: mean_step,
                seconds: start.elapsed().as_secs_f64(),
            });
            if let Some(c) = config.convergence {
                if has_converged(&trace.records, c.window, c.tolerance) {
                    trace.converged = true;
                    break;
                }
            }
        }
    }

    let (final_elbo, locals, _) = full_elbo(data, prior, &g)?;
    Ok(FitResult {
        params: g.point_estimate(PointSummary::Mode),
        global: g,
        locals,
        trace,
        elbo: final_elbo,
        rng: RngState {
            seed: config.seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        },
    })
}

fn has_converged(records: &[TraceRecord], window: usize, tol: f64) -> bool {
    if records.len() < window {
        return false;
    }
    let tail = &records[records.len() - window..];
    let half = window / 2;
    let mean = |r: &[TraceRecord]| r.iter().map(|x| x.elbo).sum::<f64>() / r.len() as f64;
    let (a, b) = (mean(&tail[..half]), mean(&tail[half..]));
    (b - a).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
