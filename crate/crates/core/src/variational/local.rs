//! Approximate optimization of the per-observation factors.
//!
//! For each row the global parameters are fixed at their variational means.
//! Layer by layer, the most likely component is chosen with the first-layer
//! clustering rule applied to the current latent mean, and `q(z^(l))` is set
//! from Gaussian conditioning on that mean, using the collapsed marginal of
//! the most likely deeper path as prior. One pass, no inner iteration.
//! Responsibilities are then the exact mean-field update for `q(γ)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::factors::{ComponentFactors, GlobalFactors, LayerLocal, PointSummary, RowLocal};
use crate::error::{Error, Result};
use crate::model::{argmax_lowest, collapse_from, CollapsedGmm};
use crate::special::{log_sum_exp, LN_2PI};

/// Smallest variance assigned to a local Gaussian factor.
pub const LOCAL_VARIANCE_FLOOR: f64 = 1e-12;

/// Affine map from the layer input to the mean of `q(z)`, together with the
/// mean-field variances, for one (component, deeper path) pair.
#[derive(Debug, Clone)]
struct Conditional {
    gain: DMatrix<f64>,
    offset: DVector<f64>,
    var: DVector<f64>,
}

#[derive(Debug, Clone)]
struct LayerContext {
    scorer: CollapsedGmm,
    n_deeper: usize,
    /// indexed by `k * n_deeper + d`
    conditionals: Vec<Conditional>,
}

/// Everything the local step needs from a frozen `λ_G`.
#[derive(Debug, Clone)]
pub struct LocalContext {
    layers: Vec<LayerContext>,
}

impl LocalContext {
    pub fn new(g: &GlobalFactors) -> Result<Self> {
        let params = g.point_estimate(PointSummary::Mean);
        let n_layers = params.layers.len();
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let k_l = params.layers[l].components.len();
            let scorer = CollapsedGmm::from_components(k_l, collapse_from(&params, l))?;
            let deeper = collapse_from(&params, l + 1);
            let n_deeper = deeper.len();
            let mut conditionals = Vec::with_capacity(k_l * n_deeper);
            for comp in &params.layers[l].components {
                let b = &comp.loadings;
                let inv_noise = comp.noise.map(|v| 1.0 / v);
                let bt_dinv = b.transpose() * DMatrix::from_diagonal(&inv_noise);
                let bt_dinv_b = &bt_dinv * b;
                for d in &deeper {
                    let prior_prec =
                        d.cov
                            .clone()
                            .try_inverse()
                            .ok_or_else(|| Error::SingularCovariance {
                                path: d.path.clone(),
                            })?;
                    let prec = &prior_prec + &bt_dinv_b;
                    let cov =
                        prec.clone()
                            .try_inverse()
                            .ok_or_else(|| Error::SingularCovariance {
                                path: d.path.clone(),
                            })?;
                    let gain = &cov * &bt_dinv;
                    let offset = &cov * (&prior_prec * &d.mean) - &gain * &comp.mean;
                    let var = prec.diagonal().map(|p| (1.0 / p).max(LOCAL_VARIANCE_FLOOR));
                    conditionals.push(Conditional { gain, offset, var });
                }
            }
            layers.push(LayerContext {
                scorer,
                n_deeper,
                conditionals,
            });
        }
        Ok(LocalContext { layers })
    }

    /// Latent means, variances and hard path of one observation; the
    /// responsibilities are left one-hot on the chosen path.
    pub fn propagate(&self, y: &DVector<f64>) -> RowLocal {
        let mut x = y.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for lc in &self.layers {
            let terms = lc.scorer.joint_log_terms(&x);
            let k_l = terms.len() / lc.n_deeper;
            let scores: Vec<f64> = terms.chunks(lc.n_deeper).map(log_sum_exp).collect();
            let k = argmax_lowest(&scores);
            let d = argmax_lowest(&terms[k * lc.n_deeper..(k + 1) * lc.n_deeper]);
            let cond = &lc.conditionals[k * lc.n_deeper + d];
            let z_mean = &cond.gain * &x + &cond.offset;
            let mut resp = vec![0.0; k_l];
            resp[k] = 1.0;
            out.push(LayerLocal {
                z_mean: z_mean.clone(),
                z_var: cond.var.clone(),
                resp,
                path_choice: k,
            });
            x = z_mean;
        }
        RowLocal { layers: out }
    }
}

/// `E[log N(x; μ_k + B_k z, δ_k)]` for one row under the full factors.
pub(crate) fn expected_row_log_lik(
    c: &ComponentFactors,
    x: &DVector<f64>,
    x_var: Option<&DVector<f64>>,
    z_mean: &DVector<f64>,
    z_var: &DVector<f64>,
) -> f64 {
    let dp = c.input_dim();
    let dl = z_mean.len();
    let mut total = 0.0;
    for j in 0..dp {
        let mu = &c.mean[j];
        let mut pred = mu.mean;
        let mut extra = mu.var + x_var.map_or(0.0, |v| v[j]);
        for r in 0..dl {
            let b = &c.loadings[j + r * dp];
            pred += b.mean * z_mean[r];
            let mz2 = z_mean[r] * z_mean[r];
            extra += b.second_moment() * (mz2 + z_var[r]) - b.mean * b.mean * mz2;
        }
        let resid = x[j] - pred;
        let delta = &c.noise[j];
        total +=
            -0.5 * (LN_2PI + delta.mean_log()) - 0.5 * delta.mean_inv() * (resid * resid + extra);
    }
    total
}

/// Mean-field update of `q(γ_i^(l))` for every layer of one row, given its
/// `q(z)` factors.
pub fn update_local_categorical(y: &DVector<f64>, g: &GlobalFactors, local: &mut RowLocal) {
    for l in 0..g.layers.len() {
        let lf = &g.layers[l];
        let elog_p = lf.weights.mean_log();
        let logits: Vec<f64> = {
            let (x, xv) = if l == 0 {
                (y, None)
            } else {
                (
                    &local.layers[l - 1].z_mean,
                    Some(&local.layers[l - 1].z_var),
                )
            };
            let ll = &local.layers[l];
            lf.components
                .iter()
                .zip(&elog_p)
                .map(|(c, lp)| lp + expected_row_log_lik(c, x, xv, &ll.z_mean, &ll.z_var))
                .collect()
        };
        let norm = log_sum_exp(&logits);
        local.layers[l].resp = logits.iter().map(|v| (v - norm).exp()).collect();
    }
}

/// Local factors for a set of observation rows against a frozen `λ_G`.
pub fn local_step(rows: &[&DVector<f64>], g: &GlobalFactors) -> Result<Vec<RowLocal>> {
    let ctx = LocalContext::new(g)?;
    Ok(local_step_with(&ctx, rows, g))
}

pub(crate) fn local_step_with(
    ctx: &LocalContext,
    rows: &[&DVector<f64>],
    g: &GlobalFactors,
) -> Vec<RowLocal> {
    rows.par_iter()
        .map(|y| {
            let mut local = ctx.propagate(y);
            update_local_categorical(y, g, &mut local);
            local
        })
        .collect()
}
