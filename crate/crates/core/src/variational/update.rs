//! Exact coordinate-ascent updates for the global factors.
//!
//! Each update returns `q*(x) ∝ exp(E_{q(−x)}[log p(y, θ)])`, which stays in
//! the factor's own family because every complete conditional is conjugate.

use super::factors::{FactorId, GlobalFactors};
use super::families::{DirichletFactor, Factor, GammaFactor, GaussianFactor, InvGammaFactor};
use super::prior::PriorHyperparams;
use super::stats::SufficientStats;

/// CAVI target for the factor `id` with every other factor held at its
/// current value in `g`.
pub fn update_global_factor(
    id: FactorId,
    stats: &SufficientStats,
    prior: &PriorHyperparams,
    g: &GlobalFactors,
) -> Factor {
    let l = id.layer();
    match id {
        FactorId::Weights { layer } => {
            let alpha = prior.concentration[layer]
                .iter()
                .zip(&stats.layers[layer])
                .map(|(rho, cs)| rho + cs.weight)
                .collect();
            Factor::Dirichlet(DirichletFactor::new(alpha))
        }
        FactorId::Mean { comp, j, .. } => {
            let c = &g.layers[l].components[comp];
            let cs = &stats.layers[l][comp];
            let inv_delta = c.noise[j].mean_inv();
            let precision =
                c.mean_scale[j].mean_inv() / prior.cauchy_scale[l] + cs.weight * inv_delta;
            let mut resid = cs.sx[j];
            for r in 0..c.latent_dim() {
                resid -= c.loading(j, r).mean * cs.sz[r];
            }
            Factor::Gaussian(GaussianFactor::from_precision(precision, inv_delta * resid))
        }
        FactorId::Loading { comp, entry, .. } => {
            let c = &g.layers[l].components[comp];
            let cs = &stats.layers[l][comp];
            let dp = c.input_dim();
            let (j, r) = (entry % dp, entry / dp);
            let inv_delta = c.noise[j].mean_inv();
            let shrink = c.local_shrink[entry].mean() * c.global_shrink.mean_inv();
            let precision = shrink + inv_delta * cs.szz[(r, r)];
            let mut resid = cs.sxz[(j, r)] - c.mean[j].mean * cs.sz[r];
            for s in 0..c.latent_dim() {
                if s != r {
                    resid -= c.loading(j, s).mean * cs.szz[(r, s)];
                }
            }
            Factor::Gaussian(GaussianFactor::from_precision(precision, inv_delta * resid))
        }
        FactorId::Noise { comp, j, .. } => {
            let c = &g.layers[l].components[comp];
            let cs = &stats.layers[l][comp];
            let shape = 0.5 + 0.5 * cs.weight;
            let scale = c.noise_aux[j].mean_inv() + 0.5 * cs.expected_sq_residual(c, j);
            Factor::InverseGamma(InvGammaFactor::new(shape, scale))
        }
        FactorId::NoiseAux { comp, j, .. } => {
            let c = &g.layers[l].components[comp];
            let scale = prior.noise_scale[l].powi(-2) + c.noise[j].mean_inv();
            Factor::InverseGamma(InvGammaFactor::new(1.0, scale))
        }
        FactorId::MeanScale { comp, j, .. } => {
            let c = &g.layers[l].components[comp];
            let scale = 0.5 + 0.5 * c.mean[j].second_moment() / prior.cauchy_scale[l];
            Factor::InverseGamma(InvGammaFactor::new(1.0, scale))
        }
        FactorId::LocalShrink { comp, entry, .. } => {
            let c = &g.layers[l].components[comp];
            let rate = c.local_shrink_aux[entry].mean()
                + 0.5 * c.loadings[entry].second_moment() * c.global_shrink.mean_inv();
            Factor::Gamma(GammaFactor::new(1.0, rate))
        }
        FactorId::LocalShrinkAux { comp, entry, .. } => {
            let c = &g.layers[l].components[comp];
            Factor::Gamma(GammaFactor::new(1.0, 1.0 + c.local_shrink[entry].mean()))
        }
        FactorId::GlobalShrink { comp, .. } => {
            let c = &g.layers[l].components[comp];
            let kappa = c.loadings.len() as f64;
            let sum: f64 = c
                .loadings
                .iter()
                .zip(&c.local_shrink)
                .map(|(b, h)| h.mean() * b.second_moment())
                .sum();
            let shape = 0.5 + 0.5 * kappa;
            let scale = c.global_shrink_aux.mean_inv() + 0.5 * sum;
            Factor::InverseGamma(InvGammaFactor::new(shape, scale))
        }
        FactorId::GlobalShrinkAux { comp, .. } => {
            let c = &g.layers[l].components[comp];
            let scale = prior.global_shrinkage[l].powi(-2) + c.global_shrink.mean_inv();
            Factor::InverseGamma(InvGammaFactor::new(1.0, scale))
        }
    }
}

/// One full coordinate-ascent sweep over all global factors in
/// [`GlobalFactors::factor_ids`] order.
pub fn cavi_sweep(stats: &SufficientStats, prior: &PriorHyperparams, g: &mut GlobalFactors) {
    for id in g.factor_ids() {
        let f = update_global_factor(id, stats, prior, g);
        g.set(id, f);
    }
}

/// Updates only the scale auxiliaries (`g`, `ψ`, `h`, `c`, `τ`, `ξ`),
/// which do not depend on the data.
pub(crate) fn hyper_sweep(
    stats: &SufficientStats,
    prior: &PriorHyperparams,
    g: &mut GlobalFactors,
) {
    use super::factors::FactorKind::*;
    for id in g.factor_ids() {
        if matches!(
            id.kind(),
            MeanScale | NoiseAux | LocalShrink | LocalShrinkAux | GlobalShrink | GlobalShrinkAux
        ) {
            let f = update_global_factor(id, stats, prior, g);
            g.set(id, f);
        }
    }
}
