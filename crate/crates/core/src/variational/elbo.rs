//! Closed-form evidence lower bound.
//!
//! The bound splits into a global part (priors and entropies of `λ_G`) and a
//! sum of per-observation parts that enter only through
//! [`SufficientStats`]. Evaluating with statistics accumulated on a minibatch
//! with weight `n/|A|` gives the unbiased estimate `𝓛^F + (n/|A|) Σ_{i∈A} 𝓛^i`.

use serde::{Deserialize, Serialize};

use super::factors::{ComponentFactors, FactorId, GlobalFactors};
use super::families::{DirichletFactor, GammaFactor, InvGammaFactor};
use super::prior::PriorHyperparams;
use super::stats::SufficientStats;
use crate::error::{Error, Result};
use crate::special::LN_2PI;

/// ELBO split into its expected-log-joint and entropy parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboBreakdown {
    /// `E[log p(z^(l-1) | z^(l), γ, β)]` summed over layers and rows.
    pub likelihood: f64,
    /// `E[log p(γ | p)]`.
    pub assignment: f64,
    /// `E[log N(z^(L); 0, I)]`.
    pub latent_prior: f64,
    /// Entropy of the local factors.
    pub local_entropy: f64,
    /// Expected log prior density of all global unknowns.
    pub global_log_prior: f64,
    /// Entropy of the global factors.
    pub global_entropy: f64,
    pub total: f64,
}

impl ElboBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.likelihood
            + self.assignment
            + self.latent_prior
            + self.local_entropy
            + self.global_log_prior
            + self.global_entropy;
        self
    }

    /// Terms that do not involve any local factor.
    pub fn global_part(&self) -> f64 {
        self.global_log_prior + self.global_entropy
    }
}

const HALF: f64 = 0.5;

/// Expected log prior and entropy contribution of one global factor,
/// `E[log p(x | parents)] − E[log q(x)]`.
pub fn factor_contribution(
    id: FactorId,
    prior: &PriorHyperparams,
    g: &GlobalFactors,
) -> (f64, f64) {
    let l = id.layer();
    let comp = |k: usize| &g.layers[l].components[k];
    match id {
        FactorId::Weights { layer } => {
            let q = &g.layers[layer].weights;
            let rho = &prior.concentration[layer];
            let elog = q.mean_log();
            let lp = -DirichletFactor::log_normalizer(rho)
                + rho
                    .iter()
                    .zip(&elog)
                    .map(|(r, e)| (r - 1.0) * e)
                    .sum::<f64>();
            (lp, q.entropy())
        }
        FactorId::Mean { comp: k, j, .. } => {
            let c = comp(k);
            let (mu, gs) = (&c.mean[j], &c.mean_scale[j]);
            let big_g = prior.cauchy_scale[l];
            let lp = -0.5 * (LN_2PI + big_g.ln() + gs.mean_log())
                - 0.5 * mu.second_moment() * gs.mean_inv() / big_g;
            (lp, mu.entropy())
        }
        FactorId::MeanScale { comp: k, j, .. } => {
            let q = &comp(k).mean_scale[j];
            (
                InvGammaFactor::expected_log_density(HALF, HALF.ln(), HALF, q),
                q.entropy(),
            )
        }
        FactorId::Loading { comp: k, entry, .. } => {
            let c = comp(k);
            let (b, h, tau) = (&c.loadings[entry], &c.local_shrink[entry], &c.global_shrink);
            let lp = -0.5 * (LN_2PI + tau.mean_log() - h.mean_log())
                - 0.5 * h.mean() * tau.mean_inv() * b.second_moment();
            (lp, b.entropy())
        }
        FactorId::LocalShrink { comp: k, entry, .. } => {
            let c = comp(k);
            let (h, aux) = (&c.local_shrink[entry], &c.local_shrink_aux[entry]);
            (
                GammaFactor::expected_log_density(HALF, aux.mean_log(), aux.mean(), h),
                h.entropy(),
            )
        }
        FactorId::LocalShrinkAux { comp: k, entry, .. } => {
            let q = &comp(k).local_shrink_aux[entry];
            (
                GammaFactor::expected_log_density(HALF, 0.0, 1.0, q),
                q.entropy(),
            )
        }
        FactorId::GlobalShrink { comp: k, .. } => {
            let c = comp(k);
            // τ ~ IG(1/2, 1/ξ)
            let xi = &c.global_shrink_aux;
            let lp = InvGammaFactor::expected_log_density(
                HALF,
                -xi.mean_log(),
                xi.mean_inv(),
                &c.global_shrink,
            );
            (lp, c.global_shrink.entropy())
        }
        FactorId::GlobalShrinkAux { comp: k, .. } => {
            let q = &comp(k).global_shrink_aux;
            let s = 1.0 / prior.global_shrinkage[l].powi(2);
            (
                InvGammaFactor::expected_log_density(HALF, s.ln(), s, q),
                q.entropy(),
            )
        }
        FactorId::Noise { comp: k, j, .. } => {
            let c = comp(k);
            let psi = &c.noise_aux[j];
            let lp = InvGammaFactor::expected_log_density(
                HALF,
                -psi.mean_log(),
                psi.mean_inv(),
                &c.noise[j],
            );
            (lp, c.noise[j].entropy())
        }
        FactorId::NoiseAux { comp: k, j, .. } => {
            let q = &comp(k).noise_aux[j];
            let s = 1.0 / prior.noise_scale[l].powi(2);
            (
                InvGammaFactor::expected_log_density(HALF, s.ln(), s, q),
                q.entropy(),
            )
        }
    }
}

/// `Σ_i r_ik E[log N(x_ij; μ_kj + b_kjᵀ z_i, δ_kj)]` summed over coordinates.
pub(crate) fn component_likelihood(
    stats: &super::stats::ComponentStats,
    c: &ComponentFactors,
) -> f64 {
    (0..c.input_dim())
        .map(|j| {
            let delta = &c.noise[j];
            -0.5 * stats.weight * (LN_2PI + delta.mean_log())
                - 0.5 * delta.mean_inv() * stats.expected_sq_residual(c, j)
        })
        .sum()
}

/// Closed-form ELBO for the factors `g` and local moments `stats`.
pub fn elbo(
    stats: &SufficientStats,
    prior: &PriorHyperparams,
    g: &GlobalFactors,
) -> Result<ElboBreakdown> {
    let mut out = ElboBreakdown {
        likelihood: 0.0,
        assignment: 0.0,
        latent_prior: stats.latent_prior,
        local_entropy: stats.local_entropy,
        global_log_prior: 0.0,
        global_entropy: 0.0,
        total: 0.0,
    };
    for (l, lf) in g.layers.iter().enumerate() {
        let elog_p = lf.weights.mean_log();
        for (k, c) in lf.components.iter().enumerate() {
            let cs = &stats.layers[l][k];
            let lik = component_likelihood(cs, c);
            let asg = cs.weight * elog_p[k];
            if !lik.is_finite() || !asg.is_finite() {
                return Err(Error::NonFiniteElbo {
                    factor: format!("likelihood of layer {} component {}", l + 1, k + 1),
                });
            }
            out.likelihood += lik;
            out.assignment += asg;
        }
    }
    for id in g.factor_ids() {
        let (lp, ent) = factor_contribution(id, prior, g);
        if !lp.is_finite() || !ent.is_finite() {
            return Err(Error::NonFiniteElbo {
                factor: id.to_string(),
            });
        }
        out.global_log_prior += lp;
        out.global_entropy += ent;
    }
    if !out.latent_prior.is_finite() || !out.local_entropy.is_finite() {
        return Err(Error::NonFiniteElbo {
            factor: "local factors".into(),
        });
    }
    Ok(out.finish())
}
