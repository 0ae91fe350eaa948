//! Natural gradients of the ELBO with respect to the global factors.
//!
//! For a conjugate factor with natural parameters `η` and coordinate-ascent
//! target `η*`, the natural gradient is `η* − η`. The Euclidean gradient in
//! any other parameterization follows by pulling back through the Fisher
//! information.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::variational::{
    local_step, update_global_factor, Factor, FactorId, GlobalFactors, LocalFactors,
    PriorHyperparams, SufficientStats,
};

use super::config::FitConfig;

/// Natural-gradient increment per global factor, in `factor_ids` order.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalGradient {
    pub entries: Vec<(FactorId, Vec<f64>)>,
}

impl NaturalGradient {
    pub fn get(&self, id: FactorId) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(i, _)| *i == id)
            .map(|(_, v)| v.as_slice())
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|(_, v)| v.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Concatenated increments per (layer, factor kind) group.
    pub fn by_group(&self) -> BTreeMap<(usize, usize), Vec<f64>> {
        let mut out: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for (id, v) in &self.entries {
            out.entry(group_key(*id)).or_default().extend_from_slice(v);
        }
        out
    }
}

pub(crate) fn group_key(id: FactorId) -> (usize, usize) {
    (id.layer(), id.kind().index())
}

/// Uniform sample of `batch_size(n)` row indices without replacement, in
/// increasing order.
pub fn draw_minibatch<R: Rng + ?Sized>(n: usize, config: &FitConfig, rng: &mut R) -> Vec<usize> {
    let m = config.batch_size(n);
    let mut idx = index::sample(rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Refreshes the local factors of the selected rows and accumulates their
/// moments with weight `n / |A|`.
pub fn minibatch_stats(
    data: &Dataset,
    g: &GlobalFactors,
    batch: &[usize],
) -> Result<(SufficientStats, LocalFactors)> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty minibatch".into()));
    }
    let rows: Vec<DVector<f64>> = batch.iter().map(|&i| data.row(i)).collect();
    let refs: Vec<&DVector<f64>> = rows.iter().collect();
    let locals = local_step(&refs, g)?;
    let scale = data.n() as f64 / batch.len() as f64;
    let stats = SufficientStats::from_rows(&g.architecture(), rows.iter().zip(&locals), scale);
    Ok((stats, locals))
}

/// `η*(stats) − η` for every global factor, all targets computed from the
/// same snapshot `g`.
pub fn gradient_from_stats(
    stats: &SufficientStats,
    prior: &PriorHyperparams,
    g: &GlobalFactors,
) -> NaturalGradient {
    let entries = g
        .factor_ids()
        .into_iter()
        .map(|id| {
            let target = update_global_factor(id, stats, prior, g).natural();
            let current = g.get(id).natural();
            (
                id,
                target.iter().zip(&current).map(|(t, c)| t - c).collect(),
            )
        })
        .collect();
    NaturalGradient { entries }
}

/// Unbiased natural-gradient estimate from the rows in `batch`.
pub fn estimate_gradient(
    data: &Dataset,
    prior: &PriorHyperparams,
    g: &GlobalFactors,
    batch: &[usize],
) -> Result<NaturalGradient> {
    let (stats, _) = minibatch_stats(data, g, batch)?;
    Ok(gradient_from_stats(&stats, prior, g))
}

/// Fisher information of a factor in its stored parameterization.
pub fn fisher_block(factor: &Factor) -> Result<DMatrix<f64>> {
    if !factor.is_valid() {
        return Err(Error::Invalid(format!(
            "degenerate {:?} factor",
            factor.family()
        )));
    }
    let f = factor.fisher();
    if f.clone().cholesky().is_none() {
        return Err(Error::Invalid(format!(
            "singular Fisher information for {:?} factor",
            factor.family()
        )));
    }
    Ok(f)
}

/// Euclidean ELBO gradient with respect to the stored parameters of one
/// factor, `I_θ J⁻¹ (η* − η)`, holding locals (through `stats`) fixed.
pub fn elbo_gradient_stored(
    id: FactorId,
    stats: &SufficientStats,
    prior: &PriorHyperparams,
    g: &GlobalFactors,
) -> Vec<f64> {
    let f = g.get(id);
    let target = DVector::from_vec(update_global_factor(id, stats, prior, g).natural());
    let diff = target - DVector::from_vec(f.natural());
    let jac = f.natural_jacobian();
    let step = jac
        .lu()
        .solve(&diff)
        .expect("natural parameterization is a diffeomorphism");
    (f.fisher() * step).iter().copied().collect()
}

/// ELBO gradient with respect to the unconstrained parameters of one factor:
/// stored coordinates, with positive ones replaced by their logarithm.
pub fn elbo_gradient_unconstrained(
    id: FactorId,
    stats: &SufficientStats,
    prior: &PriorHyperparams,
    g: &GlobalFactors,
) -> Vec<f64> {
    let f = g.get(id);
    let theta = f.stored();
    elbo_gradient_stored(id, stats, prior, g)
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if f.is_positive_coordinate(i) {
                d * theta[i]
            } else {
                d
            }
        })
        .collect()
}
