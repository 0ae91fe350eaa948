//! The path-collapsed Gaussian mixture view of a DMFA model.
//!
//! Every path `(k_1, …, k_L)` through the layers defines one Gaussian
//! component of the observed-data density. Marginals are built from the top
//! layer down: `z^(L) ~ N(0, I)` and each layer maps a Gaussian `N(m, S)`
//! to `N(μ + B m, B S Bᵀ + δ)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::gaussian::Mvn;
use super::params::DmfaParams;
use crate::arch::Architecture;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::special::log_sum_exp;

/// A choice of one component per layer, zero-based.
pub type PathIndex = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub path: PathIndex,
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Collapses the layers `from..L` into the Gaussian mixture followed by
/// `z^(from)`. Paths are ordered lexicographically with the shallowest layer
/// varying slowest.
pub fn collapse_from(params: &DmfaParams, from: usize) -> Vec<GmmComponent> {
    let layers = &params.layers;
    let top_dim = match layers.last() {
        Some(last) => last.components[0].loadings.ncols(),
        None => return Vec::new(),
    };
    let mut deeper = vec![GmmComponent {
        path: Vec::new(),
        weight: 1.0,
        mean: DVector::zeros(top_dim),
        cov: DMatrix::identity(top_dim, top_dim),
    }];
    for layer in layers[from..].iter().rev() {
        let mut next = Vec::with_capacity(deeper.len() * layer.components.len());
        for (k, comp) in layer.components.iter().enumerate() {
            let b = &comp.loadings;
            for d in &deeper {
                let mut path = Vec::with_capacity(d.path.len() + 1);
                path.push(k);
                path.extend_from_slice(&d.path);
                let mean = &comp.mean + b * &d.mean;
                let mut cov = b * &d.cov * b.transpose();
                for j in 0..cov.nrows() {
                    cov[(j, j)] += comp.noise[j];
                }
                next.push(GmmComponent {
                    path,
                    weight: layer.weights[k] * d.weight,
                    mean,
                    cov,
                });
            }
        }
        deeper = next;
    }
    deeper
}

/// All `∏ K[l]` components of the observed-data mixture.
pub fn collapse_to_gmm(arch: &Architecture, params: &DmfaParams) -> Result<Vec<GmmComponent>> {
    params.validate(arch)?;
    Ok(collapse_from(params, 0))
}

/// A collapsed mixture with factorized covariances, ready for repeated
/// density evaluation.
#[derive(Debug, Clone)]
pub struct CollapsedGmm {
    first_layer_components: usize,
    log_weights: Vec<f64>,
    paths: Vec<PathIndex>,
    dists: Vec<Mvn>,
}

impl CollapsedGmm {
    pub fn new(arch: &Architecture, params: &DmfaParams) -> Result<Self> {
        let comps = collapse_to_gmm(arch, params)?;
        Self::from_components(arch.components[0], comps)
    }

    pub(crate) fn from_components(
        first_layer_components: usize,
        comps: Vec<GmmComponent>,
    ) -> Result<Self> {
        let mut log_weights = Vec::with_capacity(comps.len());
        let mut paths = Vec::with_capacity(comps.len());
        let mut dists = Vec::with_capacity(comps.len());
        for c in comps {
            let mvn = Mvn::new(c.mean, c.cov).ok_or_else(|| Error::SingularCovariance {
                path: c.path.clone(),
            })?;
            log_weights.push(c.weight.ln());
            paths.push(c.path);
            dists.push(mvn);
        }
        Ok(CollapsedGmm {
            first_layer_components,
            log_weights,
            paths,
            dists,
        })
    }

    pub fn paths(&self) -> &[PathIndex] {
        &self.paths
    }

    /// `log p_path + log φ(y; μ(path), Σ(path))` for every path.
    pub fn joint_log_terms(&self, y: &DVector<f64>) -> Vec<f64> {
        self.log_weights
            .iter()
            .zip(&self.dists)
            .map(|(lw, d)| lw + d.log_pdf(y))
            .collect()
    }

    pub fn log_density(&self, y: &DVector<f64>) -> f64 {
        log_sum_exp(&self.joint_log_terms(y))
    }

    /// `log(p_k · p(y | γ_k = 1))` for each first-layer component `k`.
    pub fn cluster_log_scores(&self, y: &DVector<f64>) -> Vec<f64> {
        let terms = self.joint_log_terms(y);
        let mut grouped = vec![Vec::new(); self.first_layer_components];
        for (t, path) in terms.into_iter().zip(&self.paths) {
            grouped[path[0]].push(t);
        }
        grouped.iter().map(|g| log_sum_exp(g)).collect()
    }
}

pub fn log_density(y: &DVector<f64>, arch: &Architecture, params: &DmfaParams) -> Result<f64> {
    check_dim(y, arch)?;
    Ok(CollapsedGmm::new(arch, params)?.log_density(y))
}

/// Per-cluster scores `p_k · p(y | β, γ_k = 1)` on the natural scale.
pub fn cluster_scores(
    y: &DVector<f64>,
    arch: &Architecture,
    params: &DmfaParams,
) -> Result<Vec<f64>> {
    check_dim(y, arch)?;
    let gmm = CollapsedGmm::new(arch, params)?;
    Ok(gmm
        .cluster_log_scores(y)
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// One-based first-layer cluster labels for every row.
pub fn assign_clusters(
    data: &Dataset,
    arch: &Architecture,
    params: &DmfaParams,
) -> Result<Vec<usize>> {
    if data.dim() != arch.observed_dim() {
        return Err(Error::Dimension {
            expected: arch.observed_dim(),
            got: data.dim(),
            context: "observed dimension",
        });
    }
    let gmm = CollapsedGmm::new(arch, params)?;
    Ok((0..data.n())
        .into_par_iter()
        .map(|i| argmax_lowest(&gmm.cluster_log_scores(&data.row(i))) + 1)
        .collect())
}

fn check_dim(y: &DVector<f64>, arch: &Architecture) -> Result<()> {
    if y.len() != arch.observed_dim() {
        return Err(Error::Dimension {
            expected: arch.observed_dim(),
            got: y.len(),
            context: "observation length",
        });
    }
    Ok(())
}
