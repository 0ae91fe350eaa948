//! Containers for the global and local variational factors.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::families::{
    DirichletFactor, Factor, Family, GammaFactor, GaussianFactor, InvGammaFactor,
};
use crate::arch::Architecture;
use crate::model::{ComponentParams, DmfaParams, LayerParams};

/// Factors of one mixture component. Loading-indexed vectors (`loadings`,
/// `local_shrink`, `local_shrink_aux`) use column-major `vec(B)` order, entry
/// `j + r·D[l]` for row `j` and column `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFactors {
    /// `q(μ_kj)`
    pub mean: Vec<GaussianFactor>,
    /// `q(g_kj)`
    pub mean_scale: Vec<InvGammaFactor>,
    /// `q(vec(B_k)_e)`
    pub loadings: Vec<GaussianFactor>,
    /// `q(h_ke)`
    pub local_shrink: Vec<GammaFactor>,
    /// `q(c_ke)`
    pub local_shrink_aux: Vec<GammaFactor>,
    /// `q(τ_k)`
    pub global_shrink: InvGammaFactor,
    /// `q(ξ_k)`
    pub global_shrink_aux: InvGammaFactor,
    /// `q(δ_kj)`
    pub noise: Vec<InvGammaFactor>,
    /// `q(ψ_kj)`
    pub noise_aux: Vec<InvGammaFactor>,
}

impl ComponentFactors {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.loadings.len() / self.mean.len()
    }

    pub fn loading(&self, j: usize, r: usize) -> &GaussianFactor {
        &self.loadings[j + r * self.mean.len()]
    }

    pub fn loading_means(&self) -> DMatrix<f64> {
        let dp = self.input_dim();
        DMatrix::from_fn(dp, self.latent_dim(), |j, r| self.loadings[j + r * dp].mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFactors {
    /// `q(p^(l))`
    pub weights: DirichletFactor,
    pub components: Vec<ComponentFactors>,
}

/// The global factor set `λ_G`: one factor per non-local unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFactors {
    pub layers: Vec<LayerFactors>,
}

/// Identifies one global factor. Layers and components are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactorId {
    Weights {
        layer: usize,
    },
    Mean {
        layer: usize,
        comp: usize,
        j: usize,
    },
    MeanScale {
        layer: usize,
        comp: usize,
        j: usize,
    },
    Loading {
        layer: usize,
        comp: usize,
        entry: usize,
    },
    LocalShrink {
        layer: usize,
        comp: usize,
        entry: usize,
    },
    LocalShrinkAux {
        layer: usize,
        comp: usize,
        entry: usize,
    },
    GlobalShrink {
        layer: usize,
        comp: usize,
    },
    GlobalShrinkAux {
        layer: usize,
        comp: usize,
    },
    Noise {
        layer: usize,
        comp: usize,
        j: usize,
    },
    NoiseAux {
        layer: usize,
        comp: usize,
        j: usize,
    },
}

/// Factor kinds, used to group step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FactorKind {
    Weights,
    Mean,
    MeanScale,
    Loading,
    LocalShrink,
    LocalShrinkAux,
    GlobalShrink,
    GlobalShrinkAux,
    Noise,
    NoiseAux,
}

impl FactorKind {
    pub const ALL: [FactorKind; 10] = [
        FactorKind::Weights,
        FactorKind::Mean,
        FactorKind::MeanScale,
        FactorKind::Loading,
        FactorKind::LocalShrink,
        FactorKind::LocalShrinkAux,
        FactorKind::GlobalShrink,
        FactorKind::GlobalShrinkAux,
        FactorKind::Noise,
        FactorKind::NoiseAux,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn family(self) -> Family {
        match self {
            FactorKind::Weights => Family::Dirichlet,
            FactorKind::Mean | FactorKind::Loading => Family::Gaussian,
            FactorKind::LocalShrink | FactorKind::LocalShrinkAux => Family::Gamma,
            _ => Family::InverseGamma,
        }
    }
}

impl FactorId {
    pub fn layer(&self) -> usize {
        match *self {
            FactorId::Weights { layer }
            | FactorId::Mean { layer, .. }
            | FactorId::MeanScale { layer, .. }
            | FactorId::Loading { layer, .. }
            | FactorId::LocalShrink { layer, .. }
            | FactorId::LocalShrinkAux { layer, .. }
            | FactorId::GlobalShrink { layer, .. }
            | FactorId::GlobalShrinkAux { layer, .. }
            | FactorId::Noise { layer, .. }
            | FactorId::NoiseAux { layer, .. } => layer,
        }
    }

    pub fn kind(&self) -> FactorKind {
        match self {
            FactorId::Weights { .. } => FactorKind::Weights,
            FactorId::Mean { .. } => FactorKind::Mean,
            FactorId::MeanScale { .. } => FactorKind::MeanScale,
            FactorId::Loading { .. } => FactorKind::Loading,
            FactorId::LocalShrink { .. } => FactorKind::LocalShrink,
            FactorId::LocalShrinkAux { .. } => FactorKind::LocalShrinkAux,
            FactorId::GlobalShrink { .. } => FactorKind::GlobalShrink,
            FactorId::GlobalShrinkAux { .. } => FactorKind::GlobalShrinkAux,
            FactorId::Noise { .. } => FactorKind::Noise,
            FactorId::NoiseAux { .. } => FactorKind::NoiseAux,
        }
    }
}

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FactorId::Weights { layer } => write!(f, "q(p) layer {}", layer + 1),
            FactorId::Mean { layer, comp, j } => {
                write!(f, "q(mu) layer {} comp {} coord {}", layer + 1, comp + 1, j)
            }
            FactorId::MeanScale { layer, comp, j } => {
                write!(f, "q(g) layer {} comp {} coord {}", layer + 1, comp + 1, j)
            }
            FactorId::Loading { layer, comp, entry } => {
                write!(
                    f,
                    "q(B) layer {} comp {} entry {}",
                    layer + 1,
                    comp + 1,
                    entry
                )
            }
            FactorId::LocalShrink { layer, comp, entry } => {
                write!(
                    f,
                    "q(h) layer {} comp {} entry {}",
                    layer + 1,
                    comp + 1,
                    entry
                )
            }
            FactorId::LocalShrinkAux { layer, comp, entry } => {
                write!(
                    f,
                    "q(c) layer {} comp {} entry {}",
                    layer + 1,
                    comp + 1,
                    entry
                )
            }
            FactorId::GlobalShrink { layer, comp } => {
                write!(f, "q(tau) layer {} comp {}", layer + 1, comp + 1)
            }
            FactorId::GlobalShrinkAux { layer, comp } => {
                write!(f, "q(xi) layer {} comp {}", layer + 1, comp + 1)
            }
            FactorId::Noise { layer, comp, j } => write!(
                f,
                "q(delta) layer {} comp {} coord {}",
                layer + 1,
                comp + 1,
                j
            ),
            FactorId::NoiseAux { layer, comp, j } => write!(
                f,
                "q(psi) layer {} comp {} coord {}",
                layer + 1,
                comp + 1,
                j
            ),
        }
    }
}

/// How scale factors are summarized as point values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSummary {
    /// Gaussian and Dirichlet means; noise variances as `1/E[1/δ]`, which is
    /// finite for every inverse-gamma shape. Used inside the local step.
    Mean,
    /// Gaussian and Dirichlet means, inverse-gamma modes for the noise.
    Mode,
}

impl GlobalFactors {
    pub fn architecture(&self) -> Architecture {
        let mut dims = vec![self.layers[0].components[0].input_dim()];
        for layer in &self.layers {
            dims.push(layer.components[0].latent_dim());
        }
        Architecture {
            dims,
            components: self.layers.iter().map(|l| l.components.len()).collect(),
        }
    }

    /// Every factor id, in the order used by a coordinate-ascent sweep.
    ///
    /// Within a layer: weights, then per component means, loadings (column by
    /// column), noise, and the scale auxiliaries.
    pub fn factor_ids(&self) -> Vec<FactorId> {
        let mut ids = Vec::new();
        for (layer, lf) in self.layers.iter().enumerate() {
            ids.push(FactorId::Weights { layer });
            for (comp, c) in lf.components.iter().enumerate() {
                let dp = c.input_dim();
                let kappa = c.loadings.len();
                ids.extend((0..dp).map(|j| FactorId::Mean { layer, comp, j }));
                ids.extend((0..kappa).map(|entry| FactorId::Loading { layer, comp, entry }));
                ids.extend((0..dp).map(|j| FactorId::Noise { layer, comp, j }));
                ids.extend((0..dp).map(|j| FactorId::MeanScale { layer, comp, j }));
                ids.extend((0..dp).map(|j| FactorId::NoiseAux { layer, comp, j }));
                ids.extend((0..kappa).map(|entry| FactorId::LocalShrink { layer, comp, entry }));
                ids.extend((0..kappa).map(|entry| FactorId::LocalShrinkAux { layer, comp, entry }));
                ids.push(FactorId::GlobalShrink { layer, comp });
                ids.push(FactorId::GlobalShrinkAux { layer, comp });
            }
        }
        ids
    }

    pub fn get(&self, id: FactorId) -> Factor {
        let comp = |layer: usize, comp: usize| &self.layers[layer].components[comp];
        match id {
            FactorId::Weights { layer } => Factor::Dirichlet(self.layers[layer].weights.clone()),
            FactorId::Mean { layer, comp: k, j } => Factor::Gaussian(comp(layer, k).mean[j]),
            FactorId::MeanScale { layer, comp: k, j } => {
                Factor::InverseGamma(comp(layer, k).mean_scale[j])
            }
            FactorId::Loading {
                layer,
                comp: k,
                entry,
            } => Factor::Gaussian(comp(layer, k).loadings[entry]),
            FactorId::LocalShrink {
                layer,
                comp: k,
                entry,
            } => Factor::Gamma(comp(layer, k).local_shrink[entry]),
            FactorId::LocalShrinkAux {
                layer,
                comp: k,
                entry,
            } => Factor::Gamma(comp(layer, k).local_shrink_aux[entry]),
            FactorId::GlobalShrink { layer, comp: k } => {
                Factor::InverseGamma(comp(layer, k).global_shrink)
            }
            FactorId::GlobalShrinkAux { layer, comp: k } => {
                Factor::InverseGamma(comp(layer, k).global_shrink_aux)
            }
            FactorId::Noise { layer, comp: k, j } => Factor::InverseGamma(comp(layer, k).noise[j]),
            FactorId::NoiseAux { layer, comp: k, j } => {
                Factor::InverseGamma(comp(layer, k).noise_aux[j])
            }
        }
    }

    /// Replaces a factor. Panics if the family does not match the slot.
    pub fn set(&mut self, id: FactorId, factor: Factor) {
        let layers = &mut self.layers;
        match (id, factor) {
            (FactorId::Weights { layer }, Factor::Dirichlet(f)) => layers[layer].weights = f,
            (FactorId::Mean { layer, comp, j }, Factor::Gaussian(f)) => {
                layers[layer].components[comp].mean[j] = f
            }
            (FactorId::MeanScale { layer, comp, j }, Factor::InverseGamma(f)) => {
                layers[layer].components[comp].mean_scale[j] = f
            }
            (FactorId::Loading { layer, comp, entry }, Factor::Gaussian(f)) => {
                layers[layer].components[comp].loadings[entry] = f
            }
            (FactorId::LocalShrink { layer, comp, entry }, Factor::Gamma(f)) => {
                layers[layer].components[comp].local_shrink[entry] = f
            }
            (FactorId::LocalShrinkAux { layer, comp, entry }, Factor::Gamma(f)) => {
                layers[layer].components[comp].local_shrink_aux[entry] = f
            }
            (FactorId::GlobalShrink { layer, comp }, Factor::InverseGamma(f)) => {
                layers[layer].components[comp].global_shrink = f
            }
            (FactorId::GlobalShrinkAux { layer, comp }, Factor::InverseGamma(f)) => {
                layers[layer].components[comp].global_shrink_aux = f
            }
            (FactorId::Noise { layer, comp, j }, Factor::InverseGamma(f)) => {
                layers[layer].components[comp].noise[j] = f
            }
            (FactorId::NoiseAux { layer, comp, j }, Factor::InverseGamma(f)) => {
                layers[layer].components[comp].noise_aux[j] = f
            }
            (id, f) => panic!("factor family {:?} does not fit slot {id}", f.family()),
        }
    }

    /// Point estimate of the model parameters.
    pub fn point_estimate(&self, summary: PointSummary) -> DmfaParams {
        let layers = self
            .layers
            .iter()
            .map(|lf| LayerParams {
                weights: normalized(lf.weights.mean()),
                components: lf
                    .components
                    .iter()
                    .map(|c| ComponentParams {
                        mean: DVector::from_iterator(c.input_dim(), c.mean.iter().map(|f| f.mean)),
                        loadings: c.loading_means(),
                        noise: DVector::from_iterator(
                            c.input_dim(),
                            c.noise.iter().map(|f| match summary {
                                PointSummary::Mean => 1.0 / f.mean_inv(),
                                PointSummary::Mode => f.mode(),
                            }),
                        ),
                    })
                    .collect(),
            })
            .collect();
        DmfaParams { layers }
    }

    pub fn all_valid(&self) -> bool {
        self.factor_ids()
            .into_iter()
            .all(|id| self.get(id).is_valid())
    }
}

fn normalized(mut w: Vec<f64>) -> Vec<f64> {
    let t: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= t);
    w
}

/// Local factors of one observation at one layer: Gaussian `q(z_ij^(l))`
/// per latent coordinate and categorical `q(γ_i^(l))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerLocal {
    pub z_mean: DVector<f64>,
    pub z_var: DVector<f64>,
    pub resp: Vec<f64>,
    /// Hard component estimate used when propagating the local step.
    pub path_choice: usize,
}

/// Local factors of one observation, one entry per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowLocal {
    pub layers: Vec<LayerLocal>,
}

/// The local factor set `λ_L`, one entry per observation row.
pub type LocalFactors = Vec<RowLocal>;
