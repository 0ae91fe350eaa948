use serde::{Deserialize, Serialize};

use crate::arch::Architecture;
use crate::error::{Error, Result};

/// Hyperparameters of the prior hierarchy, one entry per layer.
///
/// * `cauchy_scale` (`G`): `μ | g ~ N(0, G g)`, `g ~ IG(1/2, 1/2)`.
/// * `global_shrinkage` (`ν`): horseshoe global scale for the loadings.
/// * `noise_scale` (`A`): half-Cauchy scale of the noise standard deviations.
/// * `concentration` (`ρ`): Dirichlet concentration of the mixing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorHyperparams {
    pub cauchy_scale: Vec<f64>,
    pub global_shrinkage: Vec<f64>,
    pub noise_scale: Vec<f64>,
    pub concentration: Vec<Vec<f64>>,
}

impl PriorHyperparams {
    pub const DEFAULT_CAUCHY_SCALE: f64 = 2.0;
    pub const DEFAULT_GLOBAL_SHRINKAGE: f64 = 1.0;
    pub const DEFAULT_NOISE_SCALE: f64 = 2.5;
    /// Concentration when the component count is known.
    pub const KNOWN_K_CONCENTRATION: f64 = 1.0;
    /// Concentration for an overfitted mixture.
    pub const OVERFITTED_CONCENTRATION: f64 = 0.5;

    pub fn with_concentration(arch: &Architecture, rho: f64) -> Self {
        let l = arch.layers();
        PriorHyperparams {
            cauchy_scale: vec![Self::DEFAULT_CAUCHY_SCALE; l],
            global_shrinkage: vec![Self::DEFAULT_GLOBAL_SHRINKAGE; l],
            noise_scale: vec![Self::DEFAULT_NOISE_SCALE; l],
            concentration: arch.components.iter().map(|&k| vec![rho; k]).collect(),
        }
    }

    /// Defaults for a model whose component counts are taken as known.
    pub fn known_components(arch: &Architecture) -> Self {
        Self::with_concentration(arch, Self::KNOWN_K_CONCENTRATION)
    }

    /// Defaults for an overfitted mixture whose superfluous components
    /// should empty out.
    pub fn overfitted(arch: &Architecture) -> Self {
        Self::with_concentration(arch, Self::OVERFITTED_CONCENTRATION)
    }

    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        let l = arch.layers();
        if self.cauchy_scale.len() != l
            || self.global_shrinkage.len() != l
            || self.noise_scale.len() != l
            || self.concentration.len() != l
        {
            return Err(Error::Invalid(format!(
                "prior hyperparameters must have {l} layers"
            )));
        }
        for (i, (rho, &k)) in self.concentration.iter().zip(&arch.components).enumerate() {
            if rho.len() != k {
                return Err(Error::Invalid(format!(
                    "layer {} needs {k} concentrations",
                    i + 1
                )));
            }
        }
        let all = self
            .cauchy_scale
            .iter()
            .chain(&self.global_shrinkage)
            .chain(&self.noise_scale)
            .chain(self.concentration.iter().flatten());
        for v in all {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(
                    "prior hyperparameters must be positive and finite".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Scalar prior settings applied to any architecture, with optional
/// per-layer overrides of the horseshoe global scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSettings {
    pub cauchy_scale: f64,
    pub global_shrinkage: f64,
    /// `(layer, ν)` pairs with 1-based layer numbers.
    #[serde(default)]
    pub global_shrinkage_overrides: Vec<(usize, f64)>,
    pub noise_scale: f64,
    pub concentration: f64,
}

impl Default for PriorSettings {
    fn default() -> Self {
        PriorSettings {
            cauchy_scale: PriorHyperparams::DEFAULT_CAUCHY_SCALE,
            global_shrinkage: PriorHyperparams::DEFAULT_GLOBAL_SHRINKAGE,
            global_shrinkage_overrides: Vec::new(),
            noise_scale: PriorHyperparams::DEFAULT_NOISE_SCALE,
            concentration: PriorHyperparams::KNOWN_K_CONCENTRATION,
        }
    }
}

impl PriorSettings {
    pub fn overfitted() -> Self {
        PriorSettings {
            concentration: PriorHyperparams::OVERFITTED_CONCENTRATION,
            ..PriorSettings::default()
        }
    }

    pub fn for_architecture(&self, arch: &Architecture) -> Result<PriorHyperparams> {
        let mut p = PriorHyperparams::with_concentration(arch, self.concentration);
        p.cauchy_scale
            .iter_mut()
            .for_each(|v| *v = self.cauchy_scale);
        p.noise_scale.iter_mut().for_each(|v| *v = self.noise_scale);
        p.global_shrinkage
            .iter_mut()
            .for_each(|v| *v = self.global_shrinkage);
        for &(layer, nu) in &self.global_shrinkage_overrides {
            if layer == 0 || layer > arch.layers() {
                return Err(Error::Invalid(format!(
                    "shrinkage override for layer {layer}, but the model has {} layers",
                    arch.layers()
                )));
            }
            p.global_shrinkage[layer - 1] = nu;
        }
        p.validate(arch)?;
        Ok(p)
    }
}
