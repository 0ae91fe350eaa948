use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arch::Architecture;
use crate::error::{Error, Result};

/// Mean, loading matrix and diagonal noise of one factor-analyzer component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    pub mean: DVector<f64>,
    pub loadings: DMatrix<f64>,
    pub noise: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub components: Vec<ComponentParams>,
}

/// Point values of the global model parameters, one entry per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmfaParams {
    pub layers: Vec<LayerParams>,
}

impl DmfaParams {
    /// Checks shapes against `arch`, weights on the simplex (within 1e-12)
    /// and strictly positive noise variances.
    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        if self.layers.len() != arch.layers() {
            return Err(Error::Dimension {
                expected: arch.layers(),
                got: self.layers.len(),
                context: "layer count",
            });
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let k = arch.components[l];
            if layer.weights.len() != k || layer.components.len() != k {
                return Err(Error::Dimension {
                    expected: k,
                    got: layer.components.len().min(layer.weights.len()),
                    context: "components per layer",
                });
            }
            if layer.weights.iter().any(|&w| !(w >= 0.0)) {
                return Err(Error::Params(format!(
                    "layer {}: negative or NaN weight",
                    l + 1
                )));
            }
            let total: f64 = layer.weights.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Params(format!(
                    "layer {}: weights sum to {total}",
                    l + 1
                )));
            }
            let (dp, dl) = (arch.input_dim(l), arch.latent_dim(l));
            for (c, comp) in layer.components.iter().enumerate() {
                if comp.mean.len() != dp
                    || comp.noise.len() != dp
                    || comp.loadings.nrows() != dp
                    || comp.loadings.ncols() != dl
                {
                    return Err(Error::Params(format!(
                        "layer {} component {}: expected mean/noise of length {dp} and {dp}x{dl} loadings",
                        l + 1,
                        c + 1
                    )));
                }
                if comp.noise.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Params(format!(
                        "layer {} component {}: noise variances must be positive",
                        l + 1,
                        c + 1
                    )));
                }
            }
        }
        Ok(())
    }
}
