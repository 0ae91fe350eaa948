//! Layer dimensions and component counts of a deep mixture of factor analyzers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a DMFA model.
///
/// `dims[0]` is the observed dimension `d`; `dims[l + 1]` is the latent
/// dimension produced by layer `l`. Layers are indexed from zero in code, so
/// layer `0` is the one that generates the observations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub dims: Vec<usize>,
    pub components: Vec<usize>,
}

impl Architecture {
    pub fn new(dims: Vec<usize>, components: Vec<usize>) -> Result<Self> {
        let arch = Architecture { dims, components };
        arch.validate(false)?;
        Ok(arch)
    }

    pub fn layers(&self) -> usize {
        self.components.len()
    }

    pub fn observed_dim(&self) -> usize {
        self.dims[0]
    }

    /// Input dimension of layer `l` (the dimension of `z^(l-1)`).
    pub fn input_dim(&self, l: usize) -> usize {
        self.dims[l]
    }

    /// Latent dimension of layer `l`.
    pub fn latent_dim(&self, l: usize) -> usize {
        self.dims[l + 1]
    }

    /// Number of loading entries per component at layer `l`.
    pub fn kappa(&self, l: usize) -> usize {
        self.dims[l] * self.dims[l + 1]
    }

    pub fn n_paths(&self) -> usize {
        self.components.iter().product()
    }

    /// Free parameter count of the point model; used to break ties between
    /// equally scored architectures.
    pub fn parameter_count(&self) -> usize {
        (0..self.layers())
            .map(|l| {
                let k = self.components[l];
                let dp = self.input_dim(l);
                k * (2 * dp + self.kappa(l)) + (k - 1)
            })
            .sum()
    }

    /// Checks positivity of every dimension and component count, and when
    /// `enforce_ar` is set the Anderson–Rubin bound `D[l+1] ≤ (D[l] − 1)/2`
    /// for every layer.
    pub fn validate(&self, enforce_ar: bool) -> Result<()> {
        let layers = self.components.len();
        if layers == 0 {
            return Err(Error::Architecture("at least one layer is required".into()));
        }
        if self.dims.len() != layers + 1 {
            return Err(Error::Architecture(format!(
                "expected {} dimensions for {} layers, got {}",
                layers + 1,
                layers,
                self.dims.len()
            )));
        }
        if let Some(i) = self.dims.iter().position(|&d| d == 0) {
            return Err(Error::Architecture(format!("D[{i}] must be at least 1")));
        }
        if let Some(i) = self.components.iter().position(|&k| k == 0) {
            return Err(Error::Architecture(format!(
                "K[{}] must be at least 1",
                i + 1
            )));
        }
        if enforce_ar {
            for l in 0..layers {
                let (hi, lo) = (self.dims[l], self.dims[l + 1]);
                if 2 * lo + 1 > hi {
                    return Err(Error::Architecture(format!(
                        "Anderson-Rubin condition violated at layer {}: D[{}] = {} > (D[{}] - 1)/2 = {}",
                        l + 1,
                        l + 1,
                        lo,
                        l,
                        (hi as f64 - 1.0) / 2.0
                    )));
                }
            }
        }
        Ok(())
    }

    /// Architecture obtained by keeping only layers `from..` (the deeper part
    /// of the network, whose output is `z^(from)`).
    pub fn suffix(&self, from: usize) -> Architecture {
        Architecture {
            dims: self.dims[from..].to_vec(),
            components: self.components[from..].to_vec(),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={};{}", self.dims[0], ArchSpec::from(self))
    }
}

/// The user-facing architecture string `K=k1,k2,...;D=d1,d2,...`.
///
/// The observed dimension is not part of the string; it is supplied by the
/// data when the spec is turned into an [`Architecture`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub components: Vec<usize>,
    pub latent_dims: Vec<usize>,
}

impl ArchSpec {
    pub fn with_observed_dim(&self, d: usize) -> Result<Architecture> {
        let mut dims = Vec::with_capacity(self.latent_dims.len() + 1);
        dims.push(d);
        dims.extend_from_slice(&self.latent_dims);
        Architecture::new(dims, self.components.clone())
    }
}

impl From<&Architecture> for ArchSpec {
    fn from(a: &Architecture) -> Self {
        ArchSpec {
            components: a.components.clone(),
            latent_dims: a.dims[1..].to_vec(),
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "K={};D={}",
            join(&self.components),
            join(&self.latent_dims)
        )
    }
}

impl FromStr for ArchSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad =
            |msg: &str| Error::Architecture(format!("{msg} in {s:?} (expected K=k1,k2;D=d1,d2)"));
        let mut components = None;
        let mut latent = None;
        for part in s.split(';') {
            let (key, vals) = part.split_once('=').ok_or_else(|| bad("missing '='"))?;
            let parsed = vals
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("non-integer entry"))?;
            match key.trim() {
                "K" | "k" if components.is_none() => components = Some(parsed),
                "D" | "d" if latent.is_none() => latent = Some(parsed),
                _ => return Err(bad("unexpected or repeated key")),
            }
        }
        let components = components.ok_or_else(|| bad("missing K"))?;
        let latent_dims = latent.ok_or_else(|| bad("missing D"))?;
        if components.len() != latent_dims.len() {
            return Err(bad("K and D must have the same length"));
        }
        Ok(ArchSpec {
            components,
            latent_dims,
        })
    }
}
