//! Synthetic clustering scenarios.
//!
//! * `s1`: Gaussian clusters living in a few informative coordinates with
//!   sparse low-rank within-cluster correlation, padded with pure-noise
//!   coordinates.
//! * `s2`: unbalanced clusters of phase-shifted sinusoids with random
//!   amplitude and time-varying noise, each row standardized afterwards.
//!
//! Generator constants are part of the spec so a JSON spec file pins the
//! data exactly.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::preprocess::standardize_rows;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    S1,
    S2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// Generator revision; bump when the construction changes.
    pub version: u32,
    pub n: usize,
    /// Total dimension, noise coordinates included.
    pub d: usize,
    pub clusters: usize,
    pub noise_features: usize,
    /// Mixing weights; equal when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    /// `s1`: rank of the within-cluster loadings.
    pub rank: usize,
    /// `s1`: standard deviation of the cluster-mean coordinates.
    pub mean_scale: f64,
    /// `s1`: magnitude of the nonzero loadings.
    pub loading_scale: f64,
    /// `s1`: probability that a loading entry is nonzero.
    pub loading_density: f64,
    /// Idiosyncratic noise standard deviation on informative coordinates.
    pub noise_sd: f64,
}

pub const SCENARIO_VERSION: u32 = 1;

impl ScenarioSpec {
    /// 5 clusters, 20 informative and 30 noise coordinates.
    pub fn s1(n: usize, seed: u64) -> Self {
        ScenarioSpec {
            scenario: Scenario::S1,
            version: SCENARIO_VERSION,
            n,
            d: 50,
            clusters: 5,
            noise_features: 30,
            weights: None,
            seed,
            rank: 3,
            mean_scale: 1.0,
            loading_scale: 2.0,
            loading_density: 0.3,
            noise_sd: 0.5,
        }
    }

    /// 5 unbalanced sinusoid clusters over 17 time points.
    pub fn s2(n: usize, seed: u64) -> Self {
        ScenarioSpec {
            scenario: Scenario::S2,
            version: SCENARIO_VERSION,
            n,
            d: 17,
            clusters: 5,
            noise_features: 0,
            weights: Some(vec![0.55, 0.25, 0.12, 0.05, 0.03]),
            seed,
            rank: 0,
            mean_scale: 0.0,
            loading_scale: 0.0,
            loading_density: 0.0,
            noise_sd: 0.4,
        }
    }

    pub fn mixing_weights(&self) -> Vec<f64> {
        self.weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.clusters as f64; self.clusters])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("scenario spec: {m}")));
        if self.version != SCENARIO_VERSION {
            return bad(&format!("unsupported generator version {}", self.version));
        }
        if self.clusters == 0 {
            return bad("need at least one cluster");
        }
        if self.noise_features >= self.d {
            return bad("noise features must leave at least one informative coordinate");
        }
        if let Some(w) = &self.weights {
            if w.len() != self.clusters {
                return bad("one weight per cluster required");
            }
            if w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad("weights must be non-negative and sum to 1");
            }
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be non-negative");
        }
        if self.scenario == Scenario::S2 && self.d - self.noise_features < 2 {
            return bad("s2 needs at least 2 time points");
        }
        if self.scenario == Scenario::S1 && !(0.0..=1.0).contains(&self.loading_density) {
            return bad("loading_density must lie in [0, 1]");
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn draw_label(rng: &mut ChaCha8Rng, w: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in w.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    w.len() - 1
}

/// Dataset with 1-based truth labels. Deterministic in `spec`.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights = spec.mixing_weights();
    let p = spec.d - spec.noise_features;
    let mut y = DMatrix::zeros(spec.n, spec.d);
    let mut labels = Vec::with_capacity(spec.n);

    match spec.scenario {
        Scenario::S1 => {
            let means: Vec<DVector<f64>> = (0..spec.clusters)
                .map(|_| DVector::from_fn(p, |_, _| spec.mean_scale * normal(&mut rng)))
                .collect();
            let loadings: Vec<DMatrix<f64>> = (0..spec.clusters)
                .map(|_| {
                    DMatrix::from_fn(p, spec.rank, |_, _| {
                        if rng.gen::<f64>() < spec.loading_density {
                            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                            sign * spec.loading_scale * rng.gen_range(0.5..1.0)
                        } else {
                            0.0
                        }
                    })
                })
                .collect();
            for i in 0..spec.n {
                let k = draw_label(&mut rng, &weights);
                let f = DVector::from_fn(spec.rank, |_, _| normal(&mut rng));
                let x = &means[k] + &loadings[k] * f;
                for j in 0..p {
                    y[(i, j)] = x[j] + spec.noise_sd * normal(&mut rng);
                }
                for j in p..spec.d {
                    y[(i, j)] = normal(&mut rng);
                }
                labels.push(k + 1);
            }
        }
        Scenario::S2 => {
            let k_all = spec.clusters as f64;
            for i in 0..spec.n {
                let k = draw_label(&mut rng, &weights);
                let phase = 2.0 * PI * k as f64 / k_all;
                let amplitude = rng.gen_range(0.5..1.5);
                let offset = normal(&mut rng);
                for t in 0..p {
                    let s = t as f64 / (p - 1) as f64;
                    let sd = spec.noise_sd * (0.5 + s);
                    y[(i, t)] =
                        offset + amplitude * (2.0 * PI * s + phase).sin() + sd * normal(&mut rng);
                }
                for j in p..spec.d {
                    y[(i, j)] = normal(&mut rng);
                }
                labels.push(k + 1);
            }
            let raw = Dataset::new(y, Some(labels))?;
            return standardize_rows(&raw);
        }
    }
    Dataset::new(y, Some(labels))
}
