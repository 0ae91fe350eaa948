use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::params::DmfaParams;
use crate::arch::Architecture;
use crate::dataset::Dataset;
use crate::error::Result;

/// Latent draws behind a sampled dataset.
#[derive(Debug, Clone)]
pub struct LatentRecord {
    /// `z[l]` holds `z^(l+1)` row-wise, `n × D[l+1]`.
    pub z: Vec<DMatrix<f64>>,
    /// Zero-based component chosen at every layer, per row.
    pub paths: Vec<Vec<usize>>,
}

pub(crate) fn draw_categorical<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    // rounding at the top of the simplex
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Draws `n` observations from the generative process, top layer first.
/// Labels are the one-based first-layer components.
pub fn sample_dataset(
    arch: &Architecture,
    params: &DmfaParams,
    n: usize,
    seed: u64,
) -> Result<(Dataset, LatentRecord)> {
    params.validate(arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = arch.layers();
    let mut y = DMatrix::zeros(n, arch.observed_dim());
    let mut z: Vec<DMatrix<f64>> = (0..layers)
        .map(|l| DMatrix::zeros(n, arch.latent_dim(l)))
        .collect();
    let mut paths = Vec::with_capacity(n);

    for i in 0..n {
        let top = arch.latent_dim(layers - 1);
        let mut cur = DVector::from_fn(top, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut path = vec![0; layers];
        for l in (0..layers).rev() {
            z[l].set_row(i, &cur.transpose());
            let layer = &params.layers[l];
            let k = draw_categorical(&mut rng, &layer.weights);
            path[l] = k;
            let comp = &layer.components[k];
            let mut next = &comp.mean + &comp.loadings * &cur;
            for j in 0..next.len() {
                let e: f64 = rng.sample(StandardNormal);
                next[j] += comp.noise[j].sqrt() * e;
            }
            cur = next;
        }
        y.set_row(i, &cur.transpose());
        paths.push(path);
    }
    let labels = paths.iter().map(|p| p[0] + 1).collect();
    Ok((
        Dataset {
            y,
            labels: Some(labels),
        },
        LatentRecord { z, paths },
    ))
}

/// Random, well-conditioned parameters for `arch`; used for simulation
/// studies and property tests.
pub fn random_params(arch: &Architecture, seed: u64) -> DmfaParams {
    use super::params::{ComponentParams, LayerParams};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (0..arch.layers())
        .map(|l| {
            let k = arch.components[l];
            let (dp, dl) = (arch.input_dim(l), arch.latent_dim(l));
            let raw: Vec<f64> = (0..k).map(|_| 0.5 + rng.gen::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let weights = raw.iter().map(|w| w / total).collect();
            let components = (0..k)
                .map(|_| ComponentParams {
                    mean: DVector::from_fn(dp, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal)),
                    loadings: DMatrix::from_fn(dp, dl, |_, _| {
                        0.7 * rng.sample::<f64, _>(StandardNormal)
                    }),
                    noise: DVector::from_fn(dp, |_, _| 0.3 + 1.2 * rng.gen::<f64>()),
                })
                .collect();
            LayerParams {
                weights,
                components,
            }
        })
        .collect();
    DmfaParams { layers }
}
