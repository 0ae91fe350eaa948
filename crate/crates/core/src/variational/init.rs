//! Deterministic starting point for the variational factors.
//!
//! Layer by layer: k-means++ seeding with Lloyd refinement on the layer
//! input, loadings from the leading principal directions of the
//! within-cluster residuals, noise from the leftover diagonal variance, and
//! the projected factor scores as input to the next layer. Scale auxiliaries
//! are then settled by a few data-free coordinate-ascent passes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::factors::{ComponentFactors, GlobalFactors, LayerFactors, LocalFactors};
use super::families::{DirichletFactor, GammaFactor, GaussianFactor, InvGammaFactor};
use super::local::local_step;
use super::prior::PriorHyperparams;
use super::stats::SufficientStats;
use super::update::hyper_sweep;
use crate::arch::Architecture;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

const LLOYD_ITERATIONS: usize = 50;
const KMEANS_RESTARTS: usize = 10;
const HYPER_PASSES: usize = 10;

/// Best of several seeded k-means runs by within-cluster sum of squares.
/// Returns zero-based labels and centroids.
pub fn kmeans(
    rows: &[DVector<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<DVector<f64>>) {
    let mut best: Option<(f64, Vec<usize>, Vec<DVector<f64>>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (labels, centroids) = kmeans_once(rows, k, rng);
        let inertia: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(r, &l)| (r - &centroids[l]).norm_squared())
            .sum();
        if best.as_ref().map_or(true, |b| inertia < b.0) {
            best = Some((inertia, labels, centroids));
        }
    }
    let (_, labels, centroids) = best.expect("at least one restart");
    (labels, centroids)
}

fn kmeans_once(
    rows: &[DVector<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<DVector<f64>>) {
    let n = rows.len();
    let mut centroids: Vec<DVector<f64>> = Vec::with_capacity(k);
    centroids.push(rows[rng.gen_range(0..n)].clone());
    let mut dist: Vec<f64> = rows
        .iter()
        .map(|r| (r - &centroids[0]).norm_squared())
        .collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(rows[next].clone());
        for (d, r) in dist.iter_mut().zip(rows) {
            *d = d.min((r - &centroids[centroids.len() - 1]).norm_squared());
        }
    }

    let mut labels = vec![0; n];
    for _ in 0..LLOYD_ITERATIONS {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let best = nearest(r, &centroids).0;
            if best != labels[i] {
                labels[i] = best;
                changed = true;
            }
        }
        let dim = rows[0].len();
        let mut sums = vec![DVector::zeros(dim); k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            sums[l] += r;
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = &sums[c] / counts[c] as f64;
            } else {
                // reseed an empty cluster at the worst-fitted point
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = (&rows[a] - &centroids[labels[a]]).norm_squared();
                        let db = (&rows[b] - &centroids[labels[b]]).norm_squared();
                        da.total_cmp(&db)
                    })
                    .unwrap_or(0);
                centroids[c] = rows[far].clone();
                labels[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (labels, centroids)
}

fn nearest(r: &DVector<f64>, centroids: &[DVector<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = (r - m).norm_squared();
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Point-estimate factor analyzer for one cluster.
struct ClusterFit {
    mean: DVector<f64>,
    loadings: DMatrix<f64>,
    noise: DVector<f64>,
    count: usize,
}

fn covariance(rows: &[&DVector<f64>], mean: &DVector<f64>) -> DMatrix<f64> {
    let d = mean.len();
    let mut s = DMatrix::zeros(d, d);
    for r in rows {
        let c = *r - mean;
        s += &c * c.transpose();
    }
    s / rows.len().max(1) as f64
}

fn fit_factor_analyzer(
    cov: &DMatrix<f64>,
    mean: DVector<f64>,
    latent: usize,
    count: usize,
) -> ClusterFit {
    let d = mean.len();
    let floor = 1e-3 * (cov.trace() / d as f64).max(1e-6);
    let eig = SymmetricEigen::new(cov.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let rest: Vec<f64> = order
        .iter()
        .skip(latent)
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .collect();
    let sigma2 = if rest.is_empty() {
        floor
    } else {
        (rest.iter().sum::<f64>() / rest.len() as f64).max(floor)
    };
    let mut loadings = DMatrix::zeros(d, latent);
    for (r, &i) in order.iter().take(latent).enumerate() {
        let scale = (eig.eigenvalues[i] - sigma2).max(floor).sqrt();
        loadings.set_column(r, &(eig.eigenvectors.column(i) * scale));
    }
    let noise = DVector::from_fn(d, |j, _| {
        let explained: f64 = loadings.row(j).iter().map(|v| v * v).sum();
        (cov[(j, j)] - explained).max(floor)
    });
    ClusterFit {
        mean,
        loadings,
        noise,
        count,
    }
}

/// Posterior mean of the factor scores under `N(0, I)` latent prior.
fn project(fit: &ClusterFit, x: &DVector<f64>) -> DVector<f64> {
    let bt_dinv = fit.loadings.transpose() * DMatrix::from_diagonal(&fit.noise.map(|v| 1.0 / v));
    let prec =
        DMatrix::identity(fit.loadings.ncols(), fit.loadings.ncols()) + &bt_dinv * &fit.loadings;
    let cov = prec.try_inverse().expect("I + BᵀD⁻¹B is positive definite");
    cov * bt_dinv * (x - &fit.mean)
}

fn component_factors(fit: &ClusterFit) -> ComponentFactors {
    let dp = fit.mean.len();
    let dl = fit.loadings.ncols();
    let m = fit.count.max(1) as f64;
    let mean = (0..dp)
        .map(|j| GaussianFactor::new(fit.mean[j], fit.noise[j] / m))
        .collect();
    let loadings = (0..dl)
        .flat_map(|r| (0..dp).map(move |j| (j, r)))
        .map(|(j, r)| GaussianFactor::new(fit.loadings[(j, r)], fit.noise[j] / m))
        .collect();
    let shape = (0.5 + 0.5 * m).max(1.5);
    let noise = (0..dp)
        .map(|j| InvGammaFactor::new(shape, shape * fit.noise[j]))
        .collect();
    let kappa = dp * dl;
    ComponentFactors {
        mean,
        mean_scale: vec![InvGammaFactor::new(1.0, 1.0); dp],
        loadings,
        local_shrink: vec![GammaFactor::new(1.0, 1.0); kappa],
        local_shrink_aux: vec![GammaFactor::new(1.0, 2.0); kappa],
        global_shrink: InvGammaFactor::new(1.0, 1.0),
        global_shrink_aux: InvGammaFactor::new(1.0, 2.0),
        noise,
        noise_aux: vec![InvGammaFactor::new(1.0, 1.0); dp],
    }
}

/// Initial global and local factors. Deterministic given `seed`.
pub fn init_variational(
    arch: &Architecture,
    data: &Dataset,
    prior: &PriorHyperparams,
    seed: u64,
) -> Result<(GlobalFactors, LocalFactors)> {
    arch.validate(false)?;
    prior.validate(arch)?;
    let n = data.n();
    if n == 0 || n < arch.components[0] {
        return Err(Error::TooFewObservations {
            n,
            needed: arch.components[0].max(1),
        });
    }
    if data.dim() != arch.observed_dim() {
        return Err(Error::Dimension {
            expected: arch.observed_dim(),
            got: data.dim(),
            context: "observed dimension",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = data.rows();
    let mut layers = Vec::with_capacity(arch.layers());

    for l in 0..arch.layers() {
        let k = arch.components[l];
        let latent = arch.latent_dim(l);
        let (labels, centroids) = kmeans(&inputs, k.min(inputs.len()), &mut rng);
        let all: Vec<&DVector<f64>> = inputs.iter().collect();
        let global_mean = all
            .iter()
            .fold(DVector::zeros(arch.input_dim(l)), |acc, r| acc + *r)
            / n as f64;
        let pooled = {
            let mut s = DMatrix::zeros(arch.input_dim(l), arch.input_dim(l));
            for (r, &c) in inputs.iter().zip(&labels) {
                let d = r - &centroids[c];
                s += &d * d.transpose();
            }
            s / n as f64
        };
        let fits: Vec<ClusterFit> = (0..k)
            .map(|c| {
                let members: Vec<&DVector<f64>> = inputs
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &lab)| lab == c)
                    .map(|(r, _)| r)
                    .collect();
                let mean = centroids
                    .get(c)
                    .cloned()
                    .unwrap_or_else(|| global_mean.clone());
                let cov = if members.len() > 2 * latent + 1 {
                    covariance(&members, &mean)
                } else {
                    pooled.clone()
                };
                fit_factor_analyzer(&cov, mean, latent, members.len())
            })
            .collect();
        inputs = inputs
            .iter()
            .zip(&labels)
            .map(|(x, &c)| project(&fits[c], x))
            .collect();
        let rho = &prior.concentration[l];
        layers.push(LayerFactors {
            weights: DirichletFactor::new(rho.iter().map(|r| r + n as f64 / k as f64).collect()),
            components: fits.iter().map(component_factors).collect(),
        });
    }

    let mut global = GlobalFactors { layers };
    let empty = SufficientStats::zeros(arch);
    for _ in 0..HYPER_PASSES {
        hyper_sweep(&empty, prior, &mut global);
    }
    let owned = data.rows();
    let refs: Vec<&DVector<f64>> = owned.iter().collect();
    let locals = local_step(&refs, &global)?;
    Ok((global, locals))
}
