//! Independent oracles shared by the integration tests and the acceptance
//! harness. Nothing here calls the library code it is used to check.

#![allow(dead_code)]

use dmfa::prelude::*;
use dmfa::variational::{
    init_variational, local_step, Factor, FactorId, GlobalFactors, LocalFactors, RowLocal,
    SufficientStats,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A small model with data, a perturbed variational state and soft locals.
#[derive(Debug, Clone)]
pub struct Instance {
    pub arch: Architecture,
    pub data: Dataset,
    pub prior: PriorHyperparams,
    pub global: GlobalFactors,
    pub locals: LocalFactors,
}

impl Instance {
    pub fn stats(&self) -> SufficientStats {
        let rows = self.data.rows();
        SufficientStats::from_rows(&self.arch, rows.iter().zip(&self.locals), 1.0)
    }

    pub fn elbo_with(&self, g: &GlobalFactors) -> f64 {
        dmfa::variational::elbo(&self.stats(), &self.prior, g)
            .unwrap()
            .total
    }
}

/// Bounds for [`random_instance`].
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub max_n: usize,
    pub max_d: usize,
    pub max_layers: usize,
    pub max_paths: usize,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape {
            max_n: 50,
            max_d: 5,
            max_layers: 2,
            max_paths: 6,
        }
    }
}

pub fn random_architecture(rng: &mut ChaCha8Rng, shape: InstanceShape) -> Architecture {
    let layers = rng.gen_range(1..=shape.max_layers);
    let mut dims = vec![rng.gen_range(1..=shape.max_d)];
    for _ in 0..layers {
        let prev = *dims.last().unwrap();
        dims.push(rng.gen_range(1..=prev));
    }
    let mut components = Vec::new();
    let mut paths = 1;
    for _ in 0..layers {
        let cap = (shape.max_paths / paths).clamp(1, 3);
        let k = rng.gen_range(1..=cap);
        paths *= k;
        components.push(k);
    }
    Architecture::new(dims, components).unwrap()
}

fn perturb(f: &Factor, rng: &mut ChaCha8Rng) -> Factor {
    let theta: Vec<f64> = f
        .stored()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if f.is_positive_coordinate(i) {
                v * rng.gen_range(-0.5f64..0.5).exp()
            } else {
                v + rng.gen_range(-0.5..0.5)
            }
        })
        .collect();
    f.with_stored(&theta)
}

/// Random model, data and variational state. Factors are perturbed away from
/// the initializer and responsibilities are mixed with random simplex points
/// so that no statistic is degenerate.
pub fn random_instance(seed: u64, shape: InstanceShape) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = random_architecture(&mut rng, shape);
    let n = rng.gen_range(arch.components[0].max(2)..=shape.max_n);
    let truth = random_params(&arch, seed);
    let (data, _) = sample_dataset(&arch, &truth, n, seed ^ 0x5eed).unwrap();
    let mut prior = PriorHyperparams::known_components(&arch);
    for l in 0..arch.layers() {
        prior.cauchy_scale[l] = rng.gen_range(0.5..3.0);
        prior.global_shrinkage[l] = rng.gen_range(0.5..2.0);
        prior.noise_scale[l] = rng.gen_range(1.0..3.0);
        prior.concentration[l]
            .iter_mut()
            .for_each(|r| *r = rng.gen_range(0.3..2.0));
    }
    let (mut global, _) = init_variational(&arch, &data, &prior, seed).unwrap();
    for id in global.factor_ids() {
        let f = perturb(&global.get(id), &mut rng);
        global.set(id, f);
    }
    let rows = data.rows();
    let refs: Vec<&DVector<f64>> = rows.iter().collect();
    let mut locals = local_step(&refs, &global).unwrap();
    for row in &mut locals {
        for ll in &mut row.layers {
            let noise: Vec<f64> = (0..ll.resp.len())
                .map(|_| rng.gen_range(0.05..1.0))
                .collect();
            let total: f64 = noise.iter().sum();
            for (r, e) in ll.resp.iter_mut().zip(&noise) {
                *r = 0.5 * *r + 0.5 * e / total;
            }
        }
    }
    Instance {
        arch,
        data,
        prior,
        global,
        locals,
    }
}

/// One-dimensional instances: `d = 1`, one latent coordinate, two components.
pub fn one_dimensional_instance(seed: u64) -> Instance {
    let shape = InstanceShape {
        max_n: 8,
        max_d: 1,
        max_layers: 1,
        max_paths: 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let inst = random_instance(rng.gen(), shape);
        if inst.arch.components[0] == 2 {
            return inst;
        }
    }
}

fn gauss_moments(f: &dmfa::variational::GaussianFactor) -> (f64, f64) {
    (f.mean, f.mean * f.mean + f.var)
}

/// `E[(x − μ − Σ_r b_r z_r)²]` for independent `x`, `μ`, `b_r`, `z_r` given
/// as `(mean, second moment)` pairs.
fn expected_sq(x: (f64, f64), mu: (f64, f64), b: &[(f64, f64)], z: &[(f64, f64)]) -> f64 {
    let mut pred = mu.0;
    let mut var = (x.1 - x.0 * x.0) + (mu.1 - mu.0 * mu.0);
    for (br, zr) in b.iter().zip(z) {
        pred += br.0 * zr.0;
        var += br.1 * zr.1 - br.0 * br.0 * zr.0 * zr.0;
    }
    (x.0 - pred).powi(2) + var
}

fn ig_log_density(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

fn gamma_log_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * (x - mean).powi(2) / var
}

/// Layer input moments `(mean, second moment)` of row `i` at layer `l`.
fn layer_input(inst: &Instance, i: usize, l: usize) -> Vec<(f64, f64)> {
    if l == 0 {
        inst.data.row(i).iter().map(|&v| (v, v * v)).collect()
    } else {
        let ll = &inst.locals[i].layers[l - 1];
        ll.z_mean
            .iter()
            .zip(ll.z_var.iter())
            .map(|(m, v)| (*m, m * m + v))
            .collect()
    }
}

fn latent_moments(local: &RowLocal, l: usize) -> Vec<(f64, f64)> {
    let ll = &local.layers[l];
    ll.z_mean
        .iter()
        .zip(ll.z_var.iter())
        .map(|(m, v)| (*m, m * m + v))
        .collect()
}

/// `E_{q(−x)}[log p(y, θ)]` up to terms free of the unknown `id`, with that
/// unknown fixed at `value` (a scalar, or the weight vector for `p`).
pub fn expected_log_joint_at(inst: &Instance, id: FactorId, value: &[f64]) -> f64 {
    let g = &inst.global;
    let prior = &inst.prior;
    let l = id.layer();
    let half_lg = ln_gamma(0.5);
    match id {
        FactorId::Weights { layer } => {
            let rho = &prior.concentration[layer];
            let mut f = ln_gamma(rho.iter().sum()) - rho.iter().map(|&r| ln_gamma(r)).sum::<f64>();
            f += rho
                .iter()
                .zip(value)
                .map(|(r, p)| (r - 1.0) * p.ln())
                .sum::<f64>();
            for row in &inst.locals {
                f += row.layers[layer]
                    .resp
                    .iter()
                    .zip(value)
                    .map(|(r, p)| r * p.ln())
                    .sum::<f64>();
            }
            f
        }
        FactorId::Mean { comp, j, .. }
        | FactorId::Noise { comp, j, .. }
        | FactorId::Loading { comp, entry: j, .. } => {
            let c = &g.layers[l].components[comp];
            let dp = c.input_dim();
            let dl = c.latent_dim();
            let (coord, override_mu, override_b, override_delta) = match id {
                FactorId::Mean { j, .. } => (j, Some(value[0]), None, None),
                FactorId::Loading { entry, .. } => {
                    (entry % dp, None, Some((entry / dp, value[0])), None)
                }
                _ => (j, None, None, Some(value[0])),
            };
            let mu = override_mu.map_or(gauss_moments(&c.mean[coord]), |m| (m, m * m));
            let b: Vec<(f64, f64)> = (0..dl)
                .map(|r| match override_b {
                    Some((rr, v)) if rr == r => (v, v * v),
                    _ => gauss_moments(&c.loadings[coord + r * dp]),
                })
                .collect();
            let delta = &c.noise[coord];
            let (e_log_delta, e_inv_delta) = match override_delta {
                Some(d) => (d.ln(), 1.0 / d),
                None => (delta.mean_log(), delta.mean_inv()),
            };
            let mut f = 0.0;
            for (i, row) in inst.locals.iter().enumerate() {
                let r = row.layers[l].resp[comp];
                let x = layer_input(inst, i, l)[coord];
                let z = latent_moments(row, l);
                f += r
                    * (-0.5 * (LN_2PI + e_log_delta)
                        - 0.5 * e_inv_delta * expected_sq(x, mu, &b, &z));
            }
            match id {
                FactorId::Mean { .. } => {
                    let gs = &c.mean_scale[coord];
                    let big_g = prior.cauchy_scale[l];
                    f += -0.5 * (LN_2PI + big_g.ln() + gs.mean_log())
                        - 0.5 * mu.1 * gs.mean_inv() / big_g;
                }
                FactorId::Loading { entry, .. } => {
                    let (h, tau) = (&c.local_shrink[entry], &c.global_shrink);
                    let v = value[0];
                    f += -0.5 * (LN_2PI + tau.mean_log() - h.mean_log())
                        - 0.5 * v * v * h.mean() * tau.mean_inv();
                }
                _ => {
                    let psi = &c.noise_aux[coord];
                    let d = value[0];
                    f += -0.5 * psi.mean_log() - half_lg - 1.5 * d.ln() - psi.mean_inv() / d;
                }
            }
            f
        }
        FactorId::NoiseAux { comp, j, .. } => {
            let c = &g.layers[l].components[comp];
            let psi = value[0];
            let a2 = prior.noise_scale[l].powi(2);
            ig_log_density(psi, 0.5, 1.0 / a2) + 0.5 * (1.0 / psi).ln()
                - half_lg
                - 1.5 * c.noise[j].mean_log()
                - c.noise[j].mean_inv() / psi
        }
        FactorId::MeanScale { comp, j, .. } => {
            let c = &g.layers[l].components[comp];
            let gv = value[0];
            let big_g = prior.cauchy_scale[l];
            ig_log_density(gv, 0.5, 0.5)
                - 0.5 * (LN_2PI + (big_g * gv).ln())
                - 0.5 * gauss_moments(&c.mean[j]).1 / (big_g * gv)
        }
        FactorId::LocalShrink { comp, entry, .. } => {
            let c = &g.layers[l].components[comp];
            let h = value[0];
            let aux = &c.local_shrink_aux[entry];
            let tau = &c.global_shrink;
            0.5 * aux.mean_log()
                - half_lg
                - 0.5 * h.ln()
                - aux.mean() * h
                - 0.5 * (LN_2PI + tau.mean_log() - h.ln())
                - 0.5 * h * tau.mean_inv() * gauss_moments(&c.loadings[entry]).1
        }
        FactorId::LocalShrinkAux { comp, entry, .. } => {
            let c = &g.layers[l].components[comp];
            let cv = value[0];
            let h = &c.local_shrink[entry];
            gamma_log_density(cv, 0.5, 1.0) + 0.5 * cv.ln()
                - half_lg
                - 0.5 * h.mean_log()
                - cv * h.mean()
        }
        FactorId::GlobalShrink { comp, .. } => {
            let c = &g.layers[l].components[comp];
            let tau = value[0];
            let xi = &c.global_shrink_aux;
            let mut f = -0.5 * xi.mean_log() - half_lg - 1.5 * tau.ln() - xi.mean_inv() / tau;
            for (b, h) in c.loadings.iter().zip(&c.local_shrink) {
                f += -0.5 * (LN_2PI + tau.ln() - h.mean_log())
                    - 0.5 * h.mean() * gauss_moments(b).1 / tau;
            }
            f
        }
        FactorId::GlobalShrinkAux { comp, .. } => {
            let c = &g.layers[l].components[comp];
            let xi = value[0];
            let nu2 = prior.global_shrinkage[l].powi(2);
            ig_log_density(xi, 0.5, 1.0 / nu2) + 0.5 * (1.0 / xi).ln()
                - half_lg
                - 1.5 * c.global_shrink.mean_log()
                - c.global_shrink.mean_inv() / xi
        }
    }
}

/// Natural parameters of `exp(E_{q(−x)}[log p])` recovered by fitting
/// `c + ηᵀ T(x)` through evaluations of [`expected_log_joint_at`].
pub fn conditional_natural_params(inst: &Instance, id: FactorId) -> Vec<f64> {
    let f = |v: &[f64]| expected_log_joint_at(inst, id, v);
    match inst.global.get(id) {
        Factor::Gaussian(_) => {
            let (fm, f0, fp) = (f(&[-1.0]), f(&[0.0]), f(&[1.0]));
            vec![0.5 * (fp - fm), 0.5 * (fp + fm - 2.0 * f0)]
        }
        Factor::InverseGamma(_) | Factor::Gamma(_) => {
            let inverse = matches!(inst.global.get(id), Factor::InverseGamma(_));
            // fit at c·{½, 1, 2}; the second pass centres c on the density's
            // bulk so that neither coordinate of T dominates the solve
            let solve = |c: f64| {
                let us: [f64; 3] = [0.5, 1.0, 2.0];
                let a = DMatrix::from_fn(3, 3, |r, col| match col {
                    0 => 1.0,
                    1 => us[r].ln(),
                    _ if inverse => 1.0 / us[r],
                    _ => us[r],
                });
                let rhs = DVector::from_fn(3, |r, _| f(&[c * us[r]]));
                let sol = a.lu().solve(&rhs).unwrap();
                let eta2 = if inverse { sol[2] * c } else { sol[2] / c };
                vec![sol[1], eta2]
            };
            let rough = solve(1.0);
            let c = if inverse {
                -rough[1] / (1.0 - rough[0]).max(1e-3)
            } else {
                (rough[0] + 1.0).max(1e-3) / -rough[1]
            };
            if c.is_finite() && c > 0.0 {
                solve(c)
            } else {
                rough
            }
        }
        Factor::Dirichlet(d) => {
            let k = d.alpha.len();
            let points: Vec<Vec<f64>> = (0..=k)
                .map(|m| {
                    let raw: Vec<f64> = (0..k)
                        .map(|c| if c + 1 == m { 2.0 + c as f64 } else { 1.0 })
                        .collect();
                    let t: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / t).collect()
                })
                .collect();
            let a = DMatrix::from_fn(k + 1, k + 1, |r, c| {
                if c == 0 {
                    1.0
                } else {
                    points[r][c - 1].ln()
                }
            });
            let rhs = DVector::from_fn(k + 1, |r, _| f(&points[r]));
            let sol = a.lu().solve(&rhs).unwrap();
            sol.iter().skip(1).copied().collect()
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Exact mixture covariance of the observed data, computed path by path
/// from the generative recursion.
pub fn mixture_moments_by_paths(params: &DmfaParams) -> (DVector<f64>, DMatrix<f64>) {
    let layers = &params.layers;
    let mut paths: Vec<Vec<usize>> = vec![vec![]];
    for lp in layers {
        paths = paths
            .into_iter()
            .flat_map(|p| {
                (0..lp.components.len()).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    let d = layers[0].components[0].mean.len();
    let mut mean = DVector::zeros(d);
    let mut second = DMatrix::zeros(d, d);
    for path in &paths {
        let top = layers.last().unwrap().components[0].loadings.ncols();
        let mut m = DVector::zeros(top);
        let mut s = DMatrix::identity(top, top);
        let mut w = 1.0;
        for (l, &k) in path.iter().enumerate().rev() {
            let c = &layers[l].components[k];
            w *= layers[l].weights[k];
            m = &c.mean + &c.loadings * m;
            s = &c.loadings * s * c.loadings.transpose() + DMatrix::from_diagonal(&c.noise);
        }
        mean += w * &m;
        second += w * (s + &m * m.transpose());
    }
    let cov = second - &mean * mean.transpose();
    (mean, cov)
}

pub fn sample_covariance(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows() as f64;
    let mean = y.row_mean();
    let mut c = DMatrix::zeros(y.ncols(), y.ncols());
    for row in y.row_iter() {
        let d = (row - &mean).transpose();
        c += &d * d.transpose();
    }
    c / (n - 1.0)
}

/// Random labels for `n` items drawn from `1..=k`.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(1..=k)).collect()
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// ARI by counting agreements over every pair of items.
pub fn brute_force_ari(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len();
    let (mut both, mut only_p, mut only_t) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let sp = pred[i] == pred[j];
            let st = truth[i] == truth[j];
            if sp && st {
                both += 1.0;
            } else if sp {
                only_p += 1.0;
            } else if st {
                only_t += 1.0;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let (sp, st) = (both + only_p, both + only_t);
    let expected = sp * st / pairs;
    let max = 0.5 * (sp + st);
    if max == expected {
        let identical =
            (0..n).all(|i| (0..n).all(|j| (pred[i] == pred[j]) == (truth[i] == truth[j])));
        return if identical { 1.0 } else { 0.0 };
    }
    (both - expected) / (max - expected)
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

/// Misclassification rate by trying every one-to-one relabeling.
pub fn brute_force_mr(pred: &[usize], truth: &[usize]) -> f64 {
    let (pl, tl) = (distinct(pred), distinct(truth));
    let m = pl.len().max(tl.len());
    let mut best = 0;
    for perm in permutations(m) {
        let agree = pred
            .iter()
            .zip(truth)
            .filter(|(p, t)| {
                let pi = pl.iter().position(|x| x == *p).unwrap();
                perm[pi] < tl.len() && tl[perm[pi]] == **t
            })
            .count();
        best = best.max(agree);
    }
    1.0 - best as f64 / pred.len() as f64
}

fn mi_and_entropies(pred: &[usize], truth: &[usize]) -> (f64, f64, f64) {
    let n = pred.len() as f64;
    let (pl, tl) = (distinct(pred), distinct(truth));
    let count = |f: &dyn Fn(usize) -> bool| (0..pred.len()).filter(|&i| f(i)).count() as f64;
    let mut mi = 0.0;
    let mut hp = 0.0;
    let mut ht = 0.0;
    for &a in &pl {
        let na = count(&|i| pred[i] == a);
        hp -= na / n * (na / n).ln();
        for &b in &tl {
            let nb = count(&|i| truth[i] == b);
            let nab = count(&|i| pred[i] == a && truth[i] == b);
            if nab > 0.0 {
                mi += nab / n * (n * nab / (na * nb)).ln();
            }
        }
    }
    for &b in &tl {
        let nb = count(&|i| truth[i] == b);
        ht -= nb / n * (nb / n).ln();
    }
    (mi, hp, ht)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Expected MI under random relabeling with fixed cluster sizes, averaged
/// over every distinct arrangement of the predicted labels.
pub fn brute_force_emi(pred: &[usize], truth: &[usize]) -> f64 {
    let mut arrangement = pred.to_vec();
    arrangement.sort_unstable();
    let (mut total, mut count) = (0.0, 0.0);
    loop {
        total += mi_and_entropies(&arrangement, truth).0;
        count += 1.0;
        if !next_permutation(&mut arrangement) {
            break;
        }
    }
    total / count
}

pub fn brute_force_ami(pred: &[usize], truth: &[usize]) -> f64 {
    let (mi, hp, ht) = mi_and_entropies(pred, truth);
    let emi = brute_force_emi(pred, truth);
    let denom = 0.5 * (hp + ht) - emi;
    if denom.abs() < 1e-15 {
        let n = pred.len();
        let identical =
            (0..n).all(|i| (0..n).all(|j| (pred[i] == pred[j]) == (truth[i] == truth[j])));
        return if identical { 1.0 } else { 0.0 };
    }
    (mi - emi) / denom
}

/// Diagonal-covariance Gaussian mixture fitted by EM from a k-means start.
/// Returns zero-based hard labels.
pub fn diagonal_gmm_labels(data: &Dataset, k: usize, seed: u64, iterations: usize) -> Vec<usize> {
    let rows = data.rows();
    let (n, d) = (data.n(), data.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (labels, _) = dmfa::variational::kmeans(&rows, k, &mut rng);
    let mut resp = vec![vec![0.0; k]; n];
    for (r, &l) in resp.iter_mut().zip(&labels) {
        r[l] = 1.0;
    }
    for _ in 0..iterations {
        let mut w = vec![0.0; k];
        let mut mu = vec![vec![0.0; d]; k];
        let mut var = vec![vec![0.0; d]; k];
        for (y, r) in rows.iter().zip(&resp) {
            for c in 0..k {
                w[c] += r[c];
                for j in 0..d {
                    mu[c][j] += r[c] * y[j];
                }
            }
        }
        for c in 0..k {
            for j in 0..d {
                mu[c][j] /= w[c].max(f64::MIN_POSITIVE);
            }
        }
        for (y, r) in rows.iter().zip(&resp) {
            for c in 0..k {
                for j in 0..d {
                    var[c][j] += r[c] * (y[j] - mu[c][j]).powi(2);
                }
            }
        }
        for c in 0..k {
            for j in 0..d {
                var[c][j] = (var[c][j] / w[c].max(f64::MIN_POSITIVE)).max(1e-6);
            }
        }
        for (y, r) in rows.iter().zip(resp.iter_mut()) {
            let logits: Vec<f64> = (0..k)
                .map(|c| {
                    (w[c] / n as f64).max(f64::MIN_POSITIVE).ln()
                        + (0..d)
                            .map(|j| normal_log_density(y[j], mu[c][j], var[c][j]))
                            .sum::<f64>()
                })
                .collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = logits.iter().map(|v| (v - m).exp()).sum();
            for c in 0..k {
                r[c] = (logits[c] - m).exp() / s;
            }
        }
    }
    resp.iter()
        .map(|r| (0..k).fold(0, |best, c| if r[c] > r[best] { c } else { best }))
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn sample_ig(rng: &mut ChaCha8Rng, shape: f64, scale: f64) -> f64 {
    1.0 / Gamma::new(shape, 1.0 / scale).unwrap().sample(rng)
}

fn sample_gamma(rng: &mut ChaCha8Rng, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).unwrap().sample(rng)
}

fn sample_dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = alpha.iter().map(|&a| sample_gamma(rng, a, 1.0)).collect();
    let t: f64 = g.iter().sum();
    g.iter().map(|v| v / t).collect()
}

fn dirichlet_log_density(p: &[f64], alpha: &[f64]) -> f64 {
    ln_gamma(alpha.iter().sum()) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
        + alpha
            .iter()
            .zip(p)
            .map(|(a, x)| (a - 1.0) * x.ln())
            .sum::<f64>()
}

/// One draw of `log p(y, z, γ, θ) − log q(z, γ, θ)` with every unknown
/// sampled from the variational factors.
pub fn log_weight_sample(inst: &Instance, rng: &mut ChaCha8Rng) -> f64 {
    let g = &inst.global;
    let prior = &inst.prior;
    let mut lw = 0.0;
    let mut weights = Vec::new();
    let mut comps = Vec::new();
    for (l, lf) in g.layers.iter().enumerate() {
        let p = sample_dirichlet(rng, &lf.weights.alpha);
        lw += dirichlet_log_density(&p, &prior.concentration[l])
            - dirichlet_log_density(&p, &lf.weights.alpha);
        weights.push(p);
        let mut layer = Vec::new();
        for c in &lf.components {
            let (dp, dl) = (c.input_dim(), c.latent_dim());
            let mut mean = DVector::zeros(dp);
            let mut noise = DVector::zeros(dp);
            for j in 0..dp {
                let gs = sample_ig(rng, c.mean_scale[j].shape, c.mean_scale[j].scale);
                lw += ig_log_density(gs, 0.5, 0.5)
                    - ig_log_density(gs, c.mean_scale[j].shape, c.mean_scale[j].scale);
                let mu = Normal::new(c.mean[j].mean, c.mean[j].var.sqrt())
                    .unwrap()
                    .sample(rng);
                lw += normal_log_density(mu, 0.0, prior.cauchy_scale[l] * gs)
                    - normal_log_density(mu, c.mean[j].mean, c.mean[j].var);
                mean[j] = mu;
                let psi = sample_ig(rng, c.noise_aux[j].shape, c.noise_aux[j].scale);
                lw += ig_log_density(psi, 0.5, prior.noise_scale[l].powi(-2))
                    - ig_log_density(psi, c.noise_aux[j].shape, c.noise_aux[j].scale);
                let delta = sample_ig(rng, c.noise[j].shape, c.noise[j].scale);
                lw += ig_log_density(delta, 0.5, 1.0 / psi)
                    - ig_log_density(delta, c.noise[j].shape, c.noise[j].scale);
                noise[j] = delta;
            }
            let xi = sample_ig(rng, c.global_shrink_aux.shape, c.global_shrink_aux.scale);
            lw += ig_log_density(xi, 0.5, prior.global_shrinkage[l].powi(-2))
                - ig_log_density(xi, c.global_shrink_aux.shape, c.global_shrink_aux.scale);
            let tau = sample_ig(rng, c.global_shrink.shape, c.global_shrink.scale);
            lw += ig_log_density(tau, 0.5, 1.0 / xi)
                - ig_log_density(tau, c.global_shrink.shape, c.global_shrink.scale);
            let mut loadings = DMatrix::zeros(dp, dl);
            for e in 0..dp * dl {
                let (cq, hq, bq) = (&c.local_shrink_aux[e], &c.local_shrink[e], &c.loadings[e]);
                let cv = sample_gamma(rng, cq.shape, cq.rate);
                lw += gamma_log_density(cv, 0.5, 1.0) - gamma_log_density(cv, cq.shape, cq.rate);
                let h = sample_gamma(rng, hq.shape, hq.rate);
                lw += gamma_log_density(h, 0.5, cv) - gamma_log_density(h, hq.shape, hq.rate);
                let b = Normal::new(bq.mean, bq.var.sqrt()).unwrap().sample(rng);
                lw += normal_log_density(b, 0.0, tau / h) - normal_log_density(b, bq.mean, bq.var);
                loadings[(e % dp, e / dp)] = b;
            }
            layer.push((mean, loadings, noise));
        }
        comps.push(layer);
    }
    for (i, row) in inst.locals.iter().enumerate() {
        let mut x = inst.data.row(i);
        let mut zs = Vec::new();
        for ll in &row.layers {
            let z = DVector::from_fn(ll.z_mean.len(), |r, _| {
                Normal::new(ll.z_mean[r], ll.z_var[r].sqrt())
                    .unwrap()
                    .sample(rng)
            });
            for r in 0..z.len() {
                lw -= normal_log_density(z[r], ll.z_mean[r], ll.z_var[r]);
            }
            zs.push(z);
        }
        for (l, ll) in row.layers.iter().enumerate() {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut k = ll.resp.len() - 1;
            for (c, &r) in ll.resp.iter().enumerate() {
                acc += r;
                if u < acc {
                    k = c;
                    break;
                }
            }
            lw -= ll.resp[k].ln();
            lw += weights[l][k].ln();
            let (mean, loadings, noise) = &comps[l][k];
            let pred = mean + loadings * &zs[l];
            for j in 0..x.len() {
                lw += normal_log_density(x[j], pred[j], noise[j]);
            }
            x = zs[l].clone();
        }
        for r in 0..x.len() {
            lw += normal_log_density(x[r], 0.0, 1.0);
        }
    }
    lw
}

/// Monte Carlo mean and standard error of [`log_weight_sample`].
pub fn monte_carlo_elbo(inst: &Instance, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..draws)
        .map(|_| log_weight_sample(inst, &mut rng))
        .collect();
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    (mean, (var / draws as f64).sqrt())
}

/// All `|A| = m` subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, m, &mut Vec::new(), &mut out);
    out
}

pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

/// Floors every Gaussian variance at `1e-3` so that finite differences of
/// the objective are not swamped by rounding.
pub fn well_conditioned(mut inst: Instance) -> Instance {
    for id in inst.global.factor_ids() {
        if let Factor::Gaussian(q) = inst.global.get(id) {
            inst.global.set(
                id,
                Factor::Gaussian(dmfa::variational::GaussianFactor::new(
                    q.mean,
                    q.var.max(1e-3),
                )),
            );
        }
    }
    inst
}

fn objective(stats: &SufficientStats, prior: &PriorHyperparams, g: &GlobalFactors) -> f64 {
    dmfa::variational::elbo(stats, prior, g).unwrap().total
}

/// Richardson-extrapolated central difference in the stored coordinates,
/// with a per-coordinate bound on its rounding error.
pub fn fd_gradient(
    stats: &SufficientStats,
    prior: &PriorHyperparams,
    g: &GlobalFactors,
    id: FactorId,
) -> (DVector<f64>, DVector<f64>) {
    let f = g.get(id);
    let theta = f.stored();
    let at = |i: usize, h: f64| {
        let mut t = theta.clone();
        t[i] += h;
        let mut g2 = g.clone();
        g2.set(id, f.with_stored(&t));
        objective(stats, prior, &g2)
    };
    let scale = objective(stats, prior, g).abs();
    let step = |i: usize| {
        if f.is_positive_coordinate(i) {
            1e-3 * theta[i]
        } else {
            1e-3 * theta[i].abs().max(1e-2)
        }
    };
    let grad = DVector::from_fn(theta.len(), |i, _| {
        let h = step(i);
        let d = |h: f64| (at(i, h) - at(i, -h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    });
    let noise = DVector::from_fn(theta.len(), |i, _| 1e-12 * scale.max(1.0) / step(i));
    (grad, noise)
}

/// Every coordinate within `1e-5` of the norm of `want`, plus its rounding floor.
pub fn close(got: &DVector<f64>, want: &DVector<f64>, floor: &DVector<f64>) -> bool {
    (0..got.len()).all(|i| (got[i] - want[i]).abs() <= 1e-5 * want.norm() + floor[i])
}
