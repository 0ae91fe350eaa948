//! Responsibility-weighted moments of the local factors.
//!
//! Every data-dependent quantity in the ELBO and in the conjugate updates is
//! linear in these sums, so a minibatch estimate is obtained by accumulating
//! the minibatch rows with weight `n / |A|`.

use nalgebra::{DMatrix, DVector};

use super::factors::{ComponentFactors, RowLocal};
use crate::arch::Architecture;
use crate::special::LN_2PI;

/// Weighted moments for one component of one layer. `x` is the layer input
/// (`y` or the mean of `z^(l-1)`), `z` the layer's latent factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStats {
    /// `Σ r`
    pub weight: f64,
    /// `Σ r E[x]`
    pub sx: DVector<f64>,
    /// `Σ r E[x²]`, coordinatewise
    pub sxx: DVector<f64>,
    /// `Σ r E[z]`
    pub sz: DVector<f64>,
    /// `Σ r E[z zᵀ]`
    pub szz: DMatrix<f64>,
    /// `Σ r E[x] E[z]ᵀ`
    pub sxz: DMatrix<f64>,
}

impl ComponentStats {
    fn zeros(dp: usize, dl: usize) -> Self {
        ComponentStats {
            weight: 0.0,
            sx: DVector::zeros(dp),
            sxx: DVector::zeros(dp),
            sz: DVector::zeros(dl),
            szz: DMatrix::zeros(dl, dl),
            sxz: DMatrix::zeros(dp, dl),
        }
    }

    /// `Σ r E[(x_j − μ_j − b_jᵀ z)²]` under the current factors.
    pub fn expected_sq_residual(&self, c: &ComponentFactors, j: usize) -> f64 {
        let dl = self.sz.len();
        let mu = &c.mean[j];
        let mut q = self.sxx[j] - 2.0 * mu.mean * self.sx[j] + self.weight * mu.second_moment();
        for r in 0..dl {
            let b = c.loading(j, r);
            q += -2.0 * b.mean * self.sxz[(j, r)] + 2.0 * mu.mean * b.mean * self.sz[r];
            q += b.var * self.szz[(r, r)];
            for s in 0..dl {
                q += b.mean * c.loading(j, s).mean * self.szz[(r, s)];
            }
        }
        q
    }
}

/// Accumulated moments for every layer and component, plus the scalar local
/// terms of the ELBO.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub layers: Vec<Vec<ComponentStats>>,
    /// `Σ E[log N(z^(L); 0, I)]`
    pub latent_prior: f64,
    /// `Σ` entropies of `q(z)` and `q(γ)`
    pub local_entropy: f64,
    /// Effective number of rows.
    pub count: f64,
}

impl SufficientStats {
    pub fn zeros(arch: &Architecture) -> Self {
        SufficientStats {
            layers: (0..arch.layers())
                .map(|l| {
                    (0..arch.components[l])
                        .map(|_| ComponentStats::zeros(arch.input_dim(l), arch.latent_dim(l)))
                        .collect()
                })
                .collect(),
            latent_prior: 0.0,
            local_entropy: 0.0,
            count: 0.0,
        }
    }

    /// Adds one observation with weight `scale`.
    pub fn add_row(&mut self, y: &DVector<f64>, local: &RowLocal, scale: f64) {
        let layers = local.layers.len();
        for l in 0..layers {
            let (x, xv) = if l == 0 {
                (y, None)
            } else {
                (
                    &local.layers[l - 1].z_mean,
                    Some(&local.layers[l - 1].z_var),
                )
            };
            let ll = &local.layers[l];
            let zm = &ll.z_mean;
            let ezz = zm * zm.transpose() + DMatrix::from_diagonal(&ll.z_var);
            let xz = x * zm.transpose();
            let x2 = match xv {
                Some(v) => x.component_mul(x) + v,
                None => x.component_mul(x),
            };
            for (k, cs) in self.layers[l].iter_mut().enumerate() {
                let w = scale * ll.resp[k];
                if w == 0.0 {
                    continue;
                }
                cs.weight += w;
                cs.sx.axpy(w, x, 1.0);
                cs.sxx.axpy(w, &x2, 1.0);
                cs.sz.axpy(w, zm, 1.0);
                cs.szz += w * &ezz;
                cs.sxz += w * &xz;
            }
        }
        let top = &local.layers[layers - 1];
        let dim = top.z_mean.len() as f64;
        let sq: f64 = top
            .z_mean
            .iter()
            .zip(top.z_var.iter())
            .map(|(m, v)| m * m + v)
            .sum();
        self.latent_prior += scale * (-0.5 * dim * LN_2PI - 0.5 * sq);

        let mut ent = 0.0;
        for ll in &local.layers {
            ent += ll
                .z_var
                .iter()
                .map(|v| 0.5 * (LN_2PI + 1.0 + v.ln()))
                .sum::<f64>();
            ent -= ll
                .resp
                .iter()
                .filter(|&&r| r > 0.0)
                .map(|r| r * r.ln())
                .sum::<f64>();
        }
        self.local_entropy += scale * ent;
        self.count += scale;
    }

    /// Moments of the selected rows, each weighted by `scale`.
    pub fn from_rows<'a>(
        arch: &Architecture,
        rows: impl IntoIterator<Item = (&'a DVector<f64>, &'a RowLocal)>,
        scale: f64,
    ) -> Self {
        let mut s = Self::zeros(arch);
        for (y, local) in rows {
            s.add_row(y, local, scale);
        }
        s
    }
}
