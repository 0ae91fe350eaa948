use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::special::LN_2PI;

/// Multivariate normal with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct Mvn {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl Mvn {
    /// Returns `None` when `cov` is not positive definite.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Option<Self> {
        let d = mean.len();
        let chol = Cholesky::new(cov)?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        if !log_det.is_finite() {
            return None;
        }
        let log_norm = -0.5 * (d as f64 * LN_2PI + log_det);
        Some(Mvn {
            mean,
            chol,
            log_norm,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn log_pdf(&self, y: &DVector<f64>) -> f64 {
        let diff = y - &self.mean;
        // ‖L⁻¹(y − m)‖²
        let l = self.chol.l_dirty();
        let mut w = diff;
        let n = w.len();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= l[(i, j)] * w[j];
            }
            w[i] = s / l[(i, i)];
        }
        self.log_norm - 0.5 * w.norm_squared()
    }
}
