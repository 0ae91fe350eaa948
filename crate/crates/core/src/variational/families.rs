//! Exponential-family factors used by the mean-field approximation.
//!
//! Each family stores its usual parameters (mean/variance, shape/scale,
//! shape/rate, concentrations) and converts to and from natural parameters:
//!
//! | family         | sufficient statistics | natural parameters |
//! |----------------|-----------------------|--------------------|
//! | Gaussian       | `x, x²`               | `m/v, −1/(2v)`     |
//! | inverse-gamma  | `ln x, 1/x`           | `−(a+1), −b`       |
//! | gamma (rate)   | `ln x, x`             | `a − 1, −b`        |
//! | Dirichlet      | `ln p_k`              | `α_k − 1`          |

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::special::{digamma, ln_gamma, trigamma, LN_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFactor {
    pub mean: f64,
    pub var: f64,
}

impl GaussianFactor {
    pub fn new(mean: f64, var: f64) -> Self {
        GaussianFactor { mean, var }
    }

    pub fn second_moment(&self) -> f64 {
        self.mean * self.mean + self.var
    }

    pub fn entropy(&self) -> f64 {
        0.5 * (LN_2PI + 1.0 + self.var.ln())
    }

    pub fn natural(&self) -> [f64; 2] {
        [self.mean / self.var, -0.5 / self.var]
    }

    pub fn from_natural(eta: [f64; 2]) -> Self {
        let var = -0.5 / eta[1];
        GaussianFactor {
            mean: eta[0] * var,
            var,
        }
    }

    /// Gaussian with the given precision and precision-weighted mean.
    pub fn from_precision(precision: f64, weighted_mean: f64) -> Self {
        GaussianFactor {
            mean: weighted_mean / precision,
            var: 1.0 / precision,
        }
    }

    pub fn fisher(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[1.0 / self.var, 0.0, 0.0, 0.5 / (self.var * self.var)],
        )
    }

    /// `∂η/∂(m, v)`.
    pub fn natural_jacobian(&self) -> DMatrix<f64> {
        let v = self.var;
        DMatrix::from_row_slice(2, 2, &[1.0 / v, -self.mean / (v * v), 0.0, 0.5 / (v * v)])
    }
}

/// Inverse-gamma with density `b^a / Γ(a) x^{−a−1} e^{−b/x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaFactor {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaFactor {
    pub fn new(shape: f64, scale: f64) -> Self {
        InvGammaFactor { shape, scale }
    }

    /// `E[1/x]`.
    pub fn mean_inv(&self) -> f64 {
        self.shape / self.scale
    }

    pub fn mean_log(&self) -> f64 {
        self.scale.ln() - digamma(self.shape)
    }

    /// Finite only for shape above one.
    pub fn mean(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn mode(&self) -> f64 {
        self.scale / (self.shape + 1.0)
    }

    pub fn entropy(&self) -> f64 {
        let a = self.shape;
        a + self.scale.ln() + ln_gamma(a) - (1.0 + a) * digamma(a)
    }

    /// `E[log IG(x; shape, scale)]` where the scale is itself random with
    /// the supplied `E[log scale]` and `E[scale]`.
    pub fn expected_log_density(
        shape: f64,
        mean_log_scale: f64,
        mean_scale: f64,
        x: &InvGammaFactor,
    ) -> f64 {
        shape * mean_log_scale
            - ln_gamma(shape)
            - (shape + 1.0) * x.mean_log()
            - mean_scale * x.mean_inv()
    }

    pub fn natural(&self) -> [f64; 2] {
        [-(self.shape + 1.0), -self.scale]
    }

    pub fn from_natural(eta: [f64; 2]) -> Self {
        InvGammaFactor {
            shape: -eta[0] - 1.0,
            scale: -eta[1],
        }
    }

    pub fn fisher(&self) -> DMatrix<f64> {
        shape_scale_fisher(self.shape, self.scale)
    }

    pub fn natural_jacobian(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0])
    }
}

/// Gamma in the shape/rate parameterization, density
/// `b^a / Γ(a) x^{a−1} e^{−b x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFactor {
    pub shape: f64,
    pub rate: f64,
}

impl GammaFactor {
    pub fn new(shape: f64, rate: f64) -> Self {
        GammaFactor { shape, rate }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn mean_log(&self) -> f64 {
        digamma(self.shape) - self.rate.ln()
    }

    pub fn mode(&self) -> f64 {
        ((self.shape - 1.0) / self.rate).max(0.0)
    }

    pub fn entropy(&self) -> f64 {
        let a = self.shape;
        a - self.rate.ln() + ln_gamma(a) + (1.0 - a) * digamma(a)
    }

    /// `E[log Ga(x; shape, rate)]` with a random rate.
    pub fn expected_log_density(
        shape: f64,
        mean_log_rate: f64,
        mean_rate: f64,
        x: &GammaFactor,
    ) -> f64 {
        shape * mean_log_rate - ln_gamma(shape) + (shape - 1.0) * x.mean_log()
            - mean_rate * x.mean()
    }

    pub fn natural(&self) -> [f64; 2] {
        [self.shape - 1.0, -self.rate]
    }

    pub fn from_natural(eta: [f64; 2]) -> Self {
        GammaFactor {
            shape: eta[0] + 1.0,
            rate: -eta[1],
        }
    }

    pub fn fisher(&self) -> DMatrix<f64> {
        shape_scale_fisher(self.shape, self.rate)
    }

    pub fn natural_jacobian(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])
    }
}

fn shape_scale_fisher(a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[trigamma(a), -1.0 / b, -1.0 / b, a / (b * b)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletFactor {
    pub alpha: Vec<f64>,
}

impl DirichletFactor {
    pub fn new(alpha: Vec<f64>) -> Self {
        DirichletFactor { alpha }
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let t = self.total();
        self.alpha.iter().map(|a| a / t).collect()
    }

    pub fn mean_log(&self) -> Vec<f64> {
        let dt = digamma(self.total());
        self.alpha.iter().map(|&a| digamma(a) - dt).collect()
    }

    pub fn log_normalizer(alpha: &[f64]) -> f64 {
        alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(alpha.iter().sum())
    }

    pub fn entropy(&self) -> f64 {
        let k = self.alpha.len() as f64;
        let t = self.total();
        Self::log_normalizer(&self.alpha) + (t - k) * digamma(t)
            - self
                .alpha
                .iter()
                .map(|&a| (a - 1.0) * digamma(a))
                .sum::<f64>()
    }

    pub fn natural(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a - 1.0).collect()
    }

    pub fn from_natural(eta: &[f64]) -> Self {
        DirichletFactor {
            alpha: eta.iter().map(|e| e + 1.0).collect(),
        }
    }

    pub fn fisher(&self) -> DMatrix<f64> {
        let k = self.alpha.len();
        let common = trigamma(self.total());
        DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                trigamma(self.alpha[i]) - common
            } else {
                -common
            }
        })
    }

    pub fn natural_jacobian(&self) -> DMatrix<f64> {
        DMatrix::identity(self.alpha.len(), self.alpha.len())
    }
}

/// Which exponential family a factor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    InverseGamma,
    Gamma,
    Dirichlet,
}

/// A single variational factor of any supported family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Factor {
    Gaussian(GaussianFactor),
    InverseGamma(InvGammaFactor),
    Gamma(GammaFactor),
    Dirichlet(DirichletFactor),
}

impl Factor {
    pub fn family(&self) -> Family {
        match self {
            Factor::Gaussian(_) => Family::Gaussian,
            Factor::InverseGamma(_) => Family::InverseGamma,
            Factor::Gamma(_) => Family::Gamma,
            Factor::Dirichlet(_) => Family::Dirichlet,
        }
    }

    pub fn natural(&self) -> Vec<f64> {
        match self {
            Factor::Gaussian(f) => f.natural().to_vec(),
            Factor::InverseGamma(f) => f.natural().to_vec(),
            Factor::Gamma(f) => f.natural().to_vec(),
            Factor::Dirichlet(f) => f.natural(),
        }
    }

    /// Factor of the same family with natural parameters `eta`.
    pub fn with_natural(&self, eta: &[f64]) -> Factor {
        match self {
            Factor::Gaussian(_) => Factor::Gaussian(GaussianFactor::from_natural([eta[0], eta[1]])),
            Factor::InverseGamma(_) => {
                Factor::InverseGamma(InvGammaFactor::from_natural([eta[0], eta[1]]))
            }
            Factor::Gamma(_) => Factor::Gamma(GammaFactor::from_natural([eta[0], eta[1]])),
            Factor::Dirichlet(_) => Factor::Dirichlet(DirichletFactor::from_natural(eta)),
        }
    }

    /// Parameters in their stored form: `(m, v)`, `(a, b)` or `α`.
    pub fn stored(&self) -> Vec<f64> {
        match self {
            Factor::Gaussian(f) => vec![f.mean, f.var],
            Factor::InverseGamma(f) => vec![f.shape, f.scale],
            Factor::Gamma(f) => vec![f.shape, f.rate],
            Factor::Dirichlet(f) => f.alpha.clone(),
        }
    }

    pub fn with_stored(&self, theta: &[f64]) -> Factor {
        match self {
            Factor::Gaussian(_) => Factor::Gaussian(GaussianFactor::new(theta[0], theta[1])),
            Factor::InverseGamma(_) => {
                Factor::InverseGamma(InvGammaFactor::new(theta[0], theta[1]))
            }
            Factor::Gamma(_) => Factor::Gamma(GammaFactor::new(theta[0], theta[1])),
            Factor::Dirichlet(_) => Factor::Dirichlet(DirichletFactor::new(theta.to_vec())),
        }
    }

    /// Whether stored coordinate `i` is constrained positive (and so is
    /// log-transformed for unconstrained optimization).
    pub fn is_positive_coordinate(&self, i: usize) -> bool {
        !matches!(self, Factor::Gaussian(_)) || i == 1
    }

    /// Fisher information in the stored parameterization.
    pub fn fisher(&self) -> DMatrix<f64> {
        match self {
            Factor::Gaussian(f) => f.fisher(),
            Factor::InverseGamma(f) => f.fisher(),
            Factor::Gamma(f) => f.fisher(),
            Factor::Dirichlet(f) => f.fisher(),
        }
    }

    /// Jacobian of the natural parameters with respect to the stored ones.
    pub fn natural_jacobian(&self) -> DMatrix<f64> {
        match self {
            Factor::Gaussian(f) => f.natural_jacobian(),
            Factor::InverseGamma(f) => f.natural_jacobian(),
            Factor::Gamma(f) => f.natural_jacobian(),
            Factor::Dirichlet(f) => f.natural_jacobian(),
        }
    }

    pub fn is_valid(&self) -> bool {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match self {
            Factor::Gaussian(f) => f.mean.is_finite() && pos(f.var),
            Factor::InverseGamma(f) => pos(f.shape) && pos(f.scale),
            Factor::Gamma(f) => pos(f.shape) && pos(f.rate),
            Factor::Dirichlet(f) => f.alpha.iter().all(|&a| pos(a)),
        }
    }
}
