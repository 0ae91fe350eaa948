use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the per-group step size is chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StepRule {
    /// Noise-adaptive step from exponentially weighted gradient moments.
    Adaptive { window: f64 },
    /// `a₀ (1 + t/τ)^(−0.75)`.
    RobbinsMonro { a0: f64, tau: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Adaptive { window: 32.0 }
    }
}

/// Relative-change stopping rule on the recorded ELBO trace.
///
/// Stops once the means of the two most recent half-windows differ by less
/// than `tolerance` relative to their magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub window: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub batch_fraction: f64,
    pub batch_min: usize,
    pub batch_max: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Record the stochastic ELBO every this many iterations.
    pub elbo_record_stride: usize,
    pub convergence: Option<Convergence>,
    pub step_rule: StepRule,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            batch_fraction: 0.05,
            batch_min: 1,
            batch_max: 1024,
            max_iterations: 1000,
            seed: 0,
            elbo_record_stride: 1,
            convergence: None,
            step_rule: StepRule::default(),
        }
    }
}

impl FitConfig {
    /// Every row in every iteration; with unit steps this is plain
    /// coordinate ascent.
    pub fn full_batch(max_iterations: usize, seed: u64) -> Self {
        FitConfig {
            batch_fraction: 1.0,
            batch_max: usize::MAX,
            max_iterations,
            seed,
            ..FitConfig::default()
        }
    }

    /// `clamp(⌈batch_fraction · n⌉, batch_min, batch_max)`, never above `n`.
    pub fn batch_size(&self, n: usize) -> usize {
        let raw = (self.batch_fraction * n as f64).ceil();
        let raw = if raw >= usize::MAX as f64 {
            usize::MAX
        } else {
            raw as usize
        };
        raw.clamp(self.batch_min, self.batch_max).min(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(Error::Invalid("batch fraction must lie in (0, 1]".into()));
        }
        if self.batch_min == 0 || self.batch_min > self.batch_max {
            return Err(Error::Invalid("need 1 <= batch_min <= batch_max".into()));
        }
        if self.elbo_record_stride == 0 {
            return Err(Error::Invalid(
                "ELBO record stride must be at least 1".into(),
            ));
        }
        if let Some(c) = self.convergence {
            if c.window < 2 || !(c.tolerance > 0.0) {
                return Err(Error::Invalid(
                    "convergence window must be >= 2 with positive tolerance".into(),
                ));
            }
        }
        match self.step_rule {
            StepRule::Adaptive { window } if !(window >= 1.0) => {
                Err(Error::Invalid("adaptive step window must be >= 1".into()))
            }
            StepRule::RobbinsMonro { a0, tau } if !(a0 > 0.0 && a0 <= 1.0 && tau > 0.0) => Err(
                Error::Invalid("Robbins-Monro schedule needs 0 < a0 <= 1 and tau > 0".into()),
            ),
            _ => Ok(()),
        }
    }
}
