//! Step-size rules for the natural-gradient update.

use std::collections::BTreeMap;

use super::config::StepRule;
use super::gradient::NaturalGradient;

/// Smallest step the adaptive rule returns.
pub const MIN_STEP: f64 = 1e-6;

/// `s = ĝᵀĝ / ĥ` with `ĥ` the averaged squared norm `tr(V̂ + ĝĝᵀ)`,
/// clamped to `[MIN_STEP, 1]`. A zero second moment means no gradient noise
/// and gives the full step.
pub fn adaptive_step(g_bar: &[f64], h_bar: f64) -> f64 {
    if h_bar <= 0.0 {
        return 1.0;
    }
    let sq: f64 = g_bar.iter().map(|v| v * v).sum();
    (sq / h_bar).clamp(MIN_STEP, 1.0)
}

/// `a₀ (1 + t/τ)^(−0.75)` for `t ≥ 1`.
pub fn robbins_monro(a0: f64, tau: f64, t: usize) -> f64 {
    a0 * (1.0 + t as f64 / tau).powf(-0.75)
}

/// Exponentially weighted gradient moments for one factor group.
#[derive(Debug, Clone, Default)]
struct Moments {
    g: Vec<f64>,
    h: f64,
}

/// Step-size state across iterations, one entry per factor group
/// (layer, factor kind).
#[derive(Debug, Clone)]
pub struct StepState {
    rule: StepRule,
    groups: BTreeMap<(usize, usize), Moments>,
}

impl StepState {
    pub fn new(rule: StepRule) -> Self {
        StepState {
            rule,
            groups: BTreeMap::new(),
        }
    }

    /// Steps for iteration `t` (1-based) given this iteration's gradient.
    /// `exact` marks a full-batch gradient, which carries no sampling noise
    /// and always gets the unit step under the adaptive rule.
    pub fn next(
        &mut self,
        grad: &NaturalGradient,
        t: usize,
        exact: bool,
    ) -> BTreeMap<(usize, usize), f64> {
        let grouped = grad.by_group();
        match self.rule {
            StepRule::RobbinsMonro { a0, tau } => {
                let a = robbins_monro(a0, tau, t);
                grouped.keys().map(|&k| (k, a)).collect()
            }
            StepRule::Adaptive { window } => {
                let w = 1.0 / window;
                grouped
                    .into_iter()
                    .map(|(key, g)| {
                        let m = self.groups.entry(key).or_insert_with(|| Moments {
                            g: vec![0.0; g.len()],
                            h: 0.0,
                        });
                        let sq: f64 = g.iter().map(|v| v * v).sum();
                        for (a, b) in m.g.iter_mut().zip(&g) {
                            *a = (1.0 - w) * *a + w * b;
                        }
                        m.h = (1.0 - w) * m.h + w * sq;
                        let a = if exact { 1.0 } else { adaptive_step(&m.g, m.h) };
                        (key, a)
                    })
                    .collect()
            }
        }
    }
}
