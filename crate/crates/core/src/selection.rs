//! Overfitted-mixture pruning and ELBO-based architecture selection.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arch::Architecture;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::optim::{fit, FitConfig, TraceRecord};
use crate::variational::{GlobalFactors, PriorSettings};

/// Default pruning threshold on the variational-mean mixing weights.
pub const PRUNE_THRESHOLD: f64 = 0.01;
/// Length of the short scoring run.
pub const SHORT_RUN_ITERATIONS: usize = 250;
/// First iteration of the scoring window; the window ends at
/// [`SHORT_RUN_ITERATIONS`] inclusive.
pub const SCORE_WINDOW_START: usize = 238;
/// Default component counts tried for layers below the first.
pub const DEFAULT_DEEPER_K: [usize; 3] = [1, 2, 3];

/// Outcome of pruning one layer. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub layer: usize,
    pub surviving: Vec<usize>,
    pub removed: Vec<usize>,
    /// Variational-mean weights before pruning.
    pub weights: Vec<f64>,
    /// Set when every weight fell below the threshold and only the largest
    /// component was kept.
    pub all_below_threshold: bool,
}

/// Drops components whose variational-mean weight is below `threshold`.
///
/// The Dirichlet factor keeps the surviving concentrations, so its mean is
/// the renormalized weight vector. The reduced model is meant to be refitted.
pub fn prune_components(
    g: &GlobalFactors,
    threshold: f64,
) -> Result<(Vec<PruneReport>, GlobalFactors)> {
    if !(threshold >= 0.0 && threshold < 1.0) {
        return Err(Error::Invalid(format!(
            "pruning threshold must lie in [0, 1), got {threshold}"
        )));
    }
    let mut reports = Vec::with_capacity(g.layers.len());
    let mut pruned = g.clone();
    for (l, lf) in pruned.layers.iter_mut().enumerate() {
        let weights = lf.weights.mean();
        let mut surviving: Vec<usize> = (0..weights.len())
            .filter(|&k| weights[k] >= threshold)
            .collect();
        let all_below = surviving.is_empty();
        if all_below {
            let best = (0..weights.len())
                .max_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            surviving.push(best);
        }
        let removed = (0..weights.len())
            .filter(|k| !surviving.contains(k))
            .collect();
        lf.weights.alpha = surviving.iter().map(|&k| lf.weights.alpha[k]).collect();
        lf.components = surviving
            .iter()
            .map(|&k| lf.components[k].clone())
            .collect();
        reports.push(PruneReport {
            layer: l,
            surviving,
            removed,
            weights,
            all_below_threshold: all_below,
        });
    }
    Ok((reports, pruned))
}

/// Component counts to cross with the dimension grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KProposals {
    pub first: Vec<usize>,
    pub deeper: Vec<usize>,
}

impl KProposals {
    pub fn new(first: Vec<usize>, deeper: Vec<usize>) -> Self {
        KProposals { first, deeper }
    }

    /// `first` for the first layer and [`DEFAULT_DEEPER_K`] below it.
    pub fn with_first(first: usize) -> Self {
        KProposals::new(vec![first], DEFAULT_DEEPER_K.to_vec())
    }
}

/// Default first-layer component count of an overfitted mixture, `⌊√n⌋`.
pub fn overfitted_components(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(1)
}

/// Every latent-dimension vector `(D1, …, DL)` with `1 ≤ D[l+1] ≤ (D[l] − 1)/2`.
pub fn dimension_grid(d: usize, layers: usize) -> Vec<Vec<usize>> {
    fn extend(prev: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        let max = prev.saturating_sub(1) / 2;
        for next in 1..=max {
            cur.push(next);
            extend(next, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if layers > 0 {
        extend(d, layers, &mut Vec::new(), &mut out);
    }
    out
}

/// The dimension grid for each requested depth crossed with the component
/// proposals. Candidates whose first layer has more components than there
/// are observations are kept; they fail at scoring time.
pub fn enumerate_architectures(
    d: usize,
    layers: &[usize],
    proposals: &KProposals,
) -> Result<Vec<Architecture>> {
    if d == 0 {
        return Err(Error::Invalid(
            "observed dimension must be at least 1".into(),
        ));
    }
    if proposals.first.is_empty() || proposals.first.contains(&0) || proposals.deeper.contains(&0) {
        return Err(Error::Invalid(
            "component proposals must be nonempty and positive".into(),
        ));
    }
    let mut out = Vec::new();
    for &depth in layers {
        if depth > 1 && proposals.deeper.is_empty() {
            return Err(Error::Invalid(
                "deeper component proposals must be nonempty".into(),
            ));
        }
        for latent in dimension_grid(d, depth) {
            let mut dims = vec![d];
            dims.extend(&latent);
            for ks in component_grid(&proposals.first, &proposals.deeper, depth) {
                let arch = Architecture::new(dims.clone(), ks)?;
                arch.validate(true)?;
                out.push(arch);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoCandidates);
    }
    Ok(out)
}

fn component_grid(first: &[usize], deeper: &[usize], depth: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = first.iter().map(|&k| vec![k]).collect();
    for _ in 1..depth {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                deeper.iter().map(move |&k| {
                    let mut v = prefix.clone();
                    v.push(k);
                    v
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CandidateStatus {
    Scored,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureCandidate {
    pub architecture: Architecture,
    /// Mean ELBO over the scoring window; `NaN` when failed.
    pub score: f64,
    pub status: CandidateStatus,
    pub seed: u64,
    pub seconds: f64,
}

impl ArchitectureCandidate {
    pub fn is_scored(&self) -> bool {
        self.status == CandidateStatus::Scored
    }
}

/// Mean recorded ELBO over iterations `238..=250`, or `None` when any of
/// those iterations is missing or non-finite.
pub fn tail_score(records: &[TraceRecord]) -> Option<f64> {
    let window: Vec<f64> = records
        .iter()
        .filter(|r| (SCORE_WINDOW_START..=SHORT_RUN_ITERATIONS).contains(&r.iter))
        .map(|r| r.elbo)
        .collect();
    let expected = SHORT_RUN_ITERATIONS - SCORE_WINDOW_START + 1;
    if window.len() != expected || window.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(window.iter().sum::<f64>() / expected as f64)
}

/// Runs the short fit for one candidate. Errors are captured in the status.
pub fn score_architecture(
    data: &Dataset,
    arch: &Architecture,
    prior: &PriorSettings,
    base: &FitConfig,
    seed: u64,
) -> ArchitectureCandidate {
    let start = Instant::now();
    let config = FitConfig {
        max_iterations: SHORT_RUN_ITERATIONS,
        elbo_record_stride: 1,
        convergence: None,
        seed,
        ..base.clone()
    };
    let outcome = prior
        .for_architecture(arch)
        .and_then(|p| fit(data, arch, &p, &config))
        .and_then(|r| {
            tail_score(&r.trace.records)
                .ok_or_else(|| Error::Invalid("scoring window is incomplete".into()))
        });
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(score) => ArchitectureCandidate {
            architecture: arch.clone(),
            score,
            status: CandidateStatus::Scored,
            seed,
            seconds,
        },
        Err(e) => ArchitectureCandidate {
            architecture: arch.clone(),
            score: f64::NAN,
            status: CandidateStatus::Failed {
                reason: e.to_string(),
            },
            seed,
            seconds,
        },
    }
}

/// Scores every candidate with seed `base_seed + index` on a pool of
/// `jobs` threads. The result is in candidate order whatever the schedule.
pub fn score_candidates(
    data: &Dataset,
    candidates: &[Architecture],
    prior: &PriorSettings,
    base: &FitConfig,
    base_seed: u64,
    jobs: usize,
) -> Result<Vec<ArchitectureCandidate>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        candidates
            .par_iter()
            .enumerate()
            .map(|(i, arch)| {
                score_architecture(data, arch, prior, base, base_seed.wrapping_add(i as u64))
            })
            .collect()
    }))
}

/// Highest-scoring candidate; exact ties go to the smaller parameter count,
/// then to the earlier candidate.
pub fn select_model(candidates: &[ArchitectureCandidate]) -> Result<&ArchitectureCandidate> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut best: Option<&ArchitectureCandidate> = None;
    for c in candidates
        .iter()
        .filter(|c| c.is_scored() && c.score.is_finite())
    {
        best = match best {
            None => Some(c),
            Some(b) if c.score > b.score => Some(c),
            Some(b)
                if c.score == b.score
                    && c.architecture.parameter_count() < b.architecture.parameter_count() =>
            {
                Some(c)
            }
            keep => keep,
        };
    }
    best.ok_or(Error::AllCandidatesFailed)
}

/// Writes `arch,score,status,params,seconds`. Seconds are written as zero
/// unless `wall_clock` is set, so reports are reproducible.
pub fn write_selection_csv<W: Write>(
    out: W,
    candidates: &[ArchitectureCandidate],
    wall_clock: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["arch", "score", "status", "params", "seconds"])?;
    for c in candidates {
        let status = match &c.status {
            CandidateStatus::Scored => "scored".to_string(),
            CandidateStatus::Failed { reason } => format!("failed: {reason}"),
        };
        let score = if c.is_scored() {
            format!("{:.10e}", c.score)
        } else {
            String::new()
        };
        let seconds = if wall_clock { c.seconds } else { 0.0 };
        w.write_record([
            crate::arch::ArchSpec::from(&c.architecture).to_string(),
            score,
            status,
            c.architecture.parameter_count().to_string(),
            format!("{seconds:.3}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
