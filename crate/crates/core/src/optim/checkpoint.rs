//! Checkpoint JSON and trace CSV artifacts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use super::fit::{FitResult, FitTrace, RngState, TraceRecord};
use crate::arch::Architecture;
use crate::error::{Error, Result};
use crate::model::DmfaParams;
use crate::variational::{GlobalFactors, PointSummary, PriorHyperparams};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to reuse or reproduce a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub architecture: Architecture,
    pub prior: PriorHyperparams,
    pub config: FitConfig,
    pub rng: RngState,
    pub global: GlobalFactors,
    /// Full-data ELBO at the saved state.
    pub elbo: f64,
}

impl Checkpoint {
    pub fn new(result: &FitResult, prior: &PriorHyperparams, config: &FitConfig) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            architecture: result.global.architecture(),
            prior: prior.clone(),
            config: config.clone(),
            rng: result.rng,
            global: result.global.clone(),
            elbo: result.elbo.total,
        }
    }

    /// Point estimate used for clustering and density evaluation.
    pub fn params(&self) -> DmfaParams {
        self.global.point_estimate(PointSummary::Mode)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(s)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion(header.version));
        }
        let cp: Checkpoint = serde_json::from_str(s)?;
        if cp.global.architecture() != cp.architecture {
            return Err(Error::Invalid(
                "checkpoint factors do not match its architecture".into(),
            ));
        }
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(f.flush()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut s = String::new();
        BufReader::new(File::open(path)?).read_to_string(&mut s)?;
        Self::from_json(&s)
    }
}

/// Writes `iter,elbo,step,seconds`. Unless `wall_clock` is set the seconds
/// column is written as 0 so that repeated runs give identical files.
pub fn write_trace_csv<W: Write>(out: W, trace: &FitTrace, wall_clock: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "elbo", "step", "seconds"])?;
    for r in &trace.records {
        let secs = if wall_clock { r.seconds } else { 0.0 };
        w.write_record([
            r.iter.to_string(),
            r.elbo.to_string(),
            r.step.to_string(),
            secs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
