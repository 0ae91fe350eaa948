//! Row standardization and trajectory preprocessing.

use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Number of coordinate pairs a trajectory is resampled to by default.
pub const TRAJECTORY_POINTS: usize = 50;

/// Scales every row to mean 0 and unit sample variance (denominator
/// `d − 1`). Constant rows are refused and listed (0-based) in the error.
pub fn standardize_rows(data: &Dataset) -> Result<Dataset> {
    let d = data.dim();
    if d < 2 {
        return Err(Error::Invalid(
            "standardizing rows needs at least 2 columns".into(),
        ));
    }
    let mut y = data.y.clone();
    let mut constant = Vec::new();
    for (i, mut row) in y.row_iter_mut().enumerate() {
        let mean = row.mean();
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d - 1) as f64;
        if !(var > 0.0) {
            constant.push(i);
            continue;
        }
        let sd = var.sqrt();
        row.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
    if !constant.is_empty() {
        return Err(Error::ConstantRows { rows: constant });
    }
    Dataset::new(y, data.labels.clone())
}

/// An ordered polyline of `(x, y)` positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub points: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(
                "trajectory has non-finite coordinates".into(),
            ));
        }
        Ok(Trajectory { points })
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| dist(w[0], w[1])).sum()
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Linear interpolation at `target_len` positions equally spaced in arc
/// length, flattened as `(x1, y1, x2, y2, …)`. Endpoints are copied exactly.
pub fn resample_trajectory(traj: &Trajectory, target_len: usize) -> Result<DVector<f64>> {
    let pts = &traj.points;
    if pts.len() < 2 {
        return Err(Error::Invalid(
            "a trajectory needs at least 2 points".into(),
        ));
    }
    if target_len < 2 {
        return Err(Error::Invalid(
            "resampling needs at least 2 target points".into(),
        ));
    }
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + dist(w[0], w[1]));
    }
    let total = *cum.last().unwrap();
    let last = target_len - 1;
    let mut out = DVector::zeros(2 * target_len);
    let mut seg = 0;
    for i in 0..target_len {
        let p = if i == 0 {
            pts[0]
        } else if i == last {
            pts[pts.len() - 1]
        } else {
            let s = total * i as f64 / last as f64;
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 {
                ((s - cum[seg]) / len).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (a, b) = (pts[seg], pts[seg + 1]);
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        };
        out[2 * i] = p[0];
        out[2 * i + 1] = p[1];
    }
    Ok(out)
}

/// Reverses the trajectory when its end is strictly closer to `center` than
/// its start.
pub fn canonicalize_direction(traj: &Trajectory, center: [f64; 2]) -> Trajectory {
    match (traj.points.first(), traj.points.last()) {
        (Some(&a), Some(&b)) if dist(b, center) < dist(a, center) => Trajectory {
            points: traj.points.iter().rev().copied().collect(),
        },
        _ => traj.clone(),
    }
}

/// One trajectory per line, each a JSON array of `[x, y]` pairs. Blank
/// lines are skipped.
pub fn read_trajectories<R: BufRead>(input: R) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let points: Vec<[f64; 2]> = serde_json::from_str(&line)
            .map_err(|e| Error::Invalid(format!("trajectory on line {}: {e}", i + 1)))?;
        out.push(Trajectory::new(points)?);
    }
    Ok(out)
}

/// Resamples (and optionally canonicalizes) every trajectory into one
/// dataset row each.
pub fn trajectories_to_dataset(
    trajs: &[Trajectory],
    target_len: usize,
    center: Option<[f64; 2]>,
) -> Result<Dataset> {
    let rows: Vec<DVector<f64>> = trajs
        .iter()
        .map(|t| match center {
            Some(c) => resample_trajectory(&canonicalize_direction(t, c), target_len),
            None => resample_trajectory(t, target_len),
        })
        .collect::<Result<_>>()?;
    let y = DMatrix::from_fn(rows.len(), 2 * target_len, |i, j| rows[i][j]);
    Dataset::new(y, None)
}
