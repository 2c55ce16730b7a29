//! Current status data: ingestion, validation, the monitoring-time grid, and
//! the isotonic survival pre-check.
//!
//! Each subject is examined once at a monitoring time `u` and only the
//! indicator of whether the event has already happened is recorded. The
//! baseline distribution function can jump only at the distinct observed
//! monitoring times, so the grid is always derived from the data itself.

use std::path::Path;

use crate::error::{Error, Result};
use crate::real::Real;

/// One subject: monitoring time, event status at that time, and the
/// covariate vector whose first entry is the intercept 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<R> {
    pub time: R,
    /// true when the event had occurred by `time`
    pub event: bool,
    pub covariates: Vec<R>,
}

impl<R: Real> Observation<R> {
    pub fn new(time: R, event: bool, covariates: Vec<R>) -> Result<Self> {
        if !(time > R::zero()) || !time.is_finite() {
            return Err(Error::invalid(format!(
                "monitoring time must be positive and finite, got {time}"
            )));
        }
        if covariates.is_empty() || covariates[0] != R::one() {
            return Err(Error::invalid(
                "covariate vector must start with the intercept entry 1",
            ));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariates must be finite"));
        }
        Ok(Observation {
            time,
            event,
            covariates,
        })
    }

    /// Status indicator as a scalar (1 = event by `time`).
    pub fn delta(&self) -> R {
        if self.event {
            R::one()
        } else {
            R::zero()
        }
    }
}

/// Strictly increasing distinct monitoring times s_1 < ... < s_{n0}.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitoringGrid<R> {
    knots: Vec<R>,
}

impl<R: Real> MonitoringGrid<R> {
    pub fn knots(&self) -> &[R] {
        &self.knots
    }

    pub fn n0(&self) -> usize {
        self.knots.len()
    }

    /// Index of the exact knot equal to `t`, if any.
    pub fn index_of(&self, t: R) -> Option<usize> {
        self.knots
            .binary_search_by(|k| k.partial_cmp(&t).expect("grid knots are ordered"))
            .ok()
    }

    /// Largest index l with s_l <= t, if any knot is <= t.
    pub fn index_at_or_below(&self, t: R) -> Option<usize> {
        match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&t).expect("grid knots are ordered"))
        {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }
}

/// Sorted, deduplicated grid from raw monitoring times.
pub fn build_grid<R: Real>(times: &[R]) -> Result<MonitoringGrid<R>> {
    if times.is_empty() {
        return Err(Error::invalid("cannot build a grid from an empty list"));
    }
    for &t in times {
        if !(t > R::zero()) || !t.is_finite() {
            return Err(Error::invalid(format!(
                "monitoring times must be positive and finite, got {t}"
            )));
        }
    }
    let mut knots = times.to_vec();
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    knots.dedup();
    Ok(MonitoringGrid { knots })
}

/// Validated dataset plus its grid and the per-observation knot index.
#[derive(Debug, Clone)]
pub struct CurrentStatusDataset<R> {
    observations: Vec<Observation<R>>,
    grid: MonitoringGrid<R>,
    knot_index: Vec<usize>,
}

impl<R: Real> CurrentStatusDataset<R> {
    /// Builds the dataset with its grid derived from the observed times.
    pub fn from_observations(observations: Vec<Observation<R>>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::invalid("dataset has no observations"));
        }
        let times: Vec<R> = observations.iter().map(|o| o.time).collect();
        let grid = build_grid(&times)?;
        Self::from_parts(observations, grid)
    }

    /// Builds from observations and an explicit grid. The observation list
    /// may be empty (prior-only runs); every observed time must coincide with
    /// a knot.
    pub fn from_parts(observations: Vec<Observation<R>>, grid: MonitoringGrid<R>) -> Result<Self> {
        let dim = observations.first().map(|o| o.covariates.len());
        if let Some(d) = dim {
            if let Some(bad) = observations.iter().find(|o| o.covariates.len() != d) {
                return Err(Error::Dimension {
                    what: "covariate vector",
                    expected: d,
                    actual: bad.covariates.len(),
                });
            }
        }
        let mut knot_index = Vec::with_capacity(observations.len());
        for o in &observations {
            let idx = grid.index_of(o.time).ok_or_else(|| {
                Error::invalid(format!("monitoring time {} is not a grid knot", o.time))
            })?;
            knot_index.push(idx);
        }
        Ok(CurrentStatusDataset {
            observations,
            grid,
            knot_index,
        })
    }

    pub fn observations(&self) -> &[Observation<R>] {
        &self.observations
    }

    pub fn grid(&self) -> &MonitoringGrid<R> {
        &self.grid
    }

    /// 0-based index l of the knot with s_l == u_i.
    pub fn knot_index(&self) -> &[usize] {
        &self.knot_index
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    /// Covariate dimension k+1 including the intercept (0 when empty).
    pub fn n_covariates(&self) -> usize {
        self.observations.first().map_or(0, |o| o.covariates.len())
    }

    /// Per-knot (events, subjects) counts.
    pub fn knot_counts(&self) -> Vec<(usize, usize)> {
        let mut counts = vec![(0usize, 0usize); self.grid.n0()];
        for (obs, &l) in self.observations.iter().zip(&self.knot_index) {
            counts[l].1 += 1;
            if obs.event {
                counts[l].0 += 1;
            }
        }
        counts
    }
}

/// Weighted pool-adjacent-violators fit: the non-decreasing vector closest to
/// `values` in the weighted least-squares sense, which is also the NPMLE of a
/// monotone binomial success probability.
pub fn pava_nondecreasing<R: Real>(values: &[R], weights: &[R]) -> Vec<R> {
    assert_eq!(values.len(), weights.len());
    // (value, weight, run length) blocks
    let mut blocks: Vec<(R, R, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() >= 2 {
            let (v2, w2, k2) = blocks[blocks.len() - 1];
            let (v1, w1, k1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.pop();
            blocks.pop();
            let w = w1 + w2;
            blocks.push(((v1 * w1 + v2 * w2) / w, w, k1 + k2));
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (v, _, k) in blocks {
        out.extend(std::iter::repeat(v).take(k));
    }
    out
}

/// Nonparametric maximum likelihood estimate of the survival function at the
/// grid knots: one minus the isotonic fit of the per-knot event fractions,
/// weighted by per-knot counts. A tail plateau above zero suggests a cured
/// subgroup.
pub fn npmle_survival<R: Real>(data: &CurrentStatusDataset<R>) -> Result<Vec<R>> {
    if data.n() == 0 {
        return Err(Error::invalid("NPMLE needs a nonempty dataset"));
    }
    let counts = data.knot_counts();
    let mut fractions = Vec::with_capacity(counts.len());
    let mut weights = Vec::with_capacity(counts.len());
    for &(events, total) in &counts {
        if total == 0 {
            return Err(Error::invalid("grid knot without observations"));
        }
        fractions.push(R::of(events as f64) / R::of(total as f64));
        weights.push(R::of(total as f64));
    }
    let fit = pava_nondecreasing(&fractions, &weights);
    Ok(fit.into_iter().map(|f| R::one() - f).collect())
}

/// Column mapping for delimited text input.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub time_col: String,
    pub status_col: String,
    pub covariate_cols: Vec<String>,
}

/// Loads a delimited text file (comma or tab, header row required, `#`
/// comment lines skipped) into a validated dataset. The intercept column is
/// synthesized, never read.
pub fn load_dataset<R: Real>(path: &Path, schema: &ColumnMap) -> Result<CurrentStatusDataset<R>> {
    let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let delimiter = sniff_delimiter(&raw);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("column '{name}' not found in header")))
    };
    let time_idx = col(&schema.time_col)?;
    let status_idx = col(&schema.status_col)?;
    let cov_idx: Vec<usize> = schema
        .covariate_cols
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;

    let mut observations = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |idx: usize| -> Result<f64> {
            let text = record.get(idx).ok_or_else(|| Error::Parse {
                row,
                message: format!("missing field {idx}"),
            })?;
            text.parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("'{text}' is not a number"),
            })
        };
        let time = field(time_idx)?;
        let status = field(status_idx)?;
        if status != 0.0 && status != 1.0 {
            return Err(Error::invalid(format!(
                "status must be 0 or 1, got {status} at data row {row}"
            )));
        }
        if !(time > 0.0) || !time.is_finite() {
            return Err(Error::invalid(format!(
                "monitoring time must be positive, got {time} at data row {row}"
            )));
        }
        let mut covariates = Vec::with_capacity(cov_idx.len() + 1);
        covariates.push(R::one());
        for &idx in &cov_idx {
            covariates.push(R::of(field(idx)?));
        }
        observations.push(Observation::new(R::of(time), status == 1.0, covariates)?);
    }
    CurrentStatusDataset::from_observations(observations)
}

fn sniff_delimiter(raw: &str) -> u8 {
    let header = raw
        .lines()
        .find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Two-column (knot, survival) delimited text for the NPMLE pre-check.
pub fn npmle_table<R: Real>(grid: &MonitoringGrid<R>, survival: &[R]) -> String {
    let mut out = String::from("knot\tsurvival\n");
    for (k, s) in grid.knots().iter().zip(survival) {
        out.push_str(&format!("{k}\t{s}\n"));
    }
    out
}
