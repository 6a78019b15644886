//! Voxel-wise correlation against one or more ideal time series.
//!
//! For every voxel the best ideal is the one with the largest |Pearson r|
//! (lowest index on ties, undefined values excluded). Every requested
//! statistic is then computed between the voxel and that single ideal.
//!
//! Voxels are processed in contiguous chunks, each chunk transposed into a
//! voxel-major buffer so that time series are read sequentially. Results do
//! not depend on the number of workers.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::guard::AssumptionReport;
use crate::nifti::{self, VolumeGrid4D, VoxelMap};
use crate::stats::{self, CorrelationValue, StatsError};
use crate::timeseries::IdealSeries;

const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Pearson,
    Spearman,
    Quadrant,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Self::Pearson, Self::Spearman, Self::Quadrant];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pearson => "pearson",
            Self::Spearman => "spearman",
            Self::Quadrant => "quadrant",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown statistic {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workers {
    #[default]
    Auto,
    Fixed(NonZeroUsize),
}

impl FromStr for Workers {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse::<NonZeroUsize>()
            .map(Self::Fixed)
            .map_err(|_| format!("workers must be a positive integer or \"auto\", got {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("assumption checks did not pass; refusing to compute maps")]
    GuardNotPassed,
    #[error("ideal {label} has {len} values, volume has {frames} frames")]
    LengthMismatch {
        label: String,
        len: usize,
        frames: usize,
    },
    #[error("no voxel has a defined correlation (every voxel is constant)")]
    NoDefinedVoxels,
    #[error("internal consistency error at voxel {voxel:?}: {source}")]
    Internal {
        voxel: (usize, usize, usize),
        #[source]
        source: StatsError,
    },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// One statistic over the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub dims: (usize, usize, usize),
    pub statistic: Statistic,
    /// Undefined voxels hold 0.
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
    /// Index into the ideal list, per voxel; `None` where no ideal gave a defined r.
    pub best_ideal: Vec<Option<usize>>,
}

impl CorrelationMap {
    fn index(&self, (i, j, k): (usize, usize, usize)) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    pub fn coords(&self, v: usize) -> (usize, usize, usize) {
        let (nx, ny, _) = self.dims;
        (v % nx, (v / nx) % ny, v / (nx * ny))
    }

    pub fn value_at(&self, ijk: (usize, usize, usize)) -> Option<f64> {
        let v = self.index(ijk);
        self.defined[v].then_some(self.values[v])
    }

    pub fn best_ideal_at(&self, ijk: (usize, usize, usize)) -> Option<usize> {
        self.best_ideal[self.index(ijk)]
    }

    pub fn defined_count(&self) -> usize {
        self.defined.iter().filter(|&&d| d).count()
    }

    pub fn undefined_voxels(&self) -> Vec<(usize, usize, usize)> {
        (0..self.defined.len())
            .filter(|&v| !self.defined[v])
            .map(|v| self.coords(v))
            .collect()
    }
}

impl VoxelMap for CorrelationMap {
    fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    fn values(&self) -> &[f64] {
        &self.values
    }

    fn defined(&self) -> &[bool] {
        &self.defined
    }
}

/// Per-ideal quantities that do not depend on the voxel.
struct PreparedIdeal {
    centered: Vec<f64>,
    ss: f64,
    ranks: Vec<f64>,
    rank_centered: Vec<f64>,
    rank_ss: f64,
}

impl PreparedIdeal {
    fn new(ideal: &IdealSeries) -> Self {
        let (centered, ss) = stats::center(ideal.values());
        let ranks = stats::ranks(ideal.values()).into_vec();
        let (rank_centered, rank_ss) = stats::center(&ranks);
        Self {
            centered,
            ss,
            ranks,
            rank_centered,
            rank_ss,
        }
    }
}

struct VoxelResult {
    best: Option<usize>,
    values: Vec<CorrelationValue>,
}

fn analyze_voxel(
    series: &[f64],
    ideals: &[PreparedIdeal],
    statistics: &[Statistic],
) -> Result<VoxelResult, StatsError> {
    let (centered, ss) = stats::center(series);
    let mut best: Option<(usize, f64)> = None;
    for (e, ideal) in ideals.iter().enumerate() {
        if let CorrelationValue::Defined(r) =
            stats::pearson_centered(&centered, ss, &ideal.centered, ideal.ss)?
        {
            if best.is_none_or(|(_, b)| r.abs() > b.abs()) {
                best = Some((e, r));
            }
        }
    }
    let Some((best_index, best_r)) = best else {
        let reason = CorrelationValue::Undefined(stats::Undefined::ZeroVarianceLeft);
        return Ok(VoxelResult {
            best: None,
            values: vec![reason; statistics.len()],
        });
    };
    let ideal = &ideals[best_index];

    let needs_ranks = statistics.iter().any(|s| *s != Statistic::Pearson);
    let ranks = needs_ranks.then(|| stats::ranks(series).into_vec());
    let mut values = Vec::with_capacity(statistics.len());
    for stat in statistics {
        let value = match stat {
            Statistic::Pearson => CorrelationValue::Defined(best_r),
            Statistic::Spearman => {
                let (rc, rss) = stats::center(ranks.as_deref().unwrap());
                stats::pearson_centered(&rc, rss, &ideal.rank_centered, ideal.rank_ss)?
            }
            Statistic::Quadrant => {
                stats::quadrant_from_ranks(ranks.as_deref().unwrap(), &ideal.ranks)
            }
        };
        values.push(value);
    }
    Ok(VoxelResult {
        best: Some(best_index),
        values,
    })
}

fn analyze_chunk(
    volume: &VolumeGrid4D,
    range: std::ops::Range<usize>,
    ideals: &[PreparedIdeal],
    statistics: &[Statistic],
) -> Result<Vec<VoxelResult>, EngineError> {
    let nt = volume.frames();
    let voxels = volume.voxel_count();
    let width = range.len();
    let samples = volume.samples();
    let mut block = vec![0.0; width * nt];
    for t in 0..nt {
        let frame = &samples[t * voxels + range.start..t * voxels + range.end];
        for (c, &s) in frame.iter().enumerate() {
            block[c * nt + t] = s;
        }
    }
    block
        .chunks_exact(nt)
        .enumerate()
        .map(|(c, series)| {
            analyze_voxel(series, ideals, statistics).map_err(|source| EngineError::Internal {
                voxel: volume.voxel_coords(range.start + c),
                source,
            })
        })
        .collect()
}

/// Compute one map per requested statistic (duplicates ignored, order kept).
pub fn analyze(
    volume: &VolumeGrid4D,
    ideals: &[IdealSeries],
    statistics: &[Statistic],
    guard: &AssumptionReport,
    workers: Workers,
) -> Result<Vec<CorrelationMap>, EngineError> {
    if !guard.proceeds() {
        return Err(EngineError::GuardNotPassed);
    }
    let frames = volume.frames();
    if let Some(e) = ideals.iter().find(|e| e.len() != frames) {
        return Err(EngineError::LengthMismatch {
            label: e.label().to_string(),
            len: e.len(),
            frames,
        });
    }
    let mut stats_list: Vec<Statistic> = Vec::new();
    for s in statistics {
        if !stats_list.contains(s) {
            stats_list.push(*s);
        }
    }
    let prepared: Vec<PreparedIdeal> = ideals.iter().map(PreparedIdeal::new).collect();

    let voxels = volume.voxel_count();
    let run = || -> Result<Vec<Vec<VoxelResult>>, EngineError> {
        (0..voxels.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let range = c * CHUNK..((c + 1) * CHUNK).min(voxels);
                analyze_chunk(volume, range, &prepared, &stats_list)
            })
            .collect()
    };
    let chunks = match workers {
        Workers::Auto => run()?,
        Workers::Fixed(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.get())
            .build()
            .map_err(|e| EngineError::Pool(e.to_string()))?
            .install(run)?,
    };

    let results: Vec<VoxelResult> = chunks.into_iter().flatten().collect();
    if results.iter().all(|r| r.best.is_none()) {
        return Err(EngineError::NoDefinedVoxels);
    }
    let best_ideal: Vec<Option<usize>> = results.iter().map(|r| r.best).collect();
    Ok(stats_list
        .iter()
        .enumerate()
        .map(|(s, &statistic)| {
            let (values, defined) = results
                .iter()
                .map(|r| match r.values[s] {
                    CorrelationValue::Defined(v) => (v, true),
                    CorrelationValue::Undefined(_) => (0.0, false),
                })
                .unzip();
            CorrelationMap {
                dims: volume.spatial_dims(),
                statistic,
                values,
                defined,
                best_ideal: best_ideal.clone(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub value: f64,
    /// Zero-based.
    pub index: (usize, usize, usize),
    pub one_based: (usize, usize, usize),
    pub anatomical: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremaReport {
    pub statistic: Statistic,
    pub min: Extremum,
    pub max: Extremum,
}

impl fmt::Display for ExtremaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, e) in [("min", &self.min), ("max", &self.max)] {
            writeln!(
                f,
                "{:>8} {name}: {:+.6} at {:?} (one-based {:?}) {}",
                self.statistic.name(),
                e.value,
                e.index,
                e.one_based,
                e.anatomical
            )?;
        }
        Ok(())
    }
}

/// Global minimum and maximum over defined voxels.
///
/// Ties go to the lexicographically smallest `(i, j, k)`.
pub fn extrema(map: &CorrelationMap) -> Result<ExtremaReport, EngineError> {
    let mut min: Option<(f64, (usize, usize, usize))> = None;
    let mut max: Option<(f64, (usize, usize, usize))> = None;
    for v in (0..map.values.len()).filter(|&v| map.defined[v]) {
        let value = map.values[v];
        let at = map.coords(v);
        if min.is_none_or(|(m, mi)| value < m || (value == m && at < mi)) {
            min = Some((value, at));
        }
        if max.is_none_or(|(m, mi)| value > m || (value == m && at < mi)) {
            max = Some((value, at));
        }
    }
    let (Some(min), Some(max)) = (min, max) else {
        return Err(EngineError::NoDefinedVoxels);
    };
    let describe = |(value, index): (f64, (usize, usize, usize))| Extremum {
        value,
        index,
        one_based: (index.0 + 1, index.1 + 1, index.2 + 1),
        anatomical: nifti::voxel_to_anatomical(index, map.dims)
            .expect("index comes from the map itself"),
    };
    Ok(ExtremaReport {
        statistic: map.statistic,
        min: describe(min),
        max: describe(max),
    })
}
