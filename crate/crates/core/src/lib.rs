//! Voxel-wise correlation of fMRI volumes against ideal time series.
//!
//! The pipeline: read a NIfTI-1 volume ([`nifti`]) and one or more ideal
//! series ([`timeseries`]), refuse to run unless the operational assumptions
//! are checked and acknowledged ([`guard`]), then map Pearson, Spearman or
//! quadrant correlation per voxel against the best-matching ideal
//! ([`engine`], built on [`stats`]). [`oracle`] recomputes every number by
//! independent means, and [`gsn`] checks an assurance case whose evidence
//! nodes point at run results ([`evidence`]).
//!
//! ```
//! use fimcorr::stats;
//!
//! let r = stats::spearman(&[1.0, 2.0, 3.0], &[1.0, 8.0, 27.0]).unwrap();
//! assert_eq!(r.value(), Some(1.0));
//! assert_eq!(stats::ranks(&[1.0, 2.0, 2.0, 3.0]).as_slice(), &[1.0, 2.5, 2.5, 4.0]);
//! ```
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod engine;
pub mod evidence;
pub mod gsn;
pub mod guard;
pub mod nifti;
pub mod oracle;
pub mod stats;
pub mod timeseries;

pub use engine::{analyze, extrema, CorrelationMap, ExtremaReport, Statistic, Workers};
pub use guard::{check_inputs, warning_text, AssumptionReport};
pub use nifti::{read_volume, write_map, NiftiHeader, VolumeGrid4D};
pub use stats::{CorrelationValue, RankVector};
pub use timeseries::{parse_1d, read_1d, IdealSeries};
