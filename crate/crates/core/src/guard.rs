//! Operational-assumption checks run before any map is computed.
//!
//! Some assumptions can be checked mechanically (positive samples, matching
//! lengths); the rest are the user's responsibility and are only recorded as
//! acknowledged or not. Any failure or missing acknowledgment refuses the run.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::evidence::Outcome;
use crate::nifti::VolumeGrid4D;
use crate::timeseries::IdealSeries;

pub const POSITIVITY: &str = "GA.1.positivity";
pub const LENGTH_MATCH: &str = "GA.1.length_match";
pub const MIN_FRAMES: &str = "GA.1.min_frames";
pub const IDEAL_PRESENT: &str = "GA.1.ideal_present";
pub const A1_SCALE: &str = "GA.2.A1_interval_or_ratio";
pub const A2_LINEARITY: &str = "GA.2.A2_linearity";
pub const A3_NORMALITY: &str = "GA.2.A3_bivariate_normality";

const A1_TEXT: &str = "The variables should be either of type interval or ratio.";
const A2_TEXT: &str = "There is a linear relationship between the two variables.";
const A3_TEXT: &str = "The variables are bivariately normally distributed.";

const WARNING: &str = "\
WARNING: correlation maps are only meaningful if these assumptions hold.
The software cannot check them for you; you are responsible for them:
  A1: The variables should be either of type interval or ratio.
  A2: There is a linear relationship between the two variables.
  A3: The variables are bivariately normally distributed.
The Pearson model used here is parametric. This program cannot tell whether
a parametric model suits your data; if a non-parametric method would be more
appropriate, use a different tool. Pass --ack-assumptions to confirm you have
checked A1-A3.
";

/// The fixed reminder shown on every run.
pub fn warning_text() -> &'static str {
    WARNING
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Machine,
    UserObligation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Acknowledged,
    Unacknowledged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Proceed,
    Refuse,
}

/// Where a failed check points.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Voxel {
        i: usize,
        j: usize,
        k: usize,
        t: usize,
        value: f64,
    },
    Ideal {
        label: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub id: &'static str,
    pub kind: CheckKind,
    pub status: CheckStatus,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<Location>,
}

impl AssumptionCheck {
    fn machine(id: &'static str, failure: Option<(String, Option<Location>)>) -> Self {
        match failure {
            None => Self {
                id,
                kind: CheckKind::Machine,
                status: CheckStatus::Pass,
                detail: String::new(),
                location: None,
            },
            Some((detail, location)) => Self {
                id,
                kind: CheckKind::Machine,
                status: CheckStatus::Fail,
                detail,
                location,
            },
        }
    }

    fn obligation(id: &'static str, statement: &str, acknowledged: bool) -> Self {
        Self {
            id,
            kind: CheckKind::UserObligation,
            status: if acknowledged {
                CheckStatus::Acknowledged
            } else {
                CheckStatus::Unacknowledged
            },
            detail: statement.to_string(),
            location: None,
        }
    }

    pub fn passed(&self) -> bool {
        matches!(self.status, CheckStatus::Pass | CheckStatus::Acknowledged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub verdict: Verdict,
}

impl AssumptionReport {
    pub fn proceeds(&self) -> bool {
        self.verdict == Verdict::Proceed
    }

    pub fn check(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Outcomes keyed `assumption.<id>`, for evidence linking.
    pub fn evidence(&self) -> BTreeMap<String, Outcome> {
        let mut out: BTreeMap<String, Outcome> = self
            .checks
            .iter()
            .map(|c| (format!("assumption.{}", c.id), Outcome::from_pass(c.passed())))
            .collect();
        out.insert(
            "assumption.verdict".to_string(),
            Outcome::from_pass(self.proceeds()),
        );
        out
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operational assumption checks:")?;
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Acknowledged => "acknowledged",
                CheckStatus::Unacknowledged => "NOT ACKNOWLEDGED",
            };
            write!(f, "  [{status:>16}] {}", c.id)?;
            match &c.location {
                Some(Location::Voxel { i, j, k, t, value }) => write!(
                    f,
                    ": sample {value} at voxel {} (zero-based; one-based ({},{},{})) frame {t}",
                    c.detail,
                    i + 1,
                    j + 1,
                    k + 1
                )?,
                _ if !c.detail.is_empty() => write!(f, ": {}", c.detail)?,
                _ => {}
            }
            writeln!(f)?;
        }
        let verdict = match self.verdict {
            Verdict::Proceed => "proceed",
            Verdict::Refuse => "REFUSE (no maps will be computed)",
        };
        writeln!(f, "Verdict: {verdict}")
    }
}

fn positivity(volume: &VolumeGrid4D) -> Option<(String, Option<Location>)> {
    let n = volume.samples().par_iter().position_first(|&s| !(s > 0.0))?;
    let voxels = volume.voxel_count();
    let (i, j, k) = volume.voxel_coords(n % voxels);
    Some((
        format!("({i},{j},{k})"),
        Some(Location::Voxel {
            i,
            j,
            k,
            t: n / voxels,
            value: volume.samples()[n],
        }),
    ))
}

/// Run every machine check and record each user obligation.
pub fn check_inputs(
    volume: &VolumeGrid4D,
    ideals: &[IdealSeries],
    acknowledged: bool,
) -> AssumptionReport {
    let nt = volume.frames();
    let length = ideals.iter().find(|e| e.len() != nt).map(|e| {
        (
            format!("ideal {} has {} values, volume has {nt} frames", e.label(), e.len()),
            Some(Location::Ideal {
                label: e.label().to_string(),
            }),
        )
    });
    let frames = (nt < 2).then(|| (format!("volume has {nt} frame(s), need at least 2"), None));
    let present = ideals
        .is_empty()
        .then(|| ("no ideal time series supplied".to_string(), None));

    let checks = vec![
        AssumptionCheck::machine(POSITIVITY, positivity(volume)),
        AssumptionCheck::machine(LENGTH_MATCH, length),
        AssumptionCheck::machine(MIN_FRAMES, frames),
        AssumptionCheck::machine(IDEAL_PRESENT, present),
        AssumptionCheck::obligation(A1_SCALE, A1_TEXT, acknowledged),
        AssumptionCheck::obligation(A2_LINEARITY, A2_TEXT, acknowledged),
        AssumptionCheck::obligation(A3_NORMALITY, A3_TEXT, acknowledged),
    ];
    let verdict = if checks.iter().all(AssumptionCheck::passed) {
        Verdict::Proceed
    } else {
        Verdict::Refuse
    };
    AssumptionReport { checks, verdict }
}
