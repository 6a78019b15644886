//! Pass/fail outcomes keyed by name, shared by run reports and GSN evidence linking.
//!
//! On disk this is a JSON object with an `evidence` member:
//!
//! ```json
//! { "evidence": { "oracle.pearson": "pass", "assumption.GA.1.positivity": "fail" } }
//! ```
//!
//! Run reports written with `--report structured` carry the same member, so
//! they can be passed to `gsn-check` directly. Other members are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceResults {
    pub evidence: BTreeMap<String, Outcome>,
}

impl EvidenceResults {
    pub fn get(&self, key: &str) -> Option<Outcome> {
        self.evidence.get(key).copied()
    }

    pub fn insert(&mut self, key: impl Into<String>, outcome: Outcome) {
        self.evidence.insert(key.into(), outcome);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = (String, Outcome)>) {
        self.evidence.extend(entries);
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_report_with_extra_members() {
        let r = EvidenceResults::from_json(
            r#"{"tool": "x", "evidence": {"a": "pass", "b": "fail"}, "maps": []}"#,
        )
        .unwrap();
        assert_eq!(r.get("a"), Some(Outcome::Pass));
        assert_eq!(r.get("b"), Some(Outcome::Fail));
        assert_eq!(r.get("c"), None);
    }

    #[test]
    fn rejects_unknown_outcome() {
        assert!(EvidenceResults::from_json(r#"{"evidence": {"a": "maybe"}}"#).is_err());
    }
}
