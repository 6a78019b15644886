//! Goal Structuring Notation cases in a line-oriented text format.
//!
//! ```text
//! # comment
//! GOAL      G      "Maps are correct"
//! CONTEXT   C_Ga   "Correct means ..." supports G
//! GOAL      GI     "Implementation meets requirements" supports G
//! EVIDENCE  E_GI.1 "Oracle agreement" supports GI key=oracle.all
//! ```
//!
//! Each line is `KIND LABEL "statement"` followed by an optional
//! `supports P1,P2` and, on evidence, an optional `key=NAME` naming an entry
//! in a results document (see [`crate::evidence`]). Children point at their
//! parents.
//!
//! Label conventions: goals are a bare name (the root of a sub-structure,
//! e.g. `G`, `GR`, `G_3C`) optionally followed by `.n` segments that extend
//! the parent goal's label (`G.1` under `G`, `G.1.2` under `G.1`). Other
//! nodes carry a kind prefix: `S_`, `C_`, `J_`, `A_`, and `E_<name>.<n>` for
//! evidence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::evidence::{EvidenceResults, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Goal,
    Strategy,
    Context,
    Justification,
    Assumption,
    Evidence,
}

impl NodeKind {
    const ALL: [NodeKind; 6] = [
        Self::Goal,
        Self::Strategy,
        Self::Context,
        Self::Justification,
        Self::Assumption,
        Self::Evidence,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Self::Goal => "GOAL",
            Self::Strategy => "STRATEGY",
            Self::Context => "CONTEXT",
            Self::Justification => "JUSTIFICATION",
            Self::Assumption => "ASSUMPTION",
            Self::Evidence => "EVIDENCE",
        }
    }

    fn prefix(self) -> Option<&'static str> {
        match self {
            Self::Goal => None,
            Self::Strategy => Some("S_"),
            Self::Context => Some("C_"),
            Self::Justification => Some("J_"),
            Self::Assumption => Some("A_"),
            Self::Evidence => Some("E_"),
        }
    }
}

impl FromStr for NodeKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.keyword() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GsnNode {
    pub label: String,
    pub kind: NodeKind,
    pub statement: String,
    pub supports: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GsnError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: label {label} already defined")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: {label} supports unknown node {target}")]
    DanglingReference {
        line: usize,
        label: String,
        target: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GsnCase {
    nodes: Vec<GsnNode>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl GsnCase {
    pub fn nodes(&self) -> &[GsnNode] {
        &self.nodes
    }

    pub fn node(&self, label: &str) -> Option<&GsnNode> {
        self.index.get(label).map(|&i| &self.nodes[i])
    }

    /// `(child, parent)` support edges in declaration order.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        self.nodes
            .iter()
            .flat_map(|n| n.supports.iter().map(move |p| (n.label.as_str(), p.as_str())))
            .collect()
    }

    pub fn children<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a GsnNode> + 'a {
        self.nodes
            .iter()
            .filter(move |n| n.supports.iter().any(|p| p == label))
    }

    /// Goals nothing else supports.
    pub fn roots(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Goal && n.supports.is_empty())
            .map(|n| n.label.as_str())
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!(
                "{} {} \"{}\"",
                n.kind.keyword(),
                n.label,
                n.statement.replace('\\', "\\\\").replace('"', "\\\"")
            ));
            if !n.supports.is_empty() {
                out.push_str(&format!(" supports {}", n.supports.join(",")));
            }
            if let Some(key) = &n.key {
                out.push_str(&format!(" key={key}"));
            }
            out.push('\n');
        }
        out
    }
}

fn syntax(line: usize, message: impl Into<String>) -> GsnError {
    GsnError::Syntax {
        line,
        message: message.into(),
    }
}

fn is_label(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Split off a leading quoted string, handling `\"` and `\\`.
fn take_quoted(s: &str, line: usize) -> Result<(String, &str), GsnError> {
    let rest = s
        .strip_prefix('"')
        .ok_or_else(|| syntax(line, "expected quoted statement"))?;
    let mut out = String::new();
    let mut chars = rest.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Ok((out, &rest[i + 1..])),
            '\\' => match chars.next() {
                Some((_, e @ ('"' | '\\'))) => out.push(e),
                _ => return Err(syntax(line, "bad escape in statement")),
            },
            c => out.push(c),
        }
    }
    Err(syntax(line, "unterminated statement"))
}

fn parse_line(text: &str, line: usize) -> Result<GsnNode, GsnError> {
    let (kind_word, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let kind: NodeKind = kind_word
        .parse()
        .map_err(|_| syntax(line, format!("unknown node kind {kind_word:?}")))?;
    let rest = rest.trim_start();
    let (label, rest) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    if !is_label(label) {
        return Err(syntax(line, format!("invalid label {label:?}")));
    }
    let (statement, rest) = take_quoted(rest.trim_start(), line)?;

    let mut supports = Vec::new();
    let mut key = None;
    let mut tokens = rest.split_whitespace().peekable();
    while let Some(tok) = tokens.next() {
        if tok == "supports" {
            // allow "supports A, B" as well as "supports A,B"
            let mut list = String::new();
            while let Some(&t) = tokens.peek() {
                if t.starts_with("key=") {
                    break;
                }
                list.push_str(t);
                tokens.next();
            }
            for target in list.split(',').map(str::trim) {
                if !is_label(target) {
                    return Err(syntax(line, format!("invalid support target {target:?}")));
                }
                supports.push(target.to_string());
            }
        } else if let Some(k) = tok.strip_prefix("key=") {
            if kind != NodeKind::Evidence {
                return Err(syntax(line, "only EVIDENCE nodes take a key"));
            }
            if k.is_empty() {
                return Err(syntax(line, "empty key"));
            }
            key = Some(k.to_string());
        } else {
            return Err(syntax(line, format!("unexpected token {tok:?}")));
        }
    }
    Ok(GsnNode {
        label: label.to_string(),
        kind,
        statement,
        supports,
        key,
    })
}

pub fn parse_case(text: &str) -> Result<GsnCase, GsnError> {
    let mut nodes = Vec::new();
    let mut lines = Vec::new();
    let mut index = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let node = parse_line(trimmed, line)?;
        if index.insert(node.label.clone(), nodes.len()).is_some() {
            return Err(GsnError::DuplicateLabel {
                line,
                label: node.label,
            });
        }
        nodes.push(node);
        lines.push(line);
    }
    for (node, &line) in nodes.iter().zip(&lines) {
        if let Some(target) = node.supports.iter().find(|t| !index.contains_key(*t)) {
            return Err(GsnError::DanglingReference {
                line,
                label: node.label.clone(),
                target: target.clone(),
            });
        }
    }
    Ok(GsnCase { nodes, index })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum Issue {
    UndevelopedGoal { label: String },
    LabelViolation { label: String, reason: String },
    Cycle { labels: Vec<String> },
    OrphanEvidence { label: String },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UndevelopedGoal { label } => write!(f, "undeveloped goal {label}"),
            Self::LabelViolation { reason, .. } => f.write_str(reason),
            Self::Cycle { labels } => write!(f, "cycle through {}", labels.join(" -> ")),
            Self::OrphanEvidence { label } => write!(f, "orphan evidence {label}"),
        }
    }
}

/// Non-fatal convention notes, e.g. a context not named `C_<goal><letter>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub label: String,
    pub message: String,
}

fn goal_label_ok(label: &str) -> bool {
    let mut parts = label.split('.');
    let head = parts.next().unwrap_or("");
    let head_ok = head.starts_with(|c: char| c.is_ascii_alphabetic())
        && head.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    head_ok && parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
}

fn evidence_label_ok(label: &str) -> bool {
    let Some(body) = label.strip_prefix("E_") else {
        return false;
    };
    let mut parts = body.split('.');
    let name = parts.next().unwrap_or("");
    let rest: Vec<&str> = parts.collect();
    !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !rest.is_empty()
        && rest
            .iter()
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
}

/// Goals a node hangs under, looking through strategies.
fn parent_goals<'a>(case: &'a GsnCase, node: &'a GsnNode) -> BTreeSet<&'a str> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<&str> = node.supports.iter().map(String::as_str).collect();
    let mut seen = BTreeSet::new();
    while let Some(label) = stack.pop() {
        if !seen.insert(label) {
            continue;
        }
        let Some(parent) = case.node(label) else {
            continue;
        };
        match parent.kind {
            NodeKind::Goal => {
                out.insert(parent.label.as_str());
            }
            NodeKind::Strategy => stack.extend(parent.supports.iter().map(String::as_str)),
            _ => {}
        }
    }
    out
}

fn label_issues(case: &GsnCase) -> Vec<Issue> {
    let mut issues = Vec::new();
    for node in case.nodes() {
        let violation = |reason: String| Issue::LabelViolation {
            label: node.label.clone(),
            reason,
        };
        match node.kind {
            NodeKind::Goal => {
                if !goal_label_ok(&node.label) {
                    issues.push(violation(format!(
                        "goal label {} is not a name followed by .<n> segments",
                        node.label
                    )));
                    continue;
                }
                if !node.label.contains('.') {
                    // a bare name starts a new sub-structure
                    continue;
                }
                let (stem, _) = node.label.rsplit_once('.').unwrap();
                for parent in parent_goals(case, node) {
                    if parent != stem {
                        issues.push(violation(format!(
                            "label {} does not extend {parent}",
                            node.label
                        )));
                    }
                }
            }
            NodeKind::Evidence => {
                if !evidence_label_ok(&node.label) {
                    issues.push(violation(format!(
                        "evidence label {} is not E_<name>.<n>",
                        node.label
                    )));
                }
            }
            kind => {
                let prefix = kind.prefix().unwrap();
                if !node.label.starts_with(prefix) || node.label.len() == prefix.len() {
                    issues.push(violation(format!(
                        "{} label {} lacks prefix {prefix}",
                        kind.keyword().to_lowercase(),
                        node.label
                    )));
                }
            }
        }
    }
    issues
}

fn is_developed(case: &GsnCase, label: &str, seen: &mut BTreeSet<String>) -> bool {
    if !seen.insert(label.to_string()) {
        return false;
    }
    let children: Vec<&GsnNode> = case.children(label).collect();
    children.into_iter().any(|c| match c.kind {
        NodeKind::Goal | NodeKind::Evidence => true,
        NodeKind::Strategy => is_developed(case, &c.label, seen),
        _ => false,
    })
}

fn cycle_issues(case: &GsnCase) -> Vec<Issue> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        case: &GsnCase,
        v: usize,
        marks: &mut [Mark],
        stack: &mut Vec<usize>,
        found: &mut BTreeSet<Vec<String>>,
    ) {
        marks[v] = Mark::Active;
        stack.push(v);
        for parent in &case.nodes[v].supports {
            let p = case.index[parent];
            match marks[p] {
                Mark::New => visit(case, p, marks, stack, found),
                Mark::Active => {
                    let start = stack.iter().position(|&x| x == p).unwrap();
                    let mut cycle: Vec<String> = stack[start..]
                        .iter()
                        .map(|&x| case.nodes[x].label.clone())
                        .collect();
                    // rotate so the smallest label leads, to deduplicate
                    let min = (0..cycle.len()).min_by_key(|&i| &cycle[i]).unwrap();
                    cycle.rotate_left(min);
                    found.insert(cycle);
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[v] = Mark::Done;
    }

    let mut marks = vec![Mark::New; case.nodes.len()];
    let mut found = BTreeSet::new();
    for v in 0..case.nodes.len() {
        if marks[v] == Mark::New {
            visit(case, v, &mut marks, &mut Vec::new(), &mut found);
        }
    }
    found
        .into_iter()
        .map(|labels| Issue::Cycle { labels })
        .collect()
}

/// Structural problems: undeveloped goals, label-scheme violations, cycles
/// and orphan evidence. Sorted, so output is deterministic.
pub fn validate(case: &GsnCase) -> Vec<Issue> {
    let mut issues = Vec::new();
    for node in case.nodes() {
        match node.kind {
            NodeKind::Goal if !is_developed(case, &node.label, &mut BTreeSet::new()) => {
                issues.push(Issue::UndevelopedGoal {
                    label: node.label.clone(),
                });
            }
            NodeKind::Evidence if node.supports.is_empty() => {
                issues.push(Issue::OrphanEvidence {
                    label: node.label.clone(),
                });
            }
            _ => {}
        }
    }
    issues.extend(label_issues(case));
    issues.extend(cycle_issues(case));
    issues.sort();
    issues
}

/// Naming-convention notes that do not fail validation: contexts, strategies,
/// justifications and assumptions are expected to be named
/// `<prefix><goal><letter>`, e.g. `C_Ga` or `J_GRb`, where the goal is the
/// node they support or the goal above a strategy they support.
pub fn warnings(case: &GsnCase) -> Vec<Warning> {
    let mut out = Vec::new();
    for node in case.nodes() {
        let Some(prefix) = node.kind.prefix() else {
            continue;
        };
        if node.kind == NodeKind::Evidence || !node.label.starts_with(prefix) {
            continue;
        }
        let body = &node.label[prefix.len()..];
        let mut candidates: BTreeSet<&str> = node.supports.iter().map(String::as_str).collect();
        candidates.extend(parent_goals(case, node));
        let matches_parent = candidates.iter().any(|p| {
            body.strip_prefix(p)
                .is_some_and(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase()))
        });
        if !matches_parent {
            out.push(Warning {
                label: node.label.clone(),
                message: format!(
                    "{} is not named {prefix}<supported label><letter>",
                    node.label
                ),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceStatus {
    Satisfied,
    Violated,
    Missing,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkSummary {
    pub satisfied: usize,
    pub violated: usize,
    pub missing: usize,
    pub unkeyed: usize,
}

/// A case plus the status of each keyed evidence node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatedCase {
    pub case: GsnCase,
    pub status: BTreeMap<String, EvidenceStatus>,
    pub summary: LinkSummary,
}

pub fn link_evidence(case: &GsnCase, results: &EvidenceResults) -> AnnotatedCase {
    let mut status = BTreeMap::new();
    let mut summary = LinkSummary::default();
    for node in case.nodes().iter().filter(|n| n.kind == NodeKind::Evidence) {
        let Some(key) = &node.key else {
            summary.unkeyed += 1;
            continue;
        };
        let s = match results.get(key) {
            Some(Outcome::Pass) => {
                summary.satisfied += 1;
                EvidenceStatus::Satisfied
            }
            Some(Outcome::Fail) => {
                summary.violated += 1;
                EvidenceStatus::Violated
            }
            None => {
                summary.missing += 1;
                EvidenceStatus::Missing
            }
        };
        status.insert(node.label.clone(), s);
    }
    AnnotatedCase {
        case: case.clone(),
        status,
        summary,
    }
}

impl AnnotatedCase {
    /// Graphviz description; parents above children.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph gsn {\n  rankdir=BT;\n  node [fontsize=10];\n");
        for n in self.case.nodes() {
            let shape = match n.kind {
                NodeKind::Goal => "box",
                NodeKind::Strategy => "parallelogram",
                NodeKind::Context => "box, style=rounded",
                NodeKind::Justification | NodeKind::Assumption => "ellipse",
                NodeKind::Evidence => "circle",
            };
            let color = match self.status.get(&n.label) {
                Some(EvidenceStatus::Satisfied) => ", color=green",
                Some(EvidenceStatus::Violated) => ", color=red",
                Some(EvidenceStatus::Missing) => ", color=orange",
                None => "",
            };
            let text = format!("{}\\n{}", n.label, n.statement).replace('"', "\\\"");
            out.push_str(&format!(
                "  \"{}\" [shape={shape}{color}, label=\"{text}\"];\n",
                n.label
            ));
        }
        for (child, parent) in self.case.edges() {
            out.push_str(&format!("  \"{child}\" -> \"{parent}\";\n"));
        }
        out.push_str("}\n");
        out
    }
}
