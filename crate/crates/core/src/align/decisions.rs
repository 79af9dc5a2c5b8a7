use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::taxonomy::validate_principle;
use super::{AlignError, AlignmentResult, Decision, EthicsPrinciple, PrincipleSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Accept,
    Reject,
    Relabel,
    PromoteEmergent,
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Action::Accept => "accept",
            Action::Reject => "reject",
            Action::Relabel => "relabel",
            Action::PromoteEmergent => "promote_emergent",
        })
    }
}

/// Either an existing principle id or a new principle to create.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelPayload {
    Existing(String),
    New {
        id: String,
        label: String,
        definition: String,
    },
}

impl LabelPayload {
    pub fn id(&self) -> &str {
        match self {
            LabelPayload::Existing(id) => id,
            LabelPayload::New { id, .. } => id,
        }
    }
}

/// One line of `decisions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub topic_id: usize,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<LabelPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub decided_at: DateTime<Utc>,
}

/// Topic → principle mapping after human review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMapping {
    pub assignments: BTreeMap<usize, String>,
    /// Principles created by decisions and still referenced by an assignment.
    pub promoted: Vec<EthicsPrinciple>,
    /// Emergent topics without a decision.
    pub pending: Vec<usize>,
    pub rejected: Vec<usize>,
    /// The alignments with their latest decision applied.
    pub alignments: Vec<AlignmentResult>,
}

impl FinalMapping {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("mapping serializes");
        s.push('\n');
        s
    }

    /// Principle for an id, from the taxonomy or the promoted set.
    pub fn principle<'a>(&'a self, taxonomy: &'a [EthicsPrinciple], id: &str) -> Option<&'a EthicsPrinciple> {
        taxonomy.iter().chain(&self.promoted).find(|p| p.id == id)
    }
}

fn new_principle(id: &str, label: &str, definition: &str) -> Result<EthicsPrinciple, AlignError> {
    let p = EthicsPrinciple {
        id: id.to_string(),
        label: label.to_string(),
        definition: definition.to_string(),
        source: PrincipleSource::Emergent,
        framework_refs: Vec::new(),
    };
    validate_principle(&p)?;
    Ok(p)
}

/// Replays a decision log over the model's alignments, last write winning
/// per topic. Undecided assigned topics keep the model's principle;
/// undecided emergent topics are reported as pending.
pub fn apply_decisions(
    alignments: &[AlignmentResult],
    taxonomy: &[EthicsPrinciple],
    decisions: &[DecisionRecord],
) -> Result<FinalMapping, AlignError> {
    let known: BTreeSet<&str> = taxonomy.iter().map(|p| p.id.as_str()).collect();
    let mut promoted: BTreeMap<String, EthicsPrinciple> = BTreeMap::new();
    let mut current: BTreeMap<usize, AlignmentResult> =
        alignments.iter().map(|a| (a.topic_id, a.clone())).collect();

    for d in decisions {
        let Some(a) = current.get_mut(&d.topic_id) else {
            return Err(AlignError::UnknownTopic(d.topic_id));
        };
        let missing = || AlignError::MissingLabel {
            topic: d.topic_id,
            action: d.action.to_string(),
        };
        let is_known = |id: &str, promoted: &BTreeMap<String, EthicsPrinciple>| {
            known.contains(id) || promoted.contains_key(id)
        };
        let (decision, label) = match (d.action, &d.label) {
            (Action::Reject, _) => (Decision::Rejected, None),
            (Action::Accept, None) if a.emergent => return Err(missing()),
            (Action::Accept, None) => (Decision::Accepted, None),
            (Action::Accept | Action::Relabel, Some(LabelPayload::Existing(id))) => {
                if !is_known(id, &promoted) {
                    return Err(AlignError::UnknownLabel(id.clone()));
                }
                let state = if d.action == Action::Accept {
                    Decision::Accepted
                } else {
                    Decision::Relabeled
                };
                (state, Some(id.clone()))
            }
            (Action::Relabel, Some(LabelPayload::New { id, .. })) => {
                if !is_known(id, &promoted) {
                    return Err(AlignError::UnknownLabel(id.clone()));
                }
                (Decision::Relabeled, Some(id.clone()))
            }
            (Action::Relabel | Action::PromoteEmergent, None) => return Err(missing()),
            (Action::PromoteEmergent, Some(LabelPayload::Existing(id))) => {
                // promoting onto an existing emergent entry, e.g. from the overlay
                match taxonomy.iter().find(|p| &p.id == id) {
                    Some(p) if p.source == PrincipleSource::Emergent => (Decision::Accepted, Some(id.clone())),
                    Some(_) => return Err(AlignError::DuplicateId(id.clone())),
                    None if promoted.contains_key(id) => (Decision::Accepted, Some(id.clone())),
                    None => return Err(AlignError::UnknownLabel(id.clone())),
                }
            }
            (Action::Accept | Action::PromoteEmergent, Some(LabelPayload::New { id, label, definition })) => {
                match taxonomy.iter().find(|p| &p.id == id) {
                    Some(p) if p.source == PrincipleSource::Known => return Err(AlignError::DuplicateId(id.clone())),
                    Some(_) => {}
                    None => {
                        promoted.insert(id.clone(), new_principle(id, label, definition)?);
                    }
                }
                (Decision::Accepted, Some(id.clone()))
            }
        };
        a.decision = decision;
        a.decided_label = label;
        a.note = d.note.clone();
    }

    let mut out = FinalMapping {
        assignments: BTreeMap::new(),
        promoted: Vec::new(),
        pending: Vec::new(),
        rejected: Vec::new(),
        alignments: Vec::with_capacity(current.len()),
    };
    for (topic, a) in &current {
        let target = match a.decision {
            Decision::Rejected => {
                out.rejected.push(*topic);
                None
            }
            Decision::Pending if a.emergent => {
                out.pending.push(*topic);
                None
            }
            Decision::Pending => a.best_principle.clone(),
            Decision::Accepted | Decision::Relabeled => a.decided_label.clone().or_else(|| a.best_principle.clone()),
        };
        if let Some(id) = target {
            out.assignments.insert(*topic, id);
        }
    }
    let used: BTreeSet<&String> = out.assignments.values().collect();
    out.promoted = promoted.into_values().filter(|p| used.contains(&p.id)).collect();
    out.alignments = current.into_values().collect();
    Ok(out)
}

/// Reads the decision log; a missing file is an empty log.
pub fn read_decisions(path: &Path) -> Result<Vec<DecisionRecord>, AlignError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AlignError::DecisionFormat {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Appends one record to the log and flushes it to disk.
pub fn append_decision(path: &Path, record: &DecisionRecord) -> Result<(), AlignError> {
    let mut line = serde_json::to_string(record).expect("decision serializes");
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.sync_data()?;
    Ok(())
}
