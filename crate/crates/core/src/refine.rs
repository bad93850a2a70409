//! Pre-processor loop: expert notes plus the current template go to a model,
//! which proposes new Context/Expertise bodies. A proposal changes nothing
//! until it is approved and applied.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ChatMessage, ChatRequest, Client, ClientError, ContentPart};
use crate::prompt::{
    guidelines, merge_refinement, preprocessor_instruction, render_template, template_skeleton, PromptError,
    PromptTemplate, SectionKind, TemplateStore,
};

const FENCE: &str = "````";
const RATIONALE: &str = "RATIONALE:";

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("invalid refinement request: {0}")]
    InvalidRequest(String),
    #[error("pre-processor response could not be parsed: {0}")]
    MalformedOutput(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("proposal {0} does not exist")]
    UnknownProposal(u64),
    #[error("proposal {id} is {status}, not approved")]
    NotApproved { id: u64, status: ProposalStatus },
    #[error("proposal {id} is already {status}")]
    IllegalTransition { id: u64, status: ProposalStatus },
    #[error("proposal {0} is still pending")]
    PendingExists(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementRequest {
    pub notes: String,
    pub current: PromptTemplate,
    /// Falls back to the bundled guidelines.
    #[serde(default)]
    pub guidelines: Option<String>,
    pub target_sections: Vec<SectionKind>,
}

impl RefinementRequest {
    pub fn new(notes: impl Into<String>, current: PromptTemplate, target_sections: Vec<SectionKind>) -> Self {
        Self {
            notes: notes.into(),
            current,
            guidelines: None,
            target_sections,
        }
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        if self.notes.trim().is_empty() {
            return Err(RefineError::InvalidRequest("notes are empty".into()));
        }
        if self.target_sections.is_empty() {
            return Err(RefineError::InvalidRequest("no target sections".into()));
        }
        if let Some(k) = self.target_sections.iter().find(|k| k.is_mandatory()) {
            return Err(RefineError::InvalidRequest(format!(
                "{} cannot be refined, only context and expertise",
                k.name()
            )));
        }
        Ok(())
    }

    fn targets(&self) -> Vec<SectionKind> {
        let mut t = self.target_sections.clone();
        t.sort();
        t.dedup();
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Pending,
    Approved,
    Rejected,
}

impl fmt::Display for ProposalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProposalStatus::Pending => "pending",
            ProposalStatus::Approved => "approved",
            ProposalStatus::Rejected => "rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementProposal {
    /// Assigned by [`ProposalBook::submit`]; 0 before that.
    pub id: u64,
    pub base_version: u64,
    pub proposed: BTreeMap<SectionKind, String>,
    pub rationale: String,
    pub status: ProposalStatus,
}

fn fenced(text: &str) -> String {
    format!("\n\n{FENCE}\n{text}\n{FENCE}\n")
}

/// System and user text of the pre-processor request.
///
/// The instruction's placeholders are replaced by fenced blocks holding the
/// section skeleton, the guidelines and the current template file verbatim.
pub fn meta_prompt(request: &RefinementRequest) -> (String, String) {
    let guide = request.guidelines.as_deref().unwrap_or_else(|| guidelines());
    let system = preprocessor_instruction()
        .replace("`<prompt template>`", &fenced(template_skeleton()))
        .replace("`<prompt engineering guidelines>`", &fenced(guide))
        .replace("`<current instruction prompt>`", &fenced(&render_template(&request.current)));

    let targets = request.targets();
    let names: Vec<&str> = targets.iter().map(|k| k.header()).collect();
    let mut user = format!("PROCESS ENGINEER NOTES:\n\n{}\n\n", request.notes.trim());
    user.push_str(&format!("Rewrite only these sections: {}.\n", names.join(", ")));
    user.push_str(
        "Return the complete new body of each section, not just the changes. \
         Answer with the section header on its own line followed by the body in a block fenced with four backticks. \
         After the last block, write a line starting with RATIONALE: and briefly explain the changes.\n\n",
    );
    for k in &targets {
        user.push_str(&format!("{}\n{FENCE}\n<new body>\n{FENCE}\n\n", k.header()));
    }
    user.push_str("RATIONALE: <explanation>");
    (system, user)
}

pub fn meta_request(client: &Client, request: &RefinementRequest) -> Result<ChatRequest, RefineError> {
    let (system, user) = meta_prompt(request);
    Ok(ChatRequest::new(
        client.config(),
        vec![ChatMessage::system(system), ChatMessage::user(vec![ContentPart::text(user)])],
    )?)
}

fn header_kind(line: &str) -> Option<SectionKind> {
    let t = line.trim().trim_matches(|c| c == '*' || c == '#' || c == ' ');
    SectionKind::ALL.into_iter().find(|k| t.eq_ignore_ascii_case(k.header()))
}

/// Parses the fenced-block response. Blocks for sections outside `targets`
/// are dropped; every target must be present and a rationale must follow.
pub fn parse_response(
    raw: &str,
    targets: &[SectionKind],
) -> Result<(BTreeMap<SectionKind, String>, String), RefineError> {
    let lines: Vec<&str> = raw.lines().collect();
    let mut found = BTreeMap::new();
    let mut rationale = None;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(rest) = line.trim().trim_start_matches('*').strip_prefix(RATIONALE) {
            let mut text = vec![rest.trim_start_matches('*').trim()];
            text.extend(lines[i + 1..].iter().map(|l| l.trim_end()));
            rationale = Some(text.join("\n").trim().to_string());
            break;
        }
        if let Some(kind) = header_kind(line) {
            let mut j = i + 1;
            while j < lines.len() && lines[j].trim().is_empty() {
                j += 1;
            }
            if j >= lines.len() || !lines[j].trim_start().starts_with(FENCE) {
                return Err(RefineError::MalformedOutput(format!("{} has no fenced body", kind.header())));
            }
            let start = j + 1;
            let end = (start..lines.len())
                .find(|&k| lines[k].trim() == FENCE)
                .ok_or_else(|| RefineError::MalformedOutput(format!("{} block is not closed", kind.header())))?;
            if found.insert(kind, lines[start..end].join("\n")).is_some() {
                return Err(RefineError::MalformedOutput(format!("{} appears twice", kind.header())));
            }
            i = end + 1;
            continue;
        }
        i += 1;
    }
    for k in targets {
        if !found.contains_key(k) {
            return Err(RefineError::MalformedOutput(format!("missing {}", k.header())));
        }
    }
    let rationale = rationale
        .filter(|r| !r.is_empty())
        .ok_or_else(|| RefineError::MalformedOutput("missing RATIONALE".into()))?;
    found.retain(|k, _| targets.contains(k));
    Ok((found, rationale))
}

/// Asks the pre-processor model for a proposal. Touches no template store.
pub fn refine(client: &Client, request: &RefinementRequest) -> Result<RefinementProposal, RefineError> {
    request.validate()?;
    let chat = meta_request(client, request)?;
    let reply = client.send(&chat)?;
    let (proposed, rationale) = parse_response(&reply.raw_text, &request.targets())?;
    Ok(RefinementProposal {
        id: 0,
        base_version: request.current.version,
        proposed,
        rationale,
        status: ProposalStatus::Pending,
    })
}

fn provenance(p: &RefinementProposal) -> String {
    format!("refinement {}: {}", p.id, p.rationale)
}

/// Merges an approved proposal into `current`, yielding the next version.
pub fn apply(proposal: &RefinementProposal, current: &PromptTemplate) -> Result<PromptTemplate, RefineError> {
    if proposal.status != ProposalStatus::Approved {
        return Err(RefineError::NotApproved {
            id: proposal.id,
            status: proposal.status,
        });
    }
    let mut next = merge_refinement(current, &proposal.proposed, false)?;
    next.provenance = provenance(proposal);
    Ok(next)
}

pub fn apply_to_store<'a>(
    proposal: &RefinementProposal,
    store: &'a mut TemplateStore,
) -> Result<&'a PromptTemplate, RefineError> {
    if proposal.status != ProposalStatus::Approved {
        return Err(RefineError::NotApproved {
            id: proposal.id,
            status: proposal.status,
        });
    }
    Ok(store.merge(&proposal.proposed, false, &provenance(proposal))?)
}

/// All proposals of one template lineage; at most one is pending at a time.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProposalBook {
    proposals: Vec<RefinementProposal>,
}

impl ProposalBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> Option<&RefinementProposal> {
        self.proposals.iter().find(|p| p.status == ProposalStatus::Pending)
    }

    pub fn submit(&mut self, mut proposal: RefinementProposal) -> Result<&RefinementProposal, RefineError> {
        if let Some(p) = self.pending() {
            return Err(RefineError::PendingExists(p.id));
        }
        proposal.id = self.proposals.len() as u64 + 1;
        proposal.status = ProposalStatus::Pending;
        self.proposals.push(proposal);
        Ok(self.proposals.last().expect("just pushed"))
    }

    pub fn get(&self, id: u64) -> Result<&RefinementProposal, RefineError> {
        self.proposals
            .iter()
            .find(|p| p.id == id)
            .ok_or(RefineError::UnknownProposal(id))
    }

    pub fn all(&self) -> &[RefinementProposal] {
        &self.proposals
    }

    fn transition(&mut self, id: u64, to: ProposalStatus) -> Result<&RefinementProposal, RefineError> {
        let p = self
            .proposals
            .iter_mut()
            .find(|p| p.id == id)
            .ok_or(RefineError::UnknownProposal(id))?;
        if p.status != ProposalStatus::Pending {
            return Err(RefineError::IllegalTransition { id, status: p.status });
        }
        p.status = to;
        Ok(p)
    }

    pub fn approve(&mut self, id: u64) -> Result<&RefinementProposal, RefineError> {
        self.transition(id, ProposalStatus::Approved)
    }

    pub fn reject(&mut self, id: u64) -> Result<&RefinementProposal, RefineError> {
        self.transition(id, ProposalStatus::Rejected)
    }

    /// Approves `id` and merges it into `store` in one step.
    pub fn approve_and_apply<'a>(
        &mut self,
        id: u64,
        store: &'a mut TemplateStore,
    ) -> Result<&'a PromptTemplate, RefineError> {
        let proposal = self.get(id)?.clone();
        if proposal.status != ProposalStatus::Pending {
            return Err(RefineError::IllegalTransition {
                id,
                status: proposal.status,
            });
        }
        let approved = RefinementProposal {
            status: ProposalStatus::Approved,
            ..proposal
        };
        // Merge first so a failed merge leaves the proposal pending.
        let current = apply_to_store(&approved, store)?;
        self.approve(id)?;
        Ok(current)
    }
}
