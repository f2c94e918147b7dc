//! Message assembly: Initial Context, optional reflection turn, Voting Prompt.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{render_project_table, ListTreatment, PresentedList};
use crate::persona::PersonaText;

const INITIAL_CONTEXT: &str = include_str!("../fixtures/initial_context.txt");
const VOTING: &str = include_str!("../fixtures/voting.txt");
const COT: &str = include_str!("../fixtures/cot.txt");

pub const PERSONA_SLOT: &str = "{persona}";
pub const INSTRUCTION_SLOT: &str = "{instruction}";
pub const TABLE_SLOT: &str = "{project_table}";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("initial context is empty")]
    EmptyContext,
    #[error("voting template lacks the {0} placeholder")]
    MissingPlaceholder(&'static str),
    #[error("reading template {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Ballot input format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VotingMethod {
    Approval,
    KApproval { k: usize },
    Cumulative { points: u32 },
    Ranked { top: usize },
}

impl VotingMethod {
    pub const K_APPROVAL: VotingMethod = VotingMethod::KApproval { k: 5 };
    pub const CUMULATIVE: VotingMethod = VotingMethod::Cumulative { points: 10 };
    pub const RANKED: VotingMethod = VotingMethod::Ranked { top: 5 };

    pub const ALL: [VotingMethod; 4] = [
        VotingMethod::Approval,
        VotingMethod::K_APPROVAL,
        VotingMethod::CUMULATIVE,
        VotingMethod::RANKED,
    ];

    pub fn code(self) -> &'static str {
        match self {
            VotingMethod::Approval => "appr",
            VotingMethod::KApproval { .. } => "kapp",
            VotingMethod::Cumulative { .. } => "cumu",
            VotingMethod::Ranked { .. } => "rank",
        }
    }

    pub fn is_approval_like(self) -> bool {
        matches!(self, VotingMethod::Approval | VotingMethod::KApproval { .. })
    }
}

impl fmt::Display for VotingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for VotingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "appr" | "approval" => Ok(VotingMethod::Approval),
            "kapp" | "k-approval" | "5-approval" => Ok(VotingMethod::K_APPROVAL),
            "cumu" | "cumulative" => Ok(VotingMethod::CUMULATIVE),
            "rank" | "ranked" => Ok(VotingMethod::RANKED),
            other => Err(format!("unknown voting method {other:?}")),
        }
    }
}

/// The instruction text shown to voters for each method.
pub fn voting_instruction(method: VotingMethod) -> String {
    match method {
        VotingMethod::Approval => {
            "Select any number of projects. Here, in this vote, you can select all the projects you approve of.".into()
        }
        VotingMethod::KApproval { k } => format!("Select exactly {k} projects."),
        VotingMethod::Cumulative { points } => format!(
            "Distribute {points} points among the projects you like. List the projects and the points you allocate, separated by a colon."
        ),
        VotingMethod::Ranked { top } => {
            format!("Select {top} projects and rank them from the most preferred to the {top}th most preferred.")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

/// Ordered turns sent to one agent, plus the treatment axes that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub turns: Vec<Turn>,
    pub method: VotingMethod,
    pub treatment: ListTreatment,
    pub persona_used: bool,
    pub cot_used: bool,
}

impl PromptBundle {
    /// Stable JSON form used for hashing and caching.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn initial_context(&self) -> &Turn {
        &self.turns[0]
    }

    pub fn voting_turn(&self) -> &Turn {
        self.turns.last().expect("bundle has turns")
    }

    /// The reflection turn, when the bundle carries one.
    pub fn reflection_turn(&self) -> Option<&Turn> {
        self.cot_used.then(|| &self.turns[1])
    }
}

/// The three text templates used to build prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub initial_context: String,
    pub voting: String,
    pub cot: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            initial_context: INITIAL_CONTEXT.to_string(),
            voting: VOTING.to_string(),
            cot: COT.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Reads `initial_context.txt`, `voting.txt` and `cot.txt` from `dir`,
    /// falling back to the builtin text for any missing file.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut out = Self::default();
        for (name, slot) in [
            ("initial_context.txt", &mut out.initial_context),
            ("voting.txt", &mut out.voting),
            ("cot.txt", &mut out.cot),
        ] {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(&path).map_err(|source| PromptError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        Ok(out)
    }

    pub fn assemble(
        &self,
        persona: Option<&PersonaText>,
        method: VotingMethod,
        list: &PresentedList,
        cot: bool,
    ) -> Result<PromptBundle, PromptError> {
        if self.initial_context.trim().is_empty() {
            return Err(PromptError::EmptyContext);
        }
        for slot in [INSTRUCTION_SLOT, TABLE_SLOT] {
            if !self.voting.contains(slot) {
                return Err(PromptError::MissingPlaceholder(slot));
            }
        }
        let persona_text = persona.map(|p| p.text.as_str()).unwrap_or("");
        let context = if self.initial_context.contains(PERSONA_SLOT) {
            self.initial_context.replace(PERSONA_SLOT, persona_text)
        } else if persona.is_some() {
            format!("{}\n\n{}", self.initial_context.trim_end(), persona_text)
        } else {
            self.initial_context.clone()
        };

        let mut turns = vec![Turn {
            role: Role::System,
            text: context.trim().to_string(),
        }];
        if cot {
            turns.push(Turn {
                role: Role::User,
                text: self.cot.trim().to_string(),
            });
        }
        let voting = self
            .voting
            .replace(INSTRUCTION_SLOT, &voting_instruction(method))
            .replace(TABLE_SLOT, &render_project_table(list));
        turns.push(Turn {
            role: Role::User,
            text: voting.trim().to_string(),
        });
        Ok(PromptBundle {
            turns,
            method,
            treatment: list.treatment(),
            persona_used: persona.is_some(),
            cot_used: cot,
        })
    }
}

/// Assembles a bundle from an explicit Initial Context and the builtin
/// voting and reflection templates.
pub fn assemble(
    initial_context: &str,
    persona: Option<&PersonaText>,
    method: VotingMethod,
    list: &PresentedList,
    cot: bool,
) -> Result<PromptBundle, PromptError> {
    PromptTemplates {
        initial_context: initial_context.to_string(),
        ..PromptTemplates::default()
    }
    .assemble(persona, method, list, cot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{apply_list_treatment, ProjectCatalog};

    fn persona() -> PersonaText {
        PersonaText {
            participant_id: "YK3TDKDG".into(),
            text: "You are a university student from Nord district in Zurich.".into(),
        }
    }

    fn list(t: ListTreatment) -> PresentedList {
        apply_list_treatment(&ProjectCatalog::builtin(), t)
    }

    fn table_lines(text: &str) -> Vec<&str> {
        text.lines().filter(|l| l.starts_with('#')).collect()
    }

    #[test]
    fn instructions_verbatim() {
        assert_eq!(
            voting_instruction(VotingMethod::Approval),
            "Select any number of projects. Here, in this vote, you can select all the projects you approve of."
        );
        assert_eq!(
            voting_instruction(VotingMethod::K_APPROVAL),
            "Select exactly 5 projects."
        );
        assert_eq!(
            voting_instruction(VotingMethod::CUMULATIVE),
            "Distribute 10 points among the projects you like. List the projects and the points you allocate, separated by a colon."
        );
        assert_eq!(
            voting_instruction(VotingMethod::RANKED),
            "Select 5 projects and rank them from the most preferred to the 5th most preferred."
        );
    }

    #[test]
    fn minimal_bundle_has_two_turns() {
        let b = assemble(
            "ctx",
            None,
            VotingMethod::K_APPROVAL,
            &list(ListTreatment::Original),
            false,
        )
        .unwrap();
        assert_eq!(b.turns.len(), 2);
        assert_eq!(b.turns[0].text, "ctx");
        assert_eq!(b.turns[0].role, Role::System);
        let vote = &b.turns[1].text;
        assert!(vote.starts_with("Select exactly 5 projects."));
        assert_eq!(table_lines(vote).len(), 24);
        assert!(vote.ends_with("Respond with the project IDs prefixed by '#'."));
    }

    #[test]
    fn cot_turn_has_no_project_lines() {
        let p = persona();
        let b = assemble(
            "ctx",
            Some(&p),
            VotingMethod::K_APPROVAL,
            &list(ListTreatment::Original),
            true,
        )
        .unwrap();
        assert_eq!(b.turns.len(), 3);
        assert!(!b.turns[1].text.contains('#'));
        assert!(b.turns[0].text.contains(&p.text));
        assert_eq!(b.reflection_turn().unwrap().text, COT.trim());
    }

    #[test]
    fn reversed_ids_table_starts_with_24() {
        let p = persona();
        let b = assemble(
            "ctx",
            Some(&p),
            VotingMethod::CUMULATIVE,
            &list(ListTreatment::ReversedIds),
            false,
        )
        .unwrap();
        let lines = table_lines(&b.voting_turn().text);
        assert!(lines[0].starts_with("#24 Planting Workshops"));
    }

    #[test]
    fn empty_context_rejected() {
        assert!(matches!(
            assemble(
                "  ",
                None,
                VotingMethod::Approval,
                &list(ListTreatment::Original),
                false
            ),
            Err(PromptError::EmptyContext)
        ));
    }

    #[test]
    fn axes_are_independent() {
        let t = PromptTemplates::default();
        let p = persona();
        let base = t
            .assemble(None, VotingMethod::RANKED, &list(ListTreatment::Original), false)
            .unwrap();

        let with_persona = t
            .assemble(Some(&p), VotingMethod::RANKED, &list(ListTreatment::Original), false)
            .unwrap();
        assert_ne!(with_persona.turns[0], base.turns[0]);
        assert_eq!(with_persona.turns[1..], base.turns[1..]);

        let reversed = t
            .assemble(None, VotingMethod::RANKED, &list(ListTreatment::ReversedOrder), false)
            .unwrap();
        assert_eq!(reversed.turns[0], base.turns[0]);
        let strip = |s: &str| s.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
        assert_eq!(strip(&reversed.turns[1].text), strip(&base.turns[1].text));
        assert_ne!(reversed.turns[1], base.turns[1]);

        let with_cot = t
            .assemble(None, VotingMethod::RANKED, &list(ListTreatment::Original), true)
            .unwrap();
        assert_eq!(with_cot.turns.len(), base.turns.len() + 1);
        assert_eq!(with_cot.turns[0], base.turns[0]);
        assert_eq!(with_cot.voting_turn(), base.voting_turn());
    }

    #[test]
    fn voting_turn_embeds_rendered_table() {
        let t = PromptTemplates::default();
        for tr in ListTreatment::ALL {
            let l = list(tr);
            let b = t.assemble(None, VotingMethod::Approval, &l, false).unwrap();
            assert!(b.voting_turn().text.contains(&render_project_table(&l)));
        }
    }

    #[test]
    fn digest_is_deterministic() {
        let t = PromptTemplates::default();
        let a = t
            .assemble(None, VotingMethod::Approval, &list(ListTreatment::Original), false)
            .unwrap();
        let b = t
            .assemble(None, VotingMethod::Approval, &list(ListTreatment::Original), false)
            .unwrap();
        assert_eq!(a.digest(), b.digest());
        let back: PromptBundle = serde_json::from_str(&a.canonical_json()).unwrap();
        assert_eq!(back.digest(), a.digest());
    }

    #[test]
    fn template_without_persona_slot_appends() {
        let p = persona();
        let b = assemble(
            "Background.",
            Some(&p),
            VotingMethod::Approval,
            &list(ListTreatment::Original),
            false,
        )
        .unwrap();
        assert_eq!(b.turns[0].text, format!("Background.\n\n{}", p.text));
    }

    #[test]
    fn method_codes_round_trip() {
        for m in VotingMethod::ALL {
            assert_eq!(m.code().parse::<VotingMethod>().unwrap(), m);
        }
    }
}
