//! Domain model and corpus generation.
//!
//! A corpus is the cross product of laws, situations and identities. For one
//! identity type with `K` identities, every selected law-situation pair yields
//! a [`Sample`]: `K` prompt instances that differ only in the identity of the
//! actor. The identity-stripped corpus keeps one instance per pair.

mod config;
mod generate;
mod render;
mod split;

pub use config::{ConfigError, CorpusConfig, SplitSpec};
pub use generate::{generate_test_with_id, generate_with_id, generate_without_id, selected_pairs};
pub use render::{render_prompt, NameChooser, STRIPPED_ACTOR};
pub use split::{split, Partition};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityType {
    Region,
    Religion,
    Caste,
    Gender,
}

impl IdentityType {
    pub const ALL: [IdentityType; 4] = [Self::Region, Self::Religion, Self::Caste, Self::Gender];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Region => "region",
            Self::Religion => "religion",
            Self::Caste => "caste",
            Self::Gender => "gender",
        }
    }
}

impl fmt::Display for IdentityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IdentityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown identity type `{s}`"))
    }
}

/// Ground-truth applicability of a law to a situation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl Label {
    pub fn negate(self) -> Self {
        match self {
            Label::Yes => Label::No,
            Label::No => Label::Yes,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Yes => "YES",
            Label::No => "NO",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawEntry {
    pub law_id: String,
    pub section_label: String,
    pub title: String,
    /// Full statute text substituted for the `<LAW>` slot.
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SituationKind {
    Crime,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Situation {
    pub situation_id: String,
    /// Action phrase substituted for the `<SITUATION>` slot.
    pub text: String,
    pub kind: SituationKind,
    #[serde(default)]
    pub applicable_laws: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub identity_key: String,
    pub descriptor: String,
    pub names: Vec<String>,
}

/// Ordered identities of one identity type. The order defines the index of
/// each instance within a sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityRoster {
    pub identity_type: IdentityType,
    pub identities: Vec<Identity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction: String,
    /// Must contain each of `<LAW>`, `<NAME>`, `<IDENTITY>`, `<SITUATION>` exactly once.
    pub input_pattern: String,
    pub question: String,
}

pub const SLOT_LAW: &str = "<LAW>";
pub const SLOT_NAME: &str = "<NAME>";
pub const SLOT_IDENTITY: &str = "<IDENTITY>";
pub const SLOT_SITUATION: &str = "<SITUATION>";
pub const SLOTS: [&str; 4] = [SLOT_LAW, SLOT_NAME, SLOT_IDENTITY, SLOT_SITUATION];

/// YES iff the law is listed for the situation. Depends only on the pair,
/// which is what makes labels identity-invariant.
pub fn label_of(law: &LawEntry, situation: &Situation) -> Label {
    if situation.applicable_laws.contains(&law.law_id) {
        Label::Yes
    } else {
        Label::No
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub instance_id: String,
    /// Absent for identity-stripped instances, which are not grouped.
    pub sample_id: Option<String>,
    pub law_id: String,
    pub situation_id: String,
    pub identity_type: Option<IdentityType>,
    pub identity_key: Option<String>,
    pub rendered_text: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub law_id: String,
    pub situation_id: String,
    pub identity_type: IdentityType,
    pub instance_ids: Vec<String>,
}

/// A generated corpus. `samples` is empty for identity-stripped data.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub name: String,
    pub instances: Vec<PromptInstance>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn has_samples(&self) -> bool {
        !self.samples.is_empty()
    }

    pub fn yes_fraction(&self) -> f64 {
        if self.instances.is_empty() {
            return 0.0;
        }
        let yes = self.instances.iter().filter(|i| i.label == Label::Yes).count();
        yes as f64 / self.instances.len() as f64
    }

    pub fn instances_of_type(&self, identity_type: IdentityType) -> usize {
        self.instances
            .iter()
            .filter(|i| i.identity_type == Some(identity_type))
            .count()
    }
}
