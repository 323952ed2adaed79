use super::config::ConfigError;
use super::{Identity, LawEntry, PromptTemplate, Situation, SLOTS, SLOT_IDENTITY, SLOT_LAW, SLOT_NAME, SLOT_SITUATION};
use crate::hashing::stable_hash;

/// Actor name used when identity information is stripped from a prompt.
pub const STRIPPED_ACTOR: &str = "X";

/// Seeded, order-independent choice of a name for one instance.
#[derive(Debug, Clone, Copy)]
pub struct NameChooser {
    seed: u64,
}

impl NameChooser {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn choose<'a>(&self, sample_id: &str, identity: &'a Identity) -> &'a str {
        let h = stable_hash(self.seed, &["name", sample_id, &identity.identity_key]);
        &identity.names[(h % identity.names.len() as u64) as usize]
    }
}

/// Renders one prompt. `actor = None` requests the identity-stripped variant:
/// the name becomes `X` and the identity clause is removed with its commas.
pub fn render_prompt(
    template: &PromptTemplate,
    law: &LawEntry,
    situation: &Situation,
    actor: Option<(&Identity, &str)>,
) -> Result<String, ConfigError> {
    for slot in SLOTS {
        if template.input_pattern.matches(slot).count() != 1 {
            return Err(ConfigError::invalid(format!(
                "template input_pattern must contain {slot} exactly once"
            )));
        }
    }
    let situation_text = situation.text.trim_end_matches('.');
    let input = match actor {
        Some((identity, name)) => fill(
            &template.input_pattern,
            &[
                (SLOT_LAW, &law.body),
                (SLOT_NAME, name),
                (SLOT_IDENTITY, &identity.descriptor),
                (SLOT_SITUATION, situation_text),
            ],
        ),
        None => fill(
            &strip_identity_slot(&template.input_pattern),
            &[
                (SLOT_LAW, &law.body),
                (SLOT_NAME, STRIPPED_ACTOR),
                (SLOT_SITUATION, situation_text),
            ],
        ),
    };
    let parts = [template.instruction.trim(), input.trim(), template.question.trim()];
    Ok(parts
        .iter()
        .filter(|p| !p.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join("\n\n"))
}

/// Single left-to-right pass so slot-like text inside values is never re-expanded.
fn fill(pattern: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(pattern.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = pattern;
    while !rest.is_empty() {
        let next = values
            .iter()
            .filter_map(|(slot, value)| rest.find(slot).map(|pos| (pos, *slot, *value)))
            .min_by_key(|(pos, _, _)| *pos);
        match next {
            Some((pos, slot, value)) => {
                out.push_str(&rest[..pos]);
                out.push_str(value);
                rest = &rest[pos + slot.len()..];
            }
            None => {
                out.push_str(rest);
                break;
            }
        }
    }
    out
}

/// Removes `<IDENTITY>` and the punctuation that attaches it to the sentence,
/// collapsing the leftover commas and spaces at the splice point.
fn strip_identity_slot(pattern: &str) -> String {
    let pos = pattern.find(SLOT_IDENTITY).expect("slot validated");
    let before = pattern[..pos].trim_end();
    let after = pattern[pos + SLOT_IDENTITY.len()..].trim_start();
    let before = before.strip_suffix(',').map(str::trim_end).unwrap_or(before);
    let after = after.strip_prefix(',').map(str::trim_start).unwrap_or(after);
    let needs_space = !before.is_empty()
        && !after.is_empty()
        && !after.starts_with(|c: char| matches!(c, '.' | ',' | ';' | ':' | '?' | '!' | ')'));
    let mut out = String::with_capacity(pattern.len());
    out.push_str(before);
    if needs_space {
        out.push(' ');
    }
    out.push_str(after);
    out
}
