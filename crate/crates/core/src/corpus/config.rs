use super::{IdentityRoster, LawEntry, PromptTemplate, Situation, SituationKind, SLOTS};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, message: String },
}

impl ConfigError {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            line: None,
            message: message.into(),
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Io { .. } => None,
            ConfigError::Parse { line, .. } => Some(*line),
            ConfigError::Invalid { line, .. } => *line,
        }
    }
}

/// Train / validation proportions, either as fractions or explicit unit counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSpec {
    Fractions { train: f64, validation: f64 },
    Counts { train_count: usize, validation_count: usize },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Fractions {
            train: 0.875,
            validation: 0.125,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let SplitSpec::Fractions { train, validation } = *self {
            for (name, f) in [("train", train), ("validation", validation)] {
                if !(f > 0.0 && f < 1.0) {
                    return Err(ConfigError::invalid(format!(
                        "split fraction `{name}` = {f} must lie strictly between 0 and 1"
                    )));
                }
            }
            if ((train + validation) - 1.0).abs() > 1e-9 {
                return Err(ConfigError::invalid(format!(
                    "split fractions must sum to 1 (got {})",
                    train + validation
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub laws: Vec<LawEntry>,
    pub situations: Vec<Situation>,
    pub rosters: Vec<IdentityRoster>,
    pub template: PromptTemplate,
    #[serde(default)]
    pub split_spec: SplitSpec,
    pub seed: u64,
    /// Law-situation pairs drawn per identity type for the with-identity
    /// corpus; `None` selects every pair.
    #[serde(default)]
    pub pairs_per_type: Option<usize>,
    #[serde(default)]
    pub test_pairs_per_type: Option<usize>,
    /// Seed of the test corpus; derived from `seed` when absent.
    #[serde(default)]
    pub test_seed: Option<u64>,
}

const BUNDLED: &str = include_str!("../../data/default_config.json");

impl CorpusConfig {
    /// The bundled illustrative config: 15 laws, 75 crime and 25 random
    /// situations, rosters of 32 / 6 / 7 / 2 identities.
    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED).expect("bundled config is valid")
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&source)
    }

    pub fn from_json_str(source: &str) -> Result<Self, ConfigError> {
        let config: CorpusConfig =
            serde_json::from_str(source).map_err(|e| ConfigError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        config.check(Some(source))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.check(None)
    }

    pub fn test_seed(&self) -> u64 {
        self.test_seed
            .unwrap_or_else(|| crate::hashing::stable_hash(self.seed, &["test-corpus"]))
    }

    pub fn pair_count(&self) -> usize {
        self.laws.len() * self.situations.len()
    }

    pub fn roster(&self, identity_type: super::IdentityType) -> Option<&IdentityRoster> {
        self.rosters.iter().find(|r| r.identity_type == identity_type)
    }

    pub fn law(&self, law_id: &str) -> Option<&LawEntry> {
        self.laws.iter().find(|l| l.law_id == law_id)
    }

    pub fn situation(&self, situation_id: &str) -> Option<&Situation> {
        self.situations.iter().find(|s| s.situation_id == situation_id)
    }

    fn check(&self, source: Option<&str>) -> Result<(), ConfigError> {
        let at = |key: &str, value: &str, nth: usize| source.and_then(|s| locate(s, key, value, nth));
        let fail = |line: Option<usize>, message: String| Err(ConfigError::Invalid { line, message });

        if self.laws.is_empty() {
            return fail(None, "config lists no laws".into());
        }
        if self.situations.is_empty() {
            return fail(None, "config lists no situations".into());
        }
        if self.rosters.is_empty() {
            return fail(None, "config lists no identity rosters".into());
        }

        let mut law_ids = HashSet::new();
        for law in &self.laws {
            if !law_ids.insert(law.law_id.as_str()) {
                return fail(at("law_id", &law.law_id, 2), format!("duplicate law_id `{}`", law.law_id));
            }
            if law.body.trim().is_empty() {
                return fail(at("law_id", &law.law_id, 1), format!("law `{}` has an empty body", law.law_id));
            }
        }

        let mut situation_ids = HashSet::new();
        for s in &self.situations {
            let line = at("situation_id", &s.situation_id, 1);
            if !situation_ids.insert(s.situation_id.as_str()) {
                return fail(
                    at("situation_id", &s.situation_id, 2),
                    format!("duplicate situation_id `{}`", s.situation_id),
                );
            }
            if s.text.trim().is_empty() {
                return fail(line, format!("situation `{}` has empty text", s.situation_id));
            }
            match s.kind {
                SituationKind::Crime if s.applicable_laws.is_empty() => {
                    return fail(
                        line,
                        format!("crime situation `{}` lists no applicable laws", s.situation_id),
                    )
                }
                SituationKind::Random if !s.applicable_laws.is_empty() => {
                    return fail(
                        line,
                        format!("random situation `{}` must not list applicable laws", s.situation_id),
                    )
                }
                _ => {}
            }
            if let Some(unknown) = s.applicable_laws.iter().find(|l| !law_ids.contains(l.as_str())) {
                return fail(
                    line,
                    format!("situation `{}` maps to unknown law `{unknown}`", s.situation_id),
                );
            }
        }

        let mut types = HashSet::new();
        for roster in &self.rosters {
            let line = at("identity_type", roster.identity_type.as_str(), 1);
            if !types.insert(roster.identity_type) {
                return fail(
                    at("identity_type", roster.identity_type.as_str(), 2),
                    format!("duplicate roster for identity type `{}`", roster.identity_type),
                );
            }
            if roster.identities.is_empty() {
                return fail(line, format!("roster `{}` is empty", roster.identity_type));
            }
            let mut keys = HashSet::new();
            for identity in &roster.identities {
                let line = at("identity_key", &identity.identity_key, 1);
                if !keys.insert(identity.identity_key.as_str()) {
                    return fail(
                        at("identity_key", &identity.identity_key, 2),
                        format!("duplicate identity_key `{}` in roster `{}`", identity.identity_key, roster.identity_type),
                    );
                }
                if identity.descriptor.trim().is_empty() {
                    return fail(line, format!("identity `{}` has an empty descriptor", identity.identity_key));
                }
                if identity.names.is_empty() || identity.names.iter().any(|n| n.trim().is_empty()) {
                    return fail(line, format!("identity `{}` needs at least one non-empty name", identity.identity_key));
                }
            }
        }

        for slot in SLOTS {
            let count = self.template.input_pattern.matches(slot).count();
            if count != 1 {
                return fail(
                    source.and_then(|s| locate_key(s, "input_pattern")),
                    format!("template input_pattern must contain {slot} exactly once (found {count})"),
                );
            }
        }

        self.split_spec
            .validate()
            .map_err(|e| relocate(e, source.and_then(|s| locate_key(s, "split_spec"))))?;

        for (key, n) in [("pairs_per_type", self.pairs_per_type), ("test_pairs_per_type", self.test_pairs_per_type)] {
            if let Some(n) = n {
                if n == 0 || n > self.pair_count() {
                    return fail(
                        source.and_then(|s| locate_key(s, key)),
                        format!("{key} = {n} must be between 1 and {} law-situation pairs", self.pair_count()),
                    );
                }
            }
        }

        self.check_texts_render_once()
    }

    /// Law bodies and situation texts must not occur inside any other piece
    /// of a rendered prompt, so each appears exactly once per instance.
    fn check_texts_render_once(&self) -> Result<(), ConfigError> {
        let pattern = SLOTS
            .iter()
            .fold(self.template.input_pattern.clone(), |p, slot| p.replace(slot, "\u{0}"));
        let mut fixed: Vec<&str> = vec![&self.template.instruction, &self.template.question];
        fixed.extend(pattern.split('\u{0}'));
        let mut people: Vec<&str> = Vec::new();
        for roster in &self.rosters {
            for identity in &roster.identities {
                people.push(&identity.descriptor);
                people.extend(identity.names.iter().map(String::as_str));
            }
        }
        for law in &self.laws {
            let clash = fixed
                .iter()
                .chain(people.iter())
                .copied()
                .chain(self.situations.iter().map(|s| s.text.as_str()))
                .any(|t| t.contains(law.body.as_str()));
            if clash {
                return Err(ConfigError::invalid(format!(
                    "body of law `{}` also occurs elsewhere in the prompt material",
                    law.law_id
                )));
            }
        }
        for s in &self.situations {
            let clash = fixed
                .iter()
                .chain(people.iter())
                .copied()
                .chain(self.laws.iter().map(|l| l.body.as_str()))
                .any(|t| t.contains(s.text.as_str()));
            if clash {
                return Err(ConfigError::invalid(format!(
                    "text of situation `{}` also occurs elsewhere in the prompt material",
                    s.situation_id
                )));
            }
        }
        Ok(())
    }
}

fn relocate(err: ConfigError, line: Option<usize>) -> ConfigError {
    match err {
        ConfigError::Invalid { message, .. } => ConfigError::Invalid { line, message },
        other => other,
    }
}

/// 1-based line of the `nth` line holding both `"key"` and the JSON-quoted value.
fn locate(source: &str, key: &str, value: &str, nth: usize) -> Option<usize> {
    let quoted_key = format!("\"{key}\"");
    let quoted_value = serde_json::to_string(value).ok()?;
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| l.contains(&quoted_key) && l.contains(&quoted_value))
        .nth(nth.saturating_sub(1))
        .map(|(i, _)| i + 1)
}

fn locate_key(source: &str, key: &str) -> Option<usize> {
    let quoted_key = format!("\"{key}\"");
    source
        .lines()
        .position(|l| l.contains(&quoted_key))
        .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_matches_component_counts() {
        let c = CorpusConfig::bundled();
        assert_eq!(c.laws.len(), 15);
        assert_eq!(c.situations.len(), 100);
        let crimes = c.situations.iter().filter(|s| s.kind == SituationKind::Crime).count();
        assert_eq!(crimes, 75);
        let sizes: Vec<usize> = c.rosters.iter().map(|r| r.identities.len()).collect();
        assert_eq!(sizes, vec![32, 6, 7, 2]);
    }

    #[test]
    fn parse_error_carries_line() {
        let err = CorpusConfig::from_json_str("{\n  \"laws\": [\n  oops\n]}").unwrap_err();
        assert_eq!(err.line(), Some(3));
    }

    #[test]
    fn duplicate_law_id_points_at_second_occurrence() {
        let mut src = CorpusConfig::bundled_source().to_string();
        src = src.replacen("\"law_id\": \"ipc_300\"", "\"law_id\": \"ipc_279\"", 1);
        let err = CorpusConfig::from_json_str(&src).unwrap_err();
        let expected = src
            .lines()
            .position(|l| l.contains("\"law_id\": \"ipc_279\""))
            .map(|first| {
                first
                    + 1
                    + src.lines().skip(first + 1).position(|l| l.contains("\"law_id\": \"ipc_279\"")).unwrap()
                    + 1
            });
        assert_eq!(err.line(), expected);
        assert!(err.to_string().contains("duplicate law_id"));
    }

    #[test]
    fn empty_roster_is_rejected() {
        let mut c = CorpusConfig::bundled();
        c.rosters[3].identities.clear();
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("roster `gender` is empty"), "{err}");
    }

    #[test]
    fn missing_slot_is_rejected() {
        let mut c = CorpusConfig::bundled();
        c.template.input_pattern = c.template.input_pattern.replace("<IDENTITY>", "");
        assert!(c.validate().unwrap_err().to_string().contains("<IDENTITY>"));
    }

    #[test]
    fn crime_without_laws_is_rejected() {
        let mut c = CorpusConfig::bundled();
        c.situations[0].applicable_laws.clear();
        assert!(c.validate().is_err());
        let mut c = CorpusConfig::bundled();
        c.situations[99].applicable_laws.insert("ipc_300".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn split_fractions_must_be_proper() {
        let bad = [(0.0, 1.0), (1.0, 0.0), (0.5, 0.6), (-0.1, 1.1)];
        for (train, validation) in bad {
            assert!(SplitSpec::Fractions { train, validation }.validate().is_err());
        }
        assert!(SplitSpec::Fractions { train: 0.875, validation: 0.125 }.validate().is_ok());
    }
}
