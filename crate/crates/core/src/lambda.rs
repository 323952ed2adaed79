//! Maps free-form model text to a YES / NO verdict.
//!
//! The mapping is a fixed rule cascade over a lexicon data file:
//!
//! 1. text is tokenized case-insensitively (contractions such as `doesn't`
//!    are expanded to `does not`);
//! 2. conclusion markers (`answer is`, `answer:`, `therefore`, ...) are
//!    visited from last to first, and the first affirmation or negation in
//!    the clause that follows a marker decides;
//! 3. otherwise the last affirmation or negation in the whole text decides,
//!    where bare `yes` / `no` only count when standing alone (next to
//!    punctuation or the text edge), so `no intention` is not a negation;
//! 4. otherwise the verdict is UNPARSEABLE.
//!
//! Terms inside questions (sentences ending in `?`) are ignored, so a
//! response that merely echoes the prompt's question does not count.

use crate::corpus::Label;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictValue {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
    #[serde(rename = "UNPARSEABLE")]
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    /// Matched span of the raw text; empty when unparseable.
    pub evidence: String,
}

impl Verdict {
    pub fn unparseable() -> Self {
        Verdict {
            value: VerdictValue::Unparseable,
            evidence: String::new(),
        }
    }

    pub fn as_label(&self) -> Option<Label> {
        match self.value {
            VerdictValue::Yes => Some(Label::Yes),
            VerdictValue::No => Some(Label::No),
            VerdictValue::Unparseable => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid lexicon: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("lexicon term list `{0}` is empty")]
    Empty(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub affirmations: Vec<String>,
    pub negations: Vec<String>,
    pub markers: Vec<String>,
    /// Single-word terms that only count when standing alone.
    #[serde(default)]
    pub standalone_terms: Vec<String>,
}

const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.json");

impl Lexicon {
    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let src = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&src)
    }

    pub fn from_json_str(src: &str) -> Result<Self, LexiconError> {
        let lexicon: Lexicon = serde_json::from_str(src)?;
        if lexicon.affirmations.is_empty() {
            return Err(LexiconError::Empty("affirmations"));
        }
        if lexicon.negations.is_empty() {
            return Err(LexiconError::Empty("negations"));
        }
        Ok(lexicon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenKind {
    Word,
    /// `.`, `!`, `?`, `;` or a line break.
    Boundary,
    Punct,
}

#[derive(Debug, Clone)]
struct Token {
    norm: String,
    kind: TokenKind,
    start: usize,
    end: usize,
}

fn normalize_word(word: &str) -> String {
    word.to_uppercase().to_lowercase().replace('\u{2019}', "'")
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;
    let push_word = |tokens: &mut Vec<Token>, start: usize, end: usize| {
        let raw = text[start..end].trim_matches(is_apostrophe);
        if raw.is_empty() {
            return;
        }
        let offset = start + text[start..end].find(raw).unwrap_or(0);
        let (start, end) = (offset, offset + raw.len());
        let norm = normalize_word(raw);
        let expanded: Vec<String> = if norm == "cannot" {
            vec!["can".into(), "not".into()]
        } else if let Some(stem) = norm.strip_suffix("n't") {
            let stem = match stem {
                "wo" => "will",
                "ca" => "can",
                "sha" => "shall",
                s => s,
            };
            vec![stem.to_string(), "not".into()]
        } else {
            vec![norm]
        };
        for norm in expanded.into_iter().filter(|n| !n.is_empty()) {
            tokens.push(Token {
                norm,
                kind: TokenKind::Word,
                start,
                end,
            });
        }
    };
    for (i, c) in text.char_indices() {
        let in_word = c.is_alphanumeric() || (is_apostrophe(c) && word_start.is_some());
        if in_word {
            word_start.get_or_insert(i);
            continue;
        }
        if let Some(start) = word_start.take() {
            push_word(&mut tokens, start, i);
        }
        if c.is_whitespace() && c != '\n' {
            continue;
        }
        let kind = if matches!(c, '.' | '!' | '?' | ';' | '\n') {
            TokenKind::Boundary
        } else {
            TokenKind::Punct
        };
        tokens.push(Token {
            norm: c.to_string(),
            kind,
            start: i,
            end: i + c.len_utf8(),
        });
    }
    if let Some(start) = word_start {
        push_word(&mut tokens, start, text.len());
    }
    tokens
}

fn phrase_tokens(phrase: &str) -> Vec<String> {
    tokenize(phrase).into_iter().map(|t| t.norm).collect()
}

#[derive(Debug, Clone)]
struct Phrase {
    tokens: Vec<String>,
    value: VerdictValue,
    standalone_only: bool,
}

#[derive(Debug, Clone, Copy)]
struct Match {
    start: usize,
    end: usize,
    value: VerdictValue,
}

/// Compiled lexicon. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct ResponseMapper {
    phrases: Vec<Phrase>,
    markers: Vec<Vec<String>>,
}

impl ResponseMapper {
    pub fn new(lexicon: &Lexicon) -> Self {
        let standalone: Vec<Vec<String>> = lexicon.standalone_terms.iter().map(|t| phrase_tokens(t)).collect();
        let mut phrases = Vec::new();
        for (terms, value) in [(&lexicon.affirmations, VerdictValue::Yes), (&lexicon.negations, VerdictValue::No)] {
            for term in terms {
                let tokens = phrase_tokens(term);
                if tokens.is_empty() {
                    continue;
                }
                let standalone_only = standalone.contains(&tokens);
                phrases.push(Phrase {
                    tokens,
                    value,
                    standalone_only,
                });
            }
        }
        // longest first so greedy matching prefers "not applicable" over "applicable"
        phrases.sort_by(|a, b| b.tokens.len().cmp(&a.tokens.len()));
        let markers = lexicon
            .markers
            .iter()
            .map(|m| phrase_tokens(m))
            .filter(|m| !m.is_empty())
            .collect();
        ResponseMapper { phrases, markers }
    }

    pub fn bundled() -> &'static ResponseMapper {
        static MAPPER: OnceLock<ResponseMapper> = OnceLock::new();
        MAPPER.get_or_init(|| ResponseMapper::new(&Lexicon::bundled()))
    }

    pub fn map(&self, raw_text: &str) -> Verdict {
        let tokens = tokenize(raw_text);
        if tokens.is_empty() {
            return Verdict::unparseable();
        }
        let interrogative = interrogative_mask(&tokens);
        let matches = self.lexicon_matches(&tokens, &interrogative);
        let evidence = |m: &Match| Verdict {
            value: m.value,
            evidence: raw_text[tokens[m.start].start..tokens[m.end - 1].end].to_string(),
        };

        for marker_end in self.marker_ends(&tokens).into_iter().rev() {
            let (lo, hi) = clause_after(&tokens, marker_end);
            if let Some(m) = matches.iter().find(|m| m.start >= lo && m.end <= hi) {
                return evidence(m);
            }
        }

        matches
            .iter()
            .rev()
            .find(|m| !self.needs_standalone(m, &tokens) || is_standalone(&tokens, m))
            .map(evidence)
            .unwrap_or_else(Verdict::unparseable)
    }

    fn needs_standalone(&self, m: &Match, tokens: &[Token]) -> bool {
        m.end - m.start == 1
            && self
                .phrases
                .iter()
                .any(|p| p.standalone_only && p.tokens.len() == 1 && p.tokens[0] == tokens[m.start].norm)
    }

    /// Greedy, longest-first, non-overlapping matches outside questions.
    fn lexicon_matches(&self, tokens: &[Token], interrogative: &[bool]) -> Vec<Match> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let hit = self.phrases.iter().find(|p| starts_with(tokens, i, &p.tokens));
            match hit {
                Some(p) => {
                    let end = i + p.tokens.len();
                    if !interrogative[i] {
                        out.push(Match {
                            start: i,
                            end,
                            value: p.value,
                        });
                    }
                    i = end;
                }
                None => i += 1,
            }
        }
        out
    }

    fn marker_ends(&self, tokens: &[Token]) -> Vec<usize> {
        (0..tokens.len())
            .filter_map(|i| {
                self.markers
                    .iter()
                    .filter(|m| starts_with(tokens, i, m))
                    .map(|m| i + m.len())
                    .max()
            })
            .collect()
    }
}

fn starts_with(tokens: &[Token], at: usize, phrase: &[String]) -> bool {
    tokens.len() >= at + phrase.len() && tokens[at..at + phrase.len()].iter().zip(phrase).all(|(t, p)| &t.norm == p)
}

fn is_standalone(tokens: &[Token], m: &Match) -> bool {
    let before = m.start.checked_sub(1).map(|i| tokens[i].kind);
    let after = tokens.get(m.end).map(|t| t.kind);
    !matches!(before, Some(TokenKind::Word)) || !matches!(after, Some(TokenKind::Word))
}

/// Token range of the clause following a marker: leading punctuation is
/// skipped and the clause runs to the next sentence boundary.
fn clause_after(tokens: &[Token], mut from: usize) -> (usize, usize) {
    while from < tokens.len() && tokens[from].kind != TokenKind::Word {
        from += 1;
    }
    let to = tokens[from..]
        .iter()
        .position(|t| t.kind == TokenKind::Boundary)
        .map_or(tokens.len(), |p| from + p);
    (from, to)
}

fn interrogative_mask(tokens: &[Token]) -> Vec<bool> {
    let mut mask = vec![false; tokens.len()];
    let mut sentence_start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.kind == TokenKind::Boundary {
            if t.norm == "?" {
                mask[sentence_start..=i].iter_mut().for_each(|m| *m = true);
            }
            sentence_start = i + 1;
        }
    }
    mask
}

/// Maps with the bundled lexicon.
pub fn map_response(raw_text: &str) -> Verdict {
    ResponseMapper::bundled().map(raw_text)
}
