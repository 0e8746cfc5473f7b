//! Deterministic subunit extraction. Three rule families run over each
//! body line of a skill document:
//!
//! - procedural: ordered-list / bullet lines and lines opening with an
//!   imperative verb from the lexicon,
//! - element: file-name tokens, command-like lines or code spans, and
//!   backtick-quoted identifiers,
//! - constraint: short lines carrying a requirement keyword.
//!
//! Candidates are normalized, length-filtered, and deduplicated by exact
//! normalized text across the whole repository; each surviving subunit is
//! linked back to its source skills through extraction edges.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use unicode_normalization::UnicodeNormalization;

use crate::config::SubunitConfig;
use crate::corpus::SkillDocument;
use crate::error::{Error, Result};
use crate::text::{fnv1a64, token_count, tokenize};

const IMPERATIVE_VERBS: &str = include_str!("../data/imperative_verbs.txt");
const REQUIREMENT_KEYWORDS: &str = include_str!("../data/requirement_keywords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubunitKind {
    Procedural,
    Element,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subunit {
    /// Hex digest of a stable 64-bit hash of the normalized text.
    pub subunit_id: String,
    pub text: String,
    pub kind: SubunitKind,
    pub token_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtractionEdge {
    pub skill_id: String,
    pub subunit_id: String,
}

/// Verb and requirement lexicons, built-in by default and overridable from
/// config.
#[derive(Debug, Clone)]
pub struct Lexicons {
    imperative_verbs: BTreeSet<String>,
    single_keywords: BTreeSet<String>,
    phrase_keywords: Vec<Vec<String>>,
}

impl Lexicons {
    pub fn from_config(cfg: &SubunitConfig) -> Self {
        let verbs = match &cfg.imperative_verbs {
            Some(list) => list.iter().map(|v| v.to_lowercase()).collect(),
            None => parse_word_list(IMPERATIVE_VERBS),
        };
        let keywords: Vec<String> = match &cfg.requirement_keywords {
            Some(list) => list.iter().map(|v| v.to_lowercase()).collect(),
            None => parse_word_list(REQUIREMENT_KEYWORDS).into_iter().collect(),
        };
        let mut single = BTreeSet::new();
        let mut phrases = Vec::new();
        for kw in keywords {
            let toks = tokenize(&kw);
            match toks.len() {
                0 => {}
                1 => {
                    single.insert(toks[0].clone());
                }
                _ => phrases.push(toks),
            }
        }
        Self {
            imperative_verbs: verbs,
            single_keywords: single,
            phrase_keywords: phrases,
        }
    }

    pub fn is_imperative_verb(&self, token: &str) -> bool {
        self.imperative_verbs.contains(token)
    }

    pub fn has_requirement_keyword(&self, tokens: &[String]) -> bool {
        if tokens.iter().any(|t| self.single_keywords.contains(t)) {
            return true;
        }
        self.phrase_keywords
            .iter()
            .any(|phrase| tokens.windows(phrase.len()).any(|w| w == phrase.as_slice()))
    }
}

fn parse_word_list(raw: &str) -> BTreeSet<String> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

fn list_marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d+[.)]|[-*+\u{2022}])\s+").unwrap())
}

fn file_name_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\S+\.[A-Za-z0-9]{1,8}$").unwrap())
}

fn flag_token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^-{1,2}[A-Za-z0-9][A-Za-z0-9_.=-]*$").unwrap())
}

/// Extract raw (text, kind) candidates from one document. Normalization,
/// length filtering, and dedup happen in [`build_subunit_set`].
pub fn extract_candidates(doc: &SkillDocument, lex: &Lexicons, cfg: &SubunitConfig) -> Vec<(String, SubunitKind)> {
    let mut out = Vec::new();
    for line in &doc.body {
        extract_from_line(line, lex, cfg, &mut out);
    }
    out
}

fn extract_from_line(line: &str, lex: &Lexicons, cfg: &SubunitConfig, out: &mut Vec<(String, SubunitKind)>) {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return;
    }
    let tokens = tokenize(trimmed);

    // Procedural: list marker or opening imperative verb.
    let is_list_item = list_marker_re().is_match(trimmed);
    let opens_with_verb = tokens.first().is_some_and(|t| lex.is_imperative_verb(t));
    if is_list_item || opens_with_verb {
        out.push((trimmed.to_string(), SubunitKind::Procedural));
    }

    // Element: command-like lines and code spans, identifier spans, and
    // file-name tokens.
    if let Some(cmd) = command_candidate(trimmed) {
        out.push((cmd, SubunitKind::Element));
    }
    for span in code_spans(trimmed) {
        if let Some(cmd) = command_candidate(&span) {
            out.push((cmd, SubunitKind::Element));
        } else if !span.contains(char::is_whitespace) {
            out.push((span, SubunitKind::Element));
        }
    }
    for word in trimmed.split_whitespace() {
        let cleaned = trim_word(word);
        if !cleaned.is_empty() && is_file_name(cleaned) {
            out.push((cleaned.to_string(), SubunitKind::Element));
        }
    }

    // Constraint: short line with a requirement keyword.
    if tokens.len() <= cfg.max_constraint_tokens && lex.has_requirement_keyword(&tokens) {
        out.push((trimmed.to_string(), SubunitKind::Constraint));
    }
}

/// A command-line candidate: starts with a shell prompt, or carries a
/// `-x` / `--long` flag token.
fn command_candidate(text: &str) -> Option<String> {
    for prompt in ["$ ", "% "] {
        if let Some(rest) = text.strip_prefix(prompt) {
            let rest = rest.trim();
            if !rest.is_empty() {
                return Some(rest.to_string());
            }
        }
    }
    if text.split_whitespace().any(|w| flag_token_re().is_match(w)) {
        return Some(text.to_string());
    }
    None
}

fn code_spans(line: &str) -> Vec<String> {
    let parts: Vec<&str> = line.split('`').collect();
    let mut spans = Vec::new();
    // Odd-indexed parts sit inside backticks; the final part never has a
    // closing backtick, so an unterminated span is dropped.
    for (i, part) in parts.iter().enumerate() {
        if i % 2 == 1 && i < parts.len() - 1 {
            let span = part.trim();
            if !span.is_empty() {
                spans.push(span.to_string());
            }
        }
    }
    spans
}

fn trim_word(word: &str) -> &str {
    word.trim_matches(|c: char| {
        matches!(c, '`' | '\'' | '"' | '(' | ')' | '[' | ']' | '{' | '}' | ',' | ';' | ':' | '!' | '?' | '<' | '>')
    })
    .trim_end_matches('.')
}

fn is_file_name(word: &str) -> bool {
    if !file_name_re().is_match(word) {
        return false;
    }
    // The stem before the last dot must contain something alphanumeric.
    let (stem, _) = word.rsplit_once('.').expect("regex guarantees a dot");
    stem.chars().any(char::is_alphanumeric)
}

/// Whether the text carries an element-style token (file name or command
/// flag); cue gating uses this as a concreteness signal.
pub fn contains_element_token(text: &str) -> bool {
    text.split_whitespace().any(|w| {
        let cleaned = trim_word(w);
        (!cleaned.is_empty() && is_file_name(cleaned)) || flag_token_re().is_match(w)
    })
}

/// Public view of the file-name test, sharing the extraction rule.
pub fn is_file_name_token(word: &str) -> bool {
    let cleaned = trim_word(word);
    !cleaned.is_empty() && is_file_name(cleaned)
}

/// Trim quoting and punctuation the way element extraction does.
pub fn clean_word(word: &str) -> &str {
    trim_word(word)
}

/// Normalize candidate text: NFC, lowercase, single internal spaces, list
/// markers / surrounding backticks / trailing punctuation stripped. Runs
/// to a fixed point so the function is idempotent by construction.
pub fn normalize_text(raw: &str) -> String {
    let mut s = raw.to_string();
    for _ in 0..32 {
        let prev = s.clone();
        s = s.nfc().collect::<String>();
        s = s.trim().to_string();
        if let Some(m) = list_marker_re().find(&s) {
            s = s[m.end()..].to_string();
        }
        s = s.trim_matches('`').to_string();
        s = s.to_lowercase();
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
        s = s.trim_end_matches(['.', ',', ';', ':', '!', '?']).to_string();
        if s == prev {
            break;
        }
    }
    s
}

pub fn subunit_id_for(normalized_text: &str) -> String {
    format!("{:016x}", fnv1a64(normalized_text.as_bytes()))
}

/// Extract, normalize, filter, and globally deduplicate subunits for a
/// whole repository. Output is sorted: subunits by text, edges by
/// (skill_id, subunit_id).
pub fn build_subunit_set(
    docs: &[SkillDocument],
    lex: &Lexicons,
    cfg: &SubunitConfig,
) -> Result<(Vec<Subunit>, Vec<ExtractionEdge>)> {
    // normalized text -> kind (highest-precedence kind wins when the same
    // text is extracted under several rules: constraint > element > procedural)
    let mut kinds: BTreeMap<String, SubunitKind> = BTreeMap::new();
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();

    let mut sorted_docs: Vec<&SkillDocument> = docs.iter().collect();
    sorted_docs.sort_by(|a, b| a.skill_id.cmp(&b.skill_id));

    for doc in sorted_docs {
        for (raw, kind) in extract_candidates(doc, lex, cfg) {
            let text = normalize_text(&raw);
            if text.is_empty() {
                continue;
            }
            let len = token_count(&text);
            if len < cfg.min_token_len || len > cfg.max_token_len {
                continue;
            }
            kinds
                .entry(text.clone())
                .and_modify(|k| *k = (*k).max(kind))
                .or_insert(kind);
            edges.insert((doc.skill_id.clone(), text));
        }
    }

    let mut subunits = Vec::with_capacity(kinds.len());
    let mut id_to_text: BTreeMap<String, String> = BTreeMap::new();
    for (text, kind) in &kinds {
        let id = subunit_id_for(text);
        if let Some(prev) = id_to_text.insert(id.clone(), text.clone()) {
            if &prev != text {
                return Err(Error::SubunitIdCollision(id));
            }
        }
        subunits.push(Subunit {
            subunit_id: id,
            text: text.clone(),
            kind: *kind,
            token_len: token_count(text),
        });
    }

    let edges = edges
        .into_iter()
        .map(|(skill_id, text)| ExtractionEdge {
            skill_id,
            subunit_id: subunit_id_for(&text),
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    Ok((subunits, edges))
}
