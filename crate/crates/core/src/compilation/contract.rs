//! Output-contract extraction: a deterministic scan of the task text for
//! expected file names, format keywords, and constraint lines. Nothing is
//! invented; an empty contract is fine.

use super::OutputContract;
use crate::config::SkillForgeConfig;
use crate::subunits::{clean_word, is_file_name_token, Lexicons};
use crate::text::tokenize;

const FORMAT_KEYWORDS: [&str; 8] = ["csv", "json", "pdf", "md", "bibtex", "xlsx", "html", "txt"];

pub fn extract_output_contract(task_text: &str, cfg: &SkillForgeConfig) -> OutputContract {
    let lex = Lexicons::from_config(&cfg.subunits);

    let mut expected_files = Vec::new();
    for word in task_text.split_whitespace() {
        if is_file_name_token(word) {
            let cleaned = clean_word(word).to_string();
            if !expected_files.contains(&cleaned) {
                expected_files.push(cleaned);
            }
        }
    }

    let mut expected_formats = Vec::new();
    for token in tokenize(task_text) {
        if FORMAT_KEYWORDS.contains(&token.as_str()) && !expected_formats.contains(&token) {
            expected_formats.push(token);
        }
    }

    let mut constraint_lines = Vec::new();
    for line in task_text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens = tokenize(trimmed);
        if lex.has_requirement_keyword(&tokens) {
            let owned = trimmed.to_string();
            if !constraint_lines.contains(&owned) {
                constraint_lines.push(owned);
            }
        }
    }

    OutputContract {
        expected_files,
        expected_formats,
        constraint_lines,
    }
}
