//! Skill repository loading. A repository is a directory tree where each
//! immediate subfolder holding a `SKILL.md` is one skill; the file carries
//! a `---`-fenced frontmatter block (name, description, free-form keys)
//! followed by the markdown body.
//!
//! The frontmatter reader is deliberately minimal: scalar `key: value`
//! lines, with indented or fence-internal continuation lines appended to
//! the previous key's raw string. Loading is single-threaded and sorted so
//! two loads of the same tree are identical.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const SKILL_FILE_NAME: &str = "SKILL.md";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDocument {
    /// Folder name, lowercased; stable identity across runs and machines.
    pub skill_id: String,
    pub name: String,
    pub description: String,
    /// Body lines after the frontmatter block, in file order.
    pub body: Vec<String>,
    /// Relative paths of files shipped alongside SKILL.md, sorted.
    pub resources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadWarning {
    pub skill_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryManifest {
    pub root_path: String,
    /// Sorted lexicographically; downstream iteration order.
    pub skill_ids: Vec<String>,
    pub load_warnings: Vec<LoadWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSkillFile {
    pub frontmatter: BTreeMap<String, String>,
    pub body: Vec<String>,
    pub warnings: Vec<String>,
}

/// Split a SKILL.md into its frontmatter map and body lines.
///
/// The frontmatter block is delimited by a `---` line at the very top and
/// the next `---` line. Without an opening fence the whole text is body;
/// an unterminated fence also falls back to whole-text body with a warning
/// so one malformed file cannot sink an index build.
pub fn parse_skill_file(text: &str) -> ParsedSkillFile {
    let lines: Vec<&str> = text.lines().collect();
    let mut warnings = Vec::new();

    if lines.first().map(|l| l.trim()) != Some("---") {
        return ParsedSkillFile {
            frontmatter: BTreeMap::new(),
            body: lines.iter().map(|l| l.to_string()).collect(),
            warnings,
        };
    }

    let close = lines[1..].iter().position(|l| l.trim() == "---");
    let Some(close) = close else {
        warnings.push("unterminated frontmatter fence; treating file as body".to_string());
        return ParsedSkillFile {
            frontmatter: BTreeMap::new(),
            body: lines.iter().map(|l| l.to_string()).collect(),
            warnings,
        };
    };
    let close = close + 1; // index of the closing fence in `lines`

    let mut frontmatter: BTreeMap<String, String> = BTreeMap::new();
    let mut current_key: Option<String> = None;
    for raw in &lines[1..close] {
        if let Some((key, value)) = split_scalar_line(raw) {
            frontmatter.insert(key.clone(), value);
            current_key = Some(key);
        } else if let Some(key) = &current_key {
            // Continuation of a nested or folded value; keep it raw.
            let entry = frontmatter.get_mut(key).expect("current key exists");
            if !entry.is_empty() {
                entry.push('\n');
            }
            entry.push_str(raw.trim());
        }
    }

    ParsedSkillFile {
        frontmatter,
        body: lines[close + 1..].iter().map(|l| l.to_string()).collect(),
        warnings,
    }
}

fn split_scalar_line(line: &str) -> Option<(String, String)> {
    if line.starts_with(char::is_whitespace) {
        return None;
    }
    let (key, value) = line.split_once(':')?;
    let key = key.trim();
    if key.is_empty() || !key.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') {
        return None;
    }
    Some((key.to_string(), unquote(value.trim())))
}

fn unquote(value: &str) -> String {
    let v = value.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return v[1..v.len() - 1].to_string();
        }
    }
    v.to_string()
}

/// Load every skill folder under `root`. Folders without a SKILL.md are
/// skipped with a warning; duplicate skill ids and a missing root are
/// fatal.
pub fn load_repository(root: &Path) -> Result<(RepositoryManifest, Vec<SkillDocument>)> {
    if !root.is_dir() {
        return Err(Error::RootMissing(root.to_path_buf()));
    }

    let mut folders: Vec<(String, std::path::PathBuf)> = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().to_string();
        folders.push((name, entry.path()));
    }
    folders.sort_by(|a, b| a.0.cmp(&b.0));

    let mut warnings = Vec::new();
    let mut docs: Vec<SkillDocument> = Vec::new();
    let mut seen_ids = BTreeMap::new();

    for (folder_name, path) in folders {
        let skill_id = folder_name.to_lowercase();
        if skill_id.contains('/') || skill_id.contains('\\') {
            return Err(Error::InvalidSkillId(skill_id));
        }
        let skill_file = path.join(SKILL_FILE_NAME);
        if !skill_file.is_file() {
            warnings.push(LoadWarning {
                skill_id: skill_id.clone(),
                message: format!("no {SKILL_FILE_NAME}; folder skipped"),
            });
            continue;
        }
        if let Some(prev) = seen_ids.insert(skill_id.clone(), folder_name.clone()) {
            let _ = prev;
            return Err(Error::DuplicateSkill(skill_id));
        }

        let text = fs::read_to_string(&skill_file)?;
        let parsed = parse_skill_file(&text);
        for w in &parsed.warnings {
            warnings.push(LoadWarning {
                skill_id: skill_id.clone(),
                message: w.clone(),
            });
        }

        let name = parsed
            .frontmatter
            .get("name")
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| skill_id.clone());
        let mut description = parsed
            .frontmatter
            .get("description")
            .map(|s| s.trim().to_string())
            .unwrap_or_default();
        if description.is_empty() {
            description = first_paragraph(&parsed.body);
        }
        if description.is_empty() {
            warnings.push(LoadWarning {
                skill_id: skill_id.clone(),
                message: "empty description and empty body; skill skipped".to_string(),
            });
            seen_ids.remove(&skill_id);
            continue;
        }

        let resources = list_resources(&path)?;
        docs.push(SkillDocument {
            skill_id,
            name,
            description,
            body: parsed.body,
            resources,
        });
    }

    docs.sort_by(|a, b| a.skill_id.cmp(&b.skill_id));
    let manifest = RepositoryManifest {
        root_path: root.to_string_lossy().to_string(),
        skill_ids: docs.iter().map(|d| d.skill_id.clone()).collect(),
        load_warnings: warnings,
    };
    Ok((manifest, docs))
}

fn first_paragraph(body: &[String]) -> String {
    let mut para = Vec::new();
    for line in body {
        let t = line.trim();
        if t.is_empty() {
            if !para.is_empty() {
                break;
            }
            continue;
        }
        para.push(t);
    }
    para.join(" ")
}

fn list_resources(skill_dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    collect_files(skill_dir, skill_dir, &mut out)?;
    out.retain(|p| p != SKILL_FILE_NAME);
    out.sort();
    Ok(out)
}

fn collect_files(base: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_files(base, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(base)
                .expect("path under base")
                .to_string_lossy()
                .replace('\\', "/");
            out.push(rel);
        }
    }
    Ok(())
}
