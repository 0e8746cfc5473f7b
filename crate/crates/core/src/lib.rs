//! skillforge-core: index a repository of agent-skill documents into a
//! multi-level skill graph, retrieve task-relevant skills by fusing
//! community-level and subunit-level evidence, and compile the retrieved
//! evidence into a compact, budget-bounded context packet for a
//! downstream executor.
//!
//! Offline: `corpus` loads SKILL.md folders, `subunits` extracts and
//! deduplicates reusable fragments, `graph` builds and persists the
//! index. Online: `retrieval` scores and selects skills with exported
//! highlights and rescue candidates, `compilation` turns them into the
//! READ_FIRST.md / COORDINATOR_PACKET.json pair. `eval` holds the
//! brute-force oracle, baselines, and the synthetic evaluation harness.

pub mod compilation;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod retrieval;
pub mod subunits;
pub mod text;

pub use config::SkillForgeConfig;
pub use error::{Error, Result};
