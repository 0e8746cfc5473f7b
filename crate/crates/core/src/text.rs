//! Shared tokenizer, token-set Jaccard, token counting, and the stable
//! content hash. Every module that measures text (subunit length filters,
//! overlap features, packet token accounting) goes through these functions
//! so the whole pipeline agrees on what a token is.

use std::collections::BTreeSet;

/// Split on whitespace and punctuation boundaries, lowercase, and drop
/// empty fragments. A token is a maximal run of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                cur.push(lc);
            }
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// Set Jaccard over tokens. Two empty token sets count as identical (1.0);
/// one empty set shares nothing (0.0).
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let sa = token_set(a);
    let sb = token_set(b);
    jaccard(&sa, &sb)
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    inter / union
}

/// FNV-1a 64-bit. Stable across runs and platforms; used for subunit ids
/// and the deterministic embedder's feature hashing.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// Keep the first `max_tokens` tokens of `text`, preserving the original
/// spelling of each kept token's span as closely as the tokenizer allows
/// (tokens are re-joined with single spaces).
pub fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut kept = Vec::new();
    let mut count = 0usize;
    for w in words {
        let n = token_count(w);
        if count + n > max_tokens {
            break;
        }
        count += n;
        kept.push(w);
        if count == max_tokens {
            break;
        }
    }
    kept.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_whitespace_and_punctuation() {
        assert_eq!(tokenize("Merge the PDFs."), vec!["merge", "the", "pdfs"]);
        assert_eq!(tokenize("citation-management"), vec!["citation", "management"]);
        assert_eq!(tokenize("pandoc --citeproc refs.bib"), vec!["pandoc", "citeproc", "refs", "bib"]);
        assert!(tokenize("  ...  ").is_empty());
    }

    #[test]
    fn jaccard_edge_cases() {
        assert_eq!(token_jaccard("", ""), 1.0);
        assert_eq!(token_jaccard("a", ""), 0.0);
        assert!((token_jaccard("a b", "b c") - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(token_jaccard("Same Text", "same text!"), 1.0);
    }

    #[test]
    fn fnv_is_stable() {
        // Reference value for "hello" from the FNV-1a specification.
        assert_eq!(fnv1a64(b"hello"), 0xa430d84680aabd0b);
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
    }

    #[test]
    fn truncate_keeps_token_budget() {
        assert_eq!(truncate_tokens("one two three four", 2), "one two");
        assert_eq!(token_count(&truncate_tokens("a-b c d", 3)), 3);
        assert_eq!(truncate_tokens("short", 10), "short");
    }
}
