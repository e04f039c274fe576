use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};

static STOPWORDS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    include_str!("../../data/stopwords_en.txt")
        .lines()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .collect()
});

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:\b[a-z][a-z0-9+.\-]*://|\bwww\.)[^\s<>()\[\]{}]*").expect("url regex"));
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"</?[A-Za-z][A-Za-z0-9\-]*(?:\s[^<>]*)?/?>").expect("tag regex"));
static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*(?:```|~~~)[^\n]*$").expect("fence regex"));

pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.contains(term)
}

/// Splits an alphanumeric run at case boundaries: `NopCloser` → `Nop`,
/// `Closer`; `HTTPServer` → `HTTP`, `Server`. Digits stay attached.
pub fn split_identifier(word: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let mut parts = Vec::new();
    let mut start = 0;
    for i in 1..chars.len() {
        let (idx, c) = chars[i];
        let prev = chars[i - 1].1;
        let next = chars.get(i + 1).map(|&(_, n)| n);
        let lower_to_upper = c.is_uppercase() && (prev.is_lowercase() || prev.is_numeric());
        let acronym_end = c.is_uppercase() && prev.is_uppercase() && next.is_some_and(char::is_lowercase);
        if lower_to_upper || acronym_end {
            parts.push(&word[start..idx]);
            start = idx;
        }
    }
    parts.push(&word[start..]);
    parts
}

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

pub fn stem_once(term: &str) -> String {
    STEMMER.stem(term).into_owned()
}

/// Stems until the word stops changing, so stemmed output is a fixed point.
pub fn stem(term: &str) -> String {
    let mut current = term.to_string();
    loop {
        let next = stem_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// URLs, markup tags and code fences removed; split on non-alphanumerics
/// and case boundaries; lowercased; stop words dropped; stemmed.
pub fn preprocess_text(raw: &str) -> Vec<String> {
    let text = URL.replace_all(raw, " ");
    let text = TAG.replace_all(&text, " ");
    let text = FENCE.replace_all(&text, " ");
    let mut out = Vec::new();
    for run in text.split(|c: char| !c.is_alphanumeric()).filter(|r| !r.is_empty()) {
        for part in split_identifier(run) {
            let lower = part.to_lowercase();
            if lower.is_empty() || is_stopword(&lower) {
                continue;
            }
            let stemmed = stem(&lower);
            if !stemmed.is_empty() && !is_stopword(&stemmed) {
                out.push(stemmed);
            }
        }
    }
    out
}
