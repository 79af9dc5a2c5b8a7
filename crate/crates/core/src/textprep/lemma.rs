use std::collections::{HashMap, HashSet};

/// Minimum lemma length kept for analysis.
pub const MIN_LEMMA_CHARS: usize = 3;

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|b| is_vowel(b) || b == b'y')
}

/// Undoes consonant doubling ("stopp" -> "stop") or restores a silent e on
/// short consonant-vowel-consonant stems ("lov" -> "love").
fn repair_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z')
    {
        return stem[..n - 1].to_string();
    }
    if n >= 3 {
        let (c1, v, c2) = (b[n - 3], b[n - 2], b[n - 1]);
        let vowel_groups = stem
            .as_bytes()
            .windows(2)
            .filter(|w| is_vowel(w[1]) && !is_vowel(w[0]))
            .count()
            + usize::from(is_vowel(b[0]));
        if !is_vowel(c1) && is_vowel(v) && !is_vowel(c2) && !matches!(c2, b'w' | b'x' | b'y') && vowel_groups == 1
        {
            return format!("{stem}e");
        }
    }
    stem.to_string()
}

/// Lemma of a single lowercase token: table lookup, then one of the suffix
/// rules. Never drops the token.
pub fn lemma_of(token: &str, table: &HashMap<String, String>) -> String {
    if let Some(l) = table.get(token) {
        return l.clone();
    }
    if !token.is_ascii() {
        return token.to_string();
    }
    let n = token.len();
    if n > 4 && token.ends_with("ies") {
        return format!("{}y", &token[..n - 3]);
    }
    if token.ends_with("sses")
        || (n > 4 && ["shes", "ches", "xes", "zzes"].iter().any(|suf| token.ends_with(suf)))
    {
        return token[..n - 2].to_string();
    }
    if n > 4 && token.ends_with("ied") {
        return format!("{}y", &token[..n - 3]);
    }
    if n > 3
        && token.ends_with('s')
        && !token.ends_with("ss")
        && !token.ends_with("us")
        && !token.ends_with("is")
    {
        return token[..n - 1].to_string();
    }
    if n > 4 && token.ends_with("ed") && has_vowel(&token[..n - 2]) {
        return repair_stem(&token[..n - 2]);
    }
    if n > 5 && token.ends_with("ing") && has_vowel(&token[..n - 3]) {
        return repair_stem(&token[..n - 3]);
    }
    token.to_string()
}

/// Maps tokens to lemmas and drops lemmas shorter than three characters.
pub fn lemmatize(tokens: &[String], table: &HashMap<String, String>) -> Vec<String> {
    tokens
        .iter()
        .map(|t| lemma_of(t, table))
        .filter(|l| l.chars().count() >= MIN_LEMMA_CHARS)
        .collect()
}

pub fn remove_stopwords(lemmas: &[String], stoplist: &HashSet<String>) -> Vec<String> {
    lemmas
        .iter()
        .filter(|l| !stoplist.contains(l.as_str()))
        .cloned()
        .collect()
}

/// Replaces each short form with its expansion tokens.
pub fn expand_slang(tokens: &[String], slang: &HashMap<String, Vec<String>>) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    for t in tokens {
        match slang.get(t) {
            Some(exp) => out.extend(exp.iter().cloned()),
            None => out.push(t.clone()),
        }
    }
    out
}
