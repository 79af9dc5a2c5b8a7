use std::sync::OnceLock;

use regex::Regex;

struct Patterns {
    html: Regex,
    url: Regex,
    numeric_date: Regex,
    month_day: Regex,
    symbols: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| {
        const MONTH: &str = r"(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)";
        const DAY: &str = r"(?:[12][0-9]|3[01]|0?[1-9])(?:st|nd|rd|th)?";
        Patterns {
            html: Regex::new(r"(?s)<[^<>]*>|&[a-zA-Z]+;|&#[0-9]+;").unwrap(),
            url: Regex::new(r"(?i)\b(?:https?://|www\.)\S+|\b[a-z0-9.-]+\.(?:com|org|net|io|ai|app|co|me)(?:/\S*)?\b")
                .unwrap(),
            // d/m/y, m/d/y, y-m-d, d.m.y and two-part m-d / d/m shapes.
            numeric_date: Regex::new(
                r"\b(?:\d{4}[-/.]\d{1,2}[-/.]\d{1,2}|\d{1,2}[-/.]\d{1,2}[-/.]\d{2,4}|\d{1,2}[-/]\d{1,2})\b",
            )
            .unwrap(),
            month_day: Regex::new(&format!(
                r"(?i)\b(?:{MONTH}\.?\s+{DAY}(?:,?\s+\d{{4}})?|{DAY}\s+(?:of\s+)?{MONTH}(?:,?\s+\d{{4}})?)\b"
            ))
            .unwrap(),
            // Symbol categories plus the emoticon and pictograph blocks.
            symbols: Regex::new(r"[\p{So}\p{Sk}\x{1F300}-\x{1FAFF}\x{2600}-\x{27BF}\x{FE00}-\x{FE0F}\x{200D}]")
                .unwrap(),
        }
    })
}

fn clean_once(raw: &str) -> String {
    let p = patterns();
    let s = p.html.replace_all(raw, " ");
    let s = p.url.replace_all(&s, " ");
    let s = p.numeric_date.replace_all(&s, " ");
    let s = p.month_day.replace_all(&s, " ");
    let s = p.symbols.replace_all(&s, " ");
    let lowered = s.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for c in lowered.chars() {
        if c == '\'' || c == '\u{2019}' {
            // contractions collapse: "don't" -> "dont"
            continue;
        }
        if c.is_alphanumeric() {
            out.push(c);
        } else {
            out.push(' ');
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercases and strips HTML, URLs, dates, emoji/symbols and punctuation,
/// leaving words separated by single spaces.
///
/// Removal can join fragments into a new match (`"may😀5"` becomes
/// `"may 5"`), so the pass repeats until the text stops changing; every pass
/// only shortens the string.
pub fn clean_text(raw: &str) -> String {
    let mut current = clean_once(raw);
    loop {
        let next = clean_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

pub fn tokenize(clean: &str) -> Vec<String> {
    clean.split_whitespace().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn every_removal_class() {
        assert_eq!(
            clean_text("Great app!! Visit https://x.io <b>now</b> 😀"),
            "great app visit now"
        );
    }

    #[test]
    fn dates_removed() {
        assert_eq!(clean_text("Helped me on 12/05/2023 a lot"), "helped me on a lot");
        assert_eq!(clean_text("since 2023-01-15 it works"), "since it works");
        assert_eq!(clean_text("Updated on March 5th, 2024 and broke"), "updated on and broke");
        assert_eq!(clean_text("on 3 june it crashed"), "on it crashed");
    }

    #[test]
    fn trims_and_collapses() {
        assert_eq!(clean_text("   already clean   "), "already clean");
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("don't   stop"), "dont stop");
    }

    #[test]
    fn removal_that_creates_a_date() {
        assert_eq!(clean_text("may😀5 wow"), "wow");
    }

    #[test]
    fn tokenize_splits_on_spaces() {
        assert_eq!(tokenize("great app"), ["great", "app"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a b  c"), ["a", "b", "c"]);
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,80}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
            prop_assert!(!once.starts_with(' ') && !once.ends_with(' ') && !once.contains("  "));
            prop_assert!(once.chars().all(|c| c == ' ' || c.is_alphanumeric()));
        }

        #[test]
        fn idempotent_on_review_like_text(
            parts in prop::collection::vec(prop::sample::select(vec![
                "I", "love", "it", "!!", "😀", "<b>", "</b>", "https://a.io/x", "12/05/2023",
                "may", "5", "3rd", "of", "june", "don't", "www.site.com", "&amp;", "é", "🙏🏽", "...",
            ]), 0..25),
        ) {
            let s = parts.join(" ");
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
            prop_assert!(!once.contains("http") && !once.contains('<'));
        }
    }
}
