//! Dictionary spelling correction by restricted Damerau-Levenshtein distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ontology::Lexicon;

/// Maximum edit distance as a function of token length (in chars).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpellConfig {
    /// Tokens up to this many chars use `short_distance`.
    pub short_len: usize,
    pub short_distance: usize,
    pub long_distance: usize,
}

impl Default for SpellConfig {
    fn default() -> Self {
        SpellConfig {
            short_len: 5,
            short_distance: 1,
            long_distance: 2,
        }
    }
}

impl SpellConfig {
    pub fn max_distance(&self, len: usize) -> usize {
        if len <= self.short_len {
            self.short_distance
        } else {
            self.long_distance
        }
    }
}

/// Optimal string alignment distance (adjacent transpositions, no substring
/// edited twice), over chars.
pub fn osa_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    // three rolling rows: i-2, i-1, i
    let mut prev2 = vec![0usize; m + 1];
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut d = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                d = d.min(prev2[j - 2] + 1);
            }
            cur[j] = d;
        }
        std::mem::swap(&mut prev2, &mut prev);
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// `s` itself if in the lexicon, else `s` minus a trailing "es" or "s" when
/// that hits the lexicon.
pub fn fold_plural(s: &str, contains: impl Fn(&str) -> bool) -> Option<&str> {
    if contains(s) {
        return Some(s);
    }
    for suffix in ["es", "s"] {
        if let Some(stem) = s.strip_suffix(suffix) {
            if !stem.is_empty() && contains(stem) {
                return Some(stem);
            }
        }
    }
    None
}

/// Token-level corrector built from the tokens of every lexicon surface form.
#[derive(Debug, Clone)]
pub struct SpellChecker<'l> {
    lexicon: &'l Lexicon,
    config: SpellConfig,
    tokens: BTreeMap<String, u64>,
}

impl<'l> SpellChecker<'l> {
    pub fn new(lexicon: &'l Lexicon, config: SpellConfig) -> Self {
        let mut tokens: BTreeMap<String, u64> = BTreeMap::new();
        for (form, _) in lexicon.forms() {
            let f = lexicon.frequency(form);
            for tok in form.split(' ') {
                *tokens.entry(tok.to_string()).or_insert(0) += f;
            }
        }
        SpellChecker {
            lexicon,
            config,
            tokens,
        }
    }

    pub fn config(&self) -> &SpellConfig {
        &self.config
    }

    fn known_token(&self, tok: &str) -> bool {
        fold_plural(tok, |s| self.tokens.contains_key(s)).is_some()
    }

    fn any_span_matches(&self, tokens: &[&str]) -> bool {
        (0..tokens.len()).any(|i| {
            (i + 1..=tokens.len()).any(|j| {
                let span = tokens[i..j].join(" ");
                fold_plural(&span, |s| self.lexicon.contains(s)).is_some()
            })
        })
    }

    /// Best dictionary token within the length-dependent distance bound.
    /// Ties: smaller distance, higher frequency, then lexicographic.
    pub fn correct_token(&self, tok: &str) -> Option<&str> {
        let len = tok.chars().count();
        let bound = self.config.max_distance(len);
        let mut best: Option<(usize, u64, &str)> = None;
        for (cand, &freq) in &self.tokens {
            if cand.chars().count().abs_diff(len) > bound {
                continue;
            }
            let d = osa_distance(tok, cand);
            if d > bound {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bf, _)) => d < bd || (d == bd && freq > bf),
            };
            if better {
                best = Some((d, freq, cand.as_str()));
            }
        }
        best.map(|(_, _, c)| c)
    }

    /// Distance from `s` to the closest lexicon surface form.
    pub fn nearest_form_distance(&self, s: &str) -> usize {
        self.lexicon
            .forms()
            .map(|(f, _)| osa_distance(s, f))
            .min()
            .unwrap_or(usize::MAX)
    }

    pub fn correct(&self, raw: &str) -> String {
        let norm = crate::ontology::normalize_form(raw);
        let tokens: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() || self.any_span_matches(&tokens) {
            return norm;
        }
        let corrected: Vec<&str> = tokens
            .iter()
            .map(|&t| {
                if self.known_token(t) {
                    t
                } else {
                    self.correct_token(t).unwrap_or(t)
                }
            })
            .collect();
        let out = corrected.join(" ");
        if out == norm || self.nearest_form_distance(&out) > self.nearest_form_distance(&norm) {
            return norm;
        }
        out
    }
}

/// One-shot convenience around [`SpellChecker::correct`].
pub fn correct_spelling(raw: &str, lexicon: &Lexicon) -> String {
    SpellChecker::new(lexicon, SpellConfig::default()).correct(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn osa_basics() {
        assert_eq!(osa_distance("", "abc"), 3);
        assert_eq!(osa_distance("doog", "dog"), 1);
        assert_eq!(osa_distance("loin", "lion"), 1);
        assert_eq!(osa_distance("ca", "abc"), 3);
        assert_eq!(osa_distance("kitten", "sitting"), 3);
    }

    #[test]
    fn fold_plural_prefers_exact_then_es_then_s() {
        let lex = ["box", "horse", "glasses"];
        let has = |s: &str| lex.contains(&s);
        assert_eq!(fold_plural("boxes", has), Some("box"));
        assert_eq!(fold_plural("horses", has), Some("horse"));
        assert_eq!(fold_plural("glasses", has), Some("glasses"));
        assert_eq!(fold_plural("s", has), None);
    }

    #[test]
    fn distance_bound_follows_length() {
        let c = SpellConfig::default();
        assert_eq!(c.max_distance(5), 1);
        assert_eq!(c.max_distance(6), 2);
    }
}
