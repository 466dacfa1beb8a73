//! Raw annotation string → candidate ontology entities.
//!
//! Spelling correction, head-noun extraction by longest lexicon suffix,
//! full-string-first entity lookup and restriction to physical objects.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{EntityId, Lexicon, Ontology};
use crate::spelling::{fold_plural, SpellChecker, SpellConfig};

/// One click with its free-form text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAnnotation {
    pub point_id: String,
    pub image_id: String,
    pub annotator_id: String,
    pub x: f64,
    pub y: f64,
    pub raw: String,
}

impl PointAnnotation {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| Error::InvalidAnnotation {
            point: self.point_id.clone(),
            message: message.to_string(),
        };
        if !(0.0..=1.0).contains(&self.x) || !(0.0..=1.0).contains(&self.y) {
            return Err(bad("coordinates must lie in [0,1]"));
        }
        if self.raw.trim().is_empty() {
            return Err(bad("empty annotation text"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub point_id: String,
    pub candidates: BTreeSet<EntityId>,
    pub corrected: String,
    pub head: String,
    pub modifiers: Vec<String>,
}

impl CandidateSet {
    pub fn is_unrecognized(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// The lexicon form a string resolves to, plural folding included.
pub fn lookup_form<'a>(s: &'a str, lexicon: &Lexicon) -> Option<&'a str> {
    fold_plural(s, |f| lexicon.contains(f))
}

/// Longest token suffix that is a lexicon form; falls back to the last token.
pub fn extract_head(corrected: &str, lexicon: &Lexicon) -> (String, Vec<String>) {
    let tokens: Vec<&str> = corrected.split_whitespace().collect();
    if tokens.is_empty() {
        return (String::new(), Vec::new());
    }
    let split = (0..tokens.len())
        .find(|&start| lookup_form(&tokens[start..].join(" "), lexicon).is_some())
        .unwrap_or(tokens.len() - 1);
    (
        tokens[split..].join(" "),
        tokens[..split].iter().map(|t| t.to_string()).collect(),
    )
}

/// The form whose entities become the candidates: the full string if it is
/// in the lexicon, otherwise the head noun.
pub fn matched_form<'a>(corrected: &'a str, head: &'a str, lexicon: &Lexicon) -> Option<&'a str> {
    lookup_form(corrected, lexicon).or_else(|| lookup_form(head, lexicon))
}

pub fn identify_entities(corrected: &str, head: &str, ontology: &Ontology) -> BTreeSet<EntityId> {
    let lexicon = ontology.lexicon();
    match matched_form(corrected, head, lexicon).and_then(|f| lexicon.lookup(f)) {
        Some(found) => ontology.restrict_to_physical(found),
        None => BTreeSet::new(),
    }
}

pub struct Normalizer<'o> {
    ontology: &'o Ontology,
    speller: SpellChecker<'o>,
}

impl<'o> Normalizer<'o> {
    pub fn new(ontology: &'o Ontology, config: SpellConfig) -> Self {
        Normalizer {
            ontology,
            speller: SpellChecker::new(ontology.lexicon(), config),
        }
    }

    pub fn correct_spelling(&self, raw: &str) -> String {
        self.speller.correct(raw)
    }

    fn normalize_text(&self, raw: &str) -> (String, String, Vec<String>, BTreeSet<EntityId>) {
        let corrected = self.correct_spelling(raw);
        let (head, modifiers) = extract_head(&corrected, self.ontology.lexicon());
        let candidates = identify_entities(&corrected, &head, self.ontology);
        (corrected, head, modifiers, candidates)
    }

    pub fn normalize_point(&self, p: &PointAnnotation) -> CandidateSet {
        let (corrected, head, modifiers, candidates) = self.normalize_text(&p.raw);
        CandidateSet {
            point_id: p.point_id.clone(),
            candidates,
            corrected,
            head,
            modifiers,
        }
    }

    /// Normalizes a corpus, each distinct raw string once. Output order
    /// follows input order regardless of thread count.
    pub fn normalize_corpus(&self, points: &[PointAnnotation]) -> Vec<CandidateSet> {
        let unique: Vec<&str> = points
            .iter()
            .map(|p| p.raw.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let solved: BTreeMap<&str, _> = unique
            .par_iter()
            .map(|&raw| (raw, self.normalize_text(raw)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        points
            .iter()
            .map(|p| {
                let (corrected, head, modifiers, candidates) = solved[p.raw.as_str()].clone();
                CandidateSet {
                    point_id: p.point_id.clone(),
                    candidates,
                    corrected,
                    head,
                    modifiers,
                }
            })
            .collect()
    }
}
