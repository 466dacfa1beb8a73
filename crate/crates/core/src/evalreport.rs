//! Metrics against ground truth or reference labels, and report bundles.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalizer::{CandidateSet, PointAnnotation};
use crate::ontology::{EntityId, Ontology};
use crate::postproc::{ResolvedPoint, StageStats};
use crate::simgen::GroundTruth;
use crate::specializer::CurvePoint;
use crate::vocab::ReducedVocabulary;

/// Per-image agreement rule over the annotators of that image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Agreement {
    Any,
    All,
    /// Share of the image's annotators, inclusive.
    Fraction(f64),
    /// At least this many annotators.
    AtLeast(usize),
}

impl Agreement {
    fn keeps(&self, votes: usize, annotators: usize) -> bool {
        match *self {
            Agreement::Any => votes >= 1,
            Agreement::All => votes == annotators && votes > 0,
            Agreement::Fraction(f) => votes > 0 && votes as f64 >= f * annotators as f64,
            Agreement::AtLeast(k) => votes >= k.max(1),
        }
    }
}

/// Annotators who clicked anything on each image.
pub fn annotators_by_image(annotations: &[PointAnnotation]) -> BTreeMap<String, BTreeSet<String>> {
    let mut m: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for p in annotations {
        m.entry(p.image_id.clone())
            .or_default()
            .insert(p.annotator_id.clone());
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementLabels {
    pub per_image: BTreeMap<String, BTreeSet<EntityId>>,
    pub mean_classes: f64,
}

pub fn agreement_labels(
    points: &[ResolvedPoint],
    annotators: &BTreeMap<String, BTreeSet<String>>,
    rule: Agreement,
) -> AgreementLabels {
    let mut votes: BTreeMap<&str, BTreeMap<EntityId, BTreeSet<&str>>> = BTreeMap::new();
    for p in points {
        votes
            .entry(&p.image_id)
            .or_default()
            .entry(p.entity)
            .or_default()
            .insert(&p.annotator_id);
    }
    let per_image: BTreeMap<String, BTreeSet<EntityId>> = annotators
        .iter()
        .map(|(img, who)| {
            let kept = votes
                .get(img.as_str())
                .map(|v| {
                    v.iter()
                        .filter(|(_, a)| rule.keeps(a.len(), who.len()))
                        .map(|(&e, _)| e)
                        .collect()
                })
                .unwrap_or_default();
            (img.clone(), kept)
        })
        .collect();
    let mean_classes = if per_image.is_empty() {
        0.0
    } else {
        per_image.values().map(BTreeSet::len).sum::<usize>() as f64 / per_image.len() as f64
    };
    AgreementLabels {
        per_image,
        mean_classes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub entity: String,
    pub count: u64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub ranked: Vec<ClassShare>,
    pub top_k: usize,
    pub top_k_share: f64,
}

/// Classes by descending count (ties: entity id).
pub fn class_distribution(
    points: &[ResolvedPoint],
    o: &Ontology,
    k: usize,
) -> Result<ClassDistribution> {
    if points.is_empty() {
        return Err(Error::EmptyCorpus("no resolved points".into()));
    }
    let mass = crate::postproc::point_mass(points);
    let total = points.len() as f64;
    let mut ranked: Vec<(EntityId, u64)> = mass.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let top: u64 = ranked.iter().take(k).map(|r| r.1).sum();
    Ok(ClassDistribution {
        ranked: ranked
            .iter()
            .map(|&(e, c)| ClassShare {
                entity: o.key(e).to_string(),
                count: c,
                share: c as f64 / total,
            })
            .collect(),
        top_k: k,
        top_k_share: top as f64 / total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub level: usize,
    pub precision: f64,
    pub recall: f64,
    pub predicted: usize,
    pub reference: usize,
    pub true_positives: usize,
    /// Nothing was predicted; precision is reported as 1.
    pub precision_undefined: bool,
}

/// Micro-averaged precision/recall of per-image label sets.
pub fn pr_against_reference(
    level: usize,
    predicted: &BTreeMap<String, BTreeSet<String>>,
    reference: &BTreeMap<String, BTreeSet<String>>,
    filter: Option<&BTreeSet<String>>,
) -> Result<PrPoint> {
    let empty = BTreeSet::new();
    let (mut tp, mut np, mut nr) = (0, 0, 0);
    for img in predicted.keys() {
        if !reference.contains_key(img) {
            return Err(Error::ImageMismatch(img.clone()));
        }
    }
    for (img, refs) in reference {
        let keep = |s: &&String| filter.is_none_or(|f| f.contains(*s));
        let pred: BTreeSet<&String> = predicted
            .get(img)
            .unwrap_or(&empty)
            .iter()
            .filter(keep)
            .collect();
        let refs: BTreeSet<&String> = refs.iter().filter(keep).collect();
        tp += pred.intersection(&refs).count();
        np += pred.len();
        nr += refs.len();
    }
    Ok(PrPoint {
        level,
        precision: if np == 0 { 1.0 } else { tp as f64 / np as f64 },
        recall: if nr == 0 { 1.0 } else { tp as f64 / nr as f64 },
        predicted: np,
        reference: nr,
        true_positives: tp,
        precision_undefined: np == 0,
    })
}

/// One precision/recall point per agreement level `1..=A`, where `A` is the
/// largest annotator count of any image.
pub fn pr_curve(
    points: &[ResolvedPoint],
    annotators: &BTreeMap<String, BTreeSet<String>>,
    reference: &BTreeMap<String, BTreeSet<String>>,
    filter: Option<&BTreeSet<String>>,
    o: &Ontology,
) -> Result<Vec<PrPoint>> {
    let max = annotators.values().map(BTreeSet::len).max().unwrap_or(0);
    (1..=max)
        .map(|k| {
            let labels = agreement_labels(points, annotators, Agreement::AtLeast(k));
            let keyed = labels
                .per_image
                .into_iter()
                .map(|(img, s)| (img, s.into_iter().map(|e| o.key(e).to_string()).collect()))
                .collect();
            pr_against_reference(k, &keyed, reference, filter)
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Tally {
    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += usize::from(ok);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: Tally,
    pub by_provenance: BTreeMap<String, Tally>,
    pub strict: bool,
}

/// `e` is the true entity or an ancestor of it no more generic than what
/// the annotator intended. `strict` demands the true entity.
pub fn is_correct(
    e: EntityId,
    truth: EntityId,
    intended: EntityId,
    o: &Ontology,
    strict: bool,
) -> bool {
    if strict {
        return e == truth;
    }
    o.subclass_of(truth, e) && o.subclass_of(e, intended)
}

fn truth_index(truth: &[GroundTruth]) -> BTreeMap<&str, &GroundTruth> {
    truth.iter().map(|t| (t.point_id.as_str(), t)).collect()
}

pub fn disambiguation_accuracy(
    points: &[ResolvedPoint],
    truth: &[GroundTruth],
    o: &Ontology,
    strict: bool,
) -> Result<AccuracyReport> {
    let idx = truth_index(truth);
    let mut overall = Tally::default();
    let mut by_provenance: BTreeMap<String, Tally> = BTreeMap::new();
    for p in points {
        let t = idx
            .get(p.point_id.as_str())
            .ok_or_else(|| Error::MissingGroundTruth(p.point_id.clone()))?;
        let ok = is_correct(
            p.entity,
            o.resolve(&t.true_entity)?,
            o.resolve(&t.intended_entity)?,
            o,
            strict,
        );
        overall.add(ok);
        let tag = serde_json::to_value(p.provenance)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        by_provenance.entry(tag).or_default().add(ok);
    }
    Ok(AccuracyReport {
        overall,
        by_provenance,
        strict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolysemyReport {
    pub points: usize,
    pub pipeline: Tally,
    pub baseline: Tally,
    /// Candidate set (entity keys) → the sense the baseline picks.
    pub baseline_senses: BTreeMap<String, String>,
}

/// Accuracy on points whose normalized text had several candidates,
/// against the most-frequent-sense baseline: each candidate set takes the
/// entity most often intended across the corpus ground truth. Unresolved
/// points count as wrong.
pub fn polysemy_accuracy(
    candidates: &[CandidateSet],
    points: &[ResolvedPoint],
    truth: &[GroundTruth],
    o: &Ontology,
) -> Result<PolysemyReport> {
    let idx = truth_index(truth);
    let mut intended_count: BTreeMap<EntityId, usize> = BTreeMap::new();
    for t in truth {
        *intended_count
            .entry(o.resolve(&t.intended_entity)?)
            .or_insert(0) += 1;
    }
    let resolved: BTreeMap<&str, EntityId> = points
        .iter()
        .map(|p| (p.point_id.as_str(), p.entity))
        .collect();
    let mut pipeline = Tally::default();
    let mut baseline = Tally::default();
    let mut senses = BTreeMap::new();
    let mut n = 0;
    for c in candidates.iter().filter(|c| c.candidates.len() >= 2) {
        let t = idx
            .get(c.point_id.as_str())
            .ok_or_else(|| Error::MissingGroundTruth(c.point_id.clone()))?;
        let (te, ie) = (o.resolve(&t.true_entity)?, o.resolve(&t.intended_entity)?);
        let sense = *c
            .candidates
            .iter()
            .max_by(|a, b| {
                let ca = intended_count.get(a).copied().unwrap_or(0);
                let cb = intended_count.get(b).copied().unwrap_or(0);
                ca.cmp(&cb).then(b.cmp(a))
            })
            .expect("two candidates");
        let key = c
            .candidates
            .iter()
            .map(|&e| o.key(e))
            .collect::<Vec<_>>()
            .join("|");
        senses.insert(key, o.key(sense).to_string());
        n += 1;
        baseline.add(is_correct(sense, te, ie, o, false));
        pipeline.add(
            resolved
                .get(c.point_id.as_str())
                .is_some_and(|&e| is_correct(e, te, ie, o, false)),
        );
    }
    Ok(PolysemyReport {
        points: n,
        pipeline,
        baseline,
        baseline_senses: senses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub level: usize,
    pub mean_classes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializationSummary {
    pub evaluated: usize,
    pub accuracy: f64,
    pub baseline_accuracy: f64,
    pub applied_accuracy: f64,
    pub curve: Vec<CurvePoint>,
}

/// Everything a report may contain; absent sections are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_stats: Option<StageStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_distribution: Option<ClassDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Vec<AgreementSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_recall: Option<Vec<PrPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polysemy: Option<PolysemyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocabulary_curve: Option<Vec<ReducedVocabulary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specialization: Option<SpecializationSummary>,
}

/// Rendered report: one JSON document plus CSV curves by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub json: String,
    pub csv: BTreeMap<String, String>,
}

fn csv_string<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("<csv>", std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Alpha-sweep rows for plotting.
pub fn vocabulary_curve_csv(curve: &[ReducedVocabulary]) -> Result<String> {
    #[derive(Serialize)]
    struct Row {
        alpha: f64,
        coverage: f64,
        specificity: f64,
        objective: f64,
    }
    csv_string(curve.iter().map(|v| Row {
        alpha: v.alpha,
        coverage: v.coverage,
        specificity: v.specificity,
        objective: v.objective,
    }))
}

pub fn render_report(r: &Report) -> Result<ReportBundle> {
    if *r == Report::default() {
        return Err(Error::InvalidParameter("report has no sections".into()));
    }
    let mut csv = BTreeMap::new();
    if let Some(c) = &r.vocabulary_curve {
        csv.insert("coverage_specificity.csv".into(), vocabulary_curve_csv(c)?);
    }
    if let Some(s) = &r.specialization {
        csv.insert("accuracy_coverage.csv".into(), csv_string(&s.curve)?);
    }
    if let Some(pr) = &r.precision_recall {
        csv.insert("precision_recall.csv".into(), csv_string(pr)?);
    }
    let mut json = serde_json::to_string_pretty(r)?;
    json.push('\n');
    Ok(ReportBundle { json, csv })
}
