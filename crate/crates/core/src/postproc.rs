//! Resolution of unrecognized and ambiguous vertices, and the final set of
//! unambiguous points.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::disambiguator::{CoocGraph, Provenance, Status, VertexAssignment};
use crate::error::{Error, Result};
use crate::normalizer::{CandidateSet, PointAnnotation};
use crate::ontology::{EntityId, Ontology};

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPoint {
    pub point_id: String,
    pub image_id: String,
    pub annotator_id: String,
    pub x: f64,
    pub y: f64,
    pub raw: String,
    pub entity: EntityId,
    pub provenance: Provenance,
}

/// An unrecognized string that took the meaning of a co-clustered vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveredWord {
    pub surface: String,
    pub entity: EntityId,
    pub support_weight: u64,
}

/// Each unrecognized vertex linked to an unambiguous one adopts the entity
/// of its heaviest such neighbor (ties: smaller vertex id). Statuses are read
/// from before the pass, so adoptions do not chain.
pub fn resolve_unrecognized(
    assignments: &mut [VertexAssignment],
    g: &CoocGraph,
) -> Vec<DiscoveredWord> {
    let snapshot: Vec<(Status, Option<EntityId>)> =
        assignments.iter().map(|a| (a.status, a.entity)).collect();
    let mut found = Vec::new();
    for a in assignments.iter_mut() {
        if a.status != Status::Unrecognized {
            continue;
        }
        let best = g
            .neighbors(a.vertex_id)
            .iter()
            .filter(|(u, _)| snapshot[*u].0 == Status::Unambiguous)
            .max_by(|x, y| x.1.cmp(&y.1).then_with(|| y.0.cmp(&x.0)));
        if let Some(&(u, w)) = best {
            let entity = snapshot[u].1.expect("unambiguous vertex has an entity");
            a.status = Status::Unambiguous;
            a.entity = Some(entity);
            a.provenance = Some(Provenance::AdoptedUnrecognized);
            found.push(DiscoveredWord {
                surface: g.vertices[a.vertex_id].label.clone(),
                entity,
                support_weight: w,
            });
        }
    }
    found
}

/// Candidates totally ordered by the subclass relation: returns the most
/// generic one.
fn chain_top(entities: &[EntityId], o: &Ontology) -> Option<EntityId> {
    let mut sorted = entities.to_vec();
    sorted.sort_by_key(|&e| (o.depth(e), e));
    let is_chain = sorted.windows(2).all(|w| o.subclass_of(w[1], w[0]));
    is_chain.then(|| sorted[0])
}

/// Rule A (generalize a chain of candidates), then rule B (unique exact name
/// match with the vertex text). One pass each.
pub fn resolve_ambiguous(assignments: &mut [VertexAssignment], g: &CoocGraph, o: &Ontology) {
    for a in assignments.iter_mut() {
        if a.status != Status::Ambiguous {
            continue;
        }
        let vertex = &g.vertices[a.vertex_id];
        let entities: Vec<EntityId> = vertex.entities.iter().copied().collect();
        if let Some(top) = chain_top(&entities, o) {
            a.status = Status::Unambiguous;
            a.entity = Some(top);
            a.provenance = Some(Provenance::GeneralizedAmbiguous);
            continue;
        }
        let matches: Vec<EntityId> = entities
            .iter()
            .copied()
            .filter(|&e| o.name(e) == vertex.label)
            .collect();
        if let [only] = matches[..] {
            a.status = Status::Unambiguous;
            a.entity = Some(only);
            a.provenance = Some(Provenance::StringMatched);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    OntologyMatching,
    ClusteringDisambiguation,
    UnrecognizedPostproc,
    AmbiguousPostproc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub stage: Stage,
    pub unambiguous_pct: f64,
    pub ambiguous_pct: f64,
    pub unrecognized_pct: f64,
    pub unambiguous_points: usize,
    pub ambiguous_points: usize,
    pub unrecognized_points: usize,
    pub unambiguous_classes: usize,
}

impl StageCounts {
    fn new(stage: Stage, unamb: usize, amb: usize, unrec: usize, classes: usize) -> Self {
        let total = unamb + amb + unrec;
        let pct = |k: usize| {
            if total == 0 {
                0.0
            } else {
                100.0 * k as f64 / total as f64
            }
        };
        StageCounts {
            stage,
            unambiguous_pct: pct(unamb),
            ambiguous_pct: pct(amb),
            unrecognized_pct: pct(unrec),
            unambiguous_points: unamb,
            ambiguous_points: amb,
            unrecognized_points: unrec,
            unambiguous_classes: classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub total_points: usize,
    pub stages: Vec<StageCounts>,
}

/// Point-level tally of the first stage, straight from the candidate sets.
pub fn matching_stage_counts(candidates: &[CandidateSet]) -> StageCounts {
    let mut counts = [0usize; 3];
    let mut classes = std::collections::BTreeSet::new();
    for c in candidates {
        match c.candidates.len() {
            0 => counts[2] += 1,
            1 => {
                counts[0] += 1;
                classes.insert(*c.candidates.first().unwrap());
            }
            _ => counts[1] += 1,
        }
    }
    StageCounts::new(
        Stage::OntologyMatching,
        counts[0],
        counts[1],
        counts[2],
        classes.len(),
    )
}

/// Point-level tally of vertex statuses.
pub fn assignment_stage_counts(
    stage: Stage,
    assignments: &[VertexAssignment],
    g: &CoocGraph,
) -> StageCounts {
    let mut counts = [0usize; 3];
    let mut classes = std::collections::BTreeSet::new();
    for a in assignments {
        let size = g.vertices[a.vertex_id].point_ids.len();
        match a.status {
            Status::Unambiguous => {
                counts[0] += size;
                classes.insert(a.entity.expect("unambiguous"));
            }
            Status::Ambiguous => counts[1] += size,
            Status::Unrecognized => counts[2] += size,
        }
    }
    StageCounts::new(stage, counts[0], counts[1], counts[2], classes.len())
}

/// Everything the post-processing step produces.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub assignments: Vec<VertexAssignment>,
    pub discovered: Vec<DiscoveredWord>,
    pub stats: StageStats,
}

/// Runs both post-processing passes on the disambiguation output. With
/// `iterate`, unrecognized adoption runs once more after the ambiguous rules
/// (counted in the last stage).
pub fn postprocess(
    candidates: &[CandidateSet],
    g: &CoocGraph,
    disambiguated: &[VertexAssignment],
    o: &Ontology,
    iterate: bool,
) -> Resolution {
    let mut assignments = disambiguated.to_vec();
    let mut stages = vec![
        matching_stage_counts(candidates),
        assignment_stage_counts(Stage::ClusteringDisambiguation, &assignments, g),
    ];
    let mut discovered = resolve_unrecognized(&mut assignments, g);
    stages.push(assignment_stage_counts(
        Stage::UnrecognizedPostproc,
        &assignments,
        g,
    ));
    resolve_ambiguous(&mut assignments, g, o);
    if iterate {
        discovered.extend(resolve_unrecognized(&mut assignments, g));
    }
    stages.push(assignment_stage_counts(
        Stage::AmbiguousPostproc,
        &assignments,
        g,
    ));
    Resolution {
        assignments,
        discovered,
        stats: StageStats {
            total_points: candidates.len(),
            stages,
        },
    }
}

/// Materializes a [`ResolvedPoint`] for every point of an unambiguous
/// vertex, in annotation order.
pub fn finalize_points(
    assignments: &[VertexAssignment],
    g: &CoocGraph,
    annotations: &[PointAnnotation],
) -> Result<Vec<ResolvedPoint>> {
    let mut by_point: HashMap<&str, (EntityId, Provenance)> = HashMap::new();
    for a in assignments {
        if a.status != Status::Unambiguous {
            continue;
        }
        let entity = a.entity.ok_or_else(|| {
            Error::Inconsistent(format!("vertex {} unambiguous without entity", a.vertex_id))
        })?;
        let provenance = a.provenance.unwrap_or(Provenance::Disambiguated);
        for p in &g.vertices[a.vertex_id].point_ids {
            by_point.insert(p.as_str(), (entity, provenance));
        }
    }
    Ok(annotations
        .iter()
        .filter_map(|p| {
            by_point
                .get(p.point_id.as_str())
                .map(|&(entity, provenance)| ResolvedPoint {
                    point_id: p.point_id.clone(),
                    image_id: p.image_id.clone(),
                    annotator_id: p.annotator_id.clone(),
                    x: p.x,
                    y: p.y,
                    raw: p.raw.clone(),
                    entity,
                    provenance,
                })
        })
        .collect())
}

/// Vertices left ambiguous or unrecognized, for manual review.
pub fn review_vertices<'g>(
    assignments: &[VertexAssignment],
    g: &'g CoocGraph,
) -> Vec<(Status, &'g crate::disambiguator::Vertex)> {
    assignments
        .iter()
        .filter(|a| a.status != Status::Unambiguous)
        .map(|a| (a.status, &g.vertices[a.vertex_id]))
        .collect()
}

/// Entity → point count over resolved points.
pub fn point_mass(points: &[ResolvedPoint]) -> BTreeMap<EntityId, u64> {
    let mut m = BTreeMap::new();
    for p in points {
        *m.entry(p.entity).or_insert(0) += 1;
    }
    m
}
