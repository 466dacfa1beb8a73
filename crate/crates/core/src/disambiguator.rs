//! Dataset-wide co-occurrence graph and meaning assignment per vertex.
//!
//! A vertex groups every point sharing one candidate entity set, or, for
//! unrecognized points, one corrected string. Two vertices are linked with
//! weight `w` when `w` point clusters contain a point of each. A candidate
//! entity `e` of vertex `v` scores
//!
//! ```text
//! w(e, v) = Σ_{u ≠ v} Σ_{e' ∈ u} w(v, u) · ([e ≤ e'] + [e' ≤ e])
//! ```
//!
//! and the vertex takes the best-scoring entity when that score is non-zero.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::clusterer::PointCluster;
use crate::error::{Error, Result};
use crate::normalizer::{matched_form, CandidateSet};
use crate::ontology::{EntityId, Lexicon, Ontology};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKey {
    Entities(Vec<EntityId>),
    Unrecognized(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub id: usize,
    pub key: VertexKey,
    /// Representative text: the most frequent matched lexicon form, or the
    /// corrected string of an unrecognized vertex.
    pub label: String,
    pub point_ids: Vec<String>,
    pub entities: BTreeSet<EntityId>,
}

impl Vertex {
    pub fn is_unrecognized(&self) -> bool {
        matches!(self.key, VertexKey::Unrecognized(_))
    }
}

#[derive(Debug, Clone, Default)]
pub struct CoocGraph {
    pub vertices: Vec<Vertex>,
    /// Keyed by `(i, j)` with `i < j`.
    pub edges: BTreeMap<(usize, usize), u64>,
    adjacency: Vec<Vec<(usize, u64)>>,
}

impl CoocGraph {
    pub fn from_parts(vertices: Vec<Vertex>, edges: BTreeMap<(usize, usize), u64>) -> Result<Self> {
        let n = vertices.len();
        let mut adjacency = vec![Vec::new(); n];
        for (&(i, j), &w) in &edges {
            if i >= j || j >= n {
                return Err(Error::Inconsistent(format!("bad edge ({i}, {j})")));
            }
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(CoocGraph {
            vertices,
            edges,
            adjacency,
        })
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, u64)] {
        &self.adjacency[v]
    }

    pub fn weight(&self, i: usize, j: usize) -> u64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.get(&key).copied().unwrap_or(0)
    }

    /// Number of points whose candidate set contains `e`.
    pub fn entity_frequency(&self, e: EntityId) -> usize {
        self.vertices
            .iter()
            .filter(|v| v.entities.contains(&e))
            .map(|v| v.point_ids.len())
            .sum()
    }
}

pub fn build_graph(
    candidates: &[CandidateSet],
    clusters: &[PointCluster],
    lexicon: &Lexicon,
) -> Result<CoocGraph> {
    let mut groups: BTreeMap<VertexKey, (Vec<String>, BTreeMap<String, usize>)> = BTreeMap::new();
    for c in candidates {
        let (key, label) = if c.candidates.is_empty() {
            (
                VertexKey::Unrecognized(c.corrected.clone()),
                c.corrected.clone(),
            )
        } else {
            let label = matched_form(&c.corrected, &c.head, lexicon)
                .unwrap_or(&c.corrected)
                .to_string();
            (
                VertexKey::Entities(c.candidates.iter().copied().collect()),
                label,
            )
        };
        let slot = groups.entry(key).or_default();
        slot.0.push(c.point_id.clone());
        *slot.1.entry(label).or_insert(0) += 1;
    }

    let mut point_vertex: HashMap<&str, usize> = HashMap::new();
    let vertices: Vec<Vertex> = groups
        .into_iter()
        .enumerate()
        .map(|(id, (key, (mut point_ids, labels)))| {
            point_ids.sort();
            // most frequent label, ties to the lexicographically smallest
            let label = labels
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(l, _)| l.clone())
                .unwrap_or_default();
            let entities = match &key {
                VertexKey::Entities(es) => es.iter().copied().collect(),
                VertexKey::Unrecognized(_) => BTreeSet::new(),
            };
            Vertex {
                id,
                key,
                label,
                point_ids,
                entities,
            }
        })
        .collect();
    for v in &vertices {
        for p in &v.point_ids {
            if point_vertex.insert(p.as_str(), v.id).is_some() {
                return Err(Error::Inconsistent(format!("duplicate point `{p}`")));
            }
        }
    }

    let mut edges: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for cluster in clusters {
        let mut present = BTreeSet::new();
        for p in &cluster.point_ids {
            let v = point_vertex.get(p.as_str()).ok_or_else(|| {
                Error::Inconsistent(format!(
                    "cluster `{}` references unknown point `{p}`",
                    cluster.cluster_id
                ))
            })?;
            present.insert(*v);
        }
        let present: Vec<usize> = present.into_iter().collect();
        for (k, &i) in present.iter().enumerate() {
            for &j in &present[k + 1..] {
                *edges.entry((i, j)).or_insert(0) += 1;
            }
        }
    }
    CoocGraph::from_parts(vertices, edges)
}

/// `w(e, v)`; `e` must be a candidate of `v`.
pub fn entity_weight(e: EntityId, v: usize, g: &CoocGraph, o: &Ontology) -> Result<u64> {
    let vertex = &g.vertices[v];
    if !vertex.entities.contains(&e) {
        return Err(Error::EntityNotInVertex {
            entity: o.key(e).to_string(),
            vertex: v,
        });
    }
    let mut total = 0;
    for &(u, w) in g.neighbors(v) {
        for &other in &g.vertices[u].entities {
            let hits = u64::from(o.subclass_of(e, other)) + u64::from(o.subclass_of(other, e));
            total += w * hits;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Unambiguous,
    Ambiguous,
    Unrecognized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Direct,
    Disambiguated,
    AdoptedUnrecognized,
    GeneralizedAmbiguous,
    StringMatched,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexAssignment {
    pub vertex_id: usize,
    pub status: Status,
    pub entity: Option<EntityId>,
    pub provenance: Option<Provenance>,
    pub weights: BTreeMap<EntityId, u64>,
}

/// Picks one entity per vertex. Ties on weight go to the entity present in
/// more points, then to the smaller id.
pub fn assign_meanings(g: &CoocGraph, o: &Ontology) -> Vec<VertexAssignment> {
    g.vertices
        .iter()
        .map(|v| {
            if v.entities.is_empty() {
                return VertexAssignment {
                    vertex_id: v.id,
                    status: Status::Unrecognized,
                    entity: None,
                    provenance: None,
                    weights: BTreeMap::new(),
                };
            }
            let weights: BTreeMap<EntityId, u64> = v
                .entities
                .iter()
                .map(|&e| (e, entity_weight(e, v.id, g, o).expect("candidate of v")))
                .collect();
            if v.entities.len() == 1 {
                return VertexAssignment {
                    vertex_id: v.id,
                    status: Status::Unambiguous,
                    entity: v.entities.first().copied(),
                    provenance: Some(Provenance::Direct),
                    weights,
                };
            }
            let best = weights
                .iter()
                .filter(|(_, &w)| w > 0)
                .max_by(|a, b| {
                    a.1.cmp(b.1)
                        .then_with(|| g.entity_frequency(*a.0).cmp(&g.entity_frequency(*b.0)))
                        .then_with(|| b.0.cmp(a.0))
                })
                .map(|(&e, _)| e);
            VertexAssignment {
                vertex_id: v.id,
                status: if best.is_some() {
                    Status::Unambiguous
                } else {
                    Status::Ambiguous
                },
                entity: best,
                provenance: best.map(|_| Provenance::Disambiguated),
                weights,
            }
        })
        .collect()
}
