//! File formats shared by the stages: JSON Lines records keyed by entity id
//! strings, plus atomic writes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::clusterer::score_serde;
use crate::disambiguator::{CoocGraph, Provenance, Status, Vertex, VertexAssignment, VertexKey};
use crate::error::{Error, Result};
use crate::normalizer::{CandidateSet, PointAnnotation};
use crate::ontology::{EntityId, Ontology};
use crate::postproc::{DiscoveredWord, ResolvedPoint};
use crate::specializer::Specialization;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let res = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = res {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, &to_jsonl(rows)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_vec_pretty(value)?;
    s.push(b'\n');
    write_atomic(path, &s)
}

/// Reads JSON Lines, skipping blank lines; errors carry the line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Parse {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Reads and validates annotations; point ids must be unique.
pub fn read_annotations(path: &Path) -> Result<Vec<PointAnnotation>> {
    let points: Vec<PointAnnotation> = read_jsonl(path)?;
    let mut seen = BTreeSet::new();
    for p in &points {
        p.validate()?;
        if !seen.insert(p.point_id.as_str()) {
            return Err(Error::InvalidAnnotation {
                point: p.point_id.clone(),
                message: "duplicate point id".into(),
            });
        }
    }
    Ok(points)
}

fn keys(o: &Ontology, s: &BTreeSet<EntityId>) -> Vec<String> {
    s.iter().map(|&e| o.key(e).to_string()).collect()
}

fn resolve_all(o: &Ontology, ks: &[String]) -> Result<BTreeSet<EntityId>> {
    ks.iter().map(|k| o.resolve(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub point_id: String,
    pub corrected: String,
    pub head: String,
    pub modifiers: Vec<String>,
    pub candidates: Vec<String>,
}

impl CandidateRecord {
    pub fn from_set(c: &CandidateSet, o: &Ontology) -> Self {
        CandidateRecord {
            point_id: c.point_id.clone(),
            corrected: c.corrected.clone(),
            head: c.head.clone(),
            modifiers: c.modifiers.clone(),
            candidates: keys(o, &c.candidates),
        }
    }

    pub fn into_set(self, o: &Ontology) -> Result<CandidateSet> {
        Ok(CandidateSet {
            candidates: resolve_all(o, &self.candidates)?,
            point_id: self.point_id,
            corrected: self.corrected,
            head: self.head,
            modifiers: self.modifiers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKeyRecord {
    Entities(Vec<String>),
    Unrecognized(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: usize,
    pub key: VertexKeyRecord,
    pub label: String,
    pub point_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<(usize, usize, u64)>,
}

impl GraphRecord {
    pub fn from_graph(g: &CoocGraph, o: &Ontology) -> Self {
        GraphRecord {
            vertices: g
                .vertices
                .iter()
                .map(|v| VertexRecord {
                    id: v.id,
                    key: match &v.key {
                        VertexKey::Entities(es) => VertexKeyRecord::Entities(
                            es.iter().map(|&e| o.key(e).to_string()).collect(),
                        ),
                        VertexKey::Unrecognized(s) => VertexKeyRecord::Unrecognized(s.clone()),
                    },
                    label: v.label.clone(),
                    point_ids: v.point_ids.clone(),
                })
                .collect(),
            edges: g.edges.iter().map(|(&(i, j), &w)| (i, j, w)).collect(),
        }
    }

    pub fn into_graph(self, o: &Ontology) -> Result<CoocGraph> {
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (pos, v) in self.vertices.into_iter().enumerate() {
            if v.id != pos {
                return Err(Error::Inconsistent(format!(
                    "vertex {} listed at position {pos}",
                    v.id
                )));
            }
            let (key, entities) = match v.key {
                VertexKeyRecord::Entities(ks) => {
                    let set = resolve_all(o, &ks)?;
                    (VertexKey::Entities(set.iter().copied().collect()), set)
                }
                VertexKeyRecord::Unrecognized(s) => (VertexKey::Unrecognized(s), BTreeSet::new()),
            };
            vertices.push(Vertex {
                id: v.id,
                key,
                label: v.label,
                point_ids: v.point_ids,
                entities,
            });
        }
        let edges = self
            .edges
            .into_iter()
            .map(|(i, j, w)| ((i, j), w))
            .collect();
        CoocGraph::from_parts(vertices, edges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub vertex_id: usize,
    pub status: Status,
    pub entity: Option<String>,
    pub weights: BTreeMap<String, u64>,
    pub provenance: Option<Provenance>,
}

impl AssignmentRecord {
    pub fn from_assignment(a: &VertexAssignment, o: &Ontology) -> Self {
        AssignmentRecord {
            vertex_id: a.vertex_id,
            status: a.status,
            entity: a.entity.map(|e| o.key(e).to_string()),
            weights: a
                .weights
                .iter()
                .map(|(&e, &w)| (o.key(e).to_string(), w))
                .collect(),
            provenance: a.provenance,
        }
    }

    pub fn into_assignment(self, o: &Ontology) -> Result<VertexAssignment> {
        Ok(VertexAssignment {
            vertex_id: self.vertex_id,
            status: self.status,
            entity: self.entity.as_deref().map(|k| o.resolve(k)).transpose()?,
            provenance: self.provenance,
            weights: self
                .weights
                .into_iter()
                .map(|(k, w)| Ok((o.resolve(&k)?, w)))
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRecord {
    pub point_id: String,
    pub image_id: String,
    pub annotator_id: String,
    pub x: f64,
    pub y: f64,
    pub raw: String,
    pub entity: String,
    pub provenance: Provenance,
}

impl ResolvedRecord {
    pub fn from_point(p: &ResolvedPoint, o: &Ontology) -> Self {
        ResolvedRecord {
            point_id: p.point_id.clone(),
            image_id: p.image_id.clone(),
            annotator_id: p.annotator_id.clone(),
            x: p.x,
            y: p.y,
            raw: p.raw.clone(),
            entity: o.key(p.entity).to_string(),
            provenance: p.provenance,
        }
    }

    pub fn into_point(self, o: &Ontology) -> Result<ResolvedPoint> {
        let entity = o.resolve(&self.entity)?;
        if !o.is_physical(entity) {
            return Err(Error::Inconsistent(format!(
                "point `{}` resolved to non-physical `{}`",
                self.point_id, self.entity
            )));
        }
        Ok(ResolvedPoint {
            point_id: self.point_id,
            image_id: self.image_id,
            annotator_id: self.annotator_id,
            x: self.x,
            y: self.y,
            raw: self.raw,
            entity,
            provenance: self.provenance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub vertex_id: usize,
    pub status: Status,
    pub label: String,
    pub entities: Vec<String>,
    pub point_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredRecord {
    pub surface: String,
    pub entity: String,
    pub support_weight: u64,
}

impl DiscoveredRecord {
    pub fn from_word(w: &DiscoveredWord, o: &Ontology) -> Self {
        DiscoveredRecord {
            surface: w.surface.clone(),
            entity: o.key(w.entity).to_string(),
            support_weight: w.support_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializationRecord {
    pub point_id: String,
    pub from: String,
    pub to: String,
    #[serde(with = "score_serde")]
    pub confidence: f64,
    pub applied: bool,
}

impl SpecializationRecord {
    pub fn from_result(s: &Specialization, o: &Ontology) -> Self {
        SpecializationRecord {
            point_id: s.point_id.clone(),
            from: o.key(s.from).to_string(),
            to: o.key(s.to).to_string(),
            confidence: s.confidence,
            applied: s.applied,
        }
    }
}

/// Per-image reference label sets: JSON Lines `{"image_id", "entities"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub image_id: String,
    pub entities: Vec<String>,
}

pub fn read_reference(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let rows: Vec<ReferenceRecord> = read_jsonl(path)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.image_id, r.entities.into_iter().collect()))
        .collect())
}
