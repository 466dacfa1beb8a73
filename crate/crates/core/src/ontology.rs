//! Physical-object hierarchy and its surface-form lexicon.
//!
//! Entities are stored sorted by their string id, so the ordering of
//! [`EntityId`] handles is the lexicographic ordering of the ids. Every
//! deterministic tie-break downstream relies on this.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an entity inside an [`Ontology`]. Ordered like the string ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub(crate) u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub parent: Option<EntityId>,
}

/// One line of the ontology JSON Lines file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub physical_root: bool,
}

/// One line of the lexicon TSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconRow {
    pub surface: String,
    pub entity: String,
    pub frequency: Option<u64>,
}

/// Lowercase and collapse runs of whitespace.
pub fn normalize_form(s: &str) -> String {
    s.split_whitespace()
        .map(|t| t.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Surface form → entity multimap with optional per-form frequency.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    forms: BTreeMap<String, BTreeSet<EntityId>>,
    frequency: BTreeMap<String, u64>,
    by_entity: BTreeMap<EntityId, BTreeSet<String>>,
}

impl Lexicon {
    pub fn lookup(&self, form: &str) -> Option<&BTreeSet<EntityId>> {
        self.forms.get(form)
    }

    pub fn contains(&self, form: &str) -> bool {
        self.forms.contains_key(form)
    }

    pub fn frequency(&self, form: &str) -> u64 {
        self.frequency.get(form).copied().unwrap_or(0)
    }

    /// Surface forms that may name `entity`, sorted.
    pub fn forms_of(&self, entity: EntityId) -> impl Iterator<Item = &str> {
        self.by_entity
            .get(&entity)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn forms(&self) -> impl Iterator<Item = (&str, &BTreeSet<EntityId>)> {
        self.forms.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Ontology {
    entities: Vec<Entity>,
    index: HashMap<String, EntityId>,
    children: Vec<Vec<EntityId>>,
    depth: Vec<u32>,
    physical: Vec<bool>,
    physical_roots: BTreeSet<EntityId>,
    lexicon: Lexicon,
}

impl Ontology {
    /// Builds and validates an ontology from parsed records.
    ///
    /// When no record is flagged `physical_root`, every root is physical.
    pub fn from_records(records: Vec<EntityRecord>, lexicon: Vec<LexiconRow>) -> Result<Self> {
        let mut records = records;
        records.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in records.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateId(pair[0].id.clone()));
            }
        }
        let index: HashMap<String, EntityId> = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), EntityId(i as u32)))
            .collect();

        let mut entities = Vec::with_capacity(records.len());
        for r in &records {
            let name = normalize_form(&r.name);
            if name.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "entity `{}` has an empty name",
                    r.id
                )));
            }
            let parent = match &r.parent {
                None => None,
                Some(p) if p == &r.id => return Err(Error::Cycle(r.id.clone())),
                Some(p) => Some(*index.get(p).ok_or_else(|| Error::DanglingParent {
                    id: r.id.clone(),
                    parent: p.clone(),
                })?),
            };
            entities.push(Entity {
                id: r.id.clone(),
                name,
                parent,
            });
        }

        // depth by walking parent chains; a chain longer than |E| is a cycle
        let n = entities.len();
        let mut depth = vec![u32::MAX; n];
        for start in 0..n {
            let mut chain = Vec::new();
            let mut cur = start;
            loop {
                if depth[cur] != u32::MAX {
                    break;
                }
                if chain.len() > n {
                    return Err(Error::Cycle(entities[cur].id.clone()));
                }
                chain.push(cur);
                match entities[cur].parent {
                    Some(p) => cur = p.index(),
                    None => {
                        depth[cur] = 0;
                        chain.pop();
                        break;
                    }
                }
            }
            while let Some(c) = chain.pop() {
                let p = entities[c].parent.expect("non-root on chain").index();
                if depth[p] == u32::MAX {
                    return Err(Error::Cycle(entities[c].id.clone()));
                }
                depth[c] = depth[p] + 1;
            }
        }

        let mut children = vec![Vec::new(); n];
        for (i, e) in entities.iter().enumerate() {
            if let Some(p) = e.parent {
                children[p.index()].push(EntityId(i as u32));
            }
        }

        let mut physical_roots: BTreeSet<EntityId> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.physical_root)
            .map(|(i, _)| EntityId(i as u32))
            .collect();
        if physical_roots.is_empty() {
            physical_roots = (0..n)
                .filter(|&i| entities[i].parent.is_none())
                .map(|i| EntityId(i as u32))
                .collect();
        }

        let mut ontology = Ontology {
            entities,
            index,
            children,
            depth,
            physical: vec![false; n],
            physical_roots,
            lexicon: Lexicon::default(),
        };
        ontology.physical = (0..n as u32)
            .map(|i| {
                ontology
                    .ancestors_inclusive(EntityId(i))
                    .any(|a| ontology.physical_roots.contains(&a))
            })
            .collect();

        let mut lex = Lexicon::default();
        for row in lexicon {
            let surface = normalize_form(&row.surface);
            if surface.is_empty() {
                continue;
            }
            let id = ontology.resolve(&row.entity)?;
            lex.forms.entry(surface.clone()).or_default().insert(id);
            lex.by_entity.entry(id).or_default().insert(surface.clone());
            if let Some(f) = row.frequency {
                let slot = lex.frequency.entry(surface).or_insert(0);
                *slot = (*slot).max(f);
            }
        }
        ontology.lexicon = lex;
        Ok(ontology)
    }

    /// Loads the ontology JSON Lines file and the lexicon TSV file.
    pub fn load(ontology_path: &Path, lexicon_path: &Path) -> Result<Self> {
        let records = read_entity_records(ontology_path)?;
        let rows = read_lexicon_rows(lexicon_path)?;
        Self::from_records(records, rows)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn id(&self, key: &str) -> Option<EntityId> {
        self.index.get(key).copied()
    }

    /// Like [`Ontology::id`] but with an unknown-id error.
    pub fn resolve(&self, key: &str) -> Result<EntityId> {
        self.id(key)
            .ok_or_else(|| Error::UnknownEntity(key.to_string()))
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.index()]
    }

    pub fn key(&self, id: EntityId) -> &str {
        &self.entities[id.index()].id
    }

    pub fn name(&self, id: EntityId) -> &str {
        &self.entities[id.index()].name
    }

    pub fn parent(&self, id: EntityId) -> Option<EntityId> {
        self.entities[id.index()].parent
    }

    pub fn children(&self, id: EntityId) -> &[EntityId] {
        &self.children[id.index()]
    }

    pub fn depth(&self, id: EntityId) -> u32 {
        self.depth[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn leaves(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.ids().filter(|&e| self.children(e).is_empty())
    }

    pub fn physical_roots(&self) -> &BTreeSet<EntityId> {
        &self.physical_roots
    }

    pub fn is_physical(&self, id: EntityId) -> bool {
        self.physical[id.index()]
    }

    /// `id`, its parent, grandparent, ... up to the root.
    pub fn ancestors_inclusive(&self, id: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        std::iter::successors(Some(id), move |&e| self.parent(e))
    }

    /// `a ≤ b`: `b` lies on the parent chain of `a`, `a` included.
    pub fn subclass_of(&self, a: EntityId, b: EntityId) -> bool {
        let (da, db) = (self.depth(a), self.depth(b));
        if db > da {
            return false;
        }
        let mut cur = a;
        for _ in 0..(da - db) {
            cur = self.parent(cur).expect("depth is consistent with parents");
        }
        cur == b
    }

    /// String-keyed subclass query.
    pub fn is_subclass(&self, a: &str, b: &str) -> Result<bool> {
        Ok(self.subclass_of(self.resolve(a)?, self.resolve(b)?))
    }

    /// Members of `candidates` that descend from (or are) a physical root.
    pub fn restrict_to_physical(&self, candidates: &BTreeSet<EntityId>) -> BTreeSet<EntityId> {
        candidates
            .iter()
            .copied()
            .filter(|&e| self.is_physical(e))
            .collect()
    }

    /// Closest strict ancestor of `e` contained in `annotated`.
    pub fn nearest_annotated_ancestor(
        &self,
        e: EntityId,
        annotated: &BTreeSet<EntityId>,
    ) -> Option<EntityId> {
        self.ancestors_inclusive(e)
            .skip(1)
            .find(|a| annotated.contains(a))
    }
}

pub fn read_entity_records(path: &Path) -> Result<Vec<EntityRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EntityRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads `surface<TAB>entity[<TAB>frequency]` rows; `#` starts a comment line.
pub fn read_lexicon_rows(path: &Path) -> Result<Vec<LexiconRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(parse_err(format!(
                "expected 2 or 3 tab-separated columns, found {}",
                cols.len()
            )));
        }
        let frequency = match cols.get(2).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse::<u64>()
                    .map_err(|e| parse_err(format!("bad frequency `{s}`: {e}")))?,
            ),
        };
        out.push(LexiconRow {
            surface: cols[0].to_string(),
            entity: cols[1].trim().to_string(),
            frequency,
        });
    }
    Ok(out)
}
