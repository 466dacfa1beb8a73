//! Nearest-neighbor label specialization in feature space.
//!
//! A point labeled with entity `e` takes the child class of its nearest
//! neighbor among points labeled with children of `e`. Confidence is the
//! distance to the nearest point of another child class over the nearest
//! distance.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::EntityId;
use crate::vocab::NaturalHierarchy;

/// Feature vectors keyed by point id, all of one dimension.
#[derive(Debug, Clone, Default)]
pub struct FeatureStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        FeatureStore {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, point_id: impl Into<String>, v: Vec<f64>) -> Result<()> {
        let point_id = point_id.into();
        if v.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "feature for `{point_id}` has dimension {}, expected {}",
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "feature for `{point_id}` has a non-finite component"
            )));
        }
        self.vectors.insert(point_id, v);
        Ok(())
    }

    pub fn get(&self, point_id: &str) -> Result<&[f64]> {
        self.vectors
            .get(point_id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingFeature(point_id.to_string()))
    }

    /// Rescales every vector to unit length (zero vectors are left alone).
    pub fn normalize(&mut self) {
        for v in self.vectors.values_mut() {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }

    /// CSV rows `point_id,v1,...,vd` with an optional header line.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Parse {
                    path: path.into(),
                    line: 0,
                    message: format!("{other:?}"),
                },
            })?;
        let mut store: Option<FeatureStore> = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 1;
            let parse_err = |message: String| Error::Parse {
                path: path.into(),
                line,
                message,
            };
            if rec.len() < 2 {
                return Err(parse_err("expected point_id and at least one value".into()));
            }
            let vals: std::result::Result<Vec<f64>, _> = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>())
                .collect();
            let vals = match vals {
                Ok(v) => v,
                Err(_) if i == 0 => continue, // header
                Err(e) => return Err(parse_err(e.to_string())),
            };
            let s = store.get_or_insert_with(|| FeatureStore::new(vals.len()));
            s.insert(&rec[0], vals)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(store.unwrap_or_default())
    }

    /// Writes rows sorted by point id.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        let mut header = vec!["point_id".to_string()];
        header.extend((1..=self.dim).map(|i| format!("v{i}")));
        wtr.write_record(&header)?;
        let ids: BTreeSet<&String> = self.vectors.keys().collect();
        for id in ids {
            let mut row = vec![id.clone()];
            row.extend(self.vectors[id].iter().map(|x| format!("{x}")));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<features>", e))?;
        Ok(())
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A labeled pool point.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolPoint {
    pub point_id: String,
    pub entity: EntityId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Specialization {
    pub point_id: String,
    pub from: EntityId,
    pub to: EntityId,
    pub nearest_distance: f64,
    pub second_distance: f64,
    pub confidence: f64,
    pub applied: bool,
}

/// `second / nearest`, with both zero giving 1 and only the nearest zero
/// giving +∞.
pub fn confidence(nearest: f64, second: f64) -> f64 {
    if nearest == 0.0 {
        if second == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        second / nearest
    }
}

/// Specializes one point against a pool labeled with children of `from`.
/// Pool ties are broken by point id.
pub fn specialize_point(
    point_id: &str,
    from: EntityId,
    features: &FeatureStore,
    pool: &[PoolPoint],
    tau: f64,
) -> Result<Specialization> {
    let f = features.get(point_id)?;
    let classes: BTreeSet<EntityId> = pool.iter().map(|p| p.entity).collect();
    if classes.len() < 2 {
        return Err(Error::InsufficientChildren(point_id.to_string()));
    }
    let mut dists: Vec<(f64, &str, EntityId)> = Vec::with_capacity(pool.len());
    for p in pool {
        dists.push((euclid(f, features.get(&p.point_id)?), &p.point_id, p.entity));
    }
    let nearest = dists
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
        .expect("non-empty pool");
    let second = dists
        .iter()
        .filter(|d| d.2 != nearest.2)
        .map(|d| d.0)
        .min_by(f64::total_cmp)
        .expect("two classes");
    let conf = confidence(nearest.0, second);
    Ok(Specialization {
        point_id: point_id.to_string(),
        from,
        to: nearest.2,
        nearest_distance: nearest.0,
        second_distance: second,
        confidence: conf,
        // an infinite threshold disables specialization outright
        applied: tau.is_finite() && conf >= tau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Eligibility {
    /// Points labeled with the parent or any child.
    pub min_parent_points: usize,
    pub min_children: usize,
    pub min_child_points: usize,
}

impl Default for Eligibility {
    fn default() -> Self {
        Eligibility {
            min_parent_points: 20,
            min_children: 2,
            min_child_points: 2,
        }
    }
}

/// Parent entities with enough labeled children to specialize into, mapped
/// to the children that qualify.
pub fn eligible_parents(
    labels: &[(String, EntityId)],
    nh: &NaturalHierarchy,
    rules: &Eligibility,
) -> BTreeMap<EntityId, BTreeSet<EntityId>> {
    let mut count: BTreeMap<EntityId, usize> = BTreeMap::new();
    for (_, e) in labels {
        *count.entry(*e).or_insert(0) += 1;
    }
    let mut out = BTreeMap::new();
    for &parent in &nh.nodes {
        let children: BTreeSet<EntityId> = nh
            .children(parent)
            .into_iter()
            .filter(|c| count.get(c).copied().unwrap_or(0) >= rules.min_child_points)
            .collect();
        let total = count.get(&parent).copied().unwrap_or(0)
            + nh.children(parent)
                .iter()
                .map(|c| count.get(c).copied().unwrap_or(0))
                .sum::<usize>();
        if children.len() >= rules.min_children && total >= rules.min_parent_points {
            out.insert(parent, children);
        }
    }
    out
}

/// Specializes every point labeled with an eligible parent. Points that
/// fail (missing features) are returned as skips.
pub fn specialize_corpus(
    labels: &[(String, EntityId)],
    features: &FeatureStore,
    nh: &NaturalHierarchy,
    tau: f64,
    rules: &Eligibility,
) -> (Vec<Specialization>, Vec<(String, Error)>) {
    let parents = eligible_parents(labels, nh, rules);
    let pools: BTreeMap<EntityId, Vec<PoolPoint>> = parents
        .iter()
        .map(|(&p, children)| {
            let pool = labels
                .iter()
                .filter(|(_, e)| children.contains(e))
                .map(|(id, e)| PoolPoint {
                    point_id: id.clone(),
                    entity: *e,
                })
                .collect();
            (p, pool)
        })
        .collect();
    let outcomes: Vec<_> = labels
        .par_iter()
        .filter(|(_, e)| pools.contains_key(e))
        .map(|(id, e)| (id, specialize_point(id, *e, features, &pools[e], tau)))
        .collect();
    split(outcomes)
}

fn split(
    outcomes: Vec<(&String, Result<Specialization>)>,
) -> (Vec<Specialization>, Vec<(String, Error)>) {
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (id, r) in outcomes {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => skipped.push((id.clone(), e)),
        }
    }
    (ok, skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub coverage: f64,
    pub accuracy: f64,
}

#[derive(Debug)]
pub struct StripEvaluation {
    pub results: Vec<Specialization>,
    /// The true child for each result, same order.
    pub truth: Vec<EntityId>,
    pub skipped: Vec<(String, Error)>,
    pub accuracy: f64,
    pub applied_accuracy: f64,
    pub baseline_accuracy: f64,
    pub curve: Vec<CurvePoint>,
}

impl StripEvaluation {
    /// Accuracy over the most confident `fraction` of evaluated points.
    pub fn accuracy_at(&self, fraction: f64) -> f64 {
        let mut order: Vec<usize> = (0..self.results.len()).collect();
        sort_by_confidence(&self.results, &mut order);
        let k = ((fraction * order.len() as f64).ceil() as usize).clamp(1, order.len().max(1));
        if order.is_empty() {
            return 0.0;
        }
        let correct = order[..k]
            .iter()
            .filter(|&&i| self.results[i].to == self.truth[i])
            .count();
        correct as f64 / k as f64
    }
}

fn sort_by_confidence(results: &[Specialization], order: &mut [usize]) {
    order.sort_by(|&a, &b| {
        results[b]
            .confidence
            .total_cmp(&results[a].confidence)
            .then_with(|| results[a].point_id.cmp(&results[b].point_id))
    });
}

/// Leave-one-out strip-to-parent evaluation: each point labeled with a
/// qualifying child pretends to carry its parent's label and is specialized
/// against the remaining child-labeled points.
pub fn evaluate_strip_to_parent(
    labels: &[(String, EntityId)],
    features: &FeatureStore,
    nh: &NaturalHierarchy,
    tau: f64,
    rules: &Eligibility,
) -> StripEvaluation {
    let parents = eligible_parents(labels, nh, rules);
    let mut child_parent: BTreeMap<EntityId, EntityId> = BTreeMap::new();
    for (&p, children) in &parents {
        for &c in children {
            child_parent.insert(c, p);
        }
    }
    let pools: BTreeMap<EntityId, Vec<PoolPoint>> = parents
        .iter()
        .map(|(&p, children)| {
            let pool = labels
                .iter()
                .filter(|(_, e)| children.contains(e))
                .map(|(id, e)| PoolPoint {
                    point_id: id.clone(),
                    entity: *e,
                })
                .collect();
            (p, pool)
        })
        .collect();
    // baseline: most frequent child per parent (ties: smaller id)
    let baseline: BTreeMap<EntityId, EntityId> = pools
        .iter()
        .map(|(&p, pool)| {
            let mut freq: BTreeMap<EntityId, usize> = BTreeMap::new();
            for q in pool {
                *freq.entry(q.entity).or_insert(0) += 1;
            }
            let best = freq
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&e, _)| e)
                .expect("non-empty pool");
            (p, best)
        })
        .collect();

    let outcomes: Vec<(&String, EntityId, Result<Specialization>)> = labels
        .par_iter()
        .filter(|(_, e)| child_parent.contains_key(e))
        .map(|(id, e)| {
            let parent = child_parent[e];
            let pool: Vec<PoolPoint> = pools[&parent]
                .iter()
                .filter(|q| &q.point_id != id)
                .cloned()
                .collect();
            (id, *e, specialize_point(id, parent, features, &pool, tau))
        })
        .collect();

    let mut results = Vec::new();
    let mut truth = Vec::new();
    let mut skipped = Vec::new();
    let mut baseline_hits = 0usize;
    for (id, t, r) in outcomes {
        match r {
            Ok(s) => {
                if baseline[&s.from] == t {
                    baseline_hits += 1;
                }
                results.push(s);
                truth.push(t);
            }
            Err(e) => skipped.push((id.clone(), e)),
        }
    }
    let total = results.len();
    let frac = |k: usize, of: usize| if of == 0 { 0.0 } else { k as f64 / of as f64 };
    let correct = (0..total).filter(|&i| results[i].to == truth[i]).count();

    let mut order: Vec<usize> = (0..total).filter(|&i| results[i].applied).collect();
    sort_by_confidence(&results, &mut order);
    let mut curve = Vec::with_capacity(order.len());
    let mut hits = 0usize;
    for (k, &i) in order.iter().enumerate() {
        if results[i].to == truth[i] {
            hits += 1;
        }
        curve.push(CurvePoint {
            coverage: frac(k + 1, total),
            accuracy: frac(hits, k + 1),
        });
    }
    StripEvaluation {
        accuracy: frac(correct, total),
        applied_accuracy: frac(hits, order.len()),
        baseline_accuracy: frac(baseline_hits, total),
        results,
        truth,
        skipped,
        curve,
    }
}
