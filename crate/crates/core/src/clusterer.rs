//! Same-object grouping of the clicks on one image.
//!
//! Clusters are merged greedily by the separation ratio
//! `O(c) = d_inter(c) / d_intra(c)` until no admissible merge remains (two
//! clicks of one annotator never share a cluster). Every node of the
//! resulting merge tree whose ratio reaches the acceptance threshold is a
//! candidate object; the maximal ones are kept and the remaining clicks stay
//! singletons. Nodes with a ratio above 1 form a laminar family, so the kept
//! nodes never overlap.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::normalizer::PointAnnotation;

pub const DEFAULT_THETA: f64 = 3.0;

pub fn euclid(p: (f64, f64), q: (f64, f64)) -> f64 {
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

/// Ratio from the two linkage distances of a cluster of `size` points.
///
/// A singleton scores 0 when another click sits on it and +∞ otherwise; a
/// larger cluster of coincident clicks scores +∞ even when an outside click
/// coincides with it.
pub fn ratio(size: usize, d_inter: f64, d_intra: f64) -> f64 {
    if size <= 1 {
        return if d_inter == 0.0 { 0.0 } else { f64::INFINITY };
    }
    if d_inter.is_infinite() || d_intra == 0.0 {
        return f64::INFINITY;
    }
    d_inter / d_intra
}

/// `O(c)` of `cluster` against the points outside it.
pub fn cluster_score(cluster: &[(f64, f64)], others: &[(f64, f64)]) -> f64 {
    assert!(!cluster.is_empty(), "cluster must be non-empty");
    let d_inter = cluster
        .iter()
        .flat_map(|&p| others.iter().map(move |&q| euclid(p, q)))
        .fold(f64::INFINITY, f64::min);
    let d_intra = cluster
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| cluster[i + 1..].iter().map(move |&q| euclid(p, q)))
        .fold(0.0, f64::max);
    ratio(cluster.len(), d_inter, d_intra)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCluster {
    pub cluster_id: String,
    pub image_id: String,
    pub point_ids: Vec<String>,
    #[serde(with = "score_serde")]
    pub score: f64,
}

/// One greedy merge, in execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    pub point_ids: Vec<String>,
    pub score: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageClustering {
    pub clusters: Vec<PointCluster>,
    pub trace: Vec<MergeStep>,
}

struct Active {
    members: Vec<usize>,
    annotators: BTreeSet<usize>,
    intra: f64,
}

/// Clusters the points of one image. Input order does not matter.
pub fn cluster_image(points: &[PointAnnotation], theta: f64) -> ImageClustering {
    if points.is_empty() {
        return ImageClustering {
            clusters: Vec::new(),
            trace: Vec::new(),
        };
    }
    // rank points by id so index order is id order
    let mut order: Vec<&PointAnnotation> = points.iter().collect();
    order.sort_by(|a, b| a.point_id.cmp(&b.point_id));
    let n = order.len();
    let coords: Vec<(f64, f64)> = order.iter().map(|p| (p.x, p.y)).collect();
    let annotator_ids: BTreeMap<&str, usize> = order
        .iter()
        .map(|p| p.annotator_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, a)| (a, i))
        .collect();

    let mut clusters: Vec<Option<Active>> = (0..n)
        .map(|i| {
            Some(Active {
                members: vec![i],
                annotators: [annotator_ids[order[i].annotator_id.as_str()]].into(),
                intra: 0.0,
            })
        })
        .collect();
    // single (min) and complete (max) linkage between live clusters
    let mut single = vec![vec![f64::INFINITY; n]; n];
    let mut complete = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = euclid(coords[i], coords[j]);
                single[i][j] = d;
                complete[i][j] = d;
            }
        }
    }

    // dendrogram nodes: (sorted members, score)
    let mut nodes: Vec<(Vec<usize>, f64)> = Vec::new();
    loop {
        let live: Vec<usize> = (0..n).filter(|&i| clusters[i].is_some()).collect();
        // two smallest single-linkage distances per live cluster, with partner
        let mut nearest: BTreeMap<usize, [(f64, usize); 2]> = BTreeMap::new();
        for &a in &live {
            let mut best = [(f64::INFINITY, usize::MAX); 2];
            for &b in &live {
                if a == b {
                    continue;
                }
                let d = single[a][b];
                if d < best[0].0 {
                    best[1] = best[0];
                    best[0] = (d, b);
                } else if d < best[1].0 {
                    best[1] = (d, b);
                }
            }
            nearest.insert(a, best);
        }
        let outside = |a: usize, skip: usize| {
            let [first, second] = nearest[&a];
            if first.1 == skip {
                second.0
            } else {
                first.0
            }
        };

        let mut best: Option<(f64, Vec<usize>, usize, usize)> = None;
        for (ai, &a) in live.iter().enumerate() {
            for &b in &live[ai + 1..] {
                let (ca, cb) = (clusters[a].as_ref().unwrap(), clusters[b].as_ref().unwrap());
                if !ca.annotators.is_disjoint(&cb.annotators) {
                    continue;
                }
                let intra = ca.intra.max(cb.intra).max(complete[a][b]);
                let inter = outside(a, b).min(outside(b, a));
                let score = ratio(ca.members.len() + cb.members.len(), inter, intra);
                let better = match &best {
                    None => true,
                    Some((bs, bm, _, _)) => {
                        match score.partial_cmp(bs).unwrap_or(Ordering::Equal) {
                            Ordering::Greater => true,
                            Ordering::Less => false,
                            Ordering::Equal => {
                                let merged = merged_members(&ca.members, &cb.members);
                                tie_key(&merged) < tie_key(bm)
                            }
                        }
                    }
                };
                if better {
                    best = Some((score, merged_members(&ca.members, &cb.members), a, b));
                }
            }
        }
        let Some((score, members, a, b)) = best else {
            break;
        };
        let cb = clusters[b].take().unwrap();
        let ca = clusters[a].as_mut().unwrap();
        ca.intra = ca.intra.max(cb.intra).max(complete[a][b]);
        ca.members = members.clone();
        ca.annotators.extend(cb.annotators);
        for k in 0..n {
            if k != a && k != b {
                single[a][k] = single[a][k].min(single[b][k]);
                single[k][a] = single[a][k];
                complete[a][k] = complete[a][k].max(complete[b][k]);
                complete[k][a] = complete[a][k];
            }
        }
        nodes.push((members, score));
    }

    let accepted: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].1 >= theta)
        .filter(|&i| {
            // maximal: no later accepted node contains it (nodes only grow)
            !nodes[i + 1..]
                .iter()
                .any(|(m, s)| *s >= theta && is_subset(&nodes[i].0, m))
        })
        .collect();

    let mut groups: Vec<(Vec<usize>, f64)> = accepted.iter().map(|&i| nodes[i].clone()).collect();
    let covered: BTreeSet<usize> = groups.iter().flat_map(|(m, _)| m.iter().copied()).collect();
    for i in (0..n).filter(|i| !covered.contains(i)) {
        let others: Vec<(f64, f64)> = (0..n).filter(|&j| j != i).map(|j| coords[j]).collect();
        groups.push((vec![i], cluster_score(&[coords[i]], &others)));
    }
    groups.sort_by(|a, b| a.0[0].cmp(&b.0[0]));

    let image_id = order[0].image_id.clone();
    let clusters = groups
        .into_iter()
        .enumerate()
        .map(|(k, (members, score))| PointCluster {
            cluster_id: format!("{image_id}/c{k}"),
            image_id: image_id.clone(),
            point_ids: members.iter().map(|&i| order[i].point_id.clone()).collect(),
            score,
        })
        .collect();
    let trace = nodes
        .into_iter()
        .map(|(members, score)| MergeStep {
            point_ids: members.iter().map(|&i| order[i].point_id.clone()).collect(),
            score,
            accepted: score >= theta,
        })
        .collect();
    ImageClustering { clusters, trace }
}

fn merged_members(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut m: Vec<usize> = a.iter().chain(b).copied().collect();
    m.sort_unstable();
    m
}

fn tie_key(m: &[usize]) -> (usize, usize, &[usize]) {
    (m[0], m[m.len() - 1], m)
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    small.iter().all(|x| big.binary_search(x).is_ok())
}

/// Clusters every image; images are processed in parallel and returned in
/// image-id order.
pub fn cluster_corpus(points: &[PointAnnotation], theta: f64) -> Vec<PointCluster> {
    let mut by_image: BTreeMap<&str, Vec<PointAnnotation>> = BTreeMap::new();
    for p in points {
        by_image
            .entry(p.image_id.as_str())
            .or_default()
            .push(p.clone());
    }
    let per_image: Vec<Vec<PointCluster>> = by_image
        .into_par_iter()
        .map(|(_, pts)| cluster_image(&pts, theta).clusters)
        .collect();
    per_image.into_iter().flatten().collect()
}

/// Serializes +∞ as the string "inf".
pub mod score_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            v.serialize(s)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad score `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(id: &str, ann: &str, x: f64, y: f64) -> PointAnnotation {
        PointAnnotation {
            point_id: id.into(),
            image_id: "img".into(),
            annotator_id: ann.into(),
            x,
            y,
            raw: "thing".into(),
        }
    }

    #[test]
    fn euclid_examples() {
        assert_eq!(euclid((0.0, 0.0), (0.0, 0.0)), 0.0);
        assert!((euclid((0.0, 0.0), (1.0, 1.0)) - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((euclid((0.1, 0.1), (0.12, 0.1)) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn score_limit_cases() {
        assert_eq!(
            cluster_score(&[(0.5, 0.5), (0.5, 0.5)], &[(0.9, 0.9)]),
            f64::INFINITY
        );
        assert_eq!(cluster_score(&[(0.5, 0.5)], &[(0.5, 0.5)]), 0.0);
        assert_eq!(cluster_score(&[(0.5, 0.5)], &[]), f64::INFINITY);
        assert_eq!(cluster_score(&[(0.1, 0.1), (0.2, 0.1)], &[]), f64::INFINITY);
    }

    #[test]
    fn score_hand_computed() {
        // d_intra = 0.02; d_inter = |(0.12,0.1)-(0.5,0.5)| = sqrt(0.38²+0.4²)
        let s = cluster_score(&[(0.1, 0.1), (0.12, 0.1)], &[(0.5, 0.5)]);
        let expected = (0.38f64 * 0.38 + 0.4 * 0.4).sqrt() / 0.02;
        assert!((s - expected).abs() < 1e-9);
        assert!((s - 27.586).abs() < 1e-3);
    }

    #[test]
    fn single_point_is_one_singleton() {
        let out = cluster_image(&[pt("a", "u1", 0.3, 0.3)], 3.0);
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.clusters[0].point_ids, vec!["a".to_string()]);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn two_objects_two_annotators() {
        let pts = vec![
            pt("p1", "u1", 0.20, 0.20),
            pt("p2", "u2", 0.22, 0.20),
            pt("p3", "u1", 0.80, 0.20),
            pt("p4", "u2", 0.80, 0.22),
        ];
        let out = cluster_image(&pts, 3.0);
        assert_eq!(out.clusters.len(), 2);
        for c in &out.clusters {
            assert_eq!(c.point_ids.len(), 2);
            assert!((c.score - 0.58 / 0.02).abs() < 1.0, "score {}", c.score);
        }
    }

    #[test]
    fn equidistant_points_pairwise_ratio_is_one() {
        let h = 0.3 * 3f64.sqrt() / 2.0;
        let pts = vec![
            pt("a", "u1", 0.2, 0.2),
            pt("b", "u2", 0.5, 0.2),
            pt("c", "u3", 0.35, 0.2 + h),
        ];
        let out = cluster_image(&pts, 3.0);
        assert!((out.trace[0].score - 1.0).abs() < 1e-9);
        assert!(!out.trace[0].accepted);
        // nothing lies outside the whole image, so the final node is +inf
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.clusters[0].score, f64::INFINITY);
    }

    #[test]
    fn same_annotator_never_merged() {
        let pts = vec![pt("a", "u1", 0.5, 0.5), pt("b", "u1", 0.5, 0.5)];
        let out = cluster_image(&pts, 3.0);
        assert_eq!(out.clusters.len(), 2);
    }

    #[test]
    fn inf_serialized_as_string() {
        let c = PointCluster {
            cluster_id: "i/c0".into(),
            image_id: "i".into(),
            point_ids: vec!["a".into()],
            score: f64::INFINITY,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"score\":\"inf\""));
        let back: PointCluster = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
