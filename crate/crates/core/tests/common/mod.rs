//! Reference implementations shared by the integration and acceptance tests.
//! Everything here is written from the definitions, without calling into the
//! library's algorithms.
#![allow(dead_code)]

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Non-negative fraction compared by cross-multiplication.
#[derive(Debug, Clone, Copy)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

impl PartialEq for Frac {
    fn eq(&self, o: &Self) -> bool {
        self.num * o.den == o.num * self.den
    }
}

impl Eq for Frac {}

impl PartialOrd for Frac {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Frac {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }
}

/// Random forest in parent-before-child order with masses in `1..=max_mass`.
pub fn random_forest(
    rng: &mut ChaCha8Rng,
    n: usize,
    max_mass: u64,
) -> (Vec<Option<usize>>, Vec<u64>) {
    let parent = (0..n)
        .map(|i| {
            if i == 0 || rng.random_bool(0.2) {
                None
            } else {
                Some(rng.random_range(0..i))
            }
        })
        .collect();
    let mass = (0..n).map(|_| rng.random_range(1..=max_mass)).collect();
    (parent, mass)
}

pub fn is_under(parent: &[Option<usize>], mut i: usize, j: usize) -> bool {
    loop {
        if i == j {
            return true;
        }
        match parent[i] {
            Some(p) => i = p,
            None => return false,
        }
    }
}

/// (covered mass, mass at selected nodes) of a selection.
pub fn masses(parent: &[Option<usize>], mass: &[u64], sel: &[usize]) -> (u64, u64) {
    let a = (0..mass.len())
        .filter(|&i| sel.iter().any(|&s| is_under(parent, i, s)))
        .map(|i| mass[i])
        .sum();
    let b = sel.iter().map(|&s| mass[s]).sum();
    (a, b)
}

/// Objective at α = q/4, with B/A read as 1 when nothing is covered.
pub fn objective_q(a: u64, b: u64, total: u64, q: i128) -> Frac {
    let (a, b, u) = (a as i128, b as i128, total as i128);
    if a == 0 {
        return Frac {
            num: (4 - q) * u,
            den: 4 * u,
        };
    }
    Frac {
        num: q * a * a + (4 - q) * b * u,
        den: 4 * u * a,
    }
}

/// Best objective for every selection size, at α = q/4.
pub fn brute_best(parent: &[Option<usize>], mass: &[u64], q: i128) -> Vec<Option<Frac>> {
    let n = mass.len();
    let total: u64 = mass.iter().sum();
    let mut best: Vec<Option<Frac>> = vec![None; n + 1];
    for bits in 1u32..(1 << n) {
        let sel: Vec<usize> = (0..n).filter(|&i| bits >> i & 1 == 1).collect();
        let (a, b) = masses(parent, mass, &sel);
        let f = objective_q(a, b, total, q);
        let k = sel.len();
        if best[k].is_none_or(|g| f > g) {
            best[k] = Some(f);
        }
    }
    best
}

/// Ratio of a candidate cluster against the other points of its image.
pub fn cluster_ratio(pts: &[(f64, f64)], members: &[usize]) -> f64 {
    let d = |i: usize, j: usize| (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
    let mut inter = f64::INFINITY;
    let mut intra: f64 = 0.0;
    for i in 0..pts.len() {
        let inside = members.contains(&i);
        for &m in members {
            if i == m {
                continue;
            }
            if inside {
                intra = intra.max(d(i, m));
            } else {
                inter = inter.min(d(i, m));
            }
        }
    }
    if inter.is_infinite() || intra == 0.0 {
        f64::INFINITY
    } else {
        inter / intra
    }
}

/// Inclusion-maximal subsets of at least two points, at most one per
/// annotator, whose ratio reaches `theta`. Sorted.
pub fn exhaustive_clusters(
    pts: &[(f64, f64)],
    annotators: &[usize],
    theta: f64,
) -> Vec<Vec<usize>> {
    let n = pts.len();
    let mut ok: Vec<u32> = Vec::new();
    for bits in 1u32..(1 << n) {
        if bits.count_ones() < 2 {
            continue;
        }
        let m: Vec<usize> = (0..n).filter(|&i| bits >> i & 1 == 1).collect();
        let mut seen: Vec<usize> = m.iter().map(|&i| annotators[i]).collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() == m.len() && cluster_ratio(pts, &m) >= theta {
            ok.push(bits);
        }
    }
    let mut out: Vec<Vec<usize>> = ok
        .iter()
        .filter(|&&s| !ok.iter().any(|&t| t != s && t & s == s))
        .map(|&s| (0..n).filter(|&i| s >> i & 1 == 1).collect())
        .collect();
    out.sort();
    out
}

/// One random image: a few objects, each clicked by some annotators with
/// Gaussian jitter. Returns (coords, annotator, object) triples.
pub fn random_image(rng: &mut ChaCha8Rng, max_points: usize) -> Vec<((f64, f64), usize, usize)> {
    let objects = rng.random_range(1..=4);
    let annotators = rng.random_range(1..=4);
    let sigma = [0.002, 0.01, 0.03, 0.08][rng.random_range(0..4)];
    let noise = Normal::new(0.0, sigma).unwrap();
    let centres: Vec<(f64, f64)> = (0..objects).map(|_| (rng.random(), rng.random())).collect();
    let mut out = Vec::new();
    for a in 0..annotators {
        for (k, c) in centres.iter().enumerate() {
            if out.len() < max_points && rng.random_bool(0.8) {
                let x = (c.0 + noise.sample(rng)).clamp(0.0, 1.0);
                let y = (c.1 + noise.sample(rng)).clamp(0.0, 1.0);
                out.push(((x, y), a, k));
            }
        }
    }
    out
}

/// `a ≤ b` in a parent-linked hierarchy.
pub fn subclass(parent: &[Option<usize>], a: usize, b: usize) -> bool {
    is_under(parent, a, b)
}

/// Σ over other vertices u of w(v, u) · Σ_{e' ∈ u} ([e ≤ e'] + [e' ≤ e]),
/// reading the weight of every pair straight from the edge list.
pub fn naive_entity_weight(
    parent: &[Option<usize>],
    vertex_entities: &[Vec<usize>],
    edges: &[(usize, usize, u64)],
    v: usize,
    e: usize,
) -> u64 {
    let mut total = 0;
    for (u, entities) in vertex_entities.iter().enumerate() {
        if u == v {
            continue;
        }
        let w: u64 = edges
            .iter()
            .filter(|&&(i, j, _)| (i, j) == (u.min(v), u.max(v)))
            .map(|&(_, _, w)| w)
            .sum();
        for &other in entities {
            total +=
                w * (u64::from(subclass(parent, e, other)) + u64::from(subclass(parent, other, e)));
        }
    }
    total
}

pub fn entity_key(i: usize) -> String {
    format!("e{i:03}")
}

/// Ontology over a parent vector; every root is physical and each entity is
/// listed in the lexicon under its own key.
pub fn ontology_from_parents(parent: &[Option<usize>]) -> vocab_emerge::Ontology {
    use vocab_emerge::ontology::{EntityRecord, LexiconRow};
    let records = parent
        .iter()
        .enumerate()
        .map(|(i, p)| EntityRecord {
            id: entity_key(i),
            name: entity_key(i),
            parent: p.map(entity_key),
            physical_root: p.is_none(),
        })
        .collect();
    let lexicon = (0..parent.len())
        .map(|i| LexiconRow {
            surface: entity_key(i),
            entity: entity_key(i),
            frequency: None,
        })
        .collect();
    vocab_emerge::Ontology::from_records(records, lexicon).expect("valid forest")
}

/// A simulated corpus with its ontology.
pub fn simulated(
    preset: &str,
    seed: u64,
) -> (vocab_emerge::Ontology, vocab_emerge::simgen::SimCorpus) {
    let cfg = vocab_emerge::simgen::SimConfig::preset(preset).expect("preset");
    let corpus = vocab_emerge::simgen::generate_corpus(&cfg, seed, None).expect("corpus");
    let (records, rows) = corpus.taxonomy.clone().expect("generated taxonomy");
    let o = vocab_emerge::Ontology::from_records(records, rows).expect("ontology");
    (o, corpus)
}

/// Random hierarchy plus a graph whose vertices carry random entity sets.
/// Parent links, entity indices per vertex, weighted edges `(i, j, w)` with `i < j`.
pub type RandomCase = (
    Vec<Option<usize>>,
    Vec<Vec<usize>>,
    Vec<(usize, usize, u64)>,
);

pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=8);
    let (parent, _) = random_forest(&mut rng, m, 1);
    let nv = rng.random_range(1..=6);
    let sets: Vec<Vec<usize>> = (0..nv)
        .map(|_| {
            let k = rng.random_range(0..=m.min(3));
            let mut s: Vec<usize> = (0..k).map(|_| rng.random_range(0..m)).collect();
            s.sort();
            s.dedup();
            s
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..nv {
        for j in i + 1..nv {
            if rng.random_bool(0.5) {
                edges.push((i, j, rng.random_range(1..=5)));
            }
        }
    }
    (parent, sets, edges)
}
