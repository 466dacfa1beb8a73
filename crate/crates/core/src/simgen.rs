//! Synthetic annotation corpora with ground truth.
//!
//! All randomness comes from a ChaCha8 stream seeded with the run seed, so a
//! config and seed pin the output bytes on every platform.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalizer::PointAnnotation;
use crate::ontology::{EntityId, EntityRecord, LexiconRow, Ontology};
use crate::specializer::FeatureStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotatorProfile {
    pub annotator_id: String,
    /// Chance of one random edit per token.
    pub typo_rate: f64,
    /// Std-dev of the click around the object center.
    pub click_jitter: f64,
    pub recall: f64,
    /// Levels to ascend from the true leaf, per top-level subtree id.
    pub knowledge_depth: BTreeMap<String, u32>,
    pub default_depth: u32,
    /// Entity id → surface form → multiplier on the global form weight.
    pub synonym_bias: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Default for AnnotatorProfile {
    fn default() -> Self {
        AnnotatorProfile {
            annotator_id: "a0".into(),
            typo_rate: 0.0,
            click_jitter: 0.0,
            recall: 1.0,
            knowledge_depth: BTreeMap::new(),
            default_depth: 0,
            synonym_bias: BTreeMap::new(),
        }
    }
}

impl AnnotatorProfile {
    fn validate(&self) -> Result<()> {
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        if !prob(self.typo_rate) || !prob(self.recall) {
            return Err(Error::Config(format!(
                "annotator `{}`: probabilities must lie in [0, 1]",
                self.annotator_id
            )));
        }
        if !(self.click_jitter >= 0.0 && self.click_jitter.is_finite()) {
            return Err(Error::Config(format!(
                "annotator `{}`: jitter must be non-negative",
                self.annotator_id
            )));
        }
        Ok(())
    }
}

/// Generated taxonomy: a uniform tree of pseudo-words under one physical
/// root, with optional polysemous forms shared by two leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaxonomySpec {
    /// Children per node at each level below the root.
    pub branching: Vec<usize>,
    pub polysemous_pairs: usize,
    /// Weight of the shared form for the sense it is usually used for (the
    /// entity name has weight 1).
    pub preferred_form_weight: f64,
    /// Weight of the shared form for the other sense.
    pub rare_form_weight: f64,
    /// Object frequency of the rarely-named sense, relative to 1.
    pub rare_sense_entity_weight: f64,
    /// When positive, every leaf gets one extra synonym missing from the
    /// lexicon, used with this weight.
    pub unlisted_synonym_weight: f64,
}

impl Default for TaxonomySpec {
    fn default() -> Self {
        TaxonomySpec {
            branching: vec![3, 3, 2],
            polysemous_pairs: 0,
            preferred_form_weight: 4.0,
            rare_form_weight: 0.1,
            rare_sense_entity_weight: 3.0,
            unlisted_synonym_weight: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OntologyFiles {
    pub entities: String,
    pub lexicon: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub dim: usize,
    pub sigma: f64,
    /// Minimum centroid distance in units of `sigma`.
    pub separation: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            dim: 8,
            sigma: 1.0,
            separation: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub ontology: Option<OntologyFiles>,
    pub taxonomy: Option<TaxonomySpec>,
    pub images: usize,
    pub objects_per_image: [usize; 2],
    pub min_separation: f64,
    pub annotators: Vec<AnnotatorProfile>,
    /// Annotators drawn per image; all of them when unset.
    pub annotators_per_image: Option<usize>,
    /// Leaf id → object sampling weight (default 1).
    pub entity_weights: BTreeMap<String, f64>,
    /// Entity id → surface form → weight (default: lexicon frequency or 1).
    pub form_weights: BTreeMap<String, BTreeMap<String, f64>>,
    /// Entity id → forms annotators use that the lexicon lacks → weight.
    pub unlisted_forms: BTreeMap<String, BTreeMap<String, f64>>,
    pub features: FeatureSpec,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ontology: None,
            taxonomy: Some(TaxonomySpec::default()),
            images: 40,
            objects_per_image: [2, 4],
            min_separation: 0.2,
            annotators: (0..4)
                .map(|i| AnnotatorProfile {
                    annotator_id: format!("a{i}"),
                    ..AnnotatorProfile::default()
                })
                .collect(),
            annotators_per_image: None,
            entity_weights: BTreeMap::new(),
            form_weights: BTreeMap::new(),
            unlisted_forms: BTreeMap::new(),
            features: FeatureSpec::default(),
        }
    }
}

impl SimConfig {
    /// No typos, no jitter, leaf-level labels, full recall.
    pub fn noise_free() -> Self {
        SimConfig::default()
    }

    /// Typos, click jitter, partial recall and varying specificity.
    pub fn noisy() -> Self {
        let mut c = SimConfig {
            taxonomy: Some(TaxonomySpec {
                unlisted_synonym_weight: 0.15,
                ..TaxonomySpec::default()
            }),
            ..SimConfig::default()
        };
        for (i, a) in c.annotators.iter_mut().enumerate() {
            a.typo_rate = 0.1;
            a.click_jitter = 0.01;
            a.recall = 0.85;
            a.default_depth = (i % 3) as u32;
        }
        c
    }

    /// Two-sense forms whose usual usage disagrees with object frequency.
    pub fn polysemy() -> Self {
        let mut c = SimConfig {
            taxonomy: Some(TaxonomySpec {
                branching: vec![3, 3, 3],
                polysemous_pairs: 4,
                ..TaxonomySpec::default()
            }),
            images: 80,
            ..SimConfig::default()
        };
        for (i, a) in c.annotators.iter_mut().enumerate() {
            a.click_jitter = 0.01;
            a.default_depth = u32::from(i % 2 == 1);
        }
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "noise-free" => Ok(Self::noise_free()),
            "noisy" => Ok(Self::noisy()),
            "polysemy" => Ok(Self::polysemy()),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.images == 0 {
            return Err(Error::Config("images must be positive".into()));
        }
        let [lo, hi] = self.objects_per_image;
        if lo == 0 || lo > hi {
            return Err(Error::Config(
                "objects_per_image must satisfy 1 ≤ min ≤ max".into(),
            ));
        }
        if self.annotators.is_empty() {
            return Err(Error::Config("at least one annotator is required".into()));
        }
        let ids: BTreeSet<&str> = self
            .annotators
            .iter()
            .map(|a| a.annotator_id.as_str())
            .collect();
        if ids.len() != self.annotators.len() {
            return Err(Error::Config("annotator ids must be unique".into()));
        }
        if self.annotators_per_image == Some(0) {
            return Err(Error::Config(
                "annotators_per_image must be positive".into(),
            ));
        }
        for a in &self.annotators {
            a.validate()?;
        }
        if self.min_separation.is_nan() || self.min_separation < 0.0 {
            return Err(Error::Config("min_separation must be non-negative".into()));
        }
        let f = &self.features;
        if f.dim == 0
            || f.sigma.is_nan()
            || f.sigma <= 0.0
            || f.separation.is_nan()
            || f.separation < 0.0
        {
            return Err(Error::Config(
                "features need dim ≥ 1, sigma > 0, separation ≥ 0".into(),
            ));
        }
        if self.ontology.is_none() && self.taxonomy.is_none() {
            return Err(Error::Config(
                "either ontology files or a taxonomy is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub object_id: String,
    pub true_entity: String,
    pub center: (f64, f64),
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub image_id: String,
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub point_id: String,
    pub object_id: String,
    pub true_entity: String,
    /// The entity the annotator meant to name (an ancestor when the
    /// annotator was less specific).
    pub intended_entity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub seed: u64,
    pub images: usize,
    pub points: usize,
    pub annotators: usize,
    pub min_object_separation: f64,
    pub max_click_jitter: f64,
    pub feature_dim: usize,
    pub feature_sigma: f64,
    pub centroid_min_distance: f64,
    pub separation_ratio: f64,
    /// Shared surface form → its senses, for generated taxonomies.
    pub polysemous_forms: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct SimCorpus {
    /// Set when the ontology was generated rather than loaded.
    pub taxonomy: Option<(Vec<EntityRecord>, Vec<LexiconRow>)>,
    pub scenes: Vec<SceneSpec>,
    pub annotations: Vec<PointAnnotation>,
    pub truth: Vec<GroundTruth>,
    pub features: FeatureStore,
    pub metadata: SimMetadata,
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Distinct three-syllable pseudo-words at pairwise edit distance ≥ 3.
fn pseudo_words(count: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(count);
    while out.len() < count {
        let w: String = (0..3)
            .flat_map(|_| {
                [
                    CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char,
                    VOWELS[rng.random_range(0..VOWELS.len())] as char,
                ]
            })
            .collect();
        if out
            .iter()
            .all(|o| crate::spelling::osa_distance(o, &w) >= 3)
        {
            out.push(w);
        }
    }
    out
}

struct Taxonomy {
    records: Vec<EntityRecord>,
    lexicon: Vec<LexiconRow>,
    form_weights: BTreeMap<String, BTreeMap<String, f64>>,
    entity_weights: BTreeMap<String, f64>,
    unlisted: BTreeMap<String, BTreeMap<String, f64>>,
    polysemous: BTreeMap<String, Vec<String>>,
}

fn build_taxonomy(spec: &TaxonomySpec, rng: &mut impl Rng) -> Result<Taxonomy> {
    if spec.branching.is_empty() || spec.branching.contains(&0) {
        return Err(Error::Config(
            "taxonomy branching must be non-empty and positive".into(),
        ));
    }
    // breadth-first: (id, parent, depth)
    let mut nodes: Vec<(String, Option<String>)> = vec![("t".into(), None)];
    let mut frontier = vec!["t".to_string()];
    for &b in &spec.branching {
        let mut next = Vec::new();
        for p in &frontier {
            for c in 0..b {
                let id = format!("{p}_{c}");
                nodes.push((id.clone(), Some(p.clone())));
                next.push(id);
            }
        }
        frontier = next;
    }
    let leaves = frontier;
    let extra = if spec.unlisted_synonym_weight > 0.0 {
        leaves.len()
    } else {
        0
    };
    let words = pseudo_words(nodes.len() + spec.polysemous_pairs + extra, rng);
    let mut records = Vec::new();
    let mut lexicon = Vec::new();
    for ((id, parent), w) in nodes.iter().zip(&words) {
        records.push(EntityRecord {
            id: id.clone(),
            name: w.clone(),
            parent: parent.clone(),
            physical_root: parent.is_none(),
        });
        if parent.is_some() {
            lexicon.push(LexiconRow {
                surface: w.clone(),
                entity: id.clone(),
                frequency: None,
            });
        }
    }
    let mut form_weights: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut entity_weights = BTreeMap::new();
    let mut polysemous = BTreeMap::new();
    let mut pool = leaves.clone();
    pool.shuffle(rng);
    let mut used = BTreeSet::new();
    for k in 0..spec.polysemous_pairs {
        let parent_of = |id: &str| id.rsplit_once('_').map(|(p, _)| p.to_string());
        let a = pool.iter().find(|l| !used.contains(*l)).cloned();
        let Some(a) = a else { break };
        used.insert(a.clone());
        let b = pool
            .iter()
            .find(|l| !used.contains(*l) && parent_of(l) != parent_of(&a))
            .cloned();
        let Some(b) = b else { break };
        used.insert(b.clone());
        let form = words[nodes.len() + k].clone();
        for (e, w) in [
            (&a, spec.preferred_form_weight),
            (&b, spec.rare_form_weight),
        ] {
            lexicon.push(LexiconRow {
                surface: form.clone(),
                entity: e.clone(),
                frequency: None,
            });
            form_weights
                .entry(e.clone())
                .or_default()
                .insert(form.clone(), w);
        }
        entity_weights.insert(b.clone(), spec.rare_sense_entity_weight);
        polysemous.insert(form, vec![a, b]);
    }
    let mut unlisted: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    if extra > 0 {
        let base = nodes.len() + spec.polysemous_pairs;
        for (leaf, w) in leaves.iter().zip(&words[base..]) {
            unlisted
                .entry(leaf.clone())
                .or_default()
                .insert(w.clone(), spec.unlisted_synonym_weight);
        }
    }
    Ok(Taxonomy {
        records,
        lexicon,
        form_weights,
        entity_weights,
        unlisted,
        polysemous,
    })
}

/// One random single-character edit.
fn typo(token: &str, rng: &mut impl Rng) -> String {
    let mut chars: Vec<char> = token.chars().collect();
    let letter = (b'a' + rng.random_range(0..26u8)) as char;
    let kind = if chars.len() > 1 {
        rng.random_range(0..4)
    } else {
        rng.random_range(0..2)
    };
    match kind {
        0 => {
            let i = rng.random_range(0..chars.len());
            chars[i] = letter;
        }
        1 => {
            let i = rng.random_range(0..=chars.len());
            chars.insert(i, letter);
        }
        2 => {
            let i = rng.random_range(0..chars.len());
            chars.remove(i);
        }
        _ => {
            let i = rng.random_range(0..chars.len() - 1);
            chars.swap(i, i + 1);
        }
    }
    chars.into_iter().collect()
}

fn gauss(rng: &mut impl Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
}

struct World<'o> {
    o: &'o Ontology,
    leaves: Vec<EntityId>,
    leaf_weights: Vec<f64>,
    /// Per entity, lexicon forms with global weights.
    forms: BTreeMap<EntityId, Vec<(String, f64)>>,
}

impl<'o> World<'o> {
    fn new(
        o: &'o Ontology,
        entity_weights: &BTreeMap<String, f64>,
        form_weights: &BTreeMap<String, BTreeMap<String, f64>>,
        unlisted: &BTreeMap<String, BTreeMap<String, f64>>,
    ) -> Result<Self> {
        for key in entity_weights
            .keys()
            .chain(form_weights.keys())
            .chain(unlisted.keys())
        {
            o.resolve(key)?;
        }
        let lex = o.lexicon();
        let mut forms = BTreeMap::new();
        for e in o.ids() {
            let fw = form_weights.get(o.key(e));
            let listed = lex.forms_of(e).map(|f| {
                let default = match lex.frequency(f) {
                    0 => 1.0,
                    n => n as f64,
                };
                let w = fw.and_then(|m| m.get(f)).copied().unwrap_or(default);
                (f.to_string(), w)
            });
            let extra = unlisted
                .get(o.key(e))
                .into_iter()
                .flatten()
                .map(|(f, &w)| (crate::ontology::normalize_form(f), w));
            let list: Vec<(String, f64)> = listed.chain(extra).filter(|(_, w)| *w > 0.0).collect();
            if !list.is_empty() {
                forms.insert(e, list);
            }
        }
        let leaves: Vec<EntityId> = o
            .leaves()
            .filter(|&e| o.is_physical(e) && forms.contains_key(&e))
            .collect();
        if leaves.is_empty() {
            return Err(Error::Config(
                "ontology has no nameable physical leaves".into(),
            ));
        }
        let leaf_weights = leaves
            .iter()
            .map(|&e| entity_weights.get(o.key(e)).copied().unwrap_or(1.0))
            .collect();
        Ok(World {
            o,
            leaves,
            leaf_weights,
            forms,
        })
    }

    /// Entities an annotator can report for `leaf`, most specific first:
    /// the ancestor chain below the root, restricted to nameable entities.
    fn report_chain(&self, leaf: EntityId) -> Vec<EntityId> {
        let chain: Vec<EntityId> = self.o.ancestors_inclusive(leaf).collect();
        let below_root = &chain[..chain.len().saturating_sub(1).max(1)];
        below_root
            .iter()
            .copied()
            .filter(|e| self.forms.contains_key(e))
            .collect()
    }

    fn top_level(&self, leaf: EntityId) -> EntityId {
        let chain: Vec<EntityId> = self.o.ancestors_inclusive(leaf).collect();
        chain[chain.len().saturating_sub(2)]
    }
}

fn place_objects(n: usize, min_sep: f64, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    let mut centers: Vec<(f64, f64)> = Vec::new();
    let mut attempts = 0;
    while centers.len() < n && attempts < 10_000 {
        attempts += 1;
        let c = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
        if centers
            .iter()
            .all(|&d| ((c.0 - d.0).powi(2) + (c.1 - d.1).powi(2)).sqrt() >= min_sep)
        {
            centers.push(c);
        }
    }
    centers
}

fn place_centroids(count: usize, spec: &FeatureSpec, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let min = spec.separation * spec.sigma;
    let mut side = (min * (count as f64).powf(1.0 / spec.dim as f64) * 2.0).max(spec.sigma);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut failures = 0;
    while out.len() < count {
        let c: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(0.0..side)).collect();
        if out.iter().all(|o| {
            o.iter()
                .zip(&c)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                >= min
        }) {
            out.push(c);
            failures = 0;
        } else {
            failures += 1;
            if failures > 1000 {
                side *= 1.5;
                failures = 0;
            }
        }
    }
    out
}

/// Generates a corpus. `ontology` is required when the config names files
/// instead of a taxonomy.
pub fn generate_corpus(
    config: &SimConfig,
    seed: u64,
    ontology: Option<&Ontology>,
) -> Result<SimCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entity_weights = config.entity_weights.clone();
    let mut form_weights = config.form_weights.clone();
    let mut unlisted = config.unlisted_forms.clone();
    let (owned, taxonomy, polysemous) = match (&config.taxonomy, ontology) {
        (Some(spec), _) if config.ontology.is_none() || ontology.is_none() => {
            let t = build_taxonomy(spec, &mut rng)?;
            let o = Ontology::from_records(t.records.clone(), t.lexicon.clone())?;
            for (k, v) in t.entity_weights {
                entity_weights.entry(k).or_insert(v);
            }
            for (k, v) in t.unlisted {
                unlisted.entry(k).or_default().extend(v);
            }
            for (k, v) in t.form_weights {
                let slot = form_weights.entry(k).or_default();
                for (f, w) in v {
                    slot.entry(f).or_insert(w);
                }
            }
            (Some(o), Some((t.records, t.lexicon)), t.polysemous)
        }
        (_, Some(_)) => (None, None, BTreeMap::new()),
        (_, None) => {
            return Err(Error::Config(
                "config names ontology files that were not loaded".into(),
            ))
        }
    };
    let o = owned.as_ref().or(ontology).expect("ontology available");
    let world = World::new(o, &entity_weights, &form_weights, &unlisted)?;
    let leaf_dist = WeightedIndex::new(&world.leaf_weights)
        .map_err(|e| Error::Config(format!("entity weights: {e}")))?;

    let [lo, hi] = config.objects_per_image;
    let mut scenes = Vec::with_capacity(config.images);
    let mut annotations = Vec::new();
    let mut truth = Vec::new();
    let mut max_jitter: f64 = 0.0;
    for img in 0..config.images {
        let image_id = format!("img{img:04}");
        let want = rng.random_range(lo..=hi);
        let centers = place_objects(want, config.min_separation, &mut rng);
        let objects: Vec<(SceneObject, EntityId)> = centers
            .into_iter()
            .enumerate()
            .map(|(k, center)| {
                let leaf = world.leaves[leaf_dist.sample(&mut rng)];
                (
                    SceneObject {
                        object_id: format!("{image_id}/o{k}"),
                        true_entity: o.key(leaf).to_string(),
                        center,
                        extent: config.min_separation / 2.0,
                    },
                    leaf,
                )
            })
            .collect();
        let mut who: Vec<usize> = (0..config.annotators.len()).collect();
        if let Some(k) = config.annotators_per_image {
            who.shuffle(&mut rng);
            who.truncate(k.min(who.len()));
            who.sort_unstable();
        }
        for &ai in &who {
            let a = &config.annotators[ai];
            for (obj, leaf) in &objects {
                if rng.random::<f64>() >= a.recall {
                    continue;
                }
                let chain = world.report_chain(*leaf);
                if chain.is_empty() {
                    continue;
                }
                let top = o.key(world.top_level(*leaf));
                let depth = a
                    .knowledge_depth
                    .get(top)
                    .copied()
                    .unwrap_or(a.default_depth);
                let reported = chain[(depth as usize).min(chain.len() - 1)];
                let forms = &world.forms[&reported];
                let bias = a.synonym_bias.get(o.key(reported));
                let weights: Vec<f64> = forms
                    .iter()
                    .map(|(f, w)| w * bias.and_then(|b| b.get(f)).copied().unwrap_or(1.0))
                    .collect();
                let pick = WeightedIndex::new(&weights)
                    .map_err(|e| Error::Config(format!("synonym weights: {e}")))?
                    .sample(&mut rng);
                let text = forms[pick]
                    .0
                    .split(' ')
                    .map(|t| {
                        if rng.random::<f64>() < a.typo_rate {
                            typo(t, &mut rng)
                        } else {
                            t.to_string()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ");
                let dx = gauss(&mut rng, a.click_jitter);
                let dy = gauss(&mut rng, a.click_jitter);
                max_jitter = max_jitter.max(a.click_jitter);
                let point_id = format!("p{:06}", annotations.len());
                annotations.push(PointAnnotation {
                    point_id: point_id.clone(),
                    image_id: image_id.clone(),
                    annotator_id: a.annotator_id.clone(),
                    x: (obj.center.0 + dx).clamp(0.0, 1.0),
                    y: (obj.center.1 + dy).clamp(0.0, 1.0),
                    raw: text,
                });
                truth.push(GroundTruth {
                    point_id,
                    object_id: obj.object_id.clone(),
                    true_entity: obj.true_entity.clone(),
                    intended_entity: o.key(reported).to_string(),
                });
            }
        }
        scenes.push(SceneSpec {
            image_id,
            objects: objects.into_iter().map(|(s, _)| s).collect(),
        });
    }

    let spec = &config.features;
    let centroids = place_centroids(world.leaves.len(), spec, &mut rng);
    let centroid_of: BTreeMap<&str, &Vec<f64>> = world
        .leaves
        .iter()
        .map(|&e| o.key(e))
        .zip(&centroids)
        .collect();
    let mut features = FeatureStore::new(spec.dim);
    for t in &truth {
        let c = centroid_of[t.true_entity.as_str()];
        let v = c.iter().map(|x| x + gauss(&mut rng, spec.sigma)).collect();
        features.insert(t.point_id.clone(), v)?;
    }
    let mut centroid_min = f64::INFINITY;
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            let d = centroids[i]
                .iter()
                .zip(&centroids[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            centroid_min = centroid_min.min(d);
        }
    }
    let metadata = SimMetadata {
        seed,
        images: config.images,
        points: annotations.len(),
        annotators: config.annotators.len(),
        min_object_separation: config.min_separation,
        max_click_jitter: max_jitter,
        feature_dim: spec.dim,
        feature_sigma: spec.sigma,
        centroid_min_distance: centroid_min,
        separation_ratio: centroid_min / spec.sigma,
        polysemous_forms: polysemous,
    };
    Ok(SimCorpus {
        taxonomy,
        scenes,
        annotations,
        truth,
        features,
        metadata,
    })
}

/// The small hand-checked corpus used in the docs and golden tests.
#[derive(Debug, Clone)]
pub struct WorkedExample {
    pub entities: Vec<EntityRecord>,
    pub lexicon: Vec<LexiconRow>,
    pub annotations: Vec<PointAnnotation>,
}

pub fn worked_example() -> WorkedExample {
    let ents: &[(&str, Option<&str>, &str)] = &[
        ("physical_object", None, "physical object"),
        ("animal", Some("physical_object"), "animal"),
        ("dog", Some("animal"), "dog"),
        ("retriever", Some("dog"), "retriever"),
        ("rodent", Some("animal"), "rodent"),
        ("field_mouse", Some("rodent"), "field mouse"),
        ("food", Some("physical_object"), "food"),
        ("bread", Some("food"), "bread"),
        ("bread_bun", Some("bread"), "bread bun"),
        ("hairstyle", Some("physical_object"), "hairstyle"),
        ("hair_bun", Some("hairstyle"), "hair bun"),
        ("accessory", Some("physical_object"), "accessory"),
        ("glasses", Some("accessory"), "glasses"),
        ("device", Some("physical_object"), "device"),
        ("cell_phone", Some("device"), "cell phone"),
        ("iphone", Some("cell_phone"), "iphone"),
        ("computer_mouse", Some("device"), "computer mouse"),
        ("building", Some("physical_object"), "building"),
        ("house", Some("building"), "house"),
        ("person", Some("physical_object"), "person"),
        ("dr_house", Some("person"), "dr. house"),
        ("abstraction", None, "abstraction"),
        ("freedom", Some("abstraction"), "freedom"),
    ];
    let entities = ents
        .iter()
        .map(|(id, p, name)| EntityRecord {
            id: id.to_string(),
            name: name.to_string(),
            parent: p.map(String::from),
            physical_root: *id == "physical_object",
        })
        .collect();
    let lex: &[(&str, &str)] = &[
        ("animal", "animal"),
        ("dog", "dog"),
        ("retriever", "retriever"),
        ("rodent", "rodent"),
        ("food", "food"),
        ("bread", "bread"),
        ("hairstyle", "hairstyle"),
        ("glasses", "glasses"),
        ("iphone", "iphone"),
        ("freedom", "freedom"),
        ("mouse", "field_mouse"),
        ("mouse", "computer_mouse"),
        ("bun", "bread_bun"),
        ("bun", "hair_bun"),
        ("bread bun", "bread_bun"),
        ("hair bun", "hair_bun"),
        ("phone", "cell_phone"),
        ("phone", "iphone"),
        ("cell phone", "cell_phone"),
        ("house", "house"),
        ("house", "dr_house"),
        ("dr house", "dr_house"),
    ];
    let lexicon = lex
        .iter()
        .map(|(s, e)| LexiconRow {
            surface: s.to_string(),
            entity: e.to_string(),
            frequency: None,
        })
        .collect();
    let pts: &[(&str, &str, &str, &str, f64, f64)] = &[
        ("p01", "img1", "A1", "bun", 0.20, 0.30),
        ("p02", "img1", "A2", "food", 0.21, 0.30),
        ("p03", "img1", "A1", "doog", 0.70, 0.60),
        ("p04", "img1", "A2", "retriever", 0.71, 0.61),
        ("p05", "img1", "A3", "dog", 0.70, 0.62),
        ("p06", "img2", "A1", "glasses", 0.50, 0.50),
        ("p07", "img2", "A3", "spects", 0.51, 0.50),
        ("p08", "img2", "A2", "hair bun", 0.20, 0.80),
        ("p09", "img2", "A3", "hairstyle", 0.21, 0.80),
        ("p10", "img3", "A1", "phone", 0.30, 0.30),
        ("p11", "img3", "A2", "house", 0.80, 0.20),
        ("p12", "img3", "A3", "mouse", 0.50, 0.80),
        ("p13", "img3", "A1", "freedom", 0.10, 0.90),
    ];
    let annotations = pts
        .iter()
        .map(|&(p, i, a, raw, x, y)| PointAnnotation {
            point_id: p.into(),
            image_id: i.into(),
            annotator_id: a.into(),
            x,
            y,
            raw: raw.into(),
        })
        .collect();
    WorkedExample {
        entities,
        lexicon,
        annotations,
    }
}

impl WorkedExample {
    pub fn ontology(&self) -> Result<Ontology> {
        Ontology::from_records(self.entities.clone(), self.lexicon.clone())
    }
}
