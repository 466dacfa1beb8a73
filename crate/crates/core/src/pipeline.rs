//! Stage runners over files, configuration and the end-to-end pipeline.
//!
//! Every stage reads its inputs from disk and writes its outputs atomically,
//! so the `pipeline` run and a sequence of single-stage runs produce the same
//! bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clusterer::{cluster_corpus, PointCluster, DEFAULT_THETA};
use crate::disambiguator::{assign_meanings, build_graph};
use crate::error::{Error, Result};
use crate::evalreport::{self, Agreement, AgreementSummary, Report, SpecializationSummary};
use crate::io::*;
use crate::normalizer::{CandidateSet, Normalizer, PointAnnotation};
use crate::ontology::{read_entity_records, read_lexicon_rows, EntityRecord, LexiconRow, Ontology};
use crate::postproc::{finalize_points, postprocess, review_vertices, ResolvedPoint, StageStats};
use crate::simgen::{self, GroundTruth, SimConfig};
use crate::specializer::{evaluate_strip_to_parent, specialize_corpus, Eligibility, FeatureStore};
use crate::spelling::SpellConfig;
use crate::vocab::{
    alpha_grid, reduce_vocabulary, sweep_alpha, EmptySpecificity, NaturalHierarchy,
    NaturalVocabulary, ReducedVocabulary,
};

pub const CANDIDATES: &str = "candidates.jsonl";
pub const CLUSTERS: &str = "clusters.jsonl";
pub const GRAPH: &str = "graph.json";
pub const ASSIGNMENTS: &str = "assignments.jsonl";
pub const RESOLVED: &str = "resolved.jsonl";
pub const STATS: &str = "stats.json";
pub const REVIEW: &str = "review.jsonl";
pub const DISCOVERED: &str = "discovered.jsonl";
pub const VOCABULARY: &str = "vocabulary.json";
pub const SWEEP: &str = "sweep.json";
pub const CURVE: &str = "curve.csv";
pub const SPECIALIZATIONS: &str = "specializations.jsonl";
pub const SPECIALIZATION_EVAL: &str = "specialization_eval.json";
pub const SPECIALIZATION_CURVE: &str = "accuracy_coverage.csv";
pub const REPORT: &str = "report.json";
pub const MANIFEST: &str = "manifest.json";
pub const INCOMPLETE: &str = "INCOMPLETE";

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 2.0;
pub const DEFAULT_N: usize = 10;

fn default_sweep_steps() -> usize {
    10
}

fn default_top_k() -> usize {
    10
}

/// Every flag has a config field; flags win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ontology: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub n: Option<usize>,
    pub tau: Option<f64>,
    pub iterate: bool,
    pub spelling: SpellConfig,
    pub empty_specificity: EmptySpecificity,
    #[serde(default = "default_sweep_steps")]
    pub sweep_steps: usize,
    pub eligibility: Eligibility,
    pub unit_norm_features: bool,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    pub simulation: Option<SimConfig>,
    pub preset: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ontology: None,
            lexicon: None,
            annotations: None,
            features: None,
            truth: None,
            reference: None,
            out: None,
            seed: None,
            threads: None,
            theta: None,
            alpha: None,
            n: None,
            tau: None,
            iterate: false,
            spelling: SpellConfig::default(),
            empty_specificity: EmptySpecificity::default(),
            sweep_steps: default_sweep_steps(),
            eligibility: Eligibility::default(),
            unit_norm_features: false,
            top_k: default_top_k(),
            simulation: None,
            preset: None,
        }
    }
}

impl PipelineConfig {
    /// Parses a config file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut c.ontology,
            &mut c.lexicon,
            &mut c.annotations,
            &mut c.features,
            &mut c.truth,
            &mut c.reference,
            &mut c.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(sim) = &mut c.simulation {
            if let Some(files) = &mut sim.ontology {
                for f in [&mut files.entities, &mut files.lexicon] {
                    if Path::new(f.as_str()).is_relative() {
                        *f = base.join(&*f).to_string_lossy().into_owned();
                    }
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.theta {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "theta must be positive, got {t}"
                )));
            }
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!(
                    "alpha must lie in [0, 1], got {a}"
                )));
            }
        }
        if let Some(t) = self.tau {
            if t.is_nan() || t < 1.0 {
                return Err(Error::InvalidParameter(format!("tau must be ≥ 1, got {t}")));
            }
        }
        if self.n == Some(0) {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or(DEFAULT_THETA)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ALPHA)
    }

    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(DEFAULT_TAU)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("an output path (--out) is required".into()))
    }

    pub fn annotations_path(&self) -> Result<&Path> {
        self.annotations
            .as_deref()
            .ok_or_else(|| Error::Config("an annotations file is required".into()))
    }

    pub fn load_ontology(&self) -> Result<Ontology> {
        match (&self.ontology, &self.lexicon) {
            (Some(o), Some(l)) => Ontology::load(o, l),
            _ => Err(Error::Config(
                "ontology and lexicon paths are required".into(),
            )),
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (global pool if unset).
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(f),
    }
}

pub fn read_candidates(path: &Path, o: &Ontology) -> Result<Vec<CandidateSet>> {
    read_jsonl::<CandidateRecord>(path)?
        .into_iter()
        .map(|r| r.into_set(o))
        .collect()
}

pub fn read_resolved(path: &Path, o: &Ontology) -> Result<Vec<ResolvedPoint>> {
    read_jsonl::<ResolvedRecord>(path)?
        .into_iter()
        .map(|r| r.into_point(o))
        .collect()
}

pub fn normalize_stage(
    o: &Ontology,
    annotations: &Path,
    out: &Path,
    spell: SpellConfig,
) -> Result<Vec<CandidateSet>> {
    let points = read_annotations(annotations)?;
    let cands = Normalizer::new(o, spell).normalize_corpus(&points);
    let rows: Vec<CandidateRecord> = cands
        .iter()
        .map(|c| CandidateRecord::from_set(c, o))
        .collect();
    write_jsonl(out, &rows)?;
    log::info!("normalized {} points", cands.len());
    Ok(cands)
}

pub fn cluster_stage(annotations: &Path, out: &Path, theta: f64) -> Result<Vec<PointCluster>> {
    let points = read_annotations(annotations)?;
    let clusters = cluster_corpus(&points, theta);
    write_jsonl(out, &clusters)?;
    log::info!("{} clusters from {} points", clusters.len(), points.len());
    Ok(clusters)
}

pub fn disambiguate_stage(
    o: &Ontology,
    candidates: &Path,
    clusters: &Path,
    graph_out: &Path,
    assignments_out: &Path,
) -> Result<()> {
    let cands = read_candidates(candidates, o)?;
    let clusters: Vec<PointCluster> = read_jsonl(clusters)?;
    let g = build_graph(&cands, &clusters, o.lexicon())?;
    let assignments = assign_meanings(&g, o);
    write_json(graph_out, &GraphRecord::from_graph(&g, o))?;
    let rows: Vec<AssignmentRecord> = assignments
        .iter()
        .map(|a| AssignmentRecord::from_assignment(a, o))
        .collect();
    write_jsonl(assignments_out, &rows)?;
    log::info!("{} vertices, {} edges", g.vertices.len(), g.edges.len());
    Ok(())
}

pub struct PostprocInputs<'a> {
    pub annotations: &'a Path,
    pub candidates: &'a Path,
    pub graph: &'a Path,
    pub assignments: &'a Path,
}

/// Writes resolved points, stage stats, the review file and discovered words
/// into `out_dir`.
pub fn postprocess_stage(
    o: &Ontology,
    inputs: &PostprocInputs,
    out_dir: &Path,
    iterate: bool,
) -> Result<StageStats> {
    let annotations = read_annotations(inputs.annotations)?;
    let cands = read_candidates(inputs.candidates, o)?;
    let g = read_json::<GraphRecord>(inputs.graph)?.into_graph(o)?;
    let assignments = read_jsonl::<AssignmentRecord>(inputs.assignments)?
        .into_iter()
        .map(|a| a.into_assignment(o))
        .collect::<Result<Vec<_>>>()?;
    if assignments.len() != g.vertices.len()
        || assignments
            .iter()
            .enumerate()
            .any(|(i, a)| a.vertex_id != i)
    {
        return Err(Error::Inconsistent(
            "assignments do not match graph vertices".into(),
        ));
    }
    let r = postprocess(&cands, &g, &assignments, o, iterate);
    let points = finalize_points(&r.assignments, &g, &annotations)?;
    let resolved: Vec<ResolvedRecord> = points
        .iter()
        .map(|p| ResolvedRecord::from_point(p, o))
        .collect();
    write_jsonl(&out_dir.join(RESOLVED), &resolved)?;
    write_json(&out_dir.join(STATS), &r.stats)?;
    let review: Vec<ReviewRecord> = review_vertices(&r.assignments, &g)
        .into_iter()
        .map(|(status, v)| ReviewRecord {
            vertex_id: v.id,
            status,
            label: v.label.clone(),
            entities: v.entities.iter().map(|&e| o.key(e).to_string()).collect(),
            point_ids: v.point_ids.clone(),
        })
        .collect();
    write_jsonl(&out_dir.join(REVIEW), &review)?;
    let found: Vec<DiscoveredRecord> = r
        .discovered
        .iter()
        .map(|w| DiscoveredRecord::from_word(w, o))
        .collect();
    write_jsonl(&out_dir.join(DISCOVERED), &found)?;
    log::info!("{} of {} points resolved", points.len(), annotations.len());
    Ok(r.stats)
}

fn hierarchy(o: &Ontology, resolved: &Path) -> Result<NaturalHierarchy> {
    let points = read_resolved(resolved, o)?;
    let nv = NaturalVocabulary::from_points(&points);
    if nv.is_empty() {
        return Err(Error::EmptyCorpus("no resolved points".into()));
    }
    NaturalHierarchy::contract(&nv, o)
}

fn pick_n(n: Option<usize>, nh: &NaturalHierarchy) -> usize {
    n.unwrap_or(DEFAULT_N.min(nh.nodes.len()))
}

pub fn vocab_stage(
    o: &Ontology,
    resolved: &Path,
    n: Option<usize>,
    alpha: f64,
    empty: EmptySpecificity,
    out: &Path,
) -> Result<ReducedVocabulary> {
    let nh = hierarchy(o, resolved)?;
    let v = reduce_vocabulary(&nh, o, pick_n(n, &nh), alpha, empty)?;
    write_json(out, &v)?;
    Ok(v)
}

pub fn sweep_stage(
    o: &Ontology,
    resolved: &Path,
    n: Option<usize>,
    steps: usize,
    empty: EmptySpecificity,
    json_out: &Path,
    csv_out: &Path,
) -> Result<Vec<ReducedVocabulary>> {
    let nh = hierarchy(o, resolved)?;
    let curve = sweep_alpha(&nh, o, pick_n(n, &nh), &alpha_grid(steps), empty)?;
    write_json(json_out, &curve)?;
    write_atomic(
        csv_out,
        evalreport::vocabulary_curve_csv(&curve)?.as_bytes(),
    )?;
    Ok(curve)
}

pub struct SpecializeArgs<'a> {
    pub resolved: &'a Path,
    pub features: &'a Path,
    pub tau: f64,
    pub eligibility: Eligibility,
    pub unit_norm: bool,
}

/// Applies specialization to eligible points and runs the strip-to-parent
/// evaluation on the same labels.
pub fn specialize_stage(
    o: &Ontology,
    args: &SpecializeArgs,
    out_dir: &Path,
) -> Result<SpecializationSummary> {
    let points = read_resolved(args.resolved, o)?;
    let mut features = FeatureStore::read_csv(args.features)?;
    if args.unit_norm {
        features.normalize();
    }
    let nh = NaturalHierarchy::contract(&NaturalVocabulary::from_points(&points), o)?;
    let labels: Vec<(String, _)> = points
        .iter()
        .map(|p| (p.point_id.clone(), p.entity))
        .collect();
    let (results, skipped) =
        specialize_corpus(&labels, &features, &nh, args.tau, &args.eligibility);
    for (id, e) in &skipped {
        log::warn!("skipped {id}: {e}");
    }
    let rows: Vec<SpecializationRecord> = results
        .iter()
        .map(|s| SpecializationRecord::from_result(s, o))
        .collect();
    write_jsonl(&out_dir.join(SPECIALIZATIONS), &rows)?;
    let ev = evaluate_strip_to_parent(&labels, &features, &nh, args.tau, &args.eligibility);
    let summary = SpecializationSummary {
        evaluated: ev.results.len(),
        accuracy: ev.accuracy,
        baseline_accuracy: ev.baseline_accuracy,
        applied_accuracy: ev.applied_accuracy,
        curve: ev.curve,
    };
    write_json(&out_dir.join(SPECIALIZATION_EVAL), &summary)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in &summary.curve {
        w.serialize(c)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(out_dir, std::io::Error::other(e.to_string())))?;
    write_atomic(&out_dir.join(SPECIALIZATION_CURVE), &bytes)?;
    Ok(summary)
}

pub fn write_entity_records(path: &Path, records: &[EntityRecord]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn write_lexicon(path: &Path, rows: &[LexiconRow]) -> Result<()> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&r.surface);
        s.push('\t');
        s.push_str(&r.entity);
        if let Some(f) = r.frequency {
            s.push_str(&format!("\t{f}"));
        }
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

/// Writes a simulated corpus plus a pipeline config pointing at it.
pub fn simulate_stage(sim: &SimConfig, seed: u64, out_dir: &Path) -> Result<simgen::SimMetadata> {
    let loaded = match &sim.ontology {
        Some(files) if sim.taxonomy.is_none() => Some(Ontology::from_records(
            read_entity_records(Path::new(&files.entities))?,
            read_lexicon_rows(Path::new(&files.lexicon))?,
        )?),
        _ => None,
    };
    let corpus = simgen::generate_corpus(sim, seed, loaded.as_ref())?;
    let (ontology, lexicon) = match &corpus.taxonomy {
        Some((records, rows)) => {
            write_entity_records(&out_dir.join("ontology.jsonl"), records)?;
            write_lexicon(&out_dir.join("lexicon.tsv"), rows)?;
            (
                PathBuf::from("ontology.jsonl"),
                PathBuf::from("lexicon.tsv"),
            )
        }
        None => {
            let files = sim.ontology.as_ref().expect("loaded ontology");
            (
                fs::canonicalize(&files.entities).map_err(|e| Error::io(&files.entities, e))?,
                fs::canonicalize(&files.lexicon).map_err(|e| Error::io(&files.lexicon, e))?,
            )
        }
    };
    write_jsonl(&out_dir.join("annotations.jsonl"), &corpus.annotations)?;
    write_jsonl(&out_dir.join("truth.jsonl"), &corpus.truth)?;
    write_jsonl(&out_dir.join("scenes.jsonl"), &corpus.scenes)?;
    let mut fbytes = Vec::new();
    corpus.features.write_csv(&mut fbytes)?;
    write_atomic(&out_dir.join("features.csv"), &fbytes)?;
    write_json(&out_dir.join("metadata.json"), &corpus.metadata)?;
    let cfg = PipelineConfig {
        ontology: Some(ontology),
        lexicon: Some(lexicon),
        annotations: Some("annotations.jsonl".into()),
        features: Some("features.csv".into()),
        truth: Some("truth.jsonl".into()),
        out: Some("run".into()),
        seed: Some(seed),
        ..PipelineConfig::default()
    };
    write_json(&out_dir.join("config.json"), &cfg)?;
    Ok(corpus.metadata)
}

/// Writes the worked example (ontology, lexicon, annotations, config).
pub fn example_stage(out_dir: &Path) -> Result<()> {
    let w = simgen::worked_example();
    write_entity_records(&out_dir.join("ontology.jsonl"), &w.entities)?;
    write_lexicon(&out_dir.join("lexicon.tsv"), &w.lexicon)?;
    write_jsonl(&out_dir.join("annotations.jsonl"), &w.annotations)?;
    let cfg = PipelineConfig {
        ontology: Some("ontology.jsonl".into()),
        lexicon: Some("lexicon.tsv".into()),
        annotations: Some("annotations.jsonl".into()),
        out: Some("run".into()),
        n: Some(3),
        alpha: Some(0.5),
        ..PipelineConfig::default()
    };
    write_json(&out_dir.join("worked-example.json"), &cfg)
}

pub struct EvaluateInputs<'a> {
    pub annotations: &'a Path,
    pub candidates: Option<&'a Path>,
    pub resolved: &'a Path,
    pub stats: Option<&'a Path>,
    pub truth: Option<&'a Path>,
    pub reference: Option<&'a Path>,
    pub sweep: Option<&'a Path>,
    pub specialization: Option<&'a Path>,
    pub top_k: usize,
}

/// Builds the report from whatever inputs are present and writes
/// `report.json` plus one CSV per curve into `out_dir`.
pub fn evaluate_stage(o: &Ontology, inputs: &EvaluateInputs, out_dir: &Path) -> Result<Report> {
    let annotations = read_annotations(inputs.annotations)?;
    let points = read_resolved(inputs.resolved, o)?;
    let annotators = evalreport::annotators_by_image(&annotations);
    let mut r = Report::default();
    if let Some(p) = inputs.stats {
        r.stage_stats = Some(read_json(p)?);
    }
    if !points.is_empty() {
        r.class_distribution = Some(evalreport::class_distribution(&points, o, inputs.top_k)?);
    }
    let max = annotators.values().map(|s| s.len()).max().unwrap_or(0);
    r.agreement = Some(
        (1..=max)
            .map(|k| AgreementSummary {
                level: k,
                mean_classes: evalreport::agreement_labels(
                    &points,
                    &annotators,
                    Agreement::AtLeast(k),
                )
                .mean_classes,
            })
            .collect(),
    );
    if let Some(p) = inputs.reference {
        let reference = read_reference(p)?;
        r.precision_recall = Some(evalreport::pr_curve(
            &points,
            &annotators,
            &reference,
            None,
            o,
        )?);
    }
    if let Some(p) = inputs.truth {
        let truth: Vec<GroundTruth> = read_jsonl(p)?;
        r.accuracy = Some(evalreport::disambiguation_accuracy(
            &points, &truth, o, false,
        )?);
        if let Some(c) = inputs.candidates {
            let cands = read_candidates(c, o)?;
            r.polysemy = Some(evalreport::polysemy_accuracy(&cands, &points, &truth, o)?);
        }
    }
    if let Some(p) = inputs.sweep {
        r.vocabulary_curve = Some(read_json(p)?);
    }
    if let Some(p) = inputs.specialization {
        r.specialization = Some(read_json(p)?);
    }
    let bundle = evalreport::render_report(&r)?;
    write_atomic(&out_dir.join(REPORT), bundle.json.as_bytes())?;
    for (name, body) in &bundle.csv {
        write_atomic(&out_dir.join(name), body.as_bytes())?;
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<String>,
    pub theta: f64,
    pub alpha: f64,
    pub n: usize,
    pub tau: f64,
    pub seed: u64,
}

/// All stages in order, artifacts under the configured output directory.
/// A failed run leaves an `INCOMPLETE` marker holding the error.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    let out = cfg.out_dir()?.to_path_buf();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let _ = fs::remove_file(out.join(MANIFEST));
    write_atomic(&out.join(INCOMPLETE), b"running\n")?;
    match with_threads(cfg.threads, || pipeline_stages(cfg, &out)) {
        Ok(m) => {
            write_json(&out.join(MANIFEST), &m)?;
            fs::remove_file(out.join(INCOMPLETE)).map_err(|e| Error::io(&out, e))?;
            Ok(m)
        }
        Err(e) => {
            let _ = write_atomic(&out.join(INCOMPLETE), format!("{e}\n").as_bytes());
            Err(e)
        }
    }
}

fn pipeline_stages(cfg: &PipelineConfig, out: &Path) -> Result<Manifest> {
    let o = cfg.load_ontology()?;
    let ann = cfg.annotations_path()?;
    let p = |name: &str| out.join(name);
    let mut files = vec![
        CANDIDATES,
        CLUSTERS,
        GRAPH,
        ASSIGNMENTS,
        RESOLVED,
        STATS,
        REVIEW,
        DISCOVERED,
    ];

    normalize_stage(&o, ann, &p(CANDIDATES), cfg.spelling)?;
    cluster_stage(ann, &p(CLUSTERS), cfg.theta())?;
    disambiguate_stage(&o, &p(CANDIDATES), &p(CLUSTERS), &p(GRAPH), &p(ASSIGNMENTS))?;
    postprocess_stage(
        &o,
        &PostprocInputs {
            annotations: ann,
            candidates: &p(CANDIDATES),
            graph: &p(GRAPH),
            assignments: &p(ASSIGNMENTS),
        },
        out,
        cfg.iterate,
    )?;
    let v = vocab_stage(
        &o,
        &p(RESOLVED),
        cfg.n,
        cfg.alpha(),
        cfg.empty_specificity,
        &p(VOCABULARY),
    )?;
    sweep_stage(
        &o,
        &p(RESOLVED),
        Some(v.n),
        cfg.sweep_steps,
        cfg.empty_specificity,
        &p(SWEEP),
        &p(CURVE),
    )?;
    files.extend([VOCABULARY, SWEEP, CURVE]);
    let mut spec_summary = None;
    if let Some(features) = &cfg.features {
        specialize_stage(
            &o,
            &SpecializeArgs {
                resolved: &p(RESOLVED),
                features,
                tau: cfg.tau(),
                eligibility: cfg.eligibility,
                unit_norm: cfg.unit_norm_features,
            },
            out,
        )?;
        spec_summary = Some(p(SPECIALIZATION_EVAL));
        files.extend([SPECIALIZATIONS, SPECIALIZATION_EVAL, SPECIALIZATION_CURVE]);
    }
    let report_dir = out.join("report");
    evaluate_stage(
        &o,
        &EvaluateInputs {
            annotations: ann,
            candidates: Some(&p(CANDIDATES)),
            resolved: &p(RESOLVED),
            stats: Some(&p(STATS)),
            truth: cfg.truth.as_deref(),
            reference: cfg.reference.as_deref(),
            sweep: Some(&p(SWEEP)),
            specialization: spec_summary.as_deref(),
            top_k: cfg.top_k,
        },
        &report_dir,
    )?;
    let mut files: Vec<String> = files.into_iter().map(String::from).collect();
    let mut reports: Vec<String> = fs::read_dir(&report_dir)
        .map_err(|e| Error::io(&report_dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| !n.starts_with('.'))
        .map(|n| format!("report/{n}"))
        .collect();
    reports.sort();
    files.extend(reports);
    Ok(Manifest {
        files,
        theta: cfg.theta(),
        alpha: cfg.alpha(),
        n: v.n,
        tau: cfg.tau(),
        seed: cfg.seed(),
    })
}

/// In-memory run of the core stages, for tests and benches.
#[derive(Debug, Clone)]
pub struct InMemoryRun {
    pub candidates: Vec<CandidateSet>,
    pub clusters: Vec<PointCluster>,
    pub resolution: crate::postproc::Resolution,
    pub graph: crate::disambiguator::CoocGraph,
    pub points: Vec<ResolvedPoint>,
}

pub fn run_in_memory(
    o: &Ontology,
    annotations: &[PointAnnotation],
    theta: f64,
    iterate: bool,
) -> Result<InMemoryRun> {
    let candidates = Normalizer::new(o, SpellConfig::default()).normalize_corpus(annotations);
    let clusters = cluster_corpus(annotations, theta);
    let graph = build_graph(&candidates, &clusters, o.lexicon())?;
    let assignments = assign_meanings(&graph, o);
    let resolution = postprocess(&candidates, &graph, &assignments, o, iterate);
    let points = finalize_points(&resolution.assignments, &graph, annotations)?;
    Ok(InMemoryRun {
        candidates,
        clusters,
        resolution,
        graph,
        points,
    })
}

/// Entity key → resolved point ids, for quick inspection.
pub fn points_by_entity(points: &[ResolvedPoint], o: &Ontology) -> BTreeMap<String, Vec<String>> {
    let mut m: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for p in points {
        m.entry(o.key(p.entity).to_string())
            .or_default()
            .push(p.point_id.clone());
    }
    m
}
