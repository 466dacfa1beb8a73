//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocab_emerge::disambiguator::{Vertex, VertexKey};
use vocab_emerge::pipeline::run_in_memory;
use vocab_emerge::simgen::worked_example;
use vocab_emerge::specializer::{evaluate_strip_to_parent, Eligibility};
use vocab_emerge::vocab::{sweep_alpha, EmptySpecificity, VocabSolver, VocabTree};
use vocab_emerge::{
    cluster_corpus, cluster_image, entity_weight, CoocGraph, NaturalHierarchy, NaturalVocabulary,
    PointAnnotation,
};

const THETA: f64 = 3.0;

const DP_TREES: usize = 200;
const DP_MAX_NODES: usize = 12;
const DP_ALPHA_QUARTERS: [i128; 5] = [0, 1, 2, 3, 4];
const DP_TIME_LIMIT: Duration = Duration::from_secs(120);

const ORACLE_IMAGES: usize = 150;
const ORACLE_MAX_POINTS: usize = 8;
const MIN_SEPARATION_OVER_JITTER: f64 = 10.0;
const MIN_PURITY: f64 = 0.99;
const CLUSTER_TIME_LIMIT: Duration = Duration::from_secs(60);

const NOISE_FREE_MIN_PCT: f64 = 99.0;

const MIN_CENTROID_SEPARATION_SIGMAS: f64 = 6.0;
const MIN_SPECIALIZATION_ACCURACY: f64 = 0.95;
const SPECIALIZATION_TAU: f64 = 2.0;

const WEIGHT_GRAPHS: u64 = 1000;

const PRESETS: [&str; 3] = ["noise-free", "noisy", "polysemy"];
const SEEDS: [u64; 4] = [0, 1, 2, 3];

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dp_exactness() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut evaluations = 0;
    for t in 0..DP_TREES {
        // every fourth tree at the size limit
        let size = if t % 4 == 0 {
            DP_MAX_NODES
        } else {
            rng.random_range(1..=DP_MAX_NODES)
        };
        let (parent, mass) = common::random_forest(&mut rng, size, 50);
        let total: u64 = mass.iter().sum();
        let tree = VocabTree::new(parent.clone(), mass.clone()).map_err(|e| e.to_string())?;
        let solver = VocabSolver::new(&tree, size, EmptySpecificity::One);
        for q in DP_ALPHA_QUARTERS {
            let best = common::brute_best(&parent, &mass, q);
            for (n, &opt) in best.iter().enumerate().skip(1) {
                let (c, _) = solver.best(n, q as f64 / 4.0).map_err(|e| e.to_string())?;
                let (a, b) = common::masses(&parent, &mass, &c.selected);
                ensure(
                    c.selected.len() == n && (a, b) == (c.covered_mass, c.selected_mass),
                    || format!("tree {t}: reported masses disagree with the selection"),
                )?;
                ensure(Some(common::objective_q(a, b, total, q)) == opt, || {
                    format!(
                        "tree {t}, n={n}, alpha={}/4: objective below the optimum",
                        q
                    )
                })?;
                evaluations += 1;
            }
        }
    }
    let took = start.elapsed();
    ensure(took <= DP_TIME_LIMIT, || format!("took {took:?}"))?;
    Ok(format!(
        "{DP_TREES} trees, {evaluations} (n, alpha) pairs exact, {took:.1?}"
    ))
}

fn clustering_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut images = 0;
    while images < ORACLE_IMAGES {
        let img = common::random_image(&mut rng, ORACLE_MAX_POINTS);
        if img.is_empty() {
            continue;
        }
        let points: Vec<PointAnnotation> = img
            .iter()
            .enumerate()
            .map(|(i, &((x, y), a, _))| PointAnnotation {
                point_id: format!("{i}"),
                image_id: "img".into(),
                annotator_id: format!("a{a}"),
                x,
                y,
                raw: "thing".into(),
            })
            .collect();
        let mut got: Vec<Vec<usize>> = cluster_image(&points, THETA)
            .clusters
            .iter()
            .filter(|c| c.point_ids.len() > 1)
            .map(|c| {
                let mut m: Vec<usize> = c.point_ids.iter().map(|p| p.parse().unwrap()).collect();
                m.sort();
                m
            })
            .collect();
        got.sort();
        let pts: Vec<(f64, f64)> = img.iter().map(|t| t.0).collect();
        let ann: Vec<usize> = img.iter().map(|t| t.1).collect();
        let want = common::exhaustive_clusters(&pts, &ann, THETA);
        ensure(got == want, || {
            format!("image {images}: greedy {got:?} vs exhaustive {want:?}")
        })?;
        images += 1;
    }

    let (mut pure, mut multi) = (0usize, 0usize);
    for seed in SEEDS {
        let (_, corpus) = common::simulated("noisy", seed);
        let m = &corpus.metadata;
        let ratio = m.min_object_separation / m.max_click_jitter;
        ensure(ratio >= MIN_SEPARATION_OVER_JITTER, || {
            format!("separation/jitter only {ratio}")
        })?;
        let object: BTreeMap<&str, &str> = corpus
            .truth
            .iter()
            .map(|t| (t.point_id.as_str(), t.object_id.as_str()))
            .collect();
        for c in cluster_corpus(&corpus.annotations, THETA) {
            if c.point_ids.len() < 2 {
                continue;
            }
            multi += 1;
            let objs: BTreeSet<&str> = c.point_ids.iter().map(|p| object[p.as_str()]).collect();
            pure += usize::from(objs.len() == 1);
        }
    }
    let purity = pure as f64 / multi as f64;
    ensure(multi > 0 && purity >= MIN_PURITY, || {
        format!("purity {purity:.4} over {multi} clusters")
    })?;
    let took = start.elapsed();
    ensure(took <= CLUSTER_TIME_LIMIT, || format!("took {took:?}"))?;
    Ok(format!(
        "{ORACLE_IMAGES} images match exhaustive search; purity {purity:.4} over {multi} clusters, {took:.1?}"
    ))
}

fn disambiguation_end_to_end() -> Check {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/tests/data/worked_example.golden.json"
    );
    let golden: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let w = worked_example();
    let o = w.ontology().map_err(|e| e.to_string())?;
    let run = run_in_memory(&o, &w.annotations, THETA, false).map_err(|e| e.to_string())?;
    let got: BTreeMap<&str, &str> = run
        .points
        .iter()
        .map(|p| (p.point_id.as_str(), o.key(p.entity)))
        .collect();
    let want: BTreeMap<&str, &str> = golden["resolved"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.as_str(), v[0].as_str().unwrap()))
        .collect();
    ensure(got == want, || {
        format!("worked example: {got:?} vs golden {want:?}")
    })?;

    let mut lines = Vec::new();
    for seed in SEEDS {
        let (o, corpus) = common::simulated("polysemy", seed);
        let run =
            run_in_memory(&o, &corpus.annotations, THETA, false).map_err(|e| e.to_string())?;
        let r = vocab_emerge::evalreport::polysemy_accuracy(
            &run.candidates,
            &run.points,
            &corpus.truth,
            &o,
        )
        .map_err(|e| e.to_string())?;
        ensure(r.pipeline.accuracy > r.baseline.accuracy, || {
            format!(
                "seed {seed}: pipeline {:.3} vs majority sense {:.3}",
                r.pipeline.accuracy, r.baseline.accuracy
            )
        })?;
        lines.push(format!(
            "{:.2}>{:.2}",
            r.pipeline.accuracy, r.baseline.accuracy
        ));
    }
    Ok(format!(
        "worked example {}/{} points golden; polysemous points pipeline>baseline per seed [{}]",
        got.len(),
        want.len(),
        lines.join(" ")
    ))
}

fn stage_monotonicity() -> Check {
    let mut finals: Vec<f64> = Vec::new();
    let mut corpora = 0;
    let w = worked_example();
    let mut cases = vec![(
        w.ontology().map_err(|e| e.to_string())?,
        w.annotations.clone(),
        "worked",
    )];
    for p in PRESETS {
        for seed in SEEDS {
            let (o, c) = common::simulated(p, seed);
            cases.push((o, c.annotations, p));
        }
    }
    for (o, ann, name) in &cases {
        let run = run_in_memory(o, ann, THETA, false).map_err(|e| e.to_string())?;
        let pct: Vec<f64> = run
            .resolution
            .stats
            .stages
            .iter()
            .map(|s| s.unambiguous_pct)
            .collect();
        ensure(
            pct.len() == 4 && pct.windows(2).all(|w| w[0] <= w[1]),
            || format!("{name}: unambiguous share {pct:?}"),
        )?;
        if *name == "noise-free" {
            finals.push(pct[3]);
        }
        corpora += 1;
    }
    let worst = finals.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(worst >= NOISE_FREE_MIN_PCT, || {
        format!("noise-free final share {worst:.2}%")
    })?;
    Ok(format!(
        "{corpora} corpora non-decreasing; noise-free final ≥ {worst:.2}%"
    ))
}

fn specialization() -> Check {
    let mut lines = Vec::new();
    for preset in ["noisy", "polysemy"] {
        for seed in SEEDS {
            let (o, corpus) = common::simulated(preset, seed);
            let sep = corpus.metadata.separation_ratio;
            ensure(sep >= MIN_CENTROID_SEPARATION_SIGMAS, || {
                format!("centroids only {sep}σ apart")
            })?;
            let run =
                run_in_memory(&o, &corpus.annotations, THETA, false).map_err(|e| e.to_string())?;
            let nh = NaturalHierarchy::contract(&NaturalVocabulary::from_points(&run.points), &o)
                .map_err(|e| e.to_string())?;
            let labels: Vec<(String, _)> = run
                .points
                .iter()
                .map(|p| (p.point_id.clone(), p.entity))
                .collect();
            let ev = evaluate_strip_to_parent(
                &labels,
                &corpus.features,
                &nh,
                SPECIALIZATION_TAU,
                &Eligibility::default(),
            );
            let (a50, a100) = (ev.accuracy_at(0.5), ev.accuracy_at(1.0));
            let tag = format!("{preset}/{seed}");
            ensure(!ev.results.is_empty(), || {
                format!("{tag}: nothing evaluated")
            })?;
            ensure(ev.accuracy >= MIN_SPECIALIZATION_ACCURACY, || {
                format!("{tag}: accuracy {:.3}", ev.accuracy)
            })?;
            ensure(ev.accuracy > ev.baseline_accuracy, || {
                format!(
                    "{tag}: accuracy {:.3} vs baseline {:.3}",
                    ev.accuracy, ev.baseline_accuracy
                )
            })?;
            ensure(a50 >= a100, || {
                format!("{tag}: acc@50% {a50:.3} < acc@100% {a100:.3}")
            })?;
            lines.push(format!(
                "{tag} n={} acc={:.3} base={:.3}",
                ev.results.len(),
                ev.accuracy,
                ev.baseline_accuracy
            ));
        }
    }
    Ok(lines.join("; "))
}

fn coverage_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = worked_example();
    let mut cases = vec![(
        w.ontology().map_err(|e| e.to_string())?,
        w.annotations.clone(),
    )];
    for p in PRESETS {
        for seed in SEEDS {
            let (o, c) = common::simulated(p, seed);
            cases.push((o, c.annotations));
        }
    }
    let mut sweeps = 0;
    for (o, ann) in &cases {
        let run = run_in_memory(o, ann, THETA, false).map_err(|e| e.to_string())?;
        let nh = NaturalHierarchy::contract(&NaturalVocabulary::from_points(&run.points), o)
            .map_err(|e| e.to_string())?;
        let all: BTreeSet<_> = nh.nodes.iter().copied().collect();
        let cov = nh.coverage(&all).map_err(|e| e.to_string())?;
        let spec = nh
            .specificity(&all, EmptySpecificity::One)
            .map_err(|e| e.to_string())?;
        ensure(cov == 1.0 && spec == 1.0, || {
            format!("cover {cov}, spec {spec} for the full vocabulary")
        })?;
        for _ in 0..200 {
            let small: BTreeSet<_> = nh
                .nodes
                .iter()
                .copied()
                .filter(|_| rng.random_bool(0.3))
                .collect();
            let mut big = small.clone();
            big.extend(nh.nodes.iter().copied().filter(|_| rng.random_bool(0.3)));
            let (cs, cb) = (nh.coverage(&small).unwrap(), nh.coverage(&big).unwrap());
            ensure(cs <= cb, || {
                format!("coverage fell from {cs} to {cb} on a superset")
            })?;
        }
        for n in 1..=nh.nodes.len().min(10) {
            let ends = sweep_alpha(&nh, o, n, &[0.0, 1.0], EmptySpecificity::One)
                .map_err(|e| e.to_string())?;
            ensure(ends[1].coverage >= ends[0].coverage, || {
                format!(
                    "n={n}: coverage {} at alpha=1 below {} at alpha=0",
                    ends[1].coverage, ends[0].coverage
                )
            })?;
            sweeps += 1;
        }
    }
    Ok(format!("{} corpora, {sweeps} alpha sweeps", cases.len()))
}

fn entity_weight_equivalence() -> Check {
    let mut checked = 0;
    for seed in 0..WEIGHT_GRAPHS {
        let (parent, sets, edges) = common::random_case(seed);
        let o = common::ontology_from_parents(&parent);
        let id = |i: usize| o.id(&common::entity_key(i)).unwrap();
        let vertices = sets
            .iter()
            .enumerate()
            .map(|(v, s)| Vertex {
                id: v,
                key: VertexKey::Entities(s.iter().map(|&i| id(i)).collect()),
                label: format!("v{v}"),
                point_ids: vec![format!("p{v}")],
                entities: s.iter().map(|&i| id(i)).collect(),
            })
            .collect();
        let emap = edges.iter().map(|&(i, j, w)| ((i, j), w)).collect();
        let g = CoocGraph::from_parts(vertices, emap).map_err(|e| e.to_string())?;
        for (v, s) in sets.iter().enumerate() {
            for &e in s {
                let got = entity_weight(id(e), v, &g, &o).map_err(|e| e.to_string())?;
                let want = common::naive_entity_weight(&parent, &sets, &edges, v, e);
                ensure(got == want, || {
                    format!("graph {seed}, vertex {v}: {got} vs {want}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{WEIGHT_GRAPHS} graphs, {checked} weights equal"))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_vocab-emerge"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for preset in ["noisy", "polysemy"] {
        let sim = tmp.path().join(preset);
        let sim_s = sim.to_str().unwrap();
        cli(&[
            "simulate", "--preset", preset, "--seed", "17", "--out", sim_s,
        ])?;
        let cfg = sim.join("config.json");
        let mut runs = Vec::new();
        for threads in ["1", "4"] {
            let out = sim.join(format!("threads{threads}"));
            cli(&[
                "pipeline",
                "--config",
                cfg.to_str().unwrap(),
                "--threads",
                threads,
                "--out",
                out.to_str().unwrap(),
            ])?;
            runs.push(files(&out));
        }
        ensure(runs[0].len() > 10, || {
            format!("{preset}: only {} artifacts", runs[0].len())
        })?;
        ensure(runs[0].keys().eq(runs[1].keys()), || {
            format!("{preset}: artifact sets differ")
        })?;
        for (name, bytes) in &runs[0] {
            ensure(&runs[1][name] == bytes, || {
                format!("{preset}: {name} differs between thread counts")
            })?;
            compared += 1;
        }
    }
    Ok(format!(
        "{compared} artifacts byte-identical with --threads 1 and 4"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("dp-exactness", dp_exactness),
        ("clustering-oracle", clustering_oracle),
        ("disambiguation-end-to-end", disambiguation_end_to_end),
        ("stage-monotonicity", stage_monotonicity),
        ("specialization", specialization),
        ("coverage-specificity-identities", coverage_identities),
        ("entity-weight-equivalence", entity_weight_equivalence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        match r {
            Ok(detail) => println!("PASS {name}: {detail} [{took:.1?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{took:.1?}]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
