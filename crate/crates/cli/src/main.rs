use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use vocab_emerge::pipeline::PipelineConfig;
use vocab_emerge::simgen::SimConfig;
use vocab_emerge::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "vocab-emerge",
    version,
    about = "Natural vocabulary from free-form point annotations"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
struct Global {
    /// JSON config; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Cluster acceptance threshold
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Coverage weight in [0, 1]
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Reduced vocabulary size
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Specialization confidence threshold
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Run directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    ontology: Option<PathBuf>,
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    annotations: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Map raw strings to candidate entities
    Normalize,
    /// Group clicks into objects per image
    Cluster,
    /// Build the co-occurrence graph and assign meanings
    Disambiguate {
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        clusters: Option<PathBuf>,
    },
    /// Resolve unrecognized and ambiguous vertices
    Postprocess {
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        assignments: Option<PathBuf>,
        /// Run the rules a second time
        #[arg(long)]
        iterate: bool,
    },
    /// Pick the reduced vocabulary of size n
    Vocab {
        #[arg(long)]
        resolved: Option<PathBuf>,
    },
    /// Reduced vocabularies over an alpha grid
    Sweep {
        #[arg(long)]
        resolved: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Specialize generic labels by nearest neighbour
    Specialize {
        #[arg(long)]
        resolved: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        unit_norm: bool,
    },
    /// Generate a synthetic corpus with ground truth
    Simulate {
        /// noise-free, noisy or polysemy
        #[arg(long)]
        preset: Option<String>,
    },
    /// Build the evaluation report
    Evaluate {
        #[arg(long)]
        resolved: Option<PathBuf>,
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long)]
        specialization: Option<PathBuf>,
    },
    /// All stages in order
    Pipeline,
    /// Write the worked example inputs and config
    Example,
}

enum Failure {
    Usage(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn merged_config(g: &Global) -> std::result::Result<PipelineConfig, Failure> {
    let mut c = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => {$(
            if let Some(v) = &g.$f {
                c.$f = Some(v.clone());
            }
        )*};
    }
    over!(
        seed,
        threads,
        theta,
        alpha,
        n,
        tau,
        out,
        ontology,
        lexicon,
        annotations
    );
    c.validate().map_err(Failure::Usage)?;
    Ok(c)
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn or_default(flag: &Option<PathBuf>, dir: &Path, name: &str) -> PathBuf {
    flag.clone().unwrap_or_else(|| dir.join(name))
}

/// Explicit flag, else the file in the run directory when it exists.
fn if_present(flag: &Option<PathBuf>, dir: &Path, name: &str) -> Option<PathBuf> {
    flag.clone()
        .or_else(|| Some(dir.join(name)).filter(|p| p.exists()))
}

fn print(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn run(cmd: &Cmd, c: &PipelineConfig) -> Result<()> {
    use vocab_emerge::pipeline::*;
    if let Cmd::Pipeline = cmd {
        let m = run_pipeline(c)?;
        print(&serde_json::to_value(&m)?);
        return Ok(());
    }
    let out = c.out_dir()?.to_path_buf();
    mkdir(&out)?;
    let p = |name: &str| out.join(name);
    with_threads(c.threads, || match cmd {
        Cmd::Normalize => {
            let o = c.load_ontology()?;
            let n = normalize_stage(&o, c.annotations_path()?, &p(CANDIDATES), c.spelling)?;
            print(&json!({ "points": n.len() }));
            Ok(())
        }
        Cmd::Cluster => {
            let n = cluster_stage(c.annotations_path()?, &p(CLUSTERS), c.theta())?;
            print(&json!({ "clusters": n.len() }));
            Ok(())
        }
        Cmd::Disambiguate {
            candidates,
            clusters,
        } => {
            let o = c.load_ontology()?;
            disambiguate_stage(
                &o,
                &or_default(candidates, &out, CANDIDATES),
                &or_default(clusters, &out, CLUSTERS),
                &p(GRAPH),
                &p(ASSIGNMENTS),
            )
        }
        Cmd::Postprocess {
            candidates,
            graph,
            assignments,
            iterate,
        } => {
            let o = c.load_ontology()?;
            let stats = postprocess_stage(
                &o,
                &PostprocInputs {
                    annotations: c.annotations_path()?,
                    candidates: &or_default(candidates, &out, CANDIDATES),
                    graph: &or_default(graph, &out, GRAPH),
                    assignments: &or_default(assignments, &out, ASSIGNMENTS),
                },
                &out,
                *iterate || c.iterate,
            )?;
            print(&serde_json::to_value(&stats)?);
            Ok(())
        }
        Cmd::Vocab { resolved } => {
            let o = c.load_ontology()?;
            let v = vocab_stage(
                &o,
                &or_default(resolved, &out, RESOLVED),
                c.n,
                c.alpha(),
                c.empty_specificity,
                &p(VOCABULARY),
            )?;
            print(&serde_json::to_value(&v)?);
            Ok(())
        }
        Cmd::Sweep { resolved, steps } => {
            let o = c.load_ontology()?;
            let resolved = or_default(resolved, &out, RESOLVED);
            let curve = sweep_stage(
                &o,
                &resolved,
                c.n,
                steps.unwrap_or(c.sweep_steps),
                c.empty_specificity,
                &p(SWEEP),
                &p(CURVE),
            )?;
            print(&json!({ "points": curve.len() }));
            Ok(())
        }
        Cmd::Specialize {
            resolved,
            features,
            unit_norm,
        } => {
            let o = c.load_ontology()?;
            let features = features
                .clone()
                .or_else(|| c.features.clone())
                .ok_or_else(|| Error::Config("a features file is required".into()))?;
            let s = specialize_stage(
                &o,
                &SpecializeArgs {
                    resolved: &or_default(resolved, &out, RESOLVED),
                    features: &features,
                    tau: c.tau(),
                    eligibility: c.eligibility,
                    unit_norm: *unit_norm || c.unit_norm_features,
                },
                &out,
            )?;
            print(&serde_json::to_value(&s)?);
            Ok(())
        }
        Cmd::Simulate { preset } => {
            let sim = match (preset.as_deref().or(c.preset.as_deref()), &c.simulation) {
                (Some(name), _) => SimConfig::preset(name)?,
                (None, Some(s)) => s.clone(),
                (None, None) => SimConfig::noisy(),
            };
            let m = simulate_stage(&sim, c.seed(), &out)?;
            print(&serde_json::to_value(&m)?);
            Ok(())
        }
        Cmd::Evaluate {
            resolved,
            candidates,
            stats,
            truth,
            reference,
            sweep,
            specialization,
        } => {
            let o = c.load_ontology()?;
            let report_dir = out.join("report");
            mkdir(&report_dir)?;
            let candidates = if_present(candidates, &out, CANDIDATES);
            let stats = if_present(stats, &out, STATS);
            let sweep = if_present(sweep, &out, SWEEP);
            let specialization = if_present(specialization, &out, SPECIALIZATION_EVAL);
            let truth = truth.clone().or_else(|| c.truth.clone());
            let reference = reference.clone().or_else(|| c.reference.clone());
            evaluate_stage(
                &o,
                &EvaluateInputs {
                    annotations: c.annotations_path()?,
                    candidates: candidates.as_deref(),
                    resolved: &or_default(resolved, &out, RESOLVED),
                    stats: stats.as_deref(),
                    truth: truth.as_deref(),
                    reference: reference.as_deref(),
                    sweep: sweep.as_deref(),
                    specialization: specialization.as_deref(),
                    top_k: c.top_k,
                },
                &report_dir,
            )?;
            print(&json!({ "report": report_dir.join(REPORT) }));
            Ok(())
        }
        Cmd::Example => example_stage(&out),
        Cmd::Pipeline => unreachable!(),
    })
}

fn fail(code: u8, e: &Error) -> ExitCode {
    let rec = json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{rec}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VOCAB_EMERGE_LOG", "warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match merged_config(&cli.global) {
        Ok(c) => c,
        Err(Failure::Usage(e)) => return fail(2, &e),
        Err(Failure::Runtime(e)) => return fail(1, &e),
    };
    match run(&cli.cmd, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            fail(1, &e)
        }
    }
}
