//! Natural vocabulary induction from free-form point annotations.
//!
//! Stages: text normalization against an ontology lexicon, per-image point
//! clustering, co-occurrence disambiguation, post-processing, vocabulary
//! reduction and feature-space label specialization. [`simgen`] produces
//! synthetic corpora with ground truth and [`evalreport`] scores them.

pub mod clusterer;
pub mod disambiguator;
pub mod error;
pub mod evalreport;
pub mod io;
pub mod normalizer;
pub mod ontology;
pub mod pipeline;
pub mod postproc;
pub mod simgen;
pub mod specializer;
pub mod spelling;
pub mod vocab;

pub use clusterer::{cluster_corpus, cluster_image, PointCluster};
pub use disambiguator::{
    assign_meanings, build_graph, entity_weight, CoocGraph, Provenance, Status, VertexAssignment,
};
pub use error::{Error, Result};
pub use normalizer::{CandidateSet, Normalizer, PointAnnotation};
pub use ontology::{EntityId, Lexicon, Ontology};
pub use postproc::{DiscoveredWord, ResolvedPoint, StageStats};
pub use spelling::SpellConfig;
pub use vocab::{NaturalHierarchy, NaturalVocabulary, ReducedVocabulary};
