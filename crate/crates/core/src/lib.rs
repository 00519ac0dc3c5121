//! Evaluation harness for comic-mediated multimodal reasoning.
//!
//! A comic — a grid of panels read in order — is used as the intermediate
//! reasoning artifact between a benchmark question and its answer. The
//! harness drives black-box image-generation and reasoning models through
//! two execution paths (answer read from the final panel, or comic handed
//! to a reasoner as context), perturbs panel sequences to probe temporal
//! structure, scores the results, models generation cost against
//! per-second video pricing, and ships an exact simulator for the
//! information-theoretic account of why few panels beat many frames.
//!
//! Modules map onto the moving parts:
//!
//! - [`domain`] — questions, panels, artifacts, evaluation records, ledgers
//! - [`datasets`] — benchmark ingest and deterministic sampling
//! - [`prompts`] — pinned prompt templates and their rendering rules
//! - [`providers`] — model clients with caching, retries, and mocks
//! - [`panels`] — composite segmentation and recomposition
//! - [`perturb`] — seeded shuffle and deletion plans over panel sequences
//! - [`pipeline`] — single-question paths and resumable batch execution
//! - [`scoring`] — answer normalization, accuracy, histograms, cost model
//! - [`infotheory`] — exact mutual information on finite joints
//! - [`report`] — static HTML/SVG/CSV reports and review sheets

pub mod datasets;
pub mod domain;
pub mod infotheory;
pub mod panels;
pub mod perturb;
pub mod pipeline;
pub mod prompts;
pub mod providers;
pub mod report;
pub mod scoring;

pub use domain::{content_digest, ComicArtifact, ContentDigest, EvalRecord, Question, RunLedger};
