//! Core of the lexstress harness: frequency lexicon, annotated corpus,
//! prediction records, per-slot analysis, aggregate metrics and reports.

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod lexicon;
pub mod metrics;
pub mod pipeline;
pub mod predictions;
pub mod report;

pub use analysis::{CaseLabel, CategoryProfile, MaskOutcome, MatchBase, MatchPolicy};
pub use config::RunConfig;
pub use corpus::{Corpus, Domain, MaskPlan, MaskPolicy, Sentence, SentencePair, Structure, Token};
pub use lexicon::{BandThresholds, BandingMode, FrequencyBand, FrequencyLexicon, LexiconEntry};
pub use metrics::{BestPredictionRow, ComparisonRow, RatioSummary, TypologyCounts};
pub use pipeline::{EvalOptions, Evaluation, Inputs, PipelineError};
pub use predictions::{Candidate, PredictionRecord, RecordSet, ValidationReport};
pub use report::{Format, ReportBundle};
