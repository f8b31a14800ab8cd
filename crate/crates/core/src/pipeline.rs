//! End-to-end evaluation: analyze every planned record on a worker pool,
//! then aggregate the outcomes into a report bundle.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{analyze_record, parse_pos_lookup, AnalysisError, MaskOutcome, MatchPolicy, PosLookup};
use crate::config::{parse_reference_totals, RunConfig};
use crate::corpus::{Corpus, CorpusError, Domain};
use crate::lexicon::{BandThresholds, FrequencyLexicon, LexiconError};
use crate::metrics::{
    accuracy_at_k, best_predictions_table, check_reported, comparison_row, oov_census, ratio_summary, sentence_scores,
    typology_table, MetricsError, ReportedTotals,
};
use crate::predictions::{parse_records, validate_against_plan, PredictionError, RecordSet, ValidationReport};
use crate::report::{AccuracySection, DomainComparison, ReportBundle, RunMetadata};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("missing input: no {0} path given")]
    MissingPath(&'static str),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Predictions(#[from] PredictionError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("k_limit {k_limit} exceeds the records' k = {k}")]
    KLimit { k_limit: usize, k: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

pub fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn input_error(path: &Path, e: impl ToString) -> PipelineError {
    PipelineError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: Corpus,
    pub lexicon: FrequencyLexicon,
    pub records: RecordSet,
    pub pos_lookup: Option<PosLookup>,
    pub reported: Vec<ReportedTotals>,
}

impl Inputs {
    /// Loads every input a config names. The POS lookup and reference totals
    /// are optional.
    pub fn load(cfg: &RunConfig) -> Result<Self, PipelineError> {
        let corpus_path = cfg.corpus.as_deref().ok_or(PipelineError::MissingPath("corpus"))?;
        let lexicon_path = cfg.lexicon.as_deref().ok_or(PipelineError::MissingPath("lexicon"))?;
        let records_path = cfg.records.as_deref().ok_or(PipelineError::MissingPath("records"))?;
        let corpus = Corpus::from_json(&read_text(corpus_path)?).map_err(|e| input_error(corpus_path, e))?;
        let lexicon = FrequencyLexicon::from_tsv(&read_text(lexicon_path)?, &cfg.thresholds)
            .map_err(|e| input_error(lexicon_path, e))?;
        let records = parse_records(&read_text(records_path)?).map_err(|e| input_error(records_path, e))?;
        let pos_lookup = cfg
            .pos_lookup
            .as_deref()
            .map(|p| read_text(p).and_then(|t| parse_pos_lookup(&t).map_err(|e| input_error(p, e))))
            .transpose()?;
        let reported = cfg
            .reference_totals
            .as_deref()
            .map(|p| read_text(p).and_then(|t| parse_reference_totals(&t).map_err(|e| input_error(p, e))))
            .transpose()?
            .unwrap_or_default();
        Ok(Self {
            corpus,
            lexicon,
            records,
            pos_lookup,
            reported,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub policy: MatchPolicy,
    pub thresholds: BandThresholds,
    pub k_limit: Option<usize>,
    pub best_threshold: f64,
    pub workers: usize,
}

impl EvalOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            policy: cfg.match_policy(),
            thresholds: cfg.thresholds,
            k_limit: cfg.k_limit,
            best_threshold: cfg.best_threshold,
            workers: cfg.workers,
        }
    }
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self::from_config(&RunConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Sorted by corpus order, then mask index.
    pub outcomes: Vec<MaskOutcome>,
    pub validation: ValidationReport,
}

/// Validates the records against the corpus plans and analyzes every
/// planned record. Unplanned records are reported and skipped.
pub fn evaluate(inputs: &Inputs, opts: &EvalOptions) -> Result<Evaluation, PipelineError> {
    let plans = inputs.corpus.mask_plans()?;
    let validation = validate_against_plan(&inputs.records.records, &inputs.corpus, &plans);
    let planned: BTreeSet<(String, usize)> = plans
        .iter()
        .flat_map(|p| p.mask_indices.iter().map(|&i| (p.sentence_id.clone(), i)))
        .collect();
    let todo: Vec<_> = inputs
        .records
        .records
        .iter()
        .filter(|r| planned.contains(&r.key()))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let mut outcomes = pool.install(|| {
        todo.par_iter()
            .map(|r| {
                analyze_record(
                    r,
                    &inputs.corpus,
                    &inputs.lexicon,
                    opts.policy,
                    inputs.pos_lookup.as_ref(),
                )
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    outcomes.sort_by_key(|o| (inputs.corpus.position(&o.sentence_id), o.mask_index));
    Ok(Evaluation { outcomes, validation })
}

fn accuracy_section(
    outcomes: &[MaskOutcome],
    k: usize,
    k_limit: usize,
) -> Result<Option<AccuracySection>, PipelineError> {
    if outcomes.is_empty() {
        return Ok(None);
    }
    let at = |limit| {
        outcomes
            .iter()
            .filter(|o| o.match_rank.is_some_and(|r| r <= limit))
            .count()
    };
    Ok(Some(AccuracySection {
        n_masks: outcomes.len(),
        recognized: at(k),
        accuracy_pct: accuracy_at_k(outcomes, k)? * 100.0,
        k_limit,
        recognized_at_limit: at(k_limit),
        accuracy_at_limit_pct: accuracy_at_k(outcomes, k_limit)? * 100.0,
        recognized_in_first_3: at(3.min(k)),
        accuracy_first_3_pct: accuracy_at_k(outcomes, 3.min(k))? * 100.0,
    }))
}

/// Comparison rows and ratio summaries, one block per domain that has pairs.
pub fn comparisons(
    inputs: &Inputs,
    outcomes: &[MaskOutcome],
    thresholds: &BandThresholds,
) -> Result<Vec<DomainComparison>, PipelineError> {
    let mut by_sentence: HashMap<&str, Vec<MaskOutcome>> = HashMap::new();
    for o in outcomes {
        by_sentence.entry(o.sentence_id.as_str()).or_default().push(o.clone());
    }
    let mut out = Vec::new();
    for domain in [Domain::Poetry, Domain::Newswire] {
        let mut rows = Vec::new();
        for pair in inputs.corpus.pairs() {
            let Some(nc) = inputs.corpus.sentence(&pair.noncanonical_id) else {
                continue;
            };
            if nc.domain != domain {
                continue;
            }
            let get = |id: &str| by_sentence.get(id).map(Vec::as_slice).unwrap_or(&[]);
            rows.push(comparison_row(
                pair,
                &inputs.corpus,
                get(&pair.noncanonical_id),
                get(&pair.canonical_id),
                &inputs.lexicon,
                thresholds,
            )?);
        }
        if rows.is_empty() {
            continue;
        }
        let (summary, summary_error) = match ratio_summary(&rows) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let reported = inputs.reported.iter().find(|r| r.domain == domain).cloned();
        let discrepancies = match (&summary, &reported) {
            (Some(s), Some(r)) => check_reported(s, r),
            _ => vec![],
        };
        out.push(DomainComparison {
            domain,
            rows,
            summary,
            summary_error,
            reported,
            discrepancies,
        });
    }
    Ok(out)
}

pub fn build_bundle(inputs: &Inputs, opts: &EvalOptions, eval: &Evaluation) -> Result<ReportBundle, PipelineError> {
    let k = inputs.records.header.k;
    let k_limit = opts.k_limit.unwrap_or(k);
    if k_limit > k || k_limit == 0 {
        return Err(PipelineError::KLimit { k_limit, k });
    }
    let outcomes = &eval.outcomes;
    let mut bundle = ReportBundle {
        metadata: RunMetadata {
            model_id: inputs.records.header.model_id.clone(),
            k,
            k_limit,
            policy: opts.policy,
            thresholds: opts.thresholds,
            best_threshold: opts.best_threshold,
        },
        validation: eval.validation.clone(),
        accuracy: accuracy_section(outcomes, k, k_limit)?,
        typology: typology_table(outcomes),
        comparisons: comparisons(inputs, outcomes, &opts.thresholds)?,
        best_predictions: best_predictions_table(outcomes, &inputs.corpus, opts.best_threshold),
        predictability: sentence_scores(outcomes, &inputs.corpus),
        oov_census: oov_census(outcomes),
    };
    bundle.canonicalize();
    Ok(bundle)
}

/// Validation, analysis and aggregation in one call.
pub fn run(inputs: &Inputs, opts: &EvalOptions) -> Result<(Evaluation, ReportBundle), PipelineError> {
    let eval = evaluate(inputs, opts)?;
    let bundle = build_bundle(inputs, opts, &eval)?;
    Ok((eval, bundle))
}
