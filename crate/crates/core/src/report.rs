//! Report bundle and its Markdown, CSV and JSON renderings.
//!
//! Every number in a bundle is produced upstream; rendering only formats.
//! Rendering is deterministic: a bundle is sorted canonically before output.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::MatchPolicy;
use crate::corpus::{sentence_number, Domain};
use crate::lexicon::BandThresholds;
use crate::metrics::{
    BestPredictionRow, CensusEntry, ComparisonRow, Discrepancy, LexicalType, RatioSummary, ReportedTotals,
    SentenceScore, TypologyCounts,
};
use crate::predictions::{format_score, ValidationReport};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown report format {0:?} (expected markdown, csv or json)")]
    UnknownFormat(String),
    #[error("failed to write CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("report JSON is invalid: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model_id: String,
    pub k: usize,
    pub k_limit: usize,
    pub policy: MatchPolicy,
    pub thresholds: BandThresholds,
    pub best_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySection {
    pub n_masks: usize,
    pub recognized: usize,
    pub accuracy_pct: f64,
    pub k_limit: usize,
    pub recognized_at_limit: usize,
    pub accuracy_at_limit_pct: f64,
    pub recognized_in_first_3: usize,
    pub accuracy_first_3_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainComparison {
    pub domain: Domain,
    pub rows: Vec<ComparisonRow>,
    pub summary: Option<RatioSummary>,
    /// Why the summary is missing, when it is.
    pub summary_error: Option<String>,
    pub reported: Option<ReportedTotals>,
    pub discrepancies: Vec<Discrepancy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metadata: RunMetadata,
    pub validation: ValidationReport,
    pub accuracy: Option<AccuracySection>,
    pub typology: TypologyCounts,
    pub comparisons: Vec<DomainComparison>,
    pub best_predictions: Vec<BestPredictionRow>,
    pub predictability: Vec<SentenceScore>,
    pub oov_census: Vec<CensusEntry>,
}

fn id_key(id: &str) -> (u64, String) {
    (sentence_number(id).parse().unwrap_or(u64::MAX), id.to_string())
}

impl ReportBundle {
    /// Sorts every table into its canonical order.
    pub fn canonicalize(&mut self) {
        self.comparisons.sort_by_key(|c| c.domain);
        for c in &mut self.comparisons {
            c.rows.sort_by_key(|r| id_key(&r.pair_id));
        }
        self.best_predictions.sort_by(|a, b| {
            id_key(&a.sentence)
                .cmp(&id_key(&b.sentence))
                .then_with(|| a.gold.cmp(&b.gold))
        });
        self.predictability.sort_by_key(|s| id_key(&s.sentence_id));
        self.oov_census.sort_by(|a, b| {
            id_key(&a.sentence_id)
                .cmp(&id_key(&b.sentence_id))
                .then(a.mask_index.cmp(&b.mask_index))
        });
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub fn render(bundle: &ReportBundle, format: Format) -> Result<Vec<Document>, ReportError> {
    let mut b = bundle.clone();
    b.canonicalize();
    match format {
        Format::Markdown => Ok(vec![Document {
            name: "report.md".into(),
            bytes: render_markdown(&b).into_bytes(),
        }]),
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&b)?;
            text.push('\n');
            Ok(vec![Document {
                name: "report.json".into(),
                bytes: text.into_bytes(),
            }])
        }
        Format::Csv => render_csv(&b),
    }
}

fn ratio(x: f64) -> String {
    format!("{x:.3}")
}

fn pct(x: f64) -> String {
    format!("{x:.2}%")
}

fn table_header(out: &mut String, cols: &[&str]) {
    let _ = writeln!(out, "| {} |", cols.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
}

fn table_row(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "| {} |", cells.join(" | "));
}

pub const COMPARISON_HEADERS: [&str; 6] = [
    "Sent. No.",
    "No. Words/Masked",
    "Non Canon. Words",
    "Canon. Words",
    "High Freq. Words",
    "Low Freq. Words",
];

fn domain_title(d: Domain) -> &'static str {
    match d {
        Domain::Poetry => "Poetry",
        Domain::Newswire => "Newswire",
    }
}

/// Comparison tables, one per domain, with totals, ratios and any
/// disagreement with printed reference totals.
pub fn comparisons_markdown(comparisons: &[DomainComparison]) -> String {
    let mut out = String::new();
    for c in comparisons {
        let _ = writeln!(out, "### {} sentences\n", domain_title(c.domain));
        table_header(&mut out, &COMPARISON_HEADERS);
        for r in &c.rows {
            table_row(
                &mut out,
                &[
                    r.pair_id.clone(),
                    format!("{}/{}", r.n_words, r.n_masked),
                    r.noncanon_recognized.to_string(),
                    r.canon_recognized.to_string(),
                    r.high_count.to_string(),
                    format!("{}/{}", r.low_count, r.beyond_vocab_count),
                ],
            );
        }
        if let Some(s) = &c.summary {
            let t = &s.totals;
            table_row(
                &mut out,
                &[
                    "Totals".into(),
                    format!("{}/{}", t.n_words, t.n_masked),
                    t.noncanon_recognized.to_string(),
                    t.canon_recognized.to_string(),
                    t.high_count.to_string(),
                    format!("{}/{}", t.low_count, t.beyond_vocab_count),
                ],
            );
            table_row(
                &mut out,
                &[
                    "Ratios".into(),
                    ratio(s.masked_ratio),
                    ratio(s.structure_ratio),
                    String::new(),
                    String::new(),
                    ratio(s.lowfreq_ratio),
                ],
            );
        }
        out.push('\n');
        if let Some(e) = &c.summary_error {
            let _ = writeln!(out, "Ratios unavailable: {e}\n");
        }
        if !c.discrepancies.is_empty() {
            out.push_str("Printed reference totals disagree with the row sums:\n\n");
            for d in &c.discrepancies {
                let _ = writeln!(out, "- {}: printed {}, rows give {}", d.field, d.printed, d.derived);
            }
            out.push('\n');
        }
    }
    out
}

fn slot_list(xs: &[String]) -> String {
    if xs.is_empty() {
        "-".into()
    } else {
        xs.join(", ")
    }
}

pub fn census_markdown(census: &[CensusEntry]) -> String {
    let mut out = String::new();
    for e in census {
        let case = e.case_letter.map(|c| format!("case {c}, ")).unwrap_or_default();
        let _ = writeln!(
            out,
            "- {} #{} \"{}\" ({case}{})",
            e.sentence_id, e.mask_index, e.gold, e.label
        );
        let _ = writeln!(
            out,
            "  SUBWORD UNITS = {} // LEGAL = {} // FULL = {}",
            slot_list(&e.nonwords),
            slot_list(&e.legal),
            slot_list(&e.substitutions)
        );
    }
    out
}

fn lexical(t: LexicalType) -> &'static str {
    match t {
        LexicalType::Content => "Content",
        LexicalType::Function => "Function",
    }
}

fn render_markdown(b: &ReportBundle) -> String {
    let m = &b.metadata;
    let mut out = String::from("# Masked word prediction report\n\n");
    let _ = writeln!(
        out,
        "Model `{}`, k = {}, k limit {}, policy {}, banding {:?}, best-prediction threshold {}.\n",
        m.model_id, m.k, m.k_limit, m.policy, m.thresholds.banding_mode, m.best_threshold
    );

    out.push_str("## Validation\n\n");
    let v = &b.validation;
    if v.is_clean() {
        out.push_str("All planned masks have exactly one record.\n\n");
    } else {
        let _ = writeln!(
            out,
            "{} missing, {} spurious, {} gold mismatches.\n",
            v.missing.len(),
            v.spurious.len(),
            v.gold_mismatches.len()
        );
        for (s, i) in &v.missing {
            let _ = writeln!(out, "- missing ({s}, {i})");
        }
        for (s, i) in &v.spurious {
            let _ = writeln!(out, "- spurious ({s}, {i})");
        }
        for g in &v.gold_mismatches {
            let corpus = g.corpus_surface.as_deref().unwrap_or("<no token>");
            let _ = writeln!(
                out,
                "- gold mismatch ({}, {}): record {:?}, corpus {:?}",
                g.sentence_id, g.mask_index, g.record_gold, corpus
            );
        }
        out.push('\n');
    }

    out.push_str("## Accuracy\n\n");
    table_header(
        &mut out,
        &[
            "Total Masked",
            "Correctly Rec.",
            "Accuracy",
            "Limit",
            "Rec. within Limit",
            "Accuracy within Limit",
            "Rec. in First 3",
            "Accuracy in First 3",
        ],
    );
    if let Some(a) = &b.accuracy {
        table_row(
            &mut out,
            &[
                a.n_masks.to_string(),
                a.recognized.to_string(),
                pct(a.accuracy_pct),
                a.k_limit.to_string(),
                a.recognized_at_limit.to_string(),
                pct(a.accuracy_at_limit_pct),
                a.recognized_in_first_3.to_string(),
                pct(a.accuracy_first_3_pct),
            ],
        );
    }
    out.push('\n');

    out.push_str("## Typology of recognized words\n\n");
    let t = &b.typology;
    table_header(
        &mut out,
        &[
            "Recognized",
            "Function Ws.",
            "In First 3",
            "Function in First 3",
            "Semantic Ws.",
            "Ratio of Semantic Ws.",
        ],
    );
    let ratio_cell = if t.ratio_defined {
        pct(t.content_ratio * 100.0)
    } else {
        "n/a".into()
    };
    table_row(
        &mut out,
        &[
            t.recognized_total.to_string(),
            t.recognized_function.to_string(),
            t.recognized_in_first_3.to_string(),
            t.function_in_first_3.to_string(),
            t.content_recognized.to_string(),
            ratio_cell,
        ],
    );
    out.push('\n');

    out.push_str("## Structure comparison\n\n");
    out.push_str(&comparisons_markdown(&b.comparisons));

    let _ = writeln!(out, "## Best predictions above {}\n", m.best_threshold);
    table_header(
        &mut out,
        &[
            "Sent. No.",
            "Masked Word",
            "Score",
            "Structure",
            "Phrase Including",
            "Lexical Type",
        ],
    );
    for r in &b.best_predictions {
        table_row(
            &mut out,
            &[
                r.sentence.clone(),
                r.gold.clone(),
                format_score(r.score),
                r.structure.to_string(),
                r.phrase.clone(),
                lexical(r.lexical_type).into(),
            ],
        );
    }
    out.push('\n');

    out.push_str("## Sentence predictability\n\n");
    table_header(&mut out, &["Sentence", "Masked Slots", "Score"]);
    for s in &b.predictability {
        table_row(
            &mut out,
            &[s.sentence_id.clone(), s.slots.to_string(), format!("{:.5}", s.score)],
        );
    }
    out.push('\n');

    out.push_str("## Missed words\n\n");
    out.push_str(&census_markdown(&b.oov_census));
    out
}

fn csv_document(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Document, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Always)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(Document {
        name: name.into(),
        bytes,
    })
}

fn render_csv(b: &ReportBundle) -> Result<Vec<Document>, ReportError> {
    let mut docs = Vec::new();
    let accuracy = b
        .accuracy
        .iter()
        .map(|a| {
            vec![
                a.n_masks.to_string(),
                a.recognized.to_string(),
                format!("{:.2}", a.accuracy_pct),
                a.k_limit.to_string(),
                a.recognized_at_limit.to_string(),
                format!("{:.2}", a.accuracy_at_limit_pct),
                a.recognized_in_first_3.to_string(),
                format!("{:.2}", a.accuracy_first_3_pct),
            ]
        })
        .collect();
    docs.push(csv_document(
        "report_accuracy.csv",
        &[
            "n_masks",
            "recognized",
            "accuracy_pct",
            "k_limit",
            "recognized_at_limit",
            "accuracy_at_limit_pct",
            "recognized_in_first_3",
            "accuracy_first_3_pct",
        ],
        accuracy,
    )?);
    let t = &b.typology;
    docs.push(csv_document(
        "report_typology.csv",
        &[
            "recognized",
            "function",
            "in_first_3",
            "function_in_first_3",
            "content",
            "content_ratio_pct",
        ],
        vec![vec![
            t.recognized_total.to_string(),
            t.recognized_function.to_string(),
            t.recognized_in_first_3.to_string(),
            t.function_in_first_3.to_string(),
            t.content_recognized.to_string(),
            format!("{:.2}", t.content_ratio * 100.0),
        ]],
    )?);
    for c in &b.comparisons {
        let rows = c
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.pair_id.clone(),
                    r.n_words.to_string(),
                    r.n_masked.to_string(),
                    r.noncanon_recognized.to_string(),
                    r.canon_recognized.to_string(),
                    r.high_count.to_string(),
                    r.low_count.to_string(),
                    r.beyond_vocab_count.to_string(),
                ]
            })
            .collect();
        docs.push(csv_document(
            &format!("report_comparison_{}.csv", c.domain),
            &[
                "pair",
                "n_words",
                "n_masked",
                "noncanon_recognized",
                "canon_recognized",
                "high",
                "low",
                "beyond_vocab",
            ],
            rows,
        )?);
    }
    let best = b
        .best_predictions
        .iter()
        .map(|r| {
            vec![
                r.sentence.clone(),
                r.gold.clone(),
                format_score(r.score),
                r.structure.to_string(),
                r.phrase.clone(),
                lexical(r.lexical_type).into(),
            ]
        })
        .collect();
    docs.push(csv_document(
        "report_best.csv",
        &["sentence", "gold", "score", "structure", "phrase", "lexical_type"],
        best,
    )?);
    let scores = b
        .predictability
        .iter()
        .map(|s| vec![s.sentence_id.clone(), s.slots.to_string(), format!("{:.5}", s.score)])
        .collect();
    docs.push(csv_document(
        "report_predictability.csv",
        &["sentence", "slots", "score"],
        scores,
    )?);
    let census = b
        .oov_census
        .iter()
        .map(|e| {
            vec![
                e.sentence_id.clone(),
                e.mask_index.to_string(),
                e.gold.clone(),
                e.label.to_string(),
                e.case_letter.map(String::from).unwrap_or_default(),
                e.nonwords.join(" "),
                e.legal.join(" "),
                e.substitutions.join(" "),
            ]
        })
        .collect();
    docs.push(csv_document(
        "report_oov.csv",
        &[
            "sentence",
            "mask_index",
            "gold",
            "label",
            "case",
            "nonwords",
            "legal",
            "substitutions",
        ],
        census,
    )?);
    Ok(docs)
}
