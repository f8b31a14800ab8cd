//! JSONL wire format for model prediction records.
//!
//! The first line is a header `{format_version, model_id, k}`; each further
//! line is one masked slot with exactly `k` candidates in model order.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::corpus::{Corpus, MaskPlan};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum PredictionError {
    #[error("record stream is empty; expected a header line")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("unsupported format_version {0}")]
    UnsupportedVersion(u32),
    #[error("header declares k = 0")]
    ZeroK,
    #[error("record ({sentence_id}, {mask_index}) has {found} candidates but the header declares k = {expected}")]
    KMismatch {
        sentence_id: String,
        mask_index: usize,
        expected: usize,
        found: usize,
    },
    #[error("record ({sentence_id}, {mask_index}): score at rank {rank} is above the score at rank {prev_rank}", prev_rank = rank - 1)]
    ScoreOrder {
        sentence_id: String,
        mask_index: usize,
        rank: usize,
    },
    #[error("record ({sentence_id}, {mask_index}): score at rank {rank} is not a finite number")]
    NonFiniteScore {
        sentence_id: String,
        mask_index: usize,
        rank: usize,
    },
    #[error("record ({sentence_id}, {mask_index}): candidate at rank {rank} is marked both special and continuation")]
    SpecialContinuation {
        sentence_id: String,
        mask_index: usize,
        rank: usize,
    },
    #[error("duplicate record for ({sentence_id}, {mask_index}) on line {line}")]
    Duplicate {
        sentence_id: String,
        mask_index: usize,
        line: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub surface: String,
    #[serde(serialize_with = "serialize_score")]
    pub score: f64,
    /// 1-based position, implied by order on the wire.
    #[serde(skip)]
    pub rank: usize,
    pub is_subword_continuation: bool,
    pub is_special_token: bool,
}

impl Candidate {
    pub fn is_full_word(&self) -> bool {
        !self.is_subword_continuation && !self.is_special_token
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format_version: u32,
    pub model_id: String,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sentence_id: String,
    pub mask_index: usize,
    pub gold_surface: String,
    pub candidates: Vec<Candidate>,
    /// Set by a runner when the gold word spans several model pieces.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub multi_piece: bool,
}

impl PredictionRecord {
    pub fn key(&self) -> (String, usize) {
        (self.sentence_id.clone(), self.mask_index)
    }

    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    fn assign_ranks(&mut self) {
        for (i, c) in self.candidates.iter_mut().enumerate() {
            c.rank = i + 1;
        }
    }

    /// Checks score order, finiteness and flag consistency.
    pub fn validate(&self) -> Result<(), PredictionError> {
        let at = |rank| (self.sentence_id.clone(), self.mask_index, rank);
        for (i, c) in self.candidates.iter().enumerate() {
            let rank = i + 1;
            if !c.score.is_finite() {
                let (sentence_id, mask_index, rank) = at(rank);
                return Err(PredictionError::NonFiniteScore {
                    sentence_id,
                    mask_index,
                    rank,
                });
            }
            if c.is_special_token && c.is_subword_continuation {
                let (sentence_id, mask_index, rank) = at(rank);
                return Err(PredictionError::SpecialContinuation {
                    sentence_id,
                    mask_index,
                    rank,
                });
            }
            if i > 0 && c.score > self.candidates[i - 1].score {
                let (sentence_id, mask_index, rank) = at(rank);
                return Err(PredictionError::ScoreOrder {
                    sentence_id,
                    mask_index,
                    rank,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    pub header: RecordHeader,
    pub records: Vec<PredictionRecord>,
}

fn significant_digits(text: &str) -> usize {
    text.chars()
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count()
}

/// Decimal text for a score with at least five significant digits that
/// parses back to the same value.
pub fn format_score(x: f64) -> String {
    let shortest = format!("{x}");
    if x == 0.0 || significant_digits(&shortest) >= 5 {
        return shortest;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let places = (4 - magnitude).max(0) as usize;
    let padded = format!("{x:.places$}");
    if padded.parse::<f64>() == Ok(x) {
        padded
    } else {
        shortest
    }
}

fn serialize_score<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return Err(serde::ser::Error::custom("score is not finite"));
    }
    let raw = RawValue::from_string(format_score(*x)).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

fn json_error(line: usize, e: serde_json::Error) -> PredictionError {
    PredictionError::Json {
        line,
        message: e.to_string(),
    }
}

pub fn parse_records(stream: &str) -> Result<RecordSet, PredictionError> {
    let mut lines = stream.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines.next().ok_or(PredictionError::MissingHeader)?;
    let header: RecordHeader = serde_json::from_str(htext).map_err(|e| json_error(hline + 1, e))?;
    if header.format_version != FORMAT_VERSION {
        return Err(PredictionError::UnsupportedVersion(header.format_version));
    }
    if header.k == 0 {
        return Err(PredictionError::ZeroK);
    }
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, text) in lines {
        let line = i + 1;
        let mut record: PredictionRecord = serde_json::from_str(text).map_err(|e| json_error(line, e))?;
        record.assign_ranks();
        if record.k() != header.k {
            return Err(PredictionError::KMismatch {
                sentence_id: record.sentence_id,
                mask_index: record.mask_index,
                expected: header.k,
                found: record.candidates.len(),
            });
        }
        record.validate()?;
        if !seen.insert(record.key()) {
            return Err(PredictionError::Duplicate {
                sentence_id: record.sentence_id,
                mask_index: record.mask_index,
                line,
            });
        }
        records.push(record);
    }
    Ok(RecordSet { header, records })
}

pub fn serialize_records(set: &RecordSet) -> String {
    let mut out = serde_json::to_string(&set.header).expect("header serializes");
    out.push('\n');
    for r in &set.records {
        out.push_str(&serde_json::to_string(r).expect("records with finite scores serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoldMismatch {
    pub sentence_id: String,
    pub mask_index: usize,
    pub record_gold: String,
    /// Surface at that index in the corpus, or none when the index is invalid.
    pub corpus_surface: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub missing: Vec<(String, usize)>,
    pub spurious: Vec<(String, usize)>,
    pub gold_mismatches: Vec<GoldMismatch>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.spurious.is_empty() && self.gold_mismatches.is_empty()
    }
}

/// Compares a record set with the planned masks. The result lists are
/// sorted, so the report does not depend on input order.
pub fn validate_against_plan(records: &[PredictionRecord], corpus: &Corpus, plans: &[MaskPlan]) -> ValidationReport {
    let planned: BTreeSet<(String, usize)> = plans
        .iter()
        .flat_map(|p| p.mask_indices.iter().map(|&i| (p.sentence_id.clone(), i)))
        .collect();
    let mut by_key: HashMap<(String, usize), &PredictionRecord> = HashMap::new();
    for r in records {
        by_key.entry(r.key()).or_insert(r);
    }
    let present: BTreeSet<(String, usize)> = by_key.keys().cloned().collect();
    let missing = planned.difference(&present).cloned().collect();
    let spurious = present.difference(&planned).cloned().collect();
    let mut gold_mismatches: Vec<GoldMismatch> = by_key
        .values()
        .filter_map(|r| {
            let corpus_surface = corpus
                .sentence(&r.sentence_id)
                .and_then(|s| s.tokens.get(r.mask_index))
                .map(|t| t.surface.clone());
            (corpus_surface.as_deref() != Some(r.gold_surface.as_str())).then(|| GoldMismatch {
                sentence_id: r.sentence_id.clone(),
                mask_index: r.mask_index,
                record_gold: r.gold_surface.clone(),
                corpus_surface,
            })
        })
        .collect();
    gold_mismatches.sort();
    ValidationReport {
        missing,
        spurious,
        gold_mismatches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Domain, NcsLabel, Sentence, Structure, Token};

    fn cand_json(surface: &str, score: &str) -> String {
        format!(r#"{{"surface":"{surface}","score":{score},"is_subword_continuation":false,"is_special_token":false}}"#)
    }

    fn stream(k: usize, records: &[(&str, usize, &str, &[&str])]) -> String {
        let mut s = format!(r#"{{"format_version":1,"model_id":"m","k":{k}}}"#);
        s.push('\n');
        for (sid, idx, gold, scores) in records {
            let cands: Vec<String> = scores
                .iter()
                .enumerate()
                .map(|(i, sc)| cand_json(&format!("w{i}"), sc))
                .collect();
            s.push_str(&format!(
                r#"{{"sentence_id":"{sid}","mask_index":{idx},"gold_surface":"{gold}","candidates":[{}]}}"#,
                cands.join(",")
            ));
            s.push('\n');
        }
        s
    }

    #[test]
    fn sorted_scores_are_accepted() {
        let set = parse_records(&stream(3, &[("1.B", 0, "Oggi", &["0.9", "0.4", "0.1"])])).unwrap();
        assert_eq!(set.records.len(), 1);
        let ranks: Vec<usize> = set.records[0].candidates.iter().map(|c| c.rank).collect();
        assert_eq!(ranks, vec![1, 2, 3]);
    }

    #[test]
    fn unsorted_scores_are_rejected() {
        let err = parse_records(&stream(2, &[("1.B", 0, "Oggi", &["0.4", "0.9"])])).unwrap_err();
        assert_eq!(
            err,
            PredictionError::ScoreOrder {
                sentence_id: "1.B".into(),
                mask_index: 0,
                rank: 2
            }
        );
        assert!(err.to_string().contains("rank 2 is above the score at rank 1"));
    }

    #[test]
    fn k_mismatch_and_duplicates() {
        let err = parse_records(&stream(3, &[("1.B", 0, "Oggi", &["0.9", "0.4"])])).unwrap_err();
        assert!(matches!(
            err,
            PredictionError::KMismatch {
                expected: 3,
                found: 2,
                ..
            }
        ));
        let err = parse_records(&stream(1, &[("1.B", 0, "a", &["0.9"]), ("1.B", 0, "a", &["0.8"])])).unwrap_err();
        assert!(matches!(err, PredictionError::Duplicate { line: 3, .. }));
    }

    #[test]
    fn header_problems() {
        assert_eq!(parse_records("").unwrap_err(), PredictionError::MissingHeader);
        assert!(matches!(
            parse_records(r#"{"format_version":7,"model_id":"m","k":1}"#),
            Err(PredictionError::UnsupportedVersion(7))
        ));
        assert!(matches!(
            parse_records("{nope"),
            Err(PredictionError::Json { line: 1, .. })
        ));
    }

    #[test]
    fn scores_keep_five_significant_digits() {
        assert_eq!(format_score(0.83), "0.83000");
        assert_eq!(format_score(0.65383), "0.65383");
        assert_eq!(format_score(0.000071102), "0.000071102");
        assert_eq!(format_score(1.0), "1.0000");
        assert_eq!(format_score(0.0), "0");
        assert_eq!(format_score(0.123456789), "0.123456789");
    }

    #[test]
    fn serialize_then_parse_is_lossless() {
        let text = stream(
            2,
            &[
                ("11.B", 9, "esempi", &["0.65383", "0.000012"]),
                ("2.A", 1, "sola", &["0.5", "0.5"]),
            ],
        );
        let set = parse_records(&text).unwrap();
        let again = parse_records(&serialize_records(&set)).unwrap();
        assert_eq!(set, again);
        assert!(serialize_records(&set).contains(r#""score":0.50000"#));
    }

    fn corpus() -> Corpus {
        let tok = |s: &str| Token {
            surface: s.into(),
            pos: "NOUN".into(),
            is_content: true,
            is_elided: false,
            index: 0,
            lexicon_form: None,
            frequency_tally: false,
            inserted: false,
            variants: vec![],
        };
        let s = Sentence {
            id: "11.B".into(),
            domain: Domain::Newswire,
            structure: Structure::NonCanonical,
            ncs_labels: vec![NcsLabel::ParentheticalInsertion],
            tokens: vec![tok("libro"), tok("esempio")],
            masked_function: vec![],
            phrases: vec![],
            substitutions: vec![],
        };
        Corpus::from_parts(vec![s], vec![]).unwrap()
    }

    #[test]
    fn plan_validation_reports_missing_spurious_and_mismatch() {
        let c = corpus();
        let plans = c.mask_plans().unwrap();
        let set = parse_records(&stream(
            1,
            &[("11.B", 1, "esempi", &["0.6"]), ("11.B", 5, "x", &["0.1"])],
        ))
        .unwrap();
        let report = validate_against_plan(&set.records, &c, &plans);
        assert_eq!(report.missing, vec![("11.B".to_string(), 0)]);
        assert_eq!(report.spurious, vec![("11.B".to_string(), 5)]);
        assert_eq!(report.gold_mismatches.len(), 2);
        assert_eq!(report.gold_mismatches[0].corpus_surface.as_deref(), Some("esempio"));
        assert!(!report.is_clean());
        let mut reversed = set.records.clone();
        reversed.reverse();
        assert_eq!(validate_against_plan(&reversed, &c, &plans), report);
    }
}
