//! Aggregate statistics over slot outcomes: accuracy, recognition typology,
//! pair comparison rows and their ratios, best-prediction extraction,
//! predictability per sentence and surprisal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{sentence_predictability, CaseLabel, MaskOutcome};
use crate::corpus::{Corpus, Domain, SentencePair, Structure};
use crate::lexicon::{BandThresholds, FrequencyBand, FrequencyLexicon};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no outcomes to aggregate")]
    Empty,
    #[error("k_limit {k_limit} exceeds the record candidate count {k}")]
    KLimitTooLarge { k_limit: usize, k: usize },
    #[error("pair {0}: the two versions were evaluated with different k ({1} vs {2})")]
    DifferentK(String, usize, usize),
    #[error("sentence {0} is not in the corpus")]
    UnknownSentence(String),
    #[error("{0} ratio is undefined: its denominator is zero")]
    ZeroDenominator(&'static str),
    #[error("surprisal needs 0 < p <= 1, got {0}")]
    Probability(f64),
}

pub fn round_places(x: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (x * f).round() / f
}

pub fn accuracy_at_k(outcomes: &[MaskOutcome], k_limit: usize) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(o) = outcomes.iter().find(|o| k_limit > o.k) {
        return Err(MetricsError::KLimitTooLarge { k_limit, k: o.k });
    }
    let hits = outcomes
        .iter()
        .filter(|o| o.match_rank.is_some_and(|r| r <= k_limit))
        .count();
    Ok(hits as f64 / outcomes.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypologyCounts {
    pub n_masks: usize,
    pub recognized_total: usize,
    pub recognized_function: usize,
    pub recognized_in_first_3: usize,
    pub function_in_first_3: usize,
    pub content_recognized: usize,
    pub content_ratio: f64,
    /// False when nothing was recognized and the ratio is reported as 0.
    pub ratio_defined: bool,
}

pub fn typology_table(outcomes: &[MaskOutcome]) -> TypologyCounts {
    let recognized: Vec<&MaskOutcome> = outcomes.iter().filter(|o| o.recognized).collect();
    let function = recognized.iter().filter(|o| !o.is_content).count();
    let first3: Vec<&&MaskOutcome> = recognized.iter().filter(|o| o.in_first_3).collect();
    let function3 = first3.iter().filter(|o| !o.is_content).count();
    let content = recognized.len() - function;
    let ratio_defined = !recognized.is_empty();
    TypologyCounts {
        n_masks: outcomes.len(),
        recognized_total: recognized.len(),
        recognized_function: function,
        recognized_in_first_3: first3.len(),
        function_in_first_3: function3,
        content_recognized: content,
        content_ratio: if ratio_defined {
            content as f64 / recognized.len() as f64
        } else {
            0.0
        },
        ratio_defined,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub pair_id: String,
    pub domain: Domain,
    pub n_words: usize,
    pub n_masked: usize,
    pub noncanon_recognized: usize,
    pub canon_recognized: usize,
    pub high_count: usize,
    pub low_count: usize,
    pub beyond_vocab_count: usize,
}

fn common_k(pair: &SentencePair, nc: &[MaskOutcome], c: &[MaskOutcome]) -> Result<(), MetricsError> {
    let mut ks = nc.iter().chain(c).map(|o| o.k);
    if let Some(first) = ks.next() {
        if let Some(other) = ks.find(|&k| k != first) {
            return Err(MetricsError::DifferentK(pair.noncanonical_id.clone(), first, other));
        }
    }
    Ok(())
}

/// One row of a structure comparison table.
///
/// Frequency columns count the non-canonical words flagged for tallying in
/// the corpus; a sentence with no flagged word falls back to its masked words.
pub fn comparison_row(
    pair: &SentencePair,
    corpus: &Corpus,
    outcomes_noncanon: &[MaskOutcome],
    outcomes_canon: &[MaskOutcome],
    lexicon: &FrequencyLexicon,
    thresholds: &BandThresholds,
) -> Result<ComparisonRow, MetricsError> {
    common_k(pair, outcomes_noncanon, outcomes_canon)?;
    let nc = corpus
        .sentence(&pair.noncanonical_id)
        .ok_or_else(|| MetricsError::UnknownSentence(pair.noncanonical_id.clone()))?;
    let flagged: Vec<&str> = nc
        .tokens
        .iter()
        .filter(|t| t.frequency_tally)
        .map(|t| t.lookup_form())
        .collect();
    let tallied: Vec<&str> = if flagged.is_empty() {
        outcomes_noncanon
            .iter()
            .filter_map(|o| nc.tokens.get(o.mask_index))
            .map(|t| t.lookup_form())
            .collect()
    } else {
        flagged
    };
    let (mut high, mut low, mut beyond) = (0, 0, 0);
    for form in tallied {
        match lexicon.band_of(thresholds, form) {
            FrequencyBand::High => high += 1,
            FrequencyBand::Low => low += 1,
            _ => beyond += 1,
        }
    }
    Ok(ComparisonRow {
        pair_id: pair.noncanonical_id.clone(),
        domain: nc.domain,
        n_words: nc.tokens.len(),
        n_masked: outcomes_noncanon.len(),
        noncanon_recognized: outcomes_noncanon.iter().filter(|o| o.recognized).count(),
        canon_recognized: outcomes_canon.iter().filter(|o| o.recognized).count(),
        high_count: high,
        low_count: low,
        beyond_vocab_count: beyond,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub n_words: usize,
    pub n_masked: usize,
    pub noncanon_recognized: usize,
    pub canon_recognized: usize,
    pub high_count: usize,
    pub low_count: usize,
    pub beyond_vocab_count: usize,
}

impl Totals {
    pub fn of(rows: &[ComparisonRow]) -> Self {
        rows.iter().fold(Self::default(), |t, r| Self {
            n_words: t.n_words + r.n_words,
            n_masked: t.n_masked + r.n_masked,
            noncanon_recognized: t.noncanon_recognized + r.noncanon_recognized,
            canon_recognized: t.canon_recognized + r.canon_recognized,
            high_count: t.high_count + r.high_count,
            low_count: t.low_count + r.low_count,
            beyond_vocab_count: t.beyond_vocab_count + r.beyond_vocab_count,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub totals: Totals,
    pub masked_ratio: f64,
    pub structure_ratio: f64,
    /// Beyond-vocabulary words weigh double.
    pub lowfreq_ratio: f64,
}

pub fn ratio_summary(rows: &[ComparisonRow]) -> Result<RatioSummary, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    let t = Totals::of(rows);
    let ratio = |num: usize, den: usize, name| {
        if den == 0 {
            Err(MetricsError::ZeroDenominator(name))
        } else {
            Ok(num as f64 / den as f64)
        }
    };
    Ok(RatioSummary {
        masked_ratio: ratio(t.n_masked, t.n_words, "masked")?,
        structure_ratio: ratio(t.noncanon_recognized, t.canon_recognized, "structure")?,
        lowfreq_ratio: ratio(t.low_count + 2 * t.beyond_vocab_count, t.high_count, "low-frequency")?,
        totals: t,
    })
}

/// Totals and ratios as printed in a published table, for cross-checking.
/// Ratios are kept as text so their printed precision is known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportedTotals {
    pub domain: Domain,
    pub totals: Totals,
    pub masked_ratio: String,
    pub structure_ratio: String,
    pub lowfreq_ratio: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub field: String,
    pub printed: String,
    pub derived: String,
}

fn decimals(text: &str) -> i32 {
    text.split_once('.').map_or(0, |(_, frac)| frac.len() as i32)
}

/// Lists every printed value the row-derived summary disagrees with. A
/// printed ratio agrees when it equals the derived ratio at its own precision.
pub fn check_reported(summary: &RatioSummary, reported: &ReportedTotals) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    let (d, p) = (&summary.totals, &reported.totals);
    let counts = [
        ("n_words", d.n_words, p.n_words),
        ("n_masked", d.n_masked, p.n_masked),
        ("noncanon_recognized", d.noncanon_recognized, p.noncanon_recognized),
        ("canon_recognized", d.canon_recognized, p.canon_recognized),
        ("high_count", d.high_count, p.high_count),
        ("low_count", d.low_count, p.low_count),
        ("beyond_vocab_count", d.beyond_vocab_count, p.beyond_vocab_count),
    ];
    for (field, derived, printed) in counts {
        if derived != printed {
            out.push(Discrepancy {
                field: field.into(),
                printed: printed.to_string(),
                derived: derived.to_string(),
            });
        }
    }
    let ratios = [
        ("masked_ratio", summary.masked_ratio, &reported.masked_ratio),
        ("structure_ratio", summary.structure_ratio, &reported.structure_ratio),
        ("lowfreq_ratio", summary.lowfreq_ratio, &reported.lowfreq_ratio),
    ];
    for (field, derived, printed) in ratios {
        let places = decimals(printed);
        let agrees = printed
            .parse::<f64>()
            .is_ok_and(|v| (round_places(derived, places) - v).abs() < 1e-9);
        if !agrees {
            out.push(Discrepancy {
                field: field.into(),
                printed: printed.clone(),
                derived: format!("{derived:.3}"),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexicalType {
    Content,
    Function,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPredictionRow {
    pub sentence: String,
    pub gold: String,
    pub score: f64,
    pub structure: Structure,
    pub phrase: String,
    pub lexical_type: LexicalType,
}

type RowKey = ((u64, String), String);

fn numeric_key(number: &str) -> (u64, String) {
    (number.parse().unwrap_or(u64::MAX), number.to_string())
}

/// Recognized slots scoring above `threshold`, one row per sentence number
/// and gold word. When both versions qualify the higher score is shown, the
/// non-canonical one on a tie, so a row never changes as the threshold rises.
pub fn best_predictions_table(outcomes: &[MaskOutcome], corpus: &Corpus, threshold: f64) -> Vec<BestPredictionRow> {
    let mut best: BTreeMap<RowKey, (&MaskOutcome, String)> = BTreeMap::new();
    for o in outcomes
        .iter()
        .filter(|o| o.recognized && o.effective_score > threshold)
    {
        let Some(sentence) = corpus.sentence(&o.sentence_id) else {
            continue;
        };
        let key = (numeric_key(sentence.number()), o.gold_surface.clone());
        if best.get(&key).is_none_or(|(cur, _)| preferred(o, cur)) {
            best.insert(key, (o, sentence.phrase_for(o.mask_index)));
        }
    }
    best.into_iter()
        .map(|(((_, number), gold), (o, phrase))| BestPredictionRow {
            sentence: number,
            gold,
            score: o.effective_score,
            structure: o.structure,
            phrase,
            lexical_type: if o.is_content {
                LexicalType::Content
            } else {
                LexicalType::Function
            },
        })
        .collect()
}

fn preferred(a: &MaskOutcome, b: &MaskOutcome) -> bool {
    match a.effective_score.total_cmp(&b.effective_score) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a.structure < b.structure,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub sentence_id: String,
    pub slots: usize,
    pub score: f64,
}

/// Predictability per sentence, in corpus order. Sentences without any
/// outcome are skipped.
pub fn sentence_scores(outcomes: &[MaskOutcome], corpus: &Corpus) -> Vec<SentenceScore> {
    let mut groups: BTreeMap<usize, Vec<MaskOutcome>> = BTreeMap::new();
    for o in outcomes {
        let pos = corpus.position(&o.sentence_id).unwrap_or(usize::MAX);
        groups.entry(pos).or_default().push(o.clone());
    }
    groups
        .into_values()
        .filter_map(|g| {
            let score = sentence_predictability(&g).ok()?;
            Some(SentenceScore {
                sentence_id: g[0].sentence_id.clone(),
                slots: g.len(),
                score,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusEntry {
    pub sentence_id: String,
    pub mask_index: usize,
    pub gold: String,
    pub label: CaseLabel,
    pub case_letter: Option<char>,
    pub substitutions: Vec<String>,
    pub legal: Vec<String>,
    pub nonwords: Vec<String>,
}

/// Every missed slot with its case label and candidate breakdown.
pub fn oov_census(outcomes: &[MaskOutcome]) -> Vec<CensusEntry> {
    outcomes
        .iter()
        .filter(|o| !o.recognized)
        .map(|o| {
            let p = o.partition.clone().unwrap_or_default();
            CensusEntry {
                sentence_id: o.sentence_id.clone(),
                mask_index: o.mask_index,
                gold: o.gold_surface.clone(),
                label: o.case_label,
                case_letter: o.case_label.case_letter(),
                substitutions: p.substitutions,
                legal: p.legal,
                nonwords: p.nonwords,
            }
        })
        .collect()
}

pub fn surprisal(p: f64) -> Result<f64, MetricsError> {
    if p.is_nan() || p <= 0.0 || p > 1.0 {
        return Err(MetricsError::Probability(p));
    }
    Ok(-p.log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(rank: Option<usize>, content: bool) -> MaskOutcome {
        MaskOutcome {
            sentence_id: "1.B".into(),
            mask_index: 0,
            gold_surface: "x".into(),
            domain: Domain::Newswire,
            structure: Structure::NonCanonical,
            is_content: content,
            k: 10,
            recognized: rank.is_some(),
            match_rank: rank,
            effective_score: 0.1,
            in_first_3: rank.is_some_and(|r| r <= 3),
            category_profile: None,
            case_label: if rank.is_some() {
                CaseLabel::Recognized
            } else {
                CaseLabel::FullWordsOnlyMiss
            },
            partition: None,
        }
    }

    #[test]
    fn accuracy() {
        let mut v: Vec<MaskOutcome> = (0..128)
            .map(|i| outcome(Some(if i < 69 { 1 } else { 7 }), true))
            .collect();
        v.extend((0..307).map(|_| outcome(None, true)));
        assert_eq!(round_places(accuracy_at_k(&v, 10).unwrap() * 100.0, 2), 29.43);
        assert_eq!(round_places(accuracy_at_k(&v, 3).unwrap(), 4), 0.1586);
        assert_eq!(accuracy_at_k(&v[128..], 10).unwrap(), 0.0);
        assert_eq!(accuracy_at_k(&[], 10), Err(MetricsError::Empty));
        assert!(matches!(
            accuracy_at_k(&v, 11),
            Err(MetricsError::KLimitTooLarge { .. })
        ));
    }

    #[test]
    fn typology_edge_cases() {
        let all_function = vec![outcome(Some(1), false), outcome(Some(2), false)];
        let t = typology_table(&all_function);
        assert_eq!((t.content_recognized, t.content_ratio, t.ratio_defined), (0, 0.0, true));
        let none = typology_table(&[outcome(None, true)]);
        assert_eq!(
            (none.recognized_total, none.content_ratio, none.ratio_defined),
            (0, 0.0, false)
        );
    }

    fn row(n: usize, m: usize, nc: usize, c: usize, h: usize, l: usize, b: usize) -> ComparisonRow {
        ComparisonRow {
            pair_id: "x".into(),
            domain: Domain::Poetry,
            n_words: n,
            n_masked: m,
            noncanon_recognized: nc,
            canon_recognized: c,
            high_count: h,
            low_count: l,
            beyond_vocab_count: b,
        }
    }

    #[test]
    fn ratios_and_zero_denominator() {
        let s = ratio_summary(&[row(10, 8, 0, 3, 4, 3, 1), row(9, 6, 2, 3, 4, 1, 2)]).unwrap();
        assert_eq!(s.totals.n_words, 19);
        assert!((s.masked_ratio - 14.0 / 19.0).abs() < 1e-12);
        assert!((s.structure_ratio - 2.0 / 6.0).abs() < 1e-12);
        assert!((s.lowfreq_ratio - 10.0 / 8.0).abs() < 1e-12);
        assert_eq!(
            ratio_summary(&[row(3, 1, 1, 0, 1, 0, 0)]),
            Err(MetricsError::ZeroDenominator("structure"))
        );
        let equal = ratio_summary(&[row(3, 1, 1, 1, 1, 0, 0)]).unwrap();
        assert_eq!(format!("{:.3}", equal.structure_ratio), "1.000");
    }

    #[test]
    fn reported_totals_flag_disagreements() {
        let s = RatioSummary {
            totals: Totals {
                n_words: 153,
                n_masked: 86,
                noncanon_recognized: 31,
                canon_recognized: 37,
                high_count: 78,
                low_count: 9,
                beyond_vocab_count: 1,
            },
            masked_ratio: 86.0 / 153.0,
            structure_ratio: 31.0 / 37.0,
            lowfreq_ratio: 11.0 / 78.0,
        };
        let mut printed = s.totals;
        printed.noncanon_recognized = 30;
        printed.canon_recognized = 36;
        let reported = ReportedTotals {
            domain: Domain::Newswire,
            totals: printed,
            masked_ratio: "0.56".into(),
            structure_ratio: "0.834".into(),
            lowfreq_ratio: "0.141".into(),
        };
        let fields: Vec<String> = check_reported(&s, &reported).into_iter().map(|d| d.field).collect();
        assert_eq!(
            fields,
            vec!["noncanon_recognized", "canon_recognized", "structure_ratio"]
        );
    }

    #[test]
    fn surprisal_values() {
        assert_eq!(surprisal(1.0).unwrap(), 0.0);
        assert_eq!(surprisal(0.5).unwrap(), 1.0);
        assert_eq!(surprisal(0.25).unwrap(), 2.0);
        assert!(surprisal(0.0).is_err());
        assert!(surprisal(1.5).is_err());
        assert!(surprisal(f64::NAN).is_err());
    }
}
