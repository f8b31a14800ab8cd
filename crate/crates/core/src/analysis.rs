//! Per-slot analysis of prediction records: gold matching, effective score,
//! grammatical-category profile and the out-of-vocabulary case taxonomy.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Domain, Sentence, Structure};
use crate::lexicon::{nfc, FrequencyLexicon};
use crate::predictions::{Candidate, PredictionRecord};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("cannot score an empty set of outcomes")]
    EmptyOutcomes,
    #[error("outcomes mix sentences {0} and {1}")]
    MixedSentences(String, String),
    #[error("candidate {0:?} is a full word, not a continuation piece")]
    NotContinuation(String),
    #[error("no part of speech for candidate {0:?}")]
    MissingPos(String),
    #[error("POS lookup line {line}: expected `surface<TAB>pos`")]
    PosLine { line: usize },
    #[error("record ({0}, {1}) refers to a sentence or token that is not in the corpus")]
    UnknownSlot(String, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MatchBase {
    /// NFC-equal surfaces; case is ignored only at sentence-initial slots.
    #[default]
    ExactNfc,
    CaseFoldedNfc,
}

impl FromStr for MatchBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" | "exact_nfc" => Ok(Self::ExactNfc),
            "casefold" | "case_folded" | "case_folded_nfc" => Ok(Self::CaseFoldedNfc),
            other => Err(format!(
                "unknown match policy {other:?} (expected exact_nfc or case_folded_nfc)"
            )),
        }
    }
}

impl fmt::Display for MatchBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ExactNfc => "exact_nfc",
            Self::CaseFoldedNfc => "case_folded_nfc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct MatchPolicy {
    pub base: MatchBase,
    pub count_morph_variants: bool,
}

impl fmt::Display for MatchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base)?;
        if self.count_morph_variants {
            f.write_str("+variants")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldMatch {
    pub recognized: bool,
    pub match_rank: Option<usize>,
    pub score: Option<f64>,
}

fn surfaces_match(candidate: &str, gold: &str, fold: bool) -> bool {
    let (c, g) = (nfc(candidate), nfc(gold));
    if fold {
        c.to_lowercase() == g.to_lowercase()
    } else {
        c == g
    }
}

/// Matches the record's gold surface with no morphological variants.
pub fn match_gold(record: &PredictionRecord, policy: MatchPolicy) -> GoldMatch {
    match_gold_with(record, policy, &[])
}

/// Matches the gold surface, plus `variants` when the policy counts them.
/// Continuation pieces and special tokens never match.
pub fn match_gold_with(record: &PredictionRecord, policy: MatchPolicy, variants: &[String]) -> GoldMatch {
    let fold = policy.base == MatchBase::CaseFoldedNfc || record.mask_index == 0;
    let extra: &[String] = if policy.count_morph_variants { variants } else { &[] };
    let hit = record.candidates.iter().enumerate().find(|(_, c)| {
        c.is_full_word()
            && (surfaces_match(&c.surface, &record.gold_surface, fold)
                || extra.iter().any(|v| surfaces_match(&c.surface, v, fold)))
    });
    match hit {
        Some((i, c)) => GoldMatch {
            recognized: true,
            match_rank: Some(i + 1),
            score: Some(c.score),
        },
        None => GoldMatch {
            recognized: false,
            match_rank: None,
            score: None,
        },
    }
}

fn effective_from(record: &PredictionRecord, m: &GoldMatch) -> f64 {
    m.score
        .unwrap_or_else(|| record.candidates.first().map_or(0.0, |c| c.score))
}

/// Gold score when recognized at any rank, otherwise the rank-1 score.
pub fn effective_score(record: &PredictionRecord, policy: MatchPolicy) -> f64 {
    effective_from(record, &match_gold(record, policy))
}

pub fn sentence_predictability(outcomes: &[MaskOutcome]) -> Result<f64, AnalysisError> {
    let first = outcomes.first().ok_or(AnalysisError::EmptyOutcomes)?;
    if let Some(other) = outcomes.iter().find(|o| o.sentence_id != first.sentence_id) {
        return Err(AnalysisError::MixedSentences(
            first.sentence_id.clone(),
            other.sentence_id.clone(),
        ));
    }
    Ok(outcomes.iter().map(|o| o.effective_score).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryProfile {
    AllSame,
    MajoritySame,
    MajorityDifferent,
    AllDifferent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub profile: CategoryProfile,
    pub same: usize,
    pub tallied: usize,
    /// No full-word candidate was available to tally.
    pub undefined: bool,
}

pub type PosLookup = HashMap<String, String>;

pub fn parse_pos_lookup(text: &str) -> Result<PosLookup, AnalysisError> {
    let mut map = PosLookup::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (surface, pos) = line.split_once('\t').ok_or(AnalysisError::PosLine { line: i + 1 })?;
        map.insert(nfc(surface), pos.trim().to_string());
    }
    Ok(map)
}

pub fn category_profile(
    record: &PredictionRecord,
    gold_pos: &str,
    lookup: &PosLookup,
) -> Result<ProfileResult, AnalysisError> {
    let mut same = 0;
    let mut tallied = 0;
    for c in record.candidates.iter().filter(|c| c.is_full_word()) {
        let pos = lookup
            .get(&nfc(&c.surface))
            .ok_or_else(|| AnalysisError::MissingPos(c.surface.clone()))?;
        tallied += 1;
        if pos == gold_pos {
            same += 1;
        }
    }
    let profile = if tallied == 0 || same == 0 {
        CategoryProfile::AllDifferent
    } else if same == tallied {
        CategoryProfile::AllSame
    } else if 2 * same > tallied {
        CategoryProfile::MajoritySame
    } else {
        CategoryProfile::MajorityDifferent
    };
    Ok(ProfileResult {
        profile,
        same,
        tallied,
        undefined: tallied == 0,
    })
}

pub fn reassemble_subword(candidate: &Candidate, left_surface: &str) -> Result<String, AnalysisError> {
    if !candidate.is_subword_continuation {
        return Err(AnalysisError::NotContinuation(candidate.surface.clone()));
    }
    Ok(format!("{left_surface}{}", candidate.surface))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseLabel {
    Recognized,
    BoundaryDegenerate,
    NonwordsOnly,
    NonwordsPlusSubstitutions,
    NonwordsPlusLegal,
    NonwordsPlusLegalPlusSubstitutions,
    FullWordsOnlyMiss,
}

impl CaseLabel {
    /// Letter of the subword failure case, for the four non-word cases.
    pub fn case_letter(self) -> Option<char> {
        match self {
            Self::NonwordsOnly => Some('c'),
            Self::NonwordsPlusSubstitutions => Some('d'),
            Self::NonwordsPlusLegal => Some('e'),
            Self::NonwordsPlusLegalPlusSubstitutions => Some('f'),
            _ => None,
        }
    }

    pub fn from_partition(p: &Partition) -> Self {
        match (p.nonwords.is_empty(), p.substitutions.is_empty(), p.legal.is_empty()) {
            (true, _, _) => Self::FullWordsOnlyMiss,
            (false, true, true) => Self::NonwordsOnly,
            (false, false, true) => Self::NonwordsPlusSubstitutions,
            (false, true, false) => Self::NonwordsPlusLegal,
            (false, false, false) => Self::NonwordsPlusLegalPlusSubstitutions,
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Recognized => "recognized",
            Self::BoundaryDegenerate => "boundary_degenerate",
            Self::NonwordsOnly => "nonwords_only",
            Self::NonwordsPlusSubstitutions => "nonwords_plus_substitutions",
            Self::NonwordsPlusLegal => "nonwords_plus_legal",
            Self::NonwordsPlusLegalPlusSubstitutions => "nonwords_plus_legal_plus_substitutions",
            Self::FullWordsOnlyMiss => "full_words_only_miss",
        };
        f.write_str(s)
    }
}

/// Candidates of a missed slot split into full-word substitutions (S),
/// continuations that reassemble into legal words (L) and those that do not (N).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub substitutions: Vec<String>,
    pub legal: Vec<String>,
    pub nonwords: Vec<String>,
}

fn is_legal_reassembly(lexicon: &FrequencyLexicon, form: &str) -> bool {
    let trimmed = form.trim_end_matches(|c: char| !c.is_alphanumeric());
    lexicon.is_legal_word(trimmed)
}

pub fn partition_candidates(record: &PredictionRecord, lexicon: &FrequencyLexicon, left_surface: &str) -> Partition {
    let mut p = Partition::default();
    for c in &record.candidates {
        if c.is_special_token {
            continue;
        }
        match reassemble_subword(c, left_surface) {
            Ok(form) if is_legal_reassembly(lexicon, &form) => p.legal.push(form),
            Ok(form) => p.nonwords.push(form),
            Err(_) => p.substitutions.push(c.surface.clone()),
        }
    }
    p
}

/// Labels a slot given its match result and owning sentence.
pub fn classify_with(
    record: &PredictionRecord,
    gold: &GoldMatch,
    sentence: &Sentence,
    lexicon: &FrequencyLexicon,
) -> (CaseLabel, Option<Partition>) {
    if gold.recognized {
        return (CaseLabel::Recognized, None);
    }
    let left = sentence
        .left_neighbor(record.mask_index)
        .map_or("", |t| t.surface.as_str());
    let partition = partition_candidates(record, lexicon, left);
    if sentence.is_boundary(record.mask_index) && record.candidates.iter().any(|c| c.is_special_token) {
        return (CaseLabel::BoundaryDegenerate, Some(partition));
    }
    (CaseLabel::from_partition(&partition), Some(partition))
}

pub fn classify_outcome(
    record: &PredictionRecord,
    lexicon: &FrequencyLexicon,
    corpus: &Corpus,
    policy: MatchPolicy,
) -> Result<CaseLabel, AnalysisError> {
    let (sentence, variants) = slot(corpus, record)?;
    let gold = match_gold_with(record, policy, variants);
    Ok(classify_with(record, &gold, sentence, lexicon).0)
}

fn slot<'a>(corpus: &'a Corpus, record: &PredictionRecord) -> Result<(&'a Sentence, &'a [String]), AnalysisError> {
    let unknown = || AnalysisError::UnknownSlot(record.sentence_id.clone(), record.mask_index);
    let sentence = corpus.sentence(&record.sentence_id).ok_or_else(unknown)?;
    let token = sentence.tokens.get(record.mask_index).ok_or_else(unknown)?;
    Ok((sentence, &token.variants))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskOutcome {
    pub sentence_id: String,
    pub mask_index: usize,
    pub gold_surface: String,
    pub domain: Domain,
    pub structure: Structure,
    pub is_content: bool,
    pub k: usize,
    pub recognized: bool,
    pub match_rank: Option<usize>,
    pub effective_score: f64,
    pub in_first_3: bool,
    pub category_profile: Option<ProfileResult>,
    pub case_label: CaseLabel,
    /// Candidate breakdown for missed slots.
    pub partition: Option<Partition>,
}

/// Full analysis of one record. The category profile is computed only when
/// a POS lookup is supplied.
pub fn analyze_record(
    record: &PredictionRecord,
    corpus: &Corpus,
    lexicon: &FrequencyLexicon,
    policy: MatchPolicy,
    pos_lookup: Option<&PosLookup>,
) -> Result<MaskOutcome, AnalysisError> {
    let (sentence, variants) = slot(corpus, record)?;
    let token = &sentence.tokens[record.mask_index];
    let gold = match_gold_with(record, policy, variants);
    let (case_label, partition) = classify_with(record, &gold, sentence, lexicon);
    let category_profile = pos_lookup
        .map(|lookup| category_profile(record, &token.pos, lookup))
        .transpose()?;
    Ok(MaskOutcome {
        sentence_id: record.sentence_id.clone(),
        mask_index: record.mask_index,
        gold_surface: record.gold_surface.clone(),
        domain: sentence.domain,
        structure: sentence.structure,
        is_content: token.is_content,
        k: record.k(),
        recognized: gold.recognized,
        match_rank: gold.match_rank,
        effective_score: effective_from(record, &gold),
        in_first_3: gold.match_rank.is_some_and(|r| r <= 3),
        category_profile,
        case_label,
        partition,
    })
}
