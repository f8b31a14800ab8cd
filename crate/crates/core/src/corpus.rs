//! Annotated sentence pairs: tokens with POS and content flags, NCS labels,
//! canonical/non-canonical pairing and mask plans.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("corpus document is not valid JSON: {0}")]
    Parse(String),
    #[error("sentence {id}: {reason}")]
    Sentence { id: String, reason: String },
    #[error("sentence id {0} appears more than once")]
    DuplicateId(String),
    #[error("pair ({noncanonical}, {canonical}): {reason}")]
    Pair {
        noncanonical: String,
        canonical: String,
        reason: String,
    },
    #[error("sentence {0} is not part of any pair")]
    NotPaired(String),
    #[error("sentence {0} does not exist")]
    UnknownSentence(String),
    #[error("sentence {id}: listed index {index} is out of range")]
    IndexOutOfRange { id: String, index: usize },
    #[error("sentence {id}: listed function index {index} points at content word {surface:?}")]
    ListedContent { id: String, index: usize, surface: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Poetry,
    Newswire,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Poetry => "poetry",
            Domain::Newswire => "newswire",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    NonCanonical,
    Canonical,
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::NonCanonical => "NC",
            Structure::Canonical => "C",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NcsLabel {
    ArgumentInversion,
    ObjectFronting,
    AdjectiveExtraction,
    PpAdjunctPreposing,
    VerbLeftExtraction,
    SubjectRightDislocation,
    SubjectObjectFronting,
    PpSpecExtractionFronted,
    CliticLeftDislocation,
    ObjectRightDislocation,
    ParentheticalInsertion,
    AdjectiveRightExtraction,
    PpSpecRightStranding,
    VerbRightExtraction,
    DoubleParenthetical,
    HangingTopic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub pos: String,
    pub is_content: bool,
    pub is_elided: bool,
    /// Position in the owning sentence, filled in on load.
    #[serde(skip)]
    pub index: usize,
    /// Form used for frequency lookups when it differs from the surface
    /// (fused articles, apocopated forms).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon_form: Option<String>,
    /// Word counted in the frequency columns of the comparison tables.
    #[serde(default, skip_serializing_if = "is_false")]
    pub frequency_tally: bool,
    /// Word added while canonicalizing, with no counterpart in the original.
    #[serde(default, skip_serializing_if = "is_false")]
    pub inserted: bool,
    /// Morphological variants accepted when variant matching is enabled.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Token {
    pub fn lookup_form(&self) -> &str {
        self.lexicon_form.as_deref().unwrap_or(&self.surface)
    }

    pub fn is_punctuation(&self) -> bool {
        !self.surface.chars().any(char::is_alphanumeric)
    }
}

/// Half-open token range `[start, end)` marking a multiword expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub domain: Domain,
    pub structure: Structure,
    #[serde(default)]
    pub ncs_labels: Vec<NcsLabel>,
    pub tokens: Vec<Token>,
    /// Function-word indices masked in addition to the content words.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub masked_function: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phrases: Vec<Span>,
    /// Lexical changes made while canonicalizing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub substitutions: Vec<Substitution>,
}

impl Sentence {
    /// The numeric part of the id: "11" for "11.Bc".
    pub fn number(&self) -> &str {
        sentence_number(&self.id)
    }

    /// Mask policy recorded in the corpus for this sentence.
    pub fn listed_policy(&self) -> MaskPolicy {
        if self.masked_function.is_empty() {
            MaskPolicy::ContentOnly
        } else {
            MaskPolicy::ContentPlusListedFunction(self.masked_function.clone())
        }
    }

    pub fn left_neighbor(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// True at the first token, and at the last word before any trailing
    /// punctuation.
    pub fn is_boundary(&self, index: usize) -> bool {
        if index == 0 {
            return true;
        }
        self.tokens.iter().skip(index + 1).all(Token::is_punctuation)
    }

    /// The phrase a token belongs to: its annotated span if any, otherwise
    /// the token and its right neighbour, or its left neighbour when the
    /// right one is missing or punctuation.
    pub fn phrase_for(&self, index: usize) -> String {
        let join = |range: std::ops::Range<usize>| {
            self.tokens[range]
                .iter()
                .map(|t| t.surface.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        };
        if let Some(span) = self.phrases.iter().find(|s| s.start <= index && index < s.end) {
            return join(span.start..span.end);
        }
        match self.tokens.get(index + 1) {
            Some(next) if !next.is_punctuation() => join(index..index + 2),
            _ if index > 0 => join(index - 1..index + 1),
            _ => join(index..index + 1),
        }
    }
}

pub fn sentence_number(id: &str) -> &str {
    id.split('.').next().unwrap_or(id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub noncanonical_id: String,
    pub canonical_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskPolicy {
    ContentOnly,
    ContentPlusListedFunction(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskPlan {
    pub sentence_id: String,
    pub mask_indices: Vec<usize>,
}

pub fn make_mask_plan(sentence: &Sentence, policy: &MaskPolicy) -> Result<MaskPlan, CorpusError> {
    let mut indices: BTreeSet<usize> = sentence
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_content)
        .map(|(i, _)| i)
        .collect();
    if let MaskPolicy::ContentPlusListedFunction(listed) = policy {
        for &i in listed {
            let token = sentence.tokens.get(i).ok_or_else(|| CorpusError::IndexOutOfRange {
                id: sentence.id.clone(),
                index: i,
            })?;
            if token.is_content {
                return Err(CorpusError::ListedContent {
                    id: sentence.id.clone(),
                    index: i,
                    surface: token.surface.clone(),
                });
            }
            indices.insert(i);
        }
    }
    Ok(MaskPlan {
        sentence_id: sentence.id.clone(),
        mask_indices: indices.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CorpusDocument {
    #[serde(default)]
    sentences: Vec<Sentence>,
    #[serde(default)]
    pairs: Vec<SentencePair>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    pairs: Vec<SentencePair>,
    by_id: HashMap<String, usize>,
    pair_of: HashMap<String, usize>,
}

struct ParsedId {
    domain: Domain,
    structure: Structure,
}

fn parse_id(id: &str) -> Option<ParsedId> {
    let (num, rest) = id.split_once('.')?;
    if num.is_empty() || !num.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let (letter, structure) = match rest {
        r if r.len() == 2 && r.ends_with('c') => (&r[..1], Structure::Canonical),
        r if r.len() == 1 => (r, Structure::NonCanonical),
        _ => return None,
    };
    let domain = match letter {
        "A" => Domain::Poetry,
        "B" => Domain::Newswire,
        _ => return None,
    };
    Some(ParsedId { domain, structure })
}

fn validate_sentence(s: &Sentence) -> Result<(), CorpusError> {
    let fail = |reason: String| CorpusError::Sentence {
        id: s.id.clone(),
        reason,
    };
    let parsed =
        parse_id(&s.id).ok_or_else(|| fail("id must look like `<n>.A`, `<n>.B`, `<n>.Ac` or `<n>.Bc`".into()))?;
    if parsed.structure != s.structure {
        return Err(fail(format!(
            "id implies {:?} but structure is {:?}",
            parsed.structure, s.structure
        )));
    }
    if parsed.domain != s.domain {
        return Err(fail(format!("id implies {} but domain is {}", parsed.domain, s.domain)));
    }
    if s.structure == Structure::Canonical && !s.ncs_labels.is_empty() {
        return Err(fail("canonical sentence carries NCS labels".into()));
    }
    if let Some(i) = s.tokens.iter().position(|t| t.surface.is_empty()) {
        return Err(fail(format!("token {i} has an empty surface")));
    }
    for span in &s.phrases {
        if span.start >= span.end || span.end > s.tokens.len() {
            return Err(fail(format!(
                "phrase span {}..{} is out of range",
                span.start, span.end
            )));
        }
    }
    make_mask_plan(s, &s.listed_policy())?;
    Ok(())
}

impl Corpus {
    pub fn from_json(document: &str) -> Result<Self, CorpusError> {
        if document.trim().is_empty() {
            return Ok(Self::default());
        }
        let doc: CorpusDocument = serde_json::from_str(document).map_err(|e| CorpusError::Parse(e.to_string()))?;
        Self::from_parts(doc.sentences, doc.pairs)
    }

    pub fn from_parts(mut sentences: Vec<Sentence>, pairs: Vec<SentencePair>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::new();
        for (i, s) in sentences.iter_mut().enumerate() {
            for (j, t) in s.tokens.iter_mut().enumerate() {
                t.index = j;
            }
            validate_sentence(s)?;
            if by_id.insert(s.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        let mut pair_of = HashMap::new();
        for (pi, p) in pairs.iter().enumerate() {
            let fail = |reason: &str| CorpusError::Pair {
                noncanonical: p.noncanonical_id.clone(),
                canonical: p.canonical_id.clone(),
                reason: reason.to_string(),
            };
            let nc = by_id
                .get(&p.noncanonical_id)
                .map(|&i| &sentences[i])
                .ok_or_else(|| fail("non-canonical sentence missing"))?;
            let c = by_id
                .get(&p.canonical_id)
                .map(|&i| &sentences[i])
                .ok_or_else(|| fail("canonical sentence missing"))?;
            if nc.structure != Structure::NonCanonical || c.structure != Structure::Canonical {
                return Err(fail("structures do not match their roles"));
            }
            if nc.domain != c.domain {
                return Err(fail("sentences belong to different domains"));
            }
            if sentence_number(&nc.id) != sentence_number(&c.id) {
                return Err(fail("sentence numbers differ"));
            }
            for id in [&p.noncanonical_id, &p.canonical_id] {
                if pair_of.insert(id.clone(), pi).is_some() {
                    return Err(fail("sentence already belongs to another pair"));
                }
            }
        }
        Ok(Self {
            sentences,
            pairs,
            by_id,
            pair_of,
        })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn sentence(&self, id: &str) -> Option<&Sentence> {
        self.by_id.get(id).map(|&i| &self.sentences[i])
    }

    pub fn pair_of(&self, sentence_id: &str) -> Result<&SentencePair, CorpusError> {
        if !self.by_id.contains_key(sentence_id) {
            return Err(CorpusError::UnknownSentence(sentence_id.to_string()));
        }
        self.pair_of
            .get(sentence_id)
            .map(|&i| &self.pairs[i])
            .ok_or_else(|| CorpusError::NotPaired(sentence_id.to_string()))
    }

    /// Position of a sentence in corpus order, used to stabilize output.
    pub fn position(&self, sentence_id: &str) -> Option<usize> {
        self.by_id.get(sentence_id).copied()
    }

    /// One plan per sentence, using each sentence's listed policy.
    pub fn mask_plans(&self) -> Result<Vec<MaskPlan>, CorpusError> {
        self.sentences
            .iter()
            .map(|s| make_mask_plan(s, &s.listed_policy()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let doc = CorpusDocument {
            sentences: self.sentences.clone(),
            pairs: self.pairs.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("corpus serializes")
    }
}
