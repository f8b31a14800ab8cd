//! Corpus frequency lexicon: cleaning, ranking, banding and legality lookups.
//!
//! A lexicon is built once from `surface<TAB>count` lines and is immutable
//! afterwards, so it can be shared freely between analysis workers.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("line {line}: expected `surface<TAB>count`, found {found:?}")]
    MissingField { line: usize, found: String },
    #[error("line {line}: count {value:?} is not a non-negative integer")]
    BadCount { line: usize, value: String },
    #[error("line {line}: rank {value:?} is not a positive integer")]
    BadRank { line: usize, value: String },
    #[error("surface {surface:?} appears on lines {first} and {second}")]
    Duplicate {
        surface: String,
        first: usize,
        second: usize,
    },
    #[error("snapshot line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
    #[error("invalid thresholds: {0}")]
    Thresholds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandingMode {
    /// High/Low split on rank position.
    #[default]
    RankBased,
    /// High/Low split on raw occurrence count.
    CountBased,
}

impl FromStr for BandingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rank" | "rank_based" => Ok(Self::RankBased),
            "count" | "count_based" => Ok(Self::CountBased),
            other => Err(format!(
                "unknown banding mode {other:?} (expected rank_based or count_based)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandThresholds {
    pub high_rank_cutoff: u64,
    pub core_vocab_size: u64,
    pub low_count_floor: u64,
    pub verylow_count_floor: u64,
    /// Occurrence count at or above which a word is High in count-based mode.
    pub high_count_threshold: u64,
    pub banding_mode: BandingMode,
}

impl Default for BandThresholds {
    fn default() -> Self {
        Self {
            high_rank_cutoff: 10_000,
            core_vocab_size: 50_000,
            low_count_floor: 1_377,
            verylow_count_floor: 4,
            high_count_threshold: 10_000,
            banding_mode: BandingMode::RankBased,
        }
    }
}

impl BandThresholds {
    pub fn validate(&self) -> Result<(), LexiconError> {
        if self.high_rank_cutoff >= self.core_vocab_size {
            return Err(LexiconError::Thresholds(format!(
                "high_rank_cutoff {} must be below core_vocab_size {}",
                self.high_rank_cutoff, self.core_vocab_size
            )));
        }
        if self.verylow_count_floor > self.low_count_floor {
            return Err(LexiconError::Thresholds(format!(
                "verylow_count_floor {} exceeds low_count_floor {}",
                self.verylow_count_floor, self.low_count_floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyBand {
    High,
    Low,
    VeryLow,
    Rare,
    Unknown,
}

impl FrequencyBand {
    pub const ALL: [FrequencyBand; 5] = [
        FrequencyBand::High,
        FrequencyBand::Low,
        FrequencyBand::VeryLow,
        FrequencyBand::Rare,
        FrequencyBand::Unknown,
    ];

    pub fn marker(self) -> &'static str {
        marker_of(self)
    }

    /// True for the bands that fall outside the core vocabulary.
    pub fn is_beyond_vocab(self) -> bool {
        matches!(self, Self::VeryLow | Self::Rare | Self::Unknown)
    }
}

impl fmt::Display for FrequencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::High => "high",
            Self::Low => "low",
            Self::VeryLow => "very_low",
            Self::Rare => "rare",
            Self::Unknown => "unknown",
        };
        f.write_str(name)
    }
}

pub fn marker_of(band: FrequencyBand) -> &'static str {
    match band {
        FrequencyBand::High => "°",
        FrequencyBand::Low => "*",
        FrequencyBand::VeryLow => "**",
        FrequencyBand::Rare => "***",
        FrequencyBand::Unknown => "***<ukn>",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub surface: String,
    pub count: u64,
    pub rank: u64,
}

#[derive(Debug, Clone, Default)]
pub struct FrequencyLexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, usize>,
    dropped: usize,
}

pub fn nfc(s: &str) -> String {
    if unicode_normalization::is_nfc_quick(s.chars()) == unicode_normalization::IsNormalized::Yes {
        return s.to_string();
    }
    s.nfc().collect()
}

/// Numbers, punctuation runs and web addresses are not wordforms.
fn is_noise(surface: &str) -> bool {
    surface.contains("://") || surface.starts_with("www.") || !surface.chars().any(char::is_alphabetic)
}

fn parse_count(line: usize, raw: &str) -> Result<u64, LexiconError> {
    raw.trim().parse().map_err(|_| LexiconError::BadCount {
        line,
        value: raw.to_string(),
    })
}

/// Builds a ranked lexicon from raw frequency-list lines.
///
/// Blank lines are ignored. Line numbers in errors are 1-based.
pub fn build_lexicon<I, S>(raw_lines: I, thresholds: &BandThresholds) -> Result<FrequencyLexicon, LexiconError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    thresholds.validate()?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut kept: Vec<(String, u64)> = Vec::new();
    let mut dropped = 0;
    for (i, raw) in raw_lines.into_iter().enumerate() {
        let line_no = i + 1;
        let line = raw.as_ref().trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let Some((surface, count)) = line.split_once('\t') else {
            return Err(LexiconError::MissingField {
                line: line_no,
                found: line.to_string(),
            });
        };
        let count = parse_count(line_no, count)?;
        let surface = nfc(surface.trim());
        if surface.is_empty() {
            return Err(LexiconError::MissingField {
                line: line_no,
                found: line.to_string(),
            });
        }
        if let Some(&first) = seen.get(&surface) {
            return Err(LexiconError::Duplicate {
                surface,
                first,
                second: line_no,
            });
        }
        seen.insert(surface.clone(), line_no);
        if is_noise(&surface) {
            dropped += 1;
            continue;
        }
        kept.push((surface, count));
    }
    let mut lexicon = FrequencyLexicon::from_counts(kept);
    lexicon.dropped = dropped;
    Ok(lexicon)
}

impl FrequencyLexicon {
    fn from_counts(mut counts: Vec<(String, u64)>) -> Self {
        counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let entries: Vec<LexiconEntry> = counts
            .into_iter()
            .enumerate()
            .map(|(i, (surface, count))| LexiconEntry {
                surface,
                count,
                rank: i as u64 + 1,
            })
            .collect();
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.surface.clone(), i))
            .collect();
        Self {
            entries,
            index,
            dropped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of raw lines removed as numbers or web addresses.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    fn exact(&self, surface: &str) -> Option<&LexiconEntry> {
        self.index.get(surface).map(|&i| &self.entries[i])
    }

    /// Looks a surface up after NFC normalization. A capitalized form that is
    /// absent is retried once in lowercase.
    pub fn lookup(&self, surface: &str) -> Option<&LexiconEntry> {
        let form = nfc(surface);
        if let Some(e) = self.exact(&form) {
            return Some(e);
        }
        if form.chars().next().is_some_and(char::is_uppercase) {
            return self.exact(&form.to_lowercase());
        }
        None
    }

    pub fn band_of(&self, thresholds: &BandThresholds, surface: &str) -> FrequencyBand {
        let Some(entry) = self.lookup(surface) else {
            return FrequencyBand::Unknown;
        };
        band_for_entry(entry, thresholds)
    }

    pub fn is_legal_word(&self, surface: &str) -> bool {
        !surface.is_empty() && self.lookup(surface).is_some()
    }

    /// Writes the `surface<TAB>count<TAB>rank` snapshot.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(out, "{}\t{}\t{}", e.surface, e.count, e.rank)?;
        }
        Ok(())
    }

    pub fn to_snapshot(&self) -> String {
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("snapshot is UTF-8")
    }

    /// Reloads a snapshot, checking that ranks are contiguous and counts
    /// never increase with rank.
    pub fn from_snapshot(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        let mut index = HashMap::new();
        let mut lines_of: HashMap<String, usize> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(LexiconError::MissingField {
                    line: line_no,
                    found: line.to_string(),
                });
            }
            let surface = nfc(fields[0]);
            let count = parse_count(line_no, fields[1])?;
            let rank: u64 = fields[2].trim().parse().map_err(|_| LexiconError::BadRank {
                line: line_no,
                value: fields[2].to_string(),
            })?;
            if rank != entries.len() as u64 + 1 {
                return Err(LexiconError::Snapshot {
                    line: line_no,
                    reason: format!("rank {rank} breaks the 1..N sequence"),
                });
            }
            if let Some(prev) = entries.last().map(|e: &LexiconEntry| e.count) {
                if count > prev {
                    return Err(LexiconError::Snapshot {
                        line: line_no,
                        reason: format!("count {count} follows smaller count {prev}"),
                    });
                }
            }
            if let Some(&first) = lines_of.get(&surface) {
                return Err(LexiconError::Duplicate {
                    surface,
                    first,
                    second: line_no,
                });
            }
            lines_of.insert(surface.clone(), line_no);
            index.insert(surface.clone(), entries.len());
            entries.push(LexiconEntry { surface, count, rank });
        }
        Ok(Self {
            entries,
            index,
            dropped: 0,
        })
    }

    /// Loads either a raw two-column list or a three-column snapshot,
    /// deciding from the first non-blank line.
    pub fn from_tsv(text: &str, thresholds: &BandThresholds) -> Result<Self, LexiconError> {
        let columns = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .map(|l| l.split('\t').count())
            .unwrap_or(2);
        if columns == 3 {
            thresholds.validate()?;
            Self::from_snapshot(text)
        } else {
            build_lexicon(text.lines(), thresholds)
        }
    }
}

pub fn band_for_entry(entry: &LexiconEntry, t: &BandThresholds) -> FrequencyBand {
    let high = match t.banding_mode {
        BandingMode::RankBased => entry.rank <= t.high_rank_cutoff,
        BandingMode::CountBased => entry.count >= t.high_count_threshold,
    };
    if high {
        FrequencyBand::High
    } else if entry.rank <= t.core_vocab_size {
        FrequencyBand::Low
    } else if entry.count >= t.verylow_count_floor {
        FrequencyBand::VeryLow
    } else {
        FrequencyBand::Rare
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(lines: &[&str]) -> FrequencyLexicon {
        build_lexicon(lines.iter().copied(), &BandThresholds::default()).unwrap()
    }

    fn small_thresholds() -> BandThresholds {
        BandThresholds {
            high_rank_cutoff: 2,
            core_vocab_size: 4,
            low_count_floor: 50,
            verylow_count_floor: 4,
            high_count_threshold: 100,
            banding_mode: BandingMode::RankBased,
        }
    }

    #[test]
    fn drops_numbers_and_websites() {
        let l = lex(&["di\t65000000", "www.foo.it\t523", "1987\t444"]);
        assert_eq!(l.len(), 1);
        assert_eq!(
            l.entries()[0],
            LexiconEntry {
                surface: "di".into(),
                count: 65_000_000,
                rank: 1
            }
        );
        assert_eq!(l.dropped(), 2);
    }

    #[test]
    fn url_with_scheme_is_dropped() {
        let l = lex(&["http://example.org\t9", "casa\t3"]);
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn empty_input_gives_empty_lexicon() {
        let l = lex(&[]);
        assert!(l.is_empty());
    }

    #[test]
    fn ties_break_lexicographically() {
        let l = lex(&["a\t10", "b\t10", "c\t20"]);
        let ranks: Vec<_> = l.entries().iter().map(|e| (e.surface.as_str(), e.rank)).collect();
        assert_eq!(ranks, vec![("c", 1), ("a", 2), ("b", 3)]);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let t = BandThresholds::default();
        assert_eq!(
            build_lexicon(["a\t1", "broken"], &t).unwrap_err(),
            LexiconError::MissingField {
                line: 2,
                found: "broken".into()
            }
        );
        assert!(matches!(
            build_lexicon(["a\tx"], &t).unwrap_err(),
            LexiconError::BadCount { line: 1, .. }
        ));
        assert!(matches!(
            build_lexicon(["a\t-3"], &t).unwrap_err(),
            LexiconError::BadCount { line: 1, .. }
        ));
    }

    #[test]
    fn duplicates_after_normalization_are_rejected() {
        // "è" precomposed versus "e" + combining grave
        let err = build_lexicon(["\u{e8}\t5", "x\t1", "e\u{300}\t2"], &BandThresholds::default()).unwrap_err();
        assert_eq!(
            err,
            LexiconError::Duplicate {
                surface: "\u{e8}".into(),
                first: 1,
                second: 3
            }
        );
    }

    #[test]
    fn bands_follow_rank_and_count_floors() {
        let t = small_thresholds();
        let l = build_lexicon(["a\t900", "b\t800", "c\t60", "d\t55", "e\t5", "f\t3"], &t).unwrap();
        assert_eq!(l.band_of(&t, "a"), FrequencyBand::High);
        assert_eq!(l.band_of(&t, "b"), FrequencyBand::High);
        assert_eq!(l.band_of(&t, "c"), FrequencyBand::Low);
        assert_eq!(l.band_of(&t, "d"), FrequencyBand::Low);
        assert_eq!(l.band_of(&t, "e"), FrequencyBand::VeryLow);
        assert_eq!(l.band_of(&t, "f"), FrequencyBand::Rare);
        assert_eq!(l.band_of(&t, "zzz"), FrequencyBand::Unknown);
    }

    #[test]
    fn count_based_mode_uses_count_threshold() {
        let mut t = small_thresholds();
        t.banding_mode = BandingMode::CountBased;
        let l = build_lexicon(["a\t900", "b\t99", "c\t60"], &t).unwrap();
        assert_eq!(l.band_of(&t, "a"), FrequencyBand::High);
        assert_eq!(l.band_of(&t, "b"), FrequencyBand::Low);
    }

    #[test]
    fn capitalized_forms_retry_in_lowercase() {
        let t = small_thresholds();
        let l = build_lexicon(["oggi\t900", "Roma\t800"], &t).unwrap();
        assert_eq!(l.band_of(&t, "Oggi"), FrequencyBand::High);
        assert_eq!(l.band_of(&t, "Roma"), FrequencyBand::High);
        assert_eq!(l.band_of(&t, "roma"), FrequencyBand::Unknown);
    }

    #[test]
    fn markers() {
        assert_eq!(marker_of(FrequencyBand::High), "°");
        assert_eq!(marker_of(FrequencyBand::Low), "*");
        assert_eq!(marker_of(FrequencyBand::VeryLow), "**");
        assert_eq!(marker_of(FrequencyBand::Rare), "***");
        assert_eq!(marker_of(FrequencyBand::Unknown), "***<ukn>");
    }

    #[test]
    fn legality() {
        let l = lex(&["pioppi\t40", "pioppo\t70"]);
        assert!(l.is_legal_word("pioppi"));
        assert!(!l.is_legal_word("l'agilda"));
        assert!(!l.is_legal_word(""));
    }

    #[test]
    fn snapshot_round_trip() {
        let l = lex(&["di\t100", "la\t50", "casa\t50"]);
        let back = FrequencyLexicon::from_snapshot(&l.to_snapshot()).unwrap();
        assert_eq!(back.entries(), l.entries());
    }

    #[test]
    fn snapshot_rejects_rank_gap_and_rising_count() {
        assert!(matches!(
            FrequencyLexicon::from_snapshot("a\t5\t1\nb\t4\t3\n"),
            Err(LexiconError::Snapshot { line: 2, .. })
        ));
        assert!(matches!(
            FrequencyLexicon::from_snapshot("a\t5\t1\nb\t6\t2\n"),
            Err(LexiconError::Snapshot { line: 2, .. })
        ));
    }

    #[test]
    fn thresholds_are_validated() {
        let mut t = BandThresholds::default();
        t.high_rank_cutoff = t.core_vocab_size;
        assert!(build_lexicon(["a\t1"], &t).is_err());
        let mut t = BandThresholds::default();
        t.verylow_count_floor = t.low_count_floor + 1;
        assert!(t.validate().is_err());
    }
}
