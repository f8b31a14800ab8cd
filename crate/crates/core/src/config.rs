//! Run configuration and reference-totals files, both TOML.
//!
//! Relative paths in a config file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::{MatchBase, MatchPolicy};
use crate::lexicon::BandThresholds;
use crate::metrics::ReportedTotals;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lexicon: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub pos_lookup: Option<PathBuf>,
    pub reference_totals: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Defaults to the records' k.
    pub k_limit: Option<usize>,
    pub policy: MatchBase,
    pub count_morph_variants: bool,
    pub best_threshold: f64,
    /// Analysis worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub thresholds: BandThresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lexicon: None,
            corpus: None,
            records: None,
            pos_lookup: None,
            reference_totals: None,
            out: None,
            k_limit: None,
            policy: MatchBase::ExactNfc,
            count_morph_variants: false,
            best_threshold: 0.5,
            workers: 0,
            thresholds: BandThresholds::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, toml::de::Error> {
        let mut cfg: Self = toml::from_str(text)?;
        for p in [
            &mut cfg.lexicon,
            &mut cfg.corpus,
            &mut cfg.records,
            &mut cfg.pos_lookup,
            &mut cfg.reference_totals,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn match_policy(&self) -> MatchPolicy {
        MatchPolicy {
            base: self.policy,
            count_morph_variants: self.count_morph_variants,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ReferenceFile {
    #[serde(default)]
    table: Vec<ReportedTotals>,
}

pub fn parse_reference_totals(text: &str) -> Result<Vec<ReportedTotals>, toml::de::Error> {
    Ok(toml::from_str::<ReferenceFile>(text)?.table)
}
