//! Reasoning-trace keyword analysis: how often do traces hedge, verify,
//! branch, set context, or conclude — per 1000 tokens, grouped by stage
//! label.
//!
//! Matching rule: case-insensitive substring with word boundaries on both
//! ends (a boundary is the string edge or a non-alphanumeric character), so
//! "wait" matches in "Wait," but not in "awaits". Token counts are
//! whitespace-delimited words — an approximation of model-tokenizer counts,
//! fine for relative frequencies.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Category name -> keyword list. Loaded from TOML (top-level arrays of
/// strings); the default carries the four categories used in the write-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeywordCategoryConfig {
    pub categories: BTreeMap<String, Vec<String>>,
}

impl Default for KeywordCategoryConfig {
    fn default() -> Self {
        let mut categories = BTreeMap::new();
        categories.insert(
            "self_correction".to_string(),
            ["wait", "verify", "check", "recheck", "mistake"]
                .map(String::from)
                .to_vec(),
        );
        categories.insert(
            "exploration".to_string(),
            ["alternatively", "another way", "instead"]
                .map(String::from)
                .to_vec(),
        );
        categories.insert(
            "context_setting".to_string(),
            ["we need to", "the problem asks", "given that"]
                .map(String::from)
                .to_vec(),
        );
        categories.insert(
            "conclusion_drawing".to_string(),
            ["therefore", "thus", "so the answer"]
                .map(String::from)
                .to_vec(),
        );
        KeywordCategoryConfig { categories }
    }
}

impl KeywordCategoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::config("keyword lexicon has no categories"));
        }
        for (name, keywords) in &self.categories {
            if keywords.is_empty() {
                return Err(Error::config(format!("lexicon category {name:?} is empty")));
            }
            if keywords.iter().any(|k| k.trim().is_empty()) {
                return Err(Error::config(format!(
                    "lexicon category {name:?} contains an empty keyword"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: KeywordCategoryConfig = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {}", path.display(), e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One input record: a reasoning trace plus the label of the model stage
/// that produced it.
#[derive(Debug, Clone, Deserialize)]
struct TraceRecord {
    text: String,
    stage_label: String,
}

/// Aggregates for one stage label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTraceStats {
    pub traces: usize,
    pub total_tokens: u64,
    /// category -> raw occurrence count
    pub counts: BTreeMap<String, u64>,
    /// category -> occurrences per 1000 whitespace tokens
    pub per_1000_tokens: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceAnalysis {
    pub stages: BTreeMap<String, StageTraceStats>,
    /// records that failed to parse and were skipped
    pub skipped_records: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Count word-boundary occurrences of `needle` in `haystack`; both must
/// already be lowercase. Matches do not overlap.
pub fn count_keyword(haystack: &str, needle: &str) -> u64 {
    if needle.is_empty() {
        return 0;
    }
    let mut count = 0;
    for (pos, _) in haystack.match_indices(needle) {
        let before_ok = haystack[..pos].chars().next_back().map_or(true, |c| !is_word_char(c));
        let after_ok = haystack[pos + needle.len()..]
            .chars()
            .next()
            .map_or(true, |c| !is_word_char(c));
        if before_ok && after_ok {
            count += 1;
        }
    }
    count
}

/// Analyze a JSONL stream of {text, stage_label} records. Malformed lines
/// are skipped and tallied, not fatal.
pub fn analyze_traces<R: BufRead>(reader: R, cfg: &KeywordCategoryConfig) -> Result<TraceAnalysis> {
    cfg.validate()?;
    let lowered: BTreeMap<&String, Vec<String>> = cfg
        .categories
        .iter()
        .map(|(name, kws)| (name, kws.iter().map(|k| k.to_lowercase()).collect()))
        .collect();

    let mut analysis = TraceAnalysis::default();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<traces>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("skipping malformed trace record: {e}");
                analysis.skipped_records += 1;
                continue;
            }
        };
        let stage = analysis
            .stages
            .entry(record.stage_label.clone())
            .or_default();
        stage.traces += 1;
        stage.total_tokens += record.text.split_whitespace().count() as u64;
        let text = record.text.to_lowercase();
        for (name, keywords) in &lowered {
            let hits: u64 = keywords.iter().map(|k| count_keyword(&text, k)).sum();
            *stage.counts.entry((*name).clone()).or_insert(0) += hits;
        }
    }
    for stage in analysis.stages.values_mut() {
        for name in cfg.categories.keys() {
            stage.counts.entry(name.clone()).or_insert(0);
        }
        for (name, &count) in &stage.counts {
            let freq = if stage.total_tokens == 0 {
                0.0
            } else {
                count as f64 * 1000.0 / stage.total_tokens as f64
            };
            stage.per_1000_tokens.insert(name.clone(), freq);
        }
    }
    Ok(analysis)
}

pub fn analyze_traces_file(path: &Path, cfg: &KeywordCategoryConfig) -> Result<TraceAnalysis> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    analyze_traces(std::io::BufReader::new(file), cfg)
}
