//! Character n-gram language identification and per-language encoder routing.
//!
//! A [`LangProfile`] holds relative frequencies of the 1-, 2- and 3-grams of a
//! language's normalized training text. A text is scored against each
//! profile as the mean log add-one-smoothed probability of its own n-grams,
//! with the vocabulary taken as the union over all profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_text, Language, Record};

pub const NGRAM_RANGE: (usize, usize) = (1, 3);

/// Mean log-probability below which a text is reported as `unknown`.
pub const DEFAULT_SCORE_FLOOR: f64 = -7.0;

#[derive(Debug, Error, PartialEq)]
pub enum LangIdError {
    #[error("no texts to build a profile from")]
    NoTexts,
    #[error("profile for {0} has no n-grams")]
    EmptyProfile(Language),
    #[error("cannot build a profile for language {0}")]
    UnsupportedLanguage(Language),
    #[error("no language profiles")]
    NoProfiles,
    #[error("duplicate profile for {0}")]
    DuplicateProfile(Language),
    #[error("text is empty after normalization")]
    EmptyText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangProfile {
    pub language: Language,
    pub ngram_range: (usize, usize),
    pub table: BTreeMap<String, f64>,
    /// Number of n-gram occurrences the frequencies were computed from.
    pub total: u64,
}

fn for_each_ngram(text: &str, (lo, hi): (usize, usize), mut f: impl FnMut(&str)) {
    let bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();
    let n_chars = bounds.len() - 1;
    for n in lo..=hi {
        for start in 0..n_chars.saturating_sub(n - 1) {
            f(&text[bounds[start]..bounds[start + n]]);
        }
    }
}

fn ngram_counts<'a>(texts: impl IntoIterator<Item = &'a str>, range: (usize, usize)) -> (BTreeMap<String, u64>, u64) {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0;
    for text in texts {
        for_each_ngram(text, range, |g| {
            *counts.entry(g.to_string()).or_default() += 1;
            total += 1;
        });
    }
    (counts, total)
}

/// Builds a frequency profile from raw texts (normalized internally).
pub fn build_profile<S: AsRef<str>>(texts: &[S], language: Language) -> Result<LangProfile, LangIdError> {
    if language == Language::Unknown {
        return Err(LangIdError::UnsupportedLanguage(language));
    }
    if texts.is_empty() {
        return Err(LangIdError::NoTexts);
    }
    let normalized: Vec<String> = texts.iter().map(|t| normalize_text(t.as_ref(), language)).collect();
    let (counts, total) = ngram_counts(normalized.iter().map(String::as_str), NGRAM_RANGE);
    if total == 0 {
        return Err(LangIdError::EmptyProfile(language));
    }
    let table = counts
        .into_iter()
        .map(|(g, c)| (g, c as f64 / total as f64))
        .collect();
    Ok(LangProfile {
        language,
        ngram_range: NGRAM_RANGE,
        table,
        total,
    })
}

/// One profile per known language, from records that carry a language.
pub fn build_profiles(records: &[Record]) -> Result<Vec<LangProfile>, LangIdError> {
    let mut profiles = Vec::new();
    for lang in Language::KNOWN {
        let texts: Vec<&str> = records
            .iter()
            .filter(|r| r.language == lang)
            .map(|r| r.text.as_str())
            .collect();
        if !texts.is_empty() {
            profiles.push(build_profile(&texts, lang)?);
        }
    }
    if profiles.is_empty() {
        return Err(LangIdError::NoProfiles);
    }
    Ok(profiles)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Identification {
    pub language: Language,
    /// Best mean log-probability (also reported when below the floor).
    pub score: f64,
}

#[derive(Debug, Clone)]
struct ScoredProfile {
    language: Language,
    counts: BTreeMap<String, f64>,
    log_denominator: f64,
}

/// Profiles prepared for scoring.
#[derive(Debug, Clone)]
pub struct LanguageIdentifier {
    profiles: Vec<ScoredProfile>,
    ngram_range: (usize, usize),
    floor: f64,
}

impl LanguageIdentifier {
    pub fn new(profiles: &[LangProfile], floor: f64) -> Result<Self, LangIdError> {
        if profiles.is_empty() {
            return Err(LangIdError::NoProfiles);
        }
        let mut sorted: Vec<&LangProfile> = profiles.iter().collect();
        sorted.sort_by_key(|p| p.language);
        if let Some(w) = sorted.windows(2).find(|w| w[0].language == w[1].language) {
            return Err(LangIdError::DuplicateProfile(w[0].language));
        }
        let vocabulary: BTreeSet<&str> = sorted
            .iter()
            .flat_map(|p| p.table.keys().map(String::as_str))
            .collect();
        let v = vocabulary.len() as f64;
        let scored = sorted
            .into_iter()
            .map(|p| ScoredProfile {
                language: p.language,
                counts: p
                    .table
                    .iter()
                    .map(|(g, f)| (g.clone(), (f * p.total as f64).round()))
                    .collect(),
                log_denominator: (p.total as f64 + v).ln(),
            })
            .collect();
        Ok(Self {
            profiles: scored,
            ngram_range: profiles[0].ngram_range,
            floor,
        })
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Mean smoothed log-probability of `text` under each profile, in
    /// canonical language order.
    pub fn scores(&self, text: &str) -> Result<Vec<(Language, f64)>, LangIdError> {
        let normalized = normalize_text(text, Language::Unknown);
        let (grams, total) = ngram_counts([normalized.as_str()], self.ngram_range);
        if total == 0 {
            return Err(LangIdError::EmptyText);
        }
        Ok(self
            .profiles
            .iter()
            .map(|p| {
                let sum: f64 = grams
                    .iter()
                    .map(|(g, &n)| {
                        let c = p.counts.get(g).copied().unwrap_or(0.0);
                        n as f64 * ((c + 1.0).ln() - p.log_denominator)
                    })
                    .sum();
                (p.language, sum / total as f64)
            })
            .collect())
    }

    pub fn identify(&self, text: &str) -> Result<Identification, LangIdError> {
        let scores = self.scores(text)?;
        let mut best = scores[0];
        for &(lang, score) in &scores[1..] {
            // strict comparison keeps the earlier language on ties
            if score > best.1 {
                best = (lang, score);
            }
        }
        let language = if best.1 < self.floor { Language::Unknown } else { best.0 };
        Ok(Identification { language, score: best.1 })
    }

    /// Identifies records whose language is `unknown`; given languages win.
    pub fn fill_languages(&self, records: &mut [Record]) -> usize {
        let mut filled = 0;
        for r in records.iter_mut().filter(|r| r.language == Language::Unknown) {
            if let Ok(id) = self.identify(&r.text) {
                if id.language != Language::Unknown {
                    r.language = id.language;
                    filled += 1;
                }
            }
        }
        filled
    }
}

/// Identifies `text` against `profiles` with the default score floor.
pub fn identify(text: &str, profiles: &[LangProfile]) -> Result<Identification, LangIdError> {
    LanguageIdentifier::new(profiles, DEFAULT_SCORE_FLOOR)?.identify(text)
}

/// Frozen-encoder slot a record is routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncoderSlot {
    #[serde(rename = "UR_ENC")]
    UrEnc,
    #[serde(rename = "EN_ENC")]
    EnEnc,
    #[serde(rename = "EURO_ENC")]
    EuroEnc,
}

impl EncoderSlot {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderSlot::UrEnc => "UR_ENC",
            EncoderSlot::EnEnc => "EN_ENC",
            EncoderSlot::EuroEnc => "EURO_ENC",
        }
    }
}

impl fmt::Display for EncoderSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncoderSlot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "UR_ENC" => Ok(EncoderSlot::UrEnc),
            "EN_ENC" => Ok(EncoderSlot::EnEnc),
            "EURO_ENC" => Ok(EncoderSlot::EuroEnc),
            other => Err(format!("unknown encoder slot {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Route {
    pub slot: EncoderSlot,
    /// Set when the language was unknown and the default slot was used.
    pub fallback: bool,
}

/// Maps a language to its encoder slot; unknown languages fall back to
/// `default_slot` with a warning.
pub fn route_with_default(language: Language, default_slot: EncoderSlot) -> Route {
    let slot = match language {
        Language::Ur => EncoderSlot::UrEnc,
        Language::En => EncoderSlot::EnEnc,
        Language::De | Language::Es => EncoderSlot::EuroEnc,
        Language::Unknown => {
            warn!("unknown language routed to default slot {default_slot}");
            return Route {
                slot: default_slot,
                fallback: true,
            };
        }
    };
    Route { slot, fallback: false }
}

pub fn route(language: Language) -> Route {
    route_with_default(language, EncoderSlot::EnEnc)
}
