//! Text analysis: raw text to an ordered stream of index terms.
//!
//! Stages run in a fixed order:
//!
//! 1. Unicode normalization: NFC composition, tatweel removal, optional
//!    Arabic diacritic removal, lowercase folding.
//! 2. Whitespace splitting.
//! 3. Symbol stripping: every Unicode punctuation character is removed from
//!    each token; tokens left empty are dropped. Digits are kept.
//! 4. Stopword removal.
//! 5. Optional stemming.
//!
//! Every stage except splitting can be switched off, so the same pipeline
//! also covers plain full-text indexing.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::format::{Decoder, Encoder, FormatError};

/// Ordered analyzed terms of one text.
pub type TokenStream = Vec<String>;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cannot read stopword file {path}: {source}")]
    StopwordFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

const TATWEEL: char = '\u{0640}';

fn is_arabic_diacritic(c: char) -> bool {
    matches!(c, '\u{064B}'..='\u{065F}' | '\u{0670}' | '\u{06D6}'..='\u{06DC}' | '\u{06DF}'..='\u{06E8}' | '\u{06EA}'..='\u{06ED}')
}

/// True for characters removed by the symbol-stripping stage: the Unicode
/// punctuation categories (Pc, Pd, Ps, Pe, Pi, Pf, Po).
pub fn is_stripped_symbol(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

/// Stage 1.
pub fn normalize(text: &str, strip_diacritics: bool) -> String {
    text.chars()
        .flat_map(char::to_lowercase)
        .nfc()
        .filter(|&c| c != TATWEEL && !(strip_diacritics && is_arabic_diacritic(c)))
        .collect()
}

/// Stage 3, applied to one token.
pub fn strip_symbols(token: &str) -> String {
    token.chars().filter(|&c| !is_stripped_symbol(c)).collect()
}

/// Named stemming stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StemmerKind {
    /// Affix-stripping Arabic light stemmer; leaves other scripts untouched.
    ArabicLight,
}

impl StemmerKind {
    fn code(self) -> u8 {
        match self {
            StemmerKind::ArabicLight => 1,
        }
    }

    fn from_code(code: u8) -> Option<Option<StemmerKind>> {
        match code {
            0 => Some(None),
            1 => Some(Some(StemmerKind::ArabicLight)),
            _ => None,
        }
    }

    pub fn stem(self, term: &str) -> String {
        match self {
            StemmerKind::ArabicLight => arabic_light_stem(term),
        }
    }
}

impl std::str::FromStr for StemmerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arabic-light" => Ok(StemmerKind::ArabicLight),
            other => Err(format!(
                "unknown stemmer {other:?} (available: arabic-light)"
            )),
        }
    }
}

const ARABIC_PREFIXES: &[&str] = &["وال", "بال", "كال", "فال", "لل", "ال", "و"];
const ARABIC_SUFFIXES: &[&str] = &["ها", "ان", "ات", "ون", "ين", "يه", "ية", "ه", "ة", "ي"];

fn arabic_light_stem(term: &str) -> String {
    let mut word = term;
    let len = |s: &str| s.chars().count();
    if let Some(rest) = ARABIC_PREFIXES
        .iter()
        .find_map(|p| word.strip_prefix(p).filter(|r| len(r) >= 2))
    {
        word = rest;
    }
    for suffix in ARABIC_SUFFIXES {
        if let Some(rest) = word.strip_suffix(suffix).filter(|r| len(r) >= 2) {
            word = rest;
        }
    }
    word.to_string()
}

/// A set of stopwords, stored in analyzed form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords(BTreeSet<String>);

impl StopWords {
    pub fn new() -> Self {
        Self::default()
    }

    /// Canonicalizes each entry with the default stages (normalization and
    /// symbol stripping) and drops entries that end up empty.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = StopWords::new();
        for w in words {
            if let Some(c) = canonical_entry(w.as_ref(), true, true, true) {
                set.0.insert(c);
            }
        }
        set
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

fn canonical_entry(
    word: &str,
    normalize_unicode: bool,
    strip_diacritics: bool,
    strip: bool,
) -> Option<String> {
    let mut w = word.trim().to_string();
    if normalize_unicode {
        w = normalize(&w, strip_diacritics);
    }
    if strip {
        w = strip_symbols(&w);
    }
    // a multi-word entry can never equal a single token
    (!w.is_empty() && !w.contains(char::is_whitespace)).then_some(w)
}

/// Reads a stopword file: one word per line, `#` comments and blank lines
/// ignored.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<StopWords, AnalysisError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| AnalysisError::StopwordFile {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_stopwords(&text))
}

pub fn parse_stopwords(text: &str) -> StopWords {
    StopWords::from_words(
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#')),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzerConfig {
    pub stopwords: StopWords,
    pub normalize_unicode: bool,
    /// Only effective when `normalize_unicode` is on.
    pub strip_diacritics: bool,
    pub strip_symbols: bool,
    pub stemmer: Option<StemmerKind>,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            stopwords: StopWords::new(),
            normalize_unicode: true,
            strip_diacritics: true,
            strip_symbols: true,
            stemmer: None,
        }
    }
}

impl AnalyzerConfig {
    pub fn with_stopwords(mut self, stopwords: StopWords) -> Self {
        self.stopwords = stopwords;
        self
    }

    /// Every stage off: analysis is plain whitespace splitting.
    pub fn raw() -> Self {
        AnalyzerConfig {
            stopwords: StopWords::new(),
            normalize_unicode: false,
            strip_diacritics: false,
            strip_symbols: false,
            stemmer: None,
        }
    }
}

/// A configured analysis pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analyzer {
    config: AnalyzerConfig,
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer::new(AnalyzerConfig::default())
    }
}

impl Analyzer {
    /// Re-runs the stopword entries through this configuration's
    /// normalization and stripping so stopword matching is closed under the
    /// pipeline.
    pub fn new(mut config: AnalyzerConfig) -> Self {
        let words = std::mem::take(&mut config.stopwords.0);
        config.stopwords.0 = words
            .iter()
            .filter_map(|w| {
                canonical_entry(
                    w,
                    config.normalize_unicode,
                    config.strip_diacritics,
                    config.strip_symbols,
                )
            })
            .collect();
        Analyzer { config }
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.config
    }

    pub fn analyze(&self, text: &str) -> TokenStream {
        let c = &self.config;
        let normalized;
        let text = if c.normalize_unicode {
            normalized = normalize(text, c.strip_diacritics);
            normalized.as_str()
        } else {
            text
        };
        text.split_whitespace()
            .filter_map(|tok| {
                let tok = if c.strip_symbols {
                    strip_symbols(tok)
                } else {
                    tok.to_string()
                };
                if tok.is_empty() || c.stopwords.contains(&tok) {
                    return None;
                }
                Some(match c.stemmer {
                    Some(s) => s.stem(&tok),
                    None => tok,
                })
            })
            .collect()
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        let c = &self.config;
        enc.u8(c.normalize_unicode as u8);
        enc.u8(c.strip_diacritics as u8);
        enc.u8(c.strip_symbols as u8);
        enc.u8(c.stemmer.map_or(0, StemmerKind::code));
        enc.len_prefix(c.stopwords.len());
        for w in c.stopwords.iter() {
            enc.str(w);
        }
    }

    pub(crate) fn decode(dec: &mut Decoder<'_>) -> Result<Self, FormatError> {
        let flag = |v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(FormatError::Malformed(format!("invalid analyzer flag {v}"))),
        };
        let normalize_unicode = flag(dec.u8()?)?;
        let strip_diacritics = flag(dec.u8()?)?;
        let strip_symbols = flag(dec.u8()?)?;
        let stemmer = StemmerKind::from_code(dec.u8()?)
            .ok_or_else(|| FormatError::Malformed("unknown stemmer code".into()))?;
        let n = dec.len_prefix(4)?;
        let mut words = BTreeSet::new();
        for _ in 0..n {
            words.insert(dec.str()?);
        }
        Ok(Analyzer {
            config: AnalyzerConfig {
                stopwords: StopWords(words),
                normalize_unicode,
                strip_diacritics,
                strip_symbols,
                stemmer,
            },
        })
    }

    /// SHA-256 over the canonical encoding of the configuration.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut enc = Encoder::new();
        enc.str("catsearch-analyzer");
        self.encode(&mut enc);
        Sha256::digest(enc.finish()).into()
    }
}

pub fn fingerprint_hex(fp: &[u8; 32]) -> String {
    fp.iter().map(|b| format!("{b:02x}")).collect()
}
