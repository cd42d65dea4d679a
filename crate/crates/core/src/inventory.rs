//! Per-language phoneme inventories and their phonological class taxonomy.
//!
//! Inventory files are UTF-8 text with two mandatory headers and one record
//! per phoneme:
//!
//! ```text
//! language: german
//! silence: SIL
//! f	fricative
//! ts	affricate
//! ```
//!
//! An optional `count: <n>` header is checked against the number of records.
//! Blank lines and lines starting with `#` are ignored. File order is the
//! canonical order used for every tie-break downstream.

// records in the doc example above are tab-separated on purpose
#![allow(clippy::tabs_in_doc_comments)]

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{read_utf8, Error, Result};

/// Phonological category of a phone. `Silence` is reserved for the silence
/// token and never appears in an inventory record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhonemeClass {
    Fricative,
    Affricate,
    Plosive,
    Vibrant,
    Nasal,
    Approximant,
    Monophthong,
    Diphthong,
    Silence,
}

impl PhonemeClass {
    pub const COUNT: usize = 9;

    pub const ALL: [PhonemeClass; Self::COUNT] = [
        PhonemeClass::Fricative,
        PhonemeClass::Affricate,
        PhonemeClass::Plosive,
        PhonemeClass::Vibrant,
        PhonemeClass::Nasal,
        PhonemeClass::Approximant,
        PhonemeClass::Monophthong,
        PhonemeClass::Diphthong,
        PhonemeClass::Silence,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhonemeClass::Fricative => "fricative",
            PhonemeClass::Affricate => "affricate",
            PhonemeClass::Plosive => "plosive",
            PhonemeClass::Vibrant => "vibrant",
            PhonemeClass::Nasal => "nasal",
            PhonemeClass::Approximant => "approximant",
            PhonemeClass::Monophthong => "monophthong",
            PhonemeClass::Diphthong => "diphthong",
            PhonemeClass::Silence => "silence",
        }
    }
}

impl fmt::Display for PhonemeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhonemeClass {
    type Err = Error;

    /// Parses one of the eight phoneme class labels. `silence` is rejected:
    /// it is not a valid class for an inventory record.
    fn from_str(s: &str) -> Result<Self> {
        PhonemeClass::ALL[..8]
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

/// A language's phoneme set plus the silence token.
///
/// Phone indices `0..len()` address phonemes in file order and
/// `silence_index() == len()` addresses silence, so every label fits in
/// `0..num_labels()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    language: String,
    phonemes: Vec<String>,
    classes: Vec<PhonemeClass>,
    silence: String,
    index: HashMap<String, usize>,
}

impl PhonemeInventory {
    /// Builds and validates an inventory from `(symbol, class)` pairs.
    pub fn new(
        language: impl Into<String>,
        silence: impl Into<String>,
        records: impl IntoIterator<Item = (String, PhonemeClass)>,
    ) -> Result<Self> {
        let silence = silence.into();
        if silence.is_empty() {
            return Err(Error::MissingHeader("silence"));
        }
        let mut phonemes = Vec::new();
        let mut classes = Vec::new();
        let mut index = HashMap::new();
        for (symbol, class) in records {
            if symbol.is_empty() {
                return Err(Error::Invalid("empty phoneme symbol".into()));
            }
            if class == PhonemeClass::Silence {
                return Err(Error::UnknownClass(class.to_string()));
            }
            if symbol == silence || index.contains_key(&symbol) {
                return Err(Error::DuplicateSymbol(symbol));
            }
            index.insert(symbol.clone(), phonemes.len());
            phonemes.push(symbol);
            classes.push(class);
        }
        index.insert(silence.clone(), phonemes.len());
        Ok(PhonemeInventory {
            language: language.into(),
            phonemes,
            classes,
            silence,
            index,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_utf8(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses the inventory text format. `context` names the source in errors.
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut language = None;
        let mut silence = None;
        let mut declared = None;
        let mut records = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                context: context.to_string(),
                line: lineno + 1,
                message,
            };
            if let Some((symbol, class)) = line.split_once('\t') {
                let class: PhonemeClass = class.trim().parse()?;
                records.push((symbol.trim().to_string(), class));
            } else if let Some((key, value)) = line.split_once(':') {
                let value = value.trim().to_string();
                match key.trim() {
                    "language" => language = Some(value),
                    "silence" => silence = Some(value),
                    "count" => {
                        declared = Some(
                            value
                                .parse::<usize>()
                                .map_err(|_| parse_err(format!("invalid count `{value}`")))?,
                        )
                    }
                    other => return Err(parse_err(format!("unknown header `{other}`"))),
                }
            } else {
                return Err(parse_err(format!("expected `<symbol>\\t<class>`, got `{line}`")));
            }
        }
        let language = language.ok_or(Error::MissingHeader("language"))?;
        let silence = silence.ok_or(Error::MissingHeader("silence"))?;
        if let Some(declared) = declared {
            if declared != records.len() {
                return Err(Error::CountMismatch {
                    declared,
                    found: records.len(),
                });
            }
        }
        Self::new(language, silence, records)
    }

    /// Serializes back to the text format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut out = format!("language: {}\nsilence: {}\n", self.language, self.silence);
        for (symbol, class) in self.phonemes.iter().zip(&self.classes) {
            out.push_str(symbol);
            out.push('\t');
            out.push_str(class.as_str());
            out.push('\n');
        }
        out
    }

    /// One of the shipped benchmark inventories, by lowercase language name.
    pub fn builtin(language: &str) -> Option<Self> {
        let text = BUILTIN.iter().find(|(name, _)| *name == language)?.1;
        Some(Self::parse(text, language).expect("shipped inventory is valid"))
    }

    pub fn builtin_languages() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(name, _)| *name)
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    /// Number of phonemes, excluding silence.
    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }

    /// Number of distinct labels: phonemes plus silence.
    pub fn num_labels(&self) -> usize {
        self.phonemes.len() + 1
    }

    /// Vocabulary size of the one-to-one track, |P| + 1.
    pub fn one_to_one_vocab_size(&self) -> usize {
        self.num_labels()
    }

    pub fn silence(&self) -> &str {
        &self.silence
    }

    pub fn silence_index(&self) -> usize {
        self.phonemes.len()
    }

    pub fn phonemes(&self) -> &[String] {
        &self.phonemes
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// Symbol for a label index; silence for `silence_index()`.
    pub fn symbol(&self, index: usize) -> &str {
        self.phonemes.get(index).map_or(self.silence.as_str(), String::as_str)
    }

    pub fn class_of(&self, index: usize) -> PhonemeClass {
        self.classes.get(index).copied().unwrap_or(PhonemeClass::Silence)
    }
}

const BUILTIN: &[(&str, &str)] = &[
    ("german", include_str!("../data/inventories/german.txt")),
    ("swahili", include_str!("../data/inventories/swahili.txt")),
    ("tamil", include_str!("../data/inventories/tamil.txt")),
    ("thai", include_str!("../data/inventories/thai.txt")),
    ("turkish", include_str!("../data/inventories/turkish.txt")),
    ("ukrainian", include_str!("../data/inventories/ukrainian.txt")),
    ("basque", include_str!("../data/inventories/basque.txt")),
    ("english", include_str!("../data/inventories/english.txt")),
    ("french", include_str!("../data/inventories/french.txt")),
    ("japanese", include_str!("../data/inventories/japanese.txt")),
    ("mandarin", include_str!("../data/inventories/mandarin.txt")),
    ("wolof", include_str!("../data/inventories/wolof.txt")),
];
