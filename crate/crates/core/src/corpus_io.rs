//! Gold phone alignments, unit transcriptions and evaluation manifests.
//!
//! * Gold: TSV `utterance_id speaker_id phone onset_sec offset_sec`, sorted by
//!   utterance then onset. Stretches not covered by a segment are silence.
//! * Units: a `frame_rate: <Hz>` header (optionally `vocab_size: <n>`), then
//!   one `utterance_id u1 u2 ... uT` line per utterance.
//! * Manifest: `key: value` lines naming the language, track, vocabulary
//!   size, split and the three input files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{read_utf8, Error, Result};
use crate::inventory::PhonemeInventory;
use crate::time::{FrameRate, Micros};

pub type UnitId = u32;

/// Benchmark vocabulary size of the many-to-one track.
pub const DEFAULT_MANY_TO_ONE_VOCAB: usize = 256;

/// Environment variable naming the directory relative manifest paths are
/// resolved against when the manifest has no `root:` key.
pub const DATA_ROOT_ENV: &str = "UNITSCORE_DATA_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhoneSegment {
    /// Label index into the inventory (silence allowed).
    pub phone: usize,
    pub onset: Micros,
    pub offset: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldUtterance {
    pub speaker: String,
    pub segments: Vec<PhoneSegment>,
    pub duration: Micros,
}

impl GoldUtterance {
    /// Segments with every gap (including a leading one) filled by silence,
    /// covering `[0, duration)` contiguously.
    pub fn filled(&self, silence: usize) -> Vec<PhoneSegment> {
        let mut out = Vec::with_capacity(self.segments.len() * 2 + 1);
        let mut cursor = Micros::ZERO;
        for seg in &self.segments {
            if seg.onset > cursor {
                out.push(PhoneSegment {
                    phone: silence,
                    onset: cursor,
                    offset: seg.onset,
                });
            }
            out.push(*seg);
            cursor = seg.offset;
        }
        if self.duration > cursor {
            out.push(PhoneSegment {
                phone: silence,
                onset: cursor,
                offset: self.duration,
            });
        }
        out
    }

    /// Label covering time `t` under half-open segments `[onset, offset)`;
    /// silence outside every segment.
    pub fn label_at(&self, t: Micros, silence: usize) -> usize {
        let k = self.segments.partition_point(|s| s.onset <= t);
        match k.checked_sub(1).map(|i| &self.segments[i]) {
            Some(seg) if t < seg.offset => seg.phone,
            _ => silence,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhoneCorpus {
    pub utterances: BTreeMap<String, GoldUtterance>,
}

impl PhoneCorpus {
    pub fn load(path: impl AsRef<Path>, inv: &PhonemeInventory) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_utf8(path)?, inv, &path.display().to_string())
    }

    pub fn parse(text: &str, inv: &PhonemeInventory, context: &str) -> Result<Self> {
        let mut utterances: BTreeMap<String, GoldUtterance> = BTreeMap::new();
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
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [utt, speaker, phone, onset, offset] = fields[..] else {
                return Err(parse_err(format!("expected 5 tab-separated fields, got {}", fields.len())));
            };
            let onset_t = Micros::parse_secs(onset).ok_or_else(|| parse_err(format!("invalid onset `{onset}`")))?;
            let offset_t = Micros::parse_secs(offset).ok_or_else(|| parse_err(format!("invalid offset `{offset}`")))?;
            if onset_t < Micros::ZERO {
                return Err(parse_err(format!("negative onset `{onset}`")));
            }
            if offset_t <= onset_t {
                return Err(Error::EmptySegment {
                    utterance: utt.to_string(),
                    onset: onset_t.to_string(),
                    offset: offset_t.to_string(),
                });
            }
            let phone = inv.index_of(phone).ok_or_else(|| Error::UnknownSymbol {
                symbol: phone.to_string(),
                utterance: utt.to_string(),
            })?;
            let entry = utterances.entry(utt.to_string()).or_insert_with(|| GoldUtterance {
                speaker: speaker.to_string(),
                segments: Vec::new(),
                duration: Micros::ZERO,
            });
            if entry.speaker != speaker {
                return Err(parse_err(format!(
                    "utterance {utt} changes speaker from {} to {speaker}",
                    entry.speaker
                )));
            }
            if let Some(prev) = entry.segments.last() {
                if onset_t < prev.offset {
                    return Err(Error::Overlap {
                        utterance: utt.to_string(),
                        onset: onset_t.to_string(),
                        offset: offset_t.to_string(),
                    });
                }
            }
            entry.segments.push(PhoneSegment {
                phone,
                onset: onset_t,
                offset: offset_t,
            });
            entry.duration = offset_t;
        }
        Ok(PhoneCorpus { utterances })
    }

    /// Writes the gold TSV format.
    pub fn to_tsv(&self, inv: &PhonemeInventory) -> String {
        let mut out = String::new();
        for (utt, u) in &self.utterances {
            for seg in &u.segments {
                out.push_str(&format!(
                    "{utt}\t{}\t{}\t{}\t{}\n",
                    u.speaker,
                    inv.symbol(seg.phone),
                    seg.onset,
                    seg.offset
                ));
            }
        }
        out
    }

    pub fn get(&self, utt: &str) -> Result<&GoldUtterance> {
        self.utterances
            .get(utt)
            .ok_or_else(|| Error::UnknownUtterance(utt.to_string()))
    }

    pub fn num_segments(&self) -> usize {
        self.utterances.values().map(|u| u.segments.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitCorpus {
    pub frame_rate: FrameRate,
    /// Vocabulary size declared in the file header, if any.
    pub vocab_size: Option<usize>,
    pub utterances: BTreeMap<String, Vec<UnitId>>,
    /// Non-fatal oddities found while loading, e.g. empty utterances.
    pub warnings: Vec<String>,
}

impl UnitCorpus {
    pub fn new(frame_rate: FrameRate) -> Self {
        UnitCorpus {
            frame_rate,
            vocab_size: None,
            utterances: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_utf8(path)?, &path.display().to_string())
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut frame_rate = None;
        let mut vocab_size = None;
        let mut utterances = BTreeMap::new();
        let mut warnings = Vec::new();
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
            if utterances.is_empty() {
                if let Some((key, value)) = line.split_once(':') {
                    match key.trim() {
                        "frame_rate" => {
                            frame_rate = Some(value.parse::<FrameRate>().map_err(parse_err)?);
                            continue;
                        }
                        "vocab_size" => {
                            let v = value.trim();
                            vocab_size = Some(v.parse::<usize>().map_err(|_| parse_err(format!("invalid vocab_size `{v}`")))?);
                            continue;
                        }
                        _ => {}
                    }
                }
            }
            if frame_rate.is_none() {
                return Err(parse_err("missing `frame_rate:` header".into()));
            }
            let mut tokens = token_columns(line);
            let Some((_, utt)) = tokens.next() else { continue };
            let mut units = Vec::new();
            for (column, tok) in tokens {
                let unit = parse_unit(tok).map_err(|why| {
                    parse_err(format!("utterance {utt}, column {column}: {why} `{tok}`"))
                })?;
                if let Some(v) = vocab_size {
                    if unit as usize >= v {
                        return Err(Error::UnitOutOfRange { unit, vocab: v });
                    }
                }
                units.push(unit);
            }
            if units.is_empty() {
                log::warn!("{context}:{}: utterance {utt} has no frames", lineno + 1);
                warnings.push(format!("utterance {utt} has no frames"));
            }
            if utterances.insert(utt.to_string(), units).is_some() {
                return Err(parse_err(format!("duplicate utterance {utt}")));
            }
        }
        let frame_rate = frame_rate.ok_or_else(|| Error::Parse {
            context: context.to_string(),
            line: 1,
            message: "missing `frame_rate:` header".into(),
        })?;
        Ok(UnitCorpus {
            frame_rate,
            vocab_size,
            utterances,
            warnings,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("frame_rate: {}\n", self.frame_rate);
        if let Some(v) = self.vocab_size {
            out.push_str(&format!("vocab_size: {v}\n"));
        }
        for (utt, units) in &self.utterances {
            out.push_str(utt);
            for u in units {
                out.push(' ');
                out.push_str(&u.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn total_frames(&self) -> usize {
        self.utterances.values().map(Vec::len).sum()
    }

    /// Checks every unit id is below `vocab`.
    pub fn check_vocab(&self, vocab: usize) -> Result<()> {
        for units in self.utterances.values() {
            if let Some(&unit) = units.iter().find(|&&u| u as usize >= vocab) {
                return Err(Error::UnitOutOfRange { unit, vocab });
            }
        }
        Ok(())
    }
}

/// Whitespace-separated tokens with their 1-based character column.
fn token_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_whitespace())?;
        let after = &rest[start..];
        let len = after.find(char::is_whitespace).unwrap_or(after.len());
        let col = line[..offset + start].chars().count() + 1;
        let tok = &after[..len];
        offset += start + len;
        rest = &after[len..];
        Some((col, tok))
    })
}

fn parse_unit(tok: &str) -> std::result::Result<UnitId, &'static str> {
    if tok.starts_with('-') && tok[1..].bytes().all(|b| b.is_ascii_digit()) && tok.len() > 1 {
        return Err("negative unit id");
    }
    tok.parse::<UnitId>().map_err(|_| "non-integer unit token")
}

/// Fails with the complete lists of utterances present on one side only.
pub fn check_utterances(gold: &PhoneCorpus, units: &UnitCorpus) -> Result<()> {
    let g: BTreeSet<&String> = gold.utterances.keys().collect();
    let u: BTreeSet<&String> = units.utterances.keys().collect();
    let missing_in_units: Vec<String> = g.difference(&u).map(|s| s.to_string()).collect();
    let missing_in_gold: Vec<String> = u.difference(&g).map(|s| s.to_string()).collect();
    if missing_in_units.is_empty() && missing_in_gold.is_empty() {
        Ok(())
    } else {
        Err(Error::UtteranceMismatch {
            missing_in_units,
            missing_in_gold,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Track {
    #[serde(rename = "many-to-one")]
    ManyToOne,
    #[serde(rename = "one-to-one")]
    OneToOne,
}

impl Track {
    pub fn as_str(self) -> &'static str {
        match self {
            Track::ManyToOne => "many-to-one",
            Track::OneToOne => "one-to-one",
        }
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Track {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "many-to-one" => Ok(Track::ManyToOne),
            "one-to-one" => Ok(Track::OneToOne),
            other => Err(Error::Invalid(format!("unknown track `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub language: String,
    pub track: Track,
    pub vocab_size: usize,
    pub inventory: PathBuf,
    pub gold: PathBuf,
    pub units: PathBuf,
    pub split: String,
    /// Optional directory of continuous features for ABX.
    pub features: Option<PathBuf>,
}

impl Manifest {
    /// Loads a manifest, resolves its paths and checks the track/vocabulary
    /// constraint against the referenced inventory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_utf8(path)?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let base = std::path::absolute(&base).map_err(|e| Error::io(&base, e))?;
        let env_root = std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from);
        Self::parse(&text, &path.display().to_string(), &base, env_root.as_deref())
    }

    /// Parses manifest text. Relative paths resolve against the manifest's
    /// `root:` key, then `env_root`, then `base`.
    pub fn parse(text: &str, context: &str, base: &Path, env_root: Option<&Path>) -> Result<Self> {
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once(':') else {
                return Err(Error::Parse {
                    context: context.to_string(),
                    line: lineno + 1,
                    message: format!("expected `key: value`, got `{line}`"),
                });
            };
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let take = |key: &'static str| fields.get(key).cloned().ok_or(Error::MissingField(key));
        let root = match fields.get("root") {
            Some(r) => base.join(r),
            None => env_root.map(Path::to_path_buf).unwrap_or_else(|| base.to_path_buf()),
        };
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                root.join(p)
            }
        };
        let track: Track = take("track")?.parse()?;
        let inventory = resolve(take("inventory")?);
        let inv = PhonemeInventory::load(&inventory)?;
        let vocab_size = match fields.get("vocab_size") {
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| Error::Invalid(format!("invalid vocab_size `{v}`")))?,
            None => match track {
                Track::ManyToOne => DEFAULT_MANY_TO_ONE_VOCAB,
                Track::OneToOne => inv.one_to_one_vocab_size(),
            },
        };
        if vocab_size == 0 {
            return Err(Error::Invalid("vocab_size must be positive".into()));
        }
        if track == Track::OneToOne && vocab_size != inv.one_to_one_vocab_size() {
            return Err(Error::VocabMismatch {
                expected: inv.one_to_one_vocab_size(),
                found: vocab_size,
            });
        }
        Ok(Manifest {
            language: take("language")?,
            track,
            vocab_size,
            inventory,
            gold: resolve(take("gold")?),
            units: resolve(take("units")?),
            split: take("split")?,
            features: fields.get("features").cloned().map(resolve),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "language: {}\ntrack: {}\nvocab_size: {}\nsplit: {}\ninventory: {}\ngold: {}\nunits: {}\n",
            self.language,
            self.track,
            self.vocab_size,
            self.split,
            self.inventory.display(),
            self.gold.display(),
            self.units.display()
        );
        if let Some(f) = &self.features {
            out.push_str(&format!("features: {}\n", f.display()));
        }
        out
    }
}
