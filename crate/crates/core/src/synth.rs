//! Synthetic corpora with known ground truth, and brute-force oracles.
//!
//! Every gold phone owns `units_per_phone` dedicated units (silence included):
//! label `l` owns units `l*upp .. (l+1)*upp`. Each frame of a segment emits
//! one of its label's units at random. Noise is applied per segment, so every
//! planted edit is one transcription edit:
//!
//! * deletion: the segment continues the previous run;
//! * substitution: the segment is emitted as another phone;
//! * insertion: the segment's tail is split into extra runs of other phones.
//!
//! Phones never repeat within two positions, and replacement labels avoid
//! their neighbours, so run-length collapsing cannot merge or split tokens
//! by accident.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use itertools::Itertools;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abx::FrameMatrix;
use crate::corpus_io::{GoldUtterance, PhoneCorpus, PhoneSegment, Track, UnitCorpus, UnitId};
use crate::error::{Error, Result};
use crate::framesync::{label_frames, ContingencyTable};
use crate::inventory::{PhonemeClass, PhonemeInventory};
use crate::time::{FrameRate, Micros};

type ClassMatrix = [[f64; PhonemeClass::COUNT]; PhonemeClass::COUNT];

#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub inventory: PhonemeInventory,
    pub units_per_phone: usize,
    /// Probability that a segment is replaced by another phone.
    pub substitution: f64,
    /// Probability of each successive inserted run in a segment: a segment
    /// receives `k` insertions with probability `(1−p)·p^k`, capped by its
    /// frame count.
    pub insertion: f64,
    /// Probability that a segment is deleted.
    pub deletion: f64,
    /// Segment duration range in seconds, rounded inward to whole frames.
    pub min_duration: f64,
    pub max_duration: f64,
    pub frame_rate: FrameRate,
    pub seed: u64,
    pub speakers: usize,
    /// Phones per utterance, inclusive range.
    pub min_phones: usize,
    pub max_phones: usize,
    /// Distribution of the replacement class given the gold class.
    /// `None` picks replacement phones uniformly.
    pub class_plan: Option<ClassMatrix>,
}

impl ChannelSpec {
    pub fn new(inventory: PhonemeInventory) -> Self {
        ChannelSpec {
            inventory,
            units_per_phone: 1,
            substitution: 0.0,
            insertion: 0.0,
            deletion: 0.0,
            min_duration: 0.04,
            max_duration: 0.16,
            frame_rate: FrameRate::hz(50),
            seed: 0,
            speakers: 4,
            min_phones: 8,
            max_phones: 16,
            class_plan: None,
        }
    }

    fn frame_range(&self) -> Result<(usize, usize)> {
        let r = self.frame_rate.as_f64();
        let lo = ((self.min_duration * r - 1e-9).ceil() as usize).max(1);
        let hi = (self.max_duration * r + 1e-9).floor() as usize;
        if hi < lo {
            return Err(Error::Invalid("segment duration range holds no whole frame".into()));
        }
        Ok((lo, hi))
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("substitution", self.substitution),
            ("insertion", self.insertion),
            ("deletion", self.deletion),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Invalid(format!("{name} rate {p} is outside [0, 1)")));
            }
        }
        if self.substitution + self.deletion >= 1.0 {
            return Err(Error::Invalid("substitution + deletion must stay below 1".into()));
        }
        if self.min_duration > self.max_duration || self.min_duration < 0.0 {
            return Err(Error::Invalid("bad segment duration range".into()));
        }
        if self.inventory.len() < 5 {
            return Err(Error::Invalid("the generator needs at least 5 phonemes".into()));
        }
        if self.units_per_phone == 0 || self.speakers == 0 || self.min_phones == 0 || self.min_phones > self.max_phones {
            return Err(Error::Invalid("units per phone, speakers and phone counts must be positive".into()));
        }
        self.frame_range().map(|_| ())
    }

    pub fn vocab_size(&self) -> usize {
        self.inventory.num_labels() * self.units_per_phone
    }
}

/// What the generator planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Planted {
    pub seed: u64,
    pub units_per_phone: usize,
    pub vocab_size: usize,
    /// Label owning each unit, by unit id.
    pub owner: Vec<usize>,
    pub substitutions: u64,
    pub deletions: u64,
    pub insertions: u64,
    /// Gold transcription tokens (phone segments, silence excluded).
    pub gold_tokens: u64,
    /// Realized substitutions by (gold class, replacement class), in
    /// `PhonemeClass::ALL` order.
    pub class_substitutions: Vec<Vec<u64>>,
}

impl Planted {
    /// Planted edits per gold token.
    pub fn per(&self) -> f64 {
        (self.substitutions + self.deletions + self.insertions) as f64 / self.gold_tokens as f64
    }

    /// Row-normalized realized class substitutions in percent.
    pub fn class_rows(&self) -> Vec<Option<Vec<f64>>> {
        self.class_substitutions
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                (total > 0).then(|| row.iter().map(|&c| c as f64 * 100.0 / total as f64).collect())
            })
            .collect()
    }
}

struct Runs {
    runs: Vec<(usize, usize)>,
}

impl Runs {
    fn last_label(&self) -> usize {
        self.runs.last().map(|r| r.0).unwrap_or(usize::MAX)
    }

    fn push(&mut self, label: usize, frames: usize) {
        match self.runs.last_mut() {
            Some(last) if last.0 == label => last.1 += frames,
            _ => self.runs.push((label, frames)),
        }
    }
}

fn pick_excluding(rng: &mut ChaCha8Rng, candidates: &[usize], exclude: &[usize]) -> Option<usize> {
    let allowed: Vec<usize> = candidates.iter().copied().filter(|c| !exclude.contains(c)).collect();
    allowed.choose(rng).copied()
}

/// Generates `utterances` utterances. The same spec and count always produce
/// identical corpora.
pub fn generate(spec: &ChannelSpec, utterances: usize) -> Result<(PhoneCorpus, UnitCorpus, Planted)> {
    spec.validate()?;
    let inv = &spec.inventory;
    let silence = inv.silence_index();
    let upp = spec.units_per_phone;
    let (fmin, fmax) = spec.frame_range()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phones: Vec<usize> = (0..inv.len()).collect();
    let by_class: Vec<Vec<usize>> = PhonemeClass::ALL
        .iter()
        .map(|&c| phones.iter().copied().filter(|&p| inv.class_of(p) == c).collect())
        .collect();
    let plan: Option<Vec<Option<WeightedIndex<f64>>>> = spec
        .class_plan
        .map(|m| m.iter().map(|row| WeightedIndex::new(row.iter().copied()).ok()).collect());

    let mut gold = PhoneCorpus::default();
    let mut units = UnitCorpus::new(spec.frame_rate);
    units.vocab_size = Some(spec.vocab_size());
    let mut planted = Planted {
        seed: spec.seed,
        units_per_phone: upp,
        vocab_size: spec.vocab_size(),
        owner: (0..spec.vocab_size()).map(|u| u / upp).collect(),
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        gold_tokens: 0,
        class_substitutions: vec![vec![0; PhonemeClass::COUNT]; PhonemeClass::COUNT],
    };

    for n in 0..utterances {
        let count = rng.gen_range(spec.min_phones..=spec.max_phones);
        let mut seq: Vec<usize> = Vec::with_capacity(count);
        for k in 0..count {
            let mut exclude = Vec::new();
            exclude.extend(k.checked_sub(1).map(|i| seq[i]));
            exclude.extend(k.checked_sub(2).map(|i| seq[i]));
            seq.push(pick_excluding(&mut rng, &phones, &exclude).expect("inventory has at least 5 phones"));
        }
        let lead = rng.gen_range(1..=fmax);
        let durations: Vec<usize> = (0..count).map(|_| rng.gen_range(fmin..=fmax)).collect();
        let trail = rng.gen_range(1..=fmax);

        let mut runs = Runs { runs: vec![(silence, lead)] };
        let mut after_edit = false;
        let mut segments = Vec::with_capacity(count + 1);
        let mut cursor = lead;
        for k in 0..count {
            let p = seq[k];
            let frames = durations[k];
            let next = seq.get(k + 1).copied().unwrap_or(silence);
            let next2 = seq.get(k + 2).copied().unwrap_or(silence);
            segments.push(PhoneSegment {
                phone: p,
                onset: spec.frame_rate.frame_onset(cursor),
                offset: spec.frame_rate.frame_onset(cursor + frames),
            });
            cursor += frames;

            let u: f64 = rng.gen();
            if u < spec.deletion && !after_edit {
                let prev = runs.last_label();
                runs.push(prev, frames);
                planted.deletions += 1;
                after_edit = true;
                continue;
            }
            after_edit = false;
            let mut label = p;
            if u >= spec.deletion && u < spec.deletion + spec.substitution {
                // the previous gold phone too: otherwise `x a -> x' x` aligns as I + match + D
                let prev = k.checked_sub(1).map_or(silence, |i| seq[i]);
                let exclude = [p, prev, runs.last_label(), next, next2];
                let from_plan = plan.as_ref().and_then(|rows| {
                    let dist = rows[inv.class_of(p).index()].as_ref()?;
                    let class = dist.sample(&mut rng);
                    pick_excluding(&mut rng, &by_class[class], &exclude)
                });
                if let Some(q) = from_plan.or_else(|| pick_excluding(&mut rng, &phones, &exclude)) {
                    label = q;
                    planted.substitutions += 1;
                    planted.class_substitutions[inv.class_of(p).index()][inv.class_of(q).index()] += 1;
                }
            }
            let mut inserted = 0;
            while inserted + 1 < frames && rng.gen::<f64>() < spec.insertion {
                inserted += 1;
            }
            if inserted == 0 {
                runs.push(label, frames);
                continue;
            }
            // cut points split the segment into 1 + inserted runs
            let mut cuts = rand::seq::index::sample(&mut rng, frames - 1, inserted).into_vec();
            cuts.iter_mut().for_each(|c| *c += 1);
            cuts.sort_unstable();
            let mut start = 0;
            let mut run_label = label;
            for (i, &c) in cuts.iter().chain(std::iter::once(&frames)).enumerate() {
                if i > 0 {
                    let last = i == inserted;
                    let exclude = [p, label, run_label, if last { next } else { p }];
                    run_label = pick_excluding(&mut rng, &phones, &exclude).expect("inventory has at least 5 phones");
                }
                runs.push(run_label, c - start);
                start = c;
            }
            planted.insertions += inserted as u64;
            after_edit = true;
        }
        segments.push(PhoneSegment {
            phone: silence,
            onset: spec.frame_rate.frame_onset(cursor),
            offset: spec.frame_rate.frame_onset(cursor + trail),
        });
        runs.push(silence, trail);
        planted.gold_tokens += count as u64;

        let stream: Vec<UnitId> = runs
            .runs
            .iter()
            .flat_map(|&(label, frames)| std::iter::repeat_n(label, frames))
            .map(|label| (label * upp + rng.gen_range(0..upp)) as UnitId)
            .collect();
        let id = format!("utt{n:05}");
        gold.utterances.insert(
            id.clone(),
            GoldUtterance {
                speaker: format!("spk{:02}", n % spec.speakers),
                duration: spec.frame_rate.frame_onset(cursor + trail),
                segments,
            },
        );
        units.utterances.insert(id, stream);
    }
    Ok((gold, units, planted))
}

/// Files written by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub manifest: PathBuf,
    pub inventory: PathBuf,
    pub gold: PathBuf,
    pub units: PathBuf,
    pub planted: Option<PathBuf>,
}

/// Writes the inventory, gold, units, a manifest and (if given) the planted
/// record into `dir`.
pub fn write_corpus(
    dir: &Path,
    inv: &PhonemeInventory,
    gold: &PhoneCorpus,
    units: &UnitCorpus,
    planted: Option<&Planted>,
    track: Track,
    split: &str,
) -> Result<CorpusFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: &str| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let inventory = write("inventory.txt", &inv.to_text())?;
    let gold_path = write("gold.tsv", &gold.to_tsv(inv))?;
    let units_path = write("units.txt", &units.to_text())?;
    let planted_path = match planted {
        Some(p) => Some(write("planted.json", &(serde_json::to_string_pretty(p)? + "\n"))?),
        None => None,
    };
    let vocab = match track {
        Track::OneToOne => inv.one_to_one_vocab_size(),
        Track::ManyToOne => units.vocab_size.unwrap_or(crate::corpus_io::DEFAULT_MANY_TO_ONE_VOCAB),
    };
    let manifest = write(
        "manifest.txt",
        &format!(
            "language: {}\ntrack: {track}\nvocab_size: {vocab}\ninventory: inventory.txt\ngold: gold.tsv\nunits: units.txt\nsplit: {split}\n",
            inv.language()
        ),
    )?;
    Ok(CorpusFiles {
        manifest,
        inventory,
        gold: gold_path,
        units: units_path,
        planted: planted_path,
    })
}

/// Units from a 1-D latent channel quantized at several resolutions.
///
/// Each frame's latent is its gold label index, plus an offset drawn once
/// per segment, plus small per-frame jitter. All levels cut the same latent
/// range into equal bins, so when levels divide each other the finer
/// quantization refines the coarser one.
#[derive(Debug, Clone, Copy)]
pub struct LatentChannel {
    /// Half-width of the uniform per-segment offset.
    pub spread: f64,
    /// Half-width of the uniform per-frame jitter.
    pub jitter: f64,
    pub seed: u64,
}

impl LatentChannel {
    pub fn quantize(&self, gold: &PhoneCorpus, rate: FrameRate, silence: usize, levels: &[usize]) -> Result<Vec<UnitCorpus>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut latents: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (id, u) in &gold.utterances {
            let frames = (0..).find(|&k| rate.center_cmp(k, u.duration).is_ge()).unwrap_or(0);
            let labels = label_frames(id, u, frames, rate, silence)?;
            let mut xs = Vec::with_capacity(frames);
            let mut offset = 0.0;
            for (k, &l) in labels.iter().enumerate() {
                if k == 0 || labels[k - 1] != l {
                    offset = rng.gen_range(-self.spread..=self.spread);
                }
                xs.push(l as f64 + offset + rng.gen_range(-self.jitter..=self.jitter));
            }
            latents.insert(id, xs);
        }
        let margin = self.spread + self.jitter;
        let (lo, hi) = (-margin, silence as f64 + margin);
        levels
            .iter()
            .map(|&k| {
                let mut uc = UnitCorpus::new(rate);
                uc.vocab_size = Some(k);
                for (id, xs) in &latents {
                    let us = xs
                        .iter()
                        .map(|&x| (((x - lo) / (hi - lo) * k as f64).floor() as usize).min(k - 1) as UnitId)
                        .collect();
                    uc.utterances.insert(id.to_string(), us);
                }
                Ok(uc)
            })
            .collect()
    }
}

/// Continuous features for a corpus: each label gets a fixed random
/// direction in `dims` dimensions, and every frame is its gold label's
/// direction plus uniform noise of half-width `noise` per coordinate.
pub fn label_features(
    gold: &PhoneCorpus,
    units: &UnitCorpus,
    inv: &PhonemeInventory,
    dims: usize,
    noise: f64,
    seed: u64,
) -> Result<BTreeMap<String, FrameMatrix<f32>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..inv.num_labels())
        .map(|_| (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let streams = crate::framesync::gold_streams(gold, units, inv)?;
    let mut out = BTreeMap::new();
    for (id, labels) in streams {
        let data: Vec<f32> = labels
            .iter()
            .flat_map(|&l| dirs[l].iter().map(|&x| x + rng.gen_range(-noise..=noise)).collect::<Vec<_>>())
            .map(|x| x as f32)
            .collect();
        out.insert(id, FrameMatrix::new(labels.len(), dims, data)?);
    }
    Ok(out)
}

/// Every optimal bijection of a square table, by enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleAssignment {
    /// Best Σ counts over bijections.
    pub value: u64,
    /// All optimal maps, unit → label, in lexicographic order.
    pub optima: Vec<Vec<usize>>,
}

pub const ORACLE_MAX_LABELS: usize = 8;
pub const ORACLE_MAX_BOUNDARIES: usize = 12;

pub fn oracle_assignment(table: &ContingencyTable) -> Result<OracleAssignment> {
    let n = table.rows();
    if n > ORACLE_MAX_LABELS {
        return Err(Error::TooLarge(format!("{n} labels > {ORACLE_MAX_LABELS}")));
    }
    if table.cols() != n {
        return Err(Error::Dimension(format!("{}x{} table is not square", n, table.cols())));
    }
    let mut best = 0;
    let mut optima = Vec::new();
    for perm in (0..n).permutations(n) {
        let v: u64 = perm.iter().enumerate().map(|(unit, &label)| table.get(label, unit)).sum();
        if v > best || optima.is_empty() {
            best = v;
            optima.clear();
        }
        if v == best {
            optima.push(perm);
        }
    }
    Ok(OracleAssignment { value: best, optima })
}

/// Maximum number of disjoint (gold, pred) pairs, by exhaustive search.
/// A pair is allowed when `pred` lies within `tol` of the gold boundary and
/// not past the midpoint to either neighbouring gold boundary (the earlier
/// boundary keeps an exact midpoint).
pub fn oracle_match(gold: &[Micros], pred: &[Micros], tol: Micros) -> Result<usize> {
    if gold.len() > ORACLE_MAX_BOUNDARIES || pred.len() > ORACLE_MAX_BOUNDARIES {
        return Err(Error::TooLarge(format!(
            "{} gold / {} predicted boundaries (max {ORACLE_MAX_BOUNDARIES})",
            gold.len(),
            pred.len()
        )));
    }
    let allowed = |k: usize, p: Micros| -> bool {
        let g = gold[k].0 as f64;
        let x = p.0 as f64;
        let lower = k.checked_sub(1).map(|j| (gold[j].0 as f64 + g) / 2.0);
        let upper = gold.get(k + 1).map(|h| (g + h.0 as f64) / 2.0);
        x >= g - tol.0 as f64 && x <= g + tol.0 as f64 && lower.is_none_or(|l| x > l) && upper.is_none_or(|u| x <= u)
    };
    fn search(i: usize, used: &mut Vec<bool>, pred: &[Micros], allowed: &dyn Fn(usize, Micros) -> bool) -> usize {
        if i == pred.len() {
            return 0;
        }
        let mut best = search(i + 1, used, pred, allowed);
        for k in 0..used.len() {
            if !used[k] && allowed(k, pred[i]) {
                used[k] = true;
                best = best.max(1 + search(i + 1, used, pred, allowed));
                used[k] = false;
            }
        }
        best
    }
    Ok(search(0, &mut vec![false; gold.len()], pred, &allowed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framesync::gold_streams;
    use crate::metrics::collapse;

    fn spec() -> ChannelSpec {
        ChannelSpec::new(PhonemeInventory::builtin("english").unwrap())
    }

    #[test]
    fn noiseless_units_relabel_gold() {
        let s = spec();
        let (gold, units, planted) = generate(&s, 20).unwrap();
        let inv = &s.inventory;
        let streams = gold_streams(&gold, &units, inv).unwrap();
        for (id, g) in &streams {
            let u: Vec<usize> = units.utterances[id].iter().map(|&u| u as usize).collect();
            assert_eq!(&u, g, "{id}");
        }
        assert_eq!(planted.substitutions + planted.deletions + planted.insertions, 0);
        assert_eq!(planted.gold_tokens as usize, gold.num_segments() - gold.utterances.len());
    }

    #[test]
    fn deterministic() {
        let mut s = spec();
        s.substitution = 0.1;
        s.insertion = 0.1;
        s.deletion = 0.1;
        s.seed = 9;
        let a = generate(&s, 10).unwrap();
        let b = generate(&s, 10).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn planted_edits_survive_collapsing() {
        let mut s = spec();
        s.substitution = 0.15;
        s.insertion = 0.2;
        s.deletion = 0.1;
        s.seed = 3;
        let (gold, units, planted) = generate(&s, 50).unwrap();
        let sil = s.inventory.silence_index();
        let streams = gold_streams(&gold, &units, &s.inventory).unwrap();
        let mut edits = 0;
        let mut tokens = 0;
        for (id, g) in &streams {
            let h: Vec<usize> = units.utterances[id].iter().map(|&u| u as usize).collect();
            let (g, h) = (collapse(g, sil), collapse(&h, sil));
            tokens += g.len() as u64;
            edits += crate::metrics::per(&g, &h).errors();
        }
        assert_eq!(tokens, planted.gold_tokens);
        let planted_edits = planted.substitutions + planted.deletions + planted.insertions;
        assert!(edits <= planted_edits);
        assert!(planted_edits - edits <= planted_edits / 50, "{edits} vs {planted_edits}");
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = spec();
        s.substitution = 1.0;
        assert!(generate(&s, 1).is_err());
        let mut s = spec();
        s.min_duration = 0.2;
        assert!(generate(&s, 1).is_err());
    }

    #[test]
    fn oracle_assignment_cases() {
        let diag = ContingencyTable::from_rows(&[vec![5, 0, 0], vec![0, 5, 0], vec![0, 0, 5]]).unwrap();
        let o = oracle_assignment(&diag).unwrap();
        assert_eq!((o.value, o.optima.clone()), (15, vec![vec![0, 1, 2]]));
        let tied = ContingencyTable::from_rows(&[vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(oracle_assignment(&tied).unwrap().optima.len(), 2);
        assert!(matches!(oracle_assignment(&ContingencyTable::zeros(9, 9)), Err(Error::TooLarge(_))));
    }

    #[test]
    fn oracle_match_cases() {
        let ms = |xs: &[i64]| xs.iter().map(|&x| Micros::from_millis(x)).collect::<Vec<_>>();
        let tol = Micros::from_millis(20);
        assert_eq!(oracle_match(&ms(&[100, 130]), &ms(&[112]), tol).unwrap(), 1);
        assert_eq!(oracle_match(&ms(&[100, 300]), &ms(&[90, 310]), tol).unwrap(), 2);
        assert_eq!(oracle_match(&ms(&[100]), &[], tol).unwrap(), 0);
        assert!(oracle_match(&ms(&[0; 13]), &[], tol).is_err());
    }

    #[test]
    fn latent_levels_are_nested() {
        let s = spec();
        let (gold, _, _) = generate(&s, 5).unwrap();
        let ch = LatentChannel {
            spread: 0.4,
            jitter: 0.05,
            seed: 1,
        };
        let levels = ch.quantize(&gold, s.frame_rate, s.inventory.silence_index(), &[8, 64]).unwrap();
        for (id, fine) in &levels[1].utterances {
            let coarse = &levels[0].utterances[id];
            assert!(fine.iter().zip(coarse).all(|(f, c)| f / 8 == *c));
        }
    }
}
