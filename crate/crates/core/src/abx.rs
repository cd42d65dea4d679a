//! ABX discriminability of triphone items over continuous frame features or
//! discrete unit sequences.
//!
//! Items are phone occurrences with a left and right neighbour. A cell groups
//! items by context, the two contrasted phones and the speaker condition; a
//! triple (A, B, X) takes A and X from the first phone and B from the second.
//! Continuous items are compared with DTW over the angular frame distance,
//! discrete items with a normalized edit distance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{PhoneCorpus, UnitCorpus, UnitId};
use crate::error::{read_utf8, Error, Result};
use crate::inventory::PhonemeInventory;
use crate::metrics::align;
use crate::scalar::Scalar;
use crate::time::{FrameRate, Micros};

/// Default cap on triples per cell before subsampling.
pub const DEFAULT_TRIPLE_CAP: usize = 5000;

/// Description of the distance, recorded in reports.
pub const DTW_DESCRIPTION: &str = "dtw steps {(1,0),(0,1),(1,1)}, angular frame cost, path-length normalized";

/// Row-major frames × dims matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix<F> {
    frames: usize,
    dims: usize,
    data: Vec<F>,
}

impl<F: Scalar> FrameMatrix<F> {
    pub fn new(frames: usize, dims: usize, data: Vec<F>) -> Result<Self> {
        if dims == 0 || data.len() != frames * dims {
            return Err(Error::Dimension(format!(
                "{} values do not fill a {frames}x{dims} matrix",
                data.len()
            )));
        }
        Ok(FrameMatrix { frames, dims, data })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::Dimension("ragged frame rows".into()));
        }
        Self::new(rows.len(), dims, rows.concat())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, k: usize) -> &[F] {
        &self.data[k * self.dims..(k + 1) * self.dims]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    /// Frames `start..end` as a new matrix.
    pub fn slice(&self, start: usize, end: usize) -> FrameMatrix<F> {
        FrameMatrix {
            frames: end - start,
            dims: self.dims,
            data: self.data[start * self.dims..end * self.dims].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation<F> {
    Continuous(FrameMatrix<F>),
    Discrete(Vec<UnitId>),
}

impl<F> Representation<F> {
    fn is_empty(&self) -> bool {
        match self {
            Representation::Continuous(m) => m.frames == 0,
            Representation::Discrete(u) => u.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbxItem {
    pub utterance: String,
    pub onset: Micros,
    pub offset: Micros,
    pub phone: usize,
    pub prev: usize,
    pub next: usize,
    pub speaker: String,
}

/// Items for every non-silence segment with a segment on both sides.
/// A neighbour separated by a gap is replaced by silence.
pub fn extract_items(gold: &PhoneCorpus, silence: usize) -> Vec<AbxItem> {
    let mut items = Vec::new();
    for (utt, u) in &gold.utterances {
        let segs = &u.segments;
        for i in 1..segs.len().saturating_sub(1) {
            let s = segs[i];
            if s.phone == silence {
                continue;
            }
            let prev = if segs[i - 1].offset == s.onset { segs[i - 1].phone } else { silence };
            let next = if segs[i + 1].onset == s.offset { segs[i + 1].phone } else { silence };
            items.push(AbxItem {
                utterance: utt.clone(),
                onset: s.onset,
                offset: s.offset,
                phone: s.phone,
                prev,
                next,
                speaker: u.speaker.clone(),
            });
        }
    }
    items
}

const ITEM_HEADER: &str = "#file\tonset\toffset\t#phone\tprev-phone\tnext-phone\tspeaker";

pub fn items_to_tsv(items: &[AbxItem], inv: &PhonemeInventory) -> String {
    let mut out = String::from(ITEM_HEADER);
    out.push('\n');
    for it in items {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            it.utterance,
            it.onset,
            it.offset,
            inv.symbol(it.phone),
            inv.symbol(it.prev),
            inv.symbol(it.next),
            it.speaker
        ));
    }
    out
}

pub fn parse_items(text: &str, inv: &PhonemeInventory, context: &str) -> Result<Vec<AbxItem>> {
    let mut items = Vec::new();
    let label = |sym: &str, utt: &str| {
        inv.index_of(sym).ok_or_else(|| Error::UnknownSymbol {
            symbol: sym.to_string(),
            utterance: utt.to_string(),
        })
    };
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with("#file") {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            context: context.to_string(),
            line: lineno + 1,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(parse_err(format!("expected 7 fields, found {}", f.len())));
        }
        let time = |s: &str| Micros::parse_secs(s).ok_or_else(|| parse_err(format!("bad time `{s}`")));
        let (onset, offset) = (time(f[1])?, time(f[2])?);
        if offset <= onset {
            return Err(Error::EmptySegment {
                utterance: f[0].to_string(),
                onset: onset.to_string(),
                offset: offset.to_string(),
            });
        }
        items.push(AbxItem {
            utterance: f[0].to_string(),
            onset,
            offset,
            phone: label(f[3], f[0])?,
            prev: label(f[4], f[0])?,
            next: label(f[5], f[0])?,
            speaker: f[6].to_string(),
        });
    }
    Ok(items)
}

/// Frames whose centers fall inside `[onset, offset)`, or the single frame
/// nearest the onset when the item is shorter than a frame.
fn frame_span(item: &AbxItem, frames: usize, rate: FrameRate) -> Result<(usize, usize)> {
    if frames == 0 {
        return Err(Error::Empty(format!("utterance {} has no frames", item.utterance)));
    }
    let first = |t: Micros| {
        let (mut lo, mut hi) = (0, frames);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if rate.center_cmp(mid, t).is_lt() {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let (a, b) = (first(item.onset), first(item.offset));
    if a < b {
        Ok((a, b))
    } else {
        let k = a.min(frames - 1);
        Ok((k, k + 1))
    }
}

/// Continuous representations of `items` cut from per-utterance features.
pub fn continuous_representations<F: Scalar>(
    items: &[AbxItem],
    features: &BTreeMap<String, FrameMatrix<F>>,
    rate: FrameRate,
) -> Result<Vec<Representation<F>>> {
    items
        .iter()
        .map(|it| {
            let m = features.get(&it.utterance).ok_or_else(|| Error::UnknownUtterance(it.utterance.clone()))?;
            let (a, b) = frame_span(it, m.frames(), rate)?;
            Ok(Representation::Continuous(m.slice(a, b)))
        })
        .collect()
}

/// Discrete representations of `items` cut from a unit corpus.
pub fn discrete_representations<F>(items: &[AbxItem], units: &UnitCorpus) -> Result<Vec<Representation<F>>> {
    items
        .iter()
        .map(|it| {
            let u = units
                .utterances
                .get(&it.utterance)
                .ok_or_else(|| Error::UnknownUtterance(it.utterance.clone()))?;
            let (a, b) = frame_span(it, u.len(), units.frame_rate)?;
            Ok(Representation::Discrete(u[a..b].to_vec()))
        })
        .collect()
}

/// Sidecar file of a feature directory: `dims`, `frame_rate` and `dtype`
/// (`f32` or `f64`) lines. Each utterance is stored as `<utt>.bin`,
/// little-endian, row-major.
pub const FEATURE_META: &str = "features.meta";

pub fn load_features<F: Scalar>(dir: impl AsRef<Path>) -> Result<(FrameRate, BTreeMap<String, FrameMatrix<F>>)> {
    let dir = dir.as_ref();
    let meta_path = dir.join(FEATURE_META);
    let meta = read_utf8(&meta_path)?;
    let ctx = meta_path.display().to_string();
    let (mut dims, mut rate, mut wide) = (None, None, false);
    for (lineno, line) in meta.lines().enumerate() {
        let Some((k, v)) = line.split_once(':') else { continue };
        let bad = |m: &str| Error::Parse {
            context: ctx.clone(),
            line: lineno + 1,
            message: m.to_string(),
        };
        match k.trim() {
            "dims" => dims = Some(v.trim().parse::<usize>().map_err(|_| bad("bad dims"))?),
            "frame_rate" => rate = Some(v.trim().parse::<FrameRate>().map_err(|e| bad(&e))?),
            "dtype" => {
                wide = match v.trim() {
                    "f32" => false,
                    "f64" => true,
                    _ => return Err(bad("dtype must be f32 or f64")),
                }
            }
            _ => {}
        }
    }
    let dims = dims.ok_or(Error::MissingField("dims"))?;
    let rate = rate.ok_or(Error::MissingField("frame_rate"))?;
    let width = if wide { 8 } else { 4 };
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("bin") {
            continue;
        }
        let utt = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if dims == 0 || bytes.len() % (width * dims) != 0 {
            return Err(Error::Dimension(format!("{}: size is not a multiple of {dims} values", path.display())));
        }
        let data: Vec<F> = if wide {
            bytes
                .chunks_exact(8)
                .map(|c| F::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
                .collect()
        } else {
            bytes
                .chunks_exact(4)
                .map(|c| F::from_f64_lossy(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect()
        };
        let frames = data.len() / dims;
        out.insert(utt, FrameMatrix::new(frames, dims, data)?);
    }
    Ok((rate, out))
}

/// Writes features in the layout read by [`load_features`], as `f32`.
pub fn write_features<F: Scalar>(dir: impl AsRef<Path>, rate: FrameRate, features: &BTreeMap<String, FrameMatrix<F>>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dims = features.values().next().map_or(1, FrameMatrix::dims);
    let meta = format!("dims: {dims}\nframe_rate: {rate}\ndtype: f32\n");
    let meta_path = dir.join(FEATURE_META);
    std::fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;
    for (utt, m) in features {
        let bytes: Vec<u8> = m.as_slice().iter().flat_map(|x| (x.to_f64_lossy() as f32).to_le_bytes()).collect();
        let path = dir.join(format!("{utt}.bin"));
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Angle between two frames divided by π, in [0, 1]. Two zero frames are at
/// distance 0; a zero frame against a non-zero one counts as orthogonal.
pub fn angular<F: Scalar>(x: &[F], y: &[F]) -> F {
    let (mut dot, mut nx, mut ny) = (F::zero(), F::zero(), F::zero());
    for (&a, &b) in x.iter().zip(y) {
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    let half = F::one() / (F::one() + F::one());
    match (nx == F::zero(), ny == F::zero()) {
        (true, true) => F::zero(),
        (true, false) | (false, true) => half,
        _ => {
            let c = (dot / (nx * ny).sqrt()).max(-F::one()).min(F::one());
            c.acos() / F::PI()
        }
    }
}

/// DTW over the angular frame cost, divided by the length of the chosen
/// path. Among equal-cost paths the shortest is chosen, which keeps the
/// distance symmetric.
pub fn dtw<F: Scalar>(x: &FrameMatrix<F>, y: &FrameMatrix<F>) -> F {
    let (n, m) = (x.frames(), y.frames());
    let mut prev: Vec<(F, u32)> = vec![(F::infinity(), 0); m + 1];
    let mut cur = prev.clone();
    prev[0] = (F::zero(), 0);
    for i in 1..=n {
        cur[0] = (F::infinity(), 0);
        for j in 1..=m {
            let best = [prev[j - 1], prev[j], cur[j - 1]]
                .into_iter()
                .reduce(|a, b| if (b.0, b.1) < (a.0, a.1) { b } else { a })
                .unwrap();
            cur[j] = (best.0 + angular(x.row(i - 1), y.row(j - 1)), best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, len) = prev[m];
    cost / F::from_count(len as u64)
}

fn run_length(u: &[UnitId]) -> Vec<UnitId> {
    let mut out: Vec<UnitId> = Vec::with_capacity(u.len());
    for &x in u {
        if out.last() != Some(&x) {
            out.push(x);
        }
    }
    out
}

/// Edit distance between run-length collapsed unit sequences, divided by the
/// longer collapsed length. In strict mode: 0 if the collapsed sequences are
/// equal, 1 otherwise.
pub fn discrete_distance<F: Scalar>(x: &[UnitId], y: &[UnitId], strict: bool) -> F {
    let (a, b) = (run_length(x), run_length(y));
    if strict {
        return if a == b { F::zero() } else { F::one() };
    }
    let longest = a.len().max(b.len());
    if longest == 0 {
        return F::zero();
    }
    let a: Vec<usize> = a.iter().map(|&u| u as usize).collect();
    let b: Vec<usize> = b.iter().map(|&u| u as usize).collect();
    let edits = align(&a, &b)
        .iter()
        .filter(|op| !matches!(op, crate::metrics::EditOp::Match(_)))
        .count();
    F::from_count(edits as u64) / F::from_count(longest as u64)
}

pub fn distance<F: Scalar>(x: &Representation<F>, y: &Representation<F>, strict: bool) -> Result<F> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("empty representation".into()));
    }
    match (x, y) {
        (Representation::Continuous(a), Representation::Continuous(b)) => {
            if a.dims() != b.dims() {
                return Err(Error::Dimension(format!("{} vs {} dims", a.dims(), b.dims())));
            }
            Ok(dtw(a, b))
        }
        (Representation::Discrete(a), Representation::Discrete(b)) => Ok(discrete_distance(a, b, strict)),
        _ => Err(Error::Invalid("cannot compare continuous and discrete representations".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Within,
    Across,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Within => "within",
            Condition::Across => "across",
        })
    }
}

impl FromStr for Condition {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "within" => Ok(Condition::Within),
            "across" => Ok(Condition::Across),
            _ => Err(format!("unknown ABX condition `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AbxOptions {
    pub condition: Condition,
    pub cap: usize,
    pub seed: u64,
    pub strict: bool,
}

impl Default for AbxOptions {
    fn default() -> Self {
        AbxOptions {
            condition: Condition::Within,
            cap: DEFAULT_TRIPLE_CAP,
            seed: 0,
            strict: false,
        }
    }
}

/// A symmetrized cell: phones `a < b` in context `prev _ next`, A/B speaker
/// and (across only) X speaker. `score` is the mean of the directed cells
/// that had at least one triple.
#[derive(Debug, Clone, PartialEq)]
pub struct AbxCell<F> {
    pub a: usize,
    pub b: usize,
    pub prev: usize,
    pub next: usize,
    pub speaker: String,
    pub speaker_x: Option<String>,
    pub score: F,
    pub triples: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbxResult<F> {
    pub condition: Condition,
    pub cells: Vec<AbxCell<F>>,
    /// Unweighted mean of the cell scores.
    pub score: F,
}

impl<F: Scalar> AbxResult<F> {
    /// Error rate in percent.
    pub fn error_rate(&self) -> F {
        (F::one() - self.score) * F::from_count(100)
    }
}

/// Mean of two error rates.
pub fn abx_summary<F: Scalar>(within: F, across: F) -> F {
    (within + across) / (F::one() + F::one())
}

/// Score of one triple: 1 if X is closer to A, ½ on a tie, 0 otherwise.
pub fn triple_score<F: Scalar>(d_ax: F, d_bx: F) -> F {
    if d_ax < d_bx {
        F::one()
    } else if d_ax == d_bx {
        F::one() / (F::one() + F::one())
    } else {
        F::zero()
    }
}

type Group = (usize, usize, usize, String); // (prev, next, phone, speaker)
type GroupRef<'a> = (&'a Group, &'a Vec<usize>);

struct Directed<'a> {
    a: &'a [usize],
    b: &'a [usize],
    x: &'a [usize],
}

impl Directed<'_> {
    fn count(&self, same_ax: bool) -> u64 {
        let (a, b, x) = (self.a.len() as u64, self.b.len() as u64, self.x.len() as u64);
        if same_ax {
            a * (a.saturating_sub(1)) * b
        } else {
            a * b * x
        }
    }
}

fn score_directed<F: Scalar>(
    cell: &Directed,
    same_ax: bool,
    reps: &[Representation<F>],
    opts: &AbxOptions,
    stream: u64,
) -> Result<Option<(F, u64)>> {
    let total = cell.count(same_ax);
    if total == 0 {
        return Ok(None);
    }
    let d = |i: usize, j: usize| distance(&reps[i], &reps[j], opts.strict);
    let mut sum = F::zero();
    let mut n = 0u64;
    if total as usize <= opts.cap {
        for &a in cell.a {
            for &x in cell.x {
                if a == x {
                    continue;
                }
                let dax = d(a, x)?;
                for &b in cell.b {
                    sum += triple_score(dax, d(b, x)?);
                    n += 1;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(stream);
        while (n as usize) < opts.cap {
            let a = cell.a[rng.gen_range(0..cell.a.len())];
            let b = cell.b[rng.gen_range(0..cell.b.len())];
            let x = cell.x[rng.gen_range(0..cell.x.len())];
            if a == x {
                continue;
            }
            sum += triple_score(d(a, x)?, d(b, x)?);
            n += 1;
        }
    }
    Ok(Some((sum / F::from_count(n), n)))
}

/// ABX scores of all cells for one speaker condition. Cells are scored in
/// parallel; results do not depend on the thread count.
pub fn abx_score<F: Scalar>(items: &[AbxItem], reps: &[Representation<F>], opts: &AbxOptions) -> Result<AbxResult<F>> {
    if items.len() != reps.len() {
        return Err(Error::Dimension(format!("{} items but {} representations", items.len(), reps.len())));
    }
    let mut groups: BTreeMap<Group, Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        groups
            .entry((it.prev, it.next, it.phone, it.speaker.clone()))
            .or_default()
            .push(i);
    }
    let mut by_context: BTreeMap<(usize, usize), Vec<GroupRef>> = BTreeMap::new();
    for (g, members) in &groups {
        by_context.entry((g.0, g.1)).or_default().push((g, members));
    }

    // symmetrized cell key: (prev, next, a, b, speaker, speaker_x)
    type Key = (usize, usize, usize, usize, String, Option<String>);
    let mut keys: Vec<Key> = Vec::new();
    for ((prev, next), gs) in &by_context {
        for (ga, _) in gs {
            for (gb, _) in gs {
                if ga.2 >= gb.2 || ga.3 != gb.3 {
                    continue;
                }
                match opts.condition {
                    Condition::Within => keys.push((*prev, *next, ga.2, gb.2, ga.3.clone(), None)),
                    Condition::Across => {
                        let xs: BTreeSet<&String> = gs
                            .iter()
                            .filter(|(g, _)| (g.2 == ga.2 || g.2 == gb.2) && g.3 != ga.3)
                            .map(|(g, _)| &g.3)
                            .collect();
                        for sx in xs {
                            keys.push((*prev, *next, ga.2, gb.2, ga.3.clone(), Some(sx.clone())));
                        }
                    }
                }
            }
        }
    }

    let empty: Vec<usize> = Vec::new();
    let members = |prev: usize, next: usize, phone: usize, spk: &str| -> &[usize] {
        groups
            .get(&(prev, next, phone, spk.to_string()))
            .map_or(&empty[..], Vec::as_slice)
    };

    let cells: Vec<Option<AbxCell<F>>> = keys
        .par_iter()
        .enumerate()
        .map(|(ordinal, (prev, next, a, b, spk, spk_x))| {
            let sx = spk_x.as_deref().unwrap_or(spk);
            let same_ax = spk_x.is_none();
            let mut parts = Vec::with_capacity(2);
            for (dir, (p, q)) in [(*a, *b), (*b, *a)].into_iter().enumerate() {
                let cell = Directed {
                    a: members(*prev, *next, p, spk),
                    b: members(*prev, *next, q, spk),
                    x: members(*prev, *next, p, sx),
                };
                if let Some(s) = score_directed(&cell, same_ax, reps, opts, 2 * ordinal as u64 + dir as u64)? {
                    parts.push(s);
                }
            }
            if parts.is_empty() {
                return Ok(None);
            }
            let score = parts.iter().map(|p| p.0).sum::<F>() / F::from_count(parts.len() as u64);
            Ok(Some(AbxCell {
                a: *a,
                b: *b,
                prev: *prev,
                next: *next,
                speaker: spk.clone(),
                speaker_x: spk_x.clone(),
                score,
                triples: parts.iter().map(|p| p.1).sum(),
            }))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<AbxCell<F>> = cells.into_iter().flatten().collect();
    if cells.is_empty() {
        return Err(Error::NoAbxCells);
    }
    let score = cells.iter().map(|c| c.score).sum::<F>() / F::from_count(cells.len() as u64);
    Ok(AbxResult {
        condition: opts.condition,
        cells,
        score,
    })
}
