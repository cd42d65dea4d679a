//! Synchronizes gold phones onto the unit frame grid and accumulates the
//! phone/unit contingency table.
//!
//! Frame `k` covers `[k/r, (k+1)/r)` and takes the label of the gold segment
//! containing its center `(k + 0.5)/r`; a center on a boundary belongs to the
//! segment starting there. Frames past the gold duration are silence, up to
//! one frame of slack.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::corpus_io::{GoldUtterance, PhoneCorpus, UnitCorpus, UnitId};
use crate::error::{Error, Result};
use crate::inventory::PhonemeInventory;
use crate::scalar::Scalar;
use crate::time::FrameRate;

/// One synchronized frame: gold label and unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FramePair {
    pub phone: usize,
    pub unit: UnitId,
}

/// Exact joint counts of (phone, unit) over frames. Rows are inventory
/// labels (silence last), columns are unit ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ContingencyTable {
            rows,
            cols,
            counts: vec![0; rows * cols],
            total: 0,
        }
    }

    /// Builds a table from row-major counts.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged count rows".into()));
        }
        let counts: Vec<u64> = rows.iter().flatten().copied().collect();
        let total = counts.iter().sum();
        Ok(ContingencyTable {
            rows: rows.len(),
            cols,
            counts,
            total,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of frames, T.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, phone: usize, unit: usize) -> u64 {
        self.counts[phone * self.cols + unit]
    }

    pub fn row(&self, phone: usize) -> &[u64] {
        &self.counts[phone * self.cols..(phone + 1) * self.cols]
    }

    pub fn column(&self, unit: usize) -> impl Iterator<Item = u64> + '_ {
        (0..self.rows).map(move |i| self.get(i, unit))
    }

    pub fn add(&mut self, phone: usize, unit: usize, n: u64) {
        self.counts[phone * self.cols + unit] += n;
        self.total += n;
    }

    pub fn row_marginals(&self) -> Vec<u64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_marginals(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.cols];
        for i in 0..self.rows {
            for (o, c) in out.iter_mut().zip(self.row(i)) {
                *o += c;
            }
        }
        out
    }

    /// Empirical joint probability count / T.
    pub fn probability<F: Scalar>(&self, phone: usize, unit: usize) -> F {
        F::from_count(self.get(phone, unit)) / F::from_count(self.total)
    }

    /// Element-wise sum.
    pub fn merge(mut self, other: &ContingencyTable) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Dimension(format!(
                "cannot merge {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(self)
    }

    /// Copy with every count multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        ContingencyTable {
            rows: self.rows,
            cols: self.cols,
            counts: self.counts.iter().map(|c| c * k).collect(),
            total: self.total * k,
        }
    }

    /// Debug dump: header of unit ids, one row per phone label.
    pub fn to_tsv(&self, inv: &PhonemeInventory) -> String {
        let mut out = String::from("phone");
        for j in 0..self.cols {
            out.push_str(&format!("\t{j}"));
        }
        out.push('\n');
        for i in 0..self.rows {
            out.push_str(inv.symbol(i));
            for c in self.row(i) {
                out.push_str(&format!("\t{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Label of frame `frame` of utterance `utt`.
pub fn frame_label(
    corpus: &PhoneCorpus,
    utt: &str,
    frame: usize,
    rate: FrameRate,
    inv: &PhonemeInventory,
) -> Result<usize> {
    let u = corpus.get(utt)?;
    label_one(u, frame, rate, inv.silence_index()).ok_or_else(|| Error::FrameOutOfRange {
        utterance: utt.to_string(),
        frame,
    })
}

fn label_one(u: &GoldUtterance, frame: usize, rate: FrameRate, silence: usize) -> Option<usize> {
    if rate.center_beyond_tolerance(frame, u.duration) {
        return None;
    }
    let k = u
        .segments
        .partition_point(|s| rate.center_cmp(frame, s.onset).is_ge());
    match k.checked_sub(1).map(|i| &u.segments[i]) {
        Some(seg) if rate.center_cmp(frame, seg.offset).is_lt() => Some(seg.phone),
        _ => Some(silence),
    }
}

/// Gold labels for the first `frames` frames of an utterance, checking the
/// frame count against the gold duration.
pub fn label_frames(
    utt_id: &str,
    u: &GoldUtterance,
    frames: usize,
    rate: FrameRate,
    silence: usize,
) -> Result<Vec<usize>> {
    if frames > 0 && rate.exceeds_one_frame(frames, u.duration) {
        return Err(Error::LengthMismatch {
            utterance: utt_id.to_string(),
            frames,
            duration_s: u.duration.to_string(),
            frame_rate: rate.to_string(),
        });
    }
    let mut out = Vec::with_capacity(frames);
    let mut seg = 0;
    for k in 0..frames {
        while seg < u.segments.len() && rate.center_cmp(k, u.segments[seg].offset).is_ge() {
            seg += 1;
        }
        let label = match u.segments.get(seg) {
            Some(s) if rate.center_cmp(k, s.onset).is_ge() => s.phone,
            _ => silence,
        };
        out.push(label);
    }
    Ok(out)
}

/// Gold frame streams for every utterance, keyed like the unit corpus.
pub fn gold_streams(
    gold: &PhoneCorpus,
    units: &UnitCorpus,
    inv: &PhonemeInventory,
) -> Result<BTreeMap<String, Vec<usize>>> {
    crate::corpus_io::check_utterances(gold, units)?;
    units
        .utterances
        .par_iter()
        .map(|(id, us)| {
            let u = gold.get(id)?;
            Ok((id.clone(), label_frames(id, u, us.len(), units.frame_rate, inv.silence_index())?))
        })
        .collect()
}

/// Tallies pre-synchronized frame streams into a table.
pub fn tally<'a>(
    pairs: impl IntoIterator<Item = (&'a [usize], &'a [UnitId])>,
    rows: usize,
    vocab: usize,
) -> Result<ContingencyTable> {
    let mut t = ContingencyTable::zeros(rows, vocab);
    for (phones, units) in pairs {
        for (&p, &u) in phones.iter().zip(units) {
            if u as usize >= vocab {
                return Err(Error::UnitOutOfRange { unit: u, vocab });
            }
            t.add(p, u as usize, 1);
        }
    }
    Ok(t)
}

/// Builds the corpus-level contingency table. Utterances are accumulated in
/// parallel and merged; integer counts make the result independent of the
/// schedule.
pub fn build_contingency(
    gold: &PhoneCorpus,
    units: &UnitCorpus,
    inv: &PhonemeInventory,
    vocab: usize,
) -> Result<ContingencyTable> {
    crate::corpus_io::check_utterances(gold, units)?;
    let rows = inv.num_labels();
    units
        .utterances
        .par_iter()
        .map(|(id, us)| {
            let g = gold.get(id)?;
            let phones = label_frames(id, g, us.len(), units.frame_rate, inv.silence_index())?;
            tally([(phones.as_slice(), us.as_slice())], rows, vocab)
        })
        .try_reduce(|| ContingencyTable::zeros(rows, vocab), |a, b| a.merge(&b))
}

/// Frame pairs for one utterance, in frame order.
pub fn frame_pairs(
    utt_id: &str,
    gold: &GoldUtterance,
    units: &[UnitId],
    rate: FrameRate,
    silence: usize,
) -> Result<Vec<FramePair>> {
    let phones = label_frames(utt_id, gold, units.len(), rate, silence)?;
    Ok(phones
        .into_iter()
        .zip(units)
        .map(|(phone, &unit)| FramePair { phone, unit })
        .collect())
}
