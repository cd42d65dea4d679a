//! PNMI, phone error rate with error breakdown, substitution class confusion
//! and boundary F1 / R-value.

use serde::{Deserialize, Serialize};

use crate::corpus_io::GoldUtterance;
use crate::error::{Error, Result};
use crate::framesync::ContingencyTable;
use crate::inventory::{PhonemeClass, PhonemeInventory};
use crate::scalar::Scalar;
use crate::time::{FrameRate, Micros};

/// Default boundary tolerance, ±20 ms.
pub const DEFAULT_TOLERANCE: Micros = Micros(20_000);

/// Phone-normalized mutual information I(p;u) / H(p) of a contingency table,
/// with natural logarithms (the ratio is base-invariant). Zero cells
/// contribute nothing.
pub fn pnmi<F: Scalar>(table: &ContingencyTable) -> Result<F> {
    if table.total() == 0 {
        return Err(Error::Empty("contingency table has no frames".into()));
    }
    let t = F::from_count(table.total());
    let ln_t = t.ln();
    let rows = table.row_marginals();
    let cols = table.col_marginals();
    let ln_cols: Vec<F> = cols.iter().map(|&c| F::from_count(c).ln()).collect();

    let mut entropy = F::zero();
    let mut info = F::zero();
    for (i, &r) in rows.iter().enumerate() {
        if r == 0 {
            continue;
        }
        let fr = F::from_count(r);
        let ln_r = fr.ln();
        entropy -= fr / t * (ln_r - ln_t);
        for (j, &c) in table.row(i).iter().enumerate() {
            if c == 0 {
                continue;
            }
            let fc = F::from_count(c);
            info += fc / t * (fc.ln() + ln_t - ln_r - ln_cols[j]);
        }
    }
    if entropy <= F::zero() {
        return Err(Error::ZeroEntropy);
    }
    Ok((info / entropy).max(F::zero()).min(F::one()))
}

/// Run-length collapse of a frame stream into a transcription, with silence
/// stripped from both edges. Internal silence stays as a token.
pub fn collapse(stream: &[usize], silence: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &x in stream {
        if out.last() != Some(&x) {
            out.push(x);
        }
    }
    let start = out.iter().position(|&x| x != silence).unwrap_or(out.len());
    let end = out.iter().rposition(|&x| x != silence).map_or(start, |e| e + 1);
    out[start..end].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match(usize),
    Substitution { gold: usize, hyp: usize },
    Deletion(usize),
    Insertion(usize),
}

/// Unit-cost Levenshtein alignment of `hyp` against `gold`. On ties the
/// backtrace prefers a match, then deletion, substitution, insertion.
pub fn align<T: PartialEq + Copy + Into<usize>>(gold: &[T], hyp: &[T]) -> Vec<EditOp> {
    let (n, m) = (gold.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0u32; (n + 1) * w];
    for (j, x) in d.iter_mut().take(w).enumerate() {
        *x = j as u32;
    }
    for i in 1..=n {
        d[i * w] = i as u32;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + u32::from(gold[i - 1] != hyp[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && gold[i - 1] == hyp[j - 1] && here == d[(i - 1) * w + j - 1] {
            ops.push(EditOp::Match(gold[i - 1].into()));
            i -= 1;
            j -= 1;
        } else if i > 0 && here == d[(i - 1) * w + j] + 1 {
            ops.push(EditOp::Deletion(gold[i - 1].into()));
            i -= 1;
        } else if i > 0 && j > 0 && here == d[(i - 1) * w + j - 1] + 1 {
            ops.push(EditOp::Substitution {
                gold: gold[i - 1].into(),
                hyp: hyp[j - 1].into(),
            });
            i -= 1;
            j -= 1;
        } else {
            ops.push(EditOp::Insertion(hyp[j - 1].into()));
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Edit counts of one or more aligned transcription pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerBreakdown {
    pub substitutions: u64,
    pub deletions: u64,
    pub insertions: u64,
    pub gold_length: u64,
}

impl PerBreakdown {
    pub fn from_ops(ops: &[EditOp], gold_length: usize) -> Self {
        let mut b = PerBreakdown {
            gold_length: gold_length as u64,
            ..Default::default()
        };
        for op in ops {
            match op {
                EditOp::Match(_) => {}
                EditOp::Substitution { .. } => b.substitutions += 1,
                EditOp::Deletion(_) => b.deletions += 1,
                EditOp::Insertion(_) => b.insertions += 1,
            }
        }
        b
    }

    pub fn errors(&self) -> u64 {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn merge(self, other: PerBreakdown) -> PerBreakdown {
        PerBreakdown {
            substitutions: self.substitutions + other.substitutions,
            deletions: self.deletions + other.deletions,
            insertions: self.insertions + other.insertions,
            gold_length: self.gold_length + other.gold_length,
        }
    }

    /// (S + D + I) / N. May exceed one.
    pub fn rate<F: Scalar>(&self) -> Result<F> {
        if self.gold_length == 0 {
            return Err(Error::Empty("gold transcription is empty".into()));
        }
        Ok(F::from_count(self.errors()) / F::from_count(self.gold_length))
    }
}

/// Edit breakdown of a single transcription pair.
pub fn per<T: PartialEq + Copy + Into<usize>>(gold: &[T], hyp: &[T]) -> PerBreakdown {
    PerBreakdown::from_ops(&align(gold, hyp), gold.len())
}

/// Corpus-level, micro-averaged PER over transcription pairs.
pub fn corpus_per<'a>(pairs: impl IntoIterator<Item = (&'a [usize], &'a [usize])>) -> Result<PerBreakdown> {
    let total = pairs
        .into_iter()
        .map(|(g, h)| per(g, h))
        .fold(PerBreakdown::default(), PerBreakdown::merge);
    if total.gold_length == 0 {
        return Err(Error::Empty("corpus gold transcription is empty".into()));
    }
    Ok(total)
}

/// Substitution counts between phoneme classes: `counts[gold][hyp]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SubstitutionCounts {
    pub counts: [[u64; PhonemeClass::COUNT]; PhonemeClass::COUNT],
}

impl SubstitutionCounts {
    pub fn from_ops(ops: &[EditOp], inv: &PhonemeInventory) -> Self {
        let mut s = SubstitutionCounts::default();
        for op in ops {
            if let EditOp::Substitution { gold, hyp } = *op {
                s.counts[inv.class_of(gold).index()][inv.class_of(hyp).index()] += 1;
            }
        }
        s
    }

    pub fn merge(mut self, other: &SubstitutionCounts) -> Self {
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        self
    }

    pub fn normalize<F: Scalar>(&self) -> ClassConfusion<F> {
        let rows = self
            .counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                (total > 0).then(|| {
                    row.iter()
                        .map(|&c| F::from_count(c) * F::from_count(100) / F::from_count(total))
                        .collect()
                })
            })
            .collect();
        ClassConfusion {
            counts: self.counts,
            rows,
        }
    }
}

/// Row-normalized substitution confusion between phoneme classes, in percent.
/// `rows[g]` is `None` when no phone of class `g` was substituted.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassConfusion<F> {
    pub counts: [[u64; PhonemeClass::COUNT]; PhonemeClass::COUNT],
    pub rows: Vec<Option<Vec<F>>>,
}

impl<F: Scalar> ClassConfusion<F> {
    pub fn row(&self, class: PhonemeClass) -> Option<&[F]> {
        self.rows[class.index()].as_deref()
    }
}

/// Class confusion of substitutions in the alignment of `gold` and `hyp`.
pub fn class_confusion<F: Scalar>(gold: &[usize], hyp: &[usize], inv: &PhonemeInventory) -> ClassConfusion<F> {
    SubstitutionCounts::from_ops(&align(gold, hyp), inv).normalize()
}

/// Times where a frame stream changes label. Utterance edges are excluded.
pub fn frame_boundaries(stream: &[usize], rate: FrameRate) -> Vec<Micros> {
    (1..stream.len())
        .filter(|&k| stream[k] != stream[k - 1])
        .map(|k| rate.frame_onset(k))
        .collect()
}

/// Label-change times of a gold utterance, gaps counted as silence.
/// Adjacent segments with the same label do not form a boundary.
pub fn segment_boundaries(u: &GoldUtterance, silence: usize) -> Vec<Micros> {
    let filled = u.filled(silence);
    filled
        .windows(2)
        .filter(|w| w[0].phone != w[1].phone)
        .map(|w| w[1].onset)
        .collect()
}

fn check_sorted(xs: &[Micros]) -> Result<()> {
    if xs.windows(2).any(|w| w[1] < w[0]) {
        Err(Error::Unsorted)
    } else {
        Ok(())
    }
}

/// Whether `p` falls in the window of gold boundary `k`: within `tol` of
/// `gold[k]`, and on `gold[k]`'s side of the midpoints to its neighbours
/// (a point exactly on a midpoint belongs to the earlier boundary).
pub fn in_window(gold: &[Micros], k: usize, p: Micros, tol: Micros) -> bool {
    let g = gold[k].0;
    (p.0 - g).abs() <= tol.0
        && (k == 0 || 2 * p.0 > gold[k - 1].0 + g)
        && (k + 1 == gold.len() || 2 * p.0 <= g + gold[k + 1].0)
}

/// Number of gold boundaries hit by a predicted boundary. Windows of
/// neighbouring gold boundaries are split at their midpoint, so they are
/// disjoint and a left-to-right sweep finds the maximum matching.
pub fn match_boundaries(gold: &[Micros], pred: &[Micros], tol: Micros) -> Result<usize> {
    check_sorted(gold)?;
    check_sorted(pred)?;
    let upper2 = |k: usize| {
        let mut u = 2 * (gold[k].0 + tol.0);
        if k + 1 < gold.len() {
            u = u.min(gold[k].0 + gold[k + 1].0);
        }
        u
    };
    let mut hits = 0;
    let mut k = 0;
    let mut hit = false;
    for &p in pred {
        while k < gold.len() && 2 * p.0 > upper2(k) {
            k += 1;
            hit = false;
        }
        if k == gold.len() {
            break;
        }
        if !hit && in_window(gold, k, p, tol) {
            hit = true;
            hits += 1;
        }
    }
    Ok(hits)
}

/// Corpus-level boundary tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCounts {
    pub hits: u64,
    pub gold: u64,
    pub pred: u64,
}

impl BoundaryCounts {
    pub fn from_utterance(gold: &[Micros], pred: &[Micros], tol: Micros) -> Result<Self> {
        Ok(BoundaryCounts {
            hits: match_boundaries(gold, pred, tol)? as u64,
            gold: gold.len() as u64,
            pred: pred.len() as u64,
        })
    }

    pub fn merge(self, o: BoundaryCounts) -> Self {
        BoundaryCounts {
            hits: self.hits + o.hits,
            gold: self.gold + o.gold,
            pred: self.pred + o.pred,
        }
    }
}

/// Boundary detection scores. Precision, recall, F1 and R-value are
/// percentages; R-value can be negative under heavy over-segmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryScore<F> {
    pub hits: u64,
    pub gold_count: u64,
    pub pred_count: u64,
    pub precision: F,
    pub recall: F,
    pub f1: F,
    /// Over-segmentation, pred/gold − 1 (as a ratio).
    pub over_segmentation: F,
    pub r_value: F,
}

/// Precision, recall, F1 and R-value from corpus-level tallies.
///
/// With hit rate `HR = hits/gold` and over-segmentation
/// `OS = pred/gold − 1` (equal to recall/precision − 1 whenever hits > 0):
/// `r1 = √((1−HR)² + OS²)`, `r2 = (−OS + HR − 1)/√2`,
/// `R = 1 − (|r1| + |r2|)/2`.
pub fn segmentation_scores<F: Scalar>(c: BoundaryCounts) -> Result<BoundaryScore<F>> {
    if c.gold == 0 {
        return Err(Error::Empty("no gold boundaries".into()));
    }
    let hits = F::from_count(c.hits);
    let gold = F::from_count(c.gold);
    let pred = F::from_count(c.pred);
    let precision = if c.pred == 0 { F::zero() } else { hits / pred };
    let recall = hits / gold;
    let f1 = if precision + recall == F::zero() {
        F::zero()
    } else {
        (F::one() + F::one()) * precision * recall / (precision + recall)
    };
    let os = pred / gold - F::one();
    let r1 = ((F::one() - recall).powi(2) + os.powi(2)).sqrt();
    let r2 = (-os + recall - F::one()) / F::SQRT_2();
    let r = F::one() - (r1.abs() + r2.abs()) / (F::one() + F::one());
    let pct = F::from_count(100);
    Ok(BoundaryScore {
        hits: c.hits,
        gold_count: c.gold,
        pred_count: c.pred,
        precision: precision * pct,
        recall: recall * pct,
        f1: f1 * pct,
        over_segmentation: os,
        r_value: r * pct,
    })
}
