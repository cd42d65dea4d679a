//! Unit→phoneme assignment for both tracks.
//!
//! Many-to-one maps every unit to the phone it co-occurs with most often.
//! One-to-one finds the bijection maximizing the total co-occurrence count
//! (equivalently Σ P(map[j], j)) with an exact integer Hungarian solver, then
//! picks the lexicographically smallest optimal map so results do not depend
//! on solver internals.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use num_traits::{PrimInt, Signed};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::UnitCorpus;
use crate::error::{Error, Result};
use crate::framesync::ContingencyTable;
use crate::inventory::PhonemeInventory;
use crate::scalar::Scalar;

pub const SOLVER_ID: &str = "hungarian-i64/lexmin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssignmentKind {
    #[serde(rename = "many-to-one")]
    ManyToOne,
    #[serde(rename = "one-to-one")]
    OneToOne,
}

impl fmt::Display for AssignmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssignmentKind::ManyToOne => "many-to-one",
            AssignmentKind::OneToOne => "one-to-one",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub kind: AssignmentKind,
    /// `map[unit]` is a phone label index (silence last).
    pub map: Vec<usize>,
    /// Σ_j counts[map[j]][j].
    pub matched: u64,
    /// Frames in the table the assignment was derived from.
    pub total: u64,
    /// Units whose target was decided by the tie rule.
    pub tie_events: usize,
}

impl Assignment {
    /// Σ_j P(map[j], j); zero for an empty table.
    pub fn objective<F: Scalar>(&self) -> F {
        if self.total == 0 {
            return F::zero();
        }
        F::from_count(self.matched) / F::from_count(self.total)
    }

    pub fn get(&self, unit: usize) -> Option<usize> {
        self.map.get(unit).copied()
    }

    /// Assignment dump: header comments with kind and objective, then
    /// `unit_id<TAB>phone_symbol` per unit.
    pub fn to_tsv(&self, inv: &PhonemeInventory) -> String {
        let mut out = format!(
            "# kind: {}\n# objective: {:.12}\n# ties: {}\n",
            self.kind,
            self.objective::<f64>(),
            self.tie_events
        );
        for (unit, &phone) in self.map.iter().enumerate() {
            out.push_str(&format!("{unit}\t{}\n", inv.symbol(phone)));
        }
        out
    }
}

/// Each unit goes to its most frequent phone; ties go to the earliest label
/// in canonical order, and never-observed units go to silence (the last row).
pub fn many_to_one(table: &ContingencyTable) -> Assignment {
    let silence = table.rows().saturating_sub(1);
    let mut map = Vec::with_capacity(table.cols());
    let mut matched = 0;
    let mut tie_events = 0;
    for j in 0..table.cols() {
        let mut best = (silence, 0u64);
        let mut tied = false;
        for (i, c) in table.column(j).enumerate() {
            if c > best.1 {
                best = (i, c);
                tied = false;
            } else if c == best.1 && c > 0 {
                tied = true;
            }
        }
        tie_events += usize::from(tied);
        matched += best.1;
        map.push(best.0);
    }
    Assignment {
        kind: AssignmentKind::ManyToOne,
        map,
        matched,
        total: table.total(),
        tie_events,
    }
}

/// Optimal bijection between units and labels. Requires a square table
/// (|U| = |P| + 1).
pub fn one_to_one(table: &ContingencyTable) -> Result<Assignment> {
    if table.cols() != table.rows() {
        return Err(Error::Dimension(format!(
            "one-to-one needs |U| = |P|+1 = {}, got {} units",
            table.rows(),
            table.cols()
        )));
    }
    let profit: Vec<Vec<i64>> = (0..table.rows())
        .map(|i| {
            table
                .row(i)
                .iter()
                .map(|&c| i64::try_from(c).map_err(|_| Error::Invalid("count overflows i64".into())))
                .collect()
        })
        .collect::<Result<_>>()?;
    let sol = solve_max(&profit);
    let map = sol
        .col_to_row
        .iter()
        .map(|r| r.expect("square problem assigns every column"))
        .collect();
    Ok(Assignment {
        kind: AssignmentKind::OneToOne,
        map,
        matched: sol.value as u64,
        total: table.total(),
        tie_events: sol.tie_events,
    })
}

/// Applies the map frame by frame.
pub fn apply(assignment: &Assignment, units: &UnitCorpus) -> Result<BTreeMap<String, Vec<usize>>> {
    units
        .utterances
        .par_iter()
        .map(|(id, us)| {
            let stream = us
                .iter()
                .map(|&u| {
                    assignment.get(u as usize).ok_or(Error::UnitOutOfRange {
                        unit: u,
                        vocab: assignment.map.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((id.clone(), stream))
        })
        .collect()
}

/// Result of a maximum-weight assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LapSolution<W> {
    /// Row assigned to each column; `None` for the columns left over when
    /// there are more columns than rows.
    pub col_to_row: Vec<Option<usize>>,
    pub value: W,
    /// Columns that have an alternative optimal partner.
    pub tie_events: usize,
}

/// Maximum-weight assignment on a rectangular integer matrix
/// (`weights[row][col]`). Among optimal solutions the column→row vector is
/// lexicographically smallest, rows and columns taken in index order.
pub fn solve_max<W: PrimInt + Signed>(weights: &[Vec<W>]) -> LapSolution<W> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return LapSolution {
            col_to_row: Vec::new(),
            value: W::zero(),
            tie_events: 0,
        };
    }
    let w = |i: usize, j: usize| -> W {
        if i < rows && j < cols {
            weights[i][j]
        } else {
            W::zero()
        }
    };
    let wmax = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| w(i, j))
        .max()
        .unwrap_or(W::zero());
    // minimize cost = wmax - weight >= 0
    let cost: Vec<Vec<W>> = (0..n).map(|i| (0..n).map(|j| wmax - w(i, j)).collect()).collect();
    let (mut row_of, u, v) = hungarian(&cost);

    // Equality subgraph of the optimal dual: exactly the edges usable by some
    // optimal assignment.
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if cost[i][j] - u[i] - v[j] == W::zero() {
                by_row[i].push(j);
                by_col[j].push(i);
            }
        }
    }
    let mut col_of = vec![0; n];
    for (j, &i) in row_of.iter().enumerate() {
        col_of[i] = j;
    }

    let mut fixed = vec![false; n];
    let tie_events = (0..n)
        .filter(|&j| {
            let reach = absorbers(j, &row_of, &by_row, &fixed);
            by_col[j]
                .iter()
                .any(|&i| i != row_of[j] && reach[col_of[i]].is_some())
        })
        .count();

    for j in 0..n {
        let cur = row_of[j];
        let reach = absorbers(j, &row_of, &by_row, &fixed);
        let better = by_col[j]
            .iter()
            .copied()
            .filter(|&i| i < cur && reach[col_of[i]].is_some())
            .min();
        if let Some(i) = better {
            // j takes i; each chain column takes its successor's row; the
            // last one takes `cur`.
            let mut chain = vec![col_of[i]];
            while let Some(Some(next)) = reach[*chain.last().unwrap()] {
                chain.push(next);
            }
            let old: Vec<usize> = chain.iter().map(|&c| row_of[c]).collect();
            row_of[j] = i;
            for k in 0..chain.len() {
                row_of[chain[k]] = if k + 1 < chain.len() { old[k + 1] } else { cur };
            }
            for (c, &r) in row_of.iter().enumerate() {
                col_of[r] = c;
            }
        }
        fixed[j] = true;
    }

    let value = (0..cols)
        .filter(|&j| row_of[j] < rows)
        .fold(W::zero(), |acc, j| acc + weights[row_of[j]][j]);
    LapSolution {
        col_to_row: (0..cols)
            .map(|j| (row_of[j] < rows).then_some(row_of[j]))
            .collect(),
        value,
        tie_events,
    }
}

/// For every column `c` other than `start` and not fixed, whether `c` can
/// give up its row and still be re-seated so that `row_of[start]` is freed up
/// for someone else: `Some(None)` if `c` can take `row_of[start]` directly,
/// `Some(Some(next))` if `c` takes `row_of[next]` and `next` continues.
fn absorbers(
    start: usize,
    row_of: &[usize],
    by_row: &[Vec<usize>],
    fixed: &[bool],
) -> Vec<Option<Option<usize>>> {
    let n = row_of.len();
    let mut reach: Vec<Option<Option<usize>>> = vec![None; n];
    let mut queue = VecDeque::new();
    for &c in &by_row[row_of[start]] {
        if c != start && !fixed[c] && reach[c].is_none() {
            reach[c] = Some(None);
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        for &c2 in &by_row[row_of[c]] {
            if c2 != start && !fixed[c2] && reach[c2].is_none() {
                reach[c2] = Some(Some(c));
                queue.push_back(c2);
            }
        }
    }
    reach
}

/// Shortest-augmenting-path Hungarian method on a square cost matrix.
/// Returns the row assigned to each column and row/column potentials with
/// `u[i] + v[j] <= cost[i][j]`, tight on the assignment.
fn hungarian<W: PrimInt + Signed>(cost: &[Vec<W>]) -> (Vec<usize>, Vec<W>, Vec<W>) {
    let n = cost.len();
    let inf = W::max_value() >> 2;
    // 1-based with a virtual column 0, after the e-maxx formulation
    let mut u = vec![W::zero(); n + 1];
    let mut v = vec![W::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let row_of = (1..=n).map(|j| p[j] - 1).collect();
    (row_of, u[1..].to_vec(), v[1..].to_vec())
}
