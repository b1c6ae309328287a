//! Executable design-condition checkers for measurement matrices.
//!
//! Three structural conditions are checked on a J x K binary matrix:
//!
//! * **strict** — every standard basis row appears at least twice, so two
//!   disjoint identity blocks exist after a row permutation;
//! * **generic block** — 2K distinct rows can be assigned two-to-one to the
//!   columns (each assigned row carrying a 1 in its column) while the
//!   remaining rows still cover every column;
//! * **subset** — no column entrywise dominates another.
//!
//! Each checker returns a witness: a satisfying assignment on pass, a
//! counterexample on failure.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{linear_predictor, index_state, ModelParams, QMatrix};

/// Outcome of the strict (two-identity-blocks) condition.
#[derive(Debug, Clone, Serialize)]
pub struct StrictOutcome {
    pub holds: bool,
    /// On pass: for each column, two distinct anchor rows equal to `e_k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor_rows: Option<Vec<[usize; 2]>>,
    /// On failure: a column whose basis row appears fewer than twice.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing_column: Option<usize>,
}

/// Outcome of the generic block condition.
#[derive(Debug, Clone, Serialize)]
pub struct GenericOutcome {
    pub holds: bool,
    /// On pass: the 2K `(row, column)` assignment pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<[usize; 2]>>,
    /// On failure: a column that cannot be served.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_column: Option<usize>,
}

/// Outcome of the subset (no column contains another) condition.
#[derive(Debug, Clone, Serialize)]
pub struct SubsetOutcome {
    pub holds: bool,
    /// On failure: `(p, q)` with column p entrywise >= column q.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violating_pair: Option<[usize; 2]>,
}

/// Outcome of the predictor-separation condition.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationOutcome {
    pub holds: bool,
    /// On failure: two state indices no non-anchor item separates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violating_states: Option<[usize; 2]>,
}

/// Aggregated design report, printed as JSON by the `check-q` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct IdentReport {
    pub strict_two_identity: bool,
    pub generic_block_condition: bool,
    pub subset_condition: bool,
    pub no_all_zero_column_overall: bool,
    pub strict: StrictOutcome,
    pub generic: GenericOutcome,
    pub subset: SubsetOutcome,
    pub zero_columns: Vec<usize>,
}

/// Check that each basis row `e_k` occurs at least twice.
pub fn strict_condition(q: &QMatrix) -> StrictOutcome {
    let mut anchors: Vec<Vec<usize>> = vec![Vec::new(); q.k()];
    for j in 0..q.j() {
        if q.row_sum(j) == 1 {
            let col = q.row(j).iter().position(|&e| e == 1).unwrap();
            anchors[col].push(j);
        }
    }
    for (col, rows) in anchors.iter().enumerate() {
        if rows.len() < 2 {
            return StrictOutcome { holds: false, anchor_rows: None, missing_column: Some(col) };
        }
    }
    StrictOutcome {
        holds: true,
        anchor_rows: Some(anchors.iter().map(|r| [r[0], r[1]]).collect()),
        missing_column: None,
    }
}

/// Try to saturate all `2K` column slots with a matching over the given
/// rows. Rows and slots are processed in ascending order so the result is
/// the lexicographically smallest greedy-augmented matching.
fn capacity2_matching(q: &QMatrix, allowed: &[bool]) -> Option<Vec<usize>> {
    let slots = 2 * q.k();
    // slot s serves column s / 2
    let mut slot_row: Vec<Option<usize>> = vec![None; slots];
    let mut row_slot: Vec<Option<usize>> = vec![None; q.j()];

    fn augment(
        q: &QMatrix,
        allowed: &[bool],
        slot: usize,
        visited: &mut [bool],
        slot_row: &mut [Option<usize>],
        row_slot: &mut [Option<usize>],
    ) -> bool {
        let col = slot / 2;
        for row in 0..q.j() {
            if !allowed[row] || visited[row] || !q.get(row, col) {
                continue;
            }
            visited[row] = true;
            let free = match row_slot[row] {
                None => true,
                Some(other) => augment(q, allowed, other, visited, slot_row, row_slot),
            };
            if free {
                slot_row[slot] = Some(row);
                row_slot[row] = Some(slot);
                return true;
            }
        }
        false
    }

    for slot in 0..slots {
        let mut visited = vec![false; q.j()];
        if !augment(q, allowed, slot, &mut visited, &mut slot_row, &mut row_slot) {
            return None;
        }
    }
    Some(slot_row.into_iter().map(|r| r.unwrap()).collect())
}

fn rows_with_one(q: &QMatrix, col: usize) -> Vec<usize> {
    (0..q.j()).filter(|&j| q.get(j, col)).collect()
}

/// Check the block condition via capacity-2 bipartite matching plus a
/// coverage requirement on the leftover rows.
///
/// The existential search is exact: if the first matching leaves some
/// column uncovered, minimal hitting sets of witness rows are reserved and
/// the matching is retried on the remaining rows.
pub fn generic_block_condition(q: &QMatrix) -> GenericOutcome {
    let k = q.k();
    if q.j() < 2 * k {
        return GenericOutcome { holds: false, assignment: None, failing_column: Some(0) };
    }
    let supports: Vec<Vec<usize>> = (0..k).map(|c| rows_with_one(q, c)).collect();
    // Column c consumes two matched rows from its support and still needs an
    // unmatched one, so a support smaller than 3 can never work.
    for (c, s) in supports.iter().enumerate() {
        if s.len() < 3 {
            return GenericOutcome { holds: false, assignment: None, failing_column: Some(c) };
        }
    }

    let all = vec![true; q.j()];
    if let Some(slot_row) = capacity2_matching(q, &all) {
        if let Some(out) = coverage_ok(q, &slot_row, &supports) {
            return out;
        }
    } else {
        let c = first_unmatchable_column(q);
        return GenericOutcome { holds: false, assignment: None, failing_column: c };
    }

    // Reserve witness rows (a minimal hitting set of the supports) and try
    // to match on the rest.
    let mut reserved = vec![false; q.j()];
    let mut found: Option<Vec<usize>> = None;
    enumerate_hitting_sets(&supports, 0, &mut reserved, &mut |res| {
        let allowed: Vec<bool> = (0..q.j()).map(|r| !res[r]).collect();
        if let Some(slot_row) = capacity2_matching(q, &allowed) {
            found = Some(slot_row);
            true
        } else {
            false
        }
    });
    match found {
        Some(slot_row) => {
            let assignment = slot_row
                .iter()
                .enumerate()
                .map(|(slot, &row)| [row, slot / 2])
                .collect();
            GenericOutcome { holds: true, assignment: Some(assignment), failing_column: None }
        }
        None => {
            let c = first_unmatchable_column(q);
            GenericOutcome { holds: false, assignment: None, failing_column: c.or(Some(0)) }
        }
    }
}

/// Check that the rows left out of the matching hit every column.
fn coverage_ok(
    q: &QMatrix,
    slot_row: &[usize],
    supports: &[Vec<usize>],
) -> Option<GenericOutcome> {
    let mut used = vec![false; q.j()];
    for &r in slot_row {
        used[r] = true;
    }
    for support in supports.iter() {
        if !support.iter().any(|&r| !used[r]) {
            return None;
        }
    }
    let assignment = slot_row
        .iter()
        .enumerate()
        .map(|(slot, &row)| [row, slot / 2])
        .collect();
    Some(GenericOutcome { holds: true, assignment: Some(assignment), failing_column: None })
}

fn first_unmatchable_column(q: &QMatrix) -> Option<usize> {
    (0..q.k()).find(|&c| rows_with_one(q, c).len() < 3)
}

/// Depth-first enumeration of hitting sets of `supports`, calling `accept`
/// on each; stops early once `accept` returns true.
fn enumerate_hitting_sets(
    supports: &[Vec<usize>],
    col: usize,
    reserved: &mut Vec<bool>,
    accept: &mut impl FnMut(&[bool]) -> bool,
) -> bool {
    if col == supports.len() {
        return accept(reserved);
    }
    if supports[col].iter().any(|&r| reserved[r]) {
        return enumerate_hitting_sets(supports, col + 1, reserved, accept);
    }
    for &r in &supports[col] {
        reserved[r] = true;
        if enumerate_hitting_sets(supports, col + 1, reserved, accept) {
            reserved[r] = false;
            return true;
        }
        reserved[r] = false;
    }
    false
}

/// Check that no column entrywise dominates another.
pub fn subset_condition(q: &QMatrix) -> SubsetOutcome {
    for p in 0..q.k() {
        for r in 0..q.k() {
            if p == r {
                continue;
            }
            let cp = q.column(p);
            let cr = q.column(r);
            if cp.iter().zip(&cr).all(|(a, b)| a >= b) {
                return SubsetOutcome { holds: false, violating_pair: Some([p, r]) };
            }
        }
    }
    SubsetOutcome { holds: true, violating_pair: None }
}

/// Check that for every pair of distinct states some item outside the two
/// identity blocks separates their linear predictors.
///
/// Requires the strict condition to hold (its witness defines the anchor
/// rows). Predictors are compared at absolute tolerance 1e-9.
pub fn eta_separation_condition(
    params: &ModelParams,
    q: &QMatrix,
) -> Result<SeparationOutcome> {
    let k = q.k();
    if k > crate::model::DENSE_CAP {
        return Err(Error::Capacity(format!(
            "K={k} exceeds dense cap {}",
            crate::model::DENSE_CAP
        )));
    }
    let strict = strict_condition(q);
    let Some(anchors) = strict.anchor_rows else {
        return Err(Error::InvalidInput(
            "eta separation needs the strict condition's anchor witness".into(),
        ));
    };
    let mut is_anchor = vec![false; q.j()];
    for pair in &anchors {
        is_anchor[pair[0]] = true;
        is_anchor[pair[1]] = true;
    }
    let free_items: Vec<usize> = (0..q.j()).filter(|&j| !is_anchor[j]).collect();

    let mut groups: std::collections::HashMap<Vec<i64>, usize> = std::collections::HashMap::new();
    for s in 0..(1usize << k) {
        let z = index_state(s, k);
        let key: Vec<i64> = free_items
            .iter()
            .map(|&j| {
                let eta = linear_predictor(params.b.row(j), &z).unwrap();
                (eta / 1e-9).round() as i64
            })
            .collect();
        if let Some(&other) = groups.get(&key) {
            return Ok(SeparationOutcome {
                holds: false,
                violating_states: Some([other, s]),
            });
        }
        groups.insert(key, s);
    }
    Ok(SeparationOutcome { holds: true, violating_states: None })
}

/// Run all structural checks on a matrix.
pub fn report(q: &QMatrix) -> IdentReport {
    let strict = strict_condition(q);
    let generic = generic_block_condition(q);
    let subset = subset_condition(q);
    let zero_columns: Vec<usize> = (0..q.k())
        .filter(|&c| q.column(c).iter().all(|&e| e == 0))
        .collect();
    IdentReport {
        strict_two_identity: strict.holds,
        generic_block_condition: generic.holds,
        subset_condition: subset.holds,
        no_all_zero_column_overall: zero_columns.is_empty(),
        strict,
        generic,
        subset,
        zero_columns,
    }
}

/// The 12 x 4 matrix of three stacked copies of a block whose first column
/// dominates its third; it satisfies the block condition but violates the
/// subset condition.
pub fn dominated_column_example() -> QMatrix {
    let block = [
        [1u8, 0, 0, 0],
        [0, 1, 0, 0],
        [1, 0, 1, 0],
        [0, 0, 0, 1],
    ];
    let mut entries = Vec::with_capacity(48);
    for _ in 0..3 {
        for row in &block {
            entries.extend_from_slice(row);
        }
    }
    QMatrix::new(12, 4, entries).unwrap()
}
