//! Maximum-weight rectangular assignment (Hungarian method).
//!
//! Shortest-augmenting-path formulation with row/column potentials,
//! O(n^2 m) for an n x m matrix with n <= m. Wider-than-tall inputs are
//! solved directly; taller inputs are transposed first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair<T> {
    pub row: usize,
    pub col: usize,
    pub score: T,
}

/// A matching of size `min(rows, cols)`; every row and column index
/// occurs at most once. Pairs are ordered by row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Assignment<T> {
    pub pairs: Vec<MatchedPair<T>>,
}

impl<T: Scalar> Assignment<T> {
    pub fn total(&self) -> T {
        self.pairs.iter().map(|p| p.score).sum()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Finds an assignment maximizing the summed score.
///
/// The matrix must be non-empty, rectangular and finite; callers with
/// empty answer lists are expected to short-circuit before getting here.
pub fn hungarian_match<T: Scalar>(scores: &[Vec<T>]) -> Result<Assignment<T>> {
    let rows = scores.len();
    let cols = scores.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::Degenerate("empty score matrix"));
    }
    if scores.iter().any(|r| r.len() != cols) {
        return Err(Error::validation("score matrix rows have unequal lengths"));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("score matrix contains non-finite entries"));
    }

    let mut pairs: Vec<MatchedPair<T>> = if rows <= cols {
        min_cost_rows(rows, cols, |i, j| -scores[i][j])
            .into_iter()
            .enumerate()
            .map(|(row, col)| MatchedPair {
                row,
                col,
                score: scores[row][col],
            })
            .collect()
    } else {
        min_cost_rows(cols, rows, |i, j| -scores[j][i])
            .into_iter()
            .enumerate()
            .map(|(col, row)| MatchedPair {
                row,
                col,
                score: scores[row][col],
            })
            .collect()
    };
    pairs.sort_by_key(|p| p.row);
    Ok(Assignment { pairs })
}

/// Minimum-cost assignment of every one of `n` rows to a distinct column
/// among `m >= n`. Returns the column chosen for each row.
fn min_cost_rows<T: Scalar>(n: usize, m: usize, cost: impl Fn(usize, usize) -> T) -> Vec<usize> {
    debug_assert!(n <= m);
    let inf = T::infinity();
    // 1-based with a virtual column 0 holding the row being inserted.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for j in 1..=m {
        if owner[j] > 0 {
            col_of_row[owner[j] - 1] = j - 1;
        }
    }
    col_of_row
}
