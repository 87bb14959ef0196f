//! Rectangular linear assignment (Hungarian method, shortest augmenting paths
//! with dual potentials).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row, `None` for unassigned rows.
    pub row_to_col: Vec<Option<usize>>,
    pub total: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, c)))
    }
}

/// Minimum-cost matching of `min(rows, cols)` pairs.
///
/// Entries must be finite; encode forbidden pairs as a large finite penalty.
pub fn hungarian(cost: &DMatrix<f64>) -> Result<Assignment> {
    let (rows, cols) = cost.shape();
    if rows == 0 || cols == 0 {
        return Ok(Assignment {
            row_to_col: vec![None; rows],
            total: 0.0,
        });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Config("assignment costs must be finite".into()));
    }
    let row_to_col = if rows <= cols {
        solve(rows, cols, |i, j| cost[(i, j)])
    } else {
        let col_to_row = solve(cols, rows, |i, j| cost[(j, i)]);
        let mut out = vec![None; rows];
        for (c, r) in col_to_row.iter().enumerate() {
            if let Some(r) = r {
                out[*r] = Some(c);
            }
        }
        out
    };
    let total = row_to_col
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| cost[(r, c)]))
        .sum();
    Ok(Assignment { row_to_col, total })
}

/// Assigns every one of `n` rows to a distinct column out of `m >= n`.
fn solve(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    // 1-based internally; index 0 is the virtual root column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
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
    let mut out = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}
