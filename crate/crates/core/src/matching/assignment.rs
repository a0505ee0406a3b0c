use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::types::{sq_dist, AttributeDatabase, Permutation};

/// Row-major `rows × cols` matrix of nonnegative finite costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!("cost entries must be finite and >= 0, found {v}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("ragged cost matrix"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `Σ_i Z[i][pi(i)]`, summed in row order.
    pub fn cost_of(&self, pi: &Permutation) -> Result<f64> {
        check_len(self.rows, pi.len())?;
        check_len(self.cols, pi.len())?;
        Ok((0..self.rows).map(|i| self.get(i, pi.apply(i))).sum())
    }
}

/// `Z[i][j] = ‖x_i − y_j‖²`.
pub fn cost_matrix(x: &AttributeDatabase, y: &AttributeDatabase) -> Result<CostMatrix> {
    check_len(x.d(), y.d())?;
    let mut data = Vec::with_capacity(x.n() * y.n());
    for xi in x.rows() {
        data.extend(y.rows().map(|yj| sq_dist(xi, yj)));
    }
    Ok(CostMatrix {
        rows: x.n(),
        cols: y.n(),
        data,
    })
}

/// Minimum-cost perfect assignment by shortest augmenting paths with dual
/// potentials (Hungarian / Jonker–Volgenant), `O(n³)`.
pub fn solve_assignment(z: &CostMatrix) -> Result<(Permutation, f64)> {
    if z.rows != z.cols {
        return Err(invalid(format!(
            "assignment needs a square matrix, got {}x{}",
            z.rows, z.cols
        )));
    }
    let n = z.rows;
    if n == 0 {
        return Ok((Permutation::identity(0), 0.0));
    }
    // 1-based arrays; column 0 is a virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = z.row(i0 - 1);
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
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
            if j1 == 0 {
                return Err(crate::Error::Internal("assignment search stalled".into()));
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
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
    let mut mapping = vec![0usize; n];
    for j in 1..=n {
        mapping[owner[j] - 1] = j - 1;
    }
    let pi = Permutation::new(mapping)?;
    let cost = z.cost_of(&pi)?;
    Ok((pi, cost))
}
