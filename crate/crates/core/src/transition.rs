//! Energy-based sparse Markov transition matrices.
//!
//! For each in-mask cell i with neighbor set N(i), the unnormalized weight
//! toward neighbor j is exp(-E_ij) with
//!
//! ```text
//! E_ij = beta_d * d(i, j)        // great-circle miles
//!      + beta_r * road_cost(j)   // hard-to-reach destinations penalized
//!      - beta_s * seclusion(j)   // secluded destinations attract
//!      - beta_c * corridor(j)    // travel corridors attract
//! ```
//!
//! Rows are normalized over N(i) and scaled by (1 - self_loop); the diagonal
//! receives the self_loop fraction. Masked-out rows are identity so the
//! matrix is row-stochastic over the full index space.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::Grid;
use crate::layers::FeatureLayers;

/// Energy coefficients plus the dwell (self-transition) fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionParams {
    pub beta_d: f64,
    pub beta_r: f64,
    pub beta_s: f64,
    pub beta_c: f64,
    pub self_loop: f64,
}

impl TransitionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_d", self.beta_d),
            ("beta_r", self.beta_r),
            ("beta_s", self.beta_s),
            ("beta_c", self.beta_c),
            ("self_loop", self.self_loop),
        ] {
            if !v.is_finite() {
                return Err(CoreError::NonFiniteValue {
                    context: format!("transition parameter {name}"),
                });
            }
        }
        if !(0.0..1.0).contains(&self.self_loop) {
            return Err(CoreError::InvalidParameter(format!(
                "self_loop {} outside [0, 1)",
                self.self_loop
            )));
        }
        Ok(())
    }
}

/// Row-stochastic sparse matrix in CSR layout; columns sorted within a row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Day and night matrices built from the same grid and layers.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPair {
    pub day: TransitionMatrix,
    pub night: TransitionMatrix,
}

/// Build one transition matrix from grid adjacency, layers, and parameters.
pub fn build_transition(
    grid: &Grid,
    layers: &FeatureLayers,
    params: &TransitionParams,
) -> Result<TransitionMatrix> {
    params.validate()?;
    let n = grid.n_cells();
    if layers.len() != n {
        return Err(CoreError::GridMismatch {
            expected: n,
            actual: layers.len(),
        });
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    let mut row: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        row.clear();
        if !grid.is_in_mask(i) {
            row.push((i, 1.0));
        } else {
            let nbrs = grid.neighbors(i);
            if nbrs.is_empty() {
                if params.self_loop == 0.0 {
                    return Err(CoreError::IsolatedCell { cell: i });
                }
                row.push((i, 1.0));
            } else {
                let dists = grid.neighbor_distances(i);
                let mut z = 0.0;
                let mut weights = Vec::with_capacity(nbrs.len());
                for (&j, &d) in nbrs.iter().zip(dists) {
                    let energy = params.beta_d * d + params.beta_r * layers.road_cost[j]
                        - params.beta_s * layers.seclusion[j]
                        - params.beta_c * layers.corridor[j];
                    let w = (-energy).exp();
                    if !w.is_finite() {
                        return Err(CoreError::NonFiniteValue {
                            context: format!("transition weight {i} -> {j}"),
                        });
                    }
                    weights.push((j, w));
                    z += w;
                }
                if z <= 0.0 || !z.is_finite() {
                    return Err(CoreError::NonFiniteValue {
                        context: format!("normalizer for row {i}"),
                    });
                }
                let spread = 1.0 - params.self_loop;
                for &(j, w) in &weights {
                    row.push((j, spread * w / z));
                }
                if params.self_loop > 0.0 {
                    row.push((i, params.self_loop));
                }
            }
        }
        row.sort_by_key(|&(j, _)| j);
        for &(j, v) in &row {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(TransitionMatrix {
        n,
        row_ptr,
        cols,
        vals,
    })
}

/// Build a day/night matrix pair sharing one adjacency structure.
pub fn build_pair(
    grid: &Grid,
    layers: &FeatureLayers,
    day: &TransitionParams,
    night: &TransitionParams,
) -> Result<TransitionPair> {
    Ok(TransitionPair {
        day: build_transition(grid, layers, day)?,
        night: build_transition(grid, layers, night)?,
    })
}

impl TransitionMatrix {
    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn n_entries(&self) -> usize {
        self.vals.len()
    }

    /// Row entries as (column, value), column-sorted.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    /// Largest |row_sum - 1| across all rows.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.row_sum(i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// One step of mass flow: out[j] = sum_i P[i][j] * p[i].
    pub fn propagate(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.n {
            return Err(CoreError::LengthMismatch {
                expected: self.n,
                actual: p.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += v * pi;
            }
        }
        Ok(out)
    }

    /// Dense materialization for small-grid oracles and debugging.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        m
    }

    /// All non-zero entries as (row, col, value) triplets in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }
}
