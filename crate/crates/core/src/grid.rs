//! Masked spatial grid over a lon/lat bounding box with KNN adjacency.
//!
//! Cells are laid out row-major (`index = row * n_cols + col`, row 0 at the
//! southern edge) and keep their index whether or not they fall inside the
//! boundary polygon, so probability vectors stay a fixed length N and align
//! with exported coordinates. Masked-out cells simply never receive mass.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geo::{haversine_miles, LonLat, Polygon};

/// Regular grid layout: bounding box plus column/row counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub n_cols: usize,
    pub n_rows: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.lon_min, self.lon_max, self.lat_min, self.lat_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(CoreError::InvalidSpec("non-finite bounds".into()));
        }
        if self.lon_min >= self.lon_max || self.lat_min >= self.lat_max {
            return Err(CoreError::InvalidSpec("degenerate bounding box".into()));
        }
        if self.lat_min < -90.0 || self.lat_max > 90.0 {
            return Err(CoreError::InvalidSpec(
                "latitude bounds outside [-90, 90]".into(),
            ));
        }
        if self.n_cols == 0 || self.n_rows == 0 || self.n_cols * self.n_rows < 4 {
            return Err(CoreError::InvalidSpec(
                "grid must have at least 4 cells".into(),
            ));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn cell_center(&self, row: usize, col: usize) -> LonLat {
        let dlon = (self.lon_max - self.lon_min) / self.n_cols as f64;
        let dlat = (self.lat_max - self.lat_min) / self.n_rows as f64;
        LonLat::new(
            self.lon_min + (col as f64 + 0.5) * dlon,
            self.lat_min + (row as f64 + 0.5) * dlat,
        )
    }

    pub fn contains(&self, p: LonLat) -> bool {
        p.lon >= self.lon_min
            && p.lon <= self.lon_max
            && p.lat >= self.lat_min
            && p.lat <= self.lat_max
    }
}

/// Masked grid with per-cell KNN adjacency over in-mask cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    cells: Vec<LonLat>,
    mask: Vec<bool>,
    neighbor_sets: Vec<Vec<usize>>,
    neighbor_distances: Vec<Vec<f64>>,
}

/// Build the masked grid: centers row-major, mask = boundary containment.
pub fn build_grid(spec: GridSpec, boundary: &Polygon) -> Result<Grid> {
    spec.validate()?;
    let n = spec.n_cells();
    let mut cells = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for row in 0..spec.n_rows {
        for col in 0..spec.n_cols {
            let c = spec.cell_center(row, col);
            mask.push(boundary.contains(c));
            cells.push(c);
        }
    }
    if !mask.iter().any(|&m| m) {
        return Err(CoreError::EmptyDomain);
    }
    Ok(Grid {
        spec,
        cells,
        mask,
        neighbor_sets: vec![Vec::new(); n],
        neighbor_distances: vec![Vec::new(); n],
    })
}

/// Populate each in-mask cell's `min(k, in_mask - 1)` nearest in-mask
/// neighbors by great-circle distance. Ties break by ascending cell index.
pub fn knn_adjacency(mut grid: Grid, k: usize) -> Grid {
    let n = grid.cells.len();
    let in_mask: Vec<usize> = (0..n).filter(|&i| grid.mask[i]).collect();
    let results: Vec<(usize, Vec<usize>, Vec<f64>)> = {
        let finder = NeighborFinder::new(&grid);
        in_mask
            .iter()
            .map(|&i| {
                let (idx, dist) = finder.k_nearest(i, k.min(in_mask.len().saturating_sub(1)));
                (i, idx, dist)
            })
            .collect()
    };
    for (i, idx, dist) in results {
        grid.neighbor_sets[i] = idx;
        grid.neighbor_distances[i] = dist;
    }
    grid
}

impl Grid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[LonLat] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> LonLat {
        self.cells[i]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_in_mask(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn in_mask_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_cells()).filter(move |&i| self.mask[i])
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbor_sets[i]
    }

    pub fn neighbor_distances(&self, i: usize) -> &[f64] {
        &self.neighbor_distances[i]
    }

    /// Cell whose center is nearest to `p` by lattice arithmetic (clamped to
    /// the bounding box), regardless of mask state.
    pub fn nearest_cell(&self, p: LonLat) -> usize {
        let s = &self.spec;
        let dlon = (s.lon_max - s.lon_min) / s.n_cols as f64;
        let dlat = (s.lat_max - s.lat_min) / s.n_rows as f64;
        let col = (((p.lon - s.lon_min) / dlon).floor() as isize).clamp(0, s.n_cols as isize - 1);
        let row = (((p.lat - s.lat_min) / dlat).floor() as isize).clamp(0, s.n_rows as isize - 1);
        row as usize * s.n_cols + col as usize
    }

    /// Nearest in-mask cell to a point; ties break by ascending index.
    pub fn nearest_in_mask_cell(&self, p: LonLat) -> usize {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for i in self.in_mask_indices() {
            let d = haversine_miles(p, self.cells[i]);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Nominal cell pitch in miles: the smaller of the row pitch and the
    /// column pitch at the grid's central latitude.
    pub fn cell_spacing_miles(&self) -> f64 {
        let s = &self.spec;
        let dlat = (s.lat_max - s.lat_min) / s.n_rows as f64;
        let dlon = (s.lon_max - s.lon_min) / s.n_cols as f64;
        let mid_lat = 0.5 * (s.lat_min + s.lat_max);
        let per_deg = crate::geo::EARTH_RADIUS_MILES * std::f64::consts::PI / 180.0;
        (dlat * per_deg).min(dlon * per_deg * mid_lat.to_radians().cos())
    }

    /// CSV export: `index,lon,lat,mask`, one row per cell in index order.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,lon,lat,mask")?;
        for (i, c) in self.cells.iter().enumerate() {
            writeln!(w, "{},{},{},{}", i, c.lon, c.lat, u8::from(self.mask[i]))?;
        }
        Ok(())
    }
}

/// Expanding-ring KNN search on the regular lattice. Rings are scanned in
/// increasing Chebyshev radius; the search stops once the k-th best distance
/// cannot be beaten by any cell in the next ring. Falls back to scanning the
/// whole lattice for heavily masked regions.
struct NeighborFinder<'g> {
    grid: &'g Grid,
    row_pitch_miles: f64,
    col_pitch_floor_miles: f64,
}

impl<'g> NeighborFinder<'g> {
    fn new(grid: &'g Grid) -> Self {
        let s = &grid.spec;
        let per_deg = crate::geo::EARTH_RADIUS_MILES * std::f64::consts::PI / 180.0;
        let dlat = (s.lat_max - s.lat_min) / s.n_rows as f64;
        let dlon = (s.lon_max - s.lon_min) / s.n_cols as f64;
        // cos at the latitude extreme gives the tightest column pitch bound.
        let min_cos = s
            .lat_min
            .to_radians()
            .cos()
            .min(s.lat_max.to_radians().cos());
        // d >= 2R * cos(phi_max) * sin(dlon/2) for a pure east-west offset.
        let col_floor = 2.0
            * crate::geo::EARTH_RADIUS_MILES
            * min_cos.max(0.0)
            * ((dlon / 2.0).to_radians()).sin();
        Self {
            grid,
            row_pitch_miles: dlat * per_deg,
            col_pitch_floor_miles: col_floor,
        }
    }

    fn ring_lower_bound(&self, w: usize) -> f64 {
        let w = w as f64;
        (w * self.row_pitch_miles).min(w * self.col_pitch_floor_miles)
    }

    fn k_nearest(&self, i: usize, k: usize) -> (Vec<usize>, Vec<f64>) {
        if k == 0 {
            return (Vec::new(), Vec::new());
        }
        let s = &self.grid.spec;
        let (row, col) = (i / s.n_cols, i % s.n_cols);
        let p = self.grid.cells[i];
        let max_ring = s.n_rows.max(s.n_cols);
        // (distance, index) candidates, kept sorted lazily at the end.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 8);
        for w in 1..=max_ring {
            for (r, c) in ring_offsets(row, col, w, s.n_rows, s.n_cols) {
                let j = r * s.n_cols + c;
                if !self.grid.mask[j] {
                    continue;
                }
                best.push((haversine_miles(p, self.grid.cells[j]), j));
            }
            if best.len() >= k {
                best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                best.truncate(k.max(best.len().min(4 * k)));
                let kth = best[k - 1].0;
                if kth <= self.ring_lower_bound(w + 1) {
                    break;
                }
            }
        }
        best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        best.truncate(k);
        let idx = best.iter().map(|&(_, j)| j).collect();
        let dist = best.iter().map(|&(d, _)| d).collect();
        (idx, dist)
    }
}

/// Lattice cells at exact Chebyshev distance `w` from (row, col), clipped to
/// the grid, in deterministic scan order.
fn ring_offsets(
    row: usize,
    col: usize,
    w: usize,
    n_rows: usize,
    n_cols: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let (row, col, w) = (row as isize, col as isize, w as isize);
    let (n_rows, n_cols) = (n_rows as isize, n_cols as isize);
    let mut out = Vec::with_capacity((8 * w) as usize);
    for dr in -w..=w {
        let r = row + dr;
        if r < 0 || r >= n_rows {
            continue;
        }
        if dr.abs() == w {
            for dc in -w..=w {
                let c = col + dc;
                if c >= 0 && c < n_cols {
                    out.push((r as usize, c as usize));
                }
            }
        } else {
            for dc in [-w, w] {
                let c = col + dc;
                if c >= 0 && c < n_cols {
                    out.push((r as usize, c as usize));
                }
            }
        }
    }
    out.into_iter()
}
