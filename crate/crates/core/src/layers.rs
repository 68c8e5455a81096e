//! Per-cell terrain feature layers: road-access cost, seclusion, corridor
//! affinity. All layers are unit-interval scalars aligned with grid indices.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geo::LonLat;
use crate::grid::Grid;

/// Feature layers used by the transition energy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayers {
    pub road_cost: Vec<f64>,
    pub seclusion: Vec<f64>,
    pub corridor: Vec<f64>,
}

impl FeatureLayers {
    /// Wrap pre-normalized layers. Values must already lie in [0, 1]; this
    /// constructor validates but never rescales.
    pub fn new(road_cost: Vec<f64>, seclusion: Vec<f64>, corridor: Vec<f64>) -> Result<Self> {
        let n = road_cost.len();
        for (name, v) in [
            ("road_cost", &road_cost),
            ("seclusion", &seclusion),
            ("corridor", &corridor),
        ] {
            if v.len() != n {
                return Err(CoreError::LengthMismatch {
                    expected: n,
                    actual: v.len(),
                });
            }
            for (i, &x) in v.iter().enumerate() {
                if !x.is_finite() {
                    return Err(CoreError::NonFiniteValue {
                        context: format!("{name}[{i}]"),
                    });
                }
                if !(0.0..=1.0).contains(&x) {
                    return Err(CoreError::InvalidParameter(format!(
                        "{name}[{i}] = {x} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Self {
            road_cost,
            seclusion,
            corridor,
        })
    }

    /// Layers that exert no pull anywhere.
    pub fn flat(n: usize) -> Self {
        Self {
            road_cost: vec![0.0; n],
            seclusion: vec![0.0; n],
            corridor: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.road_cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.road_cost.is_empty()
    }

    /// CSV export mirroring [`load_layers`]' input format.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cell_index,road_cost,seclusion,corridor")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                i, self.road_cost[i], self.seclusion[i], self.corridor[i]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct LayerRow {
    cell_index: usize,
    road_cost: f64,
    seclusion: f64,
    corridor: f64,
}

/// Read layers from CSV (`cell_index,road_cost,seclusion,corridor`) and
/// min-max normalize each column to [0, 1]. Every cell index in
/// `0..n_cells` must appear exactly once; raw values may be any finite
/// float. A constant column normalizes to all zeros.
pub fn load_layers<R: std::io::Read>(reader: R, n_cells: usize) -> Result<FeatureLayers> {
    let mut rd = csv::Reader::from_reader(reader);
    let mut road = vec![f64::NAN; n_cells];
    let mut secl = vec![f64::NAN; n_cells];
    let mut corr = vec![f64::NAN; n_cells];
    let mut seen = 0usize;
    for row in rd.deserialize() {
        let row: LayerRow = row?;
        if row.cell_index >= n_cells {
            return Err(CoreError::InvalidParameter(format!(
                "cell_index {} out of range for {} cells",
                row.cell_index, n_cells
            )));
        }
        if !road[row.cell_index].is_nan() {
            return Err(CoreError::InvalidParameter(format!(
                "duplicate cell_index {}",
                row.cell_index
            )));
        }
        for (name, x) in [
            ("road_cost", row.road_cost),
            ("seclusion", row.seclusion),
            ("corridor", row.corridor),
        ] {
            if !x.is_finite() {
                return Err(CoreError::NonFiniteValue {
                    context: format!("{name} at cell_index {}", row.cell_index),
                });
            }
        }
        road[row.cell_index] = row.road_cost;
        secl[row.cell_index] = row.seclusion;
        corr[row.cell_index] = row.corridor;
        seen += 1;
    }
    if seen != n_cells {
        return Err(CoreError::LengthMismatch {
            expected: n_cells,
            actual: seen,
        });
    }
    for v in [&mut road, &mut secl, &mut corr] {
        min_max_normalize(v);
    }
    FeatureLayers::new(road, secl, corr)
}

fn min_max_normalize(v: &mut [f64]) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        v.iter_mut().for_each(|x| *x = (*x - lo) / range);
    }
}

/// Corridor affinity from a travel polyline: exp(-d / scale) with d the
/// great-circle-scaled distance from each cell center to the nearest point
/// of the polyline. Cells on the line score exactly 1.
pub fn corridor_from_polyline(grid: &Grid, polyline: &[LonLat], scale_miles: f64) -> Vec<f64> {
    grid.cells()
        .iter()
        .map(|&c| {
            let d = polyline_distance_miles(c, polyline);
            if d.is_finite() {
                (-d / scale_miles).exp()
            } else {
                0.0
            }
        })
        .collect()
}

const MILES_PER_DEG: f64 = 2.0 * std::f64::consts::PI * crate::geo::EARTH_RADIUS_MILES / 360.0;

/// Distance from a point to a polyline, computed segment-exact in a local
/// equirectangular frame anchored at the point (accurate at corridor scales,
/// and exactly zero for points on a segment).
fn polyline_distance_miles(p: LonLat, polyline: &[LonLat]) -> f64 {
    let k_lon = MILES_PER_DEG * p.lat.to_radians().cos();
    let project = |v: LonLat| ((v.lon - p.lon) * k_lon, (v.lat - p.lat) * MILES_PER_DEG);
    if polyline.len() == 1 {
        let (x, y) = project(polyline[0]);
        return x.hypot(y);
    }
    let mut best = f64::INFINITY;
    for pair in polyline.windows(2) {
        let (ax, ay) = project(pair[0]);
        let (bx, by) = project(pair[1]);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (cx, cy) = (ax + t * dx, ay + t * dy);
        best = best.min(cx.hypot(cy));
    }
    best
}

/// Deterministic synthetic layers for demos and tests.
///
/// Corridors decay exponentially away from a diagonal travel polyline across
/// the grid; road cost is anti-correlated with the corridor (main routes are
/// easy to reach) plus smooth noise; seclusion is independent smooth noise.
pub fn synth_layers(grid: &Grid, seed: u64) -> FeatureLayers {
    let spec = grid.spec();
    let polyline = vec![
        LonLat::new(spec.lon_min, spec.lat_min),
        LonLat::new(
            0.5 * (spec.lon_min + spec.lon_max),
            0.6 * spec.lat_max + 0.4 * spec.lat_min,
        ),
        LonLat::new(spec.lon_max, spec.lat_max),
    ];
    synth_layers_along(grid, seed, &polyline, 5.0)
}

/// As [`synth_layers`] but with a caller-supplied corridor polyline and
/// decay scale.
pub fn synth_layers_along(
    grid: &Grid,
    seed: u64,
    polyline: &[LonLat],
    scale_miles: f64,
) -> FeatureLayers {
    let corridor = corridor_from_polyline(grid, polyline, scale_miles);
    let road_noise = smooth_noise(grid, ChaCha8Rng::seed_from_u64(seed ^ 0x726f6164));
    let seclusion = smooth_noise(grid, ChaCha8Rng::seed_from_u64(seed ^ 0x7365636c));
    let road_cost = corridor
        .iter()
        .zip(&road_noise)
        .map(|(&c, &n)| (1.0 - 0.6 * c) * (0.4 + 0.6 * n))
        .map(|x| x.clamp(0.0, 1.0))
        .collect();
    FeatureLayers::new(road_cost, seclusion, corridor).expect("synthetic layers are in range")
}

/// Bilinear value noise over a coarse lattice, sampled at cell centers.
fn smooth_noise(grid: &Grid, mut rng: ChaCha8Rng) -> Vec<f64> {
    let spec = grid.spec();
    let coarse = 8usize;
    let gc = spec.n_cols.div_ceil(coarse) + 2;
    let gr = spec.n_rows.div_ceil(coarse) + 2;
    let lattice: Vec<f64> = (0..gc * gr).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(grid.n_cells());
    for row in 0..spec.n_rows {
        for col in 0..spec.n_cols {
            let x = col as f64 / coarse as f64;
            let y = row as f64 / coarse as f64;
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let (fx, fy) = (x - x0 as f64, y - y0 as f64);
            let at = |r: usize, c: usize| lattice[r.min(gr - 1) * gc + c.min(gc - 1)];
            let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
            let bot = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}
