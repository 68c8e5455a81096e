//! Shared fixtures for unit tests.

use chrono::{DateTime, FixedOffset};

use crate::geo::{LonLat, Polygon};
use crate::grid::{build_grid, knn_adjacency, Grid, GridSpec};

/// 5x5 grid straddling the equator: 1 degree pitch both ways, so the axis
/// neighbors of the center cell are equidistant to within an ulp (the
/// north/south pair exactly so).
pub fn g5_spec() -> GridSpec {
    GridSpec {
        lon_min: 0.0,
        lon_max: 5.0,
        lat_min: -2.5,
        lat_max: 2.5,
        n_cols: 5,
        n_rows: 5,
    }
}

/// A rectangle comfortably containing the whole spec box.
pub fn full_cover_polygon(spec: &GridSpec) -> Polygon {
    Polygon::rect(
        spec.lon_min - 1.0,
        spec.lon_max + 1.0,
        (spec.lat_min - 1.0).max(-89.0),
        (spec.lat_max + 1.0).min(89.0),
    )
    .unwrap()
}

/// Fully masked-in G5 grid with KNN adjacency.
pub fn g5_grid(k: usize) -> Grid {
    let spec = g5_spec();
    knn_adjacency(build_grid(spec, &full_cover_polygon(&spec)).unwrap(), k)
}

/// Center of the G5 grid (cell 12).
pub fn g5_center() -> LonLat {
    LonLat::new(2.5, 0.0)
}

/// A fixed local timestamp for schedule tests: 03:58 local, UTC-5.
pub fn t0_0358() -> DateTime<FixedOffset> {
    DateTime::parse_from_rfc3339("2025-02-10T03:58:00-05:00").unwrap()
}

/// A daytime local timestamp: 10:00 local, UTC-5.
pub fn t0_1000() -> DateTime<FixedOffset> {
    DateTime::parse_from_rfc3339("2025-02-10T10:00:00-05:00").unwrap()
}
