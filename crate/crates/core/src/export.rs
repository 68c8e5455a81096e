//! Plot-ready GeoJSON exports: probability cells, zone circles, and
//! containment rings. Written through the canonical writer so exports are
//! byte-stable.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::canonical::to_canonical_string;
use crate::error::{CoreError, Result};
use crate::geo::{LonLat, EARTH_RADIUS_MILES};
use crate::grid::Grid;
use crate::plan::{RingOut, SearchPlan, ZonesRecord};

const MILES_PER_DEG_LAT: f64 = 2.0 * PI * EARTH_RADIUS_MILES / 360.0;

/// Closed counterclockwise ring approximating a circle of `radius_miles`.
fn circle_ring(center: LonLat, radius_miles: f64, n: usize) -> Vec<(f64, f64)> {
    let lat_rad = center.lat.to_radians();
    let miles_per_deg_lon = MILES_PER_DEG_LAT * lat_rad.cos();
    let mut ring = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let theta = 2.0 * PI * (i % n) as f64 / n as f64;
        let dx = radius_miles * theta.cos();
        let dy = radius_miles * theta.sin();
        ring.push((
            center.lon + dx / miles_per_deg_lon,
            center.lat + dy / MILES_PER_DEG_LAT,
        ));
    }
    ring
}

fn ring_coords(ring: &[(f64, f64)]) -> Value {
    Value::Array(ring.iter().map(|&(lon, lat)| json!([lon, lat])).collect())
}

fn feature(geometry: Value, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": geometry,
        "properties": properties,
    })
}

fn collection(features: Vec<Value>) -> Value {
    json!({
        "type": "FeatureCollection",
        "features": features,
    })
}

/// One rectangle per in-mask cell, carrying the cumulative and per-horizon
/// probabilities aligned to the plan.
pub fn cells_geojson(grid: &Grid, plan: &SearchPlan) -> Result<Value> {
    plan.validate()?;
    if plan.grid_xy.len() != grid.n_cells() {
        return Err(CoreError::GridMismatch {
            expected: grid.n_cells(),
            actual: plan.grid_xy.len(),
        });
    }
    let spec = grid.spec();
    let half_lon = 0.5 * (spec.lon_max - spec.lon_min) / spec.n_cols as f64;
    let half_lat = 0.5 * (spec.lat_max - spec.lat_min) / spec.n_rows as f64;
    let mut features = Vec::new();
    for i in grid.in_mask_indices() {
        let c = grid.cell(i);
        let ring = vec![
            (c.lon - half_lon, c.lat - half_lat),
            (c.lon + half_lon, c.lat - half_lat),
            (c.lon + half_lon, c.lat + half_lat),
            (c.lon - half_lon, c.lat + half_lat),
            (c.lon - half_lon, c.lat - half_lat),
        ];
        let mut properties = serde_json::Map::new();
        properties.insert("index".into(), json!(i));
        properties.insert("p".into(), json!(plan.p[i]));
        for (h, values) in &plan.forecasts_by_horizon {
            properties.insert(format!("p_{h}"), json!(values[i]));
        }
        features.push(feature(
            json!({"type": "Polygon", "coordinates": [ring_coords(&ring)]}),
            Value::Object(properties),
        ));
    }
    Ok(collection(features))
}

/// One circle polygon per zone, windows flattened in record order.
pub fn zones_geojson(record: &ZonesRecord) -> Value {
    let mut features = Vec::new();
    for zones in record.zones.values() {
        for z in zones {
            let ring = circle_ring(z.center, z.radius_miles, 64);
            features.push(feature(
                json!({"type": "Polygon", "coordinates": [ring_coords(&ring)]}),
                json!({
                    "id": z.id,
                    "window": z.window,
                    "priority": z.priority,
                    "radius_miles": z.radius_miles,
                    "source": z.source,
                }),
            ));
        }
    }
    collection(features)
}

/// One circle polygon per containment ring, grouped by field key.
pub fn rings_geojson(ipp: LonLat, rings: &BTreeMap<String, Vec<RingOut>>) -> Value {
    let mut features = Vec::new();
    for (key, set) in rings {
        for r in set {
            let ring = circle_ring(ipp, r.radius_miles, 96);
            features.push(feature(
                json!({"type": "Polygon", "coordinates": [ring_coords(&ring)]}),
                json!({
                    "field": key,
                    "q": r.q,
                    "radius_miles": r.radius_miles,
                }),
            ));
        }
    }
    collection(features)
}

/// Write a GeoJSON value canonically with a final LF.
pub fn write_geojson(value: &Value, path: &Path) -> Result<()> {
    let mut text = to_canonical_string(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
