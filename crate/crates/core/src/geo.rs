//! Geographic primitives: lon/lat points, great-circle distance, and
//! boundary polygons with point-in-polygon masking.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Mean Earth radius in miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.761;

/// A geographic point in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    pub fn is_valid(&self) -> bool {
        self.lon.is_finite() && self.lat.is_finite() && self.lat.abs() <= 90.0
    }
}

/// Haversine great-circle distance in miles.
///
/// Validates coordinates; use [`haversine_miles`] on inputs already known
/// to be valid (grid cell centers, validated case records).
pub fn great_circle_miles(a: LonLat, b: LonLat) -> Result<f64> {
    for p in [a, b] {
        if !p.is_valid() {
            return Err(CoreError::InvalidCoordinate {
                lon: p.lon,
                lat: p.lat,
            });
        }
    }
    Ok(haversine_miles(a, b))
}

/// Haversine distance without coordinate validation.
pub fn haversine_miles(a: LonLat, b: LonLat) -> f64 {
    let d_lat = (b.lat - a.lat).to_radians();
    let d_lon = (b.lon - a.lon).to_radians();
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let h = (d_lat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (d_lon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin()
}

/// A simple polygon, possibly multi-part. A point is inside when it falls
/// within an odd number of rings (even-odd rule), so holes and disjoint
/// parts are both expressible as extra rings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    rings: Vec<Vec<LonLat>>,
}

impl Polygon {
    pub fn new(rings: Vec<Vec<LonLat>>) -> Result<Self> {
        if rings.is_empty() {
            return Err(CoreError::InvalidParameter("polygon has no rings".into()));
        }
        let mut cleaned = Vec::with_capacity(rings.len());
        for mut ring in rings {
            // Drop an explicit closing vertex; the containment test closes implicitly.
            if ring.len() > 1 && ring.first() == ring.last() {
                ring.pop();
            }
            if ring.len() < 3 {
                return Err(CoreError::InvalidParameter(
                    "polygon ring has fewer than 3 vertices".into(),
                ));
            }
            for p in &ring {
                if !p.is_valid() {
                    return Err(CoreError::InvalidCoordinate {
                        lon: p.lon,
                        lat: p.lat,
                    });
                }
            }
            cleaned.push(ring);
        }
        Ok(Self { rings: cleaned })
    }

    /// Axis-aligned rectangle as a single-ring polygon.
    pub fn rect(lon_min: f64, lon_max: f64, lat_min: f64, lat_max: f64) -> Result<Self> {
        Self::new(vec![vec![
            LonLat::new(lon_min, lat_min),
            LonLat::new(lon_max, lat_min),
            LonLat::new(lon_max, lat_max),
            LonLat::new(lon_min, lat_max),
        ]])
    }

    pub fn rings(&self) -> &[Vec<LonLat>] {
        &self.rings
    }

    /// Even-odd containment over all rings.
    pub fn contains(&self, p: LonLat) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            if ring_contains(ring, p) {
                inside = !inside;
            }
        }
        inside
    }

    /// Parse a boundary from GeoJSON-style JSON: a Polygon or MultiPolygon
    /// geometry (optionally wrapped in a Feature or FeatureCollection), or a
    /// bare array of lon/lat rings.
    pub fn from_geojson_str(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        let mut rings = Vec::new();
        collect_rings(&value, &mut rings)?;
        if rings.is_empty() {
            return Err(CoreError::InvalidParameter(
                "no polygon rings found in boundary file".into(),
            ));
        }
        Self::new(rings)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_geojson_str(&s)
    }
}

fn ring_contains(ring: &[LonLat], p: LonLat) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[j], ring[i]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x_cross = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
            if p.lon < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn collect_rings(value: &serde_json::Value, out: &mut Vec<Vec<LonLat>>) -> Result<()> {
    use serde_json::Value;
    match value {
        Value::Object(obj) => match obj.get("type").and_then(Value::as_str) {
            Some("Polygon") => push_polygon_coords(obj.get("coordinates"), out),
            Some("MultiPolygon") => {
                let coords = obj
                    .get("coordinates")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad_geojson("MultiPolygon without coordinates"))?;
                for poly in coords {
                    push_polygon_coords(Some(poly), out)?;
                }
                Ok(())
            }
            Some("Feature") => collect_rings(
                obj.get("geometry")
                    .ok_or_else(|| bad_geojson("Feature without geometry"))?,
                out,
            ),
            Some("FeatureCollection") => {
                let features = obj
                    .get("features")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad_geojson("FeatureCollection without features"))?;
                for f in features {
                    collect_rings(f, out)?;
                }
                Ok(())
            }
            other => Err(bad_geojson(&format!("unsupported geometry type {other:?}"))),
        },
        // Bare array: list of rings.
        Value::Array(_) => push_polygon_coords(Some(value), out),
        _ => Err(bad_geojson("expected object or array")),
    }
}

fn push_polygon_coords(
    coords: Option<&serde_json::Value>,
    out: &mut Vec<Vec<LonLat>>,
) -> Result<()> {
    let rings = coords
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| bad_geojson("polygon coordinates must be an array of rings"))?;
    for ring in rings {
        let pts = ring
            .as_array()
            .ok_or_else(|| bad_geojson("ring must be an array of positions"))?;
        let mut parsed = Vec::with_capacity(pts.len());
        for pt in pts {
            let pair = pt
                .as_array()
                .filter(|a| a.len() >= 2)
                .ok_or_else(|| bad_geojson("position must be [lon, lat]"))?;
            let lon = pair[0]
                .as_f64()
                .ok_or_else(|| bad_geojson("non-numeric lon"))?;
            let lat = pair[1]
                .as_f64()
                .ok_or_else(|| bad_geojson("non-numeric lat"))?;
            parsed.push(LonLat::new(lon, lat));
        }
        out.push(parsed);
    }
    Ok(())
}

fn bad_geojson(msg: &str) -> CoreError {
    CoreError::InvalidParameter(format!("boundary file: {msg}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn distance_zero_iff_identical() {
        let a = LonLat::new(-76.5, 37.2);
        assert_eq!(great_circle_miles(a, a).unwrap(), 0.0);
        let b = LonLat::new(-76.5, 37.2001);
        assert!(great_circle_miles(a, b).unwrap() > 0.0);
    }

    #[test]
    fn one_degree_of_latitude() {
        // Hand calculation: R * pi / 180 = 3958.761 * 0.0174533 = 69.09.
        let d = great_circle_miles(LonLat::new(0.0, 0.0), LonLat::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(d, 69.09, epsilon = 0.05);
    }

    #[test]
    fn out_of_range_latitude_rejected() {
        let err = great_circle_miles(LonLat::new(0.0, 91.0), LonLat::new(0.0, 0.0));
        assert!(matches!(err, Err(CoreError::InvalidCoordinate { .. })));
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(
            lon1 in -180.0f64..180.0, lat1 in -89.0f64..89.0,
            lon2 in -180.0f64..180.0, lat2 in -89.0f64..89.0,
        ) {
            let a = LonLat::new(lon1, lat1);
            let b = LonLat::new(lon2, lat2);
            let d1 = great_circle_miles(a, b).unwrap();
            let d2 = great_circle_miles(b, a).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-9);
            prop_assert!(d1 >= 0.0);
        }
    }

    #[test]
    fn rect_polygon_contains() {
        let poly = Polygon::rect(0.0, 10.0, 0.0, 5.0).unwrap();
        assert!(poly.contains(LonLat::new(5.0, 2.5)));
        assert!(!poly.contains(LonLat::new(11.0, 2.5)));
        assert!(!poly.contains(LonLat::new(5.0, 6.0)));
    }

    #[test]
    fn multipart_even_odd() {
        // Outer ring with a hole: points in the hole are outside.
        let poly = Polygon::new(vec![
            vec![
                LonLat::new(0.0, 0.0),
                LonLat::new(10.0, 0.0),
                LonLat::new(10.0, 10.0),
                LonLat::new(0.0, 10.0),
            ],
            vec![
                LonLat::new(4.0, 4.0),
                LonLat::new(6.0, 4.0),
                LonLat::new(6.0, 6.0),
                LonLat::new(4.0, 6.0),
            ],
        ])
        .unwrap();
        assert!(poly.contains(LonLat::new(1.0, 1.0)));
        assert!(!poly.contains(LonLat::new(5.0, 5.0)));
    }

    #[test]
    fn geojson_polygon_and_feature_forms() {
        let raw = r#"{"type":"Polygon","coordinates":[[[0,0],[4,0],[4,4],[0,4],[0,0]]]}"#;
        let p = Polygon::from_geojson_str(raw).unwrap();
        assert!(p.contains(LonLat::new(2.0, 2.0)));

        let feature = format!(r#"{{"type":"Feature","properties":{{}},"geometry":{raw}}}"#);
        let p2 = Polygon::from_geojson_str(&feature).unwrap();
        assert_eq!(p.rings(), p2.rings());

        let bare = r#"[[[0,0],[4,0],[4,4],[0,4]]]"#;
        let p3 = Polygon::from_geojson_str(bare).unwrap();
        assert!(p3.contains(LonLat::new(2.0, 2.0)));
    }

    #[test]
    fn degenerate_ring_rejected() {
        let err = Polygon::new(vec![vec![LonLat::new(0.0, 0.0), LonLat::new(1.0, 1.0)]]);
        assert!(err.is_err());
    }
}
