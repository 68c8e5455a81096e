//! Operational evaluation against ground truth: Geo-hit@K, area searched
//! until hit (ASUH), and time-to-first-hit.
//!
//! Zones are ranked across windows by (priority desc, window start asc,
//! id asc); a zone "covers" the truth point when the great-circle distance
//! from its center is within its radius. ASUH accumulates disc areas in rank
//! order up to and including the first covering zone, subtracting pairwise
//! circle-circle intersection areas so overlap is not double-counted.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canonical::canonical_json;
use crate::error::{CoreError, Result};
use crate::geo::{haversine_miles, LonLat};
use crate::plan::{parse_window_label, ZoneSummary};

/// Per-case evaluation product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub case_id: String,
    pub truth: LonLat,
    pub geo_hit_at_k: BTreeMap<String, u8>,
    pub asuh_sq_miles: f64,
    pub asuh_hit: bool,
    pub time_to_first_hit_window: Option<String>,
    pub hotspot_concentration_by_horizon: BTreeMap<String, f64>,
}

/// Flatten windowed zones into one ranking: priority descending, then
/// window start ascending, then id ascending.
pub fn merge_ranked(
    zones_by_window: &BTreeMap<String, Vec<ZoneSummary>>,
) -> Result<Vec<ZoneSummary>> {
    let mut ranked: Vec<(u32, ZoneSummary)> = Vec::new();
    for (label, zones) in zones_by_window {
        let (start, _) = parse_window_label(label)?;
        for z in zones {
            if !z.priority.is_finite() {
                return Err(CoreError::NonFiniteValue {
                    context: format!("zone {} has non-finite priority", z.id),
                });
            }
            ranked.push((start, z.clone()));
        }
    }
    ranked.sort_by(|(sa, a), (sb, b)| {
        b.priority
            .partial_cmp(&a.priority)
            .expect("priorities checked finite")
            .then(sa.cmp(sb))
            .then(a.id.cmp(&b.id))
    });
    Ok(ranked.into_iter().map(|(_, z)| z).collect())
}

fn covers(zone: &ZoneSummary, truth: LonLat) -> bool {
    haversine_miles(zone.center, truth) <= zone.radius_miles
}

/// 1 iff one of the top-k ranked zones covers the truth point.
pub fn geo_hit_at_k(ranked: &[ZoneSummary], truth: LonLat, k: usize) -> Result<u8> {
    if k == 0 {
        return Err(CoreError::InvalidParameter("geo-hit k must be >= 1".into()));
    }
    Ok(u8::from(ranked.iter().take(k).any(|z| covers(z, truth))))
}

/// Area of the intersection of two discs with center distance `d`.
pub fn circle_intersection_area(d: f64, r1: f64, r2: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    let r_min = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return std::f64::consts::PI * r_min * r_min;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1))
        .clamp(-1.0, 1.0)
        .acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2))
        .clamp(-1.0, 1.0)
        .acos();
    let s = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * s.max(0.0).sqrt()
}

/// Area searched until the truth point is first covered.
///
/// Returns `(square_miles, hit)`. Without a hit, the area of the entire
/// ranked set is reported with `hit = false`. Overlap correction is
/// pairwise; the running total is floored at zero.
pub fn asuh(ranked: &[ZoneSummary], truth: LonLat) -> (f64, bool) {
    let mut searched: Vec<&ZoneSummary> = Vec::new();
    let mut area = 0.0;
    for z in ranked {
        area += std::f64::consts::PI * z.radius_miles * z.radius_miles;
        for prev in &searched {
            let d = haversine_miles(z.center, prev.center);
            area -= circle_intersection_area(d, z.radius_miles, prev.radius_miles);
        }
        searched.push(z);
        if covers(z, truth) {
            return (area.max(0.0), true);
        }
    }
    (area.max(0.0), false)
}

/// Window label of the first covering zone in rank order, if any.
pub fn time_to_first_hit(ranked: &[ZoneSummary], truth: LonLat) -> Option<String> {
    ranked
        .iter()
        .find(|z| covers(z, truth))
        .map(|z| z.window.clone())
}

/// Mean Geo-hit@K per K over a batch of per-case reports.
pub fn mean_hits(reports: &[EvalReport]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for report in reports {
        for (k, hit) in &report.geo_hit_at_k {
            let entry = sums.entry(k.clone()).or_insert((0.0, 0));
            entry.0 += f64::from(*hit);
            entry.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

/// Write the report canonically with a final LF.
pub fn write_eval_report(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = canonical_json(report)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::ARTIFACT_SCHEMA_VERSION;
    use crate::zones::CandidateSource;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn summary(
        id: &str,
        window: &str,
        lon: f64,
        lat: f64,
        radius: f64,
        priority: f64,
    ) -> ZoneSummary {
        ZoneSummary {
            id: id.into(),
            window: window.into(),
            center: LonLat::new(lon, lat),
            radius_miles: radius,
            priority,
            source: CandidateSource::Peak,
        }
    }

    fn grouped(zones: Vec<ZoneSummary>) -> BTreeMap<String, Vec<ZoneSummary>> {
        let mut map: BTreeMap<String, Vec<ZoneSummary>> = BTreeMap::new();
        for z in zones {
            map.entry(z.window.clone()).or_default().push(z);
        }
        map
    }

    #[test]
    fn truth_at_top_center_hits_for_all_k() {
        let ranked = merge_ranked(&grouped(vec![
            summary("0-24#1", "0-24", 0.0, 0.0, 5.0, 1.0),
            summary("0-24#2", "0-24", 1.0, 1.0, 5.0, 0.5),
        ]))
        .unwrap();
        let truth = LonLat::new(0.0, 0.0);
        for k in 1..=4 {
            assert_eq!(geo_hit_at_k(&ranked, truth, k).unwrap(), 1);
        }
    }

    #[test]
    fn unreachable_truth_never_hits() {
        let ranked = merge_ranked(&grouped(vec![
            summary("0-24#1", "0-24", 0.0, 0.0, 5.0, 1.0),
            summary("24-48#1", "24-48", 0.5, 0.5, 5.0, 0.8),
        ]))
        .unwrap();
        let truth = LonLat::new(10.0, 10.0);
        for k in 1..=4 {
            assert_eq!(geo_hit_at_k(&ranked, truth, k).unwrap(), 0);
        }
        let (_, hit) = asuh(&ranked, truth);
        assert!(!hit);
        assert!(time_to_first_hit(&ranked, truth).is_none());
    }

    #[test]
    fn only_rank_three_covers() {
        // Truth sits ~13.8 miles east of the origin; only the third-ranked
        // zone (centered there) covers it.
        let truth = LonLat::new(0.2, 0.0);
        let ranked = merge_ranked(&grouped(vec![
            summary("0-24#1", "0-24", 0.0, 0.0, 5.0, 1.0),
            summary("0-24#2", "0-24", 0.0, 0.1, 5.0, 0.8),
            summary("0-24#3", "0-24", 0.2, 0.0, 5.0, 0.6),
        ]))
        .unwrap();
        assert_eq!(geo_hit_at_k(&ranked, truth, 1).unwrap(), 0);
        assert_eq!(geo_hit_at_k(&ranked, truth, 2).unwrap(), 0);
        assert_eq!(geo_hit_at_k(&ranked, truth, 3).unwrap(), 1);
        assert_eq!(time_to_first_hit(&ranked, truth).as_deref(), Some("0-24"));
    }

    #[test]
    fn geo_hit_is_monotone_in_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let zones: Vec<ZoneSummary> = (0..8)
                .map(|i| {
                    summary(
                        &format!("0-24#{}", i + 1),
                        "0-24",
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                        rng.random_range(2.0..12.0),
                        rng.random_range(0.0..1.0),
                    )
                })
                .collect();
            let ranked = merge_ranked(&grouped(zones)).unwrap();
            let truth = LonLat::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let mut prev = 0;
            for k in 1..=ranked.len() {
                let hit = geo_hit_at_k(&ranked, truth, k).unwrap();
                assert!(hit >= prev, "geo-hit must not decrease in k");
                prev = hit;
            }
        }
    }

    #[test]
    fn merge_orders_by_priority_then_window_then_id() {
        let ranked = merge_ranked(&grouped(vec![
            summary("0-24#1", "0-24", 0.0, 0.0, 5.0, 0.7),
            summary("24-48#1", "24-48", 0.0, 1.0, 5.0, 0.9),
            summary("24-48#2", "24-48", 0.0, 2.0, 5.0, 0.7),
            summary("48-72#1", "48-72", 0.0, 3.0, 5.0, 0.7),
        ]))
        .unwrap();
        let ids: Vec<&str> = ranked.iter().map(|z| z.id.as_str()).collect();
        // 0.9 first; the three 0.7s go by window start (0 < 24 < 48).
        assert_eq!(ids, ["24-48#1", "0-24#1", "24-48#2", "48-72#1"]);
    }

    #[test]
    fn asuh_single_zone_is_pi_r_squared() {
        let ranked = vec![summary("0-24#1", "0-24", 0.0, 0.0, 5.0, 1.0)];
        let (area, hit) = asuh(&ranked, LonLat::new(0.0, 0.0));
        assert!(hit);
        assert_relative_eq!(area, 25.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn asuh_disjoint_zones_add() {
        // Centers ~69 miles apart: discs of radius 5 and 3 are disjoint.
        let ranked = vec![
            summary("0-24#1", "0-24", 0.0, 0.0, 5.0, 1.0),
            summary("0-24#2", "0-24", 1.0, 0.0, 3.0, 0.5),
        ];
        let truth = LonLat::new(1.0, 0.0);
        let (area, hit) = asuh(&ranked, truth);
        assert!(hit);
        assert_relative_eq!(area, 25.0 * PI + 9.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn asuh_grows_when_hit_comes_later() {
        let near = summary("0-24#1", "0-24", 0.0, 0.0, 5.0, 1.0);
        let far_a = summary("0-24#2", "0-24", 1.0, 0.0, 5.0, 0.8);
        let far_b = summary("0-24#3", "0-24", 2.0, 0.0, 5.0, 0.6);
        let truth = LonLat::new(0.0, 0.0);
        let (area_first, _) = asuh(std::slice::from_ref(&near), truth);
        let (area_third, _) = asuh(&[far_a, far_b, near], truth);
        assert!(area_third > area_first * 2.9);
    }

    #[test]
    fn lens_area_edge_cases() {
        assert_eq!(circle_intersection_area(10.0, 4.0, 5.0), 0.0);
        assert_eq!(circle_intersection_area(9.0, 4.0, 5.0), 0.0);
        assert_relative_eq!(
            circle_intersection_area(0.5, 2.0, 5.0),
            4.0 * PI,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            circle_intersection_area(4.0, 3.0, 5.0),
            circle_intersection_area(4.0, 5.0, 3.0),
            max_relative = 1e-12
        );
        // Coincident equal circles overlap fully.
        assert_relative_eq!(
            circle_intersection_area(0.0, 5.0, 5.0),
            25.0 * PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn overlapping_union_matches_monte_carlo() {
        // Two equal circles of radius 5 whose centers sit 5 miles apart;
        // hit happens at rank 2, so ASUH is the union area.
        let r = 5.0;
        let c1 = LonLat::new(0.0, 0.0);
        let dlon = 5.0 / (2.0 * PI * crate::geo::EARTH_RADIUS_MILES / 360.0);
        let c2 = LonLat::new(dlon, 0.0);
        let d = haversine_miles(c1, c2);
        let ranked = vec![
            summary("0-24#1", "0-24", c1.lon, c1.lat, r, 1.0),
            summary("0-24#2", "0-24", c2.lon, c2.lat, r, 0.5),
        ];
        // Truth near circle 2's far edge: covered by zone 2 only.
        let truth = LonLat::new(c2.lon + dlon * 0.8, 0.0);
        assert!(!covers(&ranked[0], truth));
        assert!(covers(&ranked[1], truth));
        let (area, hit) = asuh(&ranked, truth);
        assert!(hit);

        // Monte-Carlo union estimate in a local planar frame: circle 1 at
        // (0,0), circle 2 at (d,0).
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (x_min, x_max) = (-r, d + r);
        let (y_min, y_max) = (-r, r);
        let box_area = (x_max - x_min) * (y_max - y_min);
        let n = 2_000_000usize;
        let mut inside = 0usize;
        for _ in 0..n {
            let x = rng.random_range(x_min..x_max);
            let y = rng.random_range(y_min..y_max);
            let in1 = x * x + y * y <= r * r;
            let in2 = (x - d) * (x - d) + y * y <= r * r;
            if in1 || in2 {
                inside += 1;
            }
        }
        let mc = box_area * inside as f64 / n as f64;
        assert!(
            (area - mc).abs() / mc < 0.01,
            "analytic {area} vs monte-carlo {mc}"
        );
    }

    #[test]
    fn mean_hits_averages_per_k() {
        let mk = |h1: u8, h3: u8| EvalReport {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            case_id: "c".into(),
            truth: LonLat::new(0.0, 0.0),
            geo_hit_at_k: BTreeMap::from([("1".to_string(), h1), ("3".to_string(), h3)]),
            asuh_sq_miles: 1.0,
            asuh_hit: true,
            time_to_first_hit_window: None,
            hotspot_concentration_by_horizon: BTreeMap::new(),
        };
        let means = mean_hits(&[mk(1, 1), mk(0, 1)]);
        assert_eq!(means["1"], 0.5);
        assert_eq!(means["3"], 1.0);
    }

    #[test]
    fn report_round_trips_canonically() {
        let report = EvalReport {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            case_id: "GRD-2025-000009".into(),
            truth: LonLat::new(-76.5, 37.2),
            geo_hit_at_k: BTreeMap::from([("1".to_string(), 0), ("5".to_string(), 1)]),
            asuh_sq_miles: 512.25,
            asuh_hit: true,
            time_to_first_hit_window: Some("24-48".into()),
            hotspot_concentration_by_horizon: BTreeMap::from([
                ("24".to_string(), 0.61),
                ("72".to_string(), 0.43),
            ]),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval_report.json");
        write_eval_report(&report, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        write_eval_report(&back, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn zero_k_is_rejected() {
        assert!(geo_hit_at_k(&[], LonLat::new(0.0, 0.0), 0).is_err());
    }
}
