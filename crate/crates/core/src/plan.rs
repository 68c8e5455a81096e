//! Machine-readable planning artifacts and their canonical serialization.
//!
//! Three products leave the engine: `search_plan.json` (the belief surface
//! with its operational summaries), `zones.jsonl` (ranked search zones per
//! case, one record per line), and `zones_review.jsonl` (one plausibility
//! review per zone per line). All are versioned and written through the
//! canonical JSON writer so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::Hotspot;
use crate::canonical::canonical_json;
use crate::case::MovementProfile;
use crate::error::{CoreError, Result};
use crate::geo::LonLat;
use crate::products::{ContainmentRing, SectorMass};
use crate::qa::{PlausibilityReview, QaMetrics, ScorerKind};
use crate::zones::{SearchZone, WindowPlan, ZonePlan, ZoneScore};

/// Version stamped on every emitted artifact.
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

/// A containment quantile as serialized in the plan: `(q, radius_miles)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingOut {
    pub q: f64,
    pub radius_miles: f64,
}

impl From<&ContainmentRing> for RingOut {
    fn from(r: &ContainmentRing) -> Self {
        RingOut {
            q: r.quantile,
            radius_miles: r.radius_miles,
        }
    }
}

/// Sector masses ranked on the cumulative field, with per-horizon breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorsRanked {
    pub cumulative: Vec<SectorMass>,
    pub by_horizon: BTreeMap<String, Vec<SectorMass>>,
}

/// The primary planning product: the belief surface plus its summaries.
///
/// `p[i]`, and each vector under `forecasts_by_horizon`, is the probability
/// assigned to the location `grid_xy[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPlan {
    pub schema_version: u32,
    pub case_id: String,
    pub ipp: LonLat,
    pub grid_xy: Vec<(f64, f64)>,
    pub p: Vec<f64>,
    pub forecasts_by_horizon: BTreeMap<String, Vec<f64>>,
    pub sectors_ranked: SectorsRanked,
    pub rings: BTreeMap<String, Vec<RingOut>>,
    pub hotspots: Vec<Hotspot>,
}

impl SearchPlan {
    /// Check the structural invariants: version, id, index alignment.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != ARTIFACT_SCHEMA_VERSION {
            return Err(CoreError::InvalidParameter(format!(
                "unsupported plan schema_version {}",
                self.schema_version
            )));
        }
        if self.case_id.is_empty() {
            return Err(CoreError::InvalidParameter(
                "plan case_id must be non-empty".into(),
            ));
        }
        if self.p.len() != self.grid_xy.len() {
            return Err(CoreError::LengthMismatch {
                expected: self.grid_xy.len(),
                actual: self.p.len(),
            });
        }
        for (h, values) in &self.forecasts_by_horizon {
            if values.len() != self.grid_xy.len() {
                return Err(CoreError::LengthMismatch {
                    expected: self.grid_xy.len(),
                    actual: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(CoreError::NonFiniteValue {
                    context: format!("plan horizon {h} holds a negative or non-finite value"),
                });
            }
        }
        if self.p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::NonFiniteValue {
                context: "plan field p holds a negative or non-finite value".into(),
            });
        }
        Ok(())
    }

    /// Canonical single-document rendering (no trailing newline).
    pub fn to_canonical_string(&self) -> Result<String> {
        self.validate()?;
        canonical_json(self)
    }
}

/// Write the plan canonically with a final LF.
pub fn write_plan(plan: &SearchPlan, path: &Path) -> Result<()> {
    let mut text = plan.to_canonical_string()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Read a plan back and re-check its invariants.
pub fn read_plan(path: &Path) -> Result<SearchPlan> {
    let text = fs::read_to_string(path)?;
    let plan: SearchPlan = serde_json::from_str(&text)?;
    plan.validate()?;
    Ok(plan)
}

/// A zone as serialized in `zones.jsonl`: geometry and rank, no cell lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSummary {
    pub id: String,
    pub window: String,
    pub center: LonLat,
    pub radius_miles: f64,
    pub priority: f64,
    pub source: crate::zones::CandidateSource,
}

impl From<&SearchZone> for ZoneSummary {
    fn from(z: &SearchZone) -> Self {
        ZoneSummary {
            id: z.id.clone(),
            window: z.window.clone(),
            center: z.center,
            radius_miles: z.radius_miles,
            priority: z.priority,
            source: z.source,
        }
    }
}

/// One `zones.jsonl` record: a case's zones grouped by window, with the
/// reward decomposition of each zone under `zone_scores`, plus the minimal
/// case echo (`ipp`, profile, context) that makes stand-alone review runs
/// possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonesRecord {
    pub schema_version: u32,
    pub case_id: String,
    pub ipp: LonLat,
    pub movement_profile: MovementProfile,
    pub context: String,
    pub zones: BTreeMap<String, Vec<ZoneSummary>>,
    pub zone_scores: BTreeMap<String, ZoneScore>,
}

impl ZonesRecord {
    /// Project a planned zone set into its serialized record.
    pub fn from_plan(
        case_id: &str,
        ipp: LonLat,
        movement_profile: MovementProfile,
        context: &str,
        plan: &ZonePlan,
    ) -> Self {
        let mut zones = BTreeMap::new();
        let mut zone_scores = BTreeMap::new();
        for w in &plan.windows {
            let summaries: Vec<ZoneSummary> = w.zones.iter().map(ZoneSummary::from).collect();
            for z in &w.zones {
                zone_scores.insert(z.id.clone(), z.score);
            }
            zones.insert(w.label.clone(), summaries);
        }
        ZonesRecord {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            case_id: case_id.to_string(),
            ipp,
            movement_profile,
            context: context.to_string(),
            zones,
            zone_scores,
        }
    }

    /// Rebuild an in-memory `ZonePlan` from a record, for stand-alone review
    /// of a previously written `zones.jsonl`. Window weights are not part of
    /// the record (reviews never read them) and come back as zero; cell
    /// lists likewise stay empty.
    pub fn to_zone_plan(&self) -> Result<ZonePlan> {
        let mut windows = Vec::new();
        for (label, zones) in &self.zones {
            let (start_hours, end_hours) = parse_window_label(label)?;
            let zones = zones
                .iter()
                .map(|z| SearchZone {
                    id: z.id.clone(),
                    window: z.window.clone(),
                    center: z.center,
                    radius_miles: z.radius_miles,
                    cells: Vec::new(),
                    priority: z.priority,
                    score: self.zone_scores.get(&z.id).copied().unwrap_or(ZoneScore {
                        marginal_mass: 0.0,
                        area_penalty: 0.0,
                        overlap_penalty: 0.0,
                        plausibility_bonus: 0.0,
                        reward: 0.0,
                    }),
                    source: z.source,
                })
                .collect();
            windows.push(WindowPlan {
                label: label.clone(),
                start_hours,
                end_hours,
                weight: 0.0,
                zones,
                warnings: Vec::new(),
            });
        }
        Ok(ZonePlan { windows })
    }

    /// Replace the zone ordering and priorities with a reviewed plan's.
    pub fn with_reordered(&self, reviewed: &ZonePlan) -> Self {
        let mut out = self.clone();
        out.zones.clear();
        for w in &reviewed.windows {
            out.zones.insert(
                w.label.clone(),
                w.zones.iter().map(ZoneSummary::from).collect(),
            );
        }
        out
    }
}

/// Parse a window label of the form `"0-24"` into its hour bounds.
pub fn parse_window_label(label: &str) -> Result<(u32, u32)> {
    let parse = |label: &str| -> Option<(u32, u32)> {
        let (a, b) = label.split_once('-')?;
        let start = a.trim().parse().ok()?;
        let end = b.trim().parse().ok()?;
        (start < end).then_some((start, end))
    };
    parse(label).ok_or_else(|| {
        CoreError::InvalidParameter(format!(
            "window label {label:?} is not of the form \"<start>-<end>\""
        ))
    })
}

/// Write one record per line, canonically.
pub fn write_zones_jsonl(records: &[ZonesRecord], path: &Path) -> Result<()> {
    let mut text = String::new();
    for record in records {
        text.push_str(&canonical_json(record)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Read every record of a `zones.jsonl` file.
pub fn read_zones_jsonl(path: &Path) -> Result<Vec<ZonesRecord>> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ZonesRecord = serde_json::from_str(line)?;
        if record.schema_version != ARTIFACT_SCHEMA_VERSION {
            return Err(CoreError::InvalidParameter(format!(
                "unsupported zones record schema_version {}",
                record.schema_version
            )));
        }
        records.push(record);
    }
    Ok(records)
}

/// One `zones_review.jsonl` line: the review projection for a single zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewLine {
    pub schema_version: u32,
    pub case_id: String,
    pub zone_id: String,
    pub plausibility: f64,
    pub rationale: String,
    pub original_priority: f64,
    pub new_priority: f64,
    pub scorer: ScorerKind,
}

impl ReviewLine {
    pub fn from_review(case_id: &str, r: &PlausibilityReview) -> Self {
        ReviewLine {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            case_id: case_id.to_string(),
            zone_id: r.zone_id.clone(),
            plausibility: r.plausibility,
            rationale: r.rationale.clone(),
            original_priority: r.original_priority,
            new_priority: r.new_priority,
            scorer: r.scorer,
        }
    }
}

/// Write one review per line, canonically, in review order.
pub fn write_reviews_jsonl(
    case_id: &str,
    reviews: &[PlausibilityReview],
    path: &Path,
) -> Result<()> {
    let mut text = String::new();
    for r in reviews {
        text.push_str(&canonical_json(&ReviewLine::from_review(case_id, r))?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Case-level QA summary as written to `zone_qa_metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaMetricsOut {
    pub schema_version: u32,
    pub case_id: String,
    #[serde(flatten)]
    pub metrics: QaMetrics,
}

/// Write the per-case QA summary.
pub fn write_qa_metrics(case_id: &str, metrics: &QaMetrics, path: &Path) -> Result<()> {
    let out = QaMetricsOut {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        case_id: case_id.to_string(),
        metrics: metrics.clone(),
    };
    let mut text = canonical_json(&out)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
