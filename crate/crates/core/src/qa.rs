//! Post-hoc plausibility review of selected zones.
//!
//! Each zone gets a bounded plausibility score in [0, 1] with a short
//! rationale, from either a deterministic reachability heuristic or a remote
//! JSON/HTTP scorer (with retry and heuristic fallback). Scores multiply
//! zone priorities; geometry, membership, and counts never change.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::case::MovementProfile;
use crate::error::{CoreError, Result};
use crate::geo::{haversine_miles, LonLat};
use crate::zones::ZonePlan;

/// Which engine produced a review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Heuristic,
    Remote,
}

/// Geometric facts about a zone, as shipped to scorers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneGeometry {
    pub center: LonLat,
    pub radius_miles: f64,
    pub distance_from_ipp_miles: f64,
}

/// Everything a scorer sees for one zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerRequest {
    pub case_summary: String,
    pub movement_profile: MovementProfile,
    pub window: String,
    pub window_end_hours: u32,
    pub zone: ZoneGeometry,
}

impl ScorerRequest {
    pub fn validate(&self) -> Result<()> {
        if self.window.is_empty() {
            return Err(CoreError::InvalidParameter("empty window label".into()));
        }
        if self.window_end_hours == 0 {
            return Err(CoreError::InvalidParameter(
                "window_end_hours must be positive".into(),
            ));
        }
        if !(self.zone.distance_from_ipp_miles >= 0.0
            && self.zone.distance_from_ipp_miles.is_finite())
        {
            return Err(CoreError::InvalidParameter(format!(
                "distance_from_ipp_miles {} must be non-negative",
                self.zone.distance_from_ipp_miles
            )));
        }
        Ok(())
    }
}

/// One zone's review. `new_priority = original_priority * plausibility`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityReview {
    pub zone_id: String,
    pub window: String,
    pub plausibility: f64,
    pub rationale: String,
    pub original_priority: f64,
    pub new_priority: f64,
    pub scorer: ScorerKind,
    /// The remote scorer failed twice and the heuristic answered instead.
    pub fallback: bool,
    /// The remote scorer returned a value outside [0, 1] that was clamped.
    pub clamped: bool,
}

/// Case-level QA summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaMetrics {
    pub n_zones: usize,
    pub mean_plausibility: f64,
    pub n_fallbacks: usize,
    pub n_rank_changes: usize,
}

/// Reachability heuristic: a zone is fully plausible while its center lies
/// within `profile speed x window end` miles of the initial planning point;
/// beyond that, plausibility decays as exp(-(d - reach) / reach) with a 0.05
/// floor so implausible zones are demoted, never deleted.
pub fn heuristic_score(req: &ScorerRequest) -> Result<(f64, String)> {
    req.validate()?;
    let speed = req.movement_profile.speed_mph();
    let reach = speed * req.window_end_hours as f64;
    let d = req.zone.distance_from_ipp_miles;
    if d <= reach {
        Ok((
            1.0,
            format!(
                "zone center {d:.1} mi from IPP is within the estimated {reach:.1} mi reach \
                 ({} at {speed:.0} mph over {} h)",
                req.movement_profile, req.window_end_hours
            ),
        ))
    } else {
        let p = ((-(d - reach) / reach).exp()).max(0.05);
        Ok((
            p,
            format!(
                "zone center {d:.1} mi from IPP exceeds the estimated {reach:.1} mi reach \
                 ({} at {speed:.0} mph over {} h)",
                req.movement_profile, req.window_end_hours
            ),
        ))
    }
}

#[derive(Debug, Deserialize)]
struct RemoteResponse {
    plausibility: f64,
    rationale: String,
}

/// Outcome of a single zone's scoring, whatever path produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutcome {
    pub plausibility: f64,
    pub rationale: String,
    pub scorer: ScorerKind,
    pub fallback: bool,
    pub clamped: bool,
}

/// POST the request to a remote scorer. The response must parse as
/// `{"plausibility": <number>, "rationale": <non-empty string>}`; transport
/// errors and malformed bodies get one retry, then the heuristic answers
/// with the fallback flag set. Out-of-range plausibility is clamped, not
/// rejected.
pub fn remote_score(
    req: &ScorerRequest,
    endpoint: &str,
    timeout: Duration,
) -> Result<ScoreOutcome> {
    req.validate()?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into();
    for _attempt in 0..2 {
        let Ok(mut resp) = agent.post(endpoint).send_json(req) else {
            continue;
        };
        let Ok(parsed) = resp.body_mut().read_json::<RemoteResponse>() else {
            continue;
        };
        if !parsed.plausibility.is_finite() || parsed.rationale.is_empty() {
            continue;
        }
        let clamped = !(0.0..=1.0).contains(&parsed.plausibility);
        return Ok(ScoreOutcome {
            plausibility: parsed.plausibility.clamp(0.0, 1.0),
            rationale: parsed.rationale,
            scorer: ScorerKind::Remote,
            fallback: false,
            clamped,
        });
    }
    let (p, rationale) = heuristic_score(req)?;
    Ok(ScoreOutcome {
        plausibility: p,
        rationale,
        scorer: ScorerKind::Heuristic,
        fallback: true,
        clamped: false,
    })
}

/// How reviews should be produced.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerConfig {
    Heuristic,
    Remote { endpoint: String, timeout: Duration },
}

/// Score every zone in the plan, in plan order.
pub fn review_zones(
    plan: &ZonePlan,
    ipp: LonLat,
    case_summary: &str,
    profile: MovementProfile,
    scorer: &ScorerConfig,
) -> Result<Vec<PlausibilityReview>> {
    let mut reviews = Vec::new();
    for w in &plan.windows {
        for z in &w.zones {
            let req = ScorerRequest {
                case_summary: case_summary.to_string(),
                movement_profile: profile,
                window: w.label.clone(),
                window_end_hours: w.end_hours,
                zone: ZoneGeometry {
                    center: z.center,
                    radius_miles: z.radius_miles,
                    distance_from_ipp_miles: haversine_miles(ipp, z.center),
                },
            };
            let outcome = match scorer {
                ScorerConfig::Heuristic => {
                    let (p, rationale) = heuristic_score(&req)?;
                    ScoreOutcome {
                        plausibility: p,
                        rationale,
                        scorer: ScorerKind::Heuristic,
                        fallback: false,
                        clamped: false,
                    }
                }
                ScorerConfig::Remote { endpoint, timeout } => {
                    remote_score(&req, endpoint, *timeout)?
                }
            };
            reviews.push(PlausibilityReview {
                zone_id: z.id.clone(),
                window: w.label.clone(),
                plausibility: outcome.plausibility,
                rationale: outcome.rationale,
                original_priority: z.priority,
                new_priority: z.priority * outcome.plausibility,
                scorer: outcome.scorer,
                fallback: outcome.fallback,
                clamped: outcome.clamped,
            });
        }
    }
    Ok(reviews)
}

/// Apply reviews: multiply priorities, re-rank each window by new priority
/// descending (ties keep the original rank), and summarize. Zone ids,
/// geometry, and membership are untouched.
pub fn apply_reviews(
    plan: &ZonePlan,
    reviews: &[PlausibilityReview],
) -> Result<(ZonePlan, QaMetrics)> {
    let mut out = plan.clone();
    let mut n_zones = 0usize;
    let mut plaus_sum = 0.0;
    let mut n_fallbacks = 0usize;
    let mut n_rank_changes = 0usize;
    for w in &mut out.windows {
        let original_order: Vec<String> = w.zones.iter().map(|z| z.id.clone()).collect();
        for z in &mut w.zones {
            let review = reviews.iter().find(|r| r.zone_id == z.id).ok_or_else(|| {
                CoreError::MissingReview {
                    zone_id: z.id.clone(),
                }
            })?;
            if !(0.0..=1.0).contains(&review.plausibility) {
                return Err(CoreError::InvalidParameter(format!(
                    "review for {} has plausibility {} outside [0, 1]",
                    z.id, review.plausibility
                )));
            }
            z.priority *= review.plausibility;
            n_zones += 1;
            plaus_sum += review.plausibility;
            if review.fallback {
                n_fallbacks += 1;
            }
        }
        // Stable sort: equal new priorities keep their original rank.
        w.zones
            .sort_by(|a, b| b.priority.partial_cmp(&a.priority).unwrap());
        for (i, z) in w.zones.iter().enumerate() {
            if original_order[i] != z.id {
                n_rank_changes += 1;
            }
        }
    }
    let metrics = QaMetrics {
        n_zones,
        mean_plausibility: if n_zones > 0 {
            plaus_sum / n_zones as f64
        } else {
            0.0
        },
        n_fallbacks,
        n_rank_changes,
    };
    Ok((out, metrics))
}
