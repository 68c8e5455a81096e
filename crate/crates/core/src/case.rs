//! Structured case records: schema, validation, loading, and synthetic
//! generation with ground truth.
//!
//! The JSON schema (versioned via `schema_version`) is:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "case_id": "GRD-2025-001541",
//!   "ipp": {"lon": -76.54, "lat": 37.24},
//!   "last_seen_time": "2025-02-10T03:58:00-05:00",
//!   "reported_time": "2025-02-10T06:30:00-05:00",
//!   "age": 15,
//!   "movement_profile": "on-foot",
//!   "context": "free-text summary",
//!   "sightings": [{"lon": -76.5, "lat": 37.3, "time": "..."}],
//!   "ground_truth": [{"lon": -76.5, "lat": 37.3, "time": "..."}]
//! }
//! ```
//!
//! `reported_time` and `ground_truth` are optional. Timestamps are RFC 3339
//! with a zone offset; the instant is what matters for ordering while the
//! offset drives day/night logic.

use chrono::{DateTime, Duration, FixedOffset};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::forecast::HorizonSchedule;
use crate::geo::LonLat;
use crate::grid::{Grid, GridSpec};
use crate::transition::TransitionPair;

pub const CASE_SCHEMA_VERSION: u64 = 1;

/// How the subject is believed to be moving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MovementProfile {
    #[serde(rename = "on-foot")]
    OnFoot,
    #[serde(rename = "vehicle")]
    Vehicle,
    #[serde(rename = "unknown")]
    Unknown,
}

impl MovementProfile {
    /// Nominal travel speed used by the plausibility heuristic.
    pub fn speed_mph(self) -> f64 {
        match self {
            MovementProfile::OnFoot => 3.0,
            MovementProfile::Vehicle => 50.0,
            MovementProfile::Unknown => 20.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MovementProfile::OnFoot => "on-foot",
            MovementProfile::Vehicle => "vehicle",
            MovementProfile::Unknown => "unknown",
        }
    }
}

impl std::fmt::Display for MovementProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MovementProfile {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on-foot" | "on_foot" | "onfoot" => Ok(MovementProfile::OnFoot),
            "vehicle" => Ok(MovementProfile::Vehicle),
            "unknown" => Ok(MovementProfile::Unknown),
            other => Err(CoreError::InvalidParameter(format!(
                "unknown movement profile {other:?} (expected on-foot, vehicle, or unknown)"
            ))),
        }
    }
}

/// A timestamped position (sighting or ground-truth sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTimePoint {
    pub lon: f64,
    pub lat: f64,
    pub time: DateTime<FixedOffset>,
}

impl GeoTimePoint {
    pub fn position(&self) -> LonLat {
        LonLat::new(self.lon, self.lat)
    }
}

/// One missing-person case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub schema_version: u64,
    pub case_id: String,
    pub ipp: LonLat,
    pub last_seen_time: DateTime<FixedOffset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_time: Option<DateTime<FixedOffset>>,
    pub age: u32,
    pub movement_profile: MovementProfile,
    pub context: String,
    pub sightings: Vec<GeoTimePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<GeoTimePoint>>,
}

impl CaseRecord {
    /// Hours between last seen and first report (0 when unreported or
    /// reported instantly); feeds the seed-width scaling.
    pub fn reporting_delay_hours(&self) -> f64 {
        match self.reported_time {
            None => 0.0,
            Some(t) => {
                let secs = (t - self.last_seen_time).num_seconds();
                (secs.max(0) as f64) / 3600.0
            }
        }
    }

    /// Field-level semantic checks, all violations collected.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.schema_version != CASE_SCHEMA_VERSION {
            violations.push(format!(
                "schema_version: {} is not the supported version {CASE_SCHEMA_VERSION}",
                self.schema_version
            ));
        }
        if self.case_id.trim().is_empty() {
            violations.push("case_id: must be non-empty".into());
        }
        if !self.ipp.is_valid() {
            violations.push(format!(
                "ipp: ({}, {}) is not a valid lon/lat",
                self.ipp.lon, self.ipp.lat
            ));
        }
        if let Some(reported) = self.reported_time {
            if reported < self.last_seen_time {
                violations.push("reported_time: earlier than last_seen_time".into());
            }
        }
        for (i, s) in self.sightings.iter().enumerate() {
            if !s.position().is_valid() {
                violations.push(format!("sightings[{i}]: invalid lon/lat"));
            }
            if s.time < self.last_seen_time {
                violations.push(format!("sightings[{i}].time: before last_seen_time"));
            }
        }
        if let Some(truth) = &self.ground_truth {
            for (i, p) in truth.iter().enumerate() {
                if !p.position().is_valid() {
                    violations.push(format!("ground_truth[{i}]: invalid lon/lat"));
                }
                if p.time < self.last_seen_time {
                    violations.push(format!("ground_truth[{i}].time: before last_seen_time"));
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CoreError::SchemaViolation { violations })
        }
    }

    /// Check the case sits inside a grid's bounding box.
    pub fn validate_against_grid(&self, spec: &GridSpec) -> Result<()> {
        if spec.contains(self.ipp) {
            Ok(())
        } else {
            Err(CoreError::SchemaViolation {
                violations: vec![format!(
                    "ipp: ({}, {}) outside grid bounding box [{}, {}] x [{}, {}]",
                    self.ipp.lon,
                    self.ipp.lat,
                    spec.lon_min,
                    spec.lon_max,
                    spec.lat_min,
                    spec.lat_max
                )],
            })
        }
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        crate::canonical::to_canonical_string(&value)
    }
}

/// Parse and validate a case document, naming every failing field.
pub fn parse_case(text: &str) -> Result<CaseRecord> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let mut violations = Vec::new();
    structural_check(&value, &mut violations);
    if !violations.is_empty() {
        return Err(CoreError::SchemaViolation { violations });
    }
    let record: CaseRecord = serde_json::from_value(value)?;
    record.validate()?;
    Ok(record)
}

pub fn load_case(path: &std::path::Path) -> Result<CaseRecord> {
    std::fs::read_to_string(path)
        .map_err(CoreError::from)
        .and_then(|text| parse_case(&text))
        .map_err(|e| e.at_stage("case"))
}

pub fn save_case(record: &CaseRecord, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, record.to_canonical_json()? + "\n")?;
    Ok(())
}

/// Structural pass over the raw JSON so every missing or mistyped field is
/// reported at once (serde alone would stop at the first).
fn structural_check(v: &serde_json::Value, violations: &mut Vec<String>) {
    let Some(obj) = v.as_object() else {
        violations.push("document: not a JSON object".into());
        return;
    };
    let check_string = |name: &str, violations: &mut Vec<String>| match obj.get(name) {
        None => violations.push(format!("{name}: missing")),
        Some(x) if !x.is_string() => violations.push(format!("{name}: not a string")),
        _ => {}
    };
    check_string("case_id", violations);
    check_string("last_seen_time", violations);
    check_string("context", violations);
    match obj.get("ipp") {
        None => violations.push("ipp: missing".into()),
        Some(ipp) => {
            for key in ["lon", "lat"] {
                if ipp.get(key).and_then(|x| x.as_f64()).is_none() {
                    violations.push(format!("ipp.{key}: missing or not a number"));
                }
            }
        }
    }
    match obj.get("age") {
        None => violations.push("age: missing".into()),
        Some(x) if x.as_u64().is_none() => {
            violations.push("age: not a non-negative integer".into())
        }
        _ => {}
    }
    match obj.get("movement_profile").and_then(|x| x.as_str()) {
        None => violations.push("movement_profile: missing or not a string".into()),
        Some(s) if s.parse::<MovementProfile>().is_err() => violations.push(format!(
            "movement_profile: {s:?} is not one of on-foot, vehicle, unknown"
        )),
        _ => {}
    }
    match obj.get("sightings") {
        None => violations.push("sightings: missing".into()),
        Some(s) if !s.is_array() => violations.push("sightings: not an array".into()),
        Some(s) => {
            for (i, item) in s.as_array().unwrap().iter().enumerate() {
                for key in ["lon", "lat"] {
                    if item.get(key).and_then(|x| x.as_f64()).is_none() {
                        violations.push(format!("sightings[{i}].{key}: missing or not a number"));
                    }
                }
                if item.get("time").and_then(|x| x.as_str()).is_none() {
                    violations.push(format!("sightings[{i}].time: missing or not a string"));
                }
            }
        }
    }
    // Timestamps must parse as RFC 3339.
    for name in ["last_seen_time", "reported_time"] {
        if let Some(s) = obj.get(name).and_then(|x| x.as_str()) {
            if DateTime::parse_from_rfc3339(s).is_err() {
                violations.push(format!("{name}: not an RFC 3339 timestamp"));
            }
        }
    }
    if let Some(s) = obj.get("sightings").and_then(|x| x.as_array()) {
        for (i, item) in s.iter().enumerate() {
            if let Some(t) = item.get("time").and_then(|x| x.as_str()) {
                if DateTime::parse_from_rfc3339(t).is_err() {
                    violations.push(format!("sightings[{i}].time: not an RFC 3339 timestamp"));
                }
            }
        }
    }
}

/// Flatten a probability row with temperature tau: q proportional to
/// p^(1/tau). tau = 1 reproduces the row; tau -> infinity tends to uniform
/// over the row's support.
pub fn flatten_row(probs: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau.is_finite() && tau > 0.0) && !tau.is_infinite() {
        return Err(CoreError::InvalidParameter(format!(
            "temperature {tau} must be positive"
        )));
    }
    let flattened: Vec<f64> = if tau.is_infinite() {
        probs
            .iter()
            .map(|&p| if p > 0.0 { 1.0 } else { 0.0 })
            .collect()
    } else {
        probs.iter().map(|&p| p.powf(1.0 / tau)).collect()
    };
    let z: f64 = flattened.iter().sum();
    if z <= 0.0 || !z.is_finite() {
        return Err(CoreError::NonFiniteValue {
            context: "flattened row normalizer".into(),
        });
    }
    Ok(flattened.into_iter().map(|q| q / z).collect())
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let x: f64 = rng.random();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if x < cum {
            return i;
        }
    }
    probs.len() - 1
}

/// Tunables for the synthetic case generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    /// Flattening temperature for the truth walk.
    pub tau: f64,
    /// Probability that a trajectory point spawns a sighting.
    pub sighting_rate: f64,
    /// Per-component standard deviation of sighting jitter, miles.
    pub sighting_jitter_miles: f64,
    /// Trajectory length in steps of `step_hours`.
    pub n_steps: u32,
    pub step_hours: u32,
    pub day_start_hour: u32,
    pub day_end_hour: u32,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            tau: 1.5,
            sighting_rate: 0.15,
            sighting_jitter_miles: 1.0,
            n_steps: 24,
            step_hours: 3,
            day_start_hour: 6,
            day_end_hour: 18,
        }
    }
}

/// Generate a schema-conformant synthetic case with ground truth.
///
/// The IPP is uniform over in-mask cells; the truth trajectory walks the
/// day/night transition rows with temperature flattening (so the truth is
/// correlated with, but not identical to, the forecaster's dynamics);
/// sightings are Gaussian-jittered subsamples of the trajectory. Everything
/// is a pure function of (grid, matrices, seed, profile, params).
pub fn generate_case(
    grid: &Grid,
    pair: &TransitionPair,
    seed: u64,
    profile: MovementProfile,
    params: &GeneratorParams,
) -> Result<CaseRecord> {
    if !(params.sighting_rate.is_finite() && (0.0..=1.0).contains(&params.sighting_rate)) {
        return Err(CoreError::InvalidParameter(format!(
            "sighting_rate {} outside [0, 1]",
            params.sighting_rate
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_mask: Vec<usize> = grid.in_mask_indices().collect();
    if in_mask.is_empty() {
        return Err(CoreError::EmptyDomain);
    }
    let start_cell = in_mask[rng.random_range(0..in_mask.len())];
    let ipp = grid.cell(start_cell);

    // Local clock: a fixed winter date with a seeded time of day, UTC-5.
    let hour = rng.random_range(0..24u32);
    let minute = rng.random_range(0..60u32);
    let last_seen =
        DateTime::parse_from_rfc3339(&format!("2025-02-10T{hour:02}:{minute:02}:00-05:00"))
            .expect("constructed timestamp is valid");
    let schedule = HorizonSchedule {
        step_hours: params.step_hours,
        horizons: vec![params.n_steps * params.step_hours],
        last_seen_local: last_seen,
        day_start_hour: params.day_start_hour,
        day_end_hour: params.day_end_hour,
    };
    schedule.validate()?;

    let mut truth = Vec::with_capacity(params.n_steps as usize + 1);
    let mut cell = start_cell;
    truth.push(GeoTimePoint {
        lon: grid.cell(cell).lon,
        lat: grid.cell(cell).lat,
        time: last_seen,
    });
    for step in 0..params.n_steps {
        let matrix = if schedule.is_day_step(step) {
            &pair.day
        } else {
            &pair.night
        };
        let (cols, probs): (Vec<usize>, Vec<f64>) = matrix.row(cell).unzip();
        let q = flatten_row(&probs, params.tau)?;
        cell = cols[sample_index(&q, &mut rng)];
        truth.push(GeoTimePoint {
            lon: grid.cell(cell).lon,
            lat: grid.cell(cell).lat,
            time: last_seen + Duration::hours(((step + 1) * params.step_hours) as i64),
        });
    }

    let jitter = Normal::new(0.0, params.sighting_jitter_miles)
        .map_err(|e| CoreError::InvalidParameter(format!("sighting jitter: {e}")))?;
    let miles_per_deg_lat = crate::geo::EARTH_RADIUS_MILES * std::f64::consts::PI / 180.0;
    let mut sightings = Vec::new();
    for point in truth.iter().skip(1) {
        if rng.random::<f64>() < params.sighting_rate {
            let dx: f64 = jitter.sample(&mut rng);
            let dy: f64 = jitter.sample(&mut rng);
            let lat = point.lat + dy / miles_per_deg_lat;
            let lon = point.lon + dx / (miles_per_deg_lat * point.lat.to_radians().cos());
            sightings.push(GeoTimePoint {
                lon,
                lat,
                time: point.time,
            });
        }
    }

    let reported_delay_hours = rng.random_range(0..6u32);
    let age = rng.random_range(6..90u32);
    let record = CaseRecord {
        schema_version: CASE_SCHEMA_VERSION,
        case_id: format!("GRD-2025-{:06}", seed % 1_000_000),
        ipp,
        last_seen_time: last_seen,
        reported_time: Some(last_seen + Duration::hours(reported_delay_hours as i64)),
        age,
        movement_profile: profile,
        context: format!(
            "Synthetic case: {age}-year-old, {profile} profile; last seen near \
             ({:.3}, {:.3}) at {}.",
            ipp.lat,
            ipp.lon,
            last_seen.format("%H:%M")
        ),
        sightings,
        ground_truth: Some(truth),
    };
    record.validate()?;
    Ok(record)
}
