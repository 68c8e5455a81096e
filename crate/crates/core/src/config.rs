//! Engine configuration: one TOML document holding every tunable default.
//!
//! Every section and field carries a default, so a partial (or empty) file
//! is valid; unknown keys are rejected to catch typos. Path-valued fields
//! are stored as written and resolved against the config file's directory
//! by the caller.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::case::MovementProfile;
use crate::error::{CoreError, Result};
use crate::forecast::HorizonSchedule;
use crate::geo::Polygon;
use crate::grid::GridSpec;
use crate::products::Sector;
use crate::transition::TransitionParams;
use crate::zones::ZoneParams;

/// Grid layout plus neighbor count and optional boundary source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    pub k_neighbors: usize,
    /// GeoJSON polygon file; absent means the whole box is in-mask.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_file: Option<String>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            lon_min: -83.7,
            lon_max: -75.2,
            lat_min: 36.5,
            lat_max: 39.5,
            n_cols: 96,
            n_rows: 66,
            k_neighbors: 8,
            boundary_file: None,
        }
    }
}

/// Feature-layer source: a CSV file, or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayersConfig {
    /// CSV with columns cell_index,road_cost,seclusion,corridor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers_file: Option<String>,
    /// Seed for the synthetic layer generator when no file is given.
    pub synth_seed: u64,
    /// Optional corridor polyline (lon, lat pairs) for the generator.
    pub corridor_polyline: Vec<(f64, f64)>,
    /// Corridor decay scale in miles for the generator.
    pub corridor_scale_miles: f64,
}

impl Default for LayersConfig {
    fn default() -> Self {
        LayersConfig {
            layers_file: None,
            synth_seed: 7,
            corridor_polyline: Vec::new(),
            corridor_scale_miles: 8.0,
        }
    }
}

/// One day-or-night parameterization of the energy weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaConfig {
    pub beta_d: f64,
    pub beta_r: f64,
    pub beta_s: f64,
    pub beta_c: f64,
}

impl Default for BetaConfig {
    fn default() -> Self {
        // Daytime: travel is easier, corridors attract, seclusion matters little.
        BetaConfig {
            beta_d: 0.6,
            beta_r: 0.8,
            beta_s: 0.2,
            beta_c: 0.6,
        }
    }
}

/// Transition construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionConfig {
    pub self_loop: f64,
    pub day: BetaConfig,
    pub night: BetaConfig,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            self_loop: 0.2,
            day: BetaConfig::default(),
            // Night: reduced travel (stronger distance penalty) and
            // increased concealment (stronger seclusion pull).
            night: BetaConfig {
                beta_d: 1.0,
                beta_r: 0.8,
                beta_s: 0.9,
                beta_c: 0.3,
            },
        }
    }
}

/// Gaussian-seed widths per movement profile, plus reporting-delay scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    pub sigma_on_foot_miles: f64,
    pub sigma_vehicle_miles: f64,
    pub sigma_unknown_miles: f64,
    pub sigma_per_delay_hour_miles: f64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            sigma_on_foot_miles: 3.0,
            sigma_vehicle_miles: 15.0,
            sigma_unknown_miles: 8.0,
            sigma_per_delay_hour_miles: 0.5,
        }
    }
}

/// Hotspot prior: mixture weight, KDE bandwidth, clustering, data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub alpha: f64,
    pub bandwidth_miles: f64,
    pub dbscan_eps_miles: f64,
    pub dbscan_min_pts: usize,
    /// CSV with columns lon,lat; absent means no hotspot prior.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incidents_file: Option<String>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            alpha: 0.25,
            bandwidth_miles: 10.0,
            dbscan_eps_miles: 15.0,
            dbscan_min_pts: 3,
            incidents_file: None,
        }
    }
}

/// Horizon schedule, cumulative blend, and half-life table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastConfig {
    pub step_hours: u32,
    pub horizons: Vec<u32>,
    pub day_start_hour: u32,
    pub day_end_hour: u32,
    /// Per-horizon blend weights, parallel to `horizons`.
    pub gamma: Vec<f64>,
    pub half_life_on_foot_hours: f64,
    pub half_life_vehicle_hours: f64,
    pub half_life_unknown_hours: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            step_hours: 3,
            horizons: vec![24, 48, 72],
            day_start_hour: 6,
            day_end_hour: 18,
            gamma: vec![1.0, 0.7, 0.5],
            half_life_on_foot_hours: 36.0,
            half_life_vehicle_hours: 18.0,
            half_life_unknown_hours: 24.0,
        }
    }
}

/// Containment quantiles and hotspot-concentration cell count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProductsConfig {
    pub quantiles: Vec<f64>,
    pub top_k_cells: usize,
}

impl Default for ProductsConfig {
    fn default() -> Self {
        ProductsConfig {
            quantiles: vec![0.5, 0.75, 0.9],
            top_k_cells: 50,
        }
    }
}

/// A named axis-aligned sector rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorRect {
    pub name: String,
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

/// Zone-selection knobs, mirroring `ZoneParams` plus window weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZonesConfig {
    pub budget_per_window: usize,
    pub r_max_miles: f64,
    pub peak_radius_miles: f64,
    pub hotspot_radius_miles: f64,
    pub top_m_peaks: usize,
    pub lambda_area: f64,
    pub lambda_overlap: f64,
    pub lambda_plaus: f64,
    pub refine: bool,
    /// Per-window weights, parallel to the windows derived from horizons.
    pub window_weights: Vec<f64>,
}

impl Default for ZonesConfig {
    fn default() -> Self {
        let zp = ZoneParams::default();
        ZonesConfig {
            budget_per_window: zp.budget_per_window,
            r_max_miles: zp.r_max_miles,
            peak_radius_miles: zp.peak_radius_miles,
            hotspot_radius_miles: zp.hotspot_radius_miles,
            top_m_peaks: zp.top_m_peaks,
            lambda_area: zp.lambda_area,
            lambda_overlap: zp.lambda_overlap,
            lambda_plaus: zp.lambda_plaus,
            refine: zp.refine,
            window_weights: vec![1.0, 0.7, 0.5],
        }
    }
}

/// Plausibility review settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QaConfig {
    pub enabled: bool,
    /// Remote scorer endpoint; absent means the heuristic scorer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            enabled: true,
            endpoint: None,
            timeout_ms: 5000,
        }
    }
}

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub geo_hit_ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            geo_hit_ks: vec![1, 3, 5],
        }
    }
}

/// The full engine configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub grid: GridConfig,
    pub layers: LayersConfig,
    pub transition: TransitionConfig,
    pub seed: SeedConfig,
    pub prior: PriorConfig,
    pub forecast: ForecastConfig,
    pub products: ProductsConfig,
    pub sectors: Vec<SectorRect>,
    pub zones: ZonesConfig,
    pub qa: QaConfig,
    pub eval: EvalConfig,
}

impl EngineConfig {
    /// Parse and validate a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: EngineConfig =
            toml::from_str(text).map_err(|e| CoreError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Load and validate a TOML file.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Cross-field validation; per-module validation happens again when the
    /// derived domain structs are built.
    pub fn validate(&self) -> Result<()> {
        self.grid_spec().validate()?;
        if self.grid.k_neighbors == 0 {
            return Err(CoreError::Config("grid.k_neighbors must be >= 1".into()));
        }
        self.day_params().validate()?;
        self.night_params().validate()?;
        for (name, sigma) in [
            ("sigma_on_foot_miles", self.seed.sigma_on_foot_miles),
            ("sigma_vehicle_miles", self.seed.sigma_vehicle_miles),
            ("sigma_unknown_miles", self.seed.sigma_unknown_miles),
        ] {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(CoreError::Config(format!("seed.{name} must be positive")));
            }
        }
        if !(self.seed.sigma_per_delay_hour_miles.is_finite()
            && self.seed.sigma_per_delay_hour_miles >= 0.0)
        {
            return Err(CoreError::Config(
                "seed.sigma_per_delay_hour_miles must be >= 0".into(),
            ));
        }
        if !(self.prior.alpha.is_finite() && (0.0..=1.0).contains(&self.prior.alpha)) {
            return Err(CoreError::Config("prior.alpha must lie in [0, 1]".into()));
        }
        if !(self.prior.bandwidth_miles.is_finite() && self.prior.bandwidth_miles > 0.0) {
            return Err(CoreError::Config(
                "prior.bandwidth_miles must be positive".into(),
            ));
        }
        if !(self.prior.dbscan_eps_miles.is_finite() && self.prior.dbscan_eps_miles > 0.0) {
            return Err(CoreError::Config(
                "prior.dbscan_eps_miles must be positive".into(),
            ));
        }
        if self.prior.dbscan_min_pts == 0 {
            return Err(CoreError::Config(
                "prior.dbscan_min_pts must be >= 1".into(),
            ));
        }
        if !(self.forecast.day_start_hour < self.forecast.day_end_hour
            && self.forecast.day_end_hour <= 24)
        {
            return Err(CoreError::Config(format!(
                "forecast day window [{}, {}) is not a valid hour range",
                self.forecast.day_start_hour, self.forecast.day_end_hour
            )));
        }
        if self.forecast.gamma.len() != self.forecast.horizons.len() {
            return Err(CoreError::Config(format!(
                "forecast.gamma has {} entries for {} horizons",
                self.forecast.gamma.len(),
                self.forecast.horizons.len()
            )));
        }
        for (name, h) in [
            (
                "half_life_on_foot_hours",
                self.forecast.half_life_on_foot_hours,
            ),
            (
                "half_life_vehicle_hours",
                self.forecast.half_life_vehicle_hours,
            ),
            (
                "half_life_unknown_hours",
                self.forecast.half_life_unknown_hours,
            ),
        ] {
            if h.is_nan() || h <= 0.0 {
                return Err(CoreError::Config(format!(
                    "forecast.{name} must be positive"
                )));
            }
        }
        if self.products.quantiles.is_empty()
            || self
                .products
                .quantiles
                .iter()
                .any(|q| !(q.is_finite() && *q > 0.0 && *q <= 1.0))
        {
            return Err(CoreError::Config(
                "products.quantiles must be non-empty fractions in (0, 1]".into(),
            ));
        }
        if self.products.top_k_cells == 0 {
            return Err(CoreError::Config(
                "products.top_k_cells must be >= 1".into(),
            ));
        }
        for s in &self.sectors {
            if s.name.is_empty() {
                return Err(CoreError::Config("sector names must be non-empty".into()));
            }
            if !(s.lon_min < s.lon_max && s.lat_min < s.lat_max) {
                return Err(CoreError::Config(format!(
                    "sector {} has a degenerate rectangle",
                    s.name
                )));
            }
        }
        self.zone_params().validate()?;
        if self.zones.window_weights.len() != self.forecast.horizons.len() {
            return Err(CoreError::Config(format!(
                "zones.window_weights has {} entries for {} windows",
                self.zones.window_weights.len(),
                self.forecast.horizons.len()
            )));
        }
        if self
            .zones
            .window_weights
            .iter()
            .any(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(CoreError::Config(
                "zones.window_weights must be positive".into(),
            ));
        }
        if self.qa.timeout_ms == 0 {
            return Err(CoreError::Config("qa.timeout_ms must be >= 1".into()));
        }
        if self.eval.geo_hit_ks.is_empty() || self.eval.geo_hit_ks.contains(&0) {
            return Err(CoreError::Config(
                "eval.geo_hit_ks must be non-empty positive integers".into(),
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            lon_min: self.grid.lon_min,
            lon_max: self.grid.lon_max,
            lat_min: self.grid.lat_min,
            lat_max: self.grid.lat_max,
            n_cols: self.grid.n_cols,
            n_rows: self.grid.n_rows,
        }
    }

    pub fn day_params(&self) -> TransitionParams {
        beta_to_params(self.transition.day, self.transition.self_loop)
    }

    pub fn night_params(&self) -> TransitionParams {
        beta_to_params(self.transition.night, self.transition.self_loop)
    }

    /// Base Gaussian-seed width for a profile, before delay scaling.
    pub fn sigma_base_miles(&self, profile: MovementProfile) -> f64 {
        match profile {
            MovementProfile::OnFoot => self.seed.sigma_on_foot_miles,
            MovementProfile::Vehicle => self.seed.sigma_vehicle_miles,
            MovementProfile::Unknown => self.seed.sigma_unknown_miles,
        }
    }

    /// Seed width including the reporting-delay widening.
    pub fn sigma_miles(&self, profile: MovementProfile, delay_hours: f64) -> f64 {
        self.sigma_base_miles(profile) + self.seed.sigma_per_delay_hour_miles * delay_hours
    }

    pub fn half_life_hours(&self, profile: MovementProfile) -> f64 {
        match profile {
            MovementProfile::OnFoot => self.forecast.half_life_on_foot_hours,
            MovementProfile::Vehicle => self.forecast.half_life_vehicle_hours,
            MovementProfile::Unknown => self.forecast.half_life_unknown_hours,
        }
    }

    pub fn schedule(
        &self,
        last_seen_local: chrono::DateTime<chrono::FixedOffset>,
    ) -> Result<HorizonSchedule> {
        let schedule = HorizonSchedule {
            step_hours: self.forecast.step_hours,
            horizons: self.forecast.horizons.clone(),
            last_seen_local,
            day_start_hour: self.forecast.day_start_hour,
            day_end_hour: self.forecast.day_end_hour,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn zone_params(&self) -> ZoneParams {
        ZoneParams {
            budget_per_window: self.zones.budget_per_window,
            r_max_miles: self.zones.r_max_miles,
            peak_radius_miles: self.zones.peak_radius_miles,
            hotspot_radius_miles: self.zones.hotspot_radius_miles,
            top_m_peaks: self.zones.top_m_peaks,
            lambda_area: self.zones.lambda_area,
            lambda_overlap: self.zones.lambda_overlap,
            lambda_plaus: self.zones.lambda_plaus,
            refine: self.zones.refine,
        }
    }

    /// Named sectors as polygons, in declaration order.
    pub fn sector_polygons(&self) -> Result<Vec<Sector>> {
        self.sectors
            .iter()
            .map(|s| {
                Ok(Sector {
                    name: s.name.clone(),
                    polygon: Polygon::rect(s.lon_min, s.lon_max, s.lat_min, s.lat_max)?,
                })
            })
            .collect()
    }
}

fn beta_to_params(beta: BetaConfig, self_loop: f64) -> TransitionParams {
    TransitionParams {
        beta_d: beta.beta_d,
        beta_r: beta.beta_r,
        beta_s: beta.beta_s,
        beta_c: beta.beta_c,
        self_loop,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::LonLat;

    #[test]
    fn defaults_validate() {
        let config = EngineConfig::default();
        config.validate().unwrap();
        assert_eq!(config.grid.k_neighbors, 8);
        assert_eq!(config.transition.self_loop, 0.2);
        assert!(config.transition.night.beta_s > config.transition.day.beta_s);
        assert!(config.transition.night.beta_d > config.transition.day.beta_d);
        assert_eq!(config.forecast.horizons, [24, 48, 72]);
        assert_eq!(config.products.quantiles, [0.5, 0.75, 0.9]);
        assert_eq!(config.products.top_k_cells, 50);
    }

    #[test]
    fn toml_round_trip_preserves_everything() {
        let mut config = EngineConfig::default();
        config.sectors.push(SectorRect {
            name: "TIDEWATER".into(),
            lon_min: -77.5,
            lon_max: -75.5,
            lat_min: 36.5,
            lat_max: 38.0,
        });
        config.prior.incidents_file = Some("incidents.csv".into());
        let text = toml::to_string(&config).unwrap();
        let back = EngineConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn empty_and_partial_documents_take_defaults() {
        let empty = EngineConfig::from_toml_str("").unwrap();
        assert_eq!(empty, EngineConfig::default());
        let partial = EngineConfig::from_toml_str("[transition]\nself_loop = 0.5\n").unwrap();
        assert_eq!(partial.transition.self_loop, 0.5);
        assert_eq!(partial.grid, GridConfig::default());
        assert_eq!(partial.transition.day, BetaConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = EngineConfig::from_toml_str("[transition]\nself_looop = 0.5\n").unwrap_err();
        assert!(matches!(err, CoreError::Config(_)), "{err}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for doc in [
            "[transition]\nself_loop = 1.0\n",
            "[prior]\nalpha = 1.5\n",
            "[prior]\ndbscan_min_pts = 0\n",
            "[forecast]\nday_start_hour = 18\nday_end_hour = 6\n",
            "[forecast]\ngamma = [1.0]\n",
            "[products]\nquantiles = [0.0]\n",
            "[zones]\nwindow_weights = [1.0, 0.7]\n",
            "[eval]\ngeo_hit_ks = []\n",
            "[seed]\nsigma_on_foot_miles = 0.0\n",
        ] {
            assert!(EngineConfig::from_toml_str(doc).is_err(), "accepted: {doc}");
        }
    }

    #[test]
    fn profile_tables_resolve() {
        let config = EngineConfig::default();
        assert_eq!(config.sigma_base_miles(MovementProfile::OnFoot), 3.0);
        assert_eq!(config.sigma_base_miles(MovementProfile::Vehicle), 15.0);
        assert_eq!(config.sigma_base_miles(MovementProfile::Unknown), 8.0);
        assert_eq!(config.sigma_miles(MovementProfile::OnFoot, 3.0), 4.5);
        assert_eq!(config.half_life_hours(MovementProfile::OnFoot), 36.0);
        assert_eq!(config.half_life_hours(MovementProfile::Vehicle), 18.0);
        assert_eq!(config.half_life_hours(MovementProfile::Unknown), 24.0);
    }

    #[test]
    fn sectors_convert_to_polygons() {
        let text = r#"
[[sectors]]
name = "NOVA"
lon_min = -78.0
lon_max = -77.0
lat_min = 38.5
lat_max = 39.5
"#;
        let config = EngineConfig::from_toml_str(text).unwrap();
        let sectors = config.sector_polygons().unwrap();
        assert_eq!(sectors.len(), 1);
        assert_eq!(sectors[0].name, "NOVA");
        assert!(sectors[0].polygon.contains(LonLat::new(-77.5, 39.0)));
        assert!(!sectors[0].polygon.contains(LonLat::new(-76.5, 39.0)));
    }

    #[test]
    fn schedule_builds_from_config() {
        let config = EngineConfig::default();
        let t0 = crate::testutil::t0_0358();
        let schedule = config.schedule(t0).unwrap();
        assert_eq!(schedule.n_steps(), 24);
        assert_eq!(schedule.horizons, [24, 48, 72]);
    }
}
