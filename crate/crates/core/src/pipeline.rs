//! End-to-end orchestration: case in, artifacts out.
//!
//! The run executes the five stages in order — case validation, layer and
//! grid assembly, forecast propagation, zone selection, and plausibility
//! review — then derives the evaluation report when ground truth is
//! available. Any stage error propagates tagged with the stage name. Every
//! step is deterministic given (case, config, seed), so artifacts are
//! byte-identical across reruns.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::belief::{cluster_hotspots, gaussian_seed, kde_prior, mix_initial, Hotspot};
use crate::case::CaseRecord;
use crate::config::EngineConfig;
use crate::error::{CoreError, Result};
use crate::forecast::{run_forecast, ForecastSet};
use crate::geo::{LonLat, Polygon};
use crate::grid::{build_grid, knn_adjacency, Grid};
use crate::layers::{load_layers, synth_layers, synth_layers_along, FeatureLayers};
use crate::metrics::{asuh, geo_hit_at_k, merge_ranked, time_to_first_hit, EvalReport};
use crate::plan::{
    write_plan, write_qa_metrics, write_reviews_jsonl, write_zones_jsonl, RingOut, SearchPlan,
    SectorsRanked, ZonesRecord, ARTIFACT_SCHEMA_VERSION,
};
use crate::products::{containment_rings, sector_masses, top_k_share, Sector};
use crate::qa::{apply_reviews, review_zones, PlausibilityReview, QaMetrics, ScorerConfig};
use crate::transition::{build_pair, TransitionPair};
use crate::zones::{plan_zones, SearchWindow, ZonePlan};

/// Everything shared across cases for one configuration: the masked grid,
/// feature layers, day/night matrices, hotspots, and sectors.
#[derive(Debug, Clone)]
pub struct Environment {
    pub grid: Grid,
    pub layers: FeatureLayers,
    pub pair: TransitionPair,
    pub hotspots: Vec<Hotspot>,
    pub sectors: Vec<Sector>,
}

/// Raw geospatial inputs, already read from wherever they live.
#[derive(Debug, Clone, Default)]
pub struct GeoInputs {
    /// Boundary polygon; `None` keeps the whole bounding box in-mask.
    pub boundary: Option<Polygon>,
    /// Feature-layer CSV text; `None` selects the synthetic generator.
    pub layers_csv: Option<String>,
    /// Historical incident coordinates; empty disables the hotspot prior.
    pub incidents: Vec<LonLat>,
}

impl GeoInputs {
    /// Read the files a config references, resolving relative paths against
    /// `base_dir` (normally the config file's directory).
    pub fn load(config: &EngineConfig, base_dir: &Path) -> Result<GeoInputs> {
        let boundary = config
            .grid
            .boundary_file
            .as_ref()
            .map(|f| Polygon::from_file(&base_dir.join(f)))
            .transpose()
            .map_err(|e| e.at_stage("grid"))?;
        let layers_csv = config
            .layers
            .layers_file
            .as_ref()
            .map(|f| fs::read_to_string(base_dir.join(f)))
            .transpose()
            .map_err(|e| CoreError::from(e).at_stage("layers"))?;
        let incidents = match &config.prior.incidents_file {
            None => Vec::new(),
            Some(f) => {
                let file = fs::File::open(base_dir.join(f))
                    .map_err(|e| CoreError::from(e).at_stage("prior"))?;
                read_incidents_csv(file).map_err(|e| e.at_stage("prior"))?
            }
        };
        Ok(GeoInputs {
            boundary,
            layers_csv,
            incidents,
        })
    }
}

/// Parse an incident CSV with columns `lon,lat`.
pub fn read_incidents_csv<R: std::io::Read>(reader: R) -> Result<Vec<LonLat>> {
    #[derive(serde::Deserialize)]
    struct Row {
        lon: f64,
        lat: f64,
    }
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: Row = row?;
        let p = LonLat::new(row.lon, row.lat);
        if !p.is_valid() {
            return Err(CoreError::InvalidCoordinate {
                lon: row.lon,
                lat: row.lat,
            });
        }
        out.push(p);
    }
    Ok(out)
}

/// Build the per-configuration environment (stage: layers + grid).
pub fn build_environment(config: &EngineConfig, inputs: &GeoInputs) -> Result<Environment> {
    config.validate().map_err(|e| e.at_stage("config"))?;
    let full_cover;
    let boundary = match &inputs.boundary {
        Some(b) => b,
        None => {
            let s = config.grid_spec();
            full_cover = Polygon::rect(s.lon_min, s.lon_max, s.lat_min, s.lat_max)
                .map_err(|e| e.at_stage("grid"))?;
            &full_cover
        }
    };
    let grid = build_grid(config.grid_spec(), boundary).map_err(|e| e.at_stage("grid"))?;
    let grid = knn_adjacency(grid, config.grid.k_neighbors);

    let layers = match &inputs.layers_csv {
        Some(text) => {
            load_layers(text.as_bytes(), grid.n_cells()).map_err(|e| e.at_stage("layers"))?
        }
        None => {
            if config.layers.corridor_polyline.is_empty() {
                synth_layers(&grid, config.layers.synth_seed)
            } else {
                let polyline: Vec<LonLat> = config
                    .layers
                    .corridor_polyline
                    .iter()
                    .map(|&(lon, lat)| LonLat::new(lon, lat))
                    .collect();
                synth_layers_along(
                    &grid,
                    config.layers.synth_seed,
                    &polyline,
                    config.layers.corridor_scale_miles,
                )
            }
        }
    };

    let pair = build_pair(&grid, &layers, &config.day_params(), &config.night_params())
        .map_err(|e| e.at_stage("transition"))?;

    let hotspots = if inputs.incidents.is_empty() {
        Vec::new()
    } else {
        cluster_hotspots(
            &inputs.incidents,
            config.prior.dbscan_eps_miles,
            config.prior.dbscan_min_pts,
        )
        .map_err(|e| e.at_stage("prior"))?
    };

    let sectors = config.sector_polygons().map_err(|e| e.at_stage("config"))?;

    Ok(Environment {
        grid,
        layers,
        pair,
        hotspots,
        sectors,
    })
}

/// The complete output of one case run.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub case: CaseRecord,
    pub forecasts: ForecastSet,
    pub plan: SearchPlan,
    /// Zones as selected (pre-review ordering).
    pub baseline_zones: ZonePlan,
    /// Zones after plausibility reweighting; equals baseline without QA.
    pub final_zones: ZonePlan,
    pub zones_record: ZonesRecord,
    pub reviews: Vec<PlausibilityReview>,
    pub qa_metrics: Option<QaMetrics>,
    pub eval: Option<EvalReport>,
}

/// Run the full pipeline for one case. `scorer = None` skips the review
/// stage (the baseline ranking carries through).
pub fn run_case(
    env: &Environment,
    config: &EngineConfig,
    case: &CaseRecord,
    scorer: Option<&ScorerConfig>,
) -> Result<CaseRun> {
    // Stage 1: case validation against the schema and the grid.
    case.validate().map_err(|e| e.at_stage("case"))?;
    case.validate_against_grid(env.grid.spec())
        .map_err(|e| e.at_stage("case"))?;

    // Stage 2 happened in `build_environment`; stage 3: belief + forecast.
    let sigma = config.sigma_miles(case.movement_profile, case.reporting_delay_hours());
    let seed = gaussian_seed(&env.grid, case.ipp, sigma).map_err(|e| e.at_stage("seed"))?;
    let prior = if env.hotspots.is_empty() {
        None
    } else {
        Some(
            kde_prior(&env.grid, &env.hotspots, config.prior.bandwidth_miles)
                .map_err(|e| e.at_stage("prior"))?,
        )
    };
    let start =
        mix_initial(&seed, prior.as_ref(), config.prior.alpha).map_err(|e| e.at_stage("prior"))?;
    let schedule = config
        .schedule(case.last_seen_time)
        .map_err(|e| e.at_stage("forecast"))?;
    let forecasts = run_forecast(
        &env.grid,
        &env.pair,
        &start,
        &schedule,
        config.half_life_hours(case.movement_profile),
        &config.forecast.gamma,
    )
    .map_err(|e| e.at_stage("forecast"))?;

    // Products: sector masses, rings, hotspot concentration per field.
    let mut sectors_by_horizon = BTreeMap::new();
    let mut rings_by_key = BTreeMap::new();
    let mut concentration = BTreeMap::new();
    let mut rings_for_zones = Vec::new();
    for (&h, field) in &forecasts.by_horizon {
        let key = h.to_string();
        sectors_by_horizon.insert(
            key.clone(),
            sector_masses(&env.grid, field, &env.sectors).map_err(|e| e.at_stage("products"))?,
        );
        let rings = containment_rings(&env.grid, field, case.ipp, &config.products.quantiles)
            .map_err(|e| e.at_stage("products"))?;
        rings_by_key.insert(key.clone(), rings.iter().map(RingOut::from).collect());
        concentration.insert(
            key,
            top_k_share(field, config.products.top_k_cells).map_err(|e| e.at_stage("products"))?,
        );
    }
    let cumulative_sectors = sector_masses(&env.grid, &forecasts.cumulative, &env.sectors)
        .map_err(|e| e.at_stage("products"))?;
    let cumulative_rings = containment_rings(
        &env.grid,
        &forecasts.cumulative,
        case.ipp,
        &config.products.quantiles,
    )
    .map_err(|e| e.at_stage("products"))?;
    rings_by_key.insert(
        "cumulative".to_string(),
        cumulative_rings.iter().map(RingOut::from).collect(),
    );
    rings_for_zones.extend(cumulative_rings);

    // Stage 4: zone selection per window.
    let windows = build_windows(config, &forecasts)?;
    let baseline_zones = plan_zones(
        &env.grid,
        &env.layers,
        &windows,
        case.ipp,
        &env.hotspots,
        &rings_for_zones,
        &env.sectors,
        &config.zone_params(),
    )
    .map_err(|e| e.at_stage("zones"))?;

    // Stage 5: plausibility review and reweighting.
    let (final_zones, reviews, qa_metrics) = match scorer {
        None => (baseline_zones.clone(), Vec::new(), None),
        Some(scorer) => {
            let reviews = review_zones(
                &baseline_zones,
                case.ipp,
                &case.context,
                case.movement_profile,
                scorer,
            )
            .map_err(|e| e.at_stage("qa"))?;
            let (reviewed, metrics) =
                apply_reviews(&baseline_zones, &reviews).map_err(|e| e.at_stage("qa"))?;
            (reviewed, reviews, Some(metrics))
        }
    };

    let zones_record = ZonesRecord::from_plan(
        &case.case_id,
        case.ipp,
        case.movement_profile,
        &case.context,
        &baseline_zones,
    );

    let plan = SearchPlan {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        case_id: case.case_id.clone(),
        ipp: case.ipp,
        grid_xy: env.grid.cells().iter().map(|c| (c.lon, c.lat)).collect(),
        p: forecasts.cumulative.values.clone(),
        forecasts_by_horizon: forecasts
            .by_horizon
            .iter()
            .map(|(h, f)| (h.to_string(), f.values.clone()))
            .collect(),
        sectors_ranked: SectorsRanked {
            cumulative: cumulative_sectors,
            by_horizon: sectors_by_horizon,
        },
        rings: rings_by_key,
        hotspots: env.hotspots.clone(),
    };
    plan.validate().map_err(|e| e.at_stage("plan"))?;

    // Evaluation, when the case carries ground truth.
    let eval = match case.ground_truth.as_ref().and_then(|t| t.last()) {
        None => None,
        Some(last) => {
            let truth = last.position();
            let reviewed_record = zones_record.with_reordered(&final_zones);
            let ranked = merge_ranked(&reviewed_record.zones).map_err(|e| e.at_stage("eval"))?;
            let mut geo_hits = BTreeMap::new();
            for &k in &config.eval.geo_hit_ks {
                geo_hits.insert(
                    k.to_string(),
                    geo_hit_at_k(&ranked, truth, k).map_err(|e| e.at_stage("eval"))?,
                );
            }
            let (asuh_sq_miles, asuh_hit) = asuh(&ranked, truth);
            Some(EvalReport {
                schema_version: ARTIFACT_SCHEMA_VERSION,
                case_id: case.case_id.clone(),
                truth,
                geo_hit_at_k: geo_hits,
                asuh_sq_miles,
                asuh_hit,
                time_to_first_hit_window: time_to_first_hit(&ranked, truth),
                hotspot_concentration_by_horizon: concentration,
            })
        }
    };

    Ok(CaseRun {
        case: case.clone(),
        forecasts,
        plan,
        baseline_zones,
        final_zones,
        zones_record,
        reviews,
        qa_metrics,
        eval,
    })
}

/// Derive the search windows (one per horizon) from the config.
fn build_windows(config: &EngineConfig, forecasts: &ForecastSet) -> Result<Vec<SearchWindow>> {
    let mut windows = Vec::new();
    let mut start = 0u32;
    for (i, &h) in config.forecast.horizons.iter().enumerate() {
        windows.push(SearchWindow {
            label: format!("{start}-{h}"),
            start_hours: start,
            end_hours: h,
            weight: config.zones.window_weights[i],
            field: forecasts
                .horizon(h)
                .map_err(|e| e.at_stage("zones"))?
                .clone(),
        });
        start = h;
    }
    Ok(windows)
}

/// File names of the emitted artifacts.
pub const PLAN_FILE: &str = "search_plan.json";
pub const ZONES_FILE: &str = "zones.jsonl";
pub const REVIEWS_FILE: &str = "zones_review.jsonl";
pub const QA_METRICS_FILE: &str = "zone_qa_metrics.json";
pub const EVAL_FILE: &str = "eval_report.json";

/// Write every artifact the run produced into `out_dir`; returns the paths.
pub fn write_artifacts(run: &CaseRun, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let plan_path = out_dir.join(PLAN_FILE);
    write_plan(&run.plan, &plan_path)?;
    written.push(plan_path);

    let zones_path = out_dir.join(ZONES_FILE);
    write_zones_jsonl(std::slice::from_ref(&run.zones_record), &zones_path)?;
    written.push(zones_path);

    if !run.reviews.is_empty() {
        let reviews_path = out_dir.join(REVIEWS_FILE);
        write_reviews_jsonl(&run.case.case_id, &run.reviews, &reviews_path)?;
        written.push(reviews_path);
    }
    if let Some(metrics) = &run.qa_metrics {
        let metrics_path = out_dir.join(QA_METRICS_FILE);
        write_qa_metrics(&run.case.case_id, metrics, &metrics_path)?;
        written.push(metrics_path);
    }
    if let Some(eval) = &run.eval {
        let eval_path = out_dir.join(EVAL_FILE);
        crate::metrics::write_eval_report(eval, &eval_path)?;
        written.push(eval_path);
    }
    Ok(written)
}
