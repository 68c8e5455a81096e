//! Command-line front end for the search-planning engine.
//!
//! Subcommands cover the pipeline stages individually (`forecast`, `zones`,
//! `qa`, `evaluate`), synthetic-case generation (`generate`), and a bundled
//! end-to-end demonstration (`demo`). Artifacts are canonical JSON under
//! `--out-dir`, optionally accompanied by GeoJSON exports for mapping tools.
//!
//! Exit codes: 0 success, 2 schema violation (malformed input files or
//! command usage), 3 domain error (invalid parameters or configuration),
//! 4 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};
use sarplan_core::canonical::canonical_json;
use sarplan_core::case::{generate_case, load_case, GeneratorParams, MovementProfile};
use sarplan_core::config::EngineConfig;
use sarplan_core::export::{cells_geojson, rings_geojson, write_geojson, zones_geojson};
use sarplan_core::pipeline::{
    build_environment, run_case, write_artifacts, CaseRun, Environment, GeoInputs, PLAN_FILE,
    QA_METRICS_FILE, REVIEWS_FILE, ZONES_FILE,
};
use sarplan_core::plan::{
    read_zones_jsonl, write_plan, write_zones_jsonl, QaMetricsOut, ReviewLine,
    ARTIFACT_SCHEMA_VERSION,
};
use sarplan_core::products::top_k_share;
use sarplan_core::qa::{apply_reviews, review_zones, ScorerConfig};
use sarplan_core::{CoreError, Result};

pub const CELLS_GEOJSON_FILE: &str = "plan_cells.geojson";
pub const ZONES_GEOJSON_FILE: &str = "zones.geojson";
pub const RINGS_GEOJSON_FILE: &str = "rings.geojson";

/// Bundled demo fixtures, materialized under `<out-dir>/fixtures` by `demo`.
pub const DEMO_FIXTURES: [(&str, &str); 4] = [
    (
        "demo_config.toml",
        include_str!("../fixtures/demo_config.toml"),
    ),
    (
        "demo_boundary.geojson",
        include_str!("../fixtures/demo_boundary.geojson"),
    ),
    (
        "demo_incidents.csv",
        include_str!("../fixtures/demo_incidents.csv"),
    ),
    ("demo_case.json", include_str!("../fixtures/demo_case.json")),
];

#[derive(Debug, Parser)]
#[command(
    name = "sarplan",
    version,
    about = "Probabilistic search planning for missing-person cases"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Engine configuration (TOML); built-in defaults when omitted.
    /// Relative file references inside it resolve against its directory.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory to write artifacts into (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out_dir: PathBuf,

    /// Seed for the synthetic-case generator (required by `generate`).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Remote plausibility scorer endpoint (HTTP POST, JSON in and out);
    /// overrides the configured endpoint.
    #[arg(long, global = true, value_name = "URL")]
    pub qa_endpoint: Option<String>,

    /// Skip the plausibility review stage entirely.
    #[arg(long, global = true)]
    pub no_qa: bool,

    /// Also write GeoJSON exports (cell probabilities, zones, rings).
    #[arg(long, global = true)]
    pub export_geojson: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate the belief and write the search plan for a case.
    Forecast { case: PathBuf },
    /// Select search zones for a case; writes the plan and zones.jsonl.
    Zones { case: PathBuf },
    /// Review zones from a zones.jsonl file and write review artifacts.
    Qa { zones: PathBuf },
    /// Run the full pipeline on a case with ground truth and score it.
    Evaluate { case: PathBuf },
    /// Generate a synthetic case (with ground truth) onto disk.
    Generate {
        /// Movement profile: on-foot, vehicle, or unknown.
        #[arg(long)]
        profile: MovementProfile,
    },
    /// Run the bundled demonstration case end to end (ignores --config).
    Demo,
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Forecast { case } => cmd_forecast(cli, case),
        Command::Zones { case } => cmd_zones(cli, case),
        Command::Qa { zones } => cmd_qa(cli, zones),
        Command::Evaluate { case } => cmd_evaluate(cli, case),
        Command::Generate { profile } => cmd_generate(cli, *profile),
        Command::Demo => cmd_demo(cli),
    }
}

/// Load the configuration and build the shared environment. Returns the
/// directory that relative file references were resolved against.
fn load_session(config_path: Option<&Path>) -> Result<(EngineConfig, Environment)> {
    let (config, base_dir) = match config_path {
        Some(path) => {
            let config = EngineConfig::load(path)?;
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            (config, base)
        }
        None => (EngineConfig::default(), PathBuf::from(".")),
    };
    let inputs = GeoInputs::load(&config, &base_dir)?;
    let env = build_environment(&config, &inputs)?;
    Ok((config, env))
}

/// Pick the plausibility scorer from flags and configuration: `--no-qa`
/// wins, then `--qa-endpoint`, then the configured endpoint or heuristic.
fn resolve_scorer(cli: &Cli, config: &EngineConfig) -> Option<ScorerConfig> {
    if cli.no_qa {
        return None;
    }
    let timeout = Duration::from_millis(config.qa.timeout_ms);
    if let Some(url) = &cli.qa_endpoint {
        return Some(ScorerConfig::Remote {
            endpoint: url.clone(),
            timeout,
        });
    }
    if !config.qa.enabled {
        return None;
    }
    match &config.qa.endpoint {
        Some(url) => Some(ScorerConfig::Remote {
            endpoint: url.clone(),
            timeout,
        }),
        None => Some(ScorerConfig::Heuristic),
    }
}

fn run_one(
    cli: &Cli,
    case_path: &Path,
    scorer: Option<&ScorerConfig>,
) -> Result<(EngineConfig, Environment, CaseRun)> {
    let (config, env) = load_session(cli.config.as_deref())?;
    let case = load_case(case_path)?;
    let run = run_case(&env, &config, &case, scorer)?;
    Ok((config, env, run))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn export_geojson(
    cli: &Cli,
    env: &Environment,
    run: &CaseRun,
    include_zones: bool,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if !cli.export_geojson {
        return Ok(written);
    }
    let cells = cells_geojson(&env.grid, &run.plan)?;
    let cells_path = cli.out_dir.join(CELLS_GEOJSON_FILE);
    write_geojson(&cells, &cells_path)?;
    written.push(cells_path);

    let rings = rings_geojson(run.plan.ipp, &run.plan.rings);
    let rings_path = cli.out_dir.join(RINGS_GEOJSON_FILE);
    write_geojson(&rings, &rings_path)?;
    written.push(rings_path);

    if include_zones {
        let zones = zones_geojson(&run.zones_record);
        let zones_path = cli.out_dir.join(ZONES_GEOJSON_FILE);
        write_geojson(&zones, &zones_path)?;
        written.push(zones_path);
    }
    Ok(written)
}

fn cmd_forecast(cli: &Cli, case_path: &Path) -> Result<()> {
    let (_, env, run) = run_one(cli, case_path, None)?;
    fs::create_dir_all(&cli.out_dir)?;
    let plan_path = cli.out_dir.join(PLAN_FILE);
    write_plan(&run.plan, &plan_path)?;
    let mut written = vec![plan_path];
    written.extend(export_geojson(cli, &env, &run, false)?);
    report_written(&written);
    Ok(())
}

fn cmd_zones(cli: &Cli, case_path: &Path) -> Result<()> {
    let (_, env, run) = run_one(cli, case_path, None)?;
    fs::create_dir_all(&cli.out_dir)?;
    let plan_path = cli.out_dir.join(PLAN_FILE);
    write_plan(&run.plan, &plan_path)?;
    let zones_path = cli.out_dir.join(ZONES_FILE);
    write_zones_jsonl(std::slice::from_ref(&run.zones_record), &zones_path)?;
    let mut written = vec![plan_path, zones_path];
    written.extend(export_geojson(cli, &env, &run, true)?);
    report_written(&written);
    Ok(())
}

fn cmd_qa(cli: &Cli, zones_path: &Path) -> Result<()> {
    if cli.no_qa {
        return Err(CoreError::InvalidParameter(
            "--no-qa contradicts the qa command".into(),
        ));
    }
    let config = match cli.config.as_deref() {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    let timeout = Duration::from_millis(config.qa.timeout_ms);
    let scorer = match cli.qa_endpoint.as_ref().or(config.qa.endpoint.as_ref()) {
        Some(url) => ScorerConfig::Remote {
            endpoint: url.clone(),
            timeout,
        },
        None => ScorerConfig::Heuristic,
    };

    let records = read_zones_jsonl(zones_path)?;
    if records.is_empty() {
        return Err(CoreError::InvalidParameter(format!(
            "no zone records found in {}",
            zones_path.display()
        )));
    }
    let mut reviews_text = String::new();
    let mut metrics_text = String::new();
    for record in &records {
        let plan = record.to_zone_plan()?;
        let reviews = review_zones(
            &plan,
            record.ipp,
            &record.context,
            record.movement_profile,
            &scorer,
        )?;
        let (_, metrics) = apply_reviews(&plan, &reviews)?;
        for review in &reviews {
            reviews_text.push_str(&canonical_json(&ReviewLine::from_review(
                &record.case_id,
                review,
            ))?);
            reviews_text.push('\n');
        }
        metrics_text.push_str(&canonical_json(&QaMetricsOut {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            case_id: record.case_id.clone(),
            metrics,
        })?);
        metrics_text.push('\n');
    }

    fs::create_dir_all(&cli.out_dir)?;
    let reviews_path = cli.out_dir.join(REVIEWS_FILE);
    fs::write(&reviews_path, reviews_text)?;
    let metrics_path = cli.out_dir.join(QA_METRICS_FILE);
    fs::write(&metrics_path, metrics_text)?;
    report_written(&[reviews_path, metrics_path]);
    Ok(())
}

fn cmd_evaluate(cli: &Cli, case_path: &Path) -> Result<()> {
    let (config, env) = load_session(cli.config.as_deref())?;
    let case = load_case(case_path)?;
    let scorer = resolve_scorer(cli, &config);
    let run = run_case(&env, &config, &case, scorer.as_ref())?;
    if run.eval.is_none() {
        return Err(CoreError::InvalidParameter(format!(
            "case {} has no ground truth; evaluate requires it",
            run.case.case_id
        )));
    }
    let mut written = write_artifacts(&run, &cli.out_dir)?;
    written.extend(export_geojson(cli, &env, &run, true)?);
    report_written(&written);
    if let Some(eval) = &run.eval {
        for (k, hit) in &eval.geo_hit_at_k {
            println!("geo-hit@{k}: {hit}");
        }
        println!(
            "asuh: {:.1} sq mi (hit: {})",
            eval.asuh_sq_miles, eval.asuh_hit
        );
    }
    Ok(())
}

fn cmd_generate(cli: &Cli, profile: MovementProfile) -> Result<()> {
    let seed = cli
        .seed
        .ok_or_else(|| CoreError::InvalidParameter("generate requires --seed <N>".into()))?;
    let (config, env) = load_session(cli.config.as_deref())?;
    let params = GeneratorParams {
        step_hours: config.forecast.step_hours,
        day_start_hour: config.forecast.day_start_hour,
        day_end_hour: config.forecast.day_end_hour,
        ..GeneratorParams::default()
    };
    let case = generate_case(&env.grid, &env.pair, seed, profile, &params)?;
    fs::create_dir_all(&cli.out_dir)?;
    let path = cli.out_dir.join(format!("{}.json", case.case_id));
    let mut text = canonical_json(&case)?;
    text.push('\n');
    fs::write(&path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_demo(cli: &Cli) -> Result<()> {
    let fixtures_dir = cli.out_dir.join("fixtures");
    fs::create_dir_all(&fixtures_dir)?;
    for (name, contents) in DEMO_FIXTURES {
        fs::write(fixtures_dir.join(name), contents)?;
    }
    let config = EngineConfig::load(&fixtures_dir.join("demo_config.toml"))?;
    let inputs = GeoInputs::load(&config, &fixtures_dir)?;
    let env = build_environment(&config, &inputs)?;
    let case = load_case(&fixtures_dir.join("demo_case.json"))?;
    let scorer = resolve_scorer(cli, &config);
    let run = run_case(&env, &config, &case, scorer.as_ref())?;

    let mut written = write_artifacts(&run, &cli.out_dir)?;
    written.extend(export_geojson(cli, &env, &run, true)?);
    print_demo_summary(&env, &run)?;
    report_written(&written);
    Ok(())
}

fn print_demo_summary(env: &Environment, run: &CaseRun) -> Result<()> {
    println!(
        "case {}: {} in-mask cells, {} hotspot clusters",
        run.case.case_id,
        env.grid.masked_count(),
        env.hotspots.len()
    );
    for (label, sectors) in &run.plan.sectors_ranked.by_horizon {
        if let Some(top) = sectors.first() {
            println!(
                "  {label}h top sector: {} ({:.1}% of mass)",
                top.name,
                100.0 * top.mass
            );
        }
    }
    for (label, rings) in &run.plan.rings {
        if label == "cumulative" {
            continue;
        }
        if let Some(median) = rings.iter().find(|r| r.q == 0.5) {
            println!("  {label}h 50% containment: {:.1} mi", median.radius_miles);
        }
    }
    for (horizon, field) in &run.forecasts.by_horizon {
        println!(
            "  {horizon}h top-50 concentration: {:.3}",
            top_k_share(field, 50)?
        );
    }
    let zone_counts: Vec<String> = run
        .zones_record
        .zones
        .iter()
        .map(|(w, zs)| format!("{w}: {}", zs.len()))
        .collect();
    println!("  zones per window: {}", zone_counts.join(", "));
    if let Some(metrics) = &run.qa_metrics {
        println!(
            "  plausibility: mean {:.3} across {} zones ({} rank changes)",
            metrics.mean_plausibility, metrics.n_zones, metrics.n_rank_changes
        );
    }
    Ok(())
}

/// Entry point shared by the binary: parse, run, map errors to exit codes.
pub fn main_impl() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            std::process::ExitCode::from(err.exit_code() as u8)
        }
    }
}

/// Look up a bundled fixture by file name (for tests and tooling).
pub fn fixture(name: &str) -> Option<&'static str> {
    DEMO_FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, contents)| *contents)
}
