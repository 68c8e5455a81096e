//! Search-zone recommendation: candidate discs from several heuristics, then
//! greedy coverage-style selection per search window.
//!
//! The greedy marginal reward for adding candidate z to a window whose
//! selected zones already cover the cell set U is
//!
//! ```text
//! reward(z | U) = w_window * mass(cells(z) \ U)
//!              - lambda_area    * (r_z / r_max)^2
//!              - lambda_overlap * |cells(z) ∩ U| / |cells(z)|
//!              + lambda_plaus   * mean_{j in cells(z)} (corridor_j + seclusion_j) / 2
//! ```
//!
//! Selection stops at the window budget or when the best reward drops to
//! zero or below. Empirically the greedy total stays within the classic
//! (1 - 1/e) factor of the best achievable sequence.

use serde::{Deserialize, Serialize};

use crate::belief::{Hotspot, ProbabilityField};
use crate::error::{CoreError, Result};
use crate::geo::{haversine_miles, LonLat};
use crate::grid::Grid;
use crate::layers::FeatureLayers;
use crate::products::{assign_sectors, ContainmentRing, Sector};

/// Tunables for candidate generation and greedy selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneParams {
    pub budget_per_window: usize,
    pub r_max_miles: f64,
    pub peak_radius_miles: f64,
    pub hotspot_radius_miles: f64,
    pub top_m_peaks: usize,
    pub lambda_area: f64,
    pub lambda_overlap: f64,
    pub lambda_plaus: f64,
    /// Optional swap-improvement pass after the greedy run.
    pub refine: bool,
}

impl Default for ZoneParams {
    fn default() -> Self {
        Self {
            budget_per_window: 5,
            r_max_miles: 15.0,
            peak_radius_miles: 5.0,
            hotspot_radius_miles: 8.0,
            top_m_peaks: 25,
            lambda_area: 0.1,
            lambda_overlap: 0.3,
            lambda_plaus: 0.05,
            refine: false,
        }
    }
}

impl ZoneParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_max_miles", self.r_max_miles),
            ("peak_radius_miles", self.peak_radius_miles),
            ("hotspot_radius_miles", self.hotspot_radius_miles),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        for (name, v) in [
            ("lambda_area", self.lambda_area),
            ("lambda_overlap", self.lambda_overlap),
            ("lambda_plaus", self.lambda_plaus),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} = {v} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Where a candidate disc came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Peak,
    Hotspot,
    RingBand,
    SectorCentroid,
}

/// A candidate search disc with its covered in-mask cells precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub center: LonLat,
    pub radius_miles: f64,
    pub source: CandidateSource,
    pub cells: Vec<usize>,
    pub covered_mass: f64,
}

/// Per-zone reward decomposition as seen at selection time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneScore {
    pub marginal_mass: f64,
    pub area_penalty: f64,
    pub overlap_penalty: f64,
    pub plausibility_bonus: f64,
    pub reward: f64,
}

/// A selected zone, ranked within its window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchZone {
    pub id: String,
    pub window: String,
    pub center: LonLat,
    pub radius_miles: f64,
    #[serde(skip)]
    pub cells: Vec<usize>,
    pub priority: f64,
    pub score: ZoneScore,
    pub source: CandidateSource,
}

/// A search window: a labeled time span with its belief field and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchWindow {
    pub label: String,
    pub start_hours: u32,
    pub end_hours: u32,
    pub weight: f64,
    pub field: ProbabilityField,
}

/// Zones for one window plus any advisory notes raised while planning it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub label: String,
    pub start_hours: u32,
    pub end_hours: u32,
    pub weight: f64,
    pub zones: Vec<SearchZone>,
    pub warnings: Vec<String>,
}

/// The full multi-window zone recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePlan {
    pub windows: Vec<WindowPlan>,
}

impl ZonePlan {
    pub fn all_zones(&self) -> impl Iterator<Item = &SearchZone> {
        self.windows.iter().flat_map(|w| w.zones.iter())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.windows
            .iter()
            .flat_map(|w| w.warnings.iter().map(String::as_str))
    }
}

fn disc_cells(grid: &Grid, center: LonLat, radius: f64) -> Vec<usize> {
    grid.in_mask_indices()
        .filter(|&i| haversine_miles(center, grid.cell(i)) <= radius)
        .collect()
}

fn candidate(
    grid: &Grid,
    field: &ProbabilityField,
    center: LonLat,
    radius: f64,
    source: CandidateSource,
) -> Option<Candidate> {
    if !grid.is_in_mask(grid.nearest_cell(center)) {
        return None;
    }
    let cells = disc_cells(grid, center, radius);
    if cells.is_empty() {
        return None;
    }
    let covered_mass = cells.iter().map(|&j| field.values[j]).sum();
    Some(Candidate {
        center,
        radius_miles: radius,
        source,
        cells,
        covered_mass,
    })
}

/// Generate candidate discs for one window.
///
/// Sources, in deterministic order: the top-M probability peaks of the
/// window field; historical hotspots; one band between each consecutive
/// containment-ring pair (centered on the band's highest-probability cell);
/// and field-weighted sector centroids. Candidates whose center falls over a
/// masked-out cell or that cover no cells are dropped, and near-duplicate
/// centers (closer than half the cell pitch) collapse to the candidate with
/// more covered mass.
pub fn generate_candidates(
    grid: &Grid,
    field: &ProbabilityField,
    ipp: LonLat,
    hotspots: &[Hotspot],
    rings: &[ContainmentRing],
    sectors: &[Sector],
    params: &ZoneParams,
) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    let spacing = grid.cell_spacing_miles();
    let mut push = |cand: Option<Candidate>| {
        let Some(cand) = cand else { return };
        for kept in out.iter_mut() {
            if haversine_miles(kept.center, cand.center) < spacing / 2.0 {
                if cand.covered_mass > kept.covered_mass {
                    *kept = cand;
                }
                return;
            }
        }
        out.push(cand);
    };

    // Probability peaks, highest first (ties by cell index).
    let mut peaks: Vec<(f64, usize)> = grid
        .in_mask_indices()
        .map(|i| (field.values[i], i))
        .filter(|&(v, _)| v > 0.0)
        .collect();
    peaks.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let peak_r = params.peak_radius_miles.min(params.r_max_miles);
    for &(_, i) in peaks.iter().take(params.top_m_peaks) {
        push(candidate(
            grid,
            field,
            grid.cell(i),
            peak_r,
            CandidateSource::Peak,
        ));
    }

    // Historical hotspots.
    let hotspot_r = params.hotspot_radius_miles.min(params.r_max_miles);
    for h in hotspots {
        push(candidate(
            grid,
            field,
            h.center,
            hotspot_r,
            CandidateSource::Hotspot,
        ));
    }

    // Bands between consecutive containment rings (inner edge of the first
    // band is the IPP itself).
    let mut inner = 0.0;
    for ring in rings {
        let outer = ring.radius_miles;
        if outer > inner {
            let band: Vec<usize> = grid
                .in_mask_indices()
                .filter(|&i| {
                    let d = haversine_miles(ipp, grid.cell(i));
                    d > inner && d <= outer || (inner == 0.0 && d == 0.0)
                })
                .collect();
            let best = band
                .iter()
                .copied()
                .filter(|&i| field.values[i] > 0.0)
                .max_by(|&a, &b| {
                    field.values[a]
                        .partial_cmp(&field.values[b])
                        .unwrap()
                        .then(b.cmp(&a)) // ties: keep the lower index
                });
            if let Some(i) = best {
                let r = params.r_max_miles.min(((outer - inner) / 2.0).max(spacing));
                push(candidate(
                    grid,
                    field,
                    grid.cell(i),
                    r,
                    CandidateSource::RingBand,
                ));
            }
        }
        inner = inner.max(outer);
    }

    // Field-weighted sector centroids.
    let assignment = assign_sectors(grid, sectors);
    for (s, _) in sectors.iter().enumerate() {
        let (mut mass, mut lon, mut lat) = (0.0, 0.0, 0.0);
        for i in grid.in_mask_indices() {
            if assignment[i] == Some(s) {
                let v = field.values[i];
                mass += v;
                lon += v * grid.cell(i).lon;
                lat += v * grid.cell(i).lat;
            }
        }
        if mass > 0.0 {
            let center = LonLat::new(lon / mass, lat / mass);
            push(candidate(
                grid,
                field,
                center,
                params.r_max_miles,
                CandidateSource::SectorCentroid,
            ));
        }
    }

    out
}

fn plaus_mean(layers: &FeatureLayers, cells: &[usize]) -> f64 {
    if cells.is_empty() {
        return 0.0;
    }
    cells
        .iter()
        .map(|&j| (layers.corridor[j] + layers.seclusion[j]) / 2.0)
        .sum::<f64>()
        / cells.len() as f64
}

fn score_candidate(
    field: &ProbabilityField,
    layers: &FeatureLayers,
    cand: &Candidate,
    covered: &[bool],
    window_weight: f64,
    params: &ZoneParams,
) -> ZoneScore {
    let mut marginal = 0.0;
    let mut overlap_cells = 0usize;
    for &j in &cand.cells {
        if covered[j] {
            overlap_cells += 1;
        } else {
            marginal += field.values[j];
        }
    }
    let area_penalty = params.lambda_area * (cand.radius_miles / params.r_max_miles).powi(2);
    let overlap_penalty = params.lambda_overlap * overlap_cells as f64 / cand.cells.len() as f64;
    let plausibility_bonus = params.lambda_plaus * plaus_mean(layers, &cand.cells);
    ZoneScore {
        marginal_mass: marginal,
        area_penalty,
        overlap_penalty,
        plausibility_bonus,
        reward: window_weight * marginal - area_penalty - overlap_penalty + plausibility_bonus,
    }
}

/// Total sequential reward of selecting `order` left to right.
pub fn sequence_reward(
    field: &ProbabilityField,
    layers: &FeatureLayers,
    candidates: &[Candidate],
    order: &[usize],
    window_weight: f64,
    params: &ZoneParams,
) -> f64 {
    let mut covered = vec![false; field.len()];
    let mut total = 0.0;
    for &k in order {
        let s = score_candidate(
            field,
            layers,
            &candidates[k],
            &covered,
            window_weight,
            params,
        );
        total += s.reward;
        for &j in &candidates[k].cells {
            covered[j] = true;
        }
    }
    total
}

/// Greedy selection for one window. Returns candidate indices with their
/// at-selection scores, in selection order.
pub fn greedy_select(
    field: &ProbabilityField,
    layers: &FeatureLayers,
    candidates: &[Candidate],
    window_weight: f64,
    params: &ZoneParams,
) -> Vec<(usize, ZoneScore)> {
    let mut covered = vec![false; field.len()];
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut selected: Vec<(usize, ZoneScore)> = Vec::new();
    while selected.len() < params.budget_per_window && !remaining.is_empty() {
        let mut best: Option<(usize, usize, ZoneScore)> = None; // (pos, cand, score)
        for (pos, &k) in remaining.iter().enumerate() {
            let s = score_candidate(
                field,
                layers,
                &candidates[k],
                &covered,
                window_weight,
                params,
            );
            let better = match &best {
                None => true,
                Some((_, bk, bs)) => {
                    let c = &candidates[*bk];
                    (
                        s.reward,
                        s.marginal_mass,
                        -candidates[k].center.lat,
                        -candidates[k].center.lon,
                    )
                        .partial_cmp(&(bs.reward, bs.marginal_mass, -c.center.lat, -c.center.lon))
                        .unwrap()
                        == std::cmp::Ordering::Greater
                }
            };
            if better {
                best = Some((pos, k, s));
            }
        }
        let Some((pos, k, score)) = best else { break };
        if score.reward <= 0.0 {
            break;
        }
        for &j in &candidates[k].cells {
            covered[j] = true;
        }
        selected.push((k, score));
        remaining.remove(pos);
    }

    if params.refine {
        selected = refine_by_swaps(field, layers, candidates, selected, window_weight, params);
    }
    selected
}

/// One deterministic pass of swap improvement: try replacing each selected
/// zone with each unselected candidate and keep strict improvements to the
/// sequence total. Scores are recomputed for the final sequence.
fn refine_by_swaps(
    field: &ProbabilityField,
    layers: &FeatureLayers,
    candidates: &[Candidate],
    selected: Vec<(usize, ZoneScore)>,
    window_weight: f64,
    params: &ZoneParams,
) -> Vec<(usize, ZoneScore)> {
    let mut order: Vec<usize> = selected.iter().map(|&(k, _)| k).collect();
    let mut best_total = sequence_reward(field, layers, candidates, &order, window_weight, params);
    for slot in 0..order.len() {
        for k in 0..candidates.len() {
            if order.contains(&k) {
                continue;
            }
            let prev = std::mem::replace(&mut order[slot], k);
            let total = sequence_reward(field, layers, candidates, &order, window_weight, params);
            if total > best_total {
                best_total = total;
            } else {
                order[slot] = prev;
            }
        }
    }
    // Rebuild the at-selection scores for the (possibly) new order.
    let mut covered = vec![false; field.len()];
    order
        .into_iter()
        .map(|k| {
            let s = score_candidate(
                field,
                layers,
                &candidates[k],
                &covered,
                window_weight,
                params,
            );
            for &j in &candidates[k].cells {
                covered[j] = true;
            }
            (k, s)
        })
        .collect()
}

/// Build the full plan: per window, generate candidates, run the greedy
/// selection, normalize priorities to the window's best marginal mass, and
/// rank zones by (priority desc, lat asc, lon asc). Zone ids are
/// `{window label}#{rank}` with rank starting at 1.
#[allow(clippy::too_many_arguments)]
pub fn plan_zones(
    grid: &Grid,
    layers: &FeatureLayers,
    windows: &[SearchWindow],
    ipp: LonLat,
    hotspots: &[Hotspot],
    rings: &[ContainmentRing],
    sectors: &[Sector],
    params: &ZoneParams,
) -> Result<ZonePlan> {
    params.validate()?;
    if windows.is_empty() {
        return Err(CoreError::InvalidParameter("no search windows".into()));
    }
    if layers.len() != grid.n_cells() {
        return Err(CoreError::GridMismatch {
            expected: grid.n_cells(),
            actual: layers.len(),
        });
    }
    let mut plans = Vec::with_capacity(windows.len());
    for w in windows {
        w.field.validate(grid)?;
        if !(w.weight.is_finite() && w.weight > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "window {} weight {} must be positive",
                w.label, w.weight
            )));
        }
        let mut warnings = Vec::new();
        let candidates = generate_candidates(grid, &w.field, ipp, hotspots, rings, sectors, params);
        if candidates.is_empty() {
            warnings.push(format!("window {}: no viable zone candidates", w.label));
            plans.push(WindowPlan {
                label: w.label.clone(),
                start_hours: w.start_hours,
                end_hours: w.end_hours,
                weight: w.weight,
                zones: Vec::new(),
                warnings,
            });
            continue;
        }
        let selected = greedy_select(&w.field, layers, &candidates, w.weight, params);
        if selected.is_empty() {
            warnings.push(format!(
                "window {}: every candidate scored non-positive reward",
                w.label
            ));
        }
        let max_marginal = selected
            .iter()
            .map(|(_, s)| s.marginal_mass)
            .fold(0.0, f64::max);
        let mut zones: Vec<SearchZone> = selected
            .into_iter()
            .map(|(k, score)| {
                let c = &candidates[k];
                SearchZone {
                    id: String::new(),
                    window: w.label.clone(),
                    center: c.center,
                    radius_miles: c.radius_miles,
                    cells: c.cells.clone(),
                    priority: if max_marginal > 0.0 {
                        score.marginal_mass / max_marginal
                    } else {
                        0.0
                    },
                    score,
                    source: c.source,
                }
            })
            .collect();
        zones.sort_by(|a, b| {
            b.priority
                .partial_cmp(&a.priority)
                .unwrap()
                .then(a.center.lat.partial_cmp(&b.center.lat).unwrap())
                .then(a.center.lon.partial_cmp(&b.center.lon).unwrap())
        });
        for (rank, z) in zones.iter_mut().enumerate() {
            z.id = format!("{}#{}", w.label, rank + 1);
        }
        plans.push(WindowPlan {
            label: w.label.clone(),
            start_hours: w.start_hours,
            end_hours: w.end_hours,
            weight: w.weight,
            zones,
            warnings,
        });
    }
    Ok(ZonePlan { windows: plans })
}
