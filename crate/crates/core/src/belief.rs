//! Initial belief construction: Gaussian seed around the initial planning
//! point, a KDE prior over historical-incident hotspots, and their convex
//! mixture.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geo::{haversine_miles, LonLat};
use crate::grid::Grid;

/// What a probability vector represents, carried for labeling artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldTag {
    Seed,
    Prior,
    Start,
    Horizon(u32),
    Cumulative,
}

/// A probability mass function over grid cells (masked-out cells hold 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityField {
    pub values: Vec<f64>,
    pub tag: Option<FieldTag>,
}

impl ProbabilityField {
    pub fn new(values: Vec<f64>, tag: Option<FieldTag>) -> Self {
        Self { values, tag }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Check the field is a pmf aligned with the grid: non-negative, unit
    /// total within 1e-9, exactly zero off-mask.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.values.len() != grid.n_cells() {
            return Err(CoreError::GridMismatch {
                expected: grid.n_cells(),
                actual: self.values.len(),
            });
        }
        for (i, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(CoreError::NonFiniteValue {
                    context: format!("probability at cell {i}"),
                });
            }
            if v < 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "negative probability {v} at cell {i}"
                )));
            }
            if !grid.is_in_mask(i) && v != 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "mass {v} on masked-out cell {i}"
                )));
            }
        }
        let total = self.total();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidParameter(format!(
                "field total {total} differs from 1 by more than 1e-9"
            )));
        }
        Ok(())
    }

    /// Index of the largest value; ties take the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Gaussian seed centered on the initial planning point:
/// p(j) proportional to exp(-d(ipp, j)^2 / (2 sigma^2)) over in-mask cells.
///
/// If every weight underflows to zero (tiny sigma far from any center), the
/// seed degenerates to a point mass at the nearest in-mask cell.
pub fn gaussian_seed(grid: &Grid, ipp: LonLat, sigma_miles: f64) -> Result<ProbabilityField> {
    if !(sigma_miles.is_finite() && sigma_miles > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "sigma {sigma_miles} must be positive and finite"
        )));
    }
    if !ipp.is_valid() {
        return Err(CoreError::InvalidCoordinate {
            lon: ipp.lon,
            lat: ipp.lat,
        });
    }
    let denom = 2.0 * sigma_miles * sigma_miles;
    let mut values = vec![0.0; grid.n_cells()];
    let mut total = 0.0;
    for i in grid.in_mask_indices() {
        let d = haversine_miles(ipp, grid.cell(i));
        let w = (-(d * d) / denom).exp();
        values[i] = w;
        total += w;
    }
    if total <= 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        values[grid.nearest_in_mask_cell(ipp)] = 1.0;
    } else {
        values.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ProbabilityField::new(values, Some(FieldTag::Seed)))
}

/// A density-cluster of historical incident points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub center: LonLat,
    pub weight: f64,
    pub n_points: usize,
}

/// Density-based clustering of incident points (DBSCAN). A point is a core
/// point when at least `min_pts` points — itself included — lie within
/// `eps_miles`; clusters grow from core points, border points join the first
/// cluster that reaches them, and noise is discarded. Hotspot centers are
/// member centroids; weights are member counts normalized over all clustered
/// points. Errors with `NoClusters` when everything is noise.
pub fn cluster_hotspots(points: &[LonLat], eps_miles: f64, min_pts: usize) -> Result<Vec<Hotspot>> {
    if !(eps_miles.is_finite() && eps_miles > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "eps {eps_miles} must be positive and finite"
        )));
    }
    if min_pts == 0 {
        return Err(CoreError::InvalidParameter(
            "min_pts must be at least 1".into(),
        ));
    }
    for p in points {
        if !p.is_valid() {
            return Err(CoreError::InvalidCoordinate {
                lon: p.lon,
                lat: p.lat,
            });
        }
    }
    let n = points.len();
    const UNVISITED: isize = -2;
    const NOISE: isize = -1;
    let mut labels = vec![UNVISITED; n];
    let region = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| haversine_miles(points[i], points[j]) <= eps_miles)
            .collect()
    };
    let mut next_cluster = 0isize;
    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        let nb = region(i);
        if nb.len() < min_pts {
            labels[i] = NOISE;
            continue;
        }
        let cid = next_cluster;
        next_cluster += 1;
        labels[i] = cid;
        let mut seeds: Vec<usize> = nb.into_iter().filter(|&j| j != i).collect();
        let mut k = 0;
        while k < seeds.len() {
            let j = seeds[k];
            k += 1;
            if labels[j] == NOISE {
                labels[j] = cid;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cid;
            let nb2 = region(j);
            if nb2.len() >= min_pts {
                for q in nb2 {
                    if (labels[q] == UNVISITED || labels[q] == NOISE) && !seeds.contains(&q) {
                        seeds.push(q);
                    }
                }
            }
        }
    }
    if next_cluster == 0 {
        return Err(CoreError::NoClusters);
    }
    let mut hotspots = Vec::with_capacity(next_cluster as usize);
    let clustered_total: usize = labels.iter().filter(|&&l| l >= 0).count();
    for cid in 0..next_cluster {
        let members: Vec<LonLat> = (0..n)
            .filter(|&i| labels[i] == cid)
            .map(|i| points[i])
            .collect();
        let m = members.len() as f64;
        let center = LonLat::new(
            members.iter().map(|p| p.lon).sum::<f64>() / m,
            members.iter().map(|p| p.lat).sum::<f64>() / m,
        );
        hotspots.push(Hotspot {
            center,
            weight: m / clustered_total as f64,
            n_points: members.len(),
        });
    }
    Ok(hotspots)
}

/// Weighted KDE prior over hotspot centers:
/// p(j) proportional to sum_c w_c exp(-d(c, j)^2 / (2 b^2)) on in-mask cells.
pub fn kde_prior(
    grid: &Grid,
    hotspots: &[Hotspot],
    bandwidth_miles: f64,
) -> Result<ProbabilityField> {
    if hotspots.is_empty() {
        return Err(CoreError::EmptyHotspotSet);
    }
    if !(bandwidth_miles.is_finite() && bandwidth_miles > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "bandwidth {bandwidth_miles} must be positive and finite"
        )));
    }
    let denom = 2.0 * bandwidth_miles * bandwidth_miles;
    let mut values = vec![0.0; grid.n_cells()];
    let mut total = 0.0;
    for i in grid.in_mask_indices() {
        let c = grid.cell(i);
        let mut v = 0.0;
        for h in hotspots {
            let d = haversine_miles(h.center, c);
            v += h.weight * (-(d * d) / denom).exp();
        }
        values[i] = v;
        total += v;
    }
    if total <= 0.0 {
        return Err(CoreError::AllMassMasked);
    }
    values.iter_mut().for_each(|v| *v /= total);
    Ok(ProbabilityField::new(values, Some(FieldTag::Prior)))
}

/// Convex mixture p0 = (1 - alpha) * seed + alpha * prior. With no prior the
/// seed passes through (still retagged as the start field).
pub fn mix_initial(
    seed: &ProbabilityField,
    prior: Option<&ProbabilityField>,
    alpha: f64,
) -> Result<ProbabilityField> {
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "mixture weight {alpha} outside [0, 1]"
        )));
    }
    let values = match prior {
        None => seed.values.clone(),
        Some(prior) => {
            if prior.len() != seed.len() {
                return Err(CoreError::GridMismatch {
                    expected: seed.len(),
                    actual: prior.len(),
                });
            }
            seed.values
                .iter()
                .zip(&prior.values)
                .map(|(&s, &p)| (1.0 - alpha) * s + alpha * p)
                .collect()
        }
    };
    Ok(ProbabilityField::new(values, Some(FieldTag::Start)))
}
