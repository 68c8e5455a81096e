//! Operational read-outs of a belief field: sector mass rankings,
//! distance-quantile containment rings, and hotspot concentration.

use serde::{Deserialize, Serialize};

use crate::belief::ProbabilityField;
use crate::error::{CoreError, Result};
use crate::geo::{haversine_miles, LonLat, Polygon};
use crate::grid::Grid;

/// Name reserved for mass falling in no configured sector.
pub const UNASSIGNED_SECTOR: &str = "UNASSIGNED";

/// A named planning region. Cells are assigned to the first sector whose
/// polygon contains their center, so listing order resolves overlaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub name: String,
    pub polygon: Polygon,
}

/// One row of a ranked sector table; `mass` is a fraction of total belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorMass {
    pub name: String,
    pub mass: f64,
}

/// Per-cell sector assignment: index into the sector list, None when no
/// polygon claims the cell. First match wins.
pub fn assign_sectors(grid: &Grid, sectors: &[Sector]) -> Vec<Option<usize>> {
    grid.cells()
        .iter()
        .map(|&c| sectors.iter().position(|s| s.polygon.contains(c)))
        .collect()
}

/// Sum field mass per sector and rank descending (ties by name ascending).
/// The UNASSIGNED pseudo-sector always appears, even at zero mass.
pub fn sector_masses(
    grid: &Grid,
    field: &ProbabilityField,
    sectors: &[Sector],
) -> Result<Vec<SectorMass>> {
    field.validate(grid)?;
    let mut seen = std::collections::BTreeSet::new();
    for s in sectors {
        if s.name.is_empty() || s.name == UNASSIGNED_SECTOR {
            return Err(CoreError::InvalidParameter(format!(
                "sector name {:?} is reserved or empty",
                s.name
            )));
        }
        if !seen.insert(&s.name) {
            return Err(CoreError::InvalidParameter(format!(
                "duplicate sector name {:?}",
                s.name
            )));
        }
    }
    let assignment = assign_sectors(grid, sectors);
    let mut masses = vec![0.0; sectors.len() + 1];
    for i in grid.in_mask_indices() {
        match assignment[i] {
            Some(s) => masses[s] += field.values[i],
            None => masses[sectors.len()] += field.values[i],
        }
    }
    let mut out: Vec<SectorMass> = sectors
        .iter()
        .enumerate()
        .map(|(k, s)| SectorMass {
            name: s.name.clone(),
            mass: masses[k],
        })
        .chain(std::iter::once(SectorMass {
            name: UNASSIGNED_SECTOR.to_string(),
            mass: masses[sectors.len()],
        }))
        .collect();
    out.sort_by(|a, b| {
        b.mass
            .partial_cmp(&a.mass)
            .unwrap()
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(out)
}

/// A distance quantile of the belief around the initial planning point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentRing {
    pub quantile: f64,
    pub radius_miles: f64,
    pub mass_within: f64,
}

// Cells at (numerically) the same distance from the IPP form one shell and
// enter the cumulative sum together; these epsilons absorb ulp-level noise
// in the haversine without ever merging physically distinct shells.
const SHELL_EPS_ABS: f64 = 1e-9;
const SHELL_EPS_REL: f64 = 1e-12;

/// Containment rings: for each quantile q, the smallest shell radius at
/// which cumulative belief (cells sorted by distance, whole shells at a
/// time) reaches q, along with the mass actually enclosed. Rings come back
/// in the order the quantiles were given.
pub fn containment_rings(
    grid: &Grid,
    field: &ProbabilityField,
    ipp: LonLat,
    quantiles: &[f64],
) -> Result<Vec<ContainmentRing>> {
    field.validate(grid)?;
    if !ipp.is_valid() {
        return Err(CoreError::InvalidCoordinate {
            lon: ipp.lon,
            lat: ipp.lat,
        });
    }
    if quantiles.is_empty() {
        return Err(CoreError::InvalidParameter("no quantiles requested".into()));
    }
    for &q in quantiles {
        if !(q > 0.0 && q <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "quantile {q} outside (0, 1]"
            )));
        }
    }
    let mut cells: Vec<(f64, usize)> = grid
        .in_mask_indices()
        .map(|i| (haversine_miles(ipp, grid.cell(i)), i))
        .collect();
    cells.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    // Collapse into shells: (outer radius, cumulative mass through shell).
    let mut shells: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    let mut idx = 0;
    while idx < cells.len() {
        let d0 = cells[idx].0;
        let tol = SHELL_EPS_ABS.max(SHELL_EPS_REL * d0);
        let mut outer = d0;
        while idx < cells.len() && cells[idx].0 - d0 <= tol {
            cum += field.values[cells[idx].1];
            outer = cells[idx].0;
            idx += 1;
        }
        shells.push((outer, cum));
    }

    let rings = quantiles
        .iter()
        .map(|&q| {
            let (radius, mass) = shells
                .iter()
                .copied()
                .find(|&(_, c)| c >= q)
                .unwrap_or(*shells.last().expect("non-empty domain"));
            ContainmentRing {
                quantile: q,
                radius_miles: radius,
                mass_within: mass,
            }
        })
        .collect();
    Ok(rings)
}

/// Fraction of belief held by the k most probable cells — a concentration
/// score that decays as the forecast diffuses.
pub fn top_k_share(field: &ProbabilityField, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(CoreError::InvalidParameter(
            "top-k share needs k >= 1".into(),
        ));
    }
    let mut v = field.values.clone();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(v.iter().take(k).sum())
}
