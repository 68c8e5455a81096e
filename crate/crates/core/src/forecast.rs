//! Time-stepped belief propagation across planning horizons.
//!
//! The belief advances in fixed steps (default 3 h). Each step uses the day
//! matrix when the local clock at the step's start lies in [day_start,
//! day_end), the night matrix otherwise, then re-applies the domain mask and
//! renormalizes. Snapshots are taken at each requested horizon sequentially —
//! the 48 h field continues from the 24 h field rather than restarting.
//!
//! Survival weighting follows a half-life law w(t) = 2^(-t / T_half); the
//! cumulative field blends horizon snapshots with weights gamma_H * w(H).

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, FixedOffset, Timelike};

use crate::belief::{FieldTag, ProbabilityField};
use crate::error::{CoreError, Result};
use crate::grid::Grid;
use crate::transition::TransitionPair;

/// Step size, horizon list, and the local clock driving day/night switching.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSchedule {
    pub step_hours: u32,
    pub horizons: Vec<u32>,
    pub last_seen_local: DateTime<FixedOffset>,
    pub day_start_hour: u32,
    pub day_end_hour: u32,
}

impl HorizonSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.step_hours == 0 || 24 % self.step_hours != 0 {
            return Err(CoreError::InvalidParameter(format!(
                "step_hours {} must divide 24",
                self.step_hours
            )));
        }
        if self.horizons.is_empty() {
            return Err(CoreError::InvalidParameter("no horizons requested".into()));
        }
        let mut prev = 0u32;
        for &h in &self.horizons {
            if h == 0 || h <= prev {
                return Err(CoreError::InvalidParameter(format!(
                    "horizons must be positive and strictly increasing (saw {h} after {prev})"
                )));
            }
            if h % self.step_hours != 0 {
                return Err(CoreError::InvalidParameter(format!(
                    "horizon {h} is not a multiple of step_hours {}",
                    self.step_hours
                )));
            }
            prev = h;
        }
        if self.day_start_hour >= self.day_end_hour || self.day_end_hour > 24 {
            return Err(CoreError::InvalidParameter(format!(
                "day window [{}, {}) is not a valid hour range",
                self.day_start_hour, self.day_end_hour
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u32 {
        self.horizons.last().copied().unwrap_or(0) / self.step_hours
    }

    /// Local wall-clock at the start of step `step_index`.
    pub fn step_start(&self, step_index: u32) -> DateTime<FixedOffset> {
        self.last_seen_local + Duration::hours((step_index * self.step_hours) as i64)
    }

    /// True when step `step_index` begins during daytime hours.
    pub fn is_day_step(&self, step_index: u32) -> bool {
        let hour = self.step_start(step_index).hour();
        (self.day_start_hour..self.day_end_hour).contains(&hour)
    }
}

/// Half-life survival weight w(t) = 2^(-t / half_life). An infinite
/// half-life means no decay. Exact at the anchors: w(0) = 1,
/// w(T) = 0.5, w(2T) = 0.25.
pub fn survival_weight(t_hours: f64, half_life_hours: f64) -> Result<f64> {
    if !(t_hours.is_finite() && t_hours >= 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "elapsed time {t_hours} must be non-negative"
        )));
    }
    if half_life_hours.is_nan() || half_life_hours <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "half-life {half_life_hours} must be positive"
        )));
    }
    if half_life_hours.is_infinite() {
        return Ok(1.0);
    }
    Ok(f64::exp2(-t_hours / half_life_hours))
}

/// All per-horizon snapshots plus the survival-blended cumulative field.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub start: ProbabilityField,
    pub by_horizon: BTreeMap<u32, ProbabilityField>,
    pub cumulative: ProbabilityField,
    pub survival_weights: BTreeMap<u32, f64>,
}

impl ForecastSet {
    pub fn horizon(&self, hours: u32) -> Result<&ProbabilityField> {
        self.by_horizon
            .get(&hours)
            .ok_or(CoreError::MissingHorizon { horizon: hours })
    }
}

/// Zero out masked cells and renormalize; errors if nothing remains.
pub fn apply_mask(grid: &Grid, values: &mut [f64]) -> Result<()> {
    let mut total = 0.0;
    for (i, v) in values.iter_mut().enumerate() {
        if !grid.is_in_mask(i) {
            *v = 0.0;
        } else {
            total += *v;
        }
    }
    if total <= 0.0 {
        return Err(CoreError::AllMassMasked);
    }
    values.iter_mut().for_each(|v| *v /= total);
    Ok(())
}

/// Run the full forecast: sequential horizon snapshots and cumulative blend.
///
/// `horizon_weights` are the gamma coefficients, one per horizon (earlier
/// windows typically weighted higher).
pub fn run_forecast(
    grid: &Grid,
    pair: &TransitionPair,
    start: &ProbabilityField,
    schedule: &HorizonSchedule,
    half_life_hours: f64,
    horizon_weights: &[f64],
) -> Result<ForecastSet> {
    schedule.validate()?;
    start.validate(grid)?;
    if horizon_weights.len() != schedule.horizons.len() {
        return Err(CoreError::LengthMismatch {
            expected: schedule.horizons.len(),
            actual: horizon_weights.len(),
        });
    }
    if horizon_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(CoreError::InvalidParameter(
            "horizon weights must be finite and non-negative".into(),
        ));
    }

    let mut p = start.values.clone();
    let mut by_horizon = BTreeMap::new();
    let mut survival_weights = BTreeMap::new();
    let mut next_snapshot = 0usize;
    let n_steps = schedule.n_steps();
    for step in 0..n_steps {
        let matrix = if schedule.is_day_step(step) {
            &pair.day
        } else {
            &pair.night
        };
        let before: f64 = p.iter().sum();
        p = matrix.propagate(&p)?;
        let after: f64 = p.iter().sum();
        if (after - before).abs() > 1e-9 {
            return Err(CoreError::NonFiniteValue {
                context: format!(
                    "propagation step {step} changed total mass by {}",
                    after - before
                ),
            });
        }
        apply_mask(grid, &mut p)?;
        let elapsed = (step + 1) * schedule.step_hours;
        if next_snapshot < schedule.horizons.len() && elapsed == schedule.horizons[next_snapshot] {
            let field = ProbabilityField::new(p.clone(), Some(FieldTag::Horizon(elapsed)));
            field.validate(grid)?;
            by_horizon.insert(elapsed, field);
            survival_weights.insert(elapsed, survival_weight(elapsed as f64, half_life_hours)?);
            next_snapshot += 1;
        }
    }

    let mut cumulative = vec![0.0; grid.n_cells()];
    for (&h, gamma) in schedule.horizons.iter().zip(horizon_weights) {
        let w = survival_weights[&h];
        let field = &by_horizon[&h];
        for (c, &v) in cumulative.iter_mut().zip(&field.values) {
            *c += gamma * w * v;
        }
    }
    apply_mask(grid, &mut cumulative)?;
    let cumulative = ProbabilityField::new(cumulative, Some(FieldTag::Cumulative));
    cumulative.validate(grid)?;

    Ok(ForecastSet {
        start: ProbabilityField::new(start.values.clone(), Some(FieldTag::Start)),
        by_horizon,
        cumulative,
        survival_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::gaussian_seed;
    use crate::layers::synth_layers;
    use crate::testutil::{g5_center, g5_grid, t0_0358, t0_1000};
    use crate::transition::{build_pair, TransitionParams};
    use approx::assert_relative_eq;

    fn schedule(horizons: &[u32], t0: DateTime<FixedOffset>) -> HorizonSchedule {
        HorizonSchedule {
            step_hours: 3,
            horizons: horizons.to_vec(),
            last_seen_local: t0,
            day_start_hour: 6,
            day_end_hour: 18,
        }
    }

    fn pair_for(grid: &crate::grid::Grid, seed: u64) -> TransitionPair {
        let layers = synth_layers(grid, seed);
        let day = TransitionParams {
            beta_d: 0.02,
            beta_r: 1.0,
            beta_s: 0.5,
            beta_c: 1.2,
            self_loop: 0.2,
        };
        let night = TransitionParams {
            beta_d: 0.05,
            beta_r: 1.4,
            beta_s: 1.0,
            beta_c: 0.6,
            self_loop: 0.35,
        };
        build_pair(grid, &layers, &day, &night).unwrap()
    }

    #[test]
    fn schedule_validation() {
        let mut s = schedule(&[24, 48, 72], t0_0358());
        s.validate().unwrap();
        s.step_hours = 5; // 24 % 5 != 0
        assert!(s.validate().is_err());
        s.step_hours = 3;
        s.horizons = vec![24, 24];
        assert!(s.validate().is_err());
        s.horizons = vec![25];
        assert!(s.validate().is_err());
        s.horizons = vec![24];
        s.day_start_hour = 19;
        assert!(s.validate().is_err());
    }

    #[test]
    fn day_night_pattern_from_0358() {
        // Steps start at 03:58, 06:58, ..., 00:58: night, then four day
        // steps, then three night steps across the first 24 hours.
        let s = schedule(&[24], t0_0358());
        let pattern: Vec<bool> = (0..8).map(|i| s.is_day_step(i)).collect();
        assert_eq!(
            pattern,
            vec![false, true, true, true, true, false, false, false]
        );
    }

    #[test]
    fn day_night_pattern_from_1000() {
        // 10:00, 13:00, 16:00 are day; 19:00, 22:00, 01:00, 04:00 night;
        // 07:00 day again.
        let s = schedule(&[24], t0_1000());
        let pattern: Vec<bool> = (0..8).map(|i| s.is_day_step(i)).collect();
        assert_eq!(
            pattern,
            vec![true, true, true, false, false, false, false, true]
        );
    }

    #[test]
    fn survival_anchor_values_are_exact() {
        assert_eq!(survival_weight(0.0, 36.0).unwrap(), 1.0);
        assert_eq!(survival_weight(36.0, 36.0).unwrap(), 0.5);
        assert_eq!(survival_weight(72.0, 36.0).unwrap(), 0.25);
        assert_eq!(survival_weight(24.0, f64::INFINITY).unwrap(), 1.0);
        assert_relative_eq!(
            survival_weight(24.0, 36.0).unwrap(),
            f64::exp2(-24.0 / 36.0),
            max_relative = 1e-15
        );
        assert!(survival_weight(-1.0, 36.0).is_err());
        assert!(survival_weight(1.0, 0.0).is_err());
    }

    #[test]
    fn forecast_conserves_probability_at_every_horizon() {
        let grid = g5_grid(4);
        let pair = pair_for(&grid, 7);
        let start = gaussian_seed(&grid, g5_center(), 20.0).unwrap();
        let s = schedule(&[24, 48, 72], t0_0358());
        let f = run_forecast(&grid, &pair, &start, &s, 36.0, &[1.0, 0.7, 0.5]).unwrap();
        for (h, field) in &f.by_horizon {
            field.validate(&grid).unwrap();
            assert!((field.total() - 1.0).abs() < 1e-9, "horizon {h}");
        }
        f.cumulative.validate(&grid).unwrap();
        assert_eq!(f.by_horizon.len(), 3);
    }

    #[test]
    fn later_horizons_continue_from_earlier_ones() {
        // Requesting [24, 48] must give the same 48 h field as requesting
        // [48] alone: snapshots are taken along one evolving trajectory.
        let grid = g5_grid(4);
        let pair = pair_for(&grid, 3);
        let start = gaussian_seed(&grid, g5_center(), 15.0).unwrap();
        let both = run_forecast(
            &grid,
            &pair,
            &start,
            &schedule(&[24, 48], t0_0358()),
            36.0,
            &[1.0, 0.7],
        )
        .unwrap();
        let only48 = run_forecast(
            &grid,
            &pair,
            &start,
            &schedule(&[48], t0_0358()),
            36.0,
            &[1.0],
        )
        .unwrap();
        assert_eq!(both.by_horizon[&48].values, only48.by_horizon[&48].values);
    }

    #[test]
    fn cumulative_matches_weighted_blend_oracle() {
        let grid = g5_grid(4);
        let pair = pair_for(&grid, 9);
        let start = gaussian_seed(&grid, g5_center(), 25.0).unwrap();
        let s = schedule(&[24, 48, 72], t0_0358());
        let gammas = [1.0, 0.7, 0.5];
        let f = run_forecast(&grid, &pair, &start, &s, 36.0, &gammas).unwrap();
        let mut expect = vec![0.0; 25];
        for (k, &h) in s.horizons.iter().enumerate() {
            let w = survival_weight(h as f64, 36.0).unwrap();
            for (e, &v) in expect.iter_mut().zip(&f.by_horizon[&h].values) {
                *e += gammas[k] * w * v;
            }
        }
        let z: f64 = expect.iter().sum();
        for (a, b) in f.cumulative.values.iter().zip(&expect) {
            assert_relative_eq!(a, &(b / z), max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn day_night_selection_changes_the_answer() {
        // A pair with distinct night parameters must differ from a pair that
        // uses the day matrix around the clock.
        let grid = g5_grid(4);
        let layers = synth_layers(&grid, 5);
        let day = TransitionParams {
            beta_d: 0.02,
            beta_r: 1.0,
            beta_s: 0.5,
            beta_c: 1.2,
            self_loop: 0.2,
        };
        let night = TransitionParams {
            beta_d: 0.08,
            beta_r: 1.5,
            beta_s: 1.2,
            beta_c: 0.3,
            self_loop: 0.5,
        };
        let mixed = build_pair(&grid, &layers, &day, &night).unwrap();
        let all_day = build_pair(&grid, &layers, &day, &day).unwrap();
        let start = gaussian_seed(&grid, g5_center(), 20.0).unwrap();
        let s = schedule(&[24], t0_0358());
        let a = run_forecast(&grid, &mixed, &start, &s, 36.0, &[1.0]).unwrap();
        let b = run_forecast(&grid, &all_day, &start, &s, 36.0, &[1.0]).unwrap();
        let max_diff = a.by_horizon[&24]
            .values
            .iter()
            .zip(&b.by_horizon[&24].values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_diff > 1e-6, "day/night parameters had no effect");
    }

    #[test]
    fn masked_cells_stay_exactly_zero() {
        use crate::geo::Polygon;
        use crate::grid::{build_grid, knn_adjacency};
        let spec = crate::testutil::g5_spec();
        let boundary = Polygon::rect(-1.0, 3.49, -90.0, 90.0).unwrap();
        let grid = knn_adjacency(build_grid(spec, &boundary).unwrap(), 4);
        let pair = pair_for(&grid, 2);
        let start = gaussian_seed(&grid, g5_center(), 20.0).unwrap();
        let s = schedule(&[24, 48], t0_0358());
        let f = run_forecast(&grid, &pair, &start, &s, 36.0, &[1.0, 0.7]).unwrap();
        for field in f.by_horizon.values().chain([&f.cumulative]) {
            for i in 0..grid.n_cells() {
                if !grid.is_in_mask(i) {
                    assert_eq!(field.values[i], 0.0, "cell {i} leaked mass");
                }
            }
        }
    }

    #[test]
    fn missing_horizon_lookup_errors() {
        let grid = g5_grid(4);
        let pair = pair_for(&grid, 7);
        let start = gaussian_seed(&grid, g5_center(), 20.0).unwrap();
        let s = schedule(&[24], t0_0358());
        let f = run_forecast(&grid, &pair, &start, &s, 36.0, &[1.0]).unwrap();
        assert!(f.horizon(24).is_ok());
        assert!(matches!(
            f.horizon(48),
            Err(CoreError::MissingHorizon { horizon: 48 })
        ));
    }

    #[test]
    fn weight_length_mismatch_errors() {
        let grid = g5_grid(4);
        let pair = pair_for(&grid, 7);
        let start = gaussian_seed(&grid, g5_center(), 20.0).unwrap();
        let s = schedule(&[24, 48], t0_0358());
        assert!(matches!(
            run_forecast(&grid, &pair, &start, &s, 36.0, &[1.0]),
            Err(CoreError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn spread_increases_with_time() {
        // Entropy of the belief should grow from 24 h to 72 h on a grid this
        // small with diffusive dynamics.
        let grid = g5_grid(4);
        let pair = pair_for(&grid, 7);
        let start = gaussian_seed(&grid, g5_center(), 10.0).unwrap();
        let s = schedule(&[24, 72], t0_0358());
        let f = run_forecast(&grid, &pair, &start, &s, 36.0, &[1.0, 0.5]).unwrap();
        let entropy =
            |v: &[f64]| -> f64 { v.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum() };
        assert!(entropy(&start.values) < entropy(&f.by_horizon[&24].values));
    }
}
