//! Two-stage coordinated dispatch: a day-ahead baseline (arbitrage for
//! physical storage, customer baseline for virtual storage) that real-time
//! operation follows in normal hours, departs from in emergencies and
//! returns to during recovery.

use crate::dispatch::{OperatingState, UnitView};
use crate::ges::{response_discomfort, DduDistribution, GesUnit};
use crate::model::SystemModel;

/// Baseline SoC follows the customer's own consumption:
/// `bs' = clamp((1-eps) bs + (eta_c Pc - Pd/eta_d)/S, lo_t, hi_t)`.
/// Returns `horizon + 1` values starting at `start`.
pub fn ves_baseline_trajectory(
    unit: &GesUnit,
    start: f64,
    charge_mw: &[f64],
    discharge_mw: &[f64],
    soc_min: &[f64],
    soc_max: &[f64],
) -> Vec<f64> {
    let mut bs = Vec::with_capacity(charge_mw.len() + 1);
    let mut s = start;
    bs.push(s);
    let energy = unit.energy_rated;
    for t in 0..charge_mw.len() {
        s *= 1.0 - unit.self_discharge;
        if energy > 0.0 {
            s += (unit.eta_c * charge_mw[t] - discharge_mw[t] / unit.eta_d) / energy;
        }
        s = s.clamp(soc_min[t], soc_max[t].max(soc_min[t]));
        bs.push(s);
    }
    bs
}

/// Baseline trajectory with mean consumption and mean comfort bounds.
pub fn expected_ves_baseline(model: &SystemModel, unit: &GesUnit) -> Vec<f64> {
    let h = model.horizon();
    match &unit.diu {
        Some(diu) => {
            let c: Vec<f64> = (0..h).map(|t| model.profile_at(&diu.baseline_charge, t) * unit.p_charge_max).collect();
            let d: Vec<f64> =
                (0..h).map(|t| model.profile_at(&diu.baseline_discharge, t) * unit.p_discharge_max).collect();
            let lo = model.profile_values(&diu.soc_min_mean);
            let hi = model.profile_values(&diu.soc_max_mean);
            ves_baseline_trajectory(unit, unit.soc_init, &c, &d, &lo, &hi)
        }
        None => vec![unit.soc_init; h + 1],
    }
}

/// Normal when the unit sits on its baseline, recovery otherwise.
pub fn classify(residual_capacity: f64, soc_rt: &[f64], soc_baseline: &[f64]) -> OperatingState {
    if residual_capacity < 0.0 {
        OperatingState::Emergency
    } else if soc_rt.iter().zip(soc_baseline).any(|(a, b)| (a - b).abs() > BASELINE_TOL) {
        OperatingState::Recovery
    } else {
        OperatingState::Normal
    }
}

pub const BASELINE_TOL: f64 = 1e-6;

/// Moves a unit back toward its baseline SoC. Charging is limited by power,
/// the SoC gap and the unit's share of residual capacity; discharging only by
/// power and the gap.
pub fn recovery_action(
    unit: &GesUnit,
    view: &UnitView,
    baseline_next: f64,
    residual_capacity: f64,
) -> (f64, f64) {
    if !view.on || view.energy <= 0.0 {
        return (0.0, 0.0);
    }
    let gap = baseline_next - view.free_soc;
    if gap > BASELINE_TOL * 1e-3 {
        let c = unit
            .p_charge_max
            .min(gap * view.energy / unit.eta_c)
            .min(unit.capacity_share * residual_capacity.max(0.0))
            .min(view.max_charge(unit));
        (c.max(0.0), 0.0)
    } else if gap < -BASELINE_TOL * 1e-3 {
        let d = unit.p_discharge_max.min(-gap * view.energy * unit.eta_d).min(view.max_discharge(unit));
        (0.0, d.max(0.0))
    } else {
        (0.0, 0.0)
    }
}

/// SoC floor that the realized DDU lower bound stays below with probability
/// at least `1 - gamma`.
pub fn chance_floor(dist: &DduDistribution, gamma: f64, diu_min: f64, unit: &GesUnit, rd: f64) -> f64 {
    match &unit.ddu {
        Some(p) if !dist.is_empty() => dist.lower_quantile(1.0 - gamma, diu_min, p, rd),
        _ => diu_min,
    }
}

/// What the dispatcher knows about one unit during a chance-constrained
/// emergency hour.
#[derive(Debug, Clone)]
pub struct ChanceUnit<'a> {
    pub unit: &'a GesUnit,
    /// View with the plain (DIU) floor.
    pub view: UnitView,
    /// Model shocks; `None` disables the chance floor for this unit.
    pub dist: Option<&'a DduDistribution>,
    pub diu_min: f64,
    pub charge_history: &'a [f64],
    pub discharge_history: &'a [f64],
    pub baseline_next: f64,
}

impl ChanceUnit<'_> {
    /// Discomfort after discharging `d` this hour.
    pub fn discomfort_after(&self, d: f64) -> f64 {
        let mut dh = self.discharge_history.to_vec();
        dh.push(d);
        let mut ch = self.charge_history.to_vec();
        ch.push(0.0);
        let soc = self.view.soc_after(self.unit, 0.0, d);
        response_discomfort(&ch, &dh, soc, self.baseline_next, self.unit, 24.0)
    }
}

pub const FIXED_POINT_DAMPING: f64 = 0.5;
pub const FIXED_POINT_TOL: f64 = 1e-4;
pub const FIXED_POINT_MAX_ITER: usize = 10;

#[derive(Debug, Clone)]
pub struct FixedPointOutcome<R> {
    pub result: R,
    pub floors: Vec<f64>,
    pub discharges: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Resolves the dependence of the chance floor on the decision: the floor
/// depends on discomfort, which depends on the discharge the floor allows.
/// `solve` maps per-unit floors to a result and per-unit discharges.
pub fn chance_fixed_point<R>(
    units: &[ChanceUnit<'_>],
    gamma: f64,
    mut solve: impl FnMut(&[f64]) -> (R, Vec<f64>),
) -> FixedPointOutcome<R> {
    let floor_at = |u: &ChanceUnit<'_>, rd: f64| match u.dist {
        Some(dist) => chance_floor(dist, gamma, u.diu_min, u.unit, rd),
        None => u.view.floor,
    };
    let mut rd: Vec<f64> = units.iter().map(|u| u.discomfort_after(0.0)).collect();
    let mut worst: Vec<f64> = vec![f64::NEG_INFINITY; units.len()];
    for k in 0..FIXED_POINT_MAX_ITER {
        let floors: Vec<f64> = units.iter().zip(&rd).map(|(u, &r)| floor_at(u, r)).collect();
        for (w, f) in worst.iter_mut().zip(&floors) {
            *w = w.max(*f);
        }
        let (result, discharges) = solve(&floors);
        let mut delta: f64 = 0.0;
        for (i, u) in units.iter().enumerate() {
            if u.dist.is_none() {
                continue;
            }
            let next = FIXED_POINT_DAMPING * rd[i] + (1.0 - FIXED_POINT_DAMPING) * u.discomfort_after(discharges[i]);
            delta = delta.max((next - rd[i]).abs());
            rd[i] = next;
        }
        if delta < FIXED_POINT_TOL {
            return FixedPointOutcome { result, floors, discharges, iterations: k + 1, converged: true };
        }
    }
    let (result, discharges) = solve(&worst);
    FixedPointOutcome { result, floors: worst, discharges, iterations: FIXED_POINT_MAX_ITER, converged: false }
}
