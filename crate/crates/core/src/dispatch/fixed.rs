//! Fixed peak-shaving dispatch: a day-ahead LP per bus that minimizes the
//! bus's peak net load, frozen for the whole evaluation.

use crate::dispatch::coordinated::expected_ves_baseline;
use crate::dispatch::{bits_key, DispatchPlan, PlanCache, UncertaintyMode};
use crate::error::{Error, Result};
use crate::ges::GesUnit;
use crate::lp::{solve_lp, LpProblem, LpStatus, RowKind};
use crate::model::SystemModel;

const ACTION_COST: f64 = 1e-6;

/// One unit inside a bus LP. `x` is the SoC for physical storage and the
/// deviation from the expected baseline for virtual storage.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageWindow<'a> {
    pub unit: &'a GesUnit,
    pub energy: f64,
    pub self_discharge: f64,
    pub x0: f64,
    /// Bounds on `x` at the end of each hour.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Minimizes the peak of `net_load + sum(charge - discharge)` over the window
/// with the end state equal to the start state.
pub fn peak_shaving_plan(net_load: &[f64], units: &[StorageWindow<'_>]) -> Result<DispatchPlan> {
    let h = net_load.len();
    let mut p = LpProblem::new();
    let pk = p.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
    let mut cols = Vec::with_capacity(units.len());
    for w in units {
        let active = w.energy > 0.0 && (w.unit.p_charge_max > 0.0 || w.unit.p_discharge_max > 0.0);
        if !active {
            cols.push(None);
            continue;
        }
        let mut cd = Vec::with_capacity(h);
        let mut prev: Option<usize> = None;
        for t in 0..h {
            let c = p.add_var(0.0, w.unit.p_charge_max, ACTION_COST);
            let d = p.add_var(0.0, w.unit.p_discharge_max, ACTION_COST);
            let (lo, hi) = if t + 1 == h { (w.x0, w.x0) } else { (w.lo[t], w.hi[t]) };
            let x = p.add_var(lo, hi, 0.0);
            let mut coeffs = vec![
                (x, 1.0),
                (c, -w.unit.eta_c / w.energy),
                (d, 1.0 / (w.unit.eta_d * w.energy)),
            ];
            let rhs = match prev {
                Some(xp) => {
                    coeffs.push((xp, -(1.0 - w.self_discharge)));
                    0.0
                }
                None => (1.0 - w.self_discharge) * w.x0,
            };
            p.add_row(coeffs, RowKind::Eq, rhs);
            prev = Some(x);
            cd.push((c, d, x));
        }
        cols.push(Some(cd));
    }
    for (t, &load) in net_load.iter().enumerate() {
        let mut coeffs = vec![(pk, -1.0)];
        for cd in cols.iter().flatten() {
            coeffs.push((cd[t].0, 1.0));
            coeffs.push((cd[t].1, -1.0));
        }
        p.add_row(coeffs, RowKind::Le, -load);
    }
    let sol = solve_lp(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("peak-shaving LP is {:?}; SoC targets unreachable", sol.status)));
    }
    let mut plan = DispatchPlan { peak: vec![sol.x[pk]], ..Default::default() };
    for (w, cd) in units.iter().zip(&cols) {
        match cd {
            Some(cd) => {
                plan.charge.push(cd.iter().map(|v| sol.x[v.0].max(0.0)).collect());
                plan.discharge.push(cd.iter().map(|v| sol.x[v.1].max(0.0)).collect());
                let mut soc = vec![w.x0];
                soc.extend(cd.iter().map(|v| sol.x[v.2]));
                plan.soc.push(soc);
            }
            None => {
                plan.charge.push(vec![0.0; h]);
                plan.discharge.push(vec![0.0; h]);
                plan.soc.push(vec![w.x0; h + 1]);
            }
        }
    }
    plan.enforce_complementarity();
    Ok(plan)
}

/// Scenario-independent inputs of the fixed schedule.
#[derive(Debug, Clone)]
pub struct FixedInputs {
    /// Expected net load per bus over the horizon, MW.
    pub net_load: Vec<Vec<f64>>,
    /// Expected baseline SoC per virtual unit (`None` for physical or U1).
    pub baseline: Vec<Option<Vec<f64>>>,
    pub soc_min: Vec<Vec<f64>>,
    pub soc_max: Vec<Vec<f64>>,
}

pub fn fixed_inputs(model: &SystemModel, mode: UncertaintyMode) -> FixedInputs {
    let h = model.horizon();
    let mut net_load = model.bus_loads();
    for u in &model.rg_units {
        let avail = if u.mttf + u.mttr > 0.0 { u.mttf / (u.mttf + u.mttr) } else { 1.0 };
        let cf = &model.series[&u.capacity_factor_series];
        for (t, v) in net_load[u.bus].iter_mut().enumerate() {
            *v -= u.capacity * cf[t % cf.len()] * avail;
        }
    }
    let mut baseline = Vec::new();
    let mut soc_min = Vec::new();
    let mut soc_max = Vec::new();
    for unit in &model.ges_units {
        match (&unit.diu, mode) {
            (Some(diu), UncertaintyMode::U2 | UncertaintyMode::U3) if unit.is_virtual() => {
                baseline.push(Some(expected_ves_baseline(model, unit)));
                soc_min.push(model.profile_values(&diu.soc_min_mean));
                soc_max.push(model.profile_values(&diu.soc_max_mean));
            }
            _ => {
                baseline.push(None);
                soc_min.push(vec![unit.soc_min; h]);
                soc_max.push(vec![unit.soc_max; h]);
            }
        }
    }
    FixedInputs { net_load, baseline, soc_min, soc_max }
}

/// The frozen schedule for one day, all units in model order. `peak` lists
/// buses with storage in increasing bus order.
pub fn fixed_dispatch_schedule(
    model: &SystemModel,
    inputs: &FixedInputs,
    mode: UncertaintyMode,
    day: usize,
    cache: &PlanCache,
) -> Result<DispatchPlan> {
    let h = model.horizon();
    let start = day * 24;
    if start >= h {
        return Err(Error::invariant("day within horizon", format!("day {day}, horizon {h}")));
    }
    let end = (start + 24).min(h);
    let n = model.ges_units.len();
    let mut plan = DispatchPlan {
        charge: vec![Vec::new(); n],
        discharge: vec![Vec::new(); n],
        soc: vec![Vec::new(); n],
        ..Default::default()
    };
    let mut buses: Vec<usize> = model.ges_units.iter().map(|g| g.bus).collect();
    buses.sort_unstable();
    buses.dedup();
    for bus in buses {
        let members: Vec<usize> = (0..n).filter(|&g| model.ges_units[g].bus == bus).collect();
        let windows: Vec<StorageWindow<'_>> = members
            .iter()
            .map(|&g| unit_window(model, inputs, mode, g, start, end))
            .collect();
        let load = &inputs.net_load[bus][start..end];
        let mut key_parts: Vec<Vec<f64>> = vec![load.to_vec()];
        for w in &windows {
            let u = w.unit;
            key_parts.push(vec![
                w.energy, w.self_discharge, w.x0, u.p_charge_max, u.p_discharge_max, u.eta_c, u.eta_d,
            ]);
            key_parts.push(w.lo.clone());
            key_parts.push(w.hi.clone());
        }
        let refs: Vec<&[f64]> = key_parts.iter().map(Vec::as_slice).collect();
        let bus_plan = cache.get_or_insert_with(bits_key(&refs), || peak_shaving_plan(load, &windows))?;
        plan.peak.push(bus_plan.peak[0]);
        for (k, &g) in members.iter().enumerate() {
            plan.charge[g] = bus_plan.charge[k].clone();
            plan.discharge[g] = bus_plan.discharge[k].clone();
            plan.soc[g] = bus_plan.soc[k].clone();
        }
    }
    Ok(plan)
}

fn unit_window<'a>(
    model: &'a SystemModel,
    inputs: &FixedInputs,
    mode: UncertaintyMode,
    g: usize,
    start: usize,
    end: usize,
) -> StorageWindow<'a> {
    let unit = &model.ges_units[g];
    let (energy, eps) = match mode {
        UncertaintyMode::U1 => (unit.energy_rated, 0.0),
        _ => (unit.energy_available(0.0), unit.self_discharge),
    };
    let (x0, lo, hi) = match &inputs.baseline[g] {
        Some(bs) => (
            0.0,
            (start..end).map(|t| (inputs.soc_min[g][t] - bs[t + 1]).min(0.0)).collect(),
            (start..end).map(|t| (inputs.soc_max[g][t] - bs[t + 1]).max(0.0)).collect(),
        ),
        None => (
            unit.soc_init,
            inputs.soc_min[g][start..end].to_vec(),
            inputs.soc_max[g][start..end].to_vec(),
        ),
    };
    StorageWindow { unit, energy, self_discharge: eps, x0, lo, hi }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ges::{Availability, GesKind};

    pub(crate) fn es(power: f64, energy: f64) -> GesUnit {
        GesUnit {
            kind: GesKind::EsR,
            bus: 0,
            p_charge_max: power,
            p_discharge_max: power,
            energy_rated: energy,
            eta_c: 1.0,
            eta_d: 1.0,
            self_discharge: 0.0,
            soc_init: 0.5,
            soc_min: 0.0,
            soc_max: 1.0,
            availability: Availability::ForcedOutage { rate: 0.0 },
            degradation: None,
            ddu: None,
            diu: None,
            capacity_share: 1.0,
        }
    }

    fn window(unit: &GesUnit) -> StorageWindow<'_> {
        StorageWindow {
            unit,
            energy: unit.energy_rated,
            self_discharge: unit.self_discharge,
            x0: unit.soc_init,
            lo: vec![unit.soc_min; 24],
            hi: vec![unit.soc_max; 24],
        }
    }

    #[test]
    fn one_peak_hour_is_shaved() {
        let unit = es(30.0, 120.0);
        let mut load = vec![100.0; 24];
        load[17] = 150.0;
        let plan = peak_shaving_plan(&load, &[window(&unit)]).unwrap();
        assert!((plan.peak[0] - 120.0).abs() < 1e-7);
        assert!((plan.discharge[0][17] - 30.0).abs() < 1e-7);
        assert!((plan.soc[0][24] - plan.soc[0][0]).abs() < 1e-8);
    }

    #[test]
    fn empty_storage_leaves_peak() {
        let unit = es(0.0, 0.0);
        let load: Vec<f64> = (0..24).map(|t| 50.0 + t as f64).collect();
        let plan = peak_shaving_plan(&load, &[window(&unit)]).unwrap();
        assert!((plan.peak[0] - 73.0).abs() < 1e-9);
    }

    #[test]
    fn lossy_unit_returns_to_start() {
        let mut unit = es(20.0, 60.0);
        unit.eta_c = 0.9;
        unit.eta_d = 0.9;
        unit.self_discharge = 0.01;
        let load: Vec<f64> = (0..24).map(|t| 80.0 + 30.0 * ((t as f64) / 24.0 * 6.28).sin()).collect();
        let plan = peak_shaving_plan(&load, &[window(&unit)]).unwrap();
        assert!((plan.soc[0][24] - 0.5).abs() < 1e-8);
        let peak = (0..24)
            .map(|t| load[t] + plan.charge[0][t] - plan.discharge[0][t])
            .fold(f64::MIN, f64::max);
        assert!(peak <= plan.peak[0] + 1e-7);
        assert!(plan.peak[0] < 110.0 - 1.0);
    }
}
