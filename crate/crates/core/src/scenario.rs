//! One sampled year: component availability, renewable output, customer
//! behaviour of virtual storage, and the random shocks the storage sees.

use std::sync::Arc;

use crate::ges::{draw_ddu_shock, Availability, DduShock, GesUnit};
use crate::model::SystemModel;
use crate::rng::{derive_stream, lognormal_params, sample_two_state_path, DistributionKind, RandomStream};
use crate::tags;

/// Realized customer behaviour of one virtual unit.
#[derive(Debug, Clone, PartialEq)]
pub struct VesDraws {
    /// Baseline consumption, MW.
    pub baseline_charge_mw: Vec<f64>,
    pub baseline_discharge_mw: Vec<f64>,
    /// Comfort bounds at the start of each hour.
    pub soc_min: Vec<f64>,
    pub soc_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioState {
    pub year_index: u64,
    pub cg_on: Vec<Vec<bool>>,
    pub rg_on: Vec<Vec<bool>>,
    pub rg_available_mw: Vec<Vec<f64>>,
    pub line_on: Vec<Vec<bool>>,
    /// Bus loads, MW; shared between scenarios of one model.
    pub load_mw: Arc<Vec<Vec<f64>>>,
    pub ges_on: Vec<Vec<bool>>,
    /// Per GES unit; `None` for physical storage.
    pub ves_diu_draws: Vec<Option<VesDraws>>,
    /// Degradation randomness, one draw per unit per day.
    pub kappa: Vec<Vec<f64>>,
    /// Realized incentive/discomfort shocks per unit per hour.
    pub ddu_shocks: Vec<Vec<DduShock>>,
}

impl ScenarioState {
    pub fn horizon(&self) -> usize {
        self.load_mw.first().map_or(0, Vec::len)
    }
}

pub fn build_scenario(model: &SystemModel, year_index: u64, master_seed: u64) -> ScenarioState {
    build_scenario_with_loads(model, Arc::new(model.bus_loads()), year_index, master_seed)
}

/// As [`build_scenario`], reusing precomputed bus loads.
pub fn build_scenario_with_loads(
    model: &SystemModel,
    load_mw: Arc<Vec<Vec<f64>>>,
    year_index: u64,
    master_seed: u64,
) -> ScenarioState {
    let h = model.horizon();
    let y = year_index;
    let cg_on = model
        .cg_units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let mut s = derive_stream(master_seed, &tags![y, "cg", i]);
            sample_two_state_path(u.mttf, u.mttr, h, &mut s)
        })
        .collect();
    let mut rg_on = Vec::with_capacity(model.rg_units.len());
    let mut rg_available_mw = Vec::with_capacity(model.rg_units.len());
    for (i, u) in model.rg_units.iter().enumerate() {
        let mut s = derive_stream(master_seed, &tags![y, "rg", i]);
        let on = sample_two_state_path(u.mttf, u.mttr, h, &mut s);
        let cf = &model.series[&u.capacity_factor_series];
        rg_available_mw.push(
            (0..h)
                .map(|t| if on[t] { u.capacity * cf[t] } else { 0.0 })
                .collect(),
        );
        rg_on.push(on);
    }
    let line_on = model
        .lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut s = derive_stream(master_seed, &tags![y, "line", i]);
            sample_two_state_path(l.mttf, l.mttr, h, &mut s)
        })
        .collect();
    let mut ges_on = Vec::new();
    let mut ves_diu_draws = Vec::new();
    let mut kappa = Vec::new();
    let mut ddu_shocks = Vec::new();
    for (g, unit) in model.ges_units.iter().enumerate() {
        let mut s = derive_stream(master_seed, &tags![y, "ges-on", g]);
        ges_on.push(sample_availability(model, unit, h, &mut s));
        let mut s = derive_stream(master_seed, &tags![y, "diu", g]);
        ves_diu_draws.push(sample_diu(model, unit, h, &mut s));
        let mut s = derive_stream(master_seed, &tags![y, "kappa", g]);
        kappa.push(sample_kappa(unit, h.div_ceil(24), &mut s));
        let mut s = derive_stream(master_seed, &tags![y, "ddu", g]);
        ddu_shocks.push(match &unit.ddu {
            Some(p) if unit.is_virtual() => (0..h).map(|_| draw_ddu_shock(p, &mut s)).collect(),
            _ => vec![DduShock::NONE; h],
        });
    }
    ScenarioState {
        year_index,
        cg_on,
        rg_on,
        rg_available_mw,
        line_on,
        load_mw,
        ges_on,
        ves_diu_draws,
        kappa,
        ddu_shocks,
    }
}

fn sample_availability(model: &SystemModel, unit: &GesUnit, h: usize, s: &mut RandomStream) -> Vec<bool> {
    match &unit.availability {
        Availability::ForcedOutage { rate } => (0..h).map(|_| s.bernoulli(1.0 - rate)).collect(),
        Availability::OnProbability { profile } => {
            (0..h).map(|t| s.bernoulli(model.profile_at(profile, t))).collect()
        }
        Availability::TwoState { mttf, mttr } => sample_two_state_path(*mttf, *mttr, h, s),
    }
}

fn sample_diu(model: &SystemModel, unit: &GesUnit, h: usize, s: &mut RandomStream) -> Option<VesDraws> {
    if !unit.is_virtual() {
        return None;
    }
    let Some(diu) = &unit.diu else {
        return Some(VesDraws {
            baseline_charge_mw: vec![0.0; h],
            baseline_discharge_mw: vec![0.0; h],
            soc_min: vec![unit.soc_min; h],
            soc_max: vec![unit.soc_max; h],
        });
    };
    let lognormal = |mean: f64, s: &mut RandomStream| {
        if mean <= 0.0 {
            return 0.0;
        }
        let (mu, sigma) = lognormal_params(mean, diu.baseline_cov);
        s.sample(DistributionKind::Lognormal, mu, sigma).unwrap_or(mean)
    };
    let mut draws = VesDraws {
        baseline_charge_mw: Vec::with_capacity(h),
        baseline_discharge_mw: Vec::with_capacity(h),
        soc_min: Vec::with_capacity(h),
        soc_max: Vec::with_capacity(h),
    };
    for t in 0..h {
        let c = lognormal(model.profile_at(&diu.baseline_charge, t) * unit.p_charge_max, s);
        let d = lognormal(model.profile_at(&diu.baseline_discharge, t) * unit.p_discharge_max, s);
        let lo_mean = model.profile_at(&diu.soc_min_mean, t);
        let hi_mean = model.profile_at(&diu.soc_max_mean, t);
        let lo = (lo_mean + diu.soc_bound_sd * s.standard_normal()).clamp(0.0, 1.0);
        let hi = (hi_mean + diu.soc_bound_sd * s.standard_normal()).clamp(0.0, 1.0);
        draws.baseline_charge_mw.push(c);
        draws.baseline_discharge_mw.push(d);
        draws.soc_min.push(lo.min(hi));
        draws.soc_max.push(lo.max(hi));
    }
    Some(draws)
}

fn sample_kappa(unit: &GesUnit, days: usize, s: &mut RandomStream) -> Vec<f64> {
    match &unit.degradation {
        Some(d) => {
            let kind = DistributionKind::TruncatedNormal { lower: 0.0, upper: 1.0 };
            (0..days)
                .map(|_| s.sample(kind, d.kappa_mean, d.kappa_sd).unwrap_or(d.kappa_mean.clamp(0.0, 1.0)))
                .collect()
        }
        None => vec![0.0; days],
    }
}
