//! Chronological simulation of one scenario: hourly dispatch under the chosen
//! strategy, the DC OPF, and the replay of scheduled storage actions against
//! what the storage could actually deliver.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dispatch::arbitrage::arbitrage_schedule;
use crate::dispatch::coordinated::{
    chance_fixed_point, classify, recovery_action, ves_baseline_trajectory, ChanceUnit, BASELINE_TOL,
};
use crate::dispatch::fixed::{fixed_dispatch_schedule, fixed_inputs};
use crate::dispatch::greedy::greedy_normal_charge;
use crate::dispatch::{
    bits_key, solve_opf, HourlyDispatchResult, OperatingState, OpfInput, OpfResult, PlanCache, StorageOffer,
    Strategy, UncertaintyMode, UnitView,
};
use crate::error::{Error, Result};
use crate::ges::{ddu_lower, ddu_upper, degrade_alpha, response_discomfort, DduDistribution};
use crate::model::SystemModel;
use crate::network::{Network, PtdfCache};
use crate::rng::derive_stream;
use crate::scenario::ScenarioState;
use crate::tags;

/// Model shocks behind each chance-constrained floor.
pub const DDU_MODEL_SAMPLES: usize = 1000;
const MW_TOL: f64 = 1e-9;

/// Which curtailment LOLP counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexBasis {
    Theoretical,
    Practical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSettings {
    pub strategy: Strategy,
    pub mode: UncertaintyMode,
    pub years: usize,
    pub scenarios: usize,
    pub seed: u64,
    pub gamma: f64,
    pub lolp_basis: IndexBasis,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub record_curtailment: bool,
    /// Keep hour-by-hour storage operations of the first scenario-year.
    #[serde(skip)]
    pub trace_operations: bool,
}

impl RunSettings {
    pub fn from_study(model: &SystemModel, strategy: Strategy, mode: UncertaintyMode) -> Self {
        Self {
            strategy,
            mode,
            years: model.study.years,
            scenarios: model.study.scenarios,
            seed: model.study.seed,
            gamma: model.study.chance_level,
            lolp_basis: IndexBasis::Practical,
            threads: None,
            record_curtailment: false,
            trace_operations: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cause {
    GenerationDeficit,
    Congestion,
    StorageUnavailable,
}

impl Cause {
    pub fn label(self) -> &'static str {
        match self {
            Self::GenerationDeficit => "generation-deficit",
            Self::Congestion => "congestion",
            Self::StorageUnavailable => "storage-unavailable",
        }
    }
}

/// Curtailment in one hour of one scenario-year. Replay losses are kept in
/// separate records tagged [`Cause::StorageUnavailable`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurtailmentRecord {
    /// `scenario * years + year`.
    pub sample: usize,
    pub hour: usize,
    pub bus_mw: Vec<f64>,
    pub cause: Cause,
}

impl CurtailmentRecord {
    pub fn total(&self) -> f64 {
        self.bus_mw.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperationRow {
    pub hour: usize,
    pub unit: usize,
    pub soc: f64,
    pub charge: f64,
    pub discharge: f64,
    pub state: OperatingState,
}

/// Totals of one simulated year.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct YearOutcome {
    pub sample: usize,
    pub ens_theoretical: f64,
    pub ens_practical: f64,
    pub lolp_hours_theoretical: usize,
    pub lolp_hours_practical: usize,
    /// Storage discharge the dispatcher scheduled, MWh.
    pub scheduled_discharge: f64,
    pub emergency_hours: usize,
    /// Chance-constrained discharges of virtual units that were available.
    pub ddu_events: usize,
    /// Of those, discharges cut short by the realized DDU floor.
    pub ddu_violations: usize,
    pub lp_solves: usize,
    pub lp_warnings: usize,
    pub fixed_point_warnings: usize,
    pub records: Vec<CurtailmentRecord>,
    pub operations: Vec<OperationRow>,
    pub hourly: Vec<HourlyDispatchResult>,
}

/// What to keep besides the totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Collect {
    pub records: bool,
    pub operations: bool,
    pub hourly: bool,
}

/// Per-hour schedule of one unit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitSchedule {
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    /// SoC at the start and end of each hour.
    pub soc_start: Vec<f64>,
    pub soc_end: Vec<f64>,
}

/// Scenario-independent inputs of a run.
#[derive(Debug)]
pub struct Prepared {
    pub network: Network,
    pub loads: Arc<Vec<Vec<f64>>>,
    /// Frozen peak-shaving schedule (fixed strategy).
    pub fixed: Option<Vec<UnitSchedule>>,
    /// Arbitrage baselines of physical units (coordinated strategy).
    pub arbitrage: Vec<Option<UnitSchedule>>,
    pub ddu_model: Vec<Option<DduDistribution>>,
    pub plan_warnings: usize,
}

pub fn prepare(model: &SystemModel, settings: &RunSettings, cache: &PlanCache) -> Result<Prepared> {
    let h = model.horizon();
    let days = h.div_ceil(24);
    let mut plan_warnings = 0;
    let fixed = if settings.strategy == Strategy::Fixed {
        let inputs = fixed_inputs(model, settings.mode);
        let mut sched: Vec<UnitSchedule> = model
            .ges_units
            .iter()
            .map(|_| UnitSchedule { charge: vec![0.0; h], discharge: vec![0.0; h], ..Default::default() })
            .collect();
        for day in 0..days {
            match fixed_dispatch_schedule(model, &inputs, settings.mode, day, cache) {
                Ok(plan) => {
                    for (g, s) in sched.iter_mut().enumerate() {
                        for (k, t) in (day * 24..h.min(day * 24 + 24)).enumerate() {
                            s.charge[t] = plan.charge[g][k];
                            s.discharge[t] = plan.discharge[g][k];
                        }
                    }
                }
                Err(Error::Numerical(msg)) => {
                    log::warn!("day {day}: {msg}; storage idle");
                    plan_warnings += 1;
                }
                Err(e) => return Err(e),
            }
        }
        Some(sched)
    } else {
        None
    };
    let mut arbitrage = vec![None; model.ges_units.len()];
    if settings.strategy == Strategy::Coordinated {
        let prices: Vec<f64> = match &model.study.price_series {
            Some(name) => (0..h).map(|t| model.series[name][t % model.series[name].len()]).collect(),
            None => vec![0.0; h],
        };
        for (g, unit) in model.ges_units.iter().enumerate() {
            if unit.is_virtual() {
                continue;
            }
            let eps = if settings.mode == UncertaintyMode::U1 { 0.0 } else { unit.self_discharge };
            let mut s = UnitSchedule {
                charge: vec![0.0; h],
                discharge: vec![0.0; h],
                soc_start: vec![unit.soc_init; h],
                soc_end: vec![unit.soc_init; h],
            };
            for day in 0..days {
                let range = day * 24..h.min(day * 24 + 24);
                let p = &prices[range.clone()];
                let params = [
                    unit.soc_init, unit.energy_rated, eps, unit.p_charge_max, unit.p_discharge_max,
                    unit.eta_c, unit.eta_d, unit.soc_min, unit.soc_max,
                ];
                let plan = match cache.get_or_insert_with(bits_key(&[p, &params]), || {
                    arbitrage_schedule(unit, p, unit.soc_init, unit.energy_rated, eps)
                }) {
                    Ok(plan) => plan,
                    Err(Error::Numerical(msg)) => {
                        log::warn!("unit {g}, day {day}: {msg}; no arbitrage");
                        plan_warnings += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                for (k, t) in range.enumerate() {
                    s.charge[t] = plan.charge[0][k];
                    s.discharge[t] = plan.discharge[0][k];
                    s.soc_start[t] = plan.soc[0][k];
                    s.soc_end[t] = plan.soc[0][k + 1];
                }
            }
            arbitrage[g] = Some(s);
        }
    }
    let ddu_model = model
        .ges_units
        .iter()
        .enumerate()
        .map(|(g, u)| match &u.ddu {
            Some(p) if u.is_virtual() && settings.mode == UncertaintyMode::U3 => {
                let mut s = derive_stream(settings.seed, &tags!["ddu-model", g]);
                Some(DduDistribution::sample(p, DDU_MODEL_SAMPLES, &mut s))
            }
            _ => None,
        })
        .collect();
    Ok(Prepared {
        network: Network::from_model(model),
        loads: Arc::new(model.bus_loads()),
        fixed,
        arbitrage,
        ddu_model,
        plan_warnings,
    })
}

/// Additional unserved energy when scheduled discharges cannot be delivered:
/// the shortfall beyond what spare generation (and charging that did not
/// happen) can cover. An hour that already curtails has no spare generation.
pub fn practical_replay(
    theoretical_curtailment: f64,
    spare_generation: f64,
    discharge_shortfall: f64,
    charge_shortfall: f64,
) -> f64 {
    let headroom = if theoretical_curtailment > MW_TOL {
        0.0
    } else {
        spare_generation.max(0.0) + charge_shortfall.max(0.0)
    };
    (discharge_shortfall - headroom).max(0.0)
}

#[derive(Debug, Clone)]
struct UnitState {
    soc: f64,
    alpha: f64,
    energy: f64,
    rd: f64,
    charge_history: Vec<f64>,
    discharge_history: Vec<f64>,
    e_charged: f64,
    e_discharged: f64,
    /// Realized baseline SoC at the start of the current year (virtual units).
    baseline: f64,
}

/// Carries storage state through consecutive years of one scenario.
pub struct Simulator<'a> {
    model: &'a SystemModel,
    prep: &'a Prepared,
    settings: &'a RunSettings,
    units: Vec<UnitState>,
    ptdf: PtdfCache,
}

/// Hourly views of every unit: the dispatcher's belief and the real unit.
struct Views {
    belief: Vec<UnitView>,
    real: Vec<UnitView>,
    /// Baseline SoC at the start and end of the hour as the dispatcher sees it.
    baseline_now: Vec<f64>,
    baseline_next: Vec<f64>,
    /// Realized baseline at the end of the hour (virtual units).
    real_baseline_next: Vec<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a SystemModel, prep: &'a Prepared, settings: &'a RunSettings) -> Self {
        let units = model
            .ges_units
            .iter()
            .map(|u| UnitState {
                soc: u.soc_init,
                alpha: 0.0,
                energy: u.energy_available(0.0),
                rd: 0.0,
                charge_history: Vec::with_capacity(24),
                discharge_history: Vec::with_capacity(24),
                e_charged: 0.0,
                e_discharged: 0.0,
                baseline: u.soc_init,
            })
            .collect();
        Self { model, prep, settings, units, ptdf: PtdfCache::default() }
    }

    pub fn run_year(&mut self, scen: &ScenarioState, sample: usize, collect: Collect) -> YearOutcome {
        let model = self.model;
        let h = scen.horizon();
        let nb = model.buses.len();
        let ng = model.ges_units.len();
        let mut out = YearOutcome { sample, ..Default::default() };

        let real_baseline: Vec<Option<Vec<f64>>> = model
            .ges_units
            .iter()
            .zip(&scen.ves_diu_draws)
            .zip(&self.units)
            .map(|((u, draws), st)| {
                draws.as_ref().map(|d| {
                    ves_baseline_trajectory(
                        u,
                        st.baseline,
                        &d.baseline_charge_mw,
                        &d.baseline_discharge_mw,
                        &d.soc_min,
                        &d.soc_max,
                    )
                })
            })
            .collect();

        let mut gen_max = vec![0.0; nb];
        let mut gen_min = vec![0.0; nb];
        let mut load = vec![0.0; nb];
        let mut fixed_net = vec![0.0; nb];
        for t in 0..h {
            if t % 24 == 0 {
                for (u, st) in model.ges_units.iter().zip(&mut self.units) {
                    let keep = u.ddu.as_ref().is_some_and(|p| p.accumulate_discomfort);
                    if !keep {
                        st.charge_history.clear();
                        st.discharge_history.clear();
                    }
                }
            }
            gen_max.fill(0.0);
            gen_min.fill(0.0);
            for (i, u) in model.cg_units.iter().enumerate() {
                if scen.cg_on[i][t] {
                    gen_max[u.bus] += u.capacity;
                }
            }
            for (i, u) in model.rg_units.iter().enumerate() {
                let a = scen.rg_available_mw[i][t];
                gen_max[u.bus] += a;
                gen_min[u.bus] += a * (1.0 - u.max_curtail_rate);
            }
            for b in 0..nb {
                load[b] = scen.load_mw[b][t];
            }
            let rc = gen_max.iter().sum::<f64>() - load.iter().sum::<f64>();
            let views = self.views(scen, &real_baseline, t);
            let line_on: Vec<bool> = scen.line_on.iter().map(|l| l[t]).collect();

            // Scheduled storage actions and the theoretical OPF.
            let mut charge = vec![0.0; ng];
            let mut discharge = vec![0.0; ng];
            let mut state = if rc < 0.0 { OperatingState::Emergency } else { OperatingState::Normal };
            let mut warning = false;
            let opf: OpfResult;
            let emergency_offers = rc < 0.0 && self.settings.strategy != Strategy::Fixed;
            if emergency_offers {
                out.emergency_hours += 1;
                let chance = self.settings.strategy == Strategy::Coordinated
                    && self.settings.mode == UncertaintyMode::U3
                    && self.prep.ddu_model.iter().any(Option::is_some);
                if chance {
                    let units: Vec<ChanceUnit<'_>> = (0..ng)
                        .map(|g| ChanceUnit {
                            unit: &model.ges_units[g],
                            view: views.belief[g],
                            dist: self.prep.ddu_model[g].as_ref(),
                            diu_min: views.belief[g].floor,
                            charge_history: &self.units[g].charge_history,
                            discharge_history: &self.units[g].discharge_history,
                            baseline_next: views.baseline_next[g],
                        })
                        .collect();
                    let network = &self.prep.network;
                    let ptdf = &mut self.ptdf;
                    let fp = chance_fixed_point(&units, self.settings.gamma, |floors| {
                        let beliefs: Vec<UnitView> = views
                            .belief
                            .iter()
                            .zip(floors)
                            .map(|(v, &f)| UnitView { floor: f, ..*v })
                            .collect();
                        let (r, d) = emergency_opf(
                            model, network, ptdf, &line_on, &gen_max, &gen_min, &load, &beliefs,
                        );
                        (r, d)
                    });
                    if !fp.converged {
                        out.fixed_point_warnings += 1;
                        warning = true;
                    }
                    discharge = fp.discharges;
                    opf = fp.result;
                    for g in 0..ng {
                        if self.prep.ddu_model[g].is_some() && discharge[g] > MW_TOL && scen.ges_on[g][t] {
                            out.ddu_events += 1;
                        }
                    }
                } else {
                    let (r, d) = emergency_opf(
                        model,
                        &self.prep.network,
                        &mut self.ptdf,
                        &line_on,
                        &gen_max,
                        &gen_min,
                        &load,
                        &views.belief,
                    );
                    opf = r;
                    discharge = d;
                }
            } else {
                match self.settings.strategy {
                    Strategy::Fixed => {
                        let plan = self.prep.fixed.as_ref().expect("fixed plan prepared");
                        for g in 0..ng {
                            let share = model.ges_units[g].capacity_share;
                            charge[g] = plan[g].charge[t].min(share * rc.max(0.0));
                            discharge[g] = plan[g].discharge[t];
                        }
                    }
                    Strategy::Greedy => {
                        charge = greedy_normal_charge(rc, &views.belief, &model.ges_units);
                    }
                    Strategy::Coordinated => {
                        let soc_rt: Vec<f64> = self.units.iter().map(|s| s.soc).collect();
                        state = classify(rc, &soc_rt, &views.baseline_now);
                        for (g, u) in model.ges_units.iter().enumerate() {
                            let b = &views.belief[g];
                            if (soc_rt[g] - views.baseline_now[g]).abs() <= BASELINE_TOL {
                                if let Some(s) = &self.prep.arbitrage[g] {
                                    let k = if u.energy_rated > 0.0 { b.energy / u.energy_rated } else { 0.0 };
                                    charge[g] = (s.charge[t] * k).min(u.capacity_share * rc).min(b.max_charge(u));
                                    discharge[g] = (s.discharge[t] * k).min(b.max_discharge(u));
                                }
                            } else {
                                (charge[g], discharge[g]) = recovery_action(u, b, views.baseline_next[g], rc);
                            }
                        }
                    }
                }
                fixed_net.fill(0.0);
                for (g, u) in model.ges_units.iter().enumerate() {
                    fixed_net[u.bus] += charge[g] - discharge[g];
                }
                let input = OpfInput {
                    network: &self.prep.network,
                    line_on: &line_on,
                    gen_max: &gen_max,
                    gen_min: &gen_min,
                    load: &load,
                    fixed_net: &fixed_net,
                    offers: &[],
                };
                opf = solve_opf(&input, &mut self.ptdf);
            }
            if self.settings.strategy == Strategy::Fixed && rc < 0.0 {
                // The frozen schedule runs unchanged through emergencies.
                out.emergency_hours += 1;
            }
            if opf.used_lp {
                out.lp_solves += 1;
            }
            if !opf.feasible {
                out.lp_warnings += 1;
                warning = true;
            }
            let theoretical = opf.total_curtailment();

            // Replay against the real units.
            let mut shortfall_d = 0.0;
            let mut shortfall_c = 0.0;
            let mut unit_shortfall = vec![0.0; ng];
            let mut delivered = vec![(0.0, 0.0); ng];
            for (g, u) in model.ges_units.iter().enumerate() {
                let real = views.real[g];
                let c = charge[g].min(real.max_charge(u)).max(0.0);
                let d = self.deliverable_discharge(scen, g, t, &real, views.real_baseline_next[g], discharge[g]);
                if self.prep.ddu_model[g].is_some()
                    && emergency_offers
                    && discharge[g] > MW_TOL
                    && scen.ges_on[g][t]
                    && d < discharge[g] - 1e-7
                {
                    out.ddu_violations += 1;
                }
                shortfall_c += charge[g] - c;
                shortfall_d += discharge[g] - d;
                unit_shortfall[g] = discharge[g] - d;
                delivered[g] = (c, d);
            }
            let net_storage: f64 = charge.iter().sum::<f64>() - discharge.iter().sum::<f64>();
            let spare = rc - net_storage;
            let additional = practical_replay(theoretical, spare, shortfall_d, shortfall_c);

            out.ens_theoretical += theoretical;
            out.ens_practical += theoretical + additional;
            out.scheduled_discharge += discharge.iter().sum::<f64>();
            if theoretical > MW_TOL {
                out.lolp_hours_theoretical += 1;
            }
            if theoretical + additional > MW_TOL {
                out.lolp_hours_practical += 1;
            }
            if collect.records {
                if theoretical > MW_TOL {
                    let cause = if rc < 0.0 { Cause::GenerationDeficit } else { Cause::Congestion };
                    out.records.push(CurtailmentRecord { sample, hour: t, bus_mw: opf.curtailment.clone(), cause });
                }
                if additional > MW_TOL {
                    let mut bus_mw = vec![0.0; nb];
                    let total: f64 = unit_shortfall.iter().sum();
                    for (g, u) in model.ges_units.iter().enumerate() {
                        bus_mw[u.bus] += additional * unit_shortfall[g] / total;
                    }
                    out.records.push(CurtailmentRecord { sample, hour: t, bus_mw, cause: Cause::StorageUnavailable });
                }
            }

            // Advance the real units.
            for (g, u) in model.ges_units.iter().enumerate() {
                let (c, d) = delivered[g];
                let real = views.real[g];
                let st = &mut self.units[g];
                st.soc = real.soc_after(u, c, d).clamp(0.0, 1.0);
                st.charge_history.push(c);
                st.discharge_history.push(d);
                st.e_charged += c;
                st.e_discharged += d;
                if u.ddu.is_some() {
                    st.rd = response_discomfort(
                        &st.charge_history,
                        &st.discharge_history,
                        st.soc,
                        views.real_baseline_next[g],
                        u,
                        24.0,
                    );
                }
                if (t + 1) % 24 == 0 || t + 1 == h {
                    let kappa = scen.kappa[g].get(t / 24).copied().unwrap_or(0.0);
                    st.alpha = degrade_alpha(st.alpha, st.e_charged, st.e_discharged, kappa, u);
                    st.energy = u.energy_available(st.alpha);
                    st.e_charged = 0.0;
                    st.e_discharged = 0.0;
                }
                if collect.operations {
                    out.operations.push(OperationRow { hour: t, unit: g, soc: st.soc, charge: c, discharge: d, state });
                }
            }
            if collect.hourly {
                out.hourly.push(HourlyDispatchResult {
                    hour: t,
                    state,
                    curtailment: opf.curtailment.clone(),
                    flows: opf.flows.clone(),
                    angles: opf.angles.clone(),
                    generation: opf.generation.clone(),
                    ges_charge: charge.clone(),
                    ges_discharge: discharge.clone(),
                    warning,
                });
            }
        }
        for (g, st) in self.units.iter_mut().enumerate() {
            if let Some(bs) = &real_baseline[g] {
                st.baseline = bs[h];
            }
        }
        out
    }

    fn views(&self, scen: &ScenarioState, real_baseline: &[Option<Vec<f64>>], t: usize) -> Views {
        let model = self.model;
        let ng = model.ges_units.len();
        let mut v = Views {
            belief: Vec::with_capacity(ng),
            real: Vec::with_capacity(ng),
            baseline_now: Vec::with_capacity(ng),
            baseline_next: Vec::with_capacity(ng),
            real_baseline_next: Vec::with_capacity(ng),
        };
        let mode = self.settings.mode;
        for (g, u) in model.ges_units.iter().enumerate() {
            let st = &self.units[g];
            let on = scen.ges_on[g][t];
            let eps = u.self_discharge;
            let (real, bs_now, bs_next) = match (&scen.ves_diu_draws[g], &real_baseline[g]) {
                (Some(draws), Some(bs)) => {
                    let free = bs[t + 1] + (1.0 - eps) * (st.soc - bs[t]);
                    let (floor, cap) = match &u.ddu {
                        Some(p) => {
                            let shock = scen.ddu_shocks[g][t];
                            (
                                ddu_lower(draws.soc_min[t], p, st.rd, shock),
                                ddu_upper(draws.soc_max[t], p, st.rd, shock),
                            )
                        }
                        None => (draws.soc_min[t], draws.soc_max[t]),
                    };
                    let view = UnitView { on, energy: st.energy, free_soc: free, floor, cap };
                    (view, bs[t], bs[t + 1])
                }
                _ => {
                    let view = UnitView {
                        on,
                        energy: st.energy,
                        free_soc: (1.0 - eps) * st.soc,
                        floor: u.soc_min,
                        cap: u.soc_max,
                    };
                    (view, st.soc, st.soc)
                }
            };
            let belief = match mode {
                UncertaintyMode::U1 => UnitView {
                    on: true,
                    energy: u.energy_rated,
                    free_soc: st.soc,
                    floor: u.soc_min,
                    cap: u.soc_max,
                },
                _ => match &scen.ves_diu_draws[g] {
                    Some(draws) => UnitView { floor: draws.soc_min[t], cap: draws.soc_max[t], ..real },
                    None => real,
                },
            };
            let (base_now, base_next) = match (&self.prep.arbitrage[g], mode, u.is_virtual()) {
                (Some(s), _, _) => (s.soc_start[t], s.soc_end[t]),
                (None, UncertaintyMode::U2 | UncertaintyMode::U3, true) => (bs_now, bs_next),
                _ => (st.soc, belief.free_soc),
            };
            v.belief.push(belief);
            v.real.push(real);
            v.baseline_now.push(base_now);
            v.baseline_next.push(base_next);
            v.real_baseline_next.push(bs_next);
        }
        v
    }

    /// Largest discharge up to `scheduled` that the real unit can deliver.
    /// For virtual units with decision-dependent bounds the floor rises with
    /// the discharge itself, so the limit is found by bisection.
    fn deliverable_discharge(
        &self,
        scen: &ScenarioState,
        g: usize,
        t: usize,
        real: &UnitView,
        baseline_next: f64,
        scheduled: f64,
    ) -> f64 {
        let u = &self.model.ges_units[g];
        if scheduled <= 0.0 {
            return 0.0;
        }
        let (Some(p), Some(draws)) = (&u.ddu, &scen.ves_diu_draws[g]) else {
            return scheduled.min(real.max_discharge(u));
        };
        if !real.on || real.energy <= 0.0 {
            return 0.0;
        }
        let st = &self.units[g];
        let shock = scen.ddu_shocks[g][t];
        let ok = |d: f64| {
            let mut ch = st.charge_history.clone();
            ch.push(0.0);
            let mut dh = st.discharge_history.clone();
            dh.push(d);
            let soc = real.soc_after(u, 0.0, d);
            let rd = response_discomfort(&ch, &dh, soc, baseline_next, u, 24.0);
            soc >= ddu_lower(draws.soc_min[t], p, rd, shock) - 1e-12
        };
        let top = scheduled.min(u.p_discharge_max);
        if ok(top) {
            return top;
        }
        if !ok(0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, top);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Emergency OPF with every unit offering its believed discharge capability.
#[allow(clippy::too_many_arguments)]
fn emergency_opf(
    model: &SystemModel,
    network: &Network,
    ptdf: &mut PtdfCache,
    line_on: &[bool],
    gen_max: &[f64],
    gen_min: &[f64],
    load: &[f64],
    beliefs: &[UnitView],
) -> (OpfResult, Vec<f64>) {
    let mut offers = Vec::new();
    let mut owner = Vec::new();
    for (g, (u, v)) in model.ges_units.iter().zip(beliefs).enumerate() {
        let max = v.max_discharge(u);
        if max > MW_TOL {
            offers.push(StorageOffer { bus: u.bus, max });
            owner.push(g);
        }
    }
    let zeros = vec![0.0; load.len()];
    let input = OpfInput { network, line_on, gen_max, gen_min, load, fixed_net: &zeros, offers: &offers };
    let r = solve_opf(&input, ptdf);
    let mut d = vec![0.0; model.ges_units.len()];
    for (k, &g) in owner.iter().enumerate() {
        d[g] = r.discharge.get(k).copied().unwrap_or(0.0);
    }
    (r, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_arithmetic() {
        assert_eq!(practical_replay(0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(practical_replay(5.0, 0.0, 10.0, 0.0), 10.0);
        assert_eq!(practical_replay(0.0, 4.0, 10.0, 1.0), 5.0);
        assert_eq!(practical_replay(0.0, 40.0, 10.0, 0.0), 0.0);
    }
}
