//! Generic energy storage: one model for batteries (ES) and demand-side
//! virtual storage (VES).
//!
//! SoC is a fraction of the energy capacity. Batteries lose capacity through
//! cycling; virtual units instead have SoC bounds that move with customer
//! behaviour (DIU) and with the dispatch itself (DDU, incentive vs discomfort).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{lognormal_params, DistributionKind, RandomStream};

/// Tolerance on the post-step SoC before a step is rejected.
pub const SOC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GesKind {
    /// Battery bundled with renewable generation.
    #[serde(rename = "ES-R")]
    EsR,
    /// Battery at a load bus.
    #[serde(rename = "ES-D")]
    EsD,
    /// Thermostatic loads aggregated as a virtual battery.
    #[serde(rename = "VES-T")]
    VesT,
    /// Electric vehicles aggregated as a virtual battery.
    #[serde(rename = "VES-E")]
    VesE,
}

impl GesKind {
    pub fn is_virtual(self) -> bool {
        matches!(self, GesKind::VesT | GesKind::VesE)
    }

    pub fn label(self) -> &'static str {
        match self {
            GesKind::EsR => "ES-R",
            GesKind::EsD => "ES-D",
            GesKind::VesT => "VES-T",
            GesKind::VesE => "VES-E",
        }
    }
}

/// A constant or the name of an hourly series in the system model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Series(String),
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Constant(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Availability {
    /// Independent hourly on/off draws with `P(on) = 1 - rate`.
    ForcedOutage { rate: f64 },
    /// Independent hourly on/off draws with an hourly on-probability profile.
    OnProbability { profile: Profile },
    /// Repairable two-state component.
    TwoState { mttf: f64, mttr: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    /// Equivalent full cycles from `soh_initial` to `soh_end`.
    pub life_cycles: f64,
    pub soh_initial: f64,
    pub soh_end: f64,
    #[serde(default = "default_kappa_mean")]
    pub kappa_mean: f64,
    #[serde(default = "default_kappa_sd")]
    pub kappa_sd: f64,
}

fn default_kappa_mean() -> f64 {
    0.5
}

fn default_kappa_sd() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DduFamily {
    Lognormal,
    TruncatedNormal,
}

/// Decision-dependent distortion of VES SoC bounds.
///
/// `g` (incentive) has mean `a_g * C_c / C_cap`; `h` (discomfort) has mean
/// `b_h * RD`. Lower and upper bounds carry their own coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DduParams {
    pub a_g_lower: f64,
    pub a_g_upper: f64,
    pub b_h_lower: f64,
    pub b_h_upper: f64,
    pub capacity_price_charge: f64,
    pub capacity_price_discharge: f64,
    pub price_cap: f64,
    /// Weight between response effort and SoC deviation in RD.
    pub discomfort_weight: f64,
    pub family: DduFamily,
    /// Coefficient of variation of `g` and `h` around their means.
    pub cov: f64,
    /// Keep RD across day boundaries instead of resetting it each day.
    pub accumulate_discomfort: bool,
}

impl Default for DduParams {
    fn default() -> Self {
        Self {
            a_g_lower: 1.0,
            a_g_upper: 1.0,
            b_h_lower: 2.0,
            b_h_upper: 6.0,
            capacity_price_charge: 50.0,
            capacity_price_discharge: 250.0,
            price_cap: 300.0,
            discomfort_weight: 0.5,
            family: DduFamily::Lognormal,
            cov: 0.25,
            accumulate_discomfort: false,
        }
    }
}

impl DduParams {
    pub fn mu_g(&self, a_g: f64) -> f64 {
        if self.price_cap <= 0.0 {
            return 0.0;
        }
        a_g * self.capacity_price_charge / self.price_cap
    }
}

/// Decision-independent behaviour of a VES: baseline consumption and comfort
/// bounds. Baseline profiles are fractions of the unit's rated power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiuParams {
    pub baseline_charge: Profile,
    #[serde(default)]
    pub baseline_discharge: Profile,
    #[serde(default = "default_cov")]
    pub baseline_cov: f64,
    pub soc_min_mean: Profile,
    pub soc_max_mean: Profile,
    #[serde(default)]
    pub soc_bound_sd: f64,
}

fn default_cov() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GesUnit {
    pub kind: GesKind,
    pub bus: usize,
    pub p_charge_max: f64,
    pub p_discharge_max: f64,
    pub energy_rated: f64,
    pub eta_c: f64,
    pub eta_d: f64,
    /// Fraction of stored energy lost per hour.
    pub self_discharge: f64,
    pub soc_init: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub availability: Availability,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<Degradation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ddu: Option<DduParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diu: Option<DiuParams>,
    #[serde(default)]
    pub capacity_share: f64,
}

impl GesUnit {
    /// Usable energy after `alpha` of the degradation budget is spent.
    pub fn energy_available(&self, alpha: f64) -> f64 {
        match &self.degradation {
            Some(d) => self.energy_rated * (d.soh_initial - (d.soh_initial - d.soh_end) * alpha),
            None => self.energy_rated,
        }
    }

    pub fn is_virtual(&self) -> bool {
        self.kind.is_virtual()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocBounds {
    pub diu_min: f64,
    pub diu_max: f64,
    pub ddu_min: f64,
    pub ddu_max: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GesError {
    #[error("SoC {soc} left [0, 1] after a step; the caller violated a power or SoC limit")]
    SocOutOfRange { soc: f64 },
    #[error("charge {charge} MW and discharge {discharge} MW requested in the same hour")]
    Simultaneous { charge: f64, discharge: f64 },
    #[error("power {power} MW outside [0, {max}]")]
    PowerOutOfRange { power: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GesState {
    pub soc: f64,
    pub alpha: f64,
    pub energy_available: f64,
    pub rd: f64,
    /// Grid-visible response this day, MW per elapsed hour.
    pub charge_history: Vec<f64>,
    pub discharge_history: Vec<f64>,
    pub bounds: SocBounds,
}

impl GesState {
    pub fn new(unit: &GesUnit) -> Self {
        Self {
            soc: unit.soc_init,
            alpha: 0.0,
            energy_available: unit.energy_available(0.0),
            rd: 0.0,
            charge_history: Vec::new(),
            discharge_history: Vec::new(),
            bounds: SocBounds {
                diu_min: unit.soc_min,
                diu_max: unit.soc_max,
                ddu_min: unit.soc_min,
                ddu_max: unit.soc_max,
            },
        }
    }
}

/// One hour of SoC bookkeeping:
/// `SoC' = (1-eps) SoC + (eta_c Pc - Pd/eta_d) dt / S`.
pub fn next_soc(soc: f64, p_charge: f64, p_discharge: f64, unit: &GesUnit, energy: f64, dt: f64) -> f64 {
    let mut next = (1.0 - unit.self_discharge) * soc;
    if energy > 0.0 {
        next += (unit.eta_c * p_charge - p_discharge / unit.eta_d) * dt / energy;
    }
    next
}

/// Applies one hour of charge or discharge, using `energy` as the capacity
/// (rated day-ahead, available in real time).
pub fn step_soc(
    state: &GesState,
    p_charge: f64,
    p_discharge: f64,
    unit: &GesUnit,
    energy: f64,
    dt: f64,
) -> Result<GesState, GesError> {
    if p_charge > 0.0 && p_discharge > 0.0 {
        return Err(GesError::Simultaneous { charge: p_charge, discharge: p_discharge });
    }
    if p_charge < 0.0 || p_charge > unit.p_charge_max + 1e-9 {
        return Err(GesError::PowerOutOfRange { power: p_charge, max: unit.p_charge_max });
    }
    if p_discharge < 0.0 || p_discharge > unit.p_discharge_max + 1e-9 {
        return Err(GesError::PowerOutOfRange { power: p_discharge, max: unit.p_discharge_max });
    }
    let soc = next_soc(state.soc, p_charge, p_discharge, unit, energy, dt);
    if !(-SOC_TOL..=1.0 + SOC_TOL).contains(&soc) {
        return Err(GesError::SocOutOfRange { soc });
    }
    let mut next = state.clone();
    next.soc = soc.clamp(0.0, 1.0);
    next.charge_history.push(p_charge);
    next.discharge_history.push(p_discharge);
    Ok(next)
}

/// Cycle degradation: `alpha += kappa (Ec + Ed) / S_rated / L`, capped at 1.
pub fn update_degradation(state: &GesState, e_charged: f64, e_discharged: f64, kappa: f64, unit: &GesUnit) -> GesState {
    let mut next = state.clone();
    next.alpha = degrade_alpha(state.alpha, e_charged, e_discharged, kappa, unit);
    next.energy_available = unit.energy_available(next.alpha);
    next
}

pub fn degrade_alpha(alpha: f64, e_charged: f64, e_discharged: f64, kappa: f64, unit: &GesUnit) -> f64 {
    let Some(d) = &unit.degradation else { return alpha };
    if unit.energy_rated <= 0.0 || d.life_cycles <= 0.0 {
        return alpha;
    }
    let delta = kappa * (e_charged + e_discharged) / unit.energy_rated / d.life_cycles;
    (alpha + delta).min(1.0)
}

/// `RD = rho * sum(Pc/Pc_max + Pd/Pd_max) / T + (1 - rho) |SoC_rt - SoC_baseline|`.
pub fn response_discomfort(
    charge_history: &[f64],
    discharge_history: &[f64],
    soc_rt: f64,
    soc_baseline: f64,
    unit: &GesUnit,
    horizon: f64,
) -> f64 {
    let rho = unit.ddu.as_ref().map_or(0.5, |d| d.discomfort_weight);
    let effort = effort_sum(charge_history, discharge_history, unit);
    rho * effort / horizon + (1.0 - rho) * (soc_rt - soc_baseline).abs()
}

pub fn effort_sum(charge_history: &[f64], discharge_history: &[f64], unit: &GesUnit) -> f64 {
    let c: f64 = if unit.p_charge_max > 0.0 {
        charge_history.iter().sum::<f64>() / unit.p_charge_max
    } else {
        0.0
    };
    let d: f64 = if unit.p_discharge_max > 0.0 {
        discharge_history.iter().sum::<f64>() / unit.p_discharge_max
    } else {
        0.0
    };
    c + d
}

/// One realization of the standardized incentive and discomfort shocks. The
/// actual `g` and `h` are these scaled by their decision-dependent means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DduShock {
    pub z_g: f64,
    pub z_h: f64,
}

impl DduShock {
    pub const NONE: DduShock = DduShock { z_g: 0.0, z_h: 0.0 };
}

/// Draws a unit-mean shock pair from the configured family.
pub fn draw_ddu_shock(params: &DduParams, stream: &mut RandomStream) -> DduShock {
    let mut one = || match params.family {
        DduFamily::Lognormal => {
            let (mu, sigma) = lognormal_params(1.0, params.cov);
            stream.sample(DistributionKind::Lognormal, mu, sigma).unwrap_or(1.0)
        }
        DduFamily::TruncatedNormal => {
            let kind = DistributionKind::TruncatedNormal { lower: 0.0, upper: f64::INFINITY };
            stream.sample(kind, 1.0, params.cov).unwrap_or(1.0)
        }
    };
    let z_g = one();
    let z_h = one();
    DduShock { z_g, z_h }
}

/// DDU bounds for one shock: the upper DIU bound is scaled by `(1+g)(1-h)`,
/// the lower by `(1-g)(1+h)`, and both are clamped to `[0, 1]`.
pub fn ddu_soc_bounds(diu_min: f64, diu_max: f64, params: &DduParams, rd: f64, shock: DduShock) -> (f64, f64) {
    (
        ddu_lower(diu_min, params, rd, shock),
        ddu_upper(diu_max, params, rd, shock),
    )
}

fn scaled(mean: f64, z: f64) -> f64 {
    if mean <= 0.0 {
        0.0
    } else {
        (mean * z).clamp(0.0, 1.0)
    }
}

pub fn ddu_lower(diu_min: f64, params: &DduParams, rd: f64, shock: DduShock) -> f64 {
    let g = scaled(params.mu_g(params.a_g_lower), shock.z_g);
    let h = scaled(params.b_h_lower * rd, shock.z_h);
    (diu_min * (1.0 - g) * (1.0 + h)).clamp(0.0, 1.0)
}

pub fn ddu_upper(diu_max: f64, params: &DduParams, rd: f64, shock: DduShock) -> f64 {
    let g = scaled(params.mu_g(params.a_g_upper), shock.z_g);
    let h = scaled(params.b_h_upper * rd, shock.z_h);
    (diu_max * (1.0 + g) * (1.0 - h)).clamp(0.0, 1.0)
}

/// Empirical DDU bound distribution from a fixed set of model shocks.
#[derive(Debug, Clone)]
pub struct DduDistribution {
    shocks: Vec<DduShock>,
}

impl DduDistribution {
    pub fn sample(params: &DduParams, samples: usize, stream: &mut RandomStream) -> Self {
        let shocks = (0..samples).map(|_| draw_ddu_shock(params, stream)).collect();
        Self { shocks }
    }

    pub fn from_shocks(shocks: Vec<DduShock>) -> Self {
        Self { shocks }
    }

    pub fn len(&self) -> usize {
        self.shocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shocks.is_empty()
    }

    /// `q`-quantile of the DDU lower bound (smallest value with at least a
    /// fraction `q` of samples at or below it).
    pub fn lower_quantile(&self, q: f64, diu_min: f64, params: &DduParams, rd: f64) -> f64 {
        let values: Vec<f64> = self.shocks.iter().map(|&s| ddu_lower(diu_min, params, rd, s)).collect();
        empirical_quantile(values, q)
    }

    pub fn upper_quantile(&self, q: f64, diu_max: f64, params: &DduParams, rd: f64) -> f64 {
        let values: Vec<f64> = self.shocks.iter().map(|&s| ddu_upper(diu_max, params, rd, s)).collect();
        empirical_quantile(values, q)
    }
}

/// Order statistic `ceil(q n)` (1-based) of `values`.
pub fn empirical_quantile(mut values: Vec<f64>, q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len();
    let k = ((q.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, v, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalVesSpec {
    /// Thermal resistance, degC per kW.
    pub thermal_resistance: f64,
    /// Thermal capacity, kWh per degC.
    pub thermal_capacity: f64,
    pub conversion_efficiency: f64,
    pub temp_in_min: f64,
    pub temp_in_max: f64,
    pub temp_out: Vec<f64>,
    pub temp_in_setpoint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalMapping {
    pub epsilon: f64,
    /// kWh.
    pub energy_capacity: f64,
    /// Baseline cooling power per hour, kW.
    pub power: Vec<f64>,
}

/// Maps a first-order thermal building model onto storage parameters.
pub fn thermal_to_ges(spec: &ThermalVesSpec, dt: f64) -> ThermalMapping {
    let r = spec.thermal_resistance;
    let k = spec.conversion_efficiency;
    let epsilon = -(-dt / (r * spec.thermal_capacity)).exp_m1();
    let energy_capacity = dt * (spec.temp_in_max - spec.temp_in_min) / (k * r * epsilon);
    let power = spec
        .temp_out
        .iter()
        .map(|t| (t - spec.temp_in_setpoint) / (k * r))
        .collect();
    ThermalMapping { epsilon, energy_capacity, power }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use crate::tags;

    fn unit(eta: f64, eps: f64, energy: f64) -> GesUnit {
        GesUnit {
            kind: GesKind::EsD,
            bus: 0,
            p_charge_max: 30.0,
            p_discharge_max: 30.0,
            energy_rated: energy,
            eta_c: eta,
            eta_d: eta,
            self_discharge: eps,
            soc_init: 0.5,
            soc_min: 0.0,
            soc_max: 1.0,
            availability: Availability::ForcedOutage { rate: 0.0 },
            degradation: Some(Degradation {
                life_cycles: 4000.0,
                soh_initial: 1.0,
                soh_end: 0.8,
                kappa_mean: 0.5,
                kappa_sd: 0.1,
            }),
            ddu: Some(DduParams::default()),
            diu: None,
            capacity_share: 1.0,
        }
    }

    #[test]
    fn lossless_charge() {
        let u = unit(1.0, 0.0, 100.0);
        let s = step_soc(&GesState::new(&u), 10.0, 0.0, &u, 100.0, 1.0).unwrap();
        assert!((s.soc - 0.6).abs() < 1e-12);
        assert_eq!(s.charge_history, vec![10.0]);
    }

    #[test]
    fn self_discharge_only() {
        let u = unit(1.0, 0.05, 100.0);
        let mut st = GesState::new(&u);
        st.soc = 0.8;
        let s = step_soc(&st, 0.0, 0.0, &u, 100.0, 1.0).unwrap();
        assert!((s.soc - 0.76).abs() < 1e-12);
    }

    #[test]
    fn discharge_efficiency_draws_more_energy() {
        let u = unit(0.9, 0.0, 100.0);
        let s = step_soc(&GesState::new(&u), 0.0, 9.0, &u, 100.0, 1.0).unwrap();
        assert!((s.soc - 0.4).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_bad_requests() {
        let u = unit(1.0, 0.0, 10.0);
        let st = GesState::new(&u);
        assert!(matches!(step_soc(&st, 1.0, 1.0, &u, 10.0, 1.0), Err(GesError::Simultaneous { .. })));
        assert!(matches!(step_soc(&st, 0.0, 30.0, &u, 10.0, 1.0), Err(GesError::SocOutOfRange { .. })));
        assert!(matches!(step_soc(&st, 31.0, 0.0, &u, 10.0, 1.0), Err(GesError::PowerOutOfRange { .. })));
    }

    #[test]
    fn one_day_of_degradation() {
        let mut u = unit(0.9, 0.05, 400.0);
        u.energy_rated = 400.0;
        let st = GesState::new(&u);
        assert_eq!(update_degradation(&st, 0.0, 0.0, 0.5, &u), st);
        let s = update_degradation(&st, 200.0, 200.0, 0.5, &u);
        assert!((s.alpha - 1.25e-4).abs() < 1e-15);
        assert!((s.energy_available - 400.0 * (1.0 - 0.2 * 1.25e-4)).abs() < 1e-9);
    }

    #[test]
    fn incentive_location() {
        let p = DduParams::default();
        assert!((p.mu_g(1.0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn zero_shock_keeps_diu_bounds() {
        let p = DduParams::default();
        assert_eq!(ddu_soc_bounds(0.2, 0.9, &p, 0.3, DduShock::NONE), (0.2, 0.9));
    }

    #[test]
    fn discomfort_contracts_upper_bound() {
        let p = DduParams { a_g_upper: 0.0, ..DduParams::default() };
        let mut s = derive_stream(1, &tags!["ddu"]);
        let rd = 0.2;
        assert!((p.b_h_upper * rd - 1.2).abs() < 1e-12);
        for _ in 0..10_000 {
            let shock = draw_ddu_shock(&p, &mut s);
            let hi = ddu_upper(0.9, &p, rd, shock);
            assert!(hi < 0.9);
        }
    }

    #[test]
    fn discomfort_examples() {
        let u = unit(1.0, 0.0, 30.0);
        assert_eq!(response_discomfort(&[0.0], &[0.0], 0.5, 0.5, &u, 24.0), 0.0);
        let rd = response_discomfort(&[0.0], &[30.0], 0.6, 0.5, &u, 24.0);
        assert!((rd - (0.5 / 24.0 + 0.05)).abs() < 1e-12);
        let mut u1 = u.clone();
        u1.ddu.as_mut().unwrap().discomfort_weight = 1.0;
        let a = response_discomfort(&[0.0], &[30.0], 0.9, 0.5, &u1, 24.0);
        let b = response_discomfort(&[0.0], &[30.0], 0.1, 0.5, &u1, 24.0);
        assert_eq!(a, b);
    }

    #[test]
    fn thermal_mapping() {
        let spec = ThermalVesSpec {
            thermal_resistance: 2.0,
            thermal_capacity: 1.0,
            conversion_efficiency: 3.0,
            temp_in_min: 20.0,
            temp_in_max: 24.0,
            temp_out: vec![30.0, 34.0],
            temp_in_setpoint: 22.0,
        };
        let m = thermal_to_ges(&spec, 1.0);
        assert!((m.epsilon - (1.0 - (-0.5f64).exp())).abs() < 1e-12);
        assert!((m.power[1] - 2.0).abs() < 1e-12);
        let slow = ThermalVesSpec { thermal_capacity: 1e12, ..spec.clone() };
        assert!(thermal_to_ges(&slow, 1.0).epsilon < 1e-11);
    }

    #[test]
    fn empirical_quantile_order_statistic() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_quantile(v.clone(), 0.95), 95.0);
        assert_eq!(empirical_quantile(v.clone(), 1.0), 100.0);
        assert_eq!(empirical_quantile(v, 0.0), 1.0);
    }
}
