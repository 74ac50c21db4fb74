//! One-factor sweeps: rebuild the study for each grid value, run the
//! assessment (and optionally a capacity credit) with a common seed.

use serde::{Deserialize, Serialize};

use crate::capacity_credit::{default_yardstick, evaluate_cc_cached, CcIndex, CcQuery, EsYardstick};
use crate::dispatch::{PlanCache, Strategy, UncertaintyMode};
use crate::error::{Error, Result};
use crate::fixtures::{es_template, ves_template, wind_template};
use crate::ges::{Availability, GesUnit};
use crate::model::{attach_ges, scale_res_penetration, Placement, RgTemplate, SystemModel};
use crate::reliability::run_smcs_cached;
use crate::report::{fmt_float, Table};
use crate::simulate::RunSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    ResPenetration,
    RatedPowerFraction,
    DurationHours,
    Efficiency,
    Mttr,
    SelfDischarge,
    Gamma,
    DduLevel,
}

/// Which decision-dependent effect a `ddu_level` sweep scales.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DduComponent {
    #[default]
    Both,
    Incentive,
    Discomfort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FleetTemplate {
    /// `"es"` or `"ves"`.
    Named(String),
    Unit(Box<GesUnit>),
}

impl FleetTemplate {
    fn unit(&self) -> Result<GesUnit> {
        match self {
            FleetTemplate::Named(n) if n == "es" => Ok(es_template()),
            FleetTemplate::Named(n) if n == "ves" => Ok(ves_template()),
            FleetTemplate::Named(n) => Err(Error::invariant("fleet template is `es`, `ves` or a unit", n.clone())),
            FleetTemplate::Unit(u) => Ok((**u).clone()),
        }
    }
}

/// Storage fleet rebuilt for every grid point, replacing the config's own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    pub template: FleetTemplate,
    pub placement: Placement,
    pub power_fraction: f64,
    pub duration_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_mode")]
    pub mode: UncertaintyMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<CcIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleet: Option<FleetSpec>,
    #[serde(default)]
    pub ddu_component: DduComponent,
    /// Renewable units created by `res_penetration`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rg_template: Option<RgTemplate>,
    /// Physical storage that EPSC is measured in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yardstick: Option<EsYardstick>,
}

fn default_strategy() -> Strategy {
    Strategy::Coordinated
}

fn default_mode() -> UncertaintyMode {
    UncertaintyMode::U3
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text).map_err(|e| Error::Parse(format!("sweep spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invariant("nonempty grid", "sweep values are empty"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant("finite grid values", format!("{:?}", self.values)));
        }
        let needs_fleet = matches!(self.parameter, SweepParameter::RatedPowerFraction);
        if needs_fleet && self.fleet.is_none() {
            return Err(Error::invariant("rated_power_fraction sweeps need a fleet", "no `fleet` in sweep spec"));
        }
        Ok(())
    }
}

/// Availability with the given repair time; a forced-outage unit is first
/// given the failure time that yields its outage rate at a 24 h repair time.
fn with_mttr(a: &Availability, mttr: f64) -> Availability {
    let mttf = match a {
        Availability::TwoState { mttf, .. } => *mttf,
        Availability::ForcedOutage { rate } if *rate > 0.0 => 24.0 * (1.0 - rate) / rate,
        _ => return a.clone(),
    };
    Availability::TwoState { mttf, mttr }
}

/// The study at one grid point.
pub fn apply_parameter(
    model: &SystemModel,
    spec: &SweepSpec,
    value: f64,
    settings: &mut RunSettings,
) -> Result<SystemModel> {
    let p = spec.parameter;
    let mut m = if spec.fleet.is_some() { model.without_ges() } else { model.clone() };
    if p == SweepParameter::ResPenetration {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invariant("penetration in [0, 1]", format!("{value}")));
        }
        let template = spec.rg_template.clone().unwrap_or_else(wind_template);
        m = scale_res_penetration(&m, value, &template);
    }
    if let Some(f) = &spec.fleet {
        let power = if p == SweepParameter::RatedPowerFraction { value } else { f.power_fraction };
        let duration = if p == SweepParameter::DurationHours { value } else { f.duration_hours };
        m = attach_ges(&m, &f.template.unit()?, f.placement, power, duration)?;
    }
    for u in &mut m.ges_units {
        match p {
            SweepParameter::DurationHours if spec.fleet.is_none() => u.energy_rated = value * u.p_discharge_max,
            SweepParameter::Efficiency => {
                u.eta_c = value;
                u.eta_d = value;
            }
            SweepParameter::SelfDischarge => u.self_discharge = value,
            SweepParameter::Mttr => u.availability = with_mttr(&u.availability, value),
            SweepParameter::DduLevel => {
                if let Some(d) = &mut u.ddu {
                    if spec.ddu_component != DduComponent::Discomfort {
                        d.a_g_lower *= value;
                        d.a_g_upper *= value;
                    }
                    if spec.ddu_component != DduComponent::Incentive {
                        d.b_h_lower *= value;
                        d.b_h_upper *= value;
                    }
                }
            }
            _ => {}
        }
    }
    if p == SweepParameter::DurationHours && spec.fleet.is_none() {
        m.recompute_capacity_shares();
    }
    if p == SweepParameter::Gamma {
        settings.gamma = value;
    }
    m.validate()?;
    Ok(m)
}

pub const SWEEP_HEADER: [&str; 8] = [
    "value",
    "eens_theoretical_mwh_per_yr",
    "eens_practical_mwh_per_yr",
    "eens_reference_mwh_per_yr",
    "lolp",
    "cc_mw",
    "cc_normalized",
    "error",
];

/// Numbers of one sweep row; `None` cells stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub eens_theoretical: Option<f64>,
    pub eens_practical: Option<f64>,
    pub eens_reference: Option<f64>,
    pub lolp: Option<f64>,
    pub cc_mw: Option<f64>,
    pub cc_normalized: Option<f64>,
    pub error: Option<String>,
}

fn run_row(model: &SystemModel, spec: &SweepSpec, value: f64, base: &RunSettings, cache: &PlanCache) -> Result<SweepRow> {
    let mut settings = RunSettings { strategy: spec.strategy, mode: spec.mode, ..base.clone() };
    let m = apply_parameter(model, spec, value, &mut settings)?;
    let test = run_smcs_cached(&m, &settings, cache)?.report;
    let mut row = SweepRow {
        value,
        eens_theoretical: Some(test.eens_theoretical_mwh_per_yr),
        eens_practical: Some(test.eens_practical_mwh_per_yr),
        lolp: Some(test.lolp),
        ..Default::default()
    };
    match spec.index {
        Some(index) => {
            let mut q = CcQuery::new(index, settings);
            q.yardstick = Some(spec.yardstick.clone().unwrap_or_else(|| default_yardstick(&m)));
            let cc = evaluate_cc_cached(&m, &q, cache)?;
            row.eens_reference = Some(cc.eens_reference_mwh_per_yr);
            row.cc_mw = Some(cc.capacity_mw);
            row.cc_normalized = Some(cc.normalized);
        }
        None => {
            let reference = run_smcs_cached(&m.without_ges(), &settings, cache)?.report;
            row.eens_reference = Some(reference.eens_practical_mwh_per_yr);
        }
    }
    Ok(row)
}

/// Runs every grid point; a failing point is reported in its `error` cell.
pub fn run_sweep(model: &SystemModel, spec: &SweepSpec, base: &RunSettings) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let cache = PlanCache::default();
    Ok(spec
        .values
        .iter()
        .map(|&v| {
            run_row(model, spec, v, base, &cache).unwrap_or_else(|e| {
                log::warn!("sweep value {v}: {e}");
                SweepRow { value: v, error: Some(e.to_string()), ..Default::default() }
            })
        })
        .collect())
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&SWEEP_HEADER);
    let cell = |v: Option<f64>| v.map_or(String::new(), fmt_float);
    for r in rows {
        t.push(vec![
            fmt_float(r.value),
            cell(r.eens_theoretical),
            cell(r.eens_practical),
            cell(r.eens_reference),
            cell(r.lolp),
            cell(r.cc_mw),
            cell(r.cc_normalized),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

/// Plot series of a sweep: EENS, its reduction against the storage-free
/// system, and normalized capacity credit.
pub fn sweep_curve_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&["value", "eens_practical_mwh_per_yr", "eens_reduction_mwh_per_yr", "cc_normalized"]);
    let cell = |v: Option<f64>| v.map_or(String::new(), fmt_float);
    for r in rows.iter().filter(|r| r.error.is_none()) {
        let reduction = r.eens_reference.zip(r.eens_practical).map(|(a, b)| a - b);
        t.push(vec![fmt_float(r.value), cell(r.eens_practical), cell(reduction), cell(r.cc_normalized)]);
    }
    t
}
