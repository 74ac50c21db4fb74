//! The study system: network, generation fleet, storage fleet and hourly series.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ges::{Availability, GesUnit, Profile};

pub const HOURS_PER_YEAR: usize = 8760;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusKind {
    #[serde(rename = "PV")]
    Pv,
    #[serde(rename = "PQ")]
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadRef {
    pub series: String,
    /// MW per unit of the series.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Per unit.
    pub reactance: f64,
    /// MW.
    pub flow_limit: f64,
    #[serde(default = "default_line_mttf")]
    pub mttf: f64,
    /// Zero means the line never fails.
    #[serde(default)]
    pub mttr: f64,
}

fn default_line_mttf() -> f64 {
    HOURS_PER_YEAR as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgUnit {
    pub bus: usize,
    pub capacity: f64,
    pub mttf: f64,
    pub mttr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgUnit {
    pub bus: usize,
    pub capacity: f64,
    pub capacity_factor_series: String,
    pub mttf: f64,
    pub mttr: f64,
    /// Share of the available output that may be curtailed.
    #[serde(default = "one")]
    pub max_curtail_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub horizon_hours: usize,
    /// Chance-constraint violation level.
    #[serde(default = "default_gamma")]
    pub chance_level: f64,
    #[serde(default)]
    pub seed: u64,
    /// Value of lost load, currency per MWh.
    #[serde(default = "default_reliability_price")]
    pub reliability_price: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_series: Option<String>,
    #[serde(default = "default_years")]
    pub years: usize,
    #[serde(default = "default_scenarios")]
    pub scenarios: usize,
}

fn default_gamma() -> f64 {
    0.05
}

fn default_reliability_price() -> f64 {
    10_000.0
}

fn default_years() -> usize {
    1
}

fn default_scenarios() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<Line>,
    #[serde(default)]
    pub cg_units: Vec<CgUnit>,
    #[serde(default)]
    pub rg_units: Vec<RgUnit>,
    #[serde(default)]
    pub ges_units: Vec<GesUnit>,
    #[serde(default)]
    pub series: BTreeMap<String, Vec<f64>>,
    pub study: Study,
}

/// Where [`attach_ges`] places one unit per target bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    BundledWithRg,
    AtLoadBuses,
}

/// Parameters for renewable units created by [`scale_res_penetration`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgTemplate {
    pub capacity_factor_series: String,
    pub mttf: f64,
    pub mttr: f64,
    #[serde(default = "one")]
    pub max_curtail_rate: f64,
}

impl SystemModel {
    pub fn horizon(&self) -> usize {
        self.study.horizon_hours
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.get(name).map(Vec::as_slice)
    }

    /// Value of a profile at hour `t`; series wrap around.
    pub fn profile_at(&self, profile: &Profile, t: usize) -> f64 {
        match profile {
            Profile::Constant(v) => *v,
            Profile::Series(name) => {
                let s = &self.series[name];
                s[t % s.len()]
            }
        }
    }

    pub fn profile_values(&self, profile: &Profile) -> Vec<f64> {
        (0..self.horizon()).map(|t| self.profile_at(profile, t)).collect()
    }

    /// Hourly load at every bus, MW.
    pub fn bus_loads(&self) -> Vec<Vec<f64>> {
        let h = self.horizon();
        self.buses
            .iter()
            .map(|b| match &b.load {
                Some(l) => {
                    let s = &self.series[&l.series];
                    (0..h).map(|t| l.scale * s[t % s.len()]).collect()
                }
                None => vec![0.0; h],
            })
            .collect()
    }

    pub fn peak_bus_load(&self, bus: usize) -> f64 {
        match &self.buses[bus].load {
            Some(l) => self.series[&l.series].iter().fold(0.0, |m, v| m.max(v * l.scale)),
            None => 0.0,
        }
    }

    pub fn peak_system_load(&self) -> f64 {
        let loads = self.bus_loads();
        (0..self.horizon())
            .map(|t| loads.iter().map(|l| l[t]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn cg_capacity(&self) -> f64 {
        self.cg_units.iter().map(|u| u.capacity).sum()
    }

    pub fn rg_capacity(&self) -> f64 {
        self.rg_units.iter().map(|u| u.capacity).sum()
    }

    pub fn installed_capacity(&self) -> f64 {
        self.cg_capacity() + self.rg_capacity()
    }

    pub fn ges_rated_power(&self) -> f64 {
        self.ges_units.iter().map(|g| g.p_discharge_max).sum()
    }

    /// Recomputes every unit's share of the fleet's rated energy.
    pub fn recompute_capacity_shares(&mut self) {
        let total: f64 = self.ges_units.iter().map(|g| g.energy_rated).sum();
        let n = self.ges_units.len() as f64;
        for g in &mut self.ges_units {
            g.capacity_share = if total > 0.0 { g.energy_rated / total } else { 1.0 / n };
        }
    }

    /// Copy of the model with the storage fleet removed.
    pub fn without_ges(&self) -> SystemModel {
        let mut m = self.clone();
        m.ges_units.clear();
        m
    }

    /// Scales every bus load by `factor`.
    pub fn scale_loads(&mut self, factor: f64) {
        for b in &mut self.buses {
            if let Some(l) = &mut b.load {
                l.scale *= factor;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nb = self.buses.len();
        if nb == 0 {
            return Err(Error::invariant("at least one bus", "no buses defined"));
        }
        for (i, b) in self.buses.iter().enumerate() {
            if b.id != i {
                return Err(Error::invariant(
                    "bus ids unique and contiguous from 0",
                    format!("bus at position {i} has id {}", b.id),
                ));
            }
            match &b.load {
                Some(l) => {
                    self.check_series(&l.series, &format!("bus {i}"))?;
                    if !(l.scale >= 0.0) {
                        return Err(Error::invariant("load scale >= 0", format!("bus {i}")));
                    }
                }
                None if b.kind == BusKind::Pq => {
                    return Err(Error::invariant(
                        "every PQ bus references a load series",
                        format!("bus {i} has no load"),
                    ))
                }
                None => {}
            }
        }
        let bus_ref = |owner: String, bus: usize| -> Result<()> {
            if bus >= nb {
                Err(Error::DanglingBus { owner, bus, count: nb })
            } else {
                Ok(())
            }
        };
        for (i, l) in self.lines.iter().enumerate() {
            bus_ref(format!("line {i}"), l.from)?;
            bus_ref(format!("line {i}"), l.to)?;
            if l.from == l.to {
                return Err(Error::invariant("line endpoints differ", format!("line {i}")));
            }
            if !(l.reactance > 0.0) {
                return Err(Error::invariant("reactance > 0", format!("line {i}")));
            }
            if !(l.flow_limit > 0.0) {
                return Err(Error::invariant("flow_limit > 0", format!("line {i}")));
            }
            if !(l.mttf > 0.0) || !(l.mttr >= 0.0) {
                return Err(Error::invariant("mttf > 0 and mttr >= 0", format!("line {i}")));
            }
        }
        if !self.is_connected() {
            return Err(Error::invariant(
                "network connected with all lines in service",
                format!("{nb} buses, {} lines", self.lines.len()),
            ));
        }
        for (i, u) in self.cg_units.iter().enumerate() {
            bus_ref(format!("cg unit {i}"), u.bus)?;
            if !(u.capacity > 0.0) {
                return Err(Error::invariant("capacity > 0", format!("cg unit {i}")));
            }
            if !(u.mttf > 0.0) || !(u.mttr >= 0.0) {
                return Err(Error::invariant("mttf > 0 and mttr >= 0", format!("cg unit {i}")));
            }
        }
        for (i, u) in self.rg_units.iter().enumerate() {
            let owner = format!("rg unit {i}");
            bus_ref(owner.clone(), u.bus)?;
            let cf = self.check_series(&u.capacity_factor_series, &owner)?;
            if cf.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invariant("0 <= capacity factors <= 1", owner));
            }
            if !(0.0..=1.0).contains(&u.max_curtail_rate) {
                return Err(Error::invariant("0 <= r_i <= 1", owner));
            }
            if !(u.capacity >= 0.0) || !(u.mttf > 0.0) || !(u.mttr >= 0.0) {
                return Err(Error::invariant("capacity >= 0, mttf > 0, mttr >= 0", owner));
            }
        }
        if !(self.installed_capacity() > 0.0) {
            return Err(Error::invariant("sum of installed capacity > 0", "no generation"));
        }
        for (i, g) in self.ges_units.iter().enumerate() {
            self.validate_ges(i, g)?;
        }
        let s = &self.study;
        if s.horizon_hours == 0 {
            return Err(Error::invariant("horizon_hours > 0", "horizon is zero"));
        }
        if !(s.chance_level > 0.0 && s.chance_level < 1.0) {
            return Err(Error::invariant("gamma in (0, 1)", format!("{}", s.chance_level)));
        }
        if s.years == 0 || s.scenarios == 0 {
            return Err(Error::invariant("years >= 1 and scenarios >= 1", "zero count"));
        }
        if let Some(p) = &s.price_series {
            self.check_series(p, "study.price_series")?;
        }
        for (name, values) in &self.series {
            if values.len() != s.horizon_hours {
                return Err(Error::invariant(
                    "series lengths equal horizon_hours",
                    format!("series `{name}` has {} values", values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invariant("series values finite", format!("series `{name}`")));
            }
        }
        Ok(())
    }

    fn check_series(&self, name: &str, owner: &str) -> Result<&[f64]> {
        self.series(name).ok_or_else(|| Error::DanglingSeries {
            owner: owner.to_string(),
            name: name.to_string(),
        })
    }

    fn check_profile(&self, p: &Profile, owner: &str, lo: f64, hi: f64, what: &'static str) -> Result<()> {
        let ok = match p {
            Profile::Constant(v) => (lo..=hi).contains(v),
            Profile::Series(name) => self.check_series(name, owner)?.iter().all(|v| (lo..=hi).contains(v)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invariant(what, owner.to_string()))
        }
    }

    fn validate_ges(&self, i: usize, g: &GesUnit) -> Result<()> {
        let owner = format!("ges unit {i}");
        if g.bus >= self.buses.len() {
            return Err(Error::DanglingBus { owner, bus: g.bus, count: self.buses.len() });
        }
        let fail = |what: &'static str| Err(Error::invariant(what, owner.clone()));
        if !(g.eta_c > 0.0 && g.eta_c <= 1.0 && g.eta_d > 0.0 && g.eta_d <= 1.0) {
            return fail("0 < eta <= 1");
        }
        if !(g.self_discharge >= 0.0 && g.self_discharge < 1.0) {
            return fail("0 <= epsilon < 1");
        }
        if !(g.soc_min >= 0.0 && g.soc_min < g.soc_max && g.soc_max <= 1.0) {
            return fail("0 <= soc_min < soc_max <= 1");
        }
        if !(g.soc_init >= g.soc_min && g.soc_init <= g.soc_max) {
            return fail("soc_min <= soc_init <= soc_max");
        }
        if !(g.p_charge_max >= 0.0 && g.p_discharge_max >= 0.0 && g.energy_rated >= 0.0) {
            return fail("powers and energy >= 0");
        }
        if !(g.capacity_share >= 0.0 && g.capacity_share <= 1.0) {
            return fail("0 <= capacity_share <= 1");
        }
        match &g.availability {
            Availability::ForcedOutage { rate } if !(0.0..=1.0).contains(rate) => return fail("0 <= FOR <= 1"),
            Availability::OnProbability { profile } => {
                self.check_profile(profile, &owner, 0.0, 1.0, "0 <= p_on <= 1")?
            }
            Availability::TwoState { mttf, mttr } if !(*mttf > 0.0 && *mttr >= 0.0) => {
                return fail("mttf > 0 and mttr >= 0")
            }
            _ => {}
        }
        if let Some(d) = &g.degradation {
            if !(d.soh_end < d.soh_initial && d.soh_initial <= 1.0 && d.soh_end >= 0.0) {
                return fail("soh_end < soh_initial <= 1");
            }
            if !(d.life_cycles > 0.0) {
                return fail("life_cycles > 0");
            }
        }
        if let Some(d) = &g.ddu {
            if !(0.0..=1.0).contains(&d.discomfort_weight) {
                return fail("rho in [0, 1]");
            }
            if d.capacity_price_charge > d.price_cap || d.capacity_price_discharge > d.price_cap {
                return fail("capacity prices <= price cap");
            }
            if !(d.cov >= 0.0) {
                return fail("ddu cov >= 0");
            }
        }
        if let Some(d) = &g.diu {
            self.check_profile(&d.baseline_charge, &owner, 0.0, f64::MAX, "baseline >= 0")?;
            self.check_profile(&d.baseline_discharge, &owner, 0.0, f64::MAX, "baseline >= 0")?;
            self.check_profile(&d.soc_min_mean, &owner, 0.0, 1.0, "soc bounds in [0, 1]")?;
            self.check_profile(&d.soc_max_mean, &owner, 0.0, 1.0, "soc bounds in [0, 1]")?;
            if !(d.baseline_cov >= 0.0 && d.soc_bound_sd >= 0.0) {
                return fail("diu spreads >= 0");
            }
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let nb = self.buses.len();
        let mut adj = vec![Vec::new(); nb];
        for l in &self.lines {
            if l.from < nb && l.to < nb {
                adj[l.from].push(l.to);
                adj[l.to].push(l.from);
            }
        }
        let mut seen = BTreeSet::from([0usize]);
        let mut stack = vec![0usize];
        while let Some(b) = stack.pop() {
            for &n in &adj[b] {
                if seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        seen.len() == nb
    }
}

/// Replaces `fraction` of the conventional capacity at every PV bus with
/// co-located renewable capacity; total installed capacity is unchanged.
pub fn scale_res_penetration(model: &SystemModel, fraction: f64, template: &RgTemplate) -> SystemModel {
    let fraction = fraction.clamp(0.0, 1.0);
    let mut m = model.clone();
    if fraction == 0.0 {
        return m;
    }
    let mut per_bus: BTreeMap<usize, f64> = BTreeMap::new();
    for u in &mut m.cg_units {
        if m.buses[u.bus].kind == BusKind::Pv {
            *per_bus.entry(u.bus).or_default() += u.capacity * fraction;
            u.capacity *= 1.0 - fraction;
        }
    }
    if fraction >= 1.0 {
        m.cg_units.retain(|u| m.buses[u.bus].kind != BusKind::Pv);
    }
    for (bus, capacity) in per_bus {
        m.rg_units.push(RgUnit {
            bus,
            capacity,
            capacity_factor_series: template.capacity_factor_series.clone(),
            mttf: template.mttf,
            mttr: template.mttr,
            max_curtail_rate: template.max_curtail_rate,
        });
    }
    m
}

/// Adds one storage unit per target bus, sized from `power_fraction` of the
/// local renewable capacity (bundled) or peak load (load buses).
pub fn attach_ges(
    model: &SystemModel,
    template: &GesUnit,
    placement: Placement,
    power_fraction: f64,
    duration_hours: f64,
) -> Result<SystemModel> {
    if !(power_fraction > 0.0) || !(duration_hours > 0.0) {
        return Err(Error::invariant("power_fraction > 0 and duration_hours > 0", "attach_ges"));
    }
    let mut m = model.clone();
    let targets: Vec<(usize, f64)> = match placement {
        Placement::BundledWithRg => {
            let mut per_bus: BTreeMap<usize, f64> = BTreeMap::new();
            for u in &model.rg_units {
                *per_bus.entry(u.bus).or_default() += u.capacity;
            }
            per_bus.retain(|_, c| *c > 0.0);
            if per_bus.is_empty() {
                return Err(Error::invariant(
                    "bundled placement needs renewable units",
                    "model has no RG capacity",
                ));
            }
            per_bus.into_iter().collect()
        }
        Placement::AtLoadBuses => model
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Pq)
            .map(|b| (b.id, model.peak_bus_load(b.id)))
            .filter(|&(_, p)| p > 0.0)
            .collect(),
    };
    for (bus, base) in targets {
        let power = power_fraction * base;
        let mut unit = template.clone();
        unit.bus = bus;
        unit.p_charge_max = power;
        unit.p_discharge_max = power;
        unit.energy_rated = duration_hours * power;
        m.ges_units.push(unit);
    }
    m.recompute_capacity_shares();
    Ok(m)
}
