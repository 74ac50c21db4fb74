//! Storage dispatch strategies and the hourly emergency OPF.

pub mod arbitrage;
pub mod coordinated;
pub mod fixed;
pub mod greedy;
pub mod opf;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::ges::GesUnit;

pub use opf::{solve_opf, OpfInput, OpfResult, StorageOffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Fixed,
    Greedy,
    Coordinated,
}

/// How much of the storage uncertainty the dispatcher models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UncertaintyMode {
    /// Ideal storage: always available, lossless, rated capacity, static bounds.
    U1,
    /// Decision-independent uncertainty known: availability, self-discharge,
    /// degraded capacity, VES baseline and comfort bounds.
    U2,
    /// U2 plus chance-constrained handling of decision-dependent bounds.
    U3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatingState {
    Normal,
    Emergency,
    Recovery,
}

impl OperatingState {
    pub fn label(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Emergency => "emergency",
            Self::Recovery => "recovery",
        }
    }
}

macro_rules! text_enum {
    ($ty:ty, $($text:literal => $val:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($val),)+
                    _ => Err(format!("unknown value `{s}` (expected one of: {})", [$($text),+].join(", "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $val { return f.write_str($text); })+
                unreachable!()
            }
        }
    };
}

text_enum!(Strategy, "fixed" => Strategy::Fixed, "greedy" => Strategy::Greedy, "coordinated" => Strategy::Coordinated);
text_enum!(UncertaintyMode, "U1" => UncertaintyMode::U1, "U2" => UncertaintyMode::U2, "U3" => UncertaintyMode::U3);

/// Hourly schedule for a set of units over a window.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DispatchPlan {
    /// `[unit][hour]`, MW.
    pub charge: Vec<Vec<f64>>,
    pub discharge: Vec<Vec<f64>>,
    /// `[unit][hour]`, one more entry than hours.
    pub soc: Vec<Vec<f64>>,
    /// Peak variable per bus with storage (fixed dispatch only).
    pub peak: Vec<f64>,
    /// Arbitrage profit (arbitrage schedules only).
    pub profit: f64,
}

impl DispatchPlan {
    /// Nets any hour where a unit both charges and discharges.
    pub fn enforce_complementarity(&mut self) {
        for (c, d) in self.charge.iter_mut().zip(&mut self.discharge) {
            for (c, d) in c.iter_mut().zip(d.iter_mut()) {
                if *c > 0.0 && *d > 0.0 {
                    let net = *c - *d;
                    *c = net.max(0.0);
                    *d = (-net).max(0.0);
                }
            }
        }
    }
}

/// System-level quantities the strategies react to.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingContext {
    /// Available generation minus load, MW.
    pub residual_capacity: f64,
    pub emergency: bool,
    pub baseline_soc: Vec<f64>,
    pub gamma: f64,
}

impl OperatingContext {
    pub fn new(residual_capacity: f64, baseline_soc: Vec<f64>, gamma: f64) -> Self {
        Self { residual_capacity, emergency: residual_capacity < 0.0, baseline_soc, gamma }
    }
}

/// Per-bus curtailment and flows for one hour, plus storage actions.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyDispatchResult {
    pub hour: usize,
    pub state: OperatingState,
    pub curtailment: Vec<f64>,
    pub flows: Vec<f64>,
    /// Empty when the hour was settled without the LP.
    pub angles: Vec<f64>,
    /// Aggregated generation per bus, MW.
    pub generation: Vec<f64>,
    pub ges_charge: Vec<f64>,
    pub ges_discharge: Vec<f64>,
    pub warning: bool,
}

/// One unit as seen for a single hour: what its SoC would be with no action,
/// the energy that SoC is measured against, and the bounds it must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitView {
    pub on: bool,
    pub energy: f64,
    /// SoC at the end of the hour with zero action.
    pub free_soc: f64,
    pub floor: f64,
    pub cap: f64,
}

impl UnitView {
    /// Largest feasible discharge, MW.
    pub fn max_discharge(&self, unit: &GesUnit) -> f64 {
        if !self.on || self.energy <= 0.0 {
            return 0.0;
        }
        unit.p_discharge_max.min((self.free_soc - self.floor).max(0.0) * unit.eta_d * self.energy)
    }

    /// Largest feasible charge, MW.
    pub fn max_charge(&self, unit: &GesUnit) -> f64 {
        if !self.on || self.energy <= 0.0 {
            return 0.0;
        }
        unit.p_charge_max.min((self.cap - self.free_soc).max(0.0) * self.energy / unit.eta_c)
    }

    pub fn soc_after(&self, unit: &GesUnit, charge: f64, discharge: f64) -> f64 {
        if self.energy <= 0.0 {
            return self.free_soc;
        }
        self.free_soc + (unit.eta_c * charge - discharge / unit.eta_d) / self.energy
    }
}

/// Hash key built from the exact bits of every input of a deterministic plan.
pub(crate) fn bits_key(parts: &[&[f64]]) -> Vec<u64> {
    let mut key = Vec::with_capacity(parts.iter().map(|p| p.len() + 1).sum());
    for p in parts {
        key.push(p.len() as u64);
        key.extend(p.iter().map(|v| v.to_bits()));
    }
    key
}

/// Memo of scenario-independent daily LP plans, shared across evaluations.
#[derive(Debug, Default)]
pub struct PlanCache {
    map: Mutex<HashMap<Vec<u64>, Arc<DispatchPlan>>>,
}

impl PlanCache {
    pub fn get_or_insert_with<E>(
        &self,
        key: Vec<u64>,
        build: impl FnOnce() -> Result<DispatchPlan, E>,
    ) -> Result<Arc<DispatchPlan>, E> {
        if let Some(p) = self.map.lock().expect("plan cache poisoned").get(&key) {
            return Ok(p.clone());
        }
        let plan = Arc::new(build()?);
        self.map.lock().expect("plan cache poisoned").insert(key, plan.clone());
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("plan cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
