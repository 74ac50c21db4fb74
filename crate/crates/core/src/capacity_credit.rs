//! Capacity credit of a storage fleet: the amount of some equivalent resource
//! that leaves system reliability unchanged, found by bisection with common
//! random numbers.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dispatch::PlanCache;
use crate::error::{Error, Result};
use crate::ges::GesUnit;
use crate::model::{CgUnit, SystemModel};
use crate::reliability::{run_smcs_cached, ReliabilityReport};
use crate::simulate::{IndexBasis, RunSettings};

pub const DEFAULT_REL_TOL: f64 = 0.02;
pub const MAX_ITERATIONS: usize = 40;
pub const BRACKET_FACTOR: f64 = 4.0;
const PRESCAN_POINTS: usize = 5;
/// Bisection keeps going until the bracket is this fraction of its start.
const WIDTH_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CcIndex {
    /// Ideal, always-available generation added to the reference system.
    #[serde(rename = "EFC")]
    Efc,
    /// Conventional units with typical outage behaviour added to the reference.
    #[serde(rename = "ECC")]
    Ecc,
    /// Extra load the storage-equipped system can carry.
    #[serde(rename = "ELCC")]
    Elcc,
    /// Conventional generation the storage lets the system retire.
    #[serde(rename = "EGCS")]
    Egcs,
    /// Physical storage (template) that matches a virtual fleet.
    #[serde(rename = "EPSC")]
    Epsc,
}

impl CcIndex {
    pub const ALL: [CcIndex; 5] = [CcIndex::Efc, CcIndex::Ecc, CcIndex::Elcc, CcIndex::Egcs, CcIndex::Epsc];

    pub fn label(self) -> &'static str {
        match self {
            CcIndex::Efc => "EFC",
            CcIndex::Ecc => "ECC",
            CcIndex::Elcc => "ELCC",
            CcIndex::Egcs => "EGCS",
            CcIndex::Epsc => "EPSC",
        }
    }
}

impl fmt::Display for CcIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CcIndex {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CcIndex::ALL
            .into_iter()
            .find(|i| i.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown index `{s}` (expected one of: EFC, ECC, ELCC, EGCS, EPSC)"))
    }
}

/// Physical storage used as the yardstick for EPSC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsYardstick {
    pub template: GesUnit,
    pub duration_hours: f64,
}

#[derive(Debug, Clone)]
pub struct CcQuery {
    pub index: CcIndex,
    pub settings: RunSettings,
    /// Which EENS is matched.
    pub basis: IndexBasis,
    pub rel_tol: f64,
    /// Required for EPSC.
    pub yardstick: Option<EsYardstick>,
}

impl CcQuery {
    pub fn new(index: CcIndex, settings: RunSettings) -> Self {
        Self { index, settings, basis: IndexBasis::Practical, rel_tol: DEFAULT_REL_TOL, yardstick: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    /// MW of the equivalent resource (mean added load for ELCC).
    pub capacity_mw: f64,
    pub eens_mwh_per_yr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcResult {
    pub index: CcIndex,
    pub basis: IndexBasis,
    pub capacity_mw: f64,
    /// `capacity_mw` over the fleet's rated discharge power.
    pub normalized: f64,
    pub fleet_rated_power_mw: f64,
    pub eens_reference_mwh_per_yr: f64,
    pub eens_test_mwh_per_yr: f64,
    pub target_eens_mwh_per_yr: f64,
    /// `EENS(capacity) - target` at the returned point.
    pub residual_mwh_per_yr: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub trace: Vec<TracePoint>,
}

/// Outcome of [`bisect_capacity`].
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    pub capacity: f64,
    pub value: f64,
    /// `(capacity, f(capacity))` in evaluation order.
    pub trace: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Finds `c` in `[lo, hi]` with `|f(c) - target| <= rel_tol * |target|` for a
/// nonincreasing `f`. Five equally spaced points are evaluated first; they
/// must be nonincreasing (within half the tolerance) and pick the sub-bracket
/// for plain bisection, which also shrinks the bracket to 0.1% of its start.
pub fn bisect_capacity(
    mut f: impl FnMut(f64) -> Result<f64>,
    target: f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<Bisection> {
    if !(rel_tol > 0.0) || !(hi >= lo) {
        return Err(Error::invariant("rel_tol > 0 and lo <= hi", format!("[{lo}, {hi}], tol {rel_tol}")));
    }
    let tol = rel_tol * target.abs();
    let mut trace = Vec::new();
    let f_lo = f(lo)?;
    trace.push((lo, f_lo));
    if (f_lo - target).abs() <= tol {
        return Ok(Bisection { capacity: lo, value: f_lo, trace, converged: true });
    }
    let mut points = vec![(lo, f_lo)];
    for k in 1..PRESCAN_POINTS {
        let c = lo + (hi - lo) * k as f64 / (PRESCAN_POINTS - 1) as f64;
        let v = f(c)?;
        trace.push((c, v));
        points.push((c, v));
    }
    if points.windows(2).any(|w| w[1].1 > w[0].1 + 0.5 * tol) {
        return Err(Error::NonMonotone { trace });
    }
    let f_hi = points[PRESCAN_POINTS - 1].1;
    if !(f_lo >= target && target >= f_hi) {
        return Err(Error::Bracket { lo, hi, target, trace });
    }
    if let Some(&(c, v)) = points.iter().find(|p| (p.1 - target).abs() <= tol) {
        return Ok(Bisection { capacity: c, value: v, trace, converged: true });
    }
    let k = points.windows(2).position(|w| w[0].1 >= target && target >= w[1].1).expect("straddle found");
    let (mut a, mut b) = (points[k], points[k + 1]);
    let width_tol = WIDTH_TOL * (hi - lo);
    let mut best = if (a.1 - target).abs() <= (b.1 - target).abs() { a } else { b };
    while trace.len() < MAX_ITERATIONS {
        let c = 0.5 * (a.0 + b.0);
        let v = f(c)?;
        trace.push((c, v));
        if (v - target).abs() < (best.1 - target).abs() {
            best = (c, v);
        }
        if v >= target {
            a = (c, v);
        } else {
            b = (c, v);
        }
        if (v - target).abs() <= tol && b.0 - a.0 <= width_tol {
            return Ok(Bisection { capacity: c, value: v, trace, converged: true });
        }
    }
    let converged = (best.1 - target).abs() <= tol;
    Ok(Bisection { capacity: best.0, value: best.1, trace, converged })
}

/// Buses of the fleet with each one's share of the equivalent resource.
fn fleet_buses(model: &SystemModel) -> Vec<(usize, f64)> {
    let total: f64 = model.ges_units.iter().map(|g| g.capacity_share).sum();
    let n = model.ges_units.len() as f64;
    model
        .ges_units
        .iter()
        .map(|g| (g.bus, if total > 0.0 { g.capacity_share / total } else { 1.0 / n }))
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Adds conventional units of `capacity` split over the fleet buses.
/// `mttr = 0` makes them ideal.
fn with_generation(base: &SystemModel, buses: &[(usize, f64)], capacity: f64, mttf: f64, mttr: f64) -> SystemModel {
    let mut m = base.clone();
    for &(bus, share) in buses {
        let c = capacity * share;
        if c > 0.0 {
            m.cg_units.push(CgUnit { bus, capacity: c, mttf, mttr });
        }
    }
    m
}

fn with_yardstick(base: &SystemModel, buses: &[(usize, f64)], power: f64, y: &EsYardstick) -> SystemModel {
    let mut m = base.clone();
    for &(bus, share) in buses {
        let p = power * share;
        if p > 0.0 {
            let mut u = y.template.clone();
            u.bus = bus;
            u.p_charge_max = p;
            u.p_discharge_max = p;
            u.energy_rated = p * y.duration_hours;
            m.ges_units.push(u);
        }
    }
    m.recompute_capacity_shares();
    m
}

fn without_generation(model: &SystemModel, removed: f64) -> SystemModel {
    let mut m = model.clone();
    let total = model.cg_capacity();
    let keep = if total > 0.0 { (1.0 - removed / total).max(0.0) } else { 1.0 };
    for u in &mut m.cg_units {
        u.capacity *= keep;
    }
    m.cg_units.retain(|u| u.capacity > 0.0);
    m
}

pub fn mean_system_load(model: &SystemModel) -> f64 {
    let h = model.horizon();
    if h == 0 {
        return 0.0;
    }
    model.bus_loads().iter().map(|l| l.iter().sum::<f64>()).sum::<f64>() / h as f64
}

fn eens(report: &ReliabilityReport, basis: IndexBasis) -> f64 {
    match basis {
        IndexBasis::Practical => report.eens_practical_mwh_per_yr,
        IndexBasis::Theoretical => report.eens_theoretical_mwh_per_yr,
    }
}

/// Capacity credit of the model's storage fleet. The reference system is the
/// same model without storage; every evaluation shares the master seed.
/// ES template with the fleet's energy-to-power ratio (4 h without a fleet).
pub fn default_yardstick(model: &SystemModel) -> EsYardstick {
    let power = model.ges_rated_power();
    let energy: f64 = model.ges_units.iter().map(|g| g.energy_rated).sum();
    let duration_hours = if power > 0.0 { energy / power } else { 4.0 };
    EsYardstick { template: crate::fixtures::es_template(), duration_hours }
}

pub fn evaluate_cc(model: &SystemModel, query: &CcQuery) -> Result<CcResult> {
    evaluate_cc_cached(model, query, &PlanCache::default())
}

pub fn evaluate_cc_cached(model: &SystemModel, query: &CcQuery, cache: &PlanCache) -> Result<CcResult> {
    if !(query.rel_tol > 0.0) {
        return Err(Error::invariant("tolerance > 0", format!("{}", query.rel_tol)));
    }
    let basis = query.basis;
    let settings = &query.settings;
    let evaluations = Cell::new(0usize);
    let run = |m: &SystemModel| -> Result<f64> {
        evaluations.set(evaluations.get() + 1);
        Ok(eens(&run_smcs_cached(m, settings, cache)?.report, basis))
    };
    let reference = model.without_ges();
    let fleet_power = model.ges_rated_power();
    let eens_ref = run(&reference)?;
    let eens_test = run(model)?;
    let zero = |evaluations: &Cell<usize>| CcResult {
        index: query.index,
        basis,
        capacity_mw: 0.0,
        normalized: 0.0,
        fleet_rated_power_mw: fleet_power,
        eens_reference_mwh_per_yr: eens_ref,
        eens_test_mwh_per_yr: eens_test,
        target_eens_mwh_per_yr: eens_ref,
        residual_mwh_per_yr: eens_test - eens_ref,
        converged: true,
        evaluations: evaluations.get(),
        trace: vec![],
    };
    if !(fleet_power > 0.0) || eens_test >= eens_ref {
        return Ok(zero(&evaluations));
    }
    let hi = BRACKET_FACTOR * fleet_power;
    let buses = fleet_buses(model);
    let (bisection, target, scale) = match query.index {
        CcIndex::Efc | CcIndex::Ecc => {
            let (mttf, mttr) = if query.index == CcIndex::Efc {
                (1.0, 0.0)
            } else {
                (
                    median(reference.cg_units.iter().map(|u| u.mttf).collect()),
                    median(reference.cg_units.iter().map(|u| u.mttr).collect()),
                )
            };
            let f = |c: f64| if c == 0.0 { Ok(eens_ref) } else { run(&with_generation(&reference, &buses, c, mttf, mttr)) };
            (bisect_capacity(f, eens_test, 0.0, hi, query.rel_tol)?, eens_test, 1.0)
        }
        CcIndex::Epsc => {
            let y = query
                .yardstick
                .as_ref()
                .ok_or_else(|| Error::invariant("EPSC needs a storage yardstick", "query.yardstick missing"))?;
            let f = |c: f64| if c == 0.0 { Ok(eens_ref) } else { run(&with_yardstick(&reference, &buses, c, y)) };
            (bisect_capacity(f, eens_test, 0.0, hi, query.rel_tol)?, eens_test, 1.0)
        }
        CcIndex::Egcs => {
            let hi = hi.min(model.cg_capacity());
            // EENS rises as generation is removed; negate to bisect.
            let f = |c: f64| if c == 0.0 { Ok(-eens_test) } else { run(&without_generation(model, c)).map(|v| -v) };
            (bisect_capacity(f, -eens_ref, 0.0, hi, query.rel_tol)?, eens_ref, -1.0)
        }
        CcIndex::Elcc => {
            // Uniform scaling, measured as the added mean hourly load.
            let mean = mean_system_load(model);
            if !(mean > 0.0) {
                return Ok(zero(&evaluations));
            }
            let f = |c: f64| {
                if c == 0.0 {
                    return Ok(-eens_test);
                }
                let mut m = model.clone();
                m.scale_loads(1.0 + c / mean);
                run(&m).map(|v| -v)
            };
            (bisect_capacity(f, -eens_ref, 0.0, hi, query.rel_tol)?, eens_ref, -1.0)
        }
    };
    let trace: Vec<TracePoint> = bisection
        .trace
        .iter()
        .map(|&(c, v)| TracePoint { capacity_mw: c, eens_mwh_per_yr: v * scale })
        .collect();
    if !bisection.converged {
        log::warn!("{} bisection stopped after {} evaluations without meeting the tolerance", query.index, trace.len());
    }
    Ok(CcResult {
        index: query.index,
        basis,
        capacity_mw: bisection.capacity,
        normalized: bisection.capacity / fleet_power,
        fleet_rated_power_mw: fleet_power,
        eens_reference_mwh_per_yr: eens_ref,
        eens_test_mwh_per_yr: eens_test,
        target_eens_mwh_per_yr: target,
        residual_mwh_per_yr: bisection.value * scale - target,
        converged: bisection.converged,
        evaluations: evaluations.get(),
        trace,
    })
}
