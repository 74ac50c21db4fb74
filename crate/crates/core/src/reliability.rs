//! Sequential Monte Carlo adequacy assessment: scenarios in parallel, each a
//! chronology of years, reduced into theoretical and practical indices.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dispatch::{PlanCache, Strategy, UncertaintyMode};
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::model::{SystemModel, HOURS_PER_YEAR};
use crate::scenario::build_scenario_with_loads;
use crate::simulate::{
    prepare, Cause, Collect, CurtailmentRecord, IndexBasis, OperationRow, RunSettings, Simulator, YearOutcome,
};

pub const CONVERGENCE_THRESHOLD: f64 = 0.05;
const MW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub sample: usize,
    pub scenario: usize,
    pub year: usize,
    pub eens_theoretical_mwh: f64,
    pub eens_practical_mwh: f64,
    pub lolp_hours: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub emergency_hours: usize,
    pub scheduled_discharge_mwh: f64,
    pub lp_solves: usize,
    pub lp_warnings: usize,
    pub fixed_point_warnings: usize,
    pub plan_warnings: usize,
    pub ddu_events: usize,
    pub ddu_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub strategy: Strategy,
    pub mode: UncertaintyMode,
    pub scenarios: usize,
    pub years: usize,
    pub horizon_hours: usize,
    pub seed: u64,
    pub gamma: f64,
    pub eens_theoretical_mwh_per_yr: f64,
    pub eens_practical_mwh_per_yr: f64,
    pub lolp: f64,
    pub lolp_basis: IndexBasis,
    pub lolp_theoretical: f64,
    pub lolp_practical: f64,
    pub scheduled_discharge_mwh_per_yr: f64,
    /// One entry per simulated year, in `scenario * years + year` order.
    pub samples: Vec<SampleSummary>,
    /// Coefficient of variation of the running practical EENS estimate.
    pub convergence: Vec<Option<f64>>,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

impl ReliabilityReport {
    /// `(EENS_P - EENS_T) / EENS_P`, zero when both vanish.
    pub fn relative_gap(&self) -> f64 {
        if self.eens_practical_mwh_per_yr > 0.0 {
            (self.eens_practical_mwh_per_yr - self.eens_theoretical_mwh_per_yr) / self.eens_practical_mwh_per_yr
        } else {
            0.0
        }
    }
}

/// Report plus the optional detail streams.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ReliabilityReport,
    pub records: Vec<CurtailmentRecord>,
    pub operations: Vec<OperationRow>,
}

pub fn run_smcs(model: &SystemModel, settings: &RunSettings) -> Result<ReliabilityReport> {
    run_smcs_cached(model, settings, &PlanCache::default()).map(|o| o.report)
}

/// Runs the assessment, reusing day-ahead plans from `cache`.
pub fn run_smcs_cached(model: &SystemModel, settings: &RunSettings, cache: &PlanCache) -> Result<RunOutput> {
    if settings.years == 0 || settings.scenarios == 0 {
        return Err(Error::invariant("years >= 1 and scenarios >= 1", "run settings"));
    }
    if !(0.0..=1.0).contains(&settings.gamma) {
        return Err(Error::invariant("gamma in [0, 1]", format!("gamma = {}", settings.gamma)));
    }
    let prep = prepare(model, settings, cache)?;
    let years = settings.years;
    let per_scenario: Vec<Vec<YearOutcome>> = par_map(settings.scenarios, settings.threads, |s| {
        let mut sim = Simulator::new(model, &prep, settings);
        (0..years)
            .map(|y| {
                let sample = s * years + y;
                let scen = build_scenario_with_loads(model, prep.loads.clone(), sample as u64, settings.seed);
                let collect = Collect {
                    records: settings.record_curtailment,
                    operations: settings.trace_operations && sample == 0,
                    hourly: false,
                };
                sim.run_year(&scen, sample, collect)
            })
            .collect()
    });
    let outcomes: Vec<YearOutcome> = per_scenario.into_iter().flatten().collect();
    let mut out = reduce(model, settings, outcomes);
    out.report.diagnostics.plan_warnings = prep.plan_warnings;
    Ok(out)
}

fn reduce(model: &SystemModel, settings: &RunSettings, outcomes: Vec<YearOutcome>) -> RunOutput {
    let horizon = model.horizon();
    let scale = HOURS_PER_YEAR as f64 / horizon as f64;
    let n = outcomes.len() as f64;
    let mut diag = Diagnostics::default();
    let mut samples = Vec::with_capacity(outcomes.len());
    let (mut et, mut ep, mut sd) = (0.0, 0.0, 0.0);
    let (mut ht, mut hp) = (0usize, 0usize);
    let mut records = Vec::new();
    let mut operations = Vec::new();
    for o in outcomes {
        et += o.ens_theoretical;
        ep += o.ens_practical;
        sd += o.scheduled_discharge;
        ht += o.lolp_hours_theoretical;
        hp += o.lolp_hours_practical;
        diag.emergency_hours += o.emergency_hours;
        diag.scheduled_discharge_mwh += o.scheduled_discharge;
        diag.lp_solves += o.lp_solves;
        diag.lp_warnings += o.lp_warnings;
        diag.fixed_point_warnings += o.fixed_point_warnings;
        diag.ddu_events += o.ddu_events;
        diag.ddu_violations += o.ddu_violations;
        samples.push(SampleSummary {
            sample: o.sample,
            scenario: o.sample / settings.years,
            year: o.sample % settings.years,
            eens_theoretical_mwh: o.ens_theoretical * scale,
            eens_practical_mwh: o.ens_practical * scale,
            lolp_hours: match settings.lolp_basis {
                IndexBasis::Practical => o.lolp_hours_practical,
                IndexBasis::Theoretical => o.lolp_hours_theoretical,
            },
        });
        records.extend(o.records);
        operations.extend(o.operations);
    }
    let hours = n * horizon as f64;
    let lolp_theoretical = ht as f64 / hours;
    let lolp_practical = hp as f64 / hours;
    let series: Vec<f64> = samples.iter().map(|s| s.eens_practical_mwh).collect();
    let (convergence, converged) = convergence_check(&series, CONVERGENCE_THRESHOLD);
    let report = ReliabilityReport {
        strategy: settings.strategy,
        mode: settings.mode,
        scenarios: settings.scenarios,
        years: settings.years,
        horizon_hours: horizon,
        seed: settings.seed,
        gamma: settings.gamma,
        eens_theoretical_mwh_per_yr: et / n * scale,
        eens_practical_mwh_per_yr: ep / n * scale,
        lolp: match settings.lolp_basis {
            IndexBasis::Practical => lolp_practical,
            IndexBasis::Theoretical => lolp_theoretical,
        },
        lolp_basis: settings.lolp_basis,
        lolp_theoretical,
        lolp_practical,
        scheduled_discharge_mwh_per_yr: sd / n * scale,
        samples,
        convergence,
        converged,
        diagnostics: diag,
    };
    RunOutput { report, records, operations }
}

/// Indices straight from curtailment records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indices {
    pub eens_theoretical: f64,
    pub eens_practical: f64,
    pub lolp: f64,
}

/// EENS (MWh/yr) averaged over `samples` simulated years of `horizon` hours;
/// LOLP is the share of hours with any curtailment.
pub fn compute_indices(records: &[CurtailmentRecord], samples: usize, horizon: usize) -> Indices {
    if samples == 0 || horizon == 0 {
        return Indices { eens_theoretical: 0.0, eens_practical: 0.0, lolp: 0.0 };
    }
    let scale = HOURS_PER_YEAR as f64 / horizon as f64 / samples as f64;
    let mut theoretical = 0.0;
    let mut practical = 0.0;
    let mut hours = BTreeSet::new();
    for r in records {
        let mw = r.total();
        practical += mw;
        if r.cause != Cause::StorageUnavailable {
            theoretical += mw;
        }
        if mw > MW_TOL {
            hours.insert((r.sample, r.hour));
        }
    }
    Indices {
        eens_theoretical: theoretical * scale,
        eens_practical: practical * scale,
        lolp: hours.len() as f64 / (samples * horizon) as f64,
    }
}

/// Running coefficient of variation of the sample mean,
/// `std(x_1..x_k) / sqrt(k) / mean(x_1..x_k)` with the `k - 1` variance.
/// Undefined (`None`) for `k = 1`; zero when mean and spread are both zero.
pub fn convergence_check(values: &[f64], threshold: f64) -> (Vec<Option<f64>>, bool) {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        sum_sq += v * v;
        let k = (i + 1) as f64;
        if i == 0 {
            out.push(None);
            continue;
        }
        let mean = sum / k;
        let var = ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0);
        let sd = var.sqrt();
        let cov = if mean.abs() > 0.0 {
            sd / k.sqrt() / mean.abs()
        } else if sd == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        out.push(Some(cov));
    }
    let converged = matches!(out.last(), Some(Some(c)) if *c < threshold);
    (out, converged)
}
