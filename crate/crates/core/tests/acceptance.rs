//! Acceptance suite: one PASS/FAIL line per criterion. Run a subset with
//! `cargo test --test acceptance -- 2 5`.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use adeqsim::capacity_credit::{evaluate_cc_cached, CcIndex, CcQuery, CcResult, EsYardstick};
use adeqsim::dispatch::coordinated::chance_floor;
use adeqsim::dispatch::opf::solve_opf_lp;
use adeqsim::dispatch::{solve_opf, OpfInput, PlanCache, StorageOffer, Strategy, UncertaintyMode};
use adeqsim::fixtures::{self, es_template, ves_template};
use adeqsim::ges::{
    ddu_lower, draw_ddu_shock, step_soc, update_degradation, Degradation, DduDistribution, GesKind, GesState,
};
use adeqsim::lp::{solve_lp, LpStatus};
use adeqsim::model::{attach_ges, Placement, SystemModel};
use adeqsim::network::{Network, PtdfCache};
use adeqsim::reliability::{run_smcs, run_smcs_cached};
use adeqsim::rng::{derive_stream, sample_two_state_path, Tag};
use adeqsim::simulate::RunSettings;
use adeqsim::sweep::{run_sweep, FleetSpec, FleetTemplate, SweepParameter, SweepSpec};
use common::lp_oracle::{random_lp, vertex_enumeration, OracleResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn settings(model: &SystemModel, strategy: Strategy, mode: UncertaintyMode, scenarios: usize) -> RunSettings {
    let mut s = RunSettings::from_study(model, strategy, mode);
    s.scenarios = scenarios;
    s.years = 1;
    s
}

// 1. Two-state Markov availability.
fn markov_stationarity() -> Verdict {
    let t = Instant::now();
    let mut s = derive_stream(1, &[Tag::from("acceptance-markov")]);
    let path = sample_two_state_path(1960.0, 40.0, 1_000_000, &mut s);
    let up = path.iter().filter(|&&u| u).count() as f64 / path.len() as f64;
    let el = t.elapsed();
    verdict((up - 0.98).abs() <= 0.005 && within(el, 5.0), format!("up fraction {up:.5} (0.98 +- 0.005), {el:.2?}"))
}

// 2. LP against vertex enumeration, and the congestion fixture.
fn lp_oracle_and_congestion() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    for _ in 0..200 {
        let p = random_lp(&mut rng, 12, 4);
        let s = solve_lp(&p);
        match (vertex_enumeration(&p), s) {
            (OracleResult::Optimal(best), Ok(s)) if s.status == LpStatus::Optimal => {
                worst = worst.max((s.objective - best).abs());
            }
            (OracleResult::Infeasible, Ok(s)) if s.status == LpStatus::Infeasible => {}
            _ => mismatched += 1,
        }
    }
    // Hourly OPF of the congestion fixture, once plain and once with the
    // 20 MW storage offered for discharge; both the fast path and the LP.
    let model = fixtures::congestion(true);
    let network = Network::from_model(&model);
    let offer = [StorageOffer { bus: 1, max: 20.0 }];
    let opf = |offers: &[StorageOffer], lp: bool| {
        let input = OpfInput {
            network: &network,
            line_on: &[true],
            gen_max: &[100.0, 0.0],
            gen_min: &[0.0, 0.0],
            load: &[0.0, 80.0],
            fixed_net: &[0.0, 0.0],
            offers,
        };
        if lp { solve_opf_lp(&input) } else { solve_opf(&input, &mut PtdfCache::default()) }.total_curtailment()
    };
    let without = [opf(&[], false), opf(&[], true)];
    let with = [opf(&offer, false), opf(&offer, true)];
    let el = t.elapsed();
    let pass = mismatched == 0
        && worst <= 1e-7
        && without.iter().all(|c| (c - 20.0).abs() < 1e-9)
        && with.iter().all(|c| c.abs() < 1e-9)
        && within(el, 10.0);
    verdict(
        pass,
        format!(
            "200 LPs: {mismatched} status mismatches, max |obj diff| {worst:.2e}; congestion OPF {without:?} MW without storage, {with:?} MW with; {el:.2?}"
        ),
    )
}

// 3. Lossless SoC bookkeeping.
fn energy_conservation() -> Verdict {
    let mut unit = es_template();
    unit.eta_c = 1.0;
    unit.eta_d = 1.0;
    unit.self_discharge = 0.0;
    unit.p_charge_max = 50.0;
    unit.p_discharge_max = 50.0;
    unit.energy_rated = 200.0;
    unit.degradation = None;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let mut st = GesState::new(&unit);
        let soc0 = st.soc;
        let (mut charged, mut discharged) = (0.0, 0.0);
        for _ in 0..rng.random_range(1..100) {
            let room_c = ((1.0 - st.soc) * unit.energy_rated).min(unit.p_charge_max);
            let room_d = (st.soc * unit.energy_rated).min(unit.p_discharge_max);
            let (c, d) = if rng.random_bool(0.5) { (rng.random::<f64>() * room_c, 0.0) } else { (0.0, rng.random::<f64>() * room_d) };
            st = step_soc(&st, c, d, &unit, unit.energy_rated, 1.0).expect("feasible action");
            charged += c;
            discharged += d;
        }
        let stored = (st.soc - soc0) * unit.energy_rated;
        let scale = charged.max(discharged).max(1.0);
        worst = worst.max(((charged - discharged) - stored).abs() / scale);
    }
    verdict(worst <= 1e-9, format!("10^4 sequences, max relative imbalance {worst:.2e}"))
}

// 4. Degradation endpoint. One full equivalent cycle moves the rated
// energy once through the battery; the oracle accumulates the increments.
fn degradation_endpoint() -> Verdict {
    let mut unit = es_template();
    unit.energy_rated = 100.0;
    unit.degradation = Some(Degradation { life_cycles: 4000.0, soh_initial: 1.0, soh_end: 0.8, kappa_mean: 0.5, kappa_sd: 0.1 });
    let kappa = 0.5;
    let mut st = GesState::new(&unit);
    let mut oracle_alpha = 0.0;
    let mut before_end = f64::NAN;
    for cycle in 0..8000 {
        let half = unit.energy_rated / 2.0;
        st = update_degradation(&st, half, 0.0, kappa, &unit);
        st = update_degradation(&st, 0.0, half, kappa, &unit);
        oracle_alpha += kappa * half / unit.energy_rated / 4000.0 * 2.0;
        if cycle == 7998 {
            before_end = st.energy_available;
        }
    }
    let oracle_energy = unit.energy_rated * (1.0 - 0.2 * oracle_alpha.min(1.0));
    let end = st.energy_available;
    let pass = (end - 0.8 * unit.energy_rated).abs() <= 1e-9 * unit.energy_rated
        && (end - oracle_energy).abs() <= 1e-9 * unit.energy_rated
        && before_end > 0.8 * unit.energy_rated;
    verdict(pass, format!("S_av after 8000 cycles {end:.10} MWh of 100 (oracle {oracle_energy:.10}); after 7999 {before_end:.6}"))
}

// 5. Per-seed ordering of practical ENS on the fault-injection system.
fn dispatch_ordering() -> Verdict {
    let t = Instant::now();
    let model = fixtures::fault3();
    let cache = PlanCache::default();
    let seeds = 30u64;
    let mut ordered = 0;
    for seed in 0..seeds {
        let ens = |strategy, mode| {
            let mut st = settings(&model, strategy, mode, 1);
            st.seed = seed;
            run_smcs_cached(&model, &st, &cache).expect("fault3 run").report.eens_practical_mwh_per_yr
        };
        let g = ens(Strategy::Greedy, UncertaintyMode::U1);
        let c = ens(Strategy::Coordinated, UncertaintyMode::U3);
        let f = ens(Strategy::Fixed, UncertaintyMode::U1);
        if g <= c + 1e-9 && c <= f + 1e-9 {
            ordered += 1;
        }
    }
    let el = t.elapsed();
    let share = ordered as f64 / seeds as f64;
    verdict(share >= 0.9 && within(el, 120.0), format!("greedy <= coordinated <= fixed in {ordered}/{seeds} seeds, {el:.2?}"))
}

// 6. Theoretical against practical EENS.
fn theoretical_practical_gap() -> Verdict {
    let base = fixtures::rts24_base();
    let cache = PlanCache::default();
    let powers = [0.1, 0.3, 0.5];
    let mut ordered = true;
    let mut notes = Vec::new();
    let mut monotone = true;
    for (strategy, mode) in [(Strategy::Fixed, UncertaintyMode::U1), (Strategy::Greedy, UncertaintyMode::U1)] {
        let mut gaps = Vec::new();
        for p in powers {
            let m = attach_ges(&base, &es_template(), Placement::BundledWithRg, p, 4.0).expect("fleet");
            let r = run_smcs_cached(&m, &settings(&m, strategy, mode, 20), &cache).expect("run").report;
            ordered &= r.eens_practical_mwh_per_yr >= r.eens_theoretical_mwh_per_yr;
            gaps.push(r.relative_gap());
        }
        monotone &= gaps.windows(2).all(|w| w[1] > w[0]);
        notes.push(format!("{strategy} gaps {:.4}/{:.4}/{:.4}", gaps[0], gaps[1], gaps[2]));
    }
    let mut bounded = true;
    for p in powers {
        let m = attach_ges(&base, &es_template(), Placement::BundledWithRg, p, 4.0).expect("fleet");
        let st = settings(&m, Strategy::Coordinated, UncertaintyMode::U3, 20);
        let r = run_smcs_cached(&m, &st, &cache).expect("run").report;
        ordered &= r.eens_practical_mwh_per_yr >= r.eens_theoretical_mwh_per_yr;
        let gap = r.eens_practical_mwh_per_yr - r.eens_theoretical_mwh_per_yr;
        let limit = (st.gamma + 0.02) * r.scheduled_discharge_mwh_per_yr;
        bounded &= gap <= limit;
        notes.push(format!("coordinated p={p}: gap {gap:.1} <= {limit:.1}"));
    }
    verdict(ordered && monotone && bounded, format!("P >= T everywhere: {ordered}; {}", notes.join("; ")))
}

// 7. Chance-constrained floor against fresh realizations.
fn chance_calibration() -> Verdict {
    let gamma = 0.05;
    let mut unit = ves_template();
    unit.ddu = Some(Default::default());
    let params = unit.ddu.clone().expect("ddu");
    let diu_min = 0.2;
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (i, rd) in [0.0, 0.05, 0.15].into_iter().enumerate() {
        let mut model_stream = derive_stream(7, &[Tag::from("acceptance-ddu-model"), Tag::from(i as u64)]);
        let dist = DduDistribution::sample(&params, 1000, &mut model_stream);
        let floor = chance_floor(&dist, gamma, diu_min, &unit, rd);
        let mut real = derive_stream(7, &[Tag::from("acceptance-ddu-real"), Tag::from(i as u64)]);
        let draws = 10_000;
        let violations = (0..draws)
            .filter(|_| ddu_lower(diu_min, &params, rd, draw_ddu_shock(&params, &mut real)) > floor + 1e-12)
            .count();
        let rate = violations as f64 / draws as f64;
        worst = worst.max(rate);
        notes.push(format!("rd={rd}: {rate:.4}"));
    }
    let m = fixtures::rts24_ves();
    let r = run_smcs(&m, &settings(&m, Strategy::Coordinated, UncertaintyMode::U3, 5)).expect("ves run");
    let d = &r.diagnostics;
    let sim_rate = if d.ddu_events > 0 { d.ddu_violations as f64 / d.ddu_events as f64 } else { 0.0 };
    verdict(
        worst <= 0.07 && sim_rate <= 0.07,
        format!("violation rate {} (<= 0.07); in simulation {sim_rate:.4} of {} events", notes.join(", "), d.ddu_events),
    )
}

fn cc(model: &SystemModel, index: CcIndex, strategy: Strategy, scenarios: usize, cache: &PlanCache) -> CcResult {
    let mut q = CcQuery::new(index, settings(model, strategy, UncertaintyMode::U3, scenarios));
    q.yardstick = Some(EsYardstick { template: es_template(), duration_hours: 4.0 });
    evaluate_cc_cached(model, &q, cache).expect("capacity credit")
}

// 8. Capacity credit identity, band, trends and ordering.
fn capacity_credit() -> Verdict {
    let t = Instant::now();
    let scenarios = 50;
    let base = fixtures::rts24_base();
    let cache = PlanCache::default();
    let fleet = |p: f64, d: f64| attach_ges(&base, &es_template(), Placement::BundledWithRg, p, d).expect("fleet");

    let mut ves = es_template();
    ves.kind = GesKind::VesT;
    let ves_model = attach_ges(&base, &ves, Placement::AtLoadBuses, 0.1, 4.0).expect("ves fleet");
    let epsc = cc(&ves_model, CcIndex::Epsc, Strategy::Greedy, scenarios, &cache).normalized;
    let identity = (epsc - 1.0).abs() <= 0.05;

    let egcs = |p, d| cc(&fleet(p, d), CcIndex::Egcs, Strategy::Coordinated, scenarios, &cache).normalized;
    let by_power: Vec<f64> = [0.1, 0.3, 0.5].iter().map(|&p| egcs(p, 4.0)).collect();
    let by_duration: Vec<f64> = [2.0, 6.0].iter().map(|&d| egcs(0.3, d)).collect();
    let by_duration = [by_duration[0], by_power[1], by_duration[1]];
    let band = (0.20..=0.45).contains(&by_power[1]);
    let power_trend = by_power.windows(2).all(|w| w[1] <= w[0]);
    let duration_trend = by_duration.windows(2).all(|w| w[1] >= w[0]);

    let common = fleet(0.3, 4.0);
    let ecc = cc(&common, CcIndex::Ecc, Strategy::Coordinated, scenarios, &cache).normalized;
    let efc = cc(&common, CcIndex::Efc, Strategy::Coordinated, scenarios, &cache).normalized;
    let elcc = cc(&common, CcIndex::Elcc, Strategy::Coordinated, scenarios, &cache).normalized;
    let ordering = by_power[1] >= ecc && ecc >= efc && efc >= elcc;
    let el = t.elapsed();
    let pass = identity && band && power_trend && duration_trend && ordering && within(el, 1800.0);
    verdict(
        pass,
        format!(
            "EPSC identity {epsc:.3}; EGCS 4h {:.3}/{:.3}/{:.3} at 10/30/50% power; 2/4/6h {:.3}/{:.3}/{:.3}; \
             EGCS {:.3} >= ECC {ecc:.3} >= EFC {efc:.3} >= ELCC {elcc:.3}; {el:.0?}",
            by_power[0], by_power[1], by_power[2], by_duration[0], by_duration[1], by_duration[2], by_power[1]
        ),
    )
}

// 9. EENS reduction against renewable penetration.
fn penetration_shape() -> Verdict {
    let model = fixtures::rts24_conventional();
    let mut unit = es_template();
    unit.kind = GesKind::EsD;
    let spec = SweepSpec {
        parameter: SweepParameter::ResPenetration,
        values: (0..=10).map(|i| i as f64 / 10.0).collect(),
        strategy: Strategy::Coordinated,
        mode: UncertaintyMode::U3,
        index: None,
        fleet: Some(FleetSpec {
            template: FleetTemplate::Unit(Box::new(unit)),
            placement: Placement::AtLoadBuses,
            power_fraction: 0.1,
            duration_hours: 4.0,
        }),
        ddu_component: Default::default(),
        rg_template: None,
        yardstick: None,
    };
    let rows = run_sweep(&model, &spec, &settings(&model, Strategy::Coordinated, UncertaintyMode::U3, 20)).expect("sweep");
    let reductions: Vec<Option<f64>> = rows
        .iter()
        .map(|r| r.eens_reference.zip(r.eens_practical).map(|(a, b)| a - b))
        .collect();
    let complete = reductions.iter().all(Option::is_some);
    let values: Vec<f64> = reductions.iter().map(|r| r.unwrap_or(f64::NAN)).collect();
    let argmax = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let at = rows[argmax].value;
    let listing: Vec<String> = values.iter().map(|v| format!("{v:.0}")).collect();
    verdict(complete && at <= 0.6 + 1e-12, format!("max reduction at {:.0}%; reductions {}", at * 100.0, listing.join(" ")))
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let p = e.expect("entry").path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).expect("file"))
        })
        .collect();
    files.sort();
    files
}

// 10. Byte-identical reports from repeated CLI runs.
fn determinism() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_adeqsim");
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/rts24.json");
    let tmp = tempfile::tempdir().expect("tempdir");
    let spec = tmp.path().join("sweep.json");
    std::fs::write(&spec, r#"{"parameter": "duration_hours", "values": [2, 4], "strategy": "greedy", "mode": "U1"}"#)
        .expect("spec");
    let run = |k: usize| -> Vec<(String, Vec<u8>)> {
        let out = tmp.path().join(format!("run{k}"));
        let ok = Command::new(exe)
            .args(["evaluate", "--config"])
            .arg(&fixture)
            .args(["--index", "EGCS", "--scenarios", "3", "--seed", "7", "--emit-plots", "--curtailment", "--out"])
            .arg(&out)
            .status()
            .expect("spawn")
            .success();
        let ok = ok
            && Command::new(exe)
                .args(["sweep", "--config"])
                .arg(&fixture)
                .arg("--sweep")
                .arg(&spec)
                .args(["--scenarios", "3", "--emit-plots", "--out"])
                .arg(&out)
                .status()
                .expect("spawn")
                .success();
        assert!(ok, "cli run failed");
        read_tree(&out)
    };
    let a = run(1);
    let b = run(2);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let expected = ["cc.json", "reliability.json", "sweep.csv", "convergence.csv", "operations.csv", "curtailment.csv"];
    let complete = expected.iter().all(|e| names.contains(e));
    verdict(complete && a == b, format!("files {names:?} identical: {}", a == b))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "markov stationarity", markov_stationarity),
        (2, "lp oracle and congestion", lp_oracle_and_congestion),
        (3, "energy conservation", energy_conservation),
        (4, "degradation endpoint", degradation_endpoint),
        (5, "dispatch ordering", dispatch_ordering),
        (6, "theoretical/practical gap", theoretical_practical_gap),
        (7, "chance-constraint calibration", chance_calibration),
        (8, "capacity credit identity and trends", capacity_credit),
        (9, "res penetration shape", penetration_shape),
        (10, "determinism", determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let v = f();
        println!("{} criterion {id} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
