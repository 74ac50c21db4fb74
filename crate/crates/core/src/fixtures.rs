//! Bundled study systems and the storage templates used by the sweeps.
//!
//! The shipped files under `fixtures/` are written by [`write_fixtures`]; a
//! test keeps them equal to the builders.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ges::{Availability, Degradation, DduParams, DiuParams, GesKind, GesUnit, Profile};
use crate::model::{
    attach_ges, scale_res_penetration, Bus, BusKind, CgUnit, Line, LoadRef, Placement, RgTemplate, Study,
    SystemModel, HOURS_PER_YEAR,
};
use crate::rng::derive_stream;
use crate::tags;

pub const SERIES_FILE: &str = "series_8760.csv";
const SIDECAR_COLUMNS: [&str; 3] = ["load_pu", "wind_cf", "price"];

/// Physical storage: 5% forced outage, 0.9 efficiency each way, 5%/h
/// self-discharge, 4000-cycle life to 80% health. Sizes are set on attach.
pub fn es_template() -> GesUnit {
    GesUnit {
        kind: GesKind::EsR,
        bus: 0,
        p_charge_max: 0.0,
        p_discharge_max: 0.0,
        energy_rated: 0.0,
        eta_c: 0.9,
        eta_d: 0.9,
        self_discharge: 0.05,
        soc_init: 0.4,
        soc_min: 0.0,
        soc_max: 1.0,
        availability: Availability::ForcedOutage { rate: 0.05 },
        degradation: Some(Degradation {
            life_cycles: 4000.0,
            soh_initial: 1.0,
            soh_end: 0.8,
            kappa_mean: 0.5,
            kappa_sd: 0.1,
        }),
        ddu: None,
        diu: None,
        capacity_share: 0.0,
    }
}

/// Thermostatic virtual storage: lossless but leaky (50%/h), baseline
/// consumption near 30% of rated power, comfort band 0.2..0.9.
pub fn ves_template() -> GesUnit {
    GesUnit {
        kind: GesKind::VesT,
        bus: 0,
        p_charge_max: 0.0,
        p_discharge_max: 0.0,
        energy_rated: 0.0,
        eta_c: 1.0,
        eta_d: 1.0,
        self_discharge: 0.5,
        soc_init: 0.6,
        soc_min: 0.0,
        soc_max: 1.0,
        availability: Availability::OnProbability { profile: Profile::Constant(0.95) },
        degradation: None,
        ddu: Some(DduParams::default()),
        diu: Some(DiuParams {
            baseline_charge: Profile::Constant(0.3),
            baseline_discharge: Profile::Constant(0.0),
            baseline_cov: 0.25,
            soc_min_mean: Profile::Constant(0.2),
            soc_max_mean: Profile::Constant(0.9),
            soc_bound_sd: 0.05,
        }),
        capacity_share: 0.0,
    }
}

pub fn wind_template() -> RgTemplate {
    RgTemplate { capacity_factor_series: "wind_cf".into(), mttf: 1950.0, mttr: 50.0, max_curtail_rate: 1.0 }
}

const WEEKLY_PEAK: [f64; 52] = [
    86.2, 90.0, 87.8, 83.4, 88.0, 84.1, 83.2, 80.6, 74.0, 73.7, 71.5, 72.7, 70.4, 75.0, 72.1, 80.0, 75.4, 83.7,
    87.0, 88.0, 85.6, 81.1, 90.0, 88.7, 89.6, 86.1, 75.5, 81.6, 80.1, 88.0, 72.2, 77.6, 80.0, 72.9, 72.6, 70.5,
    78.0, 69.5, 72.4, 72.4, 74.3, 74.4, 80.0, 88.1, 88.5, 90.9, 94.0, 89.0, 94.2, 97.0, 100.0, 95.2,
];

/// Monday first.
const DAILY_PEAK: [f64; 7] = [93.0, 100.0, 98.0, 96.0, 94.0, 77.0, 75.0];

/// `[season][weekend][hour]`, seasons winter, summer, spring/fall.
const HOURLY_PEAK: [[[f64; 24]; 2]; 3] = [
    [
        [
            67.0, 63.0, 60.0, 59.0, 59.0, 60.0, 74.0, 86.0, 95.0, 96.0, 96.0, 95.0, 95.0, 95.0, 93.0, 94.0, 99.0,
            100.0, 100.0, 96.0, 91.0, 83.0, 73.0, 63.0,
        ],
        [
            78.0, 72.0, 68.0, 66.0, 64.0, 65.0, 66.0, 70.0, 80.0, 88.0, 90.0, 91.0, 90.0, 88.0, 87.0, 87.0, 91.0,
            100.0, 99.0, 97.0, 94.0, 92.0, 87.0, 81.0,
        ],
    ],
    [
        [
            64.0, 60.0, 58.0, 56.0, 56.0, 58.0, 64.0, 76.0, 87.0, 95.0, 99.0, 100.0, 99.0, 100.0, 100.0, 97.0, 96.0,
            96.0, 93.0, 92.0, 92.0, 93.0, 87.0, 72.0,
        ],
        [
            74.0, 70.0, 66.0, 65.0, 64.0, 62.0, 62.0, 66.0, 81.0, 86.0, 91.0, 93.0, 93.0, 92.0, 91.0, 91.0, 92.0,
            94.0, 95.0, 95.0, 100.0, 93.0, 88.0, 80.0,
        ],
    ],
    [
        [
            63.0, 62.0, 60.0, 58.0, 59.0, 65.0, 72.0, 85.0, 95.0, 99.0, 100.0, 99.0, 93.0, 92.0, 90.0, 88.0, 90.0,
            92.0, 96.0, 98.0, 96.0, 90.0, 80.0, 70.0,
        ],
        [
            75.0, 73.0, 69.0, 66.0, 65.0, 65.0, 68.0, 74.0, 83.0, 89.0, 92.0, 94.0, 91.0, 90.0, 90.0, 86.0, 85.0,
            88.0, 92.0, 100.0, 97.0, 95.0, 90.0, 85.0,
        ],
    ],
];

fn season(week: usize) -> usize {
    match week + 1 {
        1..=8 | 44..=52 => 0,
        18..=30 => 1,
        _ => 2,
    }
}

/// Week, weekday, season and weekend flag of hour `t` (the year starts on a
/// Monday; the 365th day reuses the last week).
fn calendar(t: usize) -> (usize, usize, usize, bool) {
    let day = t / 24;
    let week = (day / 7).min(51);
    let weekday = day % 7;
    (week, weekday, season(week), weekday >= 5)
}

/// Hourly load as a fraction of the annual peak.
pub fn rts_load_profile(hours: usize) -> Vec<f64> {
    (0..hours)
        .map(|t| {
            let (week, weekday, s, weekend) = calendar(t);
            let v = WEEKLY_PEAK[week] * DAILY_PEAK[weekday] * HOURLY_PEAK[s][weekend as usize][t % 24] / 1e6;
            round_to(v, 6)
        })
        .collect()
}

/// Energy price that depends only on season, day type and hour, so one year
/// has six distinct daily price curves.
pub fn price_profile(hours: usize) -> Vec<f64> {
    (0..hours)
        .map(|t| {
            let (_, _, s, weekend) = calendar(t);
            let f = HOURLY_PEAK[s][weekend as usize][t % 24] / 100.0;
            round_to(15.0 + 85.0 * f.powi(4), 4)
        })
        .collect()
}

/// Synthetic wind capacity factor: a persistent Gaussian driver with mild
/// seasonal and diurnal shape through a logistic link (mean near 0.3).
pub fn wind_profile(hours: usize, seed: u64) -> Vec<f64> {
    let mut s = derive_stream(seed, &tags!["fixture", "wind"]);
    let rho: f64 = 0.97;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut z = s.standard_normal();
    (0..hours)
        .map(|t| {
            z = rho * z + innovation * s.standard_normal();
            let day = (t / 24) as f64;
            let seasonal = 0.35 * (2.0 * std::f64::consts::PI * (day - 15.0) / 365.0).cos();
            let diurnal = -0.15 * (2.0 * std::f64::consts::PI * (t % 24) as f64 / 24.0).cos();
            let x = -1.0 + 1.3 * z + seasonal + diurnal;
            round_to(1.0 / (1.0 + (-x).exp()), 4)
        })
        .collect()
}

fn round_to(v: f64, digits: i32) -> f64 {
    let k = 10f64.powi(digits);
    (v * k).round() / k
}

fn year_series() -> BTreeMap<String, Vec<f64>> {
    BTreeMap::from([
        ("load_pu".to_string(), rts_load_profile(HOURS_PER_YEAR)),
        ("wind_cf".to_string(), wind_profile(HOURS_PER_YEAR, 2024)),
        ("price".to_string(), price_profile(HOURS_PER_YEAR)),
    ])
}

fn study(horizon: usize, scenarios: usize, price: bool) -> Study {
    Study {
        horizon_hours: horizon,
        chance_level: 0.05,
        seed: 7,
        reliability_price: 10_000.0,
        price_series: price.then(|| "price".to_string()),
        years: 1,
        scenarios,
    }
}

fn load_bus(id: usize, scale: f64) -> Bus {
    Bus { id, kind: BusKind::Pq, load: Some(LoadRef { series: "load_pu".into(), scale }) }
}

fn line(from: usize, to: usize, reactance: f64, flow_limit: f64, mttf: f64, mttr: f64) -> Line {
    Line { from, to, reactance, flow_limit, mttf, mttr }
}

/// One bus, two generators, one day.
pub fn smoke() -> SystemModel {
    let shape = [
        0.62, 0.58, 0.55, 0.54, 0.55, 0.6, 0.7, 0.8, 0.88, 0.92, 0.94, 0.95, 0.94, 0.93, 0.92, 0.93, 0.96, 1.0,
        0.99, 0.95, 0.9, 0.82, 0.74, 0.67,
    ];
    SystemModel {
        buses: vec![Bus { id: 0, kind: BusKind::Pv, load: Some(LoadRef { series: "load_pu".into(), scale: 100.0 }) }],
        lines: vec![],
        cg_units: vec![
            CgUnit { bus: 0, capacity: 80.0, mttf: 1000.0, mttr: 50.0 },
            CgUnit { bus: 0, capacity: 80.0, mttf: 1000.0, mttr: 50.0 },
        ],
        rg_units: vec![],
        ges_units: vec![],
        series: BTreeMap::from([("load_pu".to_string(), shape.to_vec())]),
        study: study(24, 10, false),
    }
}

/// 100 MW of firm generation behind a 60 MW line feeding an 80 MW load.
pub fn congestion(with_storage: bool) -> SystemModel {
    let mut m = SystemModel {
        buses: vec![
            Bus { id: 0, kind: BusKind::Pv, load: None },
            Bus { id: 1, kind: BusKind::Pq, load: Some(LoadRef { series: "flat".into(), scale: 80.0 }) },
        ],
        lines: vec![line(0, 1, 0.1, 60.0, 8760.0, 0.0)],
        cg_units: vec![CgUnit { bus: 0, capacity: 100.0, mttf: 8760.0, mttr: 0.0 }],
        rg_units: vec![],
        ges_units: vec![],
        series: BTreeMap::from([("flat".to_string(), vec![1.0; 24])]),
        study: study(24, 1, false),
    };
    if with_storage {
        m.ges_units.push(GesUnit {
            kind: GesKind::EsD,
            bus: 1,
            p_charge_max: 20.0,
            p_discharge_max: 20.0,
            energy_rated: 480.0,
            eta_c: 1.0,
            eta_d: 1.0,
            self_discharge: 0.0,
            soc_init: 1.0,
            soc_min: 0.0,
            soc_max: 1.0,
            availability: Availability::ForcedOutage { rate: 0.0 },
            degradation: None,
            ddu: None,
            diu: None,
            capacity_share: 1.0,
        });
    }
    m
}

/// Three buses with failure-prone generation at bus 0 feeding two load
/// buses over ample lines, and a 40 MW / 160 MWh battery next to the wind.
pub fn fault3() -> SystemModel {
    let mut m = SystemModel {
        buses: vec![Bus { id: 0, kind: BusKind::Pv, load: None }, load_bus(1, 110.0), load_bus(2, 70.0)],
        lines: vec![
            line(0, 1, 0.05, 500.0, 21900.0, 11.0),
            line(0, 2, 0.05, 500.0, 21900.0, 11.0),
            line(1, 2, 0.05, 500.0, 21900.0, 11.0),
        ],
        cg_units: (0..8).map(|_| CgUnit { bus: 0, capacity: 25.0, mttf: 300.0, mttr: 30.0 }).collect(),
        rg_units: vec![],
        ges_units: vec![],
        series: year_series(),
        study: study(HOURS_PER_YEAR, 30, true),
    };
    let wind = wind_template();
    m.rg_units.push(crate::model::RgUnit {
        bus: 0,
        capacity: 60.0,
        capacity_factor_series: wind.capacity_factor_series,
        mttf: wind.mttf,
        mttr: wind.mttr,
        max_curtail_rate: 1.0,
    });
    let mut es = es_template();
    es.bus = 0;
    es.p_charge_max = 40.0;
    es.p_discharge_max = 40.0;
    es.energy_rated = 160.0;
    m.ges_units.push(es);
    m.recompute_capacity_shares();
    m
}

/// Bus loads of the 24-bus test system, MW (buses numbered from 1).
const RTS_LOADS: [(usize, f64); 17] = [
    (1, 108.0),
    (2, 97.0),
    (3, 180.0),
    (4, 74.0),
    (5, 71.0),
    (6, 136.0),
    (7, 125.0),
    (8, 171.0),
    (9, 175.0),
    (10, 195.0),
    (13, 265.0),
    (14, 194.0),
    (15, 317.0),
    (16, 100.0),
    (18, 333.0),
    (19, 181.0),
    (20, 128.0),
];

/// `(bus, count, MW)`.
const RTS_UNITS: [(usize, usize, f64); 14] = [
    (1, 2, 20.0),
    (1, 2, 76.0),
    (2, 2, 20.0),
    (2, 2, 76.0),
    (7, 3, 100.0),
    (13, 3, 197.0),
    (15, 5, 12.0),
    (15, 1, 155.0),
    (16, 1, 155.0),
    (18, 1, 400.0),
    (21, 1, 400.0),
    (22, 6, 50.0),
    (23, 2, 155.0),
    (23, 1, 350.0),
];

fn unit_reliability(mw: f64) -> (f64, f64) {
    match mw as u32 {
        12 => (2940.0, 60.0),
        20 => (450.0, 50.0),
        50 => (1980.0, 20.0),
        76 => (1960.0, 40.0),
        100 => (1200.0, 50.0),
        155 => (960.0, 40.0),
        197 => (950.0, 50.0),
        350 => (1150.0, 100.0),
        _ => (1100.0, 150.0),
    }
}

/// `(from, to, reactance pu, rating MW)`, buses numbered from 1.
const RTS_LINES: [(usize, usize, f64, f64); 38] = [
    (1, 2, 0.0139, 175.0),
    (1, 3, 0.2112, 175.0),
    (1, 5, 0.0845, 175.0),
    (2, 4, 0.1267, 175.0),
    (2, 6, 0.192, 175.0),
    (3, 9, 0.119, 175.0),
    (3, 24, 0.0839, 400.0),
    (4, 9, 0.1037, 175.0),
    (5, 10, 0.0883, 175.0),
    (6, 10, 0.0605, 175.0),
    (7, 8, 0.0614, 175.0),
    (8, 9, 0.1651, 175.0),
    (8, 10, 0.1651, 175.0),
    (9, 11, 0.0839, 400.0),
    (9, 12, 0.0839, 400.0),
    (10, 11, 0.0839, 400.0),
    (10, 12, 0.0839, 400.0),
    (11, 13, 0.0476, 500.0),
    (11, 14, 0.0418, 500.0),
    (12, 13, 0.0476, 500.0),
    (12, 23, 0.0966, 500.0),
    (13, 23, 0.0865, 500.0),
    (14, 16, 0.0389, 500.0),
    (15, 16, 0.0173, 500.0),
    (15, 21, 0.049, 500.0),
    (15, 21, 0.049, 500.0),
    (15, 24, 0.0519, 500.0),
    (16, 17, 0.0259, 500.0),
    (16, 19, 0.0231, 500.0),
    (17, 18, 0.0144, 500.0),
    (17, 22, 0.1053, 500.0),
    (18, 21, 0.0259, 500.0),
    (18, 21, 0.0259, 500.0),
    (19, 20, 0.0396, 500.0),
    (19, 20, 0.0396, 500.0),
    (20, 23, 0.0216, 500.0),
    (20, 23, 0.0216, 500.0),
    (21, 22, 0.0678, 500.0),
];

const GENERATOR_BUSES: [usize; 10] = [1, 2, 7, 13, 15, 16, 18, 21, 22, 23];

/// The 24-bus system (peak 2850 MW, 3405 MW of conventional units) before
/// any renewable replacement or storage.
pub fn rts24_conventional() -> SystemModel {
    let buses = (1..=24)
        .map(|b| {
            let load = RTS_LOADS.iter().find(|(n, _)| *n == b).map_or(0.0, |x| x.1);
            let kind = if GENERATOR_BUSES.contains(&b) { BusKind::Pv } else { BusKind::Pq };
            Bus {
                id: b - 1,
                kind,
                load: (load > 0.0 || kind == BusKind::Pq)
                    .then(|| LoadRef { series: "load_pu".into(), scale: load }),
            }
        })
        .collect();
    let mut cg_units = Vec::new();
    for &(bus, count, mw) in RTS_UNITS.iter() {
        let (mttf, mttr) = unit_reliability(mw);
        for _ in 0..count {
            cg_units.push(CgUnit { bus: bus - 1, capacity: mw, mttf, mttr });
        }
    }
    let lines = RTS_LINES
        .iter()
        .map(|&(f, t, x, r)| line(f - 1, t - 1, x, r, 21900.0, 11.0))
        .collect();
    SystemModel {
        buses,
        lines,
        cg_units,
        rg_units: vec![],
        ges_units: vec![],
        series: year_series(),
        study: study(HOURS_PER_YEAR, 50, true),
    }
}

/// 30% of the conventional capacity replaced by wind at the same buses.
pub fn rts24_base() -> SystemModel {
    scale_res_penetration(&rts24_conventional(), 0.3, &wind_template())
}

/// Renewable-bundled batteries at 30% of local wind capacity, 4 h.
pub fn rts24() -> SystemModel {
    attach_ges(&rts24_base(), &es_template(), Placement::BundledWithRg, 0.3, 4.0).expect("wind present")
}

/// Thermostatic virtual storage at the load buses, 30% of peak load, 1 h.
pub fn rts24_ves() -> SystemModel {
    attach_ges(&rts24_base(), &ves_template(), Placement::AtLoadBuses, 0.3, 1.0).expect("load buses present")
}

pub const NAMES: [&str; 6] = ["smoke", "congestion", "congestion_ges", "fault3", "rts24", "rts24_ves"];

pub fn by_name(name: &str) -> Option<SystemModel> {
    Some(match name {
        "smoke" => smoke(),
        "congestion" => congestion(false),
        "congestion_ges" => congestion(true),
        "fault3" => fault3(),
        "rts24" => rts24(),
        "rts24_ves" => rts24_ves(),
        _ => return None,
    })
}

/// Configuration document for `model`; year-long series that match the
/// shared sidecar are referenced instead of inlined.
pub fn fixture_document(model: &SystemModel) -> String {
    let mut doc = serde_json::to_value(model).expect("model serializes");
    let shared = year_series();
    if let Some(Value::Object(series)) = doc.get_mut("series") {
        for (name, value) in series.iter_mut() {
            if SIDECAR_COLUMNS.contains(&name.as_str()) && model.series.get(name) == shared.get(name) {
                *value = json!({"file": SERIES_FILE, "column": name});
            }
        }
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("value serializes");
    text.push('\n');
    text
}

/// The sidecar CSV shared by the year-long fixtures.
pub fn sidecar_csv() -> String {
    let s = year_series();
    let mut out = SIDECAR_COLUMNS.join(",");
    out.push('\n');
    for t in 0..HOURS_PER_YEAR {
        let row: Vec<String> = SIDECAR_COLUMNS.iter().map(|c| s[*c][t].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes every fixture and the sidecar into `dir`.
pub fn write_fixtures(dir: &Path) -> Result<()> {
    let io = |source| Error::Io { path: dir.to_path_buf(), source };
    std::fs::create_dir_all(dir).map_err(io)?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
    };
    write(SERIES_FILE, sidecar_csv())?;
    for name in NAMES {
        let model = by_name(name).expect("known fixture");
        write(&format!("{name}.json"), fixture_document(&model))?;
    }
    Ok(())
}
