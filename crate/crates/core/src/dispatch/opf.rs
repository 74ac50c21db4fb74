//! Hourly DC optimal power flow minimizing load curtailment.
//!
//! The LP: angles per bus (one reference per island), line flows within their
//! limits, aggregated generation per bus, curtailment per bus and dispatchable
//! storage discharge; node balance at every bus. Ties are broken by tiny
//! index-dependent costs so the optimal curtailment allocation is unique:
//! storage is used before any curtailment, lower-index units first, and
//! curtailment lands on the lowest-index buses first.
//!
//! Most hours never need the LP. When the network is connected, the copper-plate
//! solution that respects those same tie-break costs is computed directly and
//! its flows are checked with PTDFs; if no limit binds it is an optimum of the
//! LP, so the LP is only solved for congested or islanded hours.

use crate::lp::{solve_lp, LpProblem, LpStatus, RowKind};
use crate::network::{Network, PtdfCache};

const CURTAIL_TIE: f64 = 1e-6;
const DISCHARGE_COST: f64 = 1e-4;
const DISCHARGE_TIE: f64 = 1e-7;
const SPILL_COST: f64 = 1e-3;
const FLOW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageOffer {
    pub bus: usize,
    /// MW available for discharge this hour.
    pub max: f64,
}

pub struct OpfInput<'a> {
    pub network: &'a Network,
    pub line_on: &'a [bool],
    /// Available generation per bus, MW.
    pub gen_max: &'a [f64],
    /// Generation that cannot be curtailed per bus, MW.
    pub gen_min: &'a [f64],
    pub load: &'a [f64],
    /// Storage actions fixed before the OPF, MW withdrawn per bus (negative
    /// for discharge).
    pub fixed_net: &'a [f64],
    pub offers: &'a [StorageOffer],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpfResult {
    pub curtailment: Vec<f64>,
    pub discharge: Vec<f64>,
    pub generation: Vec<f64>,
    pub flows: Vec<f64>,
    /// Bus angles; only populated when the LP was solved.
    pub angles: Vec<f64>,
    pub feasible: bool,
    pub used_lp: bool,
}

impl OpfResult {
    pub fn total_curtailment(&self) -> f64 {
        self.curtailment.iter().sum()
    }

    pub fn total_discharge(&self) -> f64 {
        self.discharge.iter().sum()
    }
}

pub fn solve_opf(input: &OpfInput<'_>, cache: &mut PtdfCache) -> OpfResult {
    if let Some(r) = fast_path(input, cache) {
        return r;
    }
    solve_opf_lp(input)
}

fn fast_path(input: &OpfInput<'_>, cache: &mut PtdfCache) -> Option<OpfResult> {
    let nb = input.network.buses;
    let demand: f64 = (0..nb).map(|b| input.load[b] + input.fixed_net[b]).sum();
    let gmax: f64 = input.gen_max.iter().sum();
    let gmin: f64 = input.gen_min.iter().sum();
    if gmin > demand + 1e-9 {
        return None;
    }
    let ptdf = cache.get(input.network, input.line_on)?;
    let mut generation = vec![0.0; nb];
    let mut curtailment = vec![0.0; nb];
    let mut discharge = vec![0.0; input.offers.len()];
    if gmax >= demand {
        let flex = gmax - gmin;
        let f = if flex > 0.0 { ((demand - gmin) / flex).clamp(0.0, 1.0) } else { 0.0 };
        for b in 0..nb {
            generation[b] = input.gen_min[b] + f * (input.gen_max[b] - input.gen_min[b]);
        }
    } else {
        generation.copy_from_slice(input.gen_max);
        let mut rest = demand - gmax;
        for (k, o) in input.offers.iter().enumerate() {
            let d = o.max.max(0.0).min(rest);
            discharge[k] = d;
            rest -= d;
        }
        for b in 0..nb {
            if rest <= 0.0 {
                break;
            }
            let c = input.load[b].min(rest);
            curtailment[b] = c;
            rest -= c;
        }
        if rest > 1e-9 {
            return None;
        }
    }
    let mut injection: Vec<f64> = (0..nb)
        .map(|b| generation[b] + curtailment[b] - input.load[b] - input.fixed_net[b])
        .collect();
    for (k, o) in input.offers.iter().enumerate() {
        injection[o.bus] += discharge[k];
    }
    let mut flows = Vec::new();
    ptdf.flows(&injection, &mut flows);
    let ok = input
        .network
        .branches
        .iter()
        .zip(&flows)
        .all(|(br, f)| f.abs() <= br.limit + FLOW_TOL);
    ok.then_some(OpfResult {
        curtailment,
        discharge,
        generation,
        flows,
        angles: Vec::new(),
        feasible: true,
        used_lp: false,
    })
}

/// Builds the full OPF LP. Exposed for tests and debug dumps.
pub fn build_opf_lp(input: &OpfInput<'_>) -> (LpProblem, OpfLayout) {
    let net = input.network;
    let nb = net.buses;
    let islands = net.islands(input.line_on);
    let mut p = LpProblem::new();
    let theta: Vec<usize> = (0..nb)
        .map(|b| {
            if islands[b] == b {
                p.add_var(0.0, 0.0, 0.0)
            } else {
                p.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0)
            }
        })
        .collect();
    let flow: Vec<Option<usize>> = net
        .branches
        .iter()
        .enumerate()
        .map(|(l, br)| input.line_on[l].then(|| p.add_var(-br.limit, br.limit, 0.0)))
        .collect();
    let generation: Vec<Option<usize>> = (0..nb)
        .map(|b| (input.gen_max[b] > 0.0).then(|| p.add_var(input.gen_min[b].min(input.gen_max[b]), input.gen_max[b], 0.0)))
        .collect();
    let curtail: Vec<Option<usize>> = (0..nb)
        .map(|b| (input.load[b] > 0.0).then(|| p.add_var(0.0, input.load[b], 1.0 + CURTAIL_TIE * b as f64)))
        .collect();
    let discharge: Vec<Option<usize>> = input
        .offers
        .iter()
        .enumerate()
        .map(|(k, o)| (o.max > 0.0).then(|| p.add_var(0.0, o.max, DISCHARGE_COST + DISCHARGE_TIE * k as f64)))
        .collect();
    let needs_spill = input.gen_min.iter().any(|&g| g > 0.0) || input.fixed_net.iter().any(|&f| f < 0.0);
    let spill: Vec<Option<usize>> = (0..nb)
        .map(|_| needs_spill.then(|| p.add_var(0.0, f64::INFINITY, SPILL_COST)))
        .collect();

    for (l, br) in net.branches.iter().enumerate() {
        if let Some(f) = flow[l] {
            let y = 1.0 / br.reactance;
            p.add_row(vec![(f, 1.0), (theta[br.from], -y), (theta[br.to], y)], RowKind::Eq, 0.0);
        }
    }
    let mut balance_rows = Vec::with_capacity(nb);
    for b in 0..nb {
        let mut coeffs = Vec::new();
        if let Some(g) = generation[b] {
            coeffs.push((g, 1.0));
        }
        if let Some(c) = curtail[b] {
            coeffs.push((c, 1.0));
        }
        for (k, o) in input.offers.iter().enumerate() {
            if o.bus == b {
                if let Some(d) = discharge[k] {
                    coeffs.push((d, 1.0));
                }
            }
        }
        for (l, br) in net.branches.iter().enumerate() {
            if let Some(f) = flow[l] {
                if br.from == b {
                    coeffs.push((f, -1.0));
                } else if br.to == b {
                    coeffs.push((f, 1.0));
                }
            }
        }
        if let Some(s) = spill[b] {
            coeffs.push((s, -1.0));
        }
        balance_rows.push(p.add_row(coeffs, RowKind::Eq, input.load[b] + input.fixed_net[b]));
    }
    let layout = OpfLayout { theta, flow, generation, curtail, discharge, balance_rows };
    (p, layout)
}

/// Column indices of the OPF LP.
#[derive(Debug, Clone)]
pub struct OpfLayout {
    pub theta: Vec<usize>,
    pub flow: Vec<Option<usize>>,
    pub generation: Vec<Option<usize>>,
    pub curtail: Vec<Option<usize>>,
    pub discharge: Vec<Option<usize>>,
    pub balance_rows: Vec<usize>,
}

pub fn solve_opf_lp(input: &OpfInput<'_>) -> OpfResult {
    let nb = input.network.buses;
    let (p, layout) = build_opf_lp(input);
    let sol = match solve_lp(&p) {
        Ok(s) if s.status == LpStatus::Optimal => s,
        _ => {
            return OpfResult {
                curtailment: vec![0.0; nb],
                discharge: vec![0.0; input.offers.len()],
                generation: vec![0.0; nb],
                flows: vec![0.0; input.network.branches.len()],
                angles: vec![0.0; nb],
                feasible: false,
                used_lp: true,
            }
        }
    };
    let val = |v: Option<usize>| v.map_or(0.0, |j| sol.x[j]);
    OpfResult {
        curtailment: layout.curtail.iter().map(|&v| val(v)).collect(),
        discharge: layout.discharge.iter().map(|&v| val(v)).collect(),
        generation: layout.generation.iter().map(|&v| val(v)).collect(),
        flows: layout.flow.iter().map(|&v| val(v)).collect(),
        angles: layout.theta.iter().map(|&j| sol.x[j]).collect(),
        feasible: true,
        used_lp: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Branch;

    fn two_bus() -> Network {
        Network { buses: 2, branches: vec![Branch { from: 0, to: 1, reactance: 0.1, limit: 60.0 }] }
    }

    fn run(net: &Network, line_on: &[bool], gen: &[f64], load: &[f64], offers: &[StorageOffer]) -> (OpfResult, OpfResult) {
        let zeros = vec![0.0; net.buses];
        let input = OpfInput {
            network: net,
            line_on,
            gen_max: gen,
            gen_min: &zeros,
            load,
            fixed_net: &zeros,
            offers,
        };
        (solve_opf(&input, &mut PtdfCache::default()), solve_opf_lp(&input))
    }

    #[test]
    fn congestion_curtails_twenty() {
        let (fast, lp) = run(&two_bus(), &[true], &[100.0, 0.0], &[0.0, 80.0], &[]);
        assert!(fast.used_lp);
        assert!((fast.total_curtailment() - 20.0).abs() < 1e-9);
        assert!((lp.curtailment[1] - 20.0).abs() < 1e-9);
        assert!((lp.flows[0] - 60.0).abs() < 1e-9);
    }

    #[test]
    fn storage_behind_the_constraint() {
        let offers = [StorageOffer { bus: 1, max: 20.0 }];
        let (r, _) = run(&two_bus(), &[true], &[100.0, 0.0], &[0.0, 80.0], &offers);
        assert!(r.total_curtailment().abs() < 1e-9);
        assert!((r.discharge[0] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn fast_path_agrees_with_lp_on_deficit() {
        let net = Network {
            buses: 3,
            branches: vec![
                Branch { from: 0, to: 1, reactance: 0.1, limit: 500.0 },
                Branch { from: 1, to: 2, reactance: 0.1, limit: 500.0 },
                Branch { from: 0, to: 2, reactance: 0.2, limit: 500.0 },
            ],
        };
        let offers = [StorageOffer { bus: 2, max: 15.0 }, StorageOffer { bus: 1, max: 10.0 }];
        let (fast, lp) = run(&net, &[true; 3], &[100.0, 50.0, 0.0], &[40.0, 60.0, 90.0], &offers);
        assert!(!fast.used_lp);
        for b in 0..3 {
            assert!((fast.curtailment[b] - lp.curtailment[b]).abs() < 1e-7);
        }
        for k in 0..2 {
            assert!((fast.discharge[k] - lp.discharge[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn islanded_bus_sheds_its_load() {
        let (r, _) = run(&two_bus(), &[false], &[100.0, 0.0], &[0.0, 30.0], &[]);
        assert!(r.used_lp && r.feasible);
        assert!((r.curtailment[1] - 30.0).abs() < 1e-9);
    }
}
