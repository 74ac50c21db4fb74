//! Day-ahead price arbitrage; the baseline schedule of physical storage under
//! coordinated dispatch.

use crate::dispatch::DispatchPlan;
use crate::error::{Error, Result};
use crate::ges::GesUnit;
use crate::lp::{solve_lp, LpProblem, LpStatus, RowKind};

const ACTION_COST: f64 = 1e-6;

/// Maximizes `sum price_t (discharge_t - charge_t)` over the window subject to
/// power and SoC limits, ending at the starting SoC.
pub fn arbitrage_schedule(
    unit: &GesUnit,
    prices: &[f64],
    soc0: f64,
    energy: f64,
    self_discharge: f64,
) -> Result<DispatchPlan> {
    let h = prices.len();
    if energy <= 0.0 || h == 0 {
        return Ok(DispatchPlan {
            charge: vec![vec![0.0; h]],
            discharge: vec![vec![0.0; h]],
            soc: vec![vec![soc0; h + 1]],
            ..Default::default()
        });
    }
    let mut p = LpProblem::new();
    let mut cols = Vec::with_capacity(h);
    let mut prev: Option<usize> = None;
    for (t, &price) in prices.iter().enumerate() {
        let c = p.add_var(0.0, unit.p_charge_max, price + ACTION_COST);
        let d = p.add_var(0.0, unit.p_discharge_max, -price + ACTION_COST);
        let (lo, hi) = if t + 1 == h { (soc0, soc0) } else { (unit.soc_min, unit.soc_max) };
        let x = p.add_var(lo, hi, 0.0);
        let mut coeffs = vec![(x, 1.0), (c, -unit.eta_c / energy), (d, 1.0 / (unit.eta_d * energy))];
        let rhs = match prev {
            Some(xp) => {
                coeffs.push((xp, -(1.0 - self_discharge)));
                0.0
            }
            None => (1.0 - self_discharge) * soc0,
        };
        p.add_row(coeffs, RowKind::Eq, rhs);
        prev = Some(x);
        cols.push((c, d, x));
    }
    let sol = solve_lp(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("arbitrage LP is {:?}", sol.status)));
    }
    let mut plan = DispatchPlan {
        charge: vec![cols.iter().map(|v| sol.x[v.0].max(0.0)).collect()],
        discharge: vec![cols.iter().map(|v| sol.x[v.1].max(0.0)).collect()],
        soc: vec![std::iter::once(soc0).chain(cols.iter().map(|v| sol.x[v.2])).collect()],
        ..Default::default()
    };
    plan.enforce_complementarity();
    plan.profit = prices
        .iter()
        .enumerate()
        .map(|(t, price)| price * (plan.discharge[0][t] - plan.charge[0][t]))
        .sum();
    Ok(plan)
}
