//! Greedy management: charge from spare capacity in normal hours, discharge
//! as needed in emergencies.

use crate::dispatch::UnitView;
use crate::ges::GesUnit;

/// Charge per unit in a normal hour: its capacity share of the residual
/// capacity, limited by power and by headroom below the SoC cap.
pub fn greedy_normal_charge(residual_capacity: f64, views: &[UnitView], units: &[GesUnit]) -> Vec<f64> {
    let rc = residual_capacity.max(0.0);
    units
        .iter()
        .zip(views)
        .map(|(u, v)| (u.capacity_share * rc).min(v.max_charge(u)).max(0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::fixed::tests::es;

    fn view(soc: f64) -> UnitView {
        UnitView { on: true, energy: 120.0, free_soc: soc, floor: 0.0, cap: 1.0 }
    }

    #[test]
    fn share_of_residual_capacity() {
        let mut a = es(30.0, 120.0);
        a.capacity_share = 0.5;
        let units = [a.clone(), a];
        assert_eq!(greedy_normal_charge(50.0, &[view(0.2), view(0.2)], &units), vec![25.0, 25.0]);
        assert_eq!(greedy_normal_charge(0.0, &[view(0.2), view(0.2)], &units), vec![0.0, 0.0]);
        assert_eq!(greedy_normal_charge(500.0, &[view(0.2), view(1.0)], &units), vec![30.0, 0.0]);
    }
}
