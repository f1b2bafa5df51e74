use crate::lob::{Price, Qty};

/// Per-step reward decomposition, all in tick-currency units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub pnl: f64,
    pub inventory_cost: f64,
    pub transaction_cost: f64,
    pub total: f64,
}

/// Instantaneous reward of one step:
/// pnl from fills against the current mid, inventory mark-to-market over the
/// step, minus a quadratic penalty on the executed volume.
///
/// `ask_fills` are the agent's sells (quantity, price), `bid_fills` its
/// buys. `executed_volume` is the step's total executed size.
pub fn reward(
    ask_fills: &[(Qty, Price)],
    bid_fills: &[(Qty, Price)],
    mid: f64,
    prev_mid: f64,
    inventory: i64,
    executed_volume: Qty,
    penalty: f64,
) -> RewardBreakdown {
    let mut pnl = 0.0;
    for &(q, p) in ask_fills {
        pnl += q as f64 * (p as f64 - mid);
    }
    for &(q, p) in bid_fills {
        pnl += q as f64 * (mid - p as f64);
    }
    let inventory_cost = inventory as f64 * (mid - prev_mid);
    let transaction_cost = penalty * (executed_volume as f64) * (executed_volume as f64);
    let total = pnl + inventory_cost - transaction_cost;
    RewardBreakdown {
        pnl,
        inventory_cost,
        transaction_cost,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sell_above_mid_earns_spread() {
        // sell 2 @ 101 with mid 100, flat mid, no executed volume counted
        let r = reward(&[(2, 101)], &[], 100.0, 100.0, 0, 0, 0.06);
        assert_eq!(r.pnl, 2.0);
        assert_eq!(r.inventory_cost, 0.0);
        assert_eq!(r.transaction_cost, 0.0);
        assert_eq!(r.total, 2.0);
    }

    #[test]
    fn inventory_marks_to_market() {
        let r = reward(&[], &[], 101.0, 100.0, 5, 0, 0.06);
        assert_eq!(r.pnl, 0.0);
        assert_eq!(r.inventory_cost, 5.0);
        assert_eq!(r.total, 5.0);
    }

    #[test]
    fn quadratic_transaction_penalty() {
        let r = reward(&[], &[], 100.0, 100.0, 0, 10, 0.06);
        assert_eq!(r.transaction_cost, 6.0);
        assert_eq!(r.total, -6.0);
    }

    #[test]
    fn decomposition_identity_holds_exactly() {
        let r = reward(&[(3, 105), (1, 104)], &[(2, 99)], 101.5, 100.25, -7, 6, 0.06);
        assert_eq!(r.total, r.pnl + r.inventory_cost - r.transaction_cost);
    }

    #[test]
    fn buys_below_mid_earn_spread() {
        let r = reward(&[], &[(4, 99)], 100.0, 100.0, 0, 4, 0.0);
        assert_eq!(r.pnl, 4.0);
        assert_eq!(r.total, 4.0);
    }
}
