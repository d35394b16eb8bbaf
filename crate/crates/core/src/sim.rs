//! Day-by-day simulation of a continuous-review (ROP, Q) policy with lost
//! sales, Monte Carlo aggregation over seeded replications, and grid search
//! over the order quantity.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{csv_io, sample_demand, DemandKind, DemandModel};
use crate::domain::{InventoryPolicy, ProductSpec};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub horizon_days: u32,
    pub replications: u64,
    pub seed: u64,
    pub demand_model_kind: DemandKind,
    /// Minimum acceptable fill rate in every replication.
    pub fill_rate_floor: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon_days: 365,
            replications: 1000,
            seed: 0,
            demand_model_kind: DemandKind::PlainNormal,
            fill_rate_floor: 0.95,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_days < 1 {
            return Err(Error::validation("horizon_days must be >= 1"));
        }
        if self.replications < 1 {
            return Err(Error::validation("replications must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.fill_rate_floor) {
            return Err(Error::validation("fill_rate_floor must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DayRecord {
    pub day: u32,
    /// Stock on hand at the end of the day.
    pub inventory_on_hand: u64,
    pub demand: u64,
    pub units_sold: u64,
    pub lost: u64,
    pub order_placed: bool,
    pub units_received: u64,
    /// Orders still in transit at day end, as (arrival day, quantity).
    pub outstanding: Vec<(u32, u64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SimulationLedger {
    pub days: Vec<DayRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub profit: f64,
    pub revenue: f64,
    pub purchase_cost_total: f64,
    pub order_cost_total: f64,
    pub holding_cost_total: f64,
    pub fill_rate: f64,
    pub lost_fraction: f64,
    pub total_demand: u64,
    pub units_sold: u64,
    pub units_lost: u64,
    pub units_received: u64,
    pub orders_placed: u64,
    pub ending_inventory: u64,
    /// Mean day-end stock on hand.
    pub mean_inventory: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub order_quantity: u64,
    pub replications: u64,
    pub mean_profit: f64,
    pub profit_std: f64,
    pub mean_lost_orders: f64,
    pub mean_fill_rate: f64,
    /// Worst fill rate over all replications.
    pub min_fill_rate: f64,
    pub mean_inventory: f64,
}

impl SimulationSummary {
    pub fn profit_std_error(&self) -> f64 {
        self.profit_std / (self.replications as f64).sqrt()
    }

    pub fn is_feasible(&self, fill_rate_floor: f64) -> bool {
        self.min_fill_rate >= fill_rate_floor
    }
}

/// Runs one replication and records the full daily ledger.
pub fn simulate_replication<R: Rng + ?Sized>(
    spec: &ProductSpec,
    policy: &InventoryPolicy,
    model: &DemandModel,
    horizon: u32,
    rng: &mut R,
) -> Result<(SimulationLedger, ReplicationResult)> {
    check_policy(policy)?;
    let mut ledger = SimulationLedger { days: Vec::with_capacity(horizon as usize) };
    let result = run_days(spec, policy, model, horizon, rng, Some(&mut ledger));
    Ok((ledger, result))
}

/// Runs one replication without keeping the ledger.
pub fn replicate<R: Rng + ?Sized>(
    spec: &ProductSpec,
    policy: &InventoryPolicy,
    model: &DemandModel,
    horizon: u32,
    rng: &mut R,
) -> Result<ReplicationResult> {
    check_policy(policy)?;
    Ok(run_days(spec, policy, model, horizon, rng, None))
}

fn check_policy(policy: &InventoryPolicy) -> Result<()> {
    if policy.order_quantity == 0 {
        return Err(Error::domain("order quantity must be > 0"));
    }
    Ok(())
}

fn run_days<R: Rng + ?Sized>(
    spec: &ProductSpec,
    policy: &InventoryPolicy,
    model: &DemandModel,
    horizon: u32,
    rng: &mut R,
    mut ledger: Option<&mut SimulationLedger>,
) -> ReplicationResult {
    let mut on_hand = spec.starting_stock;
    let mut on_order: u64 = 0;
    let mut in_transit: VecDeque<(u32, u64)> = VecDeque::new();

    let mut total_demand = 0;
    let mut sold_total = 0;
    let mut received_total = 0;
    let mut orders = 0;
    let mut inventory_days: u64 = 0;

    for day in 1..=horizon {
        let mut received = 0;
        while let Some(&(arrival, q)) = in_transit.front() {
            if arrival != day {
                break;
            }
            in_transit.pop_front();
            received += q;
        }
        on_hand += received;
        on_order -= received;

        let demand = sample_demand(model, rng);
        let sold = demand.min(on_hand);
        on_hand -= sold;

        let place = on_hand + on_order <= policy.reorder_point;
        if place {
            in_transit.push_back((day + spec.lead_time_days, policy.order_quantity));
            on_order += policy.order_quantity;
            orders += 1;
        }

        total_demand += demand;
        sold_total += sold;
        received_total += received;
        inventory_days += on_hand;

        if let Some(ledger) = ledger.as_deref_mut() {
            ledger.days.push(DayRecord {
                day,
                inventory_on_hand: on_hand,
                demand,
                units_sold: sold,
                lost: demand - sold,
                order_placed: place,
                units_received: received,
                outstanding: in_transit.iter().copied().collect(),
            });
        }
    }

    let revenue = spec.selling_price * sold_total as f64;
    let purchase_cost_total = spec.purchase_cost * received_total as f64;
    let order_cost_total = spec.order_cost * orders as f64;
    let holding_cost_total = spec.daily_holding_cost() * inventory_days as f64;
    let profit = revenue - purchase_cost_total - order_cost_total - holding_cost_total;
    let (fill_rate, lost_fraction) = if total_demand > 0 {
        let f = sold_total as f64 / total_demand as f64;
        (f, (total_demand - sold_total) as f64 / total_demand as f64)
    } else {
        (1.0, 0.0)
    };

    ReplicationResult {
        profit,
        revenue,
        purchase_cost_total,
        order_cost_total,
        holding_cost_total,
        fill_rate,
        lost_fraction,
        total_demand,
        units_sold: sold_total,
        units_lost: total_demand - sold_total,
        units_received: received_total,
        orders_placed: orders,
        ending_inventory: on_hand,
        mean_inventory: inventory_days as f64 / f64::from(horizon),
    }
}

/// Sample mean and (n - 1) standard deviation, computed on data shifted by
/// its first element so identical samples give exactly zero spread.
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let shift = xs[0];
    let (s, ss) = xs.iter().fold((0.0, 0.0), |(s, ss), x| {
        let d = x - shift;
        (s + d, ss + d * d)
    });
    let mean = shift + s / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((ss - s * s / n as f64) / (n - 1) as f64).max(0.0);
    (mean, var.sqrt())
}

/// Aggregates replications run on per-replication substreams.
pub fn run_monte_carlo(
    spec: &ProductSpec,
    policy: &InventoryPolicy,
    model: &DemandModel,
    config: &SimulationConfig,
) -> Result<SimulationSummary> {
    config.validate()?;
    check_policy(policy)?;
    let results: Vec<ReplicationResult> = (0..config.replications)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng::substream(config.seed, &spec.product_id, i);
            run_days(spec, policy, model, config.horizon_days, &mut stream, None)
        })
        .collect();
    Ok(summarize_replications(policy.order_quantity, &results))
}

pub fn summarize_replications(order_quantity: u64, results: &[ReplicationResult]) -> SimulationSummary {
    let n = results.len() as f64;
    let profits: Vec<f64> = results.iter().map(|r| r.profit).collect();
    let (mean_profit, profit_std) = mean_std(&profits);
    SimulationSummary {
        order_quantity,
        replications: results.len() as u64,
        mean_profit,
        profit_std,
        mean_lost_orders: results.iter().map(|r| r.lost_fraction).sum::<f64>() / n,
        mean_fill_rate: results.iter().map(|r| r.fill_rate).sum::<f64>() / n,
        min_fill_rate: results.iter().map(|r| r.fill_rate).fold(f64::INFINITY, f64::min),
        mean_inventory: results.iter().map(|r| r.mean_inventory).sum::<f64>() / n,
    }
}

/// Ledger of replication `index` under `config`'s seed bank, for plotting.
pub fn trace_replication(
    spec: &ProductSpec,
    policy: &InventoryPolicy,
    model: &DemandModel,
    config: &SimulationConfig,
    index: u64,
) -> Result<SimulationLedger> {
    let mut stream = rng::substream(config.seed, &spec.product_id, index);
    simulate_replication(spec, policy, model, config.horizon_days, &mut stream).map(|(l, _)| l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridIncumbent {
    pub index: usize,
    /// False when constraint mode found no point meeting the fill-rate floor;
    /// `index` then holds the unconstrained argmax.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearchResult {
    pub summaries: Vec<SimulationSummary>,
    pub incumbent: GridIncumbent,
}

impl GridSearchResult {
    pub fn best(&self) -> &SimulationSummary {
        &self.summaries[self.incumbent.index]
    }
}

/// Order quantities `q_start, q_start + q_step, ..` up to `q_end` inclusive.
pub fn grid_points(q_start: u64, q_end: u64, q_step: u64) -> Result<Vec<u64>> {
    if q_start < 1 || q_step < 1 || q_end < q_start {
        return Err(Error::domain(format!("empty order-quantity grid [{q_start}, {q_end}] step {q_step}")));
    }
    Ok((q_start..=q_end).step_by(q_step as usize).collect())
}

/// Index of the largest mean profit (first on ties), optionally restricted
/// to points meeting `floor`.
pub fn best_index(summaries: &[SimulationSummary], floor: Option<f64>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in summaries.iter().enumerate() {
        if floor.is_some_and(|f| !s.is_feasible(f)) {
            continue;
        }
        if best.is_none_or(|b| s.mean_profit > summaries[b].mean_profit) {
            best = Some(i);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    spec: &ProductSpec,
    model: &DemandModel,
    base_policy: &InventoryPolicy,
    config: &SimulationConfig,
    q_start: u64,
    q_end: u64,
    q_step: u64,
    constrained: bool,
) -> Result<GridSearchResult> {
    let qs = grid_points(q_start, q_end, q_step)?;
    let summaries = qs
        .par_iter()
        .map(|&q| run_monte_carlo(spec, &base_policy.with_order_quantity(q), model, config))
        .collect::<Result<Vec<_>>>()?;
    let unconstrained = best_index(&summaries, None).expect("grid is nonempty");
    let incumbent = if constrained {
        match best_index(&summaries, Some(config.fill_rate_floor)) {
            Some(index) => GridIncumbent { index, feasible: true },
            None => GridIncumbent { index: unconstrained, feasible: false },
        }
    } else {
        GridIncumbent { index: unconstrained, feasible: true }
    };
    Ok(GridSearchResult { summaries, incumbent })
}

/// Writes `product,q,mean_profit,profit_std,mean_lost_orders,min_fill_rate`.
pub fn write_summary_csv<'a, W: Write>(
    rows: impl IntoIterator<Item = (&'a str, &'a SimulationSummary)>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["product", "q", "mean_profit", "profit_std", "mean_lost_orders", "min_fill_rate"])
        .map_err(csv_io)?;
    for (product, s) in rows {
        w.write_record([
            product.to_string(),
            s.order_quantity.to_string(),
            s.mean_profit.to_string(),
            s.profit_std.to_string(),
            s.mean_lost_orders.to_string(),
            s.min_fill_rate.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `day,inventory` for a Fig-5 style trajectory plot.
pub fn write_trajectory_csv<W: Write>(ledger: &SimulationLedger, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["day", "inventory"]).map_err(csv_io)?;
    for d in &ledger.days {
        w.write_record([d.day.to_string(), d.inventory_on_hand.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(start: u64, lt: u32) -> ProductSpec {
        ProductSpec {
            product_id: "t".into(),
            purchase_cost: 4.0,
            lead_time_days: lt,
            selling_price: 10.0,
            starting_stock: start,
            order_cost: 50.0,
            holding_cost_flat: 20.0,
            holding_rate_annual: 0.2,
        }
    }

    fn policy(rop: u64, q: u64) -> InventoryPolicy {
        InventoryPolicy { safety_stock: 0, reorder_point: rop, order_quantity: q, service_level: 0.95 }
    }

    #[test]
    fn ample_stock_never_loses_sales() {
        let mut rng = rng::substream(0, "t", 0);
        let (ledger, r) = simulate_replication(
            &spec(1_000_000_000, 3),
            &policy(10, 100),
            &DemandModel::constant(10.0),
            365,
            &mut rng,
        )
        .unwrap();
        assert_eq!(r.units_lost, 0);
        assert_eq!(r.fill_rate, 1.0);
        assert_eq!(r.units_sold, r.total_demand);
        assert_eq!(r.total_demand, 3650);
        assert_eq!(ledger.days.len(), 365);
    }

    #[test]
    fn nothing_arrives_beyond_horizon() {
        let mut rng = rng::substream(0, "t", 0);
        let model = DemandModel::new(DemandKind::PlainNormal, 20.0, 5.0, 1.0).unwrap();
        let (_, r) = simulate_replication(&spec(0, 400), &policy(50, 77), &model, 365, &mut rng).unwrap();
        assert_eq!(r.fill_rate, 0.0);
        assert_eq!(r.revenue, 0.0);
        assert_eq!(r.units_received, 0);
    }

    #[test]
    fn desk_trace() {
        let mut rng = rng::substream(0, "t", 0);
        let (ledger, _) =
            simulate_replication(&spec(100, 2), &policy(50, 100), &DemandModel::constant(10.0), 30, &mut rng).unwrap();
        // Hand trace: each 100-unit lot is reordered when day-end stock hits
        // 50 and lands two days later, after which stock goes 130, 120, ..
        let mut on_hand: u64 = 100;
        let mut arrivals: Vec<(u32, u64)> = Vec::new();
        for d in &ledger.days {
            let received: u64 = arrivals.iter().filter(|a| a.0 == d.day).map(|a| a.1).sum();
            arrivals.retain(|a| a.0 != d.day);
            on_hand = on_hand + received - 10;
            let pending: u64 = arrivals.iter().map(|a| a.1).sum();
            let placed = on_hand + pending <= 50;
            if placed {
                arrivals.push((d.day + 2, 100));
            }
            assert_eq!(d.units_received, received, "day {}", d.day);
            assert_eq!(d.inventory_on_hand, on_hand, "day {}", d.day);
            assert_eq!(d.order_placed, placed, "day {}", d.day);
            assert_eq!(d.units_sold, 10);
        }
        let first = ledger.days.iter().find(|d| d.order_placed).unwrap();
        assert_eq!(first.day, 5);
        assert_eq!(first.inventory_on_hand, 50);
        assert_eq!(first.outstanding, vec![(7, 100)]);
        assert_eq!(ledger.days[6].units_received, 100);
        assert_eq!(ledger.days[6].inventory_on_hand, 130);
    }

    #[test]
    fn deterministic_demand_has_zero_profit_spread() {
        let cfg = SimulationConfig { replications: 37, ..Default::default() };
        let s = run_monte_carlo(&spec(500, 3), &policy(100, 300), &DemandModel::constant(12.0), &cfg).unwrap();
        assert_eq!(s.profit_std, 0.0);
    }

    #[test]
    fn oversized_lots_keep_losses_small() {
        let model = DemandModel::new(DemandKind::PlainNormal, 78.33, 55.08, 1.0).unwrap();
        let annual = (78.33f64 * 365.0) as u64;
        let cfg = SimulationConfig { replications: 200, ..Default::default() };
        let s = run_monte_carlo(&spec(2 * annual, 9), &policy(1116, 10 * annual), &model, &cfg).unwrap();
        assert!(s.mean_lost_orders < 0.01, "{}", s.mean_lost_orders);
    }

    #[test]
    fn zero_order_quantity_is_rejected() {
        let cfg = SimulationConfig::default();
        assert!(run_monte_carlo(&spec(1, 1), &policy(1, 0), &DemandModel::constant(1.0), &cfg).is_err());
    }

    #[test]
    fn single_point_grid() {
        let cfg = SimulationConfig { replications: 10, ..Default::default() };
        let model = DemandModel::new(DemandKind::PlainNormal, 10.0, 3.0, 1.0).unwrap();
        let r = grid_search(&spec(100, 2), &model, &policy(30, 1), &cfg, 120, 120, 10, false).unwrap();
        assert_eq!(r.summaries.len(), 1);
        assert_eq!(r.best().order_quantity, 120);
        assert!(grid_search(&spec(100, 2), &model, &policy(30, 1), &cfg, 120, 100, 10, false).is_err());
    }

    #[test]
    fn grid_incumbent_matches_exhaustive_argmax() {
        let cfg = SimulationConfig { replications: 3, ..Default::default() };
        let model = DemandModel::constant(10.0);
        let s = spec(200, 4);
        let base = policy(60, 1);
        let r = grid_search(&s, &model, &base, &cfg, 10, 600, 10, false).unwrap();
        let mut best = (0, f64::NEG_INFINITY);
        for q in (10..=600).step_by(10) {
            let p = run_monte_carlo(&s, &base.with_order_quantity(q), &model, &cfg).unwrap().mean_profit;
            if p > best.1 {
                best = (q, p);
            }
        }
        assert_eq!(r.best().order_quantity, best.0);
    }

    #[test]
    fn unsatisfiable_floor_flags_incumbent() {
        let cfg = SimulationConfig { replications: 20, fill_rate_floor: 1.0, ..Default::default() };
        let model = DemandModel::new(DemandKind::PlainNormal, 50.0, 30.0, 1.0).unwrap();
        let r = grid_search(&spec(0, 10), &model, &policy(0, 1), &cfg, 10, 50, 10, true).unwrap();
        assert!(!r.incumbent.feasible);
    }

    #[test]
    fn mean_std_of_identical_samples() {
        assert_eq!(mean_std(&[0.1 + 0.2; 7]), (0.1 + 0.2, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.290_994_448_735_805_6).abs() < 1e-15);
    }
}
