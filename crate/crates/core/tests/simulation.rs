use invopt_core::demand::{DemandKind, DemandModel};
use invopt_core::domain::{InventoryPolicy, ProductSpec};
use invopt_core::rng::substream;
use invopt_core::sim::{
    grid_search, run_monte_carlo, simulate_replication, ReplicationResult, SimulationConfig, SimulationLedger,
};
use proptest::prelude::*;

fn spec(lead_time: u32, start: u64) -> ProductSpec {
    ProductSpec {
        product_id: "T".into(),
        purchase_cost: 12.0,
        lead_time_days: lead_time,
        selling_price: 16.1,
        starting_stock: start,
        order_cost: 1000.0,
        holding_cost_flat: 20.0,
        holding_rate_annual: 0.2,
    }
}

fn policy(rop: u64, q: u64) -> InventoryPolicy {
    InventoryPolicy { safety_stock: 0, reorder_point: rop, order_quantity: q, service_level: 0.95 }
}

/// Rebuilds the cash flows from the day ledger alone.
fn ledger_accounts(spec: &ProductSpec, ledger: &SimulationLedger) -> (f64, f64, f64, f64) {
    let sold: u64 = ledger.days.iter().map(|d| d.units_sold).sum();
    let received: u64 = ledger.days.iter().map(|d| d.units_received).sum();
    let orders = ledger.days.iter().filter(|d| d.order_placed).count();
    let stock_days: u64 = ledger.days.iter().map(|d| d.inventory_on_hand).sum();
    (
        spec.selling_price * sold as f64,
        spec.purchase_cost * received as f64,
        spec.order_cost * orders as f64,
        spec.holding_rate_annual * spec.purchase_cost / 365.0 * stock_days as f64,
    )
}

fn check_replication(
    spec: &ProductSpec,
    ledger: &SimulationLedger,
    r: &ReplicationResult,
) -> Result<(), TestCaseError> {
    let mut on_hand = spec.starting_stock;
    for d in &ledger.days {
        prop_assert_eq!(d.units_sold + d.lost, d.demand);
        prop_assert!(d.units_sold <= d.demand);
        on_hand = on_hand + d.units_received - d.units_sold;
        prop_assert_eq!(on_hand, d.inventory_on_hand);
    }
    prop_assert_eq!(spec.starting_stock + r.units_received - r.units_sold, r.ending_inventory);
    prop_assert_eq!(r.units_sold + r.units_lost, r.total_demand);
    let (rev, purchase, ordering, holding) = ledger_accounts(spec, ledger);
    prop_assert!((rev - r.revenue).abs() < 1e-6);
    prop_assert!((purchase - r.purchase_cost_total).abs() < 1e-6);
    prop_assert!((ordering - r.order_cost_total).abs() < 1e-6);
    prop_assert!((holding - r.holding_cost_total).abs() < 1e-6);
    let identity = r.revenue - r.purchase_cost_total - r.order_cost_total - r.holding_cost_total;
    prop_assert!((identity - r.profit).abs() < 1e-6);
    prop_assert!((0.0..=1.0).contains(&r.fill_rate));
    if r.total_demand > 0 {
        prop_assert!((r.fill_rate + r.lost_fraction - 1.0).abs() < 1e-12);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replication_conserves_stock_and_cash(
        lead_time in 1u32..20,
        start in 0u64..5000,
        rop in 0u64..3000,
        q in 1u64..6000,
        mean in 0.0..300.0f64,
        std in 0.0..200.0f64,
        p in 0.05..1.0f64,
        gated in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let spec = spec(lead_time, start);
        let kind = if gated { DemandKind::BernoulliGated } else { DemandKind::PlainNormal };
        let model = DemandModel::new(kind, mean, std, p).unwrap();
        let mut rng = substream(seed, "T", 0);
        let (ledger, r) = simulate_replication(&spec, &policy(rop, q), &model, 365, &mut rng).unwrap();
        prop_assert_eq!(ledger.days.len(), 365);
        check_replication(&spec, &ledger, &r)?;
    }
}

#[test]
fn fill_rate_nondecreasing_over_doubling_grid() {
    let spec = spec(9, 2750);
    let model = DemandModel::new(DemandKind::PlainNormal, 78.33, 55.08, 0.76).unwrap();
    for seed in 0..5 {
        let config = SimulationConfig { replications: 200, seed, ..SimulationConfig::default() };
        let mut previous: Option<(f64, f64)> = None;
        let mut q = 100;
        while q <= 6400 {
            let s = run_monte_carlo(&spec, &policy(977, q), &model, &config).unwrap();
            let fills: Vec<f64> = (0..config.replications)
                .map(|i| {
                    let mut rng = substream(seed, "T", i);
                    simulate_replication(&spec, &policy(977, q), &model, 365, &mut rng).unwrap().1.fill_rate
                })
                .collect();
            let n = fills.len() as f64;
            let mean = fills.iter().sum::<f64>() / n;
            let se = (fills.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
            assert!((mean - s.mean_fill_rate).abs() < 1e-12);
            if let Some((prev, prev_se)) = previous {
                assert!(mean >= prev - se.max(prev_se), "seed {seed} q {q}: {mean} < {prev}");
            }
            previous = Some((mean, se));
            q *= 2;
        }
    }
}

#[test]
fn summary_independent_of_thread_count() {
    let spec = spec(6, 22500);
    let model = DemandModel::new(DemandKind::PlainNormal, 648.55, 26.48, 1.0).unwrap();
    let config = SimulationConfig { replications: 300, seed: 9, ..SimulationConfig::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let s = run_monte_carlo(&spec, &policy(3998, 5337), &model, &config).unwrap();
            let g = grid_search(&spec, &model, &policy(3998, 5337), &config, 3998, 4998, 250, false).unwrap();
            (serde_json::to_string(&s).unwrap(), serde_json::to_string(&g.summaries).unwrap(), g.incumbent.index)
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(8));
}

#[test]
fn zero_spread_demand_has_zero_profit_spread() {
    let model = DemandModel::constant(40.0);
    let config = SimulationConfig { replications: 50, ..SimulationConfig::default() };
    let s = run_monte_carlo(&spec(3, 500), &policy(200, 400), &model, &config).unwrap();
    assert_eq!(s.profit_std, 0.0);
}

#[test]
fn over_provisioned_policy_rarely_loses_sales() {
    let model = DemandModel::new(DemandKind::PlainNormal, 78.33, 55.08, 1.0).unwrap();
    let annual = 78.33 * 365.0;
    let config = SimulationConfig { replications: 200, seed: 3, ..SimulationConfig::default() };
    let q = (10.0 * annual) as u64;
    let s = run_monte_carlo(&spec(9, 5000), &policy(2000, q), &model, &config).unwrap();
    assert!(s.mean_lost_orders < 0.01, "{}", s.mean_lost_orders);
}
