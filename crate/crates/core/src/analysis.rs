//! Sensitivity sweeps, what-if profit grids and one-way ANOVA.

use std::io::Write;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::demand::{csv_io, DemandModel};
use crate::domain::{round_units, InventoryPolicy, ProductSpec};
use crate::error::{Error, Result};
use crate::sim::{run_monte_carlo, SimulationConfig, SimulationSummary};
use crate::special::f_survival;

/// Inputs that a sensitivity sweep can scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    OrderQuantity,
    ReorderPoint,
    SellingPrice,
    PurchaseCost,
    OrderCost,
    HoldingRate,
    LeadTime,
    MeanDemand,
    StdDemand,
}

impl Parameter {
    pub const ALL: [Parameter; 9] = [
        Parameter::OrderQuantity,
        Parameter::ReorderPoint,
        Parameter::SellingPrice,
        Parameter::PurchaseCost,
        Parameter::OrderCost,
        Parameter::HoldingRate,
        Parameter::LeadTime,
        Parameter::MeanDemand,
        Parameter::StdDemand,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::OrderQuantity => "order_quantity",
            Parameter::ReorderPoint => "reorder_point",
            Parameter::SellingPrice => "selling_price",
            Parameter::PurchaseCost => "purchase_cost",
            Parameter::OrderCost => "order_cost",
            Parameter::HoldingRate => "holding_rate",
            Parameter::LeadTime => "lead_time",
            Parameter::MeanDemand => "mean_demand",
            Parameter::StdDemand => "std_demand",
        }
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown sensitivity parameter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCell {
    pub variation: f64,
    /// The scaled parameter value actually simulated.
    pub value: f64,
    pub summary: SimulationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub product_id: String,
    pub parameter: Parameter,
    pub baseline: SimulationSummary,
    pub cells: Vec<SensitivityCell>,
    /// Variations dropped because the scaled parameter was not positive.
    pub skipped: Vec<f64>,
}

impl SensitivityReport {
    pub fn cell(&self, variation: f64) -> Option<&SensitivityCell> {
        self.cells.iter().find(|c| c.variation == variation)
    }
}

struct Scenario {
    spec: ProductSpec,
    policy: InventoryPolicy,
    model: DemandModel,
    value: f64,
}

fn scale_int(v: u64, factor: f64) -> u64 {
    round_units(v as f64 * factor)
}

fn scaled(
    spec: &ProductSpec,
    policy: &InventoryPolicy,
    model: &DemandModel,
    parameter: Parameter,
    factor: f64,
) -> Scenario {
    let mut s = Scenario { spec: spec.clone(), policy: *policy, model: *model, value: 0.0 };
    s.value = match parameter {
        Parameter::OrderQuantity => {
            s.policy.order_quantity = scale_int(policy.order_quantity, factor);
            s.policy.order_quantity as f64
        }
        Parameter::ReorderPoint => {
            s.policy.reorder_point = scale_int(policy.reorder_point, factor);
            s.policy.reorder_point as f64
        }
        Parameter::SellingPrice => {
            s.spec.selling_price *= factor;
            s.spec.selling_price
        }
        Parameter::PurchaseCost => {
            s.spec.purchase_cost *= factor;
            s.spec.purchase_cost
        }
        Parameter::OrderCost => {
            s.spec.order_cost *= factor;
            s.spec.order_cost
        }
        Parameter::HoldingRate => {
            s.spec.holding_rate_annual *= factor;
            s.spec.holding_rate_annual
        }
        Parameter::LeadTime => {
            s.spec.lead_time_days = scale_int(u64::from(spec.lead_time_days), factor) as u32;
            f64::from(s.spec.lead_time_days)
        }
        Parameter::MeanDemand => {
            s.model.mean_daily *= factor;
            s.model.mean_daily
        }
        Parameter::StdDemand => {
            s.model.std_daily *= factor;
            s.model.std_daily
        }
    };
    s
}

/// Re-runs the simulator with one parameter scaled by `1 + v` for each
/// variation `v`, on the baseline's seed bank.
pub fn sensitivity_sweep(
    spec: &ProductSpec,
    model: &DemandModel,
    sim_config: &SimulationConfig,
    baseline_policy: &InventoryPolicy,
    parameter: Parameter,
    variations: &[f64],
) -> Result<SensitivityReport> {
    if let Some(v) = variations.iter().find(|v| !(**v > -1.0) || !v.is_finite()) {
        return Err(Error::domain(format!("variation {v} must be a finite value > -1")));
    }
    let baseline = run_monte_carlo(spec, baseline_policy, model, sim_config)?;
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for &v in variations {
        let s = scaled(spec, baseline_policy, model, parameter, 1.0 + v);
        if !(s.value > 0.0) {
            log::warn!("{}: {} scaled by {v:+} is not positive; skipping", spec.product_id, parameter.name());
            skipped.push(v);
            continue;
        }
        let summary = run_monte_carlo(&s.spec, &s.policy, &s.model, sim_config)?;
        cells.push(SensitivityCell { variation: v, value: s.value, summary });
    }
    Ok(SensitivityReport { product_id: spec.product_id.clone(), parameter, baseline, cells, skipped })
}

/// Writes a Table-IV style grid: one row per product and metric, one
/// column per variation.
pub fn write_sensitivity_csv<W: Write>(reports: &[SensitivityReport], variations: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["product".to_string(), "parameter".into(), "metric".into(), "baseline".into()];
    header.extend(variations.iter().map(|v| format!("{v:+}")));
    w.write_record(&header).map_err(csv_io)?;
    type Metric = fn(&SimulationSummary) -> String;
    let metrics: [(&str, Metric); 4] = [
        ("mean_profit", |s| s.mean_profit.to_string()),
        ("profit_std", |s| s.profit_std.to_string()),
        ("mean_lost_orders", |s| s.mean_lost_orders.to_string()),
        ("min_fill_rate", |s| s.min_fill_rate.to_string()),
    ];
    for r in reports {
        for (name, get) in metrics {
            let mut row = vec![r.product_id.clone(), r.parameter.name().into(), name.into(), get(&r.baseline)];
            row.extend(variations.iter().map(|&v| r.cell(v).map_or_else(String::new, |c| get(&c.summary))));
            w.write_record(&row).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhatIfCell {
    pub product: String,
    pub step: usize,
    pub adjusted_profit: f64,
    /// Sum over products with this one adjusted and the rest at baseline.
    pub overall_profit: f64,
}

/// For each product, `steps` profit values evenly spaced over
/// `mean ± half_range`, with the resulting portfolio total.
pub fn whatif_profit_grid(mean_profits: &[(String, f64)], half_range: f64, steps: usize) -> Result<Vec<WhatIfCell>> {
    if steps < 2 {
        return Err(Error::domain(format!("what-if grid needs at least 2 steps, got {steps}")));
    }
    if !(half_range > 0.0) {
        return Err(Error::domain(format!("half_range must be > 0, got {half_range}")));
    }
    let total: f64 = mean_profits.iter().map(|(_, p)| p).sum();
    let last = (steps - 1) as f64;
    let mut out = Vec::with_capacity(mean_profits.len() * steps);
    for (product, mean) in mean_profits {
        for k in 0..steps {
            // offset factor is exactly antisymmetric in k and 0 at the centre
            let factor = (2 * k) as f64 - last;
            let adjusted = mean + half_range * (factor / last);
            out.push(WhatIfCell {
                product: product.clone(),
                step: k,
                adjusted_profit: adjusted,
                overall_profit: total - mean + adjusted,
            });
        }
    }
    Ok(out)
}

pub fn write_whatif_csv<W: Write>(cells: &[WhatIfCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["product", "step", "adjusted_profit", "overall_profit"]).map_err(csv_io)?;
    for c in cells {
        w.write_record([
            c.product.clone(),
            c.step.to_string(),
            c.adjusted_profit.to_string(),
            c.overall_profit.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn serialize_f_stat<S: Serializer>(f: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if f.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnovaResult {
    /// `+inf` when the groups have no internal spread but differ in mean.
    #[serde(serialize_with = "serialize_f_stat")]
    pub f_statistic: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
}

pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::domain(format!("ANOVA needs at least 2 groups, got {}", groups.len())));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::domain("every ANOVA group needs at least one value"));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::domain("ANOVA values must be finite"));
    }
    let total_n: usize = groups.iter().map(Vec::len).sum();
    if total_n <= groups.len() {
        return Err(Error::domain("ANOVA needs more observations than groups"));
    }
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    // equal group means must give exactly zero between-group spread
    let grand = if means.iter().all(|m| *m == means[0]) {
        means[0]
    } else {
        groups.iter().flatten().sum::<f64>() / total_n as f64
    };
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for (g, &mean) in groups.iter().zip(&means) {
        ss_between += g.len() as f64 * (mean - grand).powi(2);
        ss_within += g.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }
    let df_between = groups.len() - 1;
    let df_within = total_n - groups.len();
    let (f_statistic, p_value) = if ss_within > 0.0 {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        (f, f_survival(f, df_between as f64, df_within as f64))
    } else if ss_between > 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (0.0, 1.0)
    };
    Ok(AnovaResult { f_statistic, p_value, df_between, df_within, ss_between, ss_within })
}
