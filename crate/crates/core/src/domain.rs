//! Product parameters and the closed-form inventory formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

fn default_holding_rate() -> f64 {
    0.20
}

/// Static per-product parameters.
///
/// Two holding-cost parameters coexist: `holding_cost_flat` is a currency
/// amount per unit per year and feeds the EOQ and total-cost formulas, while
/// `holding_rate_annual` is a fraction of `purchase_cost` per unit per year
/// and drives the daily holding charge of the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub product_id: String,
    pub purchase_cost: f64,
    pub lead_time_days: u32,
    pub selling_price: f64,
    pub starting_stock: u64,
    pub order_cost: f64,
    pub holding_cost_flat: f64,
    #[serde(default = "default_holding_rate")]
    pub holding_rate_annual: f64,
}

impl ProductSpec {
    pub fn validate(&self) -> Result<()> {
        let costs = [
            ("purchase_cost", self.purchase_cost),
            ("selling_price", self.selling_price),
            ("order_cost", self.order_cost),
            ("holding_cost_flat", self.holding_cost_flat),
            ("holding_rate_annual", self.holding_rate_annual),
        ];
        for (name, value) in costs {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::validation(format!(
                    "{}: {name} must be a finite value >= 0, got {value}",
                    self.product_id
                )));
            }
        }
        if self.lead_time_days < 1 {
            return Err(Error::validation(format!("{}: lead_time_days must be >= 1", self.product_id)));
        }
        Ok(())
    }

    /// Daily holding charge per unit of day-end stock.
    pub fn daily_holding_cost(&self) -> f64 {
        self.holding_rate_annual * self.purchase_cost / 365.0
    }
}

/// Empirical summary of a daily sales series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandStats {
    pub mean_daily: f64,
    pub std_daily: f64,
    pub prob_demand_day: f64,
    pub total_annual_demand: f64,
    pub max_daily: f64,
    /// Expected demand over the lead time, rounded to whole units.
    #[serde(default)]
    pub demand_lead: u64,
}

impl DemandStats {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_daily >= 0.0) || !(self.std_daily >= 0.0) {
            return Err(Error::validation("mean_daily and std_daily must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.prob_demand_day) {
            return Err(Error::validation(format!("prob_demand_day {} is outside [0, 1]", self.prob_demand_day)));
        }
        if !(self.total_annual_demand >= 0.0) {
            return Err(Error::validation("total_annual_demand must be >= 0"));
        }
        Ok(())
    }
}

/// A (reorder point, order quantity) policy together with the safety stock
/// and service level it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InventoryPolicy {
    pub safety_stock: u64,
    pub reorder_point: u64,
    pub order_quantity: u64,
    pub service_level: f64,
}

impl InventoryPolicy {
    /// Classical policy: safety stock and reorder point from the lead-time
    /// demand distribution, order quantity from EOQ.
    pub fn classical(stats: &DemandStats, spec: &ProductSpec, service_level: f64) -> Result<Self> {
        let safety_stock = safety_stock(stats.std_daily, spec.lead_time_days, service_level)?;
        let reorder_point = reorder_point(stats.mean_daily, spec.lead_time_days, safety_stock)?;
        let eoq = eoq(stats.total_annual_demand, spec.order_cost, spec.holding_cost_flat)?;
        Ok(Self {
            safety_stock,
            reorder_point,
            // a zero-demand product still needs a positive lot size
            order_quantity: eoq.max(1),
            service_level,
        })
    }

    pub fn with_order_quantity(self, order_quantity: u64) -> Self {
        Self { order_quantity, ..self }
    }
}

/// Rounds half-up to whole units. Negative inputs clamp to zero.
pub(crate) fn round_units(x: f64) -> u64 {
    (x + 0.5).floor().max(0.0) as u64
}

/// Standard deviation of demand over the lead time.
pub fn lead_time_sigma(std_daily: f64, lead_time_days: u32) -> Result<f64> {
    if !(std_daily >= 0.0) {
        return Err(Error::domain(format!("std_daily must be >= 0, got {std_daily}")));
    }
    if lead_time_days < 1 {
        return Err(Error::domain("lead_time_days must be >= 1"));
    }
    Ok(std_daily * f64::from(lead_time_days).sqrt())
}

pub fn safety_stock(std_daily: f64, lead_time_days: u32, service_level: f64) -> Result<u64> {
    let z = normal::quantile(service_level)?;
    let sigma = lead_time_sigma(std_daily, lead_time_days)?;
    Ok(round_units(z * sigma))
}

pub fn reorder_point(mean_daily: f64, lead_time_days: u32, safety_stock: u64) -> Result<u64> {
    if !(mean_daily >= 0.0) {
        return Err(Error::domain(format!("mean_daily must be >= 0, got {mean_daily}")));
    }
    if lead_time_days < 1 {
        return Err(Error::domain("lead_time_days must be >= 1"));
    }
    Ok(round_units(mean_daily * f64::from(lead_time_days)) + safety_stock)
}

/// Economic order quantity `sqrt(2 D OC / HC)`, rounded to whole units.
pub fn eoq(annual_demand: f64, order_cost: f64, holding_cost_flat: f64) -> Result<u64> {
    if !(annual_demand >= 0.0) || !(order_cost >= 0.0) {
        return Err(Error::domain("annual demand and order cost must be >= 0"));
    }
    if !(holding_cost_flat > 0.0) {
        return Err(Error::domain(format!("holding cost must be > 0, got {holding_cost_flat}")));
    }
    Ok(round_units((2.0 * annual_demand * order_cost / holding_cost_flat).sqrt()))
}

/// Annual ordering cost plus average holding cost for lot size `q`.
pub fn total_annual_cost(annual_demand: f64, q: f64, order_cost: f64, holding_cost_flat: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::domain(format!("order quantity must be > 0, got {q}")));
    }
    Ok(annual_demand / q * order_cost + q / 2.0 * holding_cost_flat)
}
