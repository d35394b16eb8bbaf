//! JSON run configuration shared by the command-line tools.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "service_level": 0.95,
//!   "simulation": { "replications": 1000, "seed": 0 },
//!   "products": [
//!     { "product_id": "Pr B", "purchase_cost": 7, "lead_time_days": 6,
//!       "selling_price": 8.6, "starting_stock": 22500, "order_cost": 1200,
//!       "holding_cost_flat": 20,
//!       "demand": { "mean_daily": 648.55, "std_daily": 26.48,
//!                   "prob_demand_day": 1.0, "total_annual_demand": 237370,
//!                   "max_daily": 718 } }
//!   ]
//! }
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bayesopt::{BayesOptConfig, ConstraintMode};
use crate::demand::{self, DemandModel, SalesSeries};
use crate::domain::{self, DemandStats, InventoryPolicy, ProductSpec};
use crate::error::{Error, Result};
use crate::gp::Nu;
use crate::sim::SimulationConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Policy values published alongside a product's data, for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedPolicy {
    pub demand_lead: Option<u64>,
    pub safety_stock: Option<u64>,
    pub reorder_point: Option<u64>,
    pub eoq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductEntry {
    #[serde(flatten)]
    pub spec: ProductSpec,
    /// Inline demand summary, used when no sales history is supplied.
    pub demand: Option<DemandStats>,
    pub reported: Option<ReportedPolicy>,
    /// Baseline order quantity; EOQ when absent.
    pub order_quantity: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    /// Grid runs from the reorder point to reorder point + span.
    pub span: u64,
    pub step: u64,
    pub constrained: bool,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { span: 5000, step: 10, constrained: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BayesOptSettings {
    /// Bounds run from the reorder point to reorder point + span.
    pub span: u64,
    pub n_initial: usize,
    pub n_iterations: usize,
    pub constraint_mode: ConstraintMode,
    pub penalty_value: f64,
    pub beta: f64,
    pub acquisition_grid: usize,
    pub nu: Nu,
}

impl Default for BayesOptSettings {
    fn default() -> Self {
        let d = BayesOptConfig::new(1, 2);
        Self {
            span: 8000,
            n_initial: d.n_initial,
            n_iterations: d.n_iterations,
            constraint_mode: d.constraint_mode,
            penalty_value: d.penalty_value,
            beta: d.beta,
            acquisition_grid: d.acquisition_grid,
            nu: d.nu,
        }
    }
}

impl BayesOptSettings {
    pub fn for_reorder_point(&self, reorder_point: u64) -> BayesOptConfig {
        BayesOptConfig {
            q_min: reorder_point.max(1),
            q_max: reorder_point.max(1) + self.span,
            n_initial: self.n_initial,
            n_iterations: self.n_iterations,
            constraint_mode: self.constraint_mode,
            penalty_value: self.penalty_value,
            beta: self.beta,
            acquisition_grid: self.acquisition_grid,
            nu: self.nu,
        }
    }
}

fn default_service_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default = "default_service_level")]
    pub service_level: f64,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub bayesopt: BayesOptSettings,
    pub products: Vec<ProductEntry>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported config schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if !(self.service_level > 0.0 && self.service_level < 1.0) {
            return Err(Error::validation("service_level must lie in (0, 1)"));
        }
        if self.products.is_empty() {
            return Err(Error::validation("config lists no products"));
        }
        let mut seen = HashSet::new();
        for p in &self.products {
            p.spec.validate()?;
            if let Some(d) = &p.demand {
                d.validate()?;
            }
            if !seen.insert(p.spec.product_id.as_str()) {
                return Err(Error::validation(format!("duplicate product {}", p.spec.product_id)));
            }
        }
        self.simulation.validate()?;
        if self.grid.step < 1 {
            return Err(Error::validation("grid step must be >= 1"));
        }
        Ok(())
    }

    pub fn product(&self, id: &str) -> Option<&ProductEntry> {
        self.products.iter().find(|p| p.spec.product_id == id)
    }
}

/// A product with its resolved demand statistics and classical policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedProduct {
    pub spec: ProductSpec,
    pub stats: DemandStats,
    pub policy: InventoryPolicy,
    /// Economic order quantity, whatever order quantity the policy uses.
    pub eoq: u64,
    pub reported: Option<ReportedPolicy>,
}

impl ResolvedProduct {
    pub fn demand_model(&self, kind: demand::DemandKind) -> Result<DemandModel> {
        DemandModel::from_stats(kind, &self.stats)
    }

    /// True when any published value differs from the computed one.
    pub fn discrepancy(&self) -> bool {
        let Some(r) = self.reported else { return false };
        let differs = |reported: Option<u64>, computed: u64| reported.is_some_and(|v| v != computed);
        differs(r.demand_lead, self.stats.demand_lead)
            || differs(r.safety_stock, self.policy.safety_stock)
            || differs(r.reorder_point, self.policy.reorder_point)
            || differs(r.eoq, self.eoq)
    }
}

/// Resolves every configured product, taking statistics from `sales` when
/// a series exists for it and from the inline summary otherwise.
pub fn resolve_products(
    cfg: &RunConfig,
    sales: Option<&BTreeMap<String, SalesSeries>>,
) -> Result<Vec<ResolvedProduct>> {
    if let Some(sales) = sales {
        if let Some(unknown) = sales.keys().find(|id| cfg.product(id).is_none()) {
            return Err(Error::validation(format!("sales data for unconfigured product {unknown}")));
        }
    }
    cfg.products
        .iter()
        .filter(|p| sales.is_none_or(|s| s.contains_key(&p.spec.product_id) || p.demand.is_some()))
        .map(|p| {
            let id = &p.spec.product_id;
            let stats = match (sales.and_then(|s| s.get(id)), &p.demand) {
                (Some(series), _) => demand::demand_stats(&series.quantities, p.spec.lead_time_days)?,
                (None, Some(d)) => DemandStats {
                    demand_lead: domain::round_units(d.mean_daily * f64::from(p.spec.lead_time_days)),
                    ..d.clone()
                },
                (None, None) => return Err(Error::validation(format!("{id}: no sales history and no inline demand"))),
            };
            let classical = InventoryPolicy::classical(&stats, &p.spec, cfg.service_level)?;
            let eoq = classical.order_quantity;
            let policy = match p.order_quantity {
                Some(0) => return Err(Error::validation(format!("{id}: order_quantity must be > 0"))),
                Some(q) => classical.with_order_quantity(q),
                None => classical,
            };
            Ok(ResolvedProduct { spec: p.spec.clone(), stats, policy, eoq, reported: p.reported })
        })
        .collect()
}
