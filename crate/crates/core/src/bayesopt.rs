//! Bayesian optimization of the order quantity.
//!
//! A GP surrogate is fitted to (q, mean profit) after every evaluation and
//! the next q maximizes Expected Improvement over a dense candidate grid.
//! The fill-rate floor is handled by one of three modes: ignored, enforced
//! through a penalty objective, or enforced by weighting EI with the
//! probability of feasibility under a second GP fitted to the worst-case
//! fill rate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::demand::{csv_io, DemandModel};
use crate::domain::{InventoryPolicy, ProductSpec};
use crate::error::{Error, Result};
use crate::gp::{self, GpModel, KernelChoice, Nu};
use crate::normal;
use crate::sim::{run_monte_carlo, SimulationConfig, SimulationSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    #[default]
    Off,
    Penalty,
    Constrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesOptConfig {
    pub q_min: u64,
    pub q_max: u64,
    pub n_initial: usize,
    pub n_iterations: usize,
    pub constraint_mode: ConstraintMode,
    /// Objective value substituted for infeasible points in penalty mode.
    pub penalty_value: f64,
    pub beta: f64,
    /// Number of equally spaced candidates scanned per proposal.
    pub acquisition_grid: usize,
    pub nu: Nu,
}

impl BayesOptConfig {
    pub fn new(q_min: u64, q_max: u64) -> Self {
        Self {
            q_min,
            q_max,
            n_initial: 5,
            n_iterations: 25,
            constraint_mode: ConstraintMode::Off,
            penalty_value: -1e9,
            beta: 0.95,
            acquisition_grid: 2048,
            nu: Nu::FiveHalves,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_min < 1 || self.q_max < self.q_min {
            return Err(Error::validation(format!("invalid bounds [{}, {}]", self.q_min, self.q_max)));
        }
        if self.n_initial < 2 {
            return Err(Error::validation("n_initial must be >= 2"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::validation(format!("beta {} outside (0, 1]", self.beta)));
        }
        if self.acquisition_grid < 2 {
            return Err(Error::validation("acquisition_grid must be >= 2"));
        }
        if ((self.q_max - self.q_min) as usize) < self.n_initial - 1 {
            return Err(Error::validation("bounds are too narrow for distinct initial points"));
        }
        let available = candidates(self).len();
        if available < self.n_initial + self.n_iterations {
            return Err(Error::validation(format!(
                "bounds hold only {available} distinct candidates for {} evaluations",
                self.n_initial + self.n_iterations
            )));
        }
        Ok(())
    }
}

/// What one objective evaluation reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub mean_profit: f64,
    pub profit_std: f64,
    pub min_fill_rate: f64,
}

impl From<&SimulationSummary> for Outcome {
    fn from(s: &SimulationSummary) -> Self {
        Self { mean_profit: s.mean_profit, profit_std: s.profit_std, min_fill_rate: s.min_fill_rate }
    }
}

pub trait Objective {
    fn evaluate(&self, q: u64) -> Result<Outcome>;
}

impl<F: Fn(u64) -> Result<Outcome>> Objective for F {
    fn evaluate(&self, q: u64) -> Result<Outcome> {
        self(q)
    }
}

/// Monte Carlo simulator as an objective. Every q is evaluated on the same
/// seed bank, so the surrogate sees common random numbers.
pub struct SimulatedObjective<'a> {
    pub spec: &'a ProductSpec,
    pub model: &'a DemandModel,
    pub base_policy: InventoryPolicy,
    pub config: &'a SimulationConfig,
}

impl Objective for SimulatedObjective<'_> {
    fn evaluate(&self, q: u64) -> Result<Outcome> {
        let s = run_monte_carlo(self.spec, &self.base_policy.with_order_quantity(q), self.model, self.config)?;
        Ok(Outcome::from(&s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub q: u64,
    pub mean_profit: f64,
    pub profit_std: f64,
    pub min_fill_rate: f64,
    pub feasible: bool,
    /// EI (times probability of feasibility in constrained mode) at the
    /// time of the proposal; zero for the initial design.
    pub acquisition_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Incumbent {
    pub index: usize,
    pub q: u64,
    pub mean_profit: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OptimizationRun {
    pub evaluations: Vec<Evaluation>,
    pub incumbent: Option<Incumbent>,
    #[serde(skip)]
    pub objective_gp: Option<GpModel>,
    #[serde(skip)]
    pub constraint_gp: Option<GpModel>,
}

impl OptimizationRun {
    /// Best incumbent profit after each evaluation (`None` until a point
    /// qualifies).
    pub fn incumbent_trace(&self, mode: ConstraintMode) -> Vec<Option<f64>> {
        let mut best: Option<f64> = None;
        self.evaluations
            .iter()
            .map(|e| {
                if mode == ConstraintMode::Off || e.feasible {
                    best = Some(best.map_or(e.mean_profit, |b: f64| b.max(e.mean_profit)));
                }
                best
            })
            .collect()
    }

    fn is_evaluated(&self, q: u64) -> bool {
        self.evaluations.iter().any(|e| e.q == q)
    }
}

/// Expected improvement of a maximization objective over `best`.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let gain = mean - best;
    if std > 0.0 {
        let z = gain / std;
        (gain * normal::cdf(z) + std * normal::pdf(z)).max(0.0)
    } else {
        gain.max(0.0)
    }
}

/// The acquisition grid: `acquisition_grid` equally spaced integer order
/// quantities in the bounds, deduplicated.
pub fn candidates(config: &BayesOptConfig) -> Vec<u64> {
    let g = config.acquisition_grid.max(2);
    let span = (config.q_max - config.q_min) as f64;
    let mut out: Vec<u64> = (0..g).map(|i| config.q_min + (span * i as f64 / (g - 1) as f64).round() as u64).collect();
    out.dedup();
    out
}

/// `n_initial` evenly spaced integer quantities including both bounds.
fn initial_design(config: &BayesOptConfig) -> Vec<u64> {
    let n = config.n_initial;
    let span = (config.q_max - config.q_min) as f64;
    (0..n).map(|k| config.q_min + (span * k as f64 / (n - 1) as f64).round() as u64).collect()
}

fn incumbent_best(run: &OptimizationRun, mode: ConstraintMode, penalty: f64) -> Option<f64> {
    run.evaluations
        .iter()
        .filter_map(|e| match mode {
            ConstraintMode::Off => Some(e.mean_profit),
            ConstraintMode::Penalty => Some(if e.feasible { e.mean_profit } else { penalty }),
            ConstraintMode::Constrained => e.feasible.then_some(e.mean_profit),
        })
        .reduce(f64::max)
}

/// Refits the objective surrogate (and the constraint surrogate in
/// constrained mode) on every evaluation so far.
pub fn fit_surrogates(run: &mut OptimizationRun, config: &BayesOptConfig) -> Result<()> {
    let objective: Vec<(Vec<f64>, f64)> = run
        .evaluations
        .iter()
        .map(|e| {
            let y = if config.constraint_mode == ConstraintMode::Penalty && !e.feasible {
                config.penalty_value
            } else {
                e.mean_profit
            };
            (vec![e.q as f64], y)
        })
        .collect();
    run.objective_gp = Some(gp::fit(&objective, KernelChoice::Auto(config.nu))?);
    run.constraint_gp = if config.constraint_mode == ConstraintMode::Constrained {
        let fill: Vec<(Vec<f64>, f64)> = run.evaluations.iter().map(|e| (vec![e.q as f64], e.min_fill_rate)).collect();
        Some(gp::fit(&fill, KernelChoice::Auto(config.nu))?)
    } else {
        None
    };
    Ok(())
}

/// Scores every candidate and returns the chosen q with its acquisition
/// value. Ties go to the smaller q; an already evaluated winner moves to
/// the nearest unevaluated candidate.
pub fn propose_next(run: &OptimizationRun, config: &BayesOptConfig) -> Result<(u64, f64)> {
    let gp = run
        .objective_gp
        .as_ref()
        .filter(|m| m.len() >= 2)
        .ok_or_else(|| Error::State("objective surrogate is not fitted on two or more points".into()))?;
    if config.constraint_mode == ConstraintMode::Constrained && run.constraint_gp.is_none() {
        return Err(Error::State("constrained mode needs a fitted constraint surrogate".into()));
    }
    let best = incumbent_best(run, config.constraint_mode, config.penalty_value)
        .ok_or_else(|| Error::State("no qualifying evaluation to improve on".into()))?;

    let grid = candidates(config);
    let scores: Vec<f64> = grid
        .iter()
        .map(|&q| {
            let x = [q as f64];
            let (mean, std) = gp.predict(&x);
            let mut a = expected_improvement(mean, std, best);
            if let Some(c) = &run.constraint_gp {
                let (mc, sc) = c.predict(&x);
                let pof = if sc > 0.0 {
                    normal::cdf((mc - config.beta) / sc)
                } else if mc >= config.beta {
                    1.0
                } else {
                    0.0
                };
                a *= pof;
            }
            a
        })
        .collect();

    let mut winner = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[winner] {
            winner = i;
        }
    }
    if run.is_evaluated(grid[winner]) {
        let free = |i: usize| !run.is_evaluated(grid[i]);
        let nearest = (1..grid.len()).find_map(|d| {
            let left = winner.checked_sub(d).filter(|&i| free(i));
            let right = Some(winner + d).filter(|&i| i < grid.len() && free(i));
            left.or(right)
        });
        winner = nearest.ok_or_else(|| Error::State("every candidate has been evaluated".into()))?;
    }
    Ok((grid[winner], scores[winner]))
}

fn evaluate_into(
    run: &mut OptimizationRun,
    objective: &dyn Objective,
    q: u64,
    acquisition_value: f64,
    beta: f64,
) -> Result<()> {
    let o = objective.evaluate(q)?;
    run.evaluations.push(Evaluation {
        q,
        mean_profit: o.mean_profit,
        profit_std: o.profit_std,
        min_fill_rate: o.min_fill_rate,
        feasible: o.min_fill_rate >= beta,
        acquisition_value,
    });
    Ok(())
}

fn pick_incumbent(run: &OptimizationRun, mode: ConstraintMode) -> Option<Incumbent> {
    let mut best: Option<Incumbent> = None;
    for (index, e) in run.evaluations.iter().enumerate() {
        if mode != ConstraintMode::Off && !e.feasible {
            continue;
        }
        if best.is_none_or(|b| e.mean_profit > b.mean_profit) {
            best = Some(Incumbent { index, q: e.q, mean_profit: e.mean_profit });
        }
    }
    best
}

/// Runs the initial design followed by `n_iterations` proposals against an
/// arbitrary objective.
pub fn optimize_objective(objective: &dyn Objective, config: &BayesOptConfig) -> Result<OptimizationRun> {
    config.validate()?;
    let mut run = OptimizationRun::default();
    for q in initial_design(config) {
        evaluate_into(&mut run, objective, q, 0.0, config.beta)?;
    }
    if config.constraint_mode == ConstraintMode::Constrained && !run.evaluations.iter().any(|e| e.feasible) {
        return Err(Error::Validation(format!(
            "no initial point reaches fill rate {}; use penalty mode or a lower beta",
            config.beta
        )));
    }
    for _ in 0..config.n_iterations {
        fit_surrogates(&mut run, config)?;
        let (q, a) = propose_next(&run, config)?;
        evaluate_into(&mut run, objective, q, a, config.beta)?;
    }
    fit_surrogates(&mut run, config)?;
    run.incumbent = pick_incumbent(&run, config.constraint_mode);
    Ok(run)
}

/// Optimizes the order quantity of `base_policy` against the Monte Carlo
/// simulator.
pub fn optimize(
    spec: &ProductSpec,
    model: &DemandModel,
    base_policy: &InventoryPolicy,
    sim_config: &SimulationConfig,
    config: &BayesOptConfig,
) -> Result<OptimizationRun> {
    let objective = SimulatedObjective { spec, model, base_policy: *base_policy, config: sim_config };
    optimize_objective(&objective, config)
}

/// Writes `iter,q,mean_profit,profit_std,min_fill_rate,feasible,ei`.
pub fn write_trace_csv<W: Write>(run: &OptimizationRun, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "q", "mean_profit", "profit_std", "min_fill_rate", "feasible", "ei"]).map_err(csv_io)?;
    for (i, e) in run.evaluations.iter().enumerate() {
        w.write_record([
            i.to_string(),
            e.q.to_string(),
            e.mean_profit.to_string(),
            e.profit_std.to_string(),
            e.min_fill_rate.to_string(),
            e.feasible.to_string(),
            e.acquisition_value.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(q: u64) -> Result<Outcome> {
        let x = q as f64;
        Ok(Outcome { mean_profit: -(x - 3000.0).powi(2) / 100.0 + 5e5, profit_std: 0.0, min_fill_rate: 1.0 })
    }

    #[test]
    fn ei_without_uncertainty() {
        assert_eq!(expected_improvement(1.0, 0.0, 2.0), 0.0);
        assert_eq!(expected_improvement(3.0, 0.0, 2.0), 1.0);
    }

    #[test]
    fn ei_at_the_incumbent() {
        let s = 7.0;
        assert!((expected_improvement(5.0, s, 5.0) - 0.398_942_280_401_432_7 * s).abs() < 1e-12);
    }

    #[test]
    fn candidates_cover_bounds() {
        let c = candidates(&BayesOptConfig::new(100, 5100));
        assert_eq!(c.first(), Some(&100));
        assert_eq!(c.last(), Some(&5100));
        assert_eq!(c.len(), 2048);
        let small = candidates(&BayesOptConfig { acquisition_grid: 50, ..BayesOptConfig::new(1, 10) });
        assert_eq!(small, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn initial_design_includes_bounds() {
        let cfg = BayesOptConfig::new(1000, 9000);
        let d = initial_design(&cfg);
        assert_eq!(d, vec![1000, 3000, 5000, 7000, 9000]);
    }

    #[test]
    fn propose_requires_fitted_model() {
        let cfg = BayesOptConfig::new(1, 100);
        assert!(matches!(propose_next(&OptimizationRun::default(), &cfg), Err(Error::State(_))));
    }

    #[test]
    fn no_iterations_returns_best_initial_point() {
        let cfg = BayesOptConfig { n_iterations: 0, ..BayesOptConfig::new(1000, 5000) };
        let run = optimize_objective(&quadratic, &cfg).unwrap();
        assert_eq!(run.evaluations.len(), 5);
        assert_eq!(run.incumbent.unwrap().q, 3000);
    }

    #[test]
    fn finds_quadratic_optimum() {
        let cfg = BayesOptConfig::new(1, 8001);
        let run = optimize_objective(&quadratic, &cfg).unwrap();
        assert_eq!(run.evaluations.len(), 30);
        let q = run.incumbent.unwrap().q as f64;
        assert!((q - 3000.0).abs() <= 30.0, "{q}");
        assert!(run.evaluations.iter().all(|e| e.acquisition_value >= 0.0));
    }

    #[test]
    fn constrained_mode_fails_without_feasible_start() {
        let f = |q: u64| Ok(Outcome { mean_profit: q as f64, profit_std: 0.0, min_fill_rate: 0.5 });
        let cfg = BayesOptConfig { constraint_mode: ConstraintMode::Constrained, ..BayesOptConfig::new(1, 1000) };
        assert!(matches!(optimize_objective(&f, &cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn penalty_mode_never_crowns_infeasible_point() {
        // profit increases with q but only q <= 600 is feasible
        let f = |q: u64| {
            Ok(Outcome { mean_profit: q as f64, profit_std: 0.0, min_fill_rate: if q <= 600 { 0.99 } else { 0.5 } })
        };
        let cfg = BayesOptConfig {
            constraint_mode: ConstraintMode::Penalty,
            n_iterations: 10,
            ..BayesOptConfig::new(1, 1000)
        };
        let run = optimize_objective(&f, &cfg).unwrap();
        let inc = run.incumbent.unwrap();
        assert!(run.evaluations[inc.index].feasible);
        assert!(inc.q <= 600);
    }
}
