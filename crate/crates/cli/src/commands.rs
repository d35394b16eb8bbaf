use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use invopt_core::analysis::{self, AnovaResult, Parameter};
use invopt_core::bayesopt::{self, ConstraintMode, OptimizationRun, Outcome as Evaluated, SimulatedObjective};
use invopt_core::config::{resolve_products, ResolvedProduct, RunConfig};
use invopt_core::demand::{self, SalesSeries};
use invopt_core::sim::{self, SimulationSummary};
use invopt_core::stl;

use crate::args::{AnalyzeArgs, Cli, Command, DecomposeArgs, FixtureArgs, Method, OptimizeArgs, SummarizeArgs};
use crate::failure::{Failure, Outcome};

pub fn run(cli: Cli) -> Outcome {
    let threads = cli.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::invalid(format!("cannot start {threads} workers: {e}")))?;
    let seed = cli.seed;
    pool.install(|| match cli.command {
        Command::Summarize(a) => summarize(a, seed),
        Command::Decompose(a) => decompose(a),
        Command::Fixture(a) => fixture(a, seed),
        Command::Optimize(a) => optimize(a, seed),
        Command::Analyze(a) => analyze(a, seed),
    })
}

fn read_text(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn load_config(path: &Path, seed: Option<u64>) -> Outcome<RunConfig> {
    let mut cfg = RunConfig::from_json(&read_text(path)?)?;
    if let Some(seed) = seed {
        cfg.simulation.seed = seed;
    }
    Ok(cfg)
}

fn load_sales(path: &Path) -> Outcome<BTreeMap<String, SalesSeries>> {
    let file = File::open(path).map_err(|e| Failure::io(path, e))?;
    Ok(demand::ingest(file)?)
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Failure::io(path, e))
}

fn create_dir(path: &Path) -> Outcome {
    fs::create_dir_all(path).map_err(|e| Failure::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Outcome {
    w.flush().map_err(|e| Failure::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    writeln!(w).map_err(|e| Failure::io(path, e))?;
    finish(w, path)
}

/// File-name friendly form of a product id.
fn slug(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn resolve(cfg: &RunConfig, input: Option<&Path>) -> Outcome<Vec<ResolvedProduct>> {
    let sales = input.map(load_sales).transpose()?;
    let products = resolve_products(cfg, sales.as_ref())?;
    if products.is_empty() {
        return Err(Failure::invalid("no product has demand data"));
    }
    Ok(products)
}

fn opt(v: Option<u64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn summarize(a: SummarizeArgs, seed: Option<u64>) -> Outcome {
    let cfg = load_config(&a.config, seed)?;
    let products = resolve(&cfg, a.input.as_deref())?;
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record([
        "product",
        "mean_daily",
        "std_daily",
        "prob_demand_day",
        "total_annual_demand",
        "max_daily",
        "demand_lead",
        "safety_stock",
        "reorder_point",
        "eoq",
        "reported_demand_lead",
        "reported_safety_stock",
        "reported_reorder_point",
        "reported_eoq",
        "discrepancy",
    ])?;
    for p in &products {
        let r = p.reported;
        w.write_record([
            p.spec.product_id.clone(),
            p.stats.mean_daily.to_string(),
            p.stats.std_daily.to_string(),
            p.stats.prob_demand_day.to_string(),
            p.stats.total_annual_demand.to_string(),
            p.stats.max_daily.to_string(),
            p.stats.demand_lead.to_string(),
            p.policy.safety_stock.to_string(),
            p.policy.reorder_point.to_string(),
            p.eoq.to_string(),
            opt(r.and_then(|r| r.demand_lead)),
            opt(r.and_then(|r| r.safety_stock)),
            opt(r.and_then(|r| r.reorder_point)),
            opt(r.and_then(|r| r.eoq)),
            p.discrepancy().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Failure::io(&a.out, e))
}

fn decompose(a: DecomposeArgs) -> Outcome {
    let sales = load_sales(&a.input)?;
    let series = sales
        .get(&a.product)
        .ok_or_else(|| Failure::invalid(format!("product {} not found in {}", a.product, a.input.display())))?;
    let d = stl::decompose(&series.quantities, a.period, a.robustness_iters)?;
    let w = create(&a.out)?;
    stl::write_decomposition_csv(&series.quantities, &d, w)?;
    Ok(())
}

fn fixture(a: FixtureArgs, seed: Option<u64>) -> Outcome {
    let cfg = load_config(&a.config, seed)?;
    let mut all = Vec::with_capacity(cfg.products.len());
    for p in &cfg.products {
        let stats = p.demand.as_ref().ok_or_else(|| {
            Failure::invalid(format!("{}: fixture needs an inline demand summary", p.spec.product_id))
        })?;
        all.push(demand::make_fixture(&p.spec.product_id, stats, a.days, cfg.simulation.seed)?);
    }
    let w = create(&a.out)?;
    demand::write_sales_csv(&all, w)?;
    Ok(())
}

#[derive(Serialize)]
struct IncumbentRecord {
    product: String,
    method: &'static str,
    seed: u64,
    replications: u64,
    reorder_point: u64,
    q_min: u64,
    q_max: u64,
    evaluations: usize,
    q: u64,
    feasible: bool,
    mean_profit: f64,
    profit_std: f64,
    mean_lost_orders: f64,
    min_fill_rate: f64,
}

impl IncumbentRecord {
    fn new(
        p: &ResolvedProduct,
        method: &'static str,
        cfg: &RunConfig,
        bounds: (u64, u64),
        evaluations: usize,
        s: &SimulationSummary,
        feasible: bool,
    ) -> Self {
        Self {
            product: p.spec.product_id.clone(),
            method,
            seed: cfg.simulation.seed,
            replications: cfg.simulation.replications,
            reorder_point: p.policy.reorder_point,
            q_min: bounds.0,
            q_max: bounds.1,
            evaluations,
            q: s.order_quantity,
            feasible,
            mean_profit: s.mean_profit,
            profit_std: s.profit_std,
            mean_lost_orders: s.mean_lost_orders,
            min_fill_rate: s.min_fill_rate,
        }
    }
}

fn optimize(a: OptimizeArgs, seed: Option<u64>) -> Outcome {
    let cfg = load_config(&a.config, seed)?;
    let products = resolve(&cfg, a.input.as_deref())?;
    create_dir(&a.out)?;

    let mut records = Vec::with_capacity(products.len());
    let mut grid_rows: Vec<(String, SimulationSummary)> = Vec::new();
    for p in &products {
        let model = p.demand_model(cfg.simulation.demand_model_kind)?;
        let rop = p.policy.reorder_point;
        let started = Instant::now();
        let record = match a.method {
            Method::Grid => {
                let bounds = (rop.max(1), rop.max(1) + cfg.grid.span);
                let result = sim::grid_search(
                    &p.spec,
                    &model,
                    &p.policy,
                    &cfg.simulation,
                    bounds.0,
                    bounds.1,
                    cfg.grid.step,
                    cfg.grid.constrained,
                )?;
                let n = result.summaries.len();
                let record = IncumbentRecord::new(p, "grid", &cfg, bounds, n, result.best(), result.incumbent.feasible);
                grid_rows.extend(result.summaries.into_iter().map(|s| (p.spec.product_id.clone(), s)));
                record
            }
            Method::Bayes => {
                let bo = cfg.bayesopt.for_reorder_point(rop);
                let run = match a.stub_quadratic {
                    Some(peak) => {
                        let stub = move |q: u64| {
                            let d = q as f64 - peak;
                            Ok(Evaluated { mean_profit: -d * d / 100.0 + 5e5, profit_std: 0.0, min_fill_rate: 1.0 })
                        };
                        bayesopt::optimize_objective(&stub, &bo)?
                    }
                    None => {
                        let objective = SimulatedObjective {
                            spec: &p.spec,
                            model: &model,
                            base_policy: p.policy,
                            config: &cfg.simulation,
                        };
                        bayesopt::optimize_objective(&objective, &bo)?
                    }
                };
                let trace_path = a.out.join(format!("trace_{}.csv", slug(&p.spec.product_id)));
                bayesopt::write_trace_csv(&run, create(&trace_path)?)?;
                let (q, feasible) = bayes_incumbent(&run, bo.constraint_mode);
                let summary = match a.stub_quadratic {
                    Some(_) => {
                        let e = run.evaluations.iter().find(|e| e.q == q).expect("incumbent was evaluated");
                        SimulationSummary {
                            order_quantity: q,
                            replications: 0,
                            mean_profit: e.mean_profit,
                            profit_std: e.profit_std,
                            mean_lost_orders: 0.0,
                            mean_fill_rate: e.min_fill_rate,
                            min_fill_rate: e.min_fill_rate,
                            mean_inventory: 0.0,
                        }
                    }
                    None => sim::run_monte_carlo(&p.spec, &p.policy.with_order_quantity(q), &model, &cfg.simulation)?,
                };
                IncumbentRecord::new(p, "bayes", &cfg, (bo.q_min, bo.q_max), run.evaluations.len(), &summary, feasible)
            }
        };
        eprintln!(
            "{}: {} search over {} evaluations took {:.2} s",
            record.product,
            record.method,
            record.evaluations,
            started.elapsed().as_secs_f64()
        );

        for rep in 0..a.trajectories {
            let ledger =
                sim::trace_replication(&p.spec, &p.policy.with_order_quantity(record.q), &model, &cfg.simulation, rep)?;
            let path = a.out.join(format!("trajectory_{}_{rep}.csv", slug(&p.spec.product_id)));
            sim::write_trajectory_csv(&ledger, create(&path)?)?;
        }
        records.push(record);
    }

    let summary_path = a.out.join("summary.csv");
    let mut w = csv::Writer::from_writer(create(&summary_path)?);
    w.write_record(["product", "q", "mean_profit", "profit_std", "mean_lost_orders", "min_fill_rate", "feasible"])?;
    for r in &records {
        w.write_record([
            r.product.clone(),
            r.q.to_string(),
            r.mean_profit.to_string(),
            r.profit_std.to_string(),
            r.mean_lost_orders.to_string(),
            r.min_fill_rate.to_string(),
            r.feasible.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Failure::io(&summary_path, e))?;

    if a.method == Method::Grid {
        let path = a.out.join("grid.csv");
        sim::write_summary_csv(grid_rows.iter().map(|(id, s)| (id.as_str(), s)), create(&path)?)?;
    }
    write_json(&a.out.join("incumbents.json"), &records)
}

/// The run's incumbent, or its best raw evaluation flagged infeasible when
/// nothing met the fill-rate floor.
fn bayes_incumbent(run: &OptimizationRun, mode: ConstraintMode) -> (u64, bool) {
    if let Some(inc) = run.incumbent {
        return (inc.q, mode == ConstraintMode::Off || run.evaluations[inc.index].feasible);
    }
    let best = run
        .evaluations
        .iter()
        .reduce(|a, b| if b.mean_profit > a.mean_profit { b } else { a })
        .expect("optimization evaluates at least two points");
    (best.q, false)
}

fn parse_variations(text: &str) -> Outcome<Vec<f64>> {
    text.split(',')
        .map(|v| {
            let v = v.trim().replace('\u{2212}', "-");
            v.parse::<f64>().map_err(|_| Failure::invalid(format!("bad variation {v:?}")))
        })
        .collect()
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Outcome<Table> {
    let file = File::open(path).map_err(|e| Failure::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = r.headers()?.iter().map(str::to_string).collect();
    let rows =
        r.records().map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect())).collect::<Result<_, _>>()?;
    Ok(Table { headers, rows })
}

fn numeric_column(t: &Table, col: usize) -> Option<Vec<f64>> {
    t.rows.iter().map(|r| r.get(col).and_then(|v| v.parse::<f64>().ok())).collect()
}

#[derive(Serialize)]
struct AnovaRecord {
    column: String,
    #[serde(flatten)]
    result: AnovaResult,
}

fn anova(a: &Path, b: &Path) -> Outcome<Vec<AnovaRecord>> {
    let (ta, tb) = (read_table(a)?, read_table(b)?);
    if ta.headers != tb.headers {
        return Err(Failure::invalid(format!(
            "column mismatch: {} has [{}], {} has [{}]",
            a.display(),
            ta.headers.join(","),
            b.display(),
            tb.headers.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, name) in ta.headers.iter().enumerate() {
        let (Some(xa), Some(xb)) = (numeric_column(&ta, i), numeric_column(&tb, i)) else {
            continue;
        };
        let result = analysis::one_way_anova(&[xa, xb])?;
        out.push(AnovaRecord { column: name.clone(), result });
    }
    if out.is_empty() {
        return Err(Failure::invalid("no numeric column to compare"));
    }
    Ok(out)
}

fn whatif(path: &Path, half_range: f64, steps: usize) -> Outcome<Vec<analysis::WhatIfCell>> {
    let t = read_table(path)?;
    let col = |name: &str| {
        t.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::invalid(format!("{} has no {name} column", path.display())))
    };
    let (pi, mi) = (col("product")?, col("mean_profit")?);
    let means = t
        .rows
        .iter()
        .map(|r| {
            let profit = r[mi]
                .parse::<f64>()
                .map_err(|_| Failure::invalid(format!("mean_profit {:?} is not a number", r[mi])))?;
            Ok((r[pi].clone(), profit))
        })
        .collect::<Outcome<Vec<_>>>()?;
    Ok(analysis::whatif_profit_grid(&means, half_range, steps)?)
}

fn analyze(a: AnalyzeArgs, seed: Option<u64>) -> Outcome {
    if a.sensitivity.is_none() && a.anova.is_none() && a.whatif.is_none() {
        return Err(Failure::invalid("nothing to do: pass --sensitivity, --anova or --whatif"));
    }
    create_dir(&a.out)?;

    if let Some(name) = &a.sensitivity {
        let parameter: Parameter = name.parse()?;
        let config = a.config.as_ref().ok_or_else(|| Failure::invalid("--sensitivity needs --config"))?;
        let cfg = load_config(config, seed)?;
        let variations = parse_variations(&a.variations)?;
        let products = resolve(&cfg, a.input.as_deref())?;
        let reports = products
            .iter()
            .map(|p| {
                let model = p.demand_model(cfg.simulation.demand_model_kind)?;
                analysis::sensitivity_sweep(&p.spec, &model, &cfg.simulation, &p.policy, parameter, &variations)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let path = a.out.join("sensitivity.csv");
        analysis::write_sensitivity_csv(&reports, &variations, create(&path)?)?;
    }

    if let Some(files) = &a.anova {
        let records = anova(&files[0], &files[1])?;
        write_json(&a.out.join("anova.json"), &records)?;
    }

    if let Some(path) = &a.whatif {
        let cells = whatif(path, a.half_range, a.steps)?;
        let out: PathBuf = a.out.join("whatif.csv");
        analysis::write_whatif_csv(&cells, create(&out)?)?;
    }
    Ok(())
}
