//! Sales history ingestion, demand statistics, and the stochastic daily
//! demand generator.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{round_units, DemandStats, InventoryPolicy, ProductSpec};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Dense daily sales of one product. Index `t` of `quantities` is day `t`
/// counted from `start_date`; days without sales hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SalesSeries {
    pub product_id: String,
    pub start_date: NaiveDate,
    pub quantities: Vec<f64>,
}

impl SalesSeries {
    pub fn horizon_days(&self) -> usize {
        self.quantities.len()
    }
}

/// Reads `date,product_id,quantity` CSV into one dense series per product.
///
/// All products share the calendar spanned by the earliest and latest date
/// in the file.
pub fn ingest<R: Read>(source: R) -> Result<BTreeMap<String, SalesSeries>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    if headers.is_empty() {
        return Err(Error::validation("no observations"));
    }
    if headers.iter().collect::<Vec<_>>() != ["date", "product_id", "quantity"] {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `date,product_id,quantity`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut rows: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, got {}", record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], DATE_FORMAT)
            .map_err(|e| parse_err(format!("bad date `{}`: {e}", &record[0])))?;
        let product = record[1].to_string();
        if product.is_empty() {
            return Err(parse_err("empty product_id".into()));
        }
        let quantity: f64 = record[2].parse().map_err(|_| parse_err(format!("bad quantity `{}`", &record[2])))?;
        if !quantity.is_finite() || quantity < 0.0 {
            return Err(Error::validation(format!(
                "line {line}: quantity must be a finite value >= 0, got {}",
                &record[2]
            )));
        }
        if rows.entry(product.clone()).or_default().insert(date, quantity).is_some() {
            return Err(Error::validation(format!("line {line}: duplicate row for date {date} and product {product}")));
        }
    }

    let dates = rows.values().flat_map(|m| m.keys().copied());
    let (Some(first), Some(last)) = (dates.clone().min(), dates.max()) else {
        return Err(Error::validation("no observations"));
    };
    let horizon = (last - first).num_days() as usize + 1;

    Ok(rows
        .into_iter()
        .map(|(product_id, by_date)| {
            let mut quantities = vec![0.0; horizon];
            for (date, q) in by_date {
                quantities[(date - first).num_days() as usize] = q;
            }
            let series = SalesSeries { product_id: product_id.clone(), start_date: first, quantities };
            (product_id, series)
        })
        .collect())
}

/// Writes series back out as `date,product_id,quantity`, skipping nothing:
/// zero days are written explicitly.
pub fn write_sales_csv<'a, W: Write>(series: impl IntoIterator<Item = &'a SalesSeries>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "product_id", "quantity"]).map_err(csv_io)?;
    for s in series {
        for (t, q) in s.quantities.iter().enumerate() {
            let date = s.start_date + Duration::days(t as i64);
            w.write_record([date.format(DATE_FORMAT).to_string(), s.product_id.clone(), q.to_string()])
                .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Summary statistics over all days of `quantities`, zero days included.
pub fn demand_stats(quantities: &[f64], lead_time_days: u32) -> Result<DemandStats> {
    let n = quantities.len();
    if n == 0 {
        return Err(Error::domain("no observations"));
    }
    let total: f64 = quantities.iter().sum();
    let mean = total / n as f64;
    let std = if n > 1 {
        let ss: f64 = quantities.iter().map(|q| (q - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let positive = quantities.iter().filter(|&&q| q > 0.0).count();
    let max = quantities.iter().copied().fold(0.0, f64::max);
    Ok(DemandStats {
        mean_daily: mean,
        std_daily: std,
        prob_demand_day: positive as f64 / n as f64,
        total_annual_demand: total,
        max_daily: max,
        demand_lead: round_units(mean * f64::from(lead_time_days)),
    })
}

/// Table-style statistics plus the classical policy they imply.
pub fn summarize(
    series: &SalesSeries,
    spec: &ProductSpec,
    service_level: f64,
) -> Result<(DemandStats, InventoryPolicy)> {
    let stats = demand_stats(&series.quantities, spec.lead_time_days)?;
    let policy = InventoryPolicy::classical(&stats, spec, service_level)?;
    Ok((stats, policy))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandKind {
    /// Every day draws from Normal(mean, std).
    #[default]
    PlainNormal,
    /// A day has demand with probability P; if it does, the draw is
    /// Normal(mean / P, std).
    BernoulliGated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub kind: DemandKind,
    pub mean_daily: f64,
    pub std_daily: f64,
    pub prob_demand_day: f64,
}

impl DemandModel {
    pub fn new(kind: DemandKind, mean_daily: f64, std_daily: f64, prob_demand_day: f64) -> Result<Self> {
        if !(mean_daily >= 0.0 && std_daily >= 0.0) {
            return Err(Error::domain("demand mean and std must be >= 0"));
        }
        if !(0.0..=1.0).contains(&prob_demand_day) {
            return Err(Error::domain(format!("probability {prob_demand_day} outside [0, 1]")));
        }
        if kind == DemandKind::BernoulliGated && prob_demand_day <= 0.0 {
            return Err(Error::domain("gated demand needs a positive demand probability"));
        }
        Ok(Self { kind, mean_daily, std_daily, prob_demand_day })
    }

    pub fn from_stats(kind: DemandKind, stats: &DemandStats) -> Result<Self> {
        Self::new(kind, stats.mean_daily, stats.std_daily, stats.prob_demand_day)
    }

    /// Same model with a deterministic daily demand.
    pub fn constant(units: f64) -> Self {
        Self { kind: DemandKind::PlainNormal, mean_daily: units, std_daily: 0.0, prob_demand_day: 1.0 }
    }
}

/// One day's demand in whole units.
///
/// Each call consumes the same amount of randomness regardless of the
/// outcome, which keeps streams aligned across policies.
pub fn sample_demand<R: Rng + ?Sized>(model: &DemandModel, rng: &mut R) -> u64 {
    match model.kind {
        DemandKind::PlainNormal => {
            let z: f64 = rng.sample(StandardNormal);
            round_units(model.mean_daily + model.std_daily * z)
        }
        DemandKind::BernoulliGated => {
            let gate: f64 = rng.random();
            let z: f64 = rng.sample(StandardNormal);
            if gate < model.prob_demand_day {
                round_units(model.mean_daily / model.prob_demand_day + model.std_daily * z)
            } else {
                0
            }
        }
    }
}

/// Synthetic daily series whose summary reproduces `stats`.
///
/// Exactly `round(P * days)` days carry demand. Their values come from a
/// normal draw with the conditional mean and variance implied by the
/// unconditional stats, and are then rescaled so the total equals
/// `mean * days` in whole units.
pub fn make_fixture(product_id: &str, stats: &DemandStats, days: usize, seed: u64) -> Result<SalesSeries> {
    if days == 0 {
        return Err(Error::domain("fixture needs at least one day"));
    }
    stats.validate()?;
    let start_date = NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date");
    let mut quantities = vec![0.0; days];
    let target = round_units(stats.mean_daily * days as f64);
    if target == 0 || stats.prob_demand_day == 0.0 {
        if target > 0 {
            log::warn!("{product_id}: positive mean with zero demand probability; emitting zeros");
        }
        return Ok(SalesSeries { product_id: product_id.to_string(), start_date, quantities });
    }

    let mut rng: Stream = rng::substream(seed, &format!("fixture:{product_id}"), 0);
    let n_pos = (round_units(stats.prob_demand_day * days as f64) as usize).clamp(1, days).min(target as usize);

    // partial Fisher-Yates for the demand days
    let mut idx: Vec<usize> = (0..days).collect();
    for k in 0..n_pos {
        let j = rng.random_range(k..days);
        idx.swap(k, j);
    }
    let mut demand_days = idx[..n_pos].to_vec();
    demand_days.sort_unstable();

    let cond_mean = target as f64 / n_pos as f64;
    let second_moment = (stats.std_daily.powi(2) + stats.mean_daily.powi(2)) * days as f64 / n_pos as f64;
    let mut cond_var = second_moment - cond_mean * cond_mean;
    if cond_var < -1e-9 * cond_mean * cond_mean {
        log::warn!(
            "{product_id}: requested std is infeasible for the demand probability; using zero conditional spread"
        );
    }
    cond_var = cond_var.max(0.0);
    let cond_std = cond_var.sqrt();
    if stats.prob_demand_day >= 1.0 && stats.std_daily > 5.0 * stats.mean_daily {
        log::warn!("{product_id}: std exceeds 5x mean; truncation will bias the fixture");
    }

    let raw: Vec<f64> = (0..n_pos)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            (cond_mean + cond_std * z).max(1.0)
        })
        .collect();
    let scale = target as f64 / raw.iter().sum::<f64>();
    let scaled: Vec<f64> = raw.iter().map(|x| x * scale).collect();
    let mut units: Vec<u64> = scaled.iter().map(|x| (x.floor() as u64).max(1)).collect();

    let mut sum: u64 = units.iter().sum();
    if sum < target {
        let mut order: Vec<usize> = (0..n_pos).collect();
        order.sort_by(|&a, &b| {
            let fa = scaled[a] - scaled[a].floor();
            let fb = scaled[b] - scaled[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &k in order.iter().cycle() {
            if sum == target {
                break;
            }
            units[k] += 1;
            sum += 1;
        }
    }
    while sum > target {
        let k = (0..n_pos).max_by_key(|&k| (units[k], std::cmp::Reverse(k))).expect("nonempty");
        units[k] -= 1;
        sum -= 1;
    }

    for (day, u) in demand_days.into_iter().zip(units) {
        quantities[day] = u as f64;
    }
    Ok(SalesSeries { product_id: product_id.to_string(), start_date, quantities })
}
