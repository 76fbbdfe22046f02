//! Aggregation of simulated costs: cost-versus-loss curves, marginal cost
//! per GW, regional change relative to the current profile and population
//! shares.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::failure::ResultTable;
use crate::grid::RegionTable;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub fraction: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostCurve {
    pub scenario: String,
    pub points: Vec<CurvePoint>,
}

/// Median of a nonempty sample; the mean of the two middle values when the
/// count is even.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn check_costs(results: &ResultTable, costs: &[f64]) -> Result<()> {
    if costs.len() != results.records.len() {
        return Err(Error::MissingCosts(format!(
            "{} records but {} costs",
            results.records.len(),
            costs.len()
        )));
    }
    if let Some(k) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::MissingCosts(format!("record {k} has no finite cost")));
    }
    Ok(())
}

/// Groups costs of one scenario by loss fraction, pooling orderings and hours.
fn by_fraction<'a>(results: &'a ResultTable, costs: &'a [f64], scenario: &str) -> Vec<(f64, Vec<f64>)> {
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for (r, &c) in results.records.iter().zip(costs) {
        if r.scenario != scenario {
            continue;
        }
        match groups.iter_mut().find(|g| g.0 == r.fraction) {
            Some(g) => g.1.push(c),
            None => groups.push((r.fraction, vec![c])),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    groups
}

/// Median, minimum and maximum cost per loss fraction. `costs[k]` belongs to
/// `results.records[k]`.
pub fn build_cost_curve(results: &ResultTable, costs: &[f64], scenario: &str) -> Result<CostCurve> {
    check_costs(results, costs)?;
    let points = by_fraction(results, costs, scenario)
        .into_iter()
        .map(|(fraction, v)| CurvePoint {
            fraction,
            median: median(&v),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    Ok(CostCurve {
        scenario: scenario.to_string(),
        points,
    })
}

/// Smallest fraction whose median cost exceeds `threshold`.
pub fn first_impact_fraction(curve: &CostCurve, threshold: f64) -> Option<f64> {
    curve.points.iter().find(|p| p.median > threshold).map(|p| p.fraction)
}

/// Least-squares slope of cost against peak demand, per GW. Inputs are
/// `(peak_mw, cost)` pairs; with two points this is the secant.
pub fn marginal_cost_per_gw(points: &[(f64, f64)]) -> Result<f64> {
    Ok(slope(points)? * 1000.0)
}

fn slope(points: &[(f64, f64)]) -> Result<f64> {
    let first = points.first().ok_or(Error::DegeneratePeaks)?.0;
    if points.iter().all(|p| p.0 == first) {
        return Err(Error::DegeneratePeaks);
    }
    if let [(x1, y1), (x2, y2)] = points {
        return Ok((y2 - y1) / (x2 - x1));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Marginal cost per GW across scenarios at each loss fraction the curves
/// share. `peaks_mw` maps scenario to its peak national demand.
pub fn marginal_by_fraction(curves: &[CostCurve], peaks_mw: &BTreeMap<String, f64>) -> Result<Vec<(f64, f64)>> {
    let Some(first) = curves.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for p in &first.points {
        let mut pts = Vec::new();
        for c in curves {
            let peak = peaks_mw
                .get(&c.scenario)
                .ok_or_else(|| Error::Validation(format!("no peak demand for scenario '{}'", c.scenario)))?;
            if let Some(q) = c.points.iter().find(|q| q.fraction == p.fraction) {
                pts.push((*peak, q.median));
            }
        }
        out.push((p.fraction, marginal_cost_per_gw(&pts)?));
    }
    Ok(out)
}

/// Slope of median cost against lost capacity in GW for one curve, where
/// `capacity_mw` converts fractions to MW.
pub fn marginal_by_loss(curve: &CostCurve, capacity_mw: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.fraction * capacity_mw, p.median)).collect();
    marginal_cost_per_gw(&pts)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ratio {
    Value(f64),
    /// Both medians zero.
    NoChange,
    /// Positive scenario cost over a zero current cost.
    Infinite,
}

impl Ratio {
    pub fn of(scenario: f64, current: f64) -> Ratio {
        match (scenario == 0.0, current == 0.0) {
            (true, true) => Ratio::NoChange,
            (false, true) => Ratio::Infinite,
            _ => Ratio::Value(scenario / current),
        }
    }

    pub fn is_worse(self) -> bool {
        match self {
            Ratio::Value(r) => r > 1.0,
            Ratio::Infinite => true,
            Ratio::NoChange => false,
        }
    }

    pub fn is_better(self) -> bool {
        matches!(self, Ratio::Value(r) if r < 1.0)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Value(r) => write!(f, "{r}"),
            Ratio::NoChange => f.write_str("no_change"),
            Ratio::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionalChange {
    pub scenario: String,
    pub fraction: f64,
    /// Economic region and its ratio, sorted by region id.
    pub ratios: Vec<(String, Ratio)>,
}

/// Per economic region, the ratio of median regional cost under `scenario`
/// to that under `current` at `fraction`. `regional_costs[k]` maps region
/// id to cost for `results.records[k]`.
pub fn regional_relative_change(
    results: &ResultTable,
    regional_costs: &[BTreeMap<String, f64>],
    scenario: &str,
    current: &str,
    fraction: f64,
) -> Result<RegionalChange> {
    if regional_costs.len() != results.records.len() {
        return Err(Error::MissingCosts(format!(
            "{} records but {} regional cost rows",
            results.records.len(),
            regional_costs.len()
        )));
    }
    let collect = |name: &str| {
        let mut by_region: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (r, costs) in results.records.iter().zip(regional_costs) {
            if r.scenario == name && r.fraction == fraction {
                for (region, c) in costs {
                    by_region.entry(region.clone()).or_default().push(*c);
                }
            }
        }
        by_region
    };
    let scen = collect(scenario);
    let cur = collect(current);
    if scen.is_empty() || cur.is_empty() {
        return Err(Error::MissingCosts(format!(
            "no records for '{scenario}' or '{current}' at fraction {fraction}"
        )));
    }
    let ratios = cur
        .iter()
        .map(|(region, c)| {
            let s = scen.get(region).map_or(0.0, |v| median(v));
            (region.clone(), Ratio::of(s, median(c)))
        })
        .collect();
    Ok(RegionalChange {
        scenario: scenario.to_string(),
        fraction,
        ratios,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Worse,
    Better,
}

/// Population-weighted share of regions whose ratio is above (worse) or
/// below (better) one.
pub fn population_share(change: &RegionalChange, regions: &RegionTable, direction: Direction) -> Result<f64> {
    let mut total = 0.0;
    let mut hit = 0.0;
    for (id, ratio) in &change.ratios {
        let pop = regions
            .population_of(id)
            .ok_or_else(|| Error::Validation(format!("no population for region '{id}'")))?;
        total += pop;
        let counts = match direction {
            Direction::Worse => ratio.is_worse(),
            Direction::Better => ratio.is_better(),
        };
        if counts {
            hit += pop;
        }
    }
    Ok(if total > 0.0 { hit / total } else { 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationShares {
    pub worse: f64,
    pub better: f64,
    pub unchanged: f64,
}

/// Worse and better shares plus the remainder, which sum to exactly one.
pub fn population_shares(change: &RegionalChange, regions: &RegionTable) -> Result<PopulationShares> {
    let worse = population_share(change, regions, Direction::Worse)?;
    let better = population_share(change, regions, Direction::Better)?;
    Ok(PopulationShares {
        worse,
        better,
        unchanged: 1.0 - (worse + better),
    })
}

/// Largest national demand among the hours whose median cost is zero at
/// every loss fraction; `None` if every hour shows some cost.
pub fn low_demand_threshold(hours: &[(f64, CostCurve)]) -> Option<f64> {
    hours
        .iter()
        .filter(|(_, c)| c.points.iter().all(|p| p.median == 0.0))
        .map(|(d, _)| *d)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
}

pub fn format_cost_curves(curves: &[CostCurve]) -> String {
    let mut out = String::from("scenario,fraction,median,min,max\n");
    for c in curves {
        for p in &c.points {
            let _ = writeln!(out, "{},{},{},{},{}", c.scenario, p.fraction, p.median, p.min, p.max);
        }
    }
    out
}

pub fn format_regional_change(change: &RegionalChange) -> String {
    let mut out = String::from("region,ratio\n");
    for (r, ratio) in &change.ratios {
        let _ = writeln!(out, "{r},{ratio}");
    }
    out
}
