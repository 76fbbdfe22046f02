//! Monte Carlo generation-loss sweep: random removal orderings, stepped
//! capacity-loss fractions and per-region unserved demand.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::demand::{bus_demand, DemandProfile};
use crate::dispatch::{DispatchOptions, DispatchProblem, DispatchStatus, Dispatcher};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::seed::derive_seed;
use crate::textio::{csv_rows, parse_field, read_text, write_text};

/// Loss fractions 0.00, 0.05, ..., 0.45.
pub fn default_loss_fractions() -> Vec<f64> {
    (0..10).map(|i| f64::from(i) * 0.05).map(round_fraction).collect()
}

/// Rounds to 1e-9 so fractions built by arithmetic print cleanly.
fn round_fraction(f: f64) -> f64 {
    (f * 1e9).round() / 1e9
}

#[derive(Clone, Debug, PartialEq)]
pub struct HourSelection {
    pub scenario: String,
    pub hour: u32,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub n_orderings: usize,
    pub loss_fractions: Vec<f64>,
    pub hours: Vec<HourSelection>,
    pub master_seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_orderings == 0 {
            return Err(Error::Validation("n_orderings must be at least 1".into()));
        }
        if self.loss_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Validation("loss fractions must lie in [0, 1]".into()));
        }
        if self.loss_fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("loss fractions must be strictly ascending".into()));
        }
        if self.hours.is_empty() {
            return Err(Error::Validation("no hours selected".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordStatus {
    Feasible,
    FeasibleWithShedding,
    Unstable,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Feasible => "feasible",
            RecordStatus::FeasibleWithShedding => "feasible_with_shedding",
            RecordStatus::Unstable => "unstable",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [RecordStatus::Feasible, RecordStatus::FeasibleWithShedding, RecordStatus::Unstable]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

impl From<DispatchStatus> for RecordStatus {
    fn from(s: DispatchStatus) -> Self {
        match s {
            DispatchStatus::Feasible => RecordStatus::Feasible,
            DispatchStatus::FeasibleWithShedding => RecordStatus::FeasibleWithShedding,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioRecord {
    pub ordering: usize,
    pub fraction: f64,
    pub scenario: String,
    pub hour: u32,
    /// MW per region, aligned with [`ResultTable::regions`].
    pub unserved_mw: Vec<f64>,
    pub status: RecordStatus,
}

impl ScenarioRecord {
    pub fn total_unserved_mw(&self) -> f64 {
        self.unserved_mw.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub regions: Vec<String>,
    /// Sorted by ordering, fraction, then hour selection order.
    pub records: Vec<ScenarioRecord>,
}

/// Uniform random permutations of the non-international generators.
/// Ordering `i` is shuffled by ChaCha8 seeded with `derive_seed(master_seed, i)`.
pub fn generate_orderings(grid: &Grid, n: usize, master_seed: u64) -> Vec<Vec<usize>> {
    let domestic: Vec<usize> = (0..grid.generators().len())
        .filter(|&g| !grid.generators()[g].is_international())
        .collect();
    (0..n)
        .map(|i| ordering(&domestic, master_seed, i))
        .collect()
}

fn ordering(items: &[usize], master_seed: u64, i: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, i as u64));
    let mut perm = items.to_vec();
    perm.shuffle(&mut rng);
    perm
}

/// Shortest prefix of `ordering` whose derated capacity reaches `fraction`
/// of the total non-international derated capacity.
pub fn removal_set(ordering: &[usize], grid: &Grid, fraction: f64) -> Vec<usize> {
    let gens = grid.generators();
    let total: f64 = gens.iter().filter(|g| !g.is_international()).map(|g| g.derated_mw()).sum();
    let target = fraction * total;
    let slack = 1e-9 * total;
    let mut cum = 0.0;
    let mut n = 0;
    while n < ordering.len() && cum < target - slack {
        cum += gens[ordering[n]].derated_mw();
        n += 1;
    }
    ordering[..n].to_vec()
}

/// Unserved MW per profile region from per-bus shedding.
fn unserved_by_region(grid: &Grid, regions: &[String], shed_mw: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; regions.len()];
    for (b, bus) in grid.buses().iter().enumerate() {
        if shed_mw[b] == 0.0 {
            continue;
        }
        if let Some(r) = bus.region.as_deref().and_then(|r| regions.iter().position(|x| x == r)) {
            out[r] += shed_mw[b];
        }
    }
    out
}

struct HourDemand {
    scenario: String,
    hour: u32,
    bus_mw: Vec<f64>,
    region_mw: Vec<f64>,
}

fn hour_demands(grid: &Grid, profiles: &[DemandProfile], hours: &[HourSelection]) -> Result<(Vec<String>, Vec<HourDemand>)> {
    let regions = profiles
        .first()
        .ok_or_else(|| Error::Validation("no demand profiles".into()))?
        .regions
        .clone();
    let mut out = Vec::with_capacity(hours.len());
    for sel in hours {
        let p = profiles
            .iter()
            .find(|p| p.scenario == sel.scenario)
            .ok_or_else(|| Error::Validation(format!("no profile for scenario '{}'", sel.scenario)))?;
        if p.regions != regions {
            return Err(Error::MisalignedHours(format!("scenario '{}' lists different regions", p.scenario)));
        }
        let k = p
            .hour_index(sel.hour)
            .ok_or_else(|| Error::MisalignedHours(format!("scenario '{}' has no hour {}", sel.scenario, sel.hour)))?;
        out.push(HourDemand {
            scenario: sel.scenario.clone(),
            hour: sel.hour,
            bus_mw: bus_demand(grid, p, k)?,
            region_mw: p.demand_mw.iter().map(|s| s[k]).collect(),
        });
    }
    Ok((regions, out))
}

/// Runs every (ordering, fraction, hour) combination. Solar units never run;
/// interconnectors are never removed. A network that cannot be balanced even
/// with all demand shed is recorded as unstable with its full demand unserved.
pub fn run_experiment(dispatcher: &Dispatcher, profiles: &[DemandProfile], config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let grid = dispatcher.grid();
    let (regions, demands) = hour_demands(grid, profiles, &config.hours)?;
    let orderings = generate_orderings(grid, config.n_orderings, config.master_seed);
    let units: Vec<(usize, f64)> = (0..orderings.len())
        .flat_map(|o| config.loss_fractions.iter().map(move |&f| (o, f)))
        .collect();

    let run_unit = |&(o, fraction): &(usize, f64)| -> Result<Vec<ScenarioRecord>> {
        let removed = removal_set(&orderings[o], grid, fraction);
        let available: Vec<usize> = (0..grid.generators().len())
            .filter(|g| !grid.generators()[*g].is_solar() && !removed.contains(g))
            .collect();
        demands
            .iter()
            .map(|h| {
                let problem = DispatchProblem {
                    demand_mw: h.bus_mw.clone(),
                    available: available.clone(),
                };
                let (unserved_mw, status) = match dispatcher.dispatch_with_shedding(&problem, &removed) {
                    Ok(sol) => (unserved_by_region(grid, &regions, &sol.shed_mw), sol.status.into()),
                    Err(Error::Unstable) => (h.region_mw.clone(), RecordStatus::Unstable),
                    Err(e) => return Err(e),
                };
                Ok(ScenarioRecord {
                    ordering: o,
                    fraction,
                    scenario: h.scenario.clone(),
                    hour: h.hour,
                    unserved_mw,
                    status,
                })
            })
            .collect()
    };

    let chunks = crate::parallel::map_units(&units, config.workers, run_unit)?;
    Ok(ResultTable {
        regions,
        records: chunks.into_iter().flatten().collect(),
    })
}

/// Raises each branch rating to `headroom × |flow|` of the limit-free,
/// zero-removal dispatch at each given demand vector (solar off), keeping
/// the original rating when it is already larger.
pub fn calibrate_ratings(grid: &Grid, demands_mw: &[Vec<f64>], headroom: f64, options: &DispatchOptions) -> Result<Grid> {
    if !(headroom >= 1.0) {
        return Err(Error::Validation(format!("headroom factor {headroom} must be at least 1")));
    }
    let dispatcher = Dispatcher::new(grid.clone(), options.clone())?;
    let available: Vec<usize> = (0..grid.generators().len())
        .filter(|&g| !grid.generators()[g].is_solar())
        .collect();
    let mut ratings: Vec<f64> = grid.branches().iter().map(|b| b.rating_mw).collect();
    for demand in demands_mw {
        let problem = DispatchProblem {
            demand_mw: demand.clone(),
            available: available.clone(),
        };
        let sol = dispatcher.redispatch_unconstrained(&problem)?.ok_or(Error::Unstable)?;
        for (r, f) in ratings.iter_mut().zip(&sol.flow_solution.flows_mw) {
            *r = r.max(headroom * f.abs());
        }
    }
    grid.with_ratings(&ratings)
}

/// Smallest loss fraction with nonzero total unserved demand, per ordering,
/// for one scenario and hour. `None` where no fraction causes shedding.
pub fn first_shed_fractions(table: &ResultTable, scenario: &str, hour: u32) -> Vec<Option<f64>> {
    let n = table.records.iter().map(|r| r.ordering + 1).max().unwrap_or(0);
    let mut out = vec![None; n];
    for r in &table.records {
        if r.scenario == scenario && r.hour == hour && r.total_unserved_mw() > 1e-9 {
            let slot = &mut out[r.ordering];
            if slot.is_none_or(|f| r.fraction < f) {
                *slot = Some(r.fraction);
            }
        }
    }
    out
}

pub const RESULTS_HEADER: [&str; 7] = ["ordering", "fraction", "scenario", "hour", "region", "unserved_mw", "status"];

/// One row per record and region.
pub fn format_results(table: &ResultTable) -> String {
    let mut out = RESULTS_HEADER.join(",");
    out.push('\n');
    for r in &table.records {
        for (region, u) in table.regions.iter().zip(&r.unserved_mw) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.ordering,
                r.fraction,
                r.scenario,
                r.hour,
                region,
                u,
                r.status.as_str()
            );
        }
    }
    out
}

pub fn save_results(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_results(table))
}

pub fn load_results(path: impl AsRef<Path>) -> Result<ResultTable> {
    let path = path.as_ref();
    parse_results(&read_text(path)?, &path.display().to_string())
}

/// Inverse of [`format_results`]: consecutive rows sharing
/// (ordering, fraction, scenario, hour) form one record.
pub fn parse_results(text: &str, source: &str) -> Result<ResultTable> {
    let mut records: Vec<ScenarioRecord> = Vec::new();
    let mut names: Vec<Vec<String>> = Vec::new();
    for (line, f) in csv_rows(text, &RESULTS_HEADER, source)? {
        let err = |m: String| Error::parse(source, line, m);
        let ordering: usize = parse_field(f[0], "ordering").map_err(err)?;
        let fraction: f64 = parse_field(f[1], "fraction").map_err(err)?;
        let hour: u32 = parse_field(f[3], "hour").map_err(err)?;
        let unserved: f64 = parse_field(f[5], "unserved_mw").map_err(err)?;
        let status = RecordStatus::parse(f[6]).ok_or_else(|| err(format!("unknown status '{}'", f[6])))?;
        let same = records
            .last()
            .is_some_and(|r| r.ordering == ordering && r.fraction == fraction && r.scenario == f[2] && r.hour == hour);
        if !same {
            records.push(ScenarioRecord {
                ordering,
                fraction,
                scenario: f[2].to_string(),
                hour,
                unserved_mw: Vec::new(),
                status,
            });
            names.push(Vec::new());
        }
        let rec = records.last_mut().expect("pushed above");
        if rec.status != status {
            return Err(err("status differs within one record".into()));
        }
        rec.unserved_mw.push(unserved);
        names.last_mut().expect("pushed above").push(f[4].to_string());
    }
    let regions = names.first().cloned().unwrap_or_default();
    if let Some(i) = names.iter().position(|n| *n != regions) {
        let r = &records[i];
        return Err(Error::Validation(format!(
            "{source}: record (ordering {}, fraction {}, {}, hour {}) lists different regions",
            r.ordering, r.fraction, r.scenario, r.hour
        )));
    }
    Ok(ResultTable { regions, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::test_support::*;
    use crate::grid::{BusKind, Technology};

    fn three_gens() -> Grid {
        Grid::new(
            vec![bus("a", 400.0, BusKind::Demand, Some("r"))],
            vec![],
            vec![
                gen("g10", "a", 10.0, 1.0, Technology::Thermal),
                gen("g20", "a", 20.0, 1.0, Technology::Wind),
                gen("g30", "a", 30.0, 1.0, Technology::Hydro),
                gen("ic", "a", 99.0, 1.0, Technology::Interconnector),
            ],
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn prefix_arithmetic() {
        let g = three_gens();
        let ord = vec![0, 1, 2];
        assert!(removal_set(&ord, &g, 0.0).is_empty());
        assert_eq!(removal_set(&ord, &g, 0.4), vec![0, 1]);
        assert_eq!(removal_set(&ord, &g, 1.0), vec![0, 1, 2]);
    }

    #[test]
    fn orderings_exclude_interconnectors_and_repeat() {
        let g = three_gens();
        let a = generate_orderings(&g, 3, 5);
        assert_eq!(a, generate_orderings(&g, 3, 5));
        for o in &a {
            let mut s = o.clone();
            s.sort();
            assert_eq!(s, vec![0, 1, 2]);
        }
    }

    #[test]
    fn single_generator_single_permutation() {
        let g = Grid::new(
            vec![bus("a", 400.0, BusKind::Demand, Some("r"))],
            vec![],
            vec![gen("g", "a", 1.0, 1.0, Technology::Thermal)],
            100.0,
        )
        .unwrap();
        assert_eq!(generate_orderings(&g, 4, 1), vec![vec![0]; 4]);
    }

    #[test]
    fn results_round_trip() {
        let t = ResultTable {
            regions: vec!["d1".into(), "d2".into()],
            records: vec![
                ScenarioRecord {
                    ordering: 0,
                    fraction: 0.05,
                    scenario: "current".into(),
                    hour: 19,
                    unserved_mw: vec![0.0, 1.5],
                    status: RecordStatus::FeasibleWithShedding,
                },
                ScenarioRecord {
                    ordering: 0,
                    fraction: 0.05,
                    scenario: "current".into(),
                    hour: 20,
                    unserved_mw: vec![0.0, 0.0],
                    status: RecordStatus::Feasible,
                },
            ],
        };
        let text = format_results(&t);
        assert_eq!(parse_results(&text, "mem").unwrap(), t);
        assert!(text.starts_with("ordering,fraction,scenario,hour,region,unserved_mw,status\n0,0.05,current,19,d1,0,"));
    }

    #[test]
    fn undersized_branch_is_raised() {
        let g = Grid::new(
            vec![bus("0", 400.0, BusKind::Generation, None), bus("1", 400.0, BusKind::Demand, Some("r"))],
            vec![line("l", "0", "1", 10.0, 50.0)],
            vec![gen("g", "0", 200.0, 1.0, Technology::Thermal)],
            100.0,
        )
        .unwrap();
        let out = calibrate_ratings(&g, &[vec![0.0, 100.0]], 1.2, &DispatchOptions::default()).unwrap();
        assert!((out.branches()[0].rating_mw - 120.0).abs() < 1e-9);
        let same = calibrate_ratings(&g, &[vec![0.0, 10.0]], 1.2, &DispatchOptions::default()).unwrap();
        assert_eq!(same, g);
    }

    #[test]
    fn default_fractions() {
        let f = default_loss_fractions();
        assert_eq!(f.len(), 10);
        assert_eq!(f[3], 0.15);
        assert_eq!(f[9], 0.45);
    }
}
