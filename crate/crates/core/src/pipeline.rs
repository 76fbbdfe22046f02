//! The four command-line stages: fixture generation, simulation, economic
//! impact and analysis. Each stage reads and writes plain CSV in the
//! configured output directory.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::analysis::{
    build_cost_curve, first_impact_fraction, format_cost_curves, format_regional_change, low_demand_threshold,
    marginal_by_fraction, marginal_by_loss, population_shares, regional_relative_change, CostCurve,
};
use crate::config::{HourToken, RunConfig};
use crate::demand::{
    build_scenario, bus_demand, load_profile, load_shares, DemandProfile, ScenarioInputs, ScenarioKind, HEAT_COLUMN,
    PROFILE_COLUMN,
};
use crate::dispatch::Dispatcher;
use crate::error::{Error, Result};
use crate::failure::{calibrate_ratings, load_results, run_experiment, save_results, ExperimentConfig, HourSelection, ResultTable};
use crate::grid::{load_grid, load_regions, save_grid, total_capacity, RegionTable};
use crate::mria::{hourly, load_supply_use, shock_from_unserved, CapacityShock, SupplyUseModel};
use crate::parallel::map_units;
use crate::synthetic::{fixture, write_fixture, FixtureSize};
use crate::textio::{csv_rows, parse_field, read_text, write_text};

pub const RESULTS_FILE: &str = "results.csv";
pub const DEMAND_FILE: &str = "demand.csv";
pub const PROVENANCE_FILE: &str = "provenance.txt";
pub const CALIBRATED_GRID_FILE: &str = "calibrated_grid.csv";
pub const COSTS_FILE: &str = "costs.csv";
pub const REGIONAL_VA_FILE: &str = "regional_va.csv";

/// Writes a synthetic fixture and its config into `out`.
pub fn cmd_gen_synthetic(size: FixtureSize, seed: u64, out: &Path) -> Result<PathBuf> {
    let fx = fixture(size, seed)?;
    write_fixture(&fx, seed, out)?;
    Ok(out.join(crate::synthetic::CONFIG_FILE))
}

/// Builds the configured scenario profiles from the current profile.
pub fn scenario_profiles(cfg: &RunConfig) -> Result<Vec<DemandProfile>> {
    let current = load_profile(&cfg.profile, PROFILE_COLUMN, "current")?;
    let heat = load_profile(&cfg.heat, HEAT_COLUMN, "heat")?;
    let shares = load_shares(&cfg.end_use_shares)?;
    let inputs = ScenarioInputs {
        current: &current,
        heat_mw: &heat,
        shares: &shares,
    };
    cfg.scenarios
        .iter()
        .map(|&k| build_scenario(&inputs, &cfg.scenario_spec(k)))
        .collect()
}

/// Turns `peak`/`min`/integer tokens into concrete hours per scenario,
/// dropping repeats (a flat profile's peak and minimum coincide).
pub fn resolve_hours(tokens: &[HourToken], profiles: &[DemandProfile]) -> Result<Vec<HourSelection>> {
    let mut out: Vec<HourSelection> = Vec::new();
    for p in profiles {
        for t in tokens {
            let hour = match t {
                HourToken::Peak => p.peak_hour(),
                HourToken::Min => p.min_hour(),
                HourToken::Hour(h) => p.hour_index(*h).map(|_| *h),
            }
            .ok_or_else(|| Error::MisalignedHours(format!("scenario '{}' has no hour for {t:?}", p.scenario)))?;
            let sel = HourSelection {
                scenario: p.scenario.clone(),
                hour,
            };
            if !out.contains(&sel) {
                out.push(sel);
            }
        }
    }
    Ok(out)
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn input_hashes(cfg: &RunConfig) -> Result<String> {
    let mut out = String::new();
    for (name, path) in [
        ("grid", &cfg.grid),
        ("regions", &cfg.regions),
        ("profile", &cfg.profile),
        ("heat", &cfg.heat),
        ("end_use_shares", &cfg.end_use_shares),
    ] {
        let _ = writeln!(out, "sha256.{name} = {}", sha256_hex(path)?);
    }
    for file in ["supply.csv", "use.csv", "final_demand.csv", "value_added.csv", "trade.csv"] {
        let path = cfg.supply_use_dir.join(file);
        if path.exists() {
            let _ = writeln!(out, "sha256.supply_use.{file} = {}", sha256_hex(&path)?);
        }
    }
    Ok(out)
}

/// Per selected hour, district demand in MW.
fn format_demand(profiles: &[DemandProfile], hours: &[HourSelection]) -> Result<String> {
    let mut out = String::from("scenario,hour,region,demand_mw\n");
    for sel in hours {
        let p = profiles
            .iter()
            .find(|p| p.scenario == sel.scenario)
            .expect("hours were resolved from these profiles");
        let k = p.hour_index(sel.hour).expect("resolved hour exists");
        for (r, series) in p.regions.iter().zip(&p.demand_mw) {
            let _ = writeln!(out, "{},{},{},{}", sel.scenario, sel.hour, r, series[k]);
        }
    }
    Ok(out)
}

/// District demand per (scenario, hour), in the region order of the file.
pub type HourDemandTable = BTreeMap<(String, u32), Vec<(String, f64)>>;

fn load_demand(path: &Path) -> Result<HourDemandTable> {
    let source = path.display().to_string();
    let text = read_text(path)?;
    let mut out = HourDemandTable::new();
    for (line, f) in csv_rows(&text, &["scenario", "hour", "region", "demand_mw"], &source)? {
        let err = |m: String| Error::parse(&source, line, m);
        let hour: u32 = parse_field(f[1], "hour").map_err(err)?;
        let mw: f64 = parse_field(f[3], "demand_mw").map_err(err)?;
        out.entry((f[0].to_string(), hour)).or_default().push((f[2].to_string(), mw));
    }
    Ok(out)
}

fn demand_for(table: &HourDemandTable, scenario: &str, hour: u32, regions: &[String]) -> Result<Vec<f64>> {
    let rows = table
        .get(&(scenario.to_string(), hour))
        .ok_or_else(|| Error::Validation(format!("no demand rows for {scenario} hour {hour}")))?;
    regions
        .iter()
        .map(|r| {
            rows.iter()
                .find(|(id, _)| id == r)
                .map(|(_, mw)| *mw)
                .ok_or_else(|| Error::Validation(format!("no demand for region '{r}' at {scenario} hour {hour}")))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SimulateOutput {
    pub results: ResultTable,
    pub results_path: PathBuf,
}

/// Calibrates branch ratings on every configured scenario's peak hour, runs
/// the removal sweep and writes results, demand, calibrated grid and
/// provenance.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutput> {
    cfg.validate()?;
    let grid = load_grid(&cfg.grid)?;
    let regions = load_regions(&cfg.regions)?;
    let profiles = scenario_profiles(cfg)?;
    for r in &profiles[0].regions {
        if regions.get(r).is_none() {
            return Err(Error::Validation(format!("profile region '{r}' is not in the region table")));
        }
    }
    let hours = resolve_hours(&cfg.hours, &profiles)?;

    let options = cfg.dispatch_options();
    let peaks = profiles
        .iter()
        .map(|p| {
            let h = p.peak_hour().ok_or(Error::NoDemand)?;
            bus_demand(&grid, p, p.hour_index(h).expect("peak hour is on the axis"))
        })
        .collect::<Result<Vec<_>>>()?;
    let calibrated = calibrate_ratings(&grid, &peaks, cfg.headroom_factor, &options)?;
    let dispatcher = Dispatcher::new(calibrated.clone(), options)?;
    let experiment = ExperimentConfig {
        n_orderings: cfg.n_orderings,
        loss_fractions: cfg.loss_fractions.clone(),
        hours: hours.clone(),
        master_seed: cfg.master_seed,
        workers: cfg.workers,
    };
    let results = run_experiment(&dispatcher, &profiles, &experiment)?;

    let results_path = cfg.out.join(RESULTS_FILE);
    save_results(&results, &results_path)?;
    write_text(&cfg.out.join(DEMAND_FILE), &format_demand(&profiles, &hours)?)?;
    save_grid(&calibrated, cfg.out.join(CALIBRATED_GRID_FILE))?;
    let provenance = format!("{}{}", cfg.echo(), input_hashes(cfg)?);
    write_text(&cfg.out.join(PROVENANCE_FILE), &provenance)?;
    Ok(SimulateOutput { results, results_path })
}

fn load_model(cfg: &RunConfig) -> Result<SupplyUseModel> {
    let mut model = load_supply_use(&cfg.supply_use_dir)?;
    model.overcapacity = cfg.overcapacity;
    model.trade_cost = cfg.trade_cost;
    model.validate()?;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordImpact {
    /// Hourly cost.
    pub total_cost: f64,
    /// Hourly value-added change per economic region, in model order.
    pub regional_delta_va: Vec<f64>,
}

/// Economic impact of every simulated record. Identical shocks are solved
/// once.
pub fn assess_records(
    model: &SupplyUseModel,
    results: &ResultTable,
    regions: &RegionTable,
    demand: &HourDemandTable,
    workers: usize,
) -> Result<Vec<RecordImpact>> {
    let mut shocks: Vec<CapacityShock> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut which = Vec::with_capacity(results.records.len());
    let mut demand_cache: HashMap<(String, u32), Vec<f64>> = HashMap::new();
    for rec in &results.records {
        let key = (rec.scenario.clone(), rec.hour);
        if !demand_cache.contains_key(&key) {
            let d = demand_for(demand, &rec.scenario, rec.hour, &results.regions)?;
            demand_cache.insert(key.clone(), d);
        }
        let shock = shock_from_unserved(model, rec, results, regions, &demand_cache[&key])?;
        let bits: Vec<u64> = shock.delta.iter().flatten().map(|d| d.to_bits()).collect();
        let k = *index.entry(bits).or_insert_with(|| {
            shocks.push(shock);
            shocks.len() - 1
        });
        which.push(k);
    }
    let solved = map_units(&shocks, workers, |s| {
        let r = model.assess_impact(s)?;
        Ok(RecordImpact {
            total_cost: hourly(r.total_cost),
            regional_delta_va: r.regional_delta_va().into_iter().map(hourly).collect(),
        })
    })?;
    Ok(which.into_iter().map(|k| solved[k].clone()).collect())
}

/// Solves the economic model for every record of the simulation output and
/// writes per-record hourly cost and per-region value-added change.
pub fn cmd_impact(cfg: &RunConfig) -> Result<Vec<RecordImpact>> {
    let results = load_results(cfg.out.join(RESULTS_FILE))?;
    let demand = load_demand(&cfg.out.join(DEMAND_FILE))?;
    let regions = load_regions(&cfg.regions)?;
    let model = load_model(cfg)?;
    model.solve_baseline()?;
    let impacts = assess_records(&model, &results, &regions, &demand, cfg.workers)?;

    let mut costs = String::from("record_id,total_cost\n");
    let mut va = String::from("record_id,region,delta_va\n");
    for (k, imp) in impacts.iter().enumerate() {
        let _ = writeln!(costs, "{k},{}", imp.total_cost);
        for (region, d) in model.regions.iter().zip(&imp.regional_delta_va) {
            let _ = writeln!(va, "{k},{region},{d}");
        }
    }
    write_text(&cfg.out.join(COSTS_FILE), &costs)?;
    write_text(&cfg.out.join(REGIONAL_VA_FILE), &va)?;
    Ok(impacts)
}

fn load_costs(path: &Path, n: usize) -> Result<Vec<f64>> {
    let source = path.display().to_string();
    let text = read_text(path)?;
    let mut costs = vec![f64::NAN; n];
    for (line, f) in csv_rows(&text, &["record_id", "total_cost"], &source)? {
        let err = |m: String| Error::parse(&source, line, m);
        let k: usize = parse_field(f[0], "record_id").map_err(err)?;
        let c: f64 = parse_field(f[1], "total_cost").map_err(err)?;
        *costs
            .get_mut(k)
            .ok_or_else(|| err(format!("record {k} is not in the results")))? = c;
    }
    Ok(costs)
}

fn load_regional_costs(path: &Path, n: usize) -> Result<Vec<BTreeMap<String, f64>>> {
    let source = path.display().to_string();
    let text = read_text(path)?;
    let mut out = vec![BTreeMap::new(); n];
    for (line, f) in csv_rows(&text, &["record_id", "region", "delta_va"], &source)? {
        let err = |m: String| Error::parse(&source, line, m);
        let k: usize = parse_field(f[0], "record_id").map_err(err)?;
        let d: f64 = parse_field(f[2], "delta_va").map_err(err)?;
        out.get_mut(k)
            .ok_or_else(|| err(format!("record {k} is not in the results")))?
            .insert(f[1].to_string(), (-d).max(0.0));
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Writes cost curves, marginal costs on both axes, regional change and
/// population shares against the current profile, and a summary.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let results = load_results(cfg.out.join(RESULTS_FILE))?;
    let n = results.records.len();
    let costs = load_costs(&cfg.out.join(COSTS_FILE), n)?;
    let regional = load_regional_costs(&cfg.out.join(REGIONAL_VA_FILE), n)?;
    let demand = load_demand(&cfg.out.join(DEMAND_FILE))?;
    let regions = load_regions(&cfg.regions)?;
    let grid = load_grid(&cfg.grid)?;

    let mut scenarios: Vec<String> = Vec::new();
    for r in &results.records {
        if !scenarios.contains(&r.scenario) {
            scenarios.push(r.scenario.clone());
        }
    }
    let curves: Vec<CostCurve> = scenarios
        .iter()
        .map(|s| build_cost_curve(&results, &costs, s))
        .collect::<Result<_>>()?;

    let national = |s: &str, h: u32| -> f64 {
        demand
            .get(&(s.to_string(), h))
            .map_or(0.0, |rows| rows.iter().map(|(_, mw)| mw).sum())
    };
    let mut peaks: BTreeMap<String, f64> = BTreeMap::new();
    let mut hour_curves: Vec<(f64, CostCurve)> = Vec::new();
    for (scenario, hour) in demand.keys() {
        let d = national(scenario, *hour);
        let p = peaks.entry(scenario.clone()).or_insert(0.0);
        *p = p.max(d);
        let keep: Vec<usize> = (0..n)
            .filter(|&k| results.records[k].scenario == *scenario && results.records[k].hour == *hour)
            .collect();
        let sub = ResultTable {
            regions: results.regions.clone(),
            records: keep.iter().map(|&k| results.records[k].clone()).collect(),
        };
        let sub_costs: Vec<f64> = keep.iter().map(|&k| costs[k]).collect();
        hour_curves.push((d, build_cost_curve(&sub, &sub_costs, scenario)?));
    }

    let mut written = Vec::new();
    let mut emit = |name: String, text: String| -> Result<()> {
        let path = cfg.out.join(name);
        write_text(&path, &text)?;
        written.push(path);
        Ok(())
    };

    emit("cost_curve.csv".into(), format_cost_curves(&curves))?;

    let mut marginal = String::from("fraction,slope_per_gw\n");
    if curves.len() >= 2 {
        for (f, s) in marginal_by_fraction(&curves, &peaks)? {
            let _ = writeln!(marginal, "{f},{s}");
        }
    }
    emit("marginal.csv".into(), marginal)?;

    let capacity = total_capacity(&grid, false, false);
    let mut by_loss = String::from("scenario,slope_per_gw\n");
    for c in &curves {
        let slope = if c.points.len() >= 2 { Some(marginal_by_loss(c, capacity)?) } else { None };
        let _ = writeln!(by_loss, "{},{}", c.scenario, fmt_opt(slope));
    }
    emit("marginal_by_loss.csv".into(), by_loss)?;

    let current = ScenarioKind::Current.as_str();
    let mut shares = String::from("scenario,worse,better,unchanged\n");
    if scenarios.iter().any(|s| s == current) {
        let fraction = results
            .records
            .iter()
            .map(|r| r.fraction)
            .min_by(|a, b| (a - cfg.analysis_fraction).abs().total_cmp(&(b - cfg.analysis_fraction).abs()))
            .expect("results are nonempty");
        for s in scenarios.iter().filter(|s| *s != current) {
            let change = regional_relative_change(&results, &regional, s, current, fraction)?;
            emit(format!("regional_change_{s}.csv"), format_regional_change(&change))?;
            let p = population_shares(&change, &regions)?;
            let _ = writeln!(shares, "{s},{},{},{}", p.worse, p.better, p.unchanged);
        }
    }
    emit("population_share.csv".into(), shares)?;

    let mut summary = String::from("metric,scenario,value\n");
    for c in &curves {
        let _ = writeln!(summary, "first_impact_fraction,{},{}", c.scenario, fmt_opt(first_impact_fraction(c, 0.0)));
    }
    for (s, p) in &peaks {
        let _ = writeln!(summary, "peak_demand_mw,{s},{p}");
    }
    let _ = writeln!(summary, "low_demand_threshold_mw,all,{}", fmt_opt(low_demand_threshold(&hour_curves)));
    emit("summary.csv".into(), summary)?;
    Ok(written)
}
