//! Seeded synthetic fixtures: a five-bus toy and a GB-like network with
//! forty districts in eight economic regions, each with demand, heat,
//! end-use shares and supply-use tables.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demand::{
    save_profile, save_shares, synthesize_current, DemandProfile, EndUseShares, ScenarioSpec, ScenarioKind, ShapeParams,
    DEFAULT_EFFICIENCY, HEAT_COLUMN, PROFILE_COLUMN,
};
use crate::error::{Error, Result};
use crate::grid::{save_grid, save_regions, Branch, BranchKind, Bus, BusKind, Generator, Grid, Region, RegionTable, Technology};
use crate::mria::{save_supply_use, SupplyUseModel, DEFAULT_OVERCAPACITY, DEFAULT_TRADE_COST};
use crate::seed::derive_seed;
use crate::textio::write_text;

/// National current-profile peak of the GB-like fixture, MW.
pub const GB_CURRENT_PEAK_MW: f64 = 52_100.0;
/// National heat-pump peak the heat demand is sized for, MW.
pub const GB_HEAT_PUMP_PEAK_MW: f64 = 57_700.0;
/// Domestic non-solar derated capacity of the GB-like fixture, MW.
pub const GB_FIRM_CAPACITY_MW: f64 = 58_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureSize {
    Small,
    GbLike,
}

impl std::str::FromStr for FixtureSize {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "small" => Ok(FixtureSize::Small),
            "gb-like" => Ok(FixtureSize::GbLike),
            other => Err(format!("unknown fixture size '{other}' (expected small or gb-like)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub grid: Grid,
    pub regions: RegionTable,
    pub current: DemandProfile,
    pub heat: DemandProfile,
    pub shares: EndUseShares,
    pub supply_use: SupplyUseModel,
    /// Orderings written into the generated config.
    pub n_orderings: usize,
}

pub fn fixture(size: FixtureSize, seed: u64) -> Result<Fixture> {
    match size {
        FixtureSize::Small => small_fixture(seed),
        FixtureSize::GbLike => gb_like_fixture(seed),
    }
}

fn bus(id: &str, kv: f64, kind: BusKind, region: Option<&str>, xy: (f64, f64)) -> Bus {
    Bus {
        id: id.to_string(),
        voltage_kv: kv,
        kind,
        region: region.map(str::to_string),
        coordinates: Some(xy),
    }
}

fn branch(id: &str, from: &str, to: &str, kind: BranchKind, b: f64, rating: f64) -> Branch {
    Branch {
        id: id.to_string(),
        from_bus: from.to_string(),
        to_bus: to.to_string(),
        kind,
        susceptance_pu: b,
        rating_mw: rating,
    }
}

fn generator(id: &str, bus: &str, rated: f64, cf: f64, tech: Technology) -> Generator {
    Generator {
        id: id.to_string(),
        bus: bus.to_string(),
        rated_mw: rated,
        capacity_factor: cf,
        technology: tech,
    }
}

/// Heat demand proportional to current demand, sized so that the default
/// heat-pump uptake lifts the national peak by `target_ratio`.
fn heat_for_ratio(current: &DemandProfile, target_ratio: f64) -> DemandProfile {
    let spec = ScenarioSpec::new(ScenarioKind::HeatPump);
    let k = (target_ratio - 1.0) * spec.hp_cop / spec.hp_penetration;
    let mut heat = current.clone();
    heat.scenario = "heat".into();
    heat.demand_mw.iter_mut().flatten().for_each(|d| *d *= k);
    heat
}

/// Rescales a profile to the given national peak and rewrites the annual
/// energies in the region table to match.
fn scale_to_peak(profile: &mut DemandProfile, regions: &RegionTable, peak_mw: f64) -> Result<RegionTable> {
    let c = peak_mw / profile.peak_mw();
    profile.demand_mw.iter_mut().flatten().for_each(|d| *d *= c);
    let energy = profile.energy_mwh();
    RegionTable::new(
        regions
            .regions()
            .iter()
            .zip(energy)
            .map(|(r, e)| Region {
                annual_electricity_gwh: e / 1000.0,
                ..r.clone()
            })
            .collect(),
    )
}

fn shares_for(regions: &RegionTable, rng: &mut ChaCha8Rng) -> EndUseShares {
    const BASE: [f64; 7] = [0.35, 0.12, 0.12, 0.08, 0.10, 0.05, 0.18];
    regions
        .regions()
        .iter()
        .map(|r| {
            let raw: Vec<f64> = BASE.iter().map(|b| b * rng.gen_range(0.9..1.1)).collect();
            let sum: f64 = raw.iter().sum();
            let mut uses: BTreeMap<String, f64> = BTreeMap::new();
            let mut acc = 0.0;
            for (k, ((name, _), v)) in DEFAULT_EFFICIENCY.iter().zip(&raw).enumerate() {
                // The last share absorbs rounding so each region sums to one.
                let share = if k + 1 == raw.len() { 1.0 - acc } else { v / sum };
                acc += share;
                uses.insert(name.to_string(), share);
            }
            (r.id.clone(), uses)
        })
        .collect()
}

/// Diagonal supply-use tables with one technology everywhere. Regional
/// output is sized so value added matches the districts' annual value added.
fn supply_use_for(regions: &RegionTable, a: &[Vec<f64>], output_split: &[f64], trade: impl Fn(usize, usize) -> bool) -> SupplyUseModel {
    let names = regions.economic_regions();
    let n = a.len();
    let v: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|p| a[p][i]).sum::<f64>()).collect();
    let va_per_output: f64 = output_split.iter().zip(&v).map(|(s, v)| s * v).sum();
    let mut supply = Vec::new();
    let mut use_ = Vec::new();
    let mut final_demand = Vec::new();
    for e in &names {
        let va: f64 = regions.districts_of(e).map(|d| d.annual_value_added).sum();
        let total = va / va_per_output;
        let x0: Vec<f64> = output_split.iter().map(|s| s * total).collect();
        supply.push((0..n).map(|i| (0..n).map(|p| if p == i { x0[i] } else { 0.0 }).collect()).collect());
        let u: Vec<Vec<f64>> = (0..n).map(|p| (0..n).map(|i| a[p][i] * x0[i]).collect()).collect();
        // Final demand closes each product balance; summing the use row the
        // same way as validation keeps the residual at rounding level.
        final_demand.push((0..n).map(|p| x0[p] - u[p].iter().sum::<f64>()).collect());
        use_.push(u);
    }
    let nr = names.len();
    SupplyUseModel {
        industries: (1..=n).map(|i| format!("I{i}")).collect(),
        products: (1..=n).map(|p| format!("P{p}")).collect(),
        supply,
        use_,
        final_demand,
        value_added_coeff: vec![v; nr],
        trade_allowed: (0..nr)
            .map(|f| (0..nr).map(|t| vec![f != t && trade(f, t); n]).collect())
            .collect(),
        overcapacity: DEFAULT_OVERCAPACITY,
        trade_cost: DEFAULT_TRADE_COST,
        regions: names,
    }
}

/// Five buses: two generation, one substation, two demand buses in
/// separate economic regions.
pub fn small_fixture(seed: u64) -> Result<Fixture> {
    let buses = vec![
        bus("B1", 400.0, BusKind::Generation, None, (0.0, 0.0)),
        bus("B2", 400.0, BusKind::Generation, None, (40.0, 0.0)),
        bus("B3", 400.0, BusKind::Substation, None, (20.0, 30.0)),
        bus("B4", 132.0, BusKind::Demand, Some("D1"), (5.0, 60.0)),
        bus("B5", 132.0, BusKind::Demand, Some("D2"), (35.0, 60.0)),
    ];
    let branches = vec![
        branch("L12", "B1", "B2", BranchKind::Line, 20.0, 200.0),
        branch("L13", "B1", "B3", BranchKind::Line, 20.0, 200.0),
        branch("L23", "B2", "B3", BranchKind::Line, 20.0, 200.0),
        branch("T34", "B3", "B4", BranchKind::Transformer, 10.0, 150.0),
        branch("T35", "B3", "B5", BranchKind::Transformer, 10.0, 150.0),
        branch("L45", "B4", "B5", BranchKind::Line, 5.0, 60.0),
    ];
    let generators = vec![
        generator("G1", "B1", 300.0, 0.9, Technology::Thermal),
        generator("G2", "B2", 200.0, 0.4, Technology::Wind),
        generator("G3", "B2", 40.0, 0.1, Technology::Solar),
        generator("IC1", "B3", 30.0, 1.0, Technology::Interconnector),
    ];
    let grid = Grid::new(buses, branches, generators, 100.0)?;
    let regions = RegionTable::new(vec![
        Region {
            id: "D1".into(),
            parent: "E1".into(),
            population: 400_000.0,
            annual_value_added: 12_000.0,
            annual_electricity_gwh: 800.0,
        },
        Region {
            id: "D2".into(),
            parent: "E2".into(),
            population: 300_000.0,
            annual_value_added: 8_000.0,
            annual_electricity_gwh: 660.0,
        },
    ])?;
    let mut current = synthesize_current(&regions, &ShapeParams::default(), seed)?;
    let regions = scale_to_peak(&mut current, &regions, 250.0)?;
    let heat = heat_for_ratio(&current, GB_HEAT_PUMP_PEAK_MW / GB_CURRENT_PEAK_MW);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let shares = shares_for(&regions, &mut rng);
    let a = vec![vec![0.10, 0.20], vec![0.15, 0.10]];
    let supply_use = supply_use_for(&regions, &a, &[0.6, 0.4], |_, _| true);
    Ok(Fixture {
        grid,
        regions,
        current,
        heat,
        shares,
        supply_use,
        n_orderings: 5,
    })
}

const GB_REGIONS: usize = 8;
const GB_DISTRICTS_PER_REGION: usize = 5;

/// Unit template per generation bus: technology, nameplate MW, capacity factor.
const GB_UNITS: [(Technology, f64, f64); 5] = [
    (Technology::Thermal, 1500.0, 0.85),
    (Technology::Nuclear, 1200.0, 0.9),
    (Technology::Wind, 1800.0, 0.35),
    (Technology::OtherRenewable, 500.0, 0.6),
    (Technology::Hydro, 300.0, 0.4),
];

/// A north–south ladder of 400 kV hubs, two per economic region, with
/// generation buses on the hubs and each district fed through a 132 kV
/// substation and a 33 kV demand bus.
pub fn gb_like_fixture(seed: u64) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX - 1));
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut generators = Vec::new();
    let mut districts = Vec::new();

    for e in 1..=GB_REGIONS {
        let y = (GB_REGIONS - e) as f64 * 100.0;
        let (w, east) = (format!("H{e}W"), format!("H{e}E"));
        buses.push(bus(&w, 400.0, BusKind::Substation, None, (0.0, y)));
        buses.push(bus(&east, 400.0, BusKind::Substation, None, (80.0, y)));
        branches.push(branch(&format!("R{e}"), &w, &east, BranchKind::Line, 20.0, 6000.0));
        if e > 1 {
            let p = e - 1;
            branches.push(branch(&format!("W{p}{e}"), &format!("H{p}W"), &w, BranchKind::Line, 15.0, 8000.0));
            branches.push(branch(&format!("E{p}{e}"), &format!("H{p}E"), &east, BranchKind::Line, 15.0, 8000.0));
        }
        for (side, hub, x) in [("A", &w, -30.0), ("B", &east, 110.0)] {
            let gb = format!("G{e}{side}");
            buses.push(bus(&gb, 400.0, BusKind::Generation, None, (x, y)));
            branches.push(branch(&format!("C{e}{side}"), &gb, hub, BranchKind::Line, 25.0, 8000.0));
            // Northern regions lean on wind, southern on thermal.
            let north = 1.0 - (e - 1) as f64 / (GB_REGIONS - 1) as f64;
            for (k, &(tech, rated, cf)) in GB_UNITS.iter().enumerate() {
                let tilt = match tech {
                    Technology::Wind | Technology::Hydro => 0.6 + 0.8 * north,
                    Technology::Thermal => 1.4 - 0.8 * north,
                    _ => 1.0,
                };
                let size = rated * tilt * rng.gen_range(0.85..1.15);
                generators.push(generator(&format!("U{e}{side}{k}"), &gb, size, cf, tech));
            }
        }
        for d in 1..=GB_DISTRICTS_PER_REGION {
            let id = format!("D{e}{d}");
            let (s, l) = (format!("S{e}{d}"), format!("L{e}{d}"));
            let x = 8.0 + 16.0 * (d - 1) as f64;
            buses.push(bus(&s, 132.0, BusKind::Substation, None, (x, y - 20.0)));
            buses.push(bus(&l, 33.0, BusKind::Demand, Some(&id), (x, y - 40.0)));
            let hub = if d % 2 == 1 { &w } else { &east };
            branches.push(branch(&format!("T{e}{d}"), hub, &s, BranchKind::Transformer, 10.0, 3000.0));
            branches.push(branch(&format!("X{e}{d}"), &s, &l, BranchKind::Transformer, 10.0, 3000.0));
            if d > 1 {
                branches.push(branch(
                    &format!("M{e}{d}"),
                    &format!("S{e}{}", d - 1),
                    &s,
                    BranchKind::Line,
                    4.0,
                    800.0,
                ));
            }
            if d == 1 {
                generators.push(generator(&format!("PV{e}"), &s, 300.0, 0.1, Technology::Solar));
            }
            let population = rng.gen_range(80_000.0..600_000.0f64).round();
            districts.push(Region {
                id,
                parent: format!("E{e}"),
                population,
                annual_value_added: (population * 0.03 * rng.gen_range(0.8..1.2) * 100.0).round() / 100.0,
                annual_electricity_gwh: population * 0.0045 * rng.gen_range(0.9..1.1),
            });
        }
    }
    buses.push(bus("ICN", 400.0, BusKind::Generation, None, (0.0, 800.0)));
    buses.push(bus("ICS", 400.0, BusKind::Generation, None, (80.0, -100.0)));
    branches.push(branch("CICN", "ICN", "H1W", BranchKind::Cable, 10.0, 1000.0));
    branches.push(branch(
        "CICS",
        "ICS",
        &format!("H{GB_REGIONS}E"),
        BranchKind::Cable,
        10.0,
        1000.0,
    ));
    generators.push(generator("ICN1", "ICN", 500.0, 1.0, Technology::Interconnector));
    generators.push(generator("ICS1", "ICS", 500.0, 1.0, Technology::Interconnector));

    // Firm domestic capacity is pinned; derated totals scale exactly.
    let firm: f64 = generators
        .iter()
        .filter(|g| !g.is_international() && !g.is_solar())
        .map(Generator::derated_mw)
        .sum();
    let c = GB_FIRM_CAPACITY_MW / firm;
    for g in generators.iter_mut().filter(|g| !g.is_international() && !g.is_solar()) {
        g.rated_mw = (g.rated_mw * c * 1000.0).round() / 1000.0;
    }

    let grid = Grid::new(buses, branches, generators, 100.0)?;
    let regions = RegionTable::new(districts)?;
    let mut current = synthesize_current(&regions, &ShapeParams::default(), seed)?;
    let regions = scale_to_peak(&mut current, &regions, GB_CURRENT_PEAK_MW)?;
    let heat = heat_for_ratio(&current, GB_HEAT_PUMP_PEAK_MW / GB_CURRENT_PEAK_MW);
    let shares = shares_for(&regions, &mut rng);
    let a = vec![
        vec![0.10, 0.05, 0.08],
        vec![0.15, 0.20, 0.10],
        vec![0.05, 0.10, 0.12],
    ];
    let supply_use = supply_use_for(&regions, &a, &[0.3, 0.4, 0.3], |f, t| f.abs_diff(t) == 1);
    Ok(Fixture {
        grid,
        regions,
        current,
        heat,
        shares,
        supply_use,
        n_orderings: 50,
    })
}

/// File names used by [`write_fixture`] and the generated config.
pub const GRID_FILE: &str = "grid.csv";
pub const REGIONS_FILE: &str = "regions.csv";
pub const PROFILE_FILE: &str = "profile.csv";
pub const HEAT_FILE: &str = "heat.csv";
pub const SHARES_FILE: &str = "end_use_shares.csv";
pub const SUPPLY_USE_DIR: &str = "supply_use";
pub const CONFIG_FILE: &str = "config.txt";

/// Writes every fixture file plus a ready-to-run config into `dir`.
pub fn write_fixture(fx: &Fixture, seed: u64, dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        return Err(Error::Validation(format!("{} is not a directory", dir.display())));
    }
    save_grid(&fx.grid, dir.join(GRID_FILE))?;
    save_regions(&fx.regions, dir.join(REGIONS_FILE))?;
    save_profile(&fx.current, PROFILE_COLUMN, dir.join(PROFILE_FILE))?;
    save_profile(&fx.heat, HEAT_COLUMN, dir.join(HEAT_FILE))?;
    save_shares(&fx.shares, dir.join(SHARES_FILE))?;
    save_supply_use(&fx.supply_use, dir.join(SUPPLY_USE_DIR))?;
    let config = format!(
        "# generated fixture\n\
         grid = {GRID_FILE}\n\
         regions = {REGIONS_FILE}\n\
         profile = {PROFILE_FILE}\n\
         heat = {HEAT_FILE}\n\
         end_use_shares = {SHARES_FILE}\n\
         supply_use_dir = {SUPPLY_USE_DIR}\n\
         scenarios = current,efficiency,heat_pump,heat_pump_efficiency,flat\n\
         hours = peak,min\n\
         n_orderings = {}\n\
         loss_fractions = 0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45\n\
         master_seed = {seed}\n\
         out = out\n",
        fx.n_orderings
    );
    write_text(&dir.join(CONFIG_FILE), &config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::validate_connectivity;

    #[test]
    fn small_is_consistent() {
        let fx = small_fixture(1).unwrap();
        assert!(validate_connectivity(&fx.grid).is_connected());
        assert!((fx.current.peak_mw() - 250.0).abs() < 1e-6);
        fx.supply_use.validate().unwrap();
        fx.supply_use.solve_baseline().unwrap();
    }

    #[test]
    fn gb_like_aggregates() {
        let fx = gb_like_fixture(7).unwrap();
        assert!(validate_connectivity(&fx.grid).is_connected());
        assert_eq!(fx.regions.regions().len(), 40);
        assert!((fx.current.peak_mw() - GB_CURRENT_PEAK_MW).abs() < 1e-3);
        let firm = crate::grid::total_capacity(&fx.grid, false, true);
        assert!((firm - GB_FIRM_CAPACITY_MW).abs() < 1.0, "firm {firm}");
        fx.supply_use.solve_baseline().unwrap();
    }
}
