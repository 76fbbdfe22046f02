use dsmrisk::demand::{build_scenario, extract_extreme_days, DemandProfile, ScenarioInputs, ScenarioKind, ScenarioSpec};
use dsmrisk::dispatch::{DispatchOptions, Dispatcher};
use dsmrisk::failure::{run_experiment, ExperimentConfig, HourSelection};
use dsmrisk::grid::{Branch, BranchKind, Bus, BusKind, Generator, Grid, Technology};
use dsmrisk::powerflow::dc_power_flow;
use dsmrisk::synthetic::{small_fixture, Fixture};
use dsmrisk::{Error, Result};

pub fn scenario_names() -> Vec<String> {
    ScenarioKind::ALL.iter().map(|k| k.as_str().to_string()).collect()
}

pub struct DemoModel {
    fx: Fixture,
}

impl DemoModel {
    pub fn new(seed: u64) -> Result<Self> {
        Ok(DemoModel { fx: small_fixture(seed)? })
    }

    pub fn grid(&self) -> &Grid {
        &self.fx.grid
    }

    pub fn day_profile(&self, scenario: &str, hp_penetration: f64, peak_day: bool) -> Result<Vec<f64>> {
        let kind: ScenarioKind = scenario.parse().map_err(Error::Validation)?;
        let mut spec = ScenarioSpec::new(kind);
        spec.hp_penetration = hp_penetration;
        let inputs = ScenarioInputs {
            current: &self.fx.current,
            heat_mw: &self.fx.heat,
            shares: &self.fx.shares,
        };
        let profile = build_scenario(&inputs, &spec)?;
        let (peak, low) = extract_extreme_days(&profile);
        let national = profile.national();
        let day = if peak_day { peak } else { low };
        Ok(day
            .iter()
            .filter_map(|h| profile.hour_index(*h))
            .map(|i| national[i])
            .collect())
    }

    pub fn bus_positions(&self) -> Vec<f64> {
        self.grid()
            .buses()
            .iter()
            .flat_map(|b| {
                let (x, y) = b.coordinates.unwrap_or((0.0, 0.0));
                [x, y]
            })
            .collect()
    }

    pub fn bus_names(&self) -> Vec<String> {
        self.grid().buses().iter().map(|b| b.id.clone()).collect()
    }

    pub fn branch_ends(&self) -> Vec<u32> {
        let grid = self.grid();
        (0..grid.branches().len())
            .flat_map(|k| {
                let (a, b) = grid.branch_ends(k);
                [a as u32, b as u32]
            })
            .collect()
    }

    pub fn branch_ratings(&self) -> Vec<f64> {
        self.grid().branches().iter().map(|b| b.rating_mw).collect()
    }

    pub fn flows(&self, injections_mw: &[f64]) -> Result<Vec<f64>> {
        let grid = self.grid();
        if injections_mw.len() != grid.bus_count() {
            return Err(Error::Validation(format!(
                "expected {} injections, got {}",
                grid.bus_count(),
                injections_mw.len()
            )));
        }
        let slack = grid.buses()[0].id.clone();
        Ok(dc_power_flow(grid, injections_mw, &slack)?.flows_mw)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub fraction: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

const PLATE_DEMAND_MW: f64 = 1000.0;

/// One generation bus feeding one demand bus over an unlimited line. Unit
/// sizes cycle through 1, 1.5, 2, 2.5 and are scaled so total capacity is
/// demand times `1 + margin`.
fn plate(units: usize, margin: f64) -> Result<Grid> {
    let bus = |id: &str, kind, region: Option<&str>| Bus {
        id: id.into(),
        voltage_kv: 132.0,
        kind,
        region: region.map(Into::into),
        coordinates: None,
    };
    let raw: Vec<f64> = (0..units).map(|k| 1.0 + 0.5 * (k % 4) as f64).collect();
    let scale = PLATE_DEMAND_MW * (1.0 + margin) / raw.iter().sum::<f64>();
    let generators = raw
        .iter()
        .enumerate()
        .map(|(k, r)| Generator {
            id: format!("U{k}"),
            bus: "G".into(),
            rated_mw: r * scale,
            capacity_factor: 1.0,
            technology: Technology::Thermal,
        })
        .collect();
    let line = Branch {
        id: "X".into(),
        from_bus: "G".into(),
        to_bus: "L".into(),
        kind: BranchKind::Line,
        susceptance_pu: 10.0,
        rating_mw: 1e9,
    };
    Grid::new(
        vec![bus("G", BusKind::Generation, None), bus("L", BusKind::Demand, Some("R"))],
        vec![line],
        generators,
        100.0,
    )
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Share of demand shed at each lost-capacity fraction 0, 0.05, .., 0.95,
/// summarised over random orderings.
pub fn shed_curve(units: usize, margin: f64, orderings: usize, seed: u64) -> Result<Vec<CurvePoint>> {
    if !(1..=400).contains(&units) || !(1..=400).contains(&orderings) {
        return Err(Error::Validation("units and orderings must lie in 1..=400".into()));
    }
    if !(0.0..=2.0).contains(&margin) {
        return Err(Error::Validation(format!("margin {margin} outside [0, 2]")));
    }
    let dispatcher = Dispatcher::new(plate(units, margin)?, DispatchOptions::default())?;
    let profile = DemandProfile::new("current", vec![0], vec!["R".into()], vec![vec![PLATE_DEMAND_MW]])?;
    let fractions: Vec<f64> = (0..20).map(|k| f64::from(k) * 0.05).collect();
    let cfg = ExperimentConfig {
        n_orderings: orderings,
        loss_fractions: fractions.clone(),
        hours: vec![HourSelection { scenario: "current".into(), hour: 0 }],
        master_seed: seed,
        workers: 1,
    };
    let table = run_experiment(&dispatcher, &[profile], &cfg)?;
    Ok(fractions
        .iter()
        .map(|&f| {
            let mut shed: Vec<f64> = table
                .records
                .iter()
                .filter(|r| r.fraction == f)
                .map(|r| r.total_unserved_mw() / PLATE_DEMAND_MW)
                .collect();
            shed.sort_by(f64::total_cmp);
            CurvePoint {
                fraction: f,
                median: median(&shed),
                min: shed[0],
                max: shed[shed.len() - 1],
            }
        })
        .collect())
}
