mod support;

use std::collections::BTreeMap;

use dsmrisk::analysis::{build_cost_curve, marginal_cost_per_gw, population_shares, Ratio, RegionalChange};
use dsmrisk::config::load_config;
use dsmrisk::demand::DemandProfile;
use dsmrisk::dispatch::{DispatchOptions, Dispatcher};
use dsmrisk::failure::{default_loss_fractions, run_experiment, ExperimentConfig, HourSelection};
use dsmrisk::grid::{Region, RegionTable};
use dsmrisk::mria::SupplyUseModel;
use dsmrisk::pipeline::{assess_records, cmd_analyze, cmd_impact, cmd_simulate, HourDemandTable};
use dsmrisk::synthetic::{small_fixture, write_fixture, CONFIG_FILE};
use proptest::prelude::*;
use support::copper_plate;

fn one_region_table() -> RegionTable {
    RegionTable::new(vec![Region {
        id: "R".into(),
        parent: "E".into(),
        population: 1000.0,
        annual_value_added: 50.0,
        annual_electricity_gwh: 1.0,
    }])
    .unwrap()
}

fn one_region_model() -> SupplyUseModel {
    SupplyUseModel {
        regions: vec!["E".into()],
        industries: vec!["I".into()],
        products: vec!["P".into()],
        supply: vec![vec![vec![100.0]]],
        use_: vec![vec![vec![20.0]]],
        final_demand: vec![vec![80.0]],
        value_added_coeff: vec![vec![0.5]],
        trade_allowed: vec![vec![vec![false]]],
        overcapacity: 0.0,
        trade_cost: 1e-3,
    }
}

#[test]
fn copper_plate_medians_rise_with_fraction() {
    let units: Vec<f64> = (0..30).map(|k| 8.0 + f64::from(k % 5) * 2.0).collect();
    let dispatcher = Dispatcher::new(copper_plate(&units, 2), DispatchOptions::default()).unwrap();
    let profile = DemandProfile::new("current", vec![0, 1], vec!["R".into()], vec![vec![250.0, 180.0]]).unwrap();
    let cfg = ExperimentConfig {
        n_orderings: 20,
        loss_fractions: default_loss_fractions(),
        hours: vec![
            HourSelection { scenario: "current".into(), hour: 0 },
            HourSelection { scenario: "current".into(), hour: 1 },
        ],
        master_seed: 3,
        workers: 1,
    };
    let table = run_experiment(&dispatcher, &[profile], &cfg).unwrap();
    let mut demand = HourDemandTable::new();
    demand.insert(("current".into(), 0), vec![("R".into(), 250.0)]);
    demand.insert(("current".into(), 1), vec![("R".into(), 180.0)]);
    let impacts = assess_records(&one_region_model(), &table, &one_region_table(), &demand, 1).unwrap();
    let costs: Vec<f64> = impacts.iter().map(|i| i.total_cost).collect();
    for (rec, c) in table.records.iter().zip(&costs) {
        assert_eq!(rec.total_unserved_mw() == 0.0, *c == 0.0);
    }
    let curve = build_cost_curve(&table, &costs, "current").unwrap();
    assert_eq!(curve.points.len(), 10);
    assert!(curve.points.windows(2).all(|w| w[1].median >= w[0].median));
    assert!(curve.points.last().unwrap().median > 0.0);
}

/// Reads a CSV with a header into rows of fields.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn plain_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn cost_curve_matches_recomputation_from_raw_files() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(&small_fixture(1).unwrap(), 1, dir.path()).unwrap();
    let mut cfg = load_config(dir.path().join(CONFIG_FILE)).unwrap();
    cfg.out = dir.path().join("out");
    cmd_simulate(&cfg).unwrap();
    cmd_impact(&cfg).unwrap();
    cmd_analyze(&cfg).unwrap();
    let read = |name: &str| std::fs::read_to_string(cfg.out.join(name)).unwrap();

    // One record per (ordering, fraction, scenario, hour); results rows are
    // per region, in record order.
    let mut keys: Vec<(String, String, String, String)> = Vec::new();
    for r in rows(&read("results.csv")) {
        let key = (r[0].clone(), r[1].clone(), r[2].clone(), r[3].clone());
        if keys.last() != Some(&key) {
            keys.push(key);
        }
    }
    let costs: BTreeMap<usize, f64> = rows(&read("costs.csv"))
        .into_iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    assert_eq!(costs.len(), keys.len());

    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (k, key) in keys.iter().enumerate() {
        groups.entry((key.2.clone(), key.1.clone())).or_default().push(costs[&k]);
    }
    let curve = rows(&read("cost_curve.csv"));
    assert_eq!(curve.len(), groups.len());
    for r in curve {
        let sample = &groups[&(r[0].clone(), r[1].clone())];
        let got: Vec<f64> = r[2..5].iter().map(|v| v.parse().unwrap()).collect();
        let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(got, vec![plain_median(sample.clone()), lo, hi], "{r:?}");
    }
}

proptest! {
    #[test]
    fn two_point_slope_is_the_secant(p1 in 1.0e3f64..1.0e5, dp in 1.0f64..1.0e4, c1 in 0.0f64..1.0e7, c2 in 0.0f64..1.0e7) {
        let s = marginal_cost_per_gw(&[(p1, c1), (p1 + dp, c2)]).unwrap();
        let secant = (c2 - c1) / (p1 + dp - p1) * 1000.0;
        prop_assert_eq!(s, secant);
        let flat = marginal_cost_per_gw(&[(p1, c1), (p1 + dp, c1)]).unwrap();
        prop_assert_eq!(flat, 0.0);
    }

    #[test]
    fn shares_always_sum_to_one(cases in prop::collection::vec((0.0f64..1e6, 0u8..4, 0.0f64..3.0), 1..15)) {
        let regions = RegionTable::new(
            cases
                .iter()
                .enumerate()
                .map(|(i, (pop, _, _))| Region {
                    id: format!("d{i}"),
                    parent: format!("E{i}"),
                    population: *pop,
                    annual_value_added: 1.0,
                    annual_electricity_gwh: 1.0,
                })
                .collect(),
        )
        .unwrap();
        let ratios = cases
            .iter()
            .enumerate()
            .map(|(i, (_, kind, v))| {
                let r = match kind {
                    0 => Ratio::NoChange,
                    1 => Ratio::Infinite,
                    2 => Ratio::Value(1.0),
                    _ => Ratio::Value(*v),
                };
                (format!("E{i}"), r)
            })
            .collect();
        let change = RegionalChange { scenario: "s".into(), fraction: 0.3, ratios };
        let s = population_shares(&change, &regions).unwrap();
        prop_assert_eq!(s.worse + s.better + s.unchanged, 1.0);
        prop_assert!(s.worse >= 0.0 && s.better >= 0.0 && s.worse + s.better <= 1.0 + 1e-12);
    }
}

#[test]
fn degenerate_peaks_are_rejected() {
    assert!(marginal_cost_per_gw(&[(5.0, 1.0), (5.0, 2.0)]).is_err());
    assert!(marginal_cost_per_gw(&[]).is_err());
}
