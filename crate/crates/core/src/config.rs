//! Run configuration: a flat `key = value` text file.
//!
//! ```text
//! # inputs, relative to this file
//! grid = grid.csv
//! regions = regions.csv
//! profile = profile.csv            # region,hour,demand_mw
//! heat = heat.csv                  # region,hour,heat_mw
//! end_use_shares = end_use_shares.csv
//! supply_use_dir = supply_use
//!
//! scenarios = current,efficiency,heat_pump,heat_pump_efficiency,flat
//! hours = peak,min                 # or hour-of-year integers
//! n_orderings = 1000
//! loss_fractions = 0,0.05,0.1      # default 0 to 0.45 in steps of 0.05
//! master_seed = 1
//! shed_step = 0.1
//! headroom_factor = 1.2
//! interconnector_penalty = 10
//! distance_metric = hops           # or impedance
//!
//! hp_penetration = 0.2
//! hp_cop = 3
//! efficiency.lighting = 0.6        # one line per end use
//! overcapacity = 0.025
//! trade_cost = 0.001
//!
//! analysis_fraction = 0.4
//! workers = 0                      # 0 = one per core
//! out = out
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::demand::{ScenarioKind, ScenarioSpec, DEFAULT_EFFICIENCY};
use crate::dispatch::DispatchOptions;
use crate::error::{Error, Result};
use crate::failure::default_loss_fractions;
use crate::grid::DistanceMetric;
use crate::mria::{DEFAULT_OVERCAPACITY, DEFAULT_TRADE_COST};
use crate::textio::{parse_field, read_text};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HourToken {
    Peak,
    Min,
    Hour(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: PathBuf,
    pub regions: PathBuf,
    pub profile: PathBuf,
    pub heat: PathBuf,
    pub end_use_shares: PathBuf,
    pub supply_use_dir: PathBuf,
    pub scenarios: Vec<ScenarioKind>,
    pub hours: Vec<HourToken>,
    pub n_orderings: usize,
    pub loss_fractions: Vec<f64>,
    pub master_seed: u64,
    pub shed_step: f64,
    pub headroom_factor: f64,
    pub interconnector_penalty: f64,
    pub distance_metric: DistanceMetric,
    pub hp_penetration: f64,
    pub hp_cop: f64,
    pub efficiency: BTreeMap<String, f64>,
    pub overcapacity: f64,
    pub trade_cost: f64,
    pub analysis_fraction: f64,
    pub workers: usize,
    pub out: PathBuf,
}

const PATH_KEYS: [&str; 6] = ["grid", "regions", "profile", "heat", "end_use_shares", "supply_use_dir"];

impl RunConfig {
    pub fn scenario_spec(&self, kind: ScenarioKind) -> ScenarioSpec {
        ScenarioSpec {
            kind,
            hp_penetration: self.hp_penetration,
            hp_cop: self.hp_cop,
            efficiency_factors: self.efficiency.clone(),
        }
    }

    pub fn dispatch_options(&self) -> DispatchOptions {
        DispatchOptions {
            interconnector_penalty: self.interconnector_penalty,
            shed_step: self.shed_step,
            distance_metric: self.distance_metric,
            ..DispatchOptions::default()
        }
    }

    /// Canonical `key = value` listing of everything that affects results.
    /// Paths and the worker count are left out.
    pub fn echo(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("scenarios", join(self.scenarios.iter().map(|s| s.to_string()).collect()));
        line(
            "hours",
            join(
                self.hours
                    .iter()
                    .map(|h| match h {
                        HourToken::Peak => "peak".to_string(),
                        HourToken::Min => "min".to_string(),
                        HourToken::Hour(n) => n.to_string(),
                    })
                    .collect(),
            ),
        );
        line("n_orderings", self.n_orderings.to_string());
        line("loss_fractions", join(self.loss_fractions.iter().map(f64::to_string).collect()));
        line("master_seed", self.master_seed.to_string());
        line("shed_step", self.shed_step.to_string());
        line("headroom_factor", self.headroom_factor.to_string());
        line("interconnector_penalty", self.interconnector_penalty.to_string());
        line(
            "distance_metric",
            match self.distance_metric {
                DistanceMetric::Hops => "hops".into(),
                DistanceMetric::Impedance => "impedance".into(),
            },
        );
        line("hp_penetration", self.hp_penetration.to_string());
        line("hp_cop", self.hp_cop.to_string());
        for (u, f) in &self.efficiency {
            line(&format!("efficiency.{u}"), f.to_string());
        }
        line("overcapacity", self.overcapacity.to_string());
        line("trade_cost", self.trade_cost.to_string());
        line("analysis_fraction", self.analysis_fraction.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.scenarios.is_empty() {
            return bad("no scenarios configured".into());
        }
        if self.n_orderings == 0 {
            return bad("n_orderings must be at least 1".into());
        }
        if !(self.shed_step > 0.0 && self.shed_step <= 1.0) {
            return bad(format!("shed_step {} must lie in (0, 1]", self.shed_step));
        }
        if !(self.headroom_factor >= 1.0) {
            return bad(format!("headroom_factor {} must be at least 1", self.headroom_factor));
        }
        if !(self.interconnector_penalty >= 1.0) {
            return bad(format!("interconnector_penalty {} must be at least 1", self.interconnector_penalty));
        }
        if !(0.0..=1.0).contains(&self.analysis_fraction) {
            return bad("analysis_fraction must lie in [0, 1]".into());
        }
        self.scenario_spec(ScenarioKind::Current).validate()
    }
}

fn list<T>(value: &str, what: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(|e| format!("{what}: {e}")))
        .collect()
}

/// Reads a config file; relative paths resolve against its directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&read_text(path)?, base, &path.display().to_string())
}

pub fn parse_config(text: &str, base: &Path, source: &str) -> Result<RunConfig> {
    let mut paths: BTreeMap<&str, PathBuf> = BTreeMap::new();
    let mut cfg = RunConfig {
        grid: PathBuf::new(),
        regions: PathBuf::new(),
        profile: PathBuf::new(),
        heat: PathBuf::new(),
        end_use_shares: PathBuf::new(),
        supply_use_dir: PathBuf::new(),
        scenarios: ScenarioKind::ALL.to_vec(),
        hours: vec![HourToken::Peak, HourToken::Min],
        n_orderings: 1000,
        loss_fractions: default_loss_fractions(),
        master_seed: 0,
        shed_step: 0.1,
        headroom_factor: 1.2,
        interconnector_penalty: 10.0,
        distance_metric: DistanceMetric::Hops,
        hp_penetration: 0.2,
        hp_cop: 3.0,
        efficiency: DEFAULT_EFFICIENCY.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        overcapacity: DEFAULT_OVERCAPACITY,
        trade_cost: DEFAULT_TRADE_COST,
        analysis_fraction: 0.4,
        workers: 0,
        out: base.join("out"),
    };
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| Error::parse(source, line_no + 1, m);
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
        if let Some(k) = PATH_KEYS.iter().find(|k| **k == key) {
            paths.insert(k, base.join(value));
            continue;
        }
        if let Some(end_use) = key.strip_prefix("efficiency.") {
            cfg.efficiency.insert(end_use.to_string(), parse_field(value, key).map_err(err)?);
            continue;
        }
        match key {
            "scenarios" => cfg.scenarios = list(value, key, |s| s.parse()).map_err(err)?,
            "hours" => {
                cfg.hours = list(value, key, |s| match s {
                    "peak" => Ok(HourToken::Peak),
                    "min" => Ok(HourToken::Min),
                    n => parse_field(n, "hour").map(HourToken::Hour),
                })
                .map_err(err)?
            }
            "n_orderings" => cfg.n_orderings = parse_field(value, key).map_err(err)?,
            "loss_fractions" => cfg.loss_fractions = list(value, key, |s| parse_field(s, "fraction")).map_err(err)?,
            "master_seed" => cfg.master_seed = parse_field(value, key).map_err(err)?,
            "shed_step" => cfg.shed_step = parse_field(value, key).map_err(err)?,
            "headroom_factor" => cfg.headroom_factor = parse_field(value, key).map_err(err)?,
            "interconnector_penalty" => cfg.interconnector_penalty = parse_field(value, key).map_err(err)?,
            "distance_metric" => {
                cfg.distance_metric = match value {
                    "hops" => DistanceMetric::Hops,
                    "impedance" => DistanceMetric::Impedance,
                    other => return Err(err(format!("unknown distance_metric '{other}'"))),
                }
            }
            "hp_penetration" => cfg.hp_penetration = parse_field(value, key).map_err(err)?,
            "hp_cop" => cfg.hp_cop = parse_field(value, key).map_err(err)?,
            "overcapacity" => cfg.overcapacity = parse_field(value, key).map_err(err)?,
            "trade_cost" => cfg.trade_cost = parse_field(value, key).map_err(err)?,
            "analysis_fraction" => cfg.analysis_fraction = parse_field(value, key).map_err(err)?,
            "workers" => cfg.workers = parse_field(value, key).map_err(err)?,
            "out" => cfg.out = base.join(value),
            other => return Err(err(format!("unknown key '{other}'"))),
        }
    }
    for key in PATH_KEYS {
        let Some(p) = paths.remove(key) else {
            return Err(Error::Validation(format!("{source}: missing required key '{key}'")));
        };
        match key {
            "grid" => cfg.grid = p,
            "regions" => cfg.regions = p,
            "profile" => cfg.profile = p,
            "heat" => cfg.heat = p,
            "end_use_shares" => cfg.end_use_shares = p,
            _ => cfg.supply_use_dir = p,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "grid = g.csv\nregions = r.csv\nprofile = p.csv\nheat = h.csv\nend_use_shares = s.csv\nsupply_use_dir = su\n";

    #[test]
    fn defaults_and_paths() {
        let c = parse_config(MINIMAL, Path::new("/base"), "mem").unwrap();
        assert_eq!(c.grid, PathBuf::from("/base/g.csv"));
        assert_eq!(c.n_orderings, 1000);
        assert_eq!(c.loss_fractions.len(), 10);
        assert_eq!(c.out, PathBuf::from("/base/out"));
    }

    #[test]
    fn overrides() {
        let text = format!(
            "{MINIMAL}hours = peak, 12\nscenarios = current,flat\nefficiency.lighting = 0.5 # brighter\nworkers = 4\n"
        );
        let c = parse_config(&text, Path::new("."), "mem").unwrap();
        assert_eq!(c.hours, vec![HourToken::Peak, HourToken::Hour(12)]);
        assert_eq!(c.scenarios, vec![ScenarioKind::Current, ScenarioKind::Flat]);
        assert_eq!(c.efficiency["lighting"], 0.5);
        assert_eq!(c.workers, 4);
        assert!(!c.echo().contains("workers"));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_config(&format!("{MINIMAL}colour = blue\n"), Path::new("."), "mem"),
            Err(Error::Parse { line: 7, .. })
        ));
        assert!(matches!(parse_config("grid = g\n", Path::new("."), "mem"), Err(Error::Validation(_))));
        assert!(parse_config(&format!("{MINIMAL}shed_step = 0\n"), Path::new("."), "mem").is_err());
    }
}
