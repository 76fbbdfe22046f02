//! Hourly regional demand profiles and the scenario transforms applied to
//! them: appliance efficiency, heat-pump uptake and a flat profile.

mod io;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub use io::{
    format_profile, format_shares, load_profile, load_shares, parse_profile, parse_shares, save_profile, save_shares,
    HEAT_COLUMN, PROFILE_COLUMN,
};
pub use synth::{synthesize_current, ShapeParams, DIURNAL_SHAPE};

pub const HOURS_PER_YEAR: u32 = 8760;

/// End use whose consumption the heat-pump uptake replaces.
pub const HEAT_END_USE: &str = "space_water_heating";

/// Default efficiency factor per end use.
pub const DEFAULT_EFFICIENCY: [(&str, f64); 7] = [
    ("space_water_heating", 0.85),
    ("lighting", 0.6),
    ("cold", 0.8),
    ("cooking", 0.9),
    ("wet", 0.85),
    ("cooling_humidification", 0.8),
    ("high_temp_process", 0.9),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    Current,
    Efficiency,
    HeatPump,
    HeatPumpEfficiency,
    Flat,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Current,
        ScenarioKind::Efficiency,
        ScenarioKind::HeatPump,
        ScenarioKind::HeatPumpEfficiency,
        ScenarioKind::Flat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Current => "current",
            ScenarioKind::Efficiency => "efficiency",
            ScenarioKind::HeatPump => "heat_pump",
            ScenarioKind::HeatPumpEfficiency => "heat_pump_efficiency",
            ScenarioKind::Flat => "flat",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| format!("unknown scenario '{s}'"))
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub hp_penetration: f64,
    pub hp_cop: f64,
    /// Multiplicative factor per end use; missing end uses keep factor 1.
    pub efficiency_factors: BTreeMap<String, f64>,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioSpec {
            kind,
            hp_penetration: 0.2,
            hp_cop: 3.0,
            efficiency_factors: DEFAULT_EFFICIENCY.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hp_penetration) {
            return Err(Error::Validation(format!(
                "heat-pump penetration {} outside [0, 1]",
                self.hp_penetration
            )));
        }
        if !(self.hp_cop > 0.0 && self.hp_cop.is_finite()) {
            return Err(Error::Validation(format!("heat-pump COP {} must be positive", self.hp_cop)));
        }
        for (u, f) in &self.efficiency_factors {
            if !(*f > 0.0 && *f <= 1.0) {
                return Err(Error::Validation(format!("efficiency factor for '{u}' is {f}, expected (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn factor(&self, end_use: &str) -> f64 {
        self.efficiency_factors.get(end_use).copied().unwrap_or(1.0)
    }
}

/// Per-region fractions of electricity use by end use.
pub type EndUseShares = BTreeMap<String, BTreeMap<String, f64>>;

/// Demand in MW for each region over a shared hour axis.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandProfile {
    pub scenario: String,
    /// Hour-of-year indices, strictly ascending.
    pub hours: Vec<u32>,
    pub regions: Vec<String>,
    /// `demand_mw[region][k]` is the demand at `hours[k]`.
    pub demand_mw: Vec<Vec<f64>>,
}

impl DemandProfile {
    pub fn new(scenario: impl Into<String>, hours: Vec<u32>, regions: Vec<String>, demand_mw: Vec<Vec<f64>>) -> Result<Self> {
        if hours.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("profile hours must be strictly ascending".into()));
        }
        if demand_mw.len() != regions.len() {
            return Err(Error::Validation(format!(
                "{} regions but {} demand series",
                regions.len(),
                demand_mw.len()
            )));
        }
        for (r, series) in regions.iter().zip(&demand_mw) {
            if series.len() != hours.len() {
                return Err(Error::MisalignedHours(format!(
                    "region '{r}' has {} values for {} hours",
                    series.len(),
                    hours.len()
                )));
            }
            if series.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return Err(Error::Validation(format!("region '{r}' has a negative or non-finite demand")));
            }
        }
        Ok(DemandProfile {
            scenario: scenario.into(),
            hours,
            regions,
            demand_mw,
        })
    }

    pub fn region_index(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r == id)
    }

    pub fn hour_index(&self, hour: u32) -> Option<usize> {
        self.hours.binary_search(&hour).ok()
    }

    /// National demand at each hour.
    pub fn national(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.hours.len()];
        for series in &self.demand_mw {
            for (t, d) in total.iter_mut().zip(series) {
                *t += d;
            }
        }
        total
    }

    /// Hour of the (earliest) national maximum.
    pub fn peak_hour(&self) -> Option<u32> {
        extreme_index(&self.national(), |a, b| a > b).map(|k| self.hours[k])
    }

    /// Hour of the (earliest) national minimum.
    pub fn min_hour(&self) -> Option<u32> {
        extreme_index(&self.national(), |a, b| a < b).map(|k| self.hours[k])
    }

    pub fn peak_mw(&self) -> f64 {
        self.national().into_iter().fold(0.0, f64::max)
    }

    /// MWh per region over the hour axis.
    pub fn energy_mwh(&self) -> Vec<f64> {
        self.demand_mw.iter().map(|s| s.iter().sum()).collect()
    }

    pub fn total_energy_mwh(&self) -> f64 {
        self.energy_mwh().iter().sum()
    }

    fn check_aligned(&self, other: &DemandProfile) -> Result<()> {
        if self.hours != other.hours {
            return Err(Error::MisalignedHours(format!(
                "'{}' and '{}' cover different hours",
                self.scenario, other.scenario
            )));
        }
        if self.regions != other.regions {
            return Err(Error::MisalignedHours(format!(
                "'{}' and '{}' list different regions",
                self.scenario, other.scenario
            )));
        }
        Ok(())
    }

    fn renamed(mut self, scenario: &str) -> Self {
        self.scenario = scenario.to_string();
        self
    }
}

fn extreme_index(values: &[f64], better: impl Fn(f64, f64) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| better(v, values[b])) {
            best = Some(k);
        }
    }
    best
}

/// Adds the electrical load of heat pumps covering `hp_penetration` of the
/// heat demand at a constant COP.
pub fn apply_heat_pump(profile: &DemandProfile, spec: &ScenarioSpec, heat_mw: &DemandProfile) -> Result<DemandProfile> {
    spec.validate()?;
    profile.check_aligned(heat_mw)?;
    let k = spec.hp_penetration / spec.hp_cop;
    let mut out = profile.clone();
    for (series, heat) in out.demand_mw.iter_mut().zip(&heat_mw.demand_mw) {
        for (d, h) in series.iter_mut().zip(heat) {
            *d += k * h;
        }
    }
    Ok(out)
}

/// Share-weighted efficiency multiplier per region.
pub fn efficiency_multipliers(regions: &[String], spec: &ScenarioSpec, shares: &EndUseShares) -> Result<Vec<f64>> {
    regions
        .iter()
        .map(|r| {
            let s = shares
                .get(r)
                .ok_or_else(|| Error::Validation(format!("no end-use shares for region '{r}'")))?;
            let sum: f64 = s.values().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::SharesNotNormalized { region: r.clone(), sum });
            }
            if s.values().any(|v| *v < 0.0) {
                return Err(Error::Validation(format!("negative end-use share in region '{r}'")));
            }
            Ok(s.iter().map(|(u, share)| share * spec.factor(u)).sum())
        })
        .collect()
}

/// Scales each region's demand by its share-weighted efficiency factor.
pub fn apply_efficiency(profile: &DemandProfile, spec: &ScenarioSpec, shares: &EndUseShares) -> Result<DemandProfile> {
    spec.validate()?;
    let m = efficiency_multipliers(&profile.regions, spec, shares)?;
    let mut out = profile.clone();
    for (series, f) in out.demand_mw.iter_mut().zip(m) {
        // Shares can sum to slightly above 1; never let that raise demand.
        let f = f.min(1.0);
        for d in series.iter_mut() {
            *d *= f;
        }
    }
    Ok(out)
}

/// Every hour of a region set to that region's mean over the profile.
pub fn apply_flat(profile: &DemandProfile) -> DemandProfile {
    let mut out = profile.clone();
    let n = profile.hours.len() as f64;
    for series in out.demand_mw.iter_mut() {
        // Averaging a constant series can move it by an ulp.
        if series.windows(2).all(|w| w[0] == w[1]) {
            continue;
        }
        let mean = series.iter().sum::<f64>() / n;
        series.iter_mut().for_each(|d| *d = mean);
    }
    out
}

/// The hours of the day holding the national maximum and of the day holding
/// the national minimum. Ties go to the earliest day.
pub fn extract_extreme_days(profile: &DemandProfile) -> (Vec<u32>, Vec<u32>) {
    let day_of = |h: Option<u32>| h.map(|h| h / 24);
    let hours_of = |day: Option<u32>| -> Vec<u32> {
        day.map_or_else(Vec::new, |d| profile.hours.iter().copied().filter(|h| h / 24 == d).collect())
    };
    (hours_of(day_of(profile.peak_hour())), hours_of(day_of(profile.min_hour())))
}

/// Inputs shared by every scenario transform.
#[derive(Clone, Debug)]
pub struct ScenarioInputs<'a> {
    pub current: &'a DemandProfile,
    pub heat_mw: &'a DemandProfile,
    pub shares: &'a EndUseShares,
}

/// Builds one scenario's profile from the current profile.
///
/// The combined scenario applies efficiency first and then adds heat pumps
/// serving the efficiency-adjusted heat load.
pub fn build_scenario(inputs: &ScenarioInputs<'_>, spec: &ScenarioSpec) -> Result<DemandProfile> {
    spec.validate()?;
    let name = spec.kind.as_str();
    let out = match spec.kind {
        ScenarioKind::Current => inputs.current.clone(),
        ScenarioKind::Efficiency => apply_efficiency(inputs.current, spec, inputs.shares)?,
        ScenarioKind::HeatPump => apply_heat_pump(inputs.current, spec, inputs.heat_mw)?,
        ScenarioKind::HeatPumpEfficiency => {
            let efficient = apply_efficiency(inputs.current, spec, inputs.shares)?;
            let mut heat = inputs.heat_mw.clone();
            let f = spec.factor(HEAT_END_USE);
            heat.demand_mw.iter_mut().flatten().for_each(|h| *h *= f);
            apply_heat_pump(&efficient, spec, &heat)?
        }
        ScenarioKind::Flat => apply_flat(inputs.current),
    };
    Ok(out.renamed(name))
}

/// Splits each region's demand at one hour equally over the demand buses
/// assigned to it. Returns MW per bus; regions without a demand bus are an
/// error.
pub fn bus_demand(grid: &Grid, profile: &DemandProfile, hour_index: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; grid.bus_count()];
    let buses = grid.buses();
    let demand_buses = grid.demand_buses();
    for (r, region) in profile.regions.iter().enumerate() {
        let members: Vec<usize> = demand_buses
            .iter()
            .copied()
            .filter(|&b| buses[b].region.as_deref() == Some(region.as_str()))
            .collect();
        if members.is_empty() {
            return Err(Error::Validation(format!("region '{region}' has no demand bus")));
        }
        let share = profile.demand_mw[r][hour_index] / members.len() as f64;
        for b in members {
            out[b] += share;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(series: Vec<Vec<f64>>) -> DemandProfile {
        let n = series[0].len() as u32;
        let regions = (0..series.len()).map(|i| format!("r{i}")).collect();
        DemandProfile::new("current", (0..n).collect(), regions, series).unwrap()
    }

    fn shares(pairs: &[(&str, f64)]) -> EndUseShares {
        let inner: BTreeMap<String, f64> = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        [("r0".to_string(), inner)].into_iter().collect()
    }

    #[test]
    fn heat_pump_arithmetic() {
        let p = profile(vec![vec![100.0, 100.0]]);
        let heat = profile(vec![vec![300.0, 0.0]]);
        let spec = ScenarioSpec::new(ScenarioKind::HeatPump);
        let out = apply_heat_pump(&p, &spec, &heat).unwrap();
        assert!((out.demand_mw[0][0] - 120.0).abs() < 1e-12);
        assert_eq!(out.demand_mw[0][1], 100.0);

        let none = ScenarioSpec {
            hp_penetration: 0.0,
            ..spec.clone()
        };
        assert_eq!(apply_heat_pump(&p, &none, &heat).unwrap(), p);

        let short = profile(vec![vec![1.0]]);
        assert!(matches!(apply_heat_pump(&p, &spec, &short), Err(Error::MisalignedHours(_))));
    }

    #[test]
    fn efficiency_arithmetic() {
        let p = profile(vec![vec![10.0, 20.0]]);
        let mut spec = ScenarioSpec::new(ScenarioKind::Efficiency);
        spec.efficiency_factors = [("a".to_string(), 0.9), ("b".to_string(), 0.7)].into_iter().collect();
        let out = apply_efficiency(&p, &spec, &shares(&[("a", 0.5), ("b", 0.5)])).unwrap();
        assert!((out.demand_mw[0][0] - 8.0).abs() < 1e-12);
        assert!((out.demand_mw[0][1] - 16.0).abs() < 1e-12);

        let single = apply_efficiency(&p, &spec, &shares(&[("b", 1.0)])).unwrap();
        assert!((single.demand_mw[0][1] - 14.0).abs() < 1e-12);

        spec.efficiency_factors.clear();
        assert_eq!(apply_efficiency(&p, &spec, &shares(&[("a", 1.0)])).unwrap(), p);

        assert!(matches!(
            apply_efficiency(&p, &spec, &shares(&[("a", 0.5), ("b", 0.4)])),
            Err(Error::SharesNotNormalized { .. })
        ));
    }

    #[test]
    fn flat_profile() {
        let p = profile(vec![vec![10.0, 30.0], vec![5.0, 5.0]]);
        let out = apply_flat(&p);
        assert_eq!(out.demand_mw, vec![vec![20.0, 20.0], vec![5.0, 5.0]]);
        assert_eq!(apply_flat(&out), out);
        assert_eq!(extract_extreme_days(&out).0, vec![0, 1]);
    }

    #[test]
    fn extreme_days_tie_to_first() {
        let hours: Vec<u32> = (0..72).collect();
        let mut series = vec![1.0; 72];
        series[30] = 5.0; // day 1
        series[60] = 0.5; // day 2
        let p = DemandProfile::new("x", hours, vec!["r".into()], vec![series]).unwrap();
        let (peak, min) = extract_extreme_days(&p);
        assert_eq!(peak, (24..48).collect::<Vec<_>>());
        assert_eq!(min, (48..72).collect::<Vec<_>>());
    }

    #[test]
    fn scenario_names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.as_str().parse::<ScenarioKind>().unwrap(), k);
        }
        assert!("solar_max".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut s = ScenarioSpec::new(ScenarioKind::HeatPump);
        s.hp_cop = 0.0;
        assert!(s.validate().is_err());
        let mut s = ScenarioSpec::new(ScenarioKind::Efficiency);
        s.efficiency_factors.insert("lighting".into(), 1.2);
        assert!(s.validate().is_err());
    }
}
