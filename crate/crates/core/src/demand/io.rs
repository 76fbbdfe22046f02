use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{DemandProfile, EndUseShares};
use crate::error::{Error, Result};
use crate::textio::{csv_rows, parse_field, read_text, write_text};

pub const PROFILE_COLUMN: &str = "demand_mw";
pub const HEAT_COLUMN: &str = "heat_mw";

/// Reads `region,hour,<value_column>` rows. Every region must list the same
/// hours; regions keep their first-appearance order.
pub fn load_profile(path: impl AsRef<Path>, value_column: &str, scenario: &str) -> Result<DemandProfile> {
    let path = path.as_ref();
    parse_profile(&read_text(path)?, value_column, scenario, &path.display().to_string())
}

pub fn parse_profile(text: &str, value_column: &str, scenario: &str, source: &str) -> Result<DemandProfile> {
    let rows = csv_rows(text, &["region", "hour", value_column], source)?;
    let mut order: Vec<String> = Vec::new();
    let mut series: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
    for (line, f) in rows {
        let err = |m: String| Error::parse(source, line, m);
        let hour: u32 = parse_field(f[1], "hour").map_err(err)?;
        let value: f64 = parse_field(f[2], value_column).map_err(err)?;
        if !series.contains_key(f[0]) {
            order.push(f[0].to_string());
        }
        if series.entry(f[0].to_string()).or_default().insert(hour, value).is_some() {
            return Err(err(format!("duplicate hour {hour} for region '{}'", f[0])));
        }
    }
    let Some(first) = order.first() else {
        return Err(Error::Validation(format!("{source}: profile has no rows")));
    };
    let hours: Vec<u32> = series[first].keys().copied().collect();
    let mut demand = Vec::with_capacity(order.len());
    for r in &order {
        let s = &series[r];
        if !s.keys().eq(hours.iter()) {
            return Err(Error::MisalignedHours(format!("{source}: region '{r}' covers different hours than '{first}'")));
        }
        demand.push(s.values().copied().collect());
    }
    DemandProfile::new(scenario, hours, order, demand)
}

pub fn format_profile(profile: &DemandProfile, value_column: &str) -> String {
    let mut out = String::with_capacity(24 * profile.hours.len() * profile.regions.len() + 32);
    let _ = writeln!(out, "region,hour,{value_column}");
    for (r, series) in profile.regions.iter().zip(&profile.demand_mw) {
        for (h, v) in profile.hours.iter().zip(series) {
            let _ = writeln!(out, "{r},{h},{v}");
        }
    }
    out
}

pub fn save_profile(profile: &DemandProfile, value_column: &str, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_profile(profile, value_column))
}

/// Reads `region,end_use,share` rows.
pub fn load_shares(path: impl AsRef<Path>) -> Result<EndUseShares> {
    let path = path.as_ref();
    parse_shares(&read_text(path)?, &path.display().to_string())
}

pub fn parse_shares(text: &str, source: &str) -> Result<EndUseShares> {
    let mut out = EndUseShares::new();
    for (line, f) in csv_rows(text, &["region", "end_use", "share"], source)? {
        let share: f64 = parse_field(f[2], "share").map_err(|m| Error::parse(source, line, m))?;
        if out
            .entry(f[0].to_string())
            .or_default()
            .insert(f[1].to_string(), share)
            .is_some()
        {
            return Err(Error::parse(source, line, format!("duplicate end use '{}'", f[1])));
        }
    }
    Ok(out)
}

pub fn format_shares(shares: &EndUseShares) -> String {
    let mut out = String::from("region,end_use,share\n");
    for (r, uses) in shares {
        for (u, s) in uses {
            let _ = writeln!(out, "{r},{u},{s}");
        }
    }
    out
}

pub fn save_shares(shares: &EndUseShares, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_shares(shares))
}
