use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textio::{data_lines, parse_field, read_text, write_text};

/// A district and the economic region it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub id: String,
    /// Economic region id.
    pub parent: String,
    pub population: f64,
    /// Currency per year.
    pub annual_value_added: f64,
    /// GWh per year.
    pub annual_electricity_gwh: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionTable {
    regions: Vec<Region>,
    index: BTreeMap<String, usize>,
}

impl RegionTable {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, r) in regions.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate region id '{}'", r.id)));
            }
            if r.parent.is_empty() {
                return Err(Error::Validation(format!("region '{}' has no economic region", r.id)));
            }
            for (name, v) in [
                ("population", r.population),
                ("annual_va", r.annual_value_added),
                ("annual_gwh", r.annual_electricity_gwh),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Validation(format!("region '{}' {name} must be nonnegative", r.id)));
                }
            }
        }
        Ok(RegionTable { regions, index })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn get(&self, id: &str) -> Option<&Region> {
        self.index.get(id).map(|&i| &self.regions[i])
    }

    pub fn parent_of(&self, district: &str) -> Option<&str> {
        self.get(district).map(|r| r.parent.as_str())
    }

    /// Distinct economic region ids, sorted.
    pub fn economic_regions(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.regions.iter().map(|r| r.parent.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn districts_of<'a>(&'a self, economic: &'a str) -> impl Iterator<Item = &'a Region> + 'a {
        self.regions.iter().filter(move |r| r.parent == economic)
    }

    /// Population of a district, or the summed population of an economic region.
    pub fn population_of(&self, id: &str) -> Option<f64> {
        if let Some(r) = self.get(id) {
            return Some(r.population);
        }
        let mut found = false;
        let total = self
            .districts_of(id)
            .inspect(|_| found = true)
            .map(|r| r.population)
            .sum();
        found.then_some(total)
    }
}

/// `REGION,id,parent,population,annual_va,annual_gwh` rows.
pub fn load_regions(path: impl AsRef<Path>) -> Result<RegionTable> {
    let path = path.as_ref();
    parse_regions(&read_text(path)?, &path.display().to_string())
}

pub fn parse_regions(text: &str, source: &str) -> Result<RegionTable> {
    let mut regions = Vec::new();
    for (line_no, f) in data_lines(text) {
        let err = |msg: String| Error::parse(source, line_no, msg);
        if f[0] != "REGION" {
            return Err(err(format!("unknown row tag '{}'", f[0])));
        }
        if f.len() != 6 {
            return Err(err(format!("REGION row needs 6 fields, found {}", f.len())));
        }
        regions.push(Region {
            id: f[1].to_string(),
            parent: f[2].to_string(),
            population: parse_field(f[3], "population").map_err(err)?,
            annual_value_added: parse_field(f[4], "annual_va").map_err(err)?,
            annual_electricity_gwh: parse_field(f[5], "annual_gwh").map_err(err)?,
        });
    }
    RegionTable::new(regions)
}

pub fn format_regions(table: &RegionTable) -> String {
    let mut out = String::new();
    for r in table.regions() {
        let _ = writeln!(
            out,
            "REGION,{},{},{},{},{}",
            r.id, r.parent, r.population, r.annual_value_added, r.annual_electricity_gwh
        );
    }
    out
}

pub fn save_regions(table: &RegionTable, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_regions(table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_aggregate() {
        let t = parse_regions(
            "REGION,d1,E1,10,5,1\nREGION,d2,E1,30,5,1\nREGION,d3,E2,60,5,1\n",
            "mem",
        )
        .unwrap();
        assert_eq!(t.economic_regions(), vec!["E1", "E2"]);
        assert_eq!(t.population_of("E1"), Some(40.0));
        assert_eq!(t.population_of("d3"), Some(60.0));
        assert_eq!(t.population_of("nope"), None);
        assert_eq!(parse_regions(&format_regions(&t), "mem").unwrap(), t);
    }

    #[test]
    fn rejects_negative_population() {
        assert!(parse_regions("REGION,d1,E1,-1,5,1\n", "mem").is_err());
    }
}
