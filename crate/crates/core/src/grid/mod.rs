//! Electricity network graph: buses, branches, generators, and the district
//! table that ties demand buses to economic regions.

mod io;
mod regions;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use io::{format_grid, load_grid, parse_grid, save_grid};
pub use regions::{format_regions, load_regions, parse_regions, save_regions, Region, RegionTable};

/// Voltage groupings carried by buses, in kV.
pub const VOLTAGE_LEVELS_KV: [f64; 6] = [400.0, 275.0, 132.0, 33.0, 11.0, 0.23];

pub const DEFAULT_BASE_MVA: f64 = 100.0;

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} '{}'", stringify!($name), other)),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

string_enum!(BusKind {
    Generation => "generation",
    Substation => "substation",
    Switching => "switching",
    Demand => "demand",
});

string_enum!(BranchKind {
    Line => "line",
    Cable => "cable",
    Transformer => "transformer",
});

string_enum!(Technology {
    Solar => "solar",
    Wind => "wind",
    Hydro => "hydro",
    Thermal => "thermal",
    Nuclear => "nuclear",
    OtherRenewable => "other_renewable",
    Interconnector => "interconnector",
});

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: String,
    pub voltage_kv: f64,
    pub kind: BusKind,
    pub region: Option<String>,
    /// Planar position in km.
    pub coordinates: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub kind: BranchKind,
    pub susceptance_pu: f64,
    pub rating_mw: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub rated_mw: f64,
    pub capacity_factor: f64,
    pub technology: Technology,
}

impl Generator {
    pub fn is_international(&self) -> bool {
        self.technology == Technology::Interconnector
    }

    pub fn is_solar(&self) -> bool {
        self.technology == Technology::Solar
    }

    /// Realistic output: nameplate times capacity factor.
    pub fn derated_mw(&self) -> f64 {
        self.rated_mw * self.capacity_factor
    }
}

/// A validated network. Bus, branch and generator order is preserved from
/// construction; indices into those vectors are used throughout the crate.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    base_mva: f64,
    bus_index: HashMap<String, usize>,
    branch_ends: Vec<(usize, usize)>,
    generator_bus: Vec<usize>,
}

impl Grid {
    /// Checks every structural invariant except connectivity, which
    /// [`load_grid`] and the simulation entry points enforce separately.
    pub fn new(buses: Vec<Bus>, branches: Vec<Branch>, generators: Vec<Generator>, base_mva: f64) -> Result<Self> {
        let invalid = |msg: String| Err(Error::Validation(msg));
        if !(base_mva.is_finite() && base_mva > 0.0) {
            return invalid(format!("base_mva must be positive, got {base_mva}"));
        }

        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if bus_index.insert(bus.id.clone(), i).is_some() {
                return invalid(format!("duplicate bus id '{}'", bus.id));
            }
            if !VOLTAGE_LEVELS_KV.contains(&bus.voltage_kv) {
                return invalid(format!("bus '{}' has unsupported voltage {} kV", bus.id, bus.voltage_kv));
            }
            if bus.kind == BusKind::Demand && bus.region.as_deref().is_none_or(str::is_empty) {
                return invalid(format!("demand bus '{}' has no region", bus.id));
            }
        }

        let mut branch_ids = BTreeSet::new();
        let mut branch_ends = Vec::with_capacity(branches.len());
        for br in &branches {
            if !branch_ids.insert(br.id.as_str()) {
                return invalid(format!("duplicate branch id '{}'", br.id));
            }
            let lookup = |id: &str| {
                bus_index.get(id).copied().ok_or_else(|| {
                    Error::Validation(format!("branch '{}' references missing bus '{}'", br.id, id))
                })
            };
            let (f, t) = (lookup(&br.from_bus)?, lookup(&br.to_bus)?);
            if f == t {
                return invalid(format!("branch '{}' joins bus '{}' to itself", br.id, br.from_bus));
            }
            if !(br.susceptance_pu.is_finite() && br.susceptance_pu > 0.0) {
                return invalid(format!("branch '{}' susceptance must be positive", br.id));
            }
            if !(br.rating_mw.is_finite() && br.rating_mw > 0.0) {
                return invalid(format!("branch '{}' rating must be positive", br.id));
            }
            let same_voltage = buses[f].voltage_kv == buses[t].voltage_kv;
            match (br.kind, same_voltage) {
                (BranchKind::Transformer, true) => {
                    return invalid(format!(
                        "transformer '{}' joins two buses at {} kV",
                        br.id, buses[f].voltage_kv
                    ))
                }
                (BranchKind::Line | BranchKind::Cable, false) => {
                    return invalid(format!(
                        "{} '{}' joins {} kV to {} kV",
                        br.kind, br.id, buses[f].voltage_kv, buses[t].voltage_kv
                    ))
                }
                _ => {}
            }
            branch_ends.push((f, t));
        }

        let mut gen_ids = BTreeSet::new();
        let mut generator_bus = Vec::with_capacity(generators.len());
        for g in &generators {
            if !gen_ids.insert(g.id.as_str()) {
                return invalid(format!("duplicate generator id '{}'", g.id));
            }
            let Some(&b) = bus_index.get(&g.bus) else {
                return invalid(format!("generator '{}' references missing bus '{}'", g.id, g.bus));
            };
            if !(g.rated_mw.is_finite() && g.rated_mw > 0.0) {
                return invalid(format!("generator '{}' rated_mw must be positive", g.id));
            }
            if !(g.capacity_factor > 0.0 && g.capacity_factor <= 1.0) {
                return invalid(format!("generator '{}' capacity_factor must lie in (0, 1]", g.id));
            }
            generator_bus.push(b);
        }

        Ok(Grid {
            buses,
            branches,
            generators,
            base_mva,
            bus_index,
            branch_ends,
            generator_bus,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    /// `(from, to)` bus indices of branch `k`.
    pub fn branch_ends(&self, k: usize) -> (usize, usize) {
        self.branch_ends[k]
    }

    pub fn generator_bus(&self, g: usize) -> usize {
        self.generator_bus[g]
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    /// Indices of demand buses, in bus order.
    pub fn demand_buses(&self) -> Vec<usize> {
        (0..self.buses.len())
            .filter(|&i| self.buses[i].kind == BusKind::Demand)
            .collect()
    }

    /// Copy with branch ratings replaced, in branch order.
    pub fn with_ratings(&self, ratings: &[f64]) -> Result<Grid> {
        assert_eq!(ratings.len(), self.branches.len(), "one rating per branch");
        let branches = self
            .branches
            .iter()
            .zip(ratings)
            .map(|(b, &r)| Branch {
                rating_mw: r,
                ..b.clone()
            })
            .collect();
        Grid::new(self.buses.clone(), branches, self.generators.clone(), self.base_mva)
    }

    /// Copy with the named branches removed.
    pub fn without_branches(&self, ids: &[&str]) -> Result<Grid> {
        let branches = self
            .branches
            .iter()
            .filter(|b| !ids.contains(&b.id.as_str()))
            .cloned()
            .collect();
        Grid::new(self.buses.clone(), branches, self.generators.clone(), self.base_mva)
    }

    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for (k, &(f, t)) in self.branch_ends.iter().enumerate() {
            adj[f].push((t, k));
            adj[t].push((f, k));
        }
        adj
    }
}

/// Sum of derated capacities passing the filters.
///
/// The all-generator total is formed as domestic plus international
/// subtotals so that the partition adds up bit for bit.
pub fn total_capacity(grid: &Grid, include_international: bool, exclude_solar: bool) -> f64 {
    let domestic = filtered_capacity(grid, exclude_solar, |g| !g.is_international());
    if include_international {
        domestic + international_capacity(grid, exclude_solar)
    } else {
        domestic
    }
}

/// Derated capacity of interconnectors only.
pub fn international_capacity(grid: &Grid, exclude_solar: bool) -> f64 {
    filtered_capacity(grid, exclude_solar, Generator::is_international)
}

fn filtered_capacity(grid: &Grid, exclude_solar: bool, keep: impl Fn(&Generator) -> bool) -> f64 {
    grid.generators
        .iter()
        .filter(|g| keep(g) && !(exclude_solar && g.is_solar()))
        .map(Generator::derated_mw)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Connectivity {
    pub count: usize,
    /// Bus ids per component, components ordered by their first bus.
    pub components: Vec<Vec<String>>,
}

impl Connectivity {
    pub fn is_connected(&self) -> bool {
        self.count == 1
    }
}

/// Breadth-first component labelling.
pub fn validate_connectivity(grid: &Grid) -> Connectivity {
    let n = grid.bus_count();
    let adj = grid.adjacency();
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let c = components.len();
        let mut members = vec![start];
        label[start] = c;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = c;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members.into_iter().map(|i| grid.buses[i].id.clone()).collect());
    }
    Connectivity {
        count: components.len(),
        components,
    }
}

/// How path distance between buses is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DistanceMetric {
    /// Number of branches on the shortest path.
    #[default]
    Hops,
    /// Sum of branch reactances (`1 / susceptance_pu`) on the shortest path.
    Impedance,
}

/// All-pairs shortest-path distances; `f64::INFINITY` where unreachable.
pub fn distance_matrix(grid: &Grid, metric: DistanceMetric) -> Vec<Vec<f64>> {
    let n = grid.bus_count();
    let adj = grid.adjacency();
    (0..n)
        .map(|src| match metric {
            DistanceMetric::Hops => {
                let mut dist = vec![f64::INFINITY; n];
                dist[src] = 0.0;
                let mut queue = VecDeque::from([src]);
                while let Some(u) = queue.pop_front() {
                    for &(v, _) in &adj[u] {
                        if dist[v].is_infinite() {
                            dist[v] = dist[u] + 1.0;
                            queue.push_back(v);
                        }
                    }
                }
                dist
            }
            DistanceMetric::Impedance => {
                // n is small; an O(n²) Dijkstra keeps tie handling obvious.
                let mut dist = vec![f64::INFINITY; n];
                let mut done = vec![false; n];
                dist[src] = 0.0;
                for _ in 0..n {
                    let Some(u) = (0..n)
                        .filter(|&i| !done[i] && dist[i].is_finite())
                        .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
                    else {
                        break;
                    };
                    done[u] = true;
                    for &(v, k) in &adj[u] {
                        let w = 1.0 / grid.branches[k].susceptance_pu;
                        if dist[u] + w < dist[v] {
                            dist[v] = dist[u] + w;
                        }
                    }
                }
                dist
            }
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    fn two_bus(tech: Technology) -> Grid {
        Grid::new(
            vec![
                bus("a", 400.0, BusKind::Generation, None),
                bus("b", 400.0, BusKind::Demand, Some("r1")),
            ],
            vec![line("l1", "a", "b", 10.0, 100.0)],
            vec![gen("g1", "a", 10.0, 0.8, tech)],
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn single_generator_capacity() {
        let g = two_bus(Technology::Thermal);
        assert_eq!(total_capacity(&g, true, false), 8.0);
        let s = two_bus(Technology::Solar);
        assert_eq!(total_capacity(&s, true, true), 0.0);
        assert_eq!(total_capacity(&s, true, false), 8.0);
    }

    #[test]
    fn rejects_structural_violations() {
        let buses = vec![
            bus("a", 400.0, BusKind::Substation, None),
            bus("b", 132.0, BusKind::Substation, None),
        ];
        let err = Grid::new(buses.clone(), vec![line("l", "a", "b", 1.0, 1.0)], vec![], 100.0).unwrap_err();
        assert!(err.to_string().contains("joins 400 kV to 132 kV"), "{err}");

        let mut tx = line("t", "a", "a", 1.0, 1.0);
        tx.kind = BranchKind::Transformer;
        assert!(Grid::new(buses.clone(), vec![tx], vec![], 100.0).is_err());

        let missing = vec![line("l", "a", "zz", 1.0, 1.0)];
        let err = Grid::new(buses.clone(), missing, vec![], 100.0).unwrap_err();
        assert!(err.to_string().contains("missing bus 'zz'"));

        let demand_no_region = vec![bus("d", 33.0, BusKind::Demand, None)];
        assert!(Grid::new(demand_no_region, vec![], vec![], 100.0).is_err());

        let bad_cf = vec![gen("g", "a", 10.0, 1.5, Technology::Wind)];
        assert!(Grid::new(buses.clone(), vec![], bad_cf, 100.0).is_err());

        let bad_kv = vec![bus("x", 66.0, BusKind::Substation, None)];
        assert!(Grid::new(bad_kv, vec![], vec![], 100.0).is_err());
    }

    #[test]
    fn component_counts() {
        let two = two_bus(Technology::Wind);
        assert_eq!(validate_connectivity(&two).count, 1);

        let three = Grid::new(
            vec![
                bus("a", 400.0, BusKind::Substation, None),
                bus("b", 400.0, BusKind::Substation, None),
                bus("c", 400.0, BusKind::Substation, None),
            ],
            vec![line("l", "a", "b", 1.0, 1.0)],
            vec![],
            100.0,
        )
        .unwrap();
        let c = validate_connectivity(&three);
        assert_eq!(c.count, 2);
        assert_eq!(c.components, vec![vec!["a".to_string(), "b".into()], vec!["c".into()]]);
    }

    #[test]
    fn hop_and_impedance_distances() {
        let g = Grid::new(
            vec![
                bus("a", 400.0, BusKind::Substation, None),
                bus("b", 400.0, BusKind::Substation, None),
                bus("c", 400.0, BusKind::Substation, None),
            ],
            vec![line("ab", "a", "b", 1.0, 1.0), line("bc", "b", "c", 1.0, 1.0), line("ac", "a", "c", 0.25, 1.0)],
            vec![],
            100.0,
        )
        .unwrap();
        let hops = distance_matrix(&g, DistanceMetric::Hops);
        assert_eq!(hops[0], vec![0.0, 1.0, 1.0]);
        let imp = distance_matrix(&g, DistanceMetric::Impedance);
        assert_eq!(imp[0], vec![0.0, 1.0, 2.0]);
    }
}
