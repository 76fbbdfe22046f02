//! Least-distance redispatch on the DC network and local load shedding.
//!
//! The redispatch LP is written over generator outputs only: bus angles are
//! a linear function of the injections, so branch flows are expressed
//! through the PTDF matrix of [`DcNetwork`]. Branch limits are added lazily,
//! only for branches the current optimum overloads, and the LP is re-solved
//! until no limit is violated. The optimum of the reduced problem satisfies
//! every limit, so it is optimal for the full problem too.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::{distance_matrix, DistanceMetric, Grid};
use crate::numerics::{lp_solve_with, LinearProgram, LpOptions, LpStatus};
use crate::powerflow::{check_limits, default_slack_bus, DcNetwork, FlowSolution, LIMIT_TOLERANCE};

#[derive(Clone, Debug)]
pub struct DispatchOptions {
    /// Cost multiplier for interconnectors.
    pub interconnector_penalty: f64,
    /// Fraction of a bus's original demand dropped per shedding round.
    pub shed_step: f64,
    pub distance_metric: DistanceMetric,
    /// Slack bus id; `None` picks [`default_slack_bus`].
    pub slack_bus: Option<String>,
    pub lp: LpOptions,
}

impl Default for DispatchOptions {
    fn default() -> Self {
        DispatchOptions {
            interconnector_penalty: 10.0,
            shed_step: 0.1,
            distance_metric: DistanceMetric::Hops,
            slack_bus: None,
            lp: LpOptions::default(),
        }
    }
}

/// One hour's dispatch question.
#[derive(Clone, Debug, PartialEq)]
pub struct DispatchProblem {
    /// MW per bus (nonzero only on demand buses).
    pub demand_mw: Vec<f64>,
    /// Indices of generators that may run; removed and solar units are absent.
    pub available: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DispatchStatus {
    Feasible,
    FeasibleWithShedding,
}

impl DispatchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DispatchStatus::Feasible => "feasible",
            DispatchStatus::FeasibleWithShedding => "feasible_with_shedding",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispatchSolution {
    /// MW per generator in grid order; unavailable units are 0.
    pub generator_output_mw: Vec<f64>,
    pub flow_solution: FlowSolution,
    /// MW shed per bus.
    pub shed_mw: Vec<f64>,
    pub status: DispatchStatus,
}

impl DispatchSolution {
    pub fn total_output_mw(&self) -> f64 {
        self.generator_output_mw.iter().sum()
    }

    pub fn total_shed_mw(&self) -> f64 {
        self.shed_mw.iter().sum()
    }
}

/// Demand-weighted mean path distance from each generator's bus to the
/// demand buses, before the unit floor and interconnector penalty.
pub fn mean_demand_distance(distances: &[Vec<f64>], grid: &Grid, demand_mw: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = demand_mw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoDemand);
    }
    Ok((0..grid.generators().len())
        .map(|g| {
            let row = &distances[grid.generator_bus(g)];
            demand_mw
                .iter()
                .zip(row)
                .filter(|(d, _)| **d > 0.0)
                .map(|(d, dist)| d * dist)
                .sum::<f64>()
                / total
        })
        .collect())
}

/// Per-generator cost coefficient: `(1 + mean distance)`, times the
/// interconnector penalty for international units.
pub fn generator_distance_costs(grid: &Grid, demand_mw: &[f64], options: &DispatchOptions) -> Result<Vec<f64>> {
    let distances = distance_matrix(grid, options.distance_metric);
    costs_from_distances(&distances, grid, demand_mw, options.interconnector_penalty)
}

fn costs_from_distances(distances: &[Vec<f64>], grid: &Grid, demand_mw: &[f64], penalty: f64) -> Result<Vec<f64>> {
    let mean = mean_demand_distance(distances, grid, demand_mw)?;
    Ok(grid
        .generators()
        .iter()
        .zip(mean)
        .map(|(g, d)| {
            let base = 1.0 + d;
            if g.is_international() {
                base * penalty
            } else {
                base
            }
        })
        .collect())
}

/// A grid prepared for repeated dispatch: factorized network, PTDFs and
/// path distances are computed once and shared read-only.
#[derive(Clone, Debug)]
pub struct Dispatcher {
    grid: Grid,
    network: DcNetwork,
    distances: Vec<Vec<f64>>,
    options: DispatchOptions,
}

impl Dispatcher {
    pub fn new(grid: Grid, options: DispatchOptions) -> Result<Self> {
        let slack = match &options.slack_bus {
            Some(s) => s.clone(),
            None => default_slack_bus(&grid)
                .ok_or_else(|| Error::Validation("grid has no buses".into()))?
                .to_string(),
        };
        let network = DcNetwork::new(&grid, &slack)?;
        let distances = distance_matrix(&grid, options.distance_metric);
        Ok(Dispatcher {
            grid,
            network,
            distances,
            options,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn network(&self) -> &DcNetwork {
        &self.network
    }

    pub fn options(&self) -> &DispatchOptions {
        &self.options
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }

    fn validate(&self, problem: &DispatchProblem) -> Result<()> {
        if problem.demand_mw.len() != self.grid.bus_count() {
            return Err(Error::Validation(format!(
                "demand vector has length {}, grid has {} buses",
                problem.demand_mw.len(),
                self.grid.bus_count()
            )));
        }
        if problem.demand_mw.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Validation("demand must be finite and nonnegative".into()));
        }
        if problem.available.iter().any(|&g| g >= self.grid.generators().len()) {
            return Err(Error::Validation("available set names an unknown generator".into()));
        }
        Ok(())
    }

    /// Least-cost dispatch meeting all demand within branch limits, or
    /// `None` when no such dispatch exists.
    pub fn redispatch(&self, problem: &DispatchProblem) -> Result<Option<DispatchSolution>> {
        self.validate(problem)?;
        let costs = self.costs_for(&problem.demand_mw)?;
        let mut active = BTreeSet::new();
        let outputs = self.solve_served(&problem.available, &problem.demand_mw, &costs, &mut active, true)?;
        outputs
            .map(|g| self.assemble(g, &problem.demand_mw, &problem.demand_mw))
            .transpose()
    }

    /// Like [`redispatch`](Self::redispatch) but ignoring branch limits.
    pub fn redispatch_unconstrained(&self, problem: &DispatchProblem) -> Result<Option<DispatchSolution>> {
        self.validate(problem)?;
        let costs = self.costs_for(&problem.demand_mw)?;
        let mut active = BTreeSet::new();
        let outputs = self.solve_served(&problem.available, &problem.demand_mw, &costs, &mut active, false)?;
        let Some(g) = outputs else { return Ok(None) };
        let flow_solution = self.network.solve(&self.injections(&g, &problem.demand_mw))?;
        Ok(Some(DispatchSolution {
            generator_output_mw: g,
            flow_solution,
            shed_mw: vec![0.0; self.grid.bus_count()],
            status: DispatchStatus::Feasible,
        }))
    }

    /// Redispatch, shedding demand near the removed generators until the
    /// network can be balanced.
    ///
    /// Demand buses are ordered by path distance to the nearest removed
    /// generator (ties by bus id). Each round drops `shed_step` of the
    /// front bus's original demand; a bus is emptied before the next one is
    /// touched. While total demand still exceeds available capacity no LP
    /// is needed to know the round is infeasible.
    pub fn dispatch_with_shedding(&self, problem: &DispatchProblem, removed: &[usize]) -> Result<DispatchSolution> {
        self.validate(problem)?;
        if removed.iter().any(|g| problem.available.contains(g)) {
            return Err(Error::Validation("removed generators overlap the available set".into()));
        }
        let demand = &problem.demand_mw;
        // Cost weights follow the hour's original demand pattern.
        let costs = match self.costs_for(demand) {
            Ok(c) => c,
            Err(Error::NoDemand) => vec![1.0; self.grid.generators().len()],
            Err(e) => return Err(e),
        };
        let order = self.shedding_order(demand, removed);
        let capacity: f64 = problem
            .available
            .iter()
            .map(|&g| self.grid.generators()[g].derated_mw())
            .sum();

        let mut served = demand.clone();
        let mut steps = vec![0u32; demand.len()];
        let mut active = BTreeSet::new();
        loop {
            let total: f64 = served.iter().sum();
            let outputs = if total > capacity * (1.0 + 1e-12) + 1e-9 {
                None
            } else {
                self.solve_served(&problem.available, &served, &costs, &mut active, true)?
            };
            if let Some(g) = outputs {
                return self.assemble(g, demand, &served);
            }
            let Some(&b) = order.iter().find(|&&b| served[b] > 0.0) else {
                return Err(Error::Unstable);
            };
            steps[b] += 1;
            let cut = f64::from(steps[b]) * self.options.shed_step;
            served[b] = if cut >= 1.0 - 1e-12 { 0.0 } else { demand[b] * (1.0 - cut) };
        }
    }

    /// Demand buses with positive demand, nearest to a removed generator first.
    pub fn shedding_order(&self, demand_mw: &[f64], removed: &[usize]) -> Vec<usize> {
        let buses = self.grid.buses();
        let removed_buses: BTreeSet<usize> = removed.iter().map(|&g| self.grid.generator_bus(g)).collect();
        let mut order: Vec<(f64, usize)> = (0..buses.len())
            .filter(|&b| demand_mw[b] > 0.0)
            .map(|b| {
                let d = removed_buses
                    .iter()
                    .map(|&r| self.distances[r][b])
                    .fold(f64::INFINITY, f64::min);
                (d, b)
            })
            .collect();
        order.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| buses[x.1].id.cmp(&buses[y.1].id)));
        order.into_iter().map(|(_, b)| b).collect()
    }

    fn costs_for(&self, demand_mw: &[f64]) -> Result<Vec<f64>> {
        costs_from_distances(&self.distances, &self.grid, demand_mw, self.options.interconnector_penalty)
    }

    fn injections(&self, outputs: &[f64], served: &[f64]) -> Vec<f64> {
        let mut inj: Vec<f64> = served.iter().map(|d| -d).collect();
        for (g, &p) in outputs.iter().enumerate() {
            inj[self.grid.generator_bus(g)] += p;
        }
        inj
    }

    fn assemble(&self, outputs: Vec<f64>, demand: &[f64], served: &[f64]) -> Result<DispatchSolution> {
        let flow_solution = self.network.solve(&self.injections(&outputs, served))?;
        let shed_mw: Vec<f64> = demand.iter().zip(served).map(|(d, s)| d - s).collect();
        let status = if shed_mw.iter().any(|s| *s > 0.0) {
            DispatchStatus::FeasibleWithShedding
        } else {
            DispatchStatus::Feasible
        };
        Ok(DispatchSolution {
            generator_output_mw: outputs,
            flow_solution,
            shed_mw,
            status,
        })
    }

    /// Solves the dispatch LP for the given served demand. Returns MW per
    /// generator (grid order) or `None` if infeasible. `active` carries the
    /// branch limits already known to bind and is extended in place.
    fn solve_served(
        &self,
        available: &[usize],
        served: &[f64],
        costs: &[f64],
        active: &mut BTreeSet<usize>,
        enforce_limits: bool,
    ) -> Result<Option<Vec<f64>>> {
        let n_gen = self.grid.generators().len();
        let total: f64 = served.iter().sum();
        let base = self.grid.base_mva();
        if total <= 0.0 {
            return Ok(Some(vec![0.0; n_gen]));
        }
        let gens = self.grid.generators();
        let ptdf = self.network.ptdf();
        let branches = self.grid.branches();
        let served_pu: Vec<f64> = served.iter().map(|d| d / base).collect();

        loop {
            let mut lp = LinearProgram::new(available.iter().map(|&g| costs[g]).collect());
            for (j, &g) in available.iter().enumerate() {
                lp.set_bounds(j, 0.0, gens[g].derated_mw() / base);
            }
            lp.add_eq(&vec![1.0; available.len()], total / base);
            for &k in active.iter() {
                let row = ptdf.row(k);
                let coeffs: Vec<f64> = available.iter().map(|&g| row[self.grid.generator_bus(g)]).collect();
                let withdrawn: f64 = row.iter().zip(&served_pu).map(|(a, d)| a * d).sum();
                let limit = branches[k].rating_mw / base * (1.0 - LIMIT_TOLERANCE);
                let neg: Vec<f64> = coeffs.iter().map(|c| -c).collect();
                lp.add_le(&coeffs, limit + withdrawn);
                lp.add_le(&neg, limit - withdrawn);
            }
            let sol = lp_solve_with(&lp, &self.options.lp)?;
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return Ok(None),
                LpStatus::Unbounded => {
                    return Err(Error::Validation("dispatch LP reported unbounded".into()));
                }
            }
            let mut outputs = vec![0.0; n_gen];
            for (j, &g) in available.iter().enumerate() {
                outputs[g] = (sol.x[j] * base).clamp(0.0, gens[g].derated_mw());
            }
            if !enforce_limits {
                return Ok(Some(outputs));
            }
            let flows = self.network.solve(&self.injections(&outputs, served))?;
            let before = active.len();
            for v in check_limits(&self.grid, &flows) {
                let k = branches.iter().position(|b| b.id == v.branch_id).expect("branch exists");
                active.insert(k);
            }
            if active.len() == before {
                return Ok(Some(outputs));
            }
        }
    }
}

/// Convenience wrapper around [`Dispatcher::redispatch`].
pub fn redispatch(grid: &Grid, problem: &DispatchProblem, options: &DispatchOptions) -> Result<Option<DispatchSolution>> {
    Dispatcher::new(grid.clone(), options.clone())?.redispatch(problem)
}

/// Convenience wrapper around [`Dispatcher::dispatch_with_shedding`].
pub fn dispatch_with_shedding(
    grid: &Grid,
    problem: &DispatchProblem,
    removed: &[usize],
    options: &DispatchOptions,
) -> Result<DispatchSolution> {
    Dispatcher::new(grid.clone(), options.clone())?.dispatch_with_shedding(problem, removed)
}

/// Checks the solution invariants directly from the grid, independent of
/// how the solution was found. Returns a description of the first failure.
pub fn verify_solution(grid: &Grid, problem: &DispatchProblem, sol: &DispatchSolution) -> std::result::Result<(), String> {
    let served: f64 = problem
        .demand_mw
        .iter()
        .zip(&sol.shed_mw)
        .map(|(d, s)| d - s)
        .sum();
    if (sol.total_output_mw() - served).abs() > 1e-6 {
        return Err(format!("output {} != served demand {}", sol.total_output_mw(), served));
    }
    for (b, (&s, &d)) in sol.shed_mw.iter().zip(&problem.demand_mw).enumerate() {
        if s < 0.0 || s > d {
            return Err(format!("bus {b} shed {s} outside [0, {d}]"));
        }
    }
    for (g, &p) in sol.generator_output_mw.iter().enumerate() {
        let cap = grid.generators()[g].derated_mw();
        if p < 0.0 || p > cap * (1.0 + 1e-12) {
            return Err(format!("generator {g} output {p} outside [0, {cap}]"));
        }
        if p > 0.0 && !problem.available.contains(&g) {
            return Err(format!("unavailable generator {g} produces {p}"));
        }
    }
    let violations = check_limits(grid, &sol.flow_solution);
    if let Some(v) = violations.first() {
        return Err(format!("branch {} carries {} over rating {}", v.branch_id, v.flow_mw, v.rating_mw));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::test_support::*;
    use crate::grid::{BusKind, Technology};

    fn two_bus(rating: f64) -> Grid {
        Grid::new(
            vec![bus("0", 400.0, BusKind::Generation, None), bus("1", 400.0, BusKind::Demand, Some("r"))],
            vec![line("l", "0", "1", 10.0, rating)],
            vec![gen("g", "0", 100.0, 1.0, Technology::Thermal)],
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn two_bus_dispatch() {
        let g = two_bus(60.0);
        let p = DispatchProblem {
            demand_mw: vec![0.0, 50.0],
            available: vec![0],
        };
        let sol = redispatch(&g, &p, &DispatchOptions::default()).unwrap().unwrap();
        assert!((sol.generator_output_mw[0] - 50.0).abs() < 1e-9);
        assert!((sol.flow_solution.flows_mw[0] - 50.0).abs() < 1e-9);
        assert_eq!(sol.status, DispatchStatus::Feasible);
        verify_solution(&g, &p, &sol).unwrap();
    }

    #[test]
    fn binding_line_is_infeasible() {
        let g = two_bus(60.0);
        let p = DispatchProblem {
            demand_mw: vec![0.0, 80.0],
            available: vec![0],
        };
        assert!(redispatch(&g, &p, &DispatchOptions::default()).unwrap().is_none());
        // Shedding then drops 10 % steps until the line fits: 80 → 56 MW served.
        let sol = dispatch_with_shedding(&g, &p, &[], &DispatchOptions::default()).unwrap();
        assert_eq!(sol.status, DispatchStatus::FeasibleWithShedding);
        assert!((sol.total_shed_mw() - 24.0).abs() < 1e-9);
        verify_solution(&g, &p, &sol).unwrap();
    }

    #[test]
    fn co_located_costs() {
        let g = Grid::new(
            vec![bus("0", 400.0, BusKind::Demand, Some("r")), bus("1", 400.0, BusKind::Substation, None)],
            vec![line("l", "0", "1", 1.0, 1.0)],
            vec![
                gen("g", "0", 10.0, 1.0, Technology::Thermal),
                gen("ic", "0", 10.0, 1.0, Technology::Interconnector),
            ],
            100.0,
        )
        .unwrap();
        let demand = [5.0, 0.0];
        let dist = distance_matrix(&g, DistanceMetric::Hops);
        assert_eq!(mean_demand_distance(&dist, &g, &demand).unwrap(), vec![0.0, 0.0]);
        let costs = generator_distance_costs(&g, &demand, &DispatchOptions::default()).unwrap();
        assert_eq!(costs, vec![1.0, 10.0]);
        assert!(matches!(
            generator_distance_costs(&g, &[0.0, 0.0], &DispatchOptions::default()),
            Err(Error::NoDemand)
        ));
    }

    #[test]
    fn path_distances_on_a_chain() {
        // a - b - c - d, demand only at d; hop counts 3, 2, 1, 0.
        let ids = ["a", "b", "c", "d"];
        let buses = ids
            .iter()
            .map(|&i| {
                if i == "d" {
                    bus(i, 400.0, BusKind::Demand, Some("r"))
                } else {
                    bus(i, 400.0, BusKind::Substation, None)
                }
            })
            .collect();
        let g = Grid::new(
            buses,
            vec![line("ab", "a", "b", 1.0, 1.0), line("bc", "b", "c", 1.0, 1.0), line("cd", "c", "d", 1.0, 1.0)],
            ids.iter().map(|&i| gen(&format!("g{i}"), i, 1.0, 1.0, Technology::Wind)).collect(),
            100.0,
        )
        .unwrap();
        let dist = distance_matrix(&g, DistanceMetric::Hops);
        let mean = mean_demand_distance(&dist, &g, &[0.0, 0.0, 0.0, 7.0]).unwrap();
        assert_eq!(mean, vec![3.0, 2.0, 1.0, 0.0]);
    }

    fn copper_plate(gen_mw: &[f64], demand_mw: &[f64]) -> (Grid, DispatchProblem) {
        let mut buses = vec![bus("hub", 400.0, BusKind::Substation, None)];
        let mut branches = Vec::new();
        for i in 0..demand_mw.len() {
            let id = format!("D{}", i + 1);
            buses.push(bus(&id, 400.0, BusKind::Demand, Some("r")));
            branches.push(line(&format!("l{id}"), "hub", &id, 100.0, 1e6));
        }
        let mut gens = Vec::new();
        for (i, &mw) in gen_mw.iter().enumerate() {
            let id = format!("G{}", i + 1);
            buses.push(bus(&id, 400.0, BusKind::Generation, None));
            branches.push(line(&format!("l{id}"), "hub", &id, 100.0, 1e6));
            gens.push(gen(&format!("g{}", i + 1), &id, mw, 1.0, Technology::Thermal));
        }
        let grid = Grid::new(buses, branches, gens, 100.0).unwrap();
        let mut demand = vec![0.0; grid.bus_count()];
        for (i, &d) in demand_mw.iter().enumerate() {
            demand[i + 1] = d;
        }
        let n = grid.generators().len();
        (grid, DispatchProblem { demand_mw: demand, available: (0..n).collect() })
    }

    #[test]
    fn ample_capacity_sheds_nothing() {
        let (g, p) = copper_plate(&[60.0, 60.0], &[30.0, 30.0, 40.0]);
        let sol = dispatch_with_shedding(&g, &p, &[], &DispatchOptions::default()).unwrap();
        assert_eq!(sol.total_shed_mw(), 0.0);
        assert_eq!(sol.status, DispatchStatus::Feasible);
    }

    #[test]
    fn capacity_shortfall_is_shed() {
        let (g, mut p) = copper_plate(&[40.0, 60.0], &[30.0, 30.0, 40.0]);
        p.available = vec![0];
        let sol = dispatch_with_shedding(&g, &p, &[1], &DispatchOptions::default()).unwrap();
        let shed = sol.total_shed_mw();
        assert!((60.0 - 1e-9..=60.0 + 0.1 * 40.0).contains(&shed), "shed {shed}");
        verify_solution(&g, &p, &sol).unwrap();
    }

    #[test]
    fn sheds_nearest_to_removed_generator_first() {
        // D1..D3 hang off a chain; the removed generator sits next to D3.
        let g = Grid::new(
            vec![
                bus("D1", 400.0, BusKind::Demand, Some("r")),
                bus("D2", 400.0, BusKind::Demand, Some("r")),
                bus("D3", 400.0, BusKind::Demand, Some("r")),
                bus("GA", 400.0, BusKind::Generation, None),
                bus("GB", 400.0, BusKind::Generation, None),
            ],
            vec![
                line("a1", "GA", "D1", 10.0, 1e4),
                line("12", "D1", "D2", 10.0, 1e4),
                line("23", "D2", "D3", 10.0, 1e4),
                line("3b", "D3", "GB", 10.0, 1e4),
            ],
            vec![gen("ga", "GA", 100.0, 1.0, Technology::Thermal), gen("gb", "GB", 100.0, 1.0, Technology::Thermal)],
            100.0,
        )
        .unwrap();
        let p = DispatchProblem {
            demand_mw: vec![40.0, 40.0, 40.0, 0.0, 0.0],
            available: vec![0],
        };
        let d = Dispatcher::new(g.clone(), DispatchOptions::default()).unwrap();
        assert_eq!(d.shedding_order(&p.demand_mw, &[1]), vec![2, 1, 0]);
        let sol = d.dispatch_with_shedding(&p, &[1]).unwrap();
        assert!((sol.shed_mw[2] - 20.0).abs() < 1e-9);
        assert_eq!(sol.shed_mw[0], 0.0);
        assert_eq!(sol.shed_mw[1], 0.0);
    }

    #[test]
    fn overlapping_removed_set_rejected() {
        let (g, p) = copper_plate(&[10.0], &[5.0]);
        assert!(dispatch_with_shedding(&g, &p, &[0], &DispatchOptions::default()).is_err());
    }

    #[test]
    fn no_generators_sheds_everything() {
        let (g, mut p) = copper_plate(&[10.0], &[5.0, 5.0]);
        p.available.clear();
        let sol = dispatch_with_shedding(&g, &p, &[0], &DispatchOptions::default()).unwrap();
        assert!((sol.total_shed_mw() - 10.0).abs() < 1e-12);
    }
}
