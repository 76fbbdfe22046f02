//! Multiregional impact assessment: a cost-minimising production LP over
//! supply-use tables, used to turn lost electricity into lost value added.
//!
//! Per region `r` and product `p` the LP requires
//!
//! ```text
//! Σ_i s[r][i][p]·x[r][i] + imports − exports + m[r][p] ≥ Σ_i a[r][p][i]·x[r][i] + f[r][p]
//! ```
//!
//! with outputs capped at `(1−δ)(1+α)·x0` and rationing `m` penalised. The
//! objective is total output plus a small trade cost plus the rationing
//! penalty. Monetary values are divided by a power of two before solving,
//! which is exact in floating point.

mod io;

use crate::error::{Error, Result};
use crate::failure::{ResultTable, ScenarioRecord};
use crate::grid::RegionTable;
use crate::numerics::{lp_solve_with, LinearProgram, LpOptions, LpStatus};

pub use io::{load_supply_use, save_supply_use};

pub const DEFAULT_OVERCAPACITY: f64 = 0.025;
pub const DEFAULT_TRADE_COST: f64 = 1e-3;
/// Rationing costs this many times the largest unit production cost.
pub const RATIONING_MULTIPLIER: f64 = 10.0;

const BALANCE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SupplyUseModel {
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    pub products: Vec<String>,
    /// `supply[r][i][p]`, currency per year.
    pub supply: Vec<Vec<Vec<f64>>>,
    /// `use_[r][p][i]`, currency per year.
    pub use_: Vec<Vec<Vec<f64>>>,
    /// `final_demand[r][p]`, currency per year.
    pub final_demand: Vec<Vec<f64>>,
    /// Fraction of output that is value added, `[r][i]`.
    pub value_added_coeff: Vec<Vec<f64>>,
    /// `trade_allowed[from][to][p]`.
    pub trade_allowed: Vec<Vec<Vec<bool>>>,
    pub overcapacity: f64,
    pub trade_cost: f64,
}

/// Input and market-share coefficients derived from the tables.
#[derive(Clone, Debug, PartialEq)]
pub struct TechnologyCoefficients {
    /// `a[r][p][i]`
    pub a: Vec<Vec<Vec<f64>>>,
    /// `s[r][i][p]`
    pub s: Vec<Vec<Vec<f64>>>,
}

/// Fraction of production capacity lost, `delta[r][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacityShock {
    pub delta: Vec<Vec<f64>>,
    pub duration_hours: f64,
}

impl CapacityShock {
    pub fn zero(model: &SupplyUseModel) -> Self {
        CapacityShock {
            delta: vec![vec![0.0; model.industries.len()]; model.regions.len()],
            duration_hours: 1.0,
        }
    }

    /// The same loss fraction for every industry of each region.
    pub fn uniform(model: &SupplyUseModel, by_region: &[f64]) -> Self {
        CapacityShock {
            delta: by_region.iter().map(|&d| vec![d; model.industries.len()]).collect(),
            duration_hours: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImpactResult {
    /// Change in annual value added, `[r][i]`; negative is a loss.
    pub delta_va: Vec<Vec<f64>>,
    /// `−Σ min(0, Δva)`.
    pub total_cost: f64,
    /// Unmet final demand `[r][p]`, currency per year.
    pub rationing: Vec<Vec<f64>>,
    pub output: Vec<Vec<f64>>,
}

impl ImpactResult {
    pub fn total_rationing(&self) -> f64 {
        self.rationing.iter().flatten().sum()
    }

    /// Regional value-added change summed over industries.
    pub fn regional_delta_va(&self) -> Vec<f64> {
        self.delta_va.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Annual-basis money converted to a cost per hour of disruption.
pub fn hourly(annual: f64) -> f64 {
    annual / 8760.0
}

impl SupplyUseModel {
    /// Checks shapes, signs and the per-(region, product) balance of supply
    /// against intermediate use plus final demand.
    pub fn validate(&self) -> Result<()> {
        let (nr, ni, np) = (self.regions.len(), self.industries.len(), self.products.len());
        let shape_ok = self.supply.len() == nr
            && self.supply.iter().all(|r| r.len() == ni && r.iter().all(|i| i.len() == np))
            && self.use_.len() == nr
            && self.use_.iter().all(|r| r.len() == np && r.iter().all(|p| p.len() == ni))
            && self.final_demand.len() == nr
            && self.final_demand.iter().all(|r| r.len() == np)
            && self.value_added_coeff.len() == nr
            && self.value_added_coeff.iter().all(|r| r.len() == ni)
            && self.trade_allowed.len() == nr
            && self.trade_allowed.iter().all(|f| f.len() == nr && f.iter().all(|t| t.len() == np));
        if !shape_ok {
            return Err(Error::Validation("supply-use arrays do not match the region/industry/product lists".into()));
        }
        let money = self
            .supply
            .iter()
            .flatten()
            .flatten()
            .chain(self.use_.iter().flatten().flatten())
            .chain(self.final_demand.iter().flatten());
        for v in money {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::Validation(format!("monetary entry {v} is negative or non-finite")));
            }
        }
        if self.value_added_coeff.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation("value-added coefficients must lie in [0, 1]".into()));
        }
        if !(self.overcapacity >= 0.0 && self.overcapacity.is_finite()) {
            return Err(Error::Validation("overcapacity must be nonnegative".into()));
        }
        if !(self.trade_cost >= 0.0 && self.trade_cost.is_finite()) {
            return Err(Error::Validation("trade cost must be nonnegative".into()));
        }

        let mut worst: Option<(usize, usize, f64)> = None;
        for r in 0..nr {
            for p in 0..np {
                let made: f64 = (0..ni).map(|i| self.supply[r][i][p]).sum();
                let used: f64 = self.use_[r][p].iter().sum::<f64>() + self.final_demand[r][p];
                let residual = made - used;
                let rel = residual.abs() / made.abs().max(used.abs()).max(1.0);
                if rel > BALANCE_TOLERANCE && worst.is_none_or(|w| rel > w.2) {
                    worst = Some((r, p, rel));
                }
            }
        }
        if let Some((r, p, _)) = worst {
            let made: f64 = (0..ni).map(|i| self.supply[r][i][p]).sum();
            let used: f64 = self.use_[r][p].iter().sum::<f64>() + self.final_demand[r][p];
            return Err(Error::UnbalancedTables {
                region: self.regions[r].clone(),
                product: self.products[p].clone(),
                residual: made - used,
            });
        }
        let coeffs = self.coefficients();
        if self.max_input_share(&coeffs) >= 1.0 {
            return Err(Error::Validation("an industry uses at least one unit of input per unit of output".into()));
        }
        Ok(())
    }

    /// Baseline output `x0[r][i] = Σ_p V[r][i][p]`.
    pub fn baseline_output(&self) -> Vec<Vec<f64>> {
        self.supply
            .iter()
            .map(|r| r.iter().map(|i| i.iter().sum()).collect())
            .collect()
    }

    pub fn coefficients(&self) -> TechnologyCoefficients {
        let x0 = self.baseline_output();
        let (nr, ni, np) = (self.regions.len(), self.industries.len(), self.products.len());
        let div = |v: f64, d: f64| if d > 0.0 { v / d } else { 0.0 };
        let a = (0..nr)
            .map(|r| {
                (0..np)
                    .map(|p| (0..ni).map(|i| div(self.use_[r][p][i], x0[r][i])).collect())
                    .collect()
            })
            .collect();
        let s = (0..nr)
            .map(|r| {
                (0..ni)
                    .map(|i| (0..np).map(|p| div(self.supply[r][i][p], x0[r][i])).collect())
                    .collect()
            })
            .collect();
        TechnologyCoefficients { a, s }
    }

    fn max_input_share(&self, c: &TechnologyCoefficients) -> f64 {
        let mut worst: f64 = 0.0;
        for a_r in &c.a {
            for i in 0..self.industries.len() {
                worst = worst.max(a_r.iter().map(|row| row[i]).sum());
            }
        }
        worst
    }

    /// Penalty per unit of rationed demand: ten times `1 / (1 − max_i Σ_p a)`,
    /// an upper bound on the gross output needed per unit of final product.
    pub fn rationing_penalty(&self) -> f64 {
        RATIONING_MULTIPLIER / (1.0 - self.max_input_share(&self.coefficients()))
    }

    /// Power of two close to the largest baseline output.
    pub fn money_scale(&self) -> f64 {
        let max = self.baseline_output().into_iter().flatten().fold(0.0, f64::max);
        if max > 0.0 {
            2f64.powi(max.log2().round() as i32)
        } else {
            1.0
        }
    }

    fn trade_arcs(&self) -> Vec<(usize, usize, usize)> {
        let n = self.regions.len();
        let mut arcs = Vec::new();
        for from in 0..n {
            for to in 0..n {
                if from == to {
                    continue;
                }
                for p in 0..self.products.len() {
                    if self.trade_allowed[from][to][p] {
                        arcs.push((from, to, p));
                    }
                }
            }
        }
        arcs
    }

    /// The impact LP in scaled money units. Variables are ordered outputs
    /// (`r·I + i`), then trade arcs, then rationing (`r·P + p`).
    pub fn impact_lp(&self, shock: &CapacityShock) -> Result<LinearProgram> {
        self.check_shock(shock)?;
        let (nr, ni, np) = (self.regions.len(), self.industries.len(), self.products.len());
        let c = self.coefficients();
        let x0 = self.baseline_output();
        let scale = self.money_scale();
        let arcs = self.trade_arcs();
        let n_x = nr * ni;
        let n_t = arcs.len();
        let n = n_x + n_t + nr * np;
        let penalty = self.rationing_penalty();

        let mut objective = vec![1.0; n_x];
        objective.extend(std::iter::repeat_n(self.trade_cost, n_t));
        objective.extend(std::iter::repeat_n(penalty, nr * np));
        let mut lp = LinearProgram::new(objective);
        for r in 0..nr {
            for i in 0..ni {
                let cap = (1.0 - shock.delta[r][i]) * (1.0 + self.overcapacity) * x0[r][i];
                lp.set_bounds(r * ni + i, 0.0, cap / scale);
            }
        }
        for r in 0..nr {
            for p in 0..np {
                let mut row = vec![0.0; n];
                for i in 0..ni {
                    row[r * ni + i] = c.s[r][i][p] - c.a[r][p][i];
                }
                for (k, &(from, to, q)) in arcs.iter().enumerate() {
                    if q != p {
                        continue;
                    }
                    if to == r {
                        row[n_x + k] += 1.0;
                    }
                    if from == r {
                        row[n_x + k] -= 1.0;
                    }
                }
                row[n_x + n_t + r * np + p] = 1.0;
                lp.add_ge(&row, self.final_demand[r][p] / scale);
            }
        }
        Ok(lp)
    }

    fn check_shock(&self, shock: &CapacityShock) -> Result<()> {
        let ok = shock.delta.len() == self.regions.len()
            && shock.delta.iter().all(|r| r.len() == self.industries.len());
        if !ok {
            return Err(Error::Validation("shock does not match the model's regions and industries".into()));
        }
        if shock.delta.iter().flatten().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(Error::Validation("shock fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Solves the impact LP and reports value-added changes against the
    /// baseline output.
    pub fn assess_impact(&self, shock: &CapacityShock) -> Result<ImpactResult> {
        let lp = self.impact_lp(shock)?;
        let sol = lp_solve_with(&lp, &LpOptions::default())?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Validation(format!("impact LP ended {:?}", sol.status)));
        }
        let (nr, ni, np) = (self.regions.len(), self.industries.len(), self.products.len());
        let scale = self.money_scale();
        let x0 = self.baseline_output();
        let n_t = lp.num_vars() - nr * ni - nr * np;
        let mut output = vec![vec![0.0; ni]; nr];
        let mut delta_va = vec![vec![0.0; ni]; nr];
        for r in 0..nr {
            for i in 0..ni {
                let k = r * ni + i;
                let (_, ub) = lp.bounds[k];
                // Outputs pinned at a bound are reported as the bound itself.
                // Outputs within round-off of a bound or of the baseline are
                // reported as that value.
                let x = if (sol.x[k] - ub).abs() <= 1e-12 * ub.max(1.0) {
                    (1.0 - shock.delta[r][i]) * (1.0 + self.overcapacity) * x0[r][i]
                } else if (sol.x[k] * scale - x0[r][i]).abs() <= 1e-10 * scale {
                    x0[r][i]
                } else {
                    sol.x[k].max(0.0) * scale
                };
                output[r][i] = x;
                delta_va[r][i] = self.value_added_coeff[r][i] * (x - x0[r][i]);
            }
        }
        let rationing = (0..nr)
            .map(|r| {
                (0..np)
                    .map(|p| sol.x[nr * ni + n_t + r * np + p].max(0.0) * scale)
                    .collect()
            })
            .collect();
        let total_cost = -delta_va.iter().flatten().map(|d| d.min(0.0)).sum::<f64>();
        Ok(ImpactResult {
            delta_va,
            total_cost,
            rationing,
            output,
        })
    }

    /// Solves with no shock and checks that the baseline output and zero
    /// rationing are reproduced.
    pub fn solve_baseline(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let res = self.assess_impact(&CapacityShock::zero(self))?;
        let x0 = self.baseline_output();
        let scale = self.money_scale();
        for (r, (got_r, want_r)) in res.output.iter().zip(&x0).enumerate() {
            for (i, (&got, &want)) in got_r.iter().zip(want_r).enumerate() {
                if (got - want).abs() > BALANCE_TOLERANCE * want.max(1e-3 * scale) {
                    return Err(Error::BaselineMismatch {
                        region: self.regions[r].clone(),
                        industry: self.industries[i].clone(),
                        got,
                        expected: want,
                    });
                }
            }
        }
        if res.total_rationing() > BALANCE_TOLERANCE * scale {
            return Err(Error::Validation(format!(
                "baseline solve rations {} of final demand",
                res.total_rationing()
            )));
        }
        Ok(res.output)
    }
}

/// Capacity loss per economic region for one simulated hour: unserved over
/// demand summed across the region's districts, capped at 1, applied to
/// every industry. Regions without demand get 0.
pub fn shock_from_unserved(
    model: &SupplyUseModel,
    record: &ScenarioRecord,
    table: &ResultTable,
    regions: &RegionTable,
    demand_mw: &[f64],
) -> Result<CapacityShock> {
    if demand_mw.len() != table.regions.len() || record.unserved_mw.len() != table.regions.len() {
        return Err(Error::Validation("demand and unserved vectors must align with the result regions".into()));
    }
    let mut unserved = vec![0.0; model.regions.len()];
    let mut demand = vec![0.0; model.regions.len()];
    for (k, district) in table.regions.iter().enumerate() {
        let parent = regions
            .parent_of(district)
            .ok_or_else(|| Error::Validation(format!("district '{district}' is not in the region table")))?;
        if let Some(r) = model.regions.iter().position(|m| m == parent) {
            unserved[r] += record.unserved_mw[k];
            demand[r] += demand_mw[k];
        }
    }
    let by_region: Vec<f64> = unserved
        .iter()
        .zip(&demand)
        .map(|(u, d)| if *d > 0.0 { (u / d).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    Ok(CapacityShock::uniform(model, &by_region))
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_region_hand_solution() {
        let m = toy::single();
        m.validate().unwrap();
        assert_eq!(m.rationing_penalty(), 12.5);
        let res = m.assess_impact(&CapacityShock::uniform(&m, &[0.1])).unwrap();
        assert_eq!(res.output[0][0], 90.0);
        assert_eq!(res.delta_va[0][0], -5.0);
        assert_eq!(res.total_cost, 5.0);
        assert!((res.rationing[0][0] - 8.0).abs() < 1e-9);
    }

    #[test]
    fn overcapacity_caps_at_need() {
        let mut m = toy::single();
        m.overcapacity = 0.5;
        let res = m.assess_impact(&CapacityShock::uniform(&m, &[0.1])).unwrap();
        assert!((res.output[0][0] - 100.0).abs() < 1e-9);
        assert!(res.total_cost.abs() < 1e-9);
    }

    #[test]
    fn baseline_reproduced() {
        let m = toy::single();
        let x = m.solve_baseline().unwrap();
        assert!((x[0][0] - 100.0).abs() < 1e-9);
        let zero = m.assess_impact(&CapacityShock::zero(&m)).unwrap();
        assert!(zero.total_cost.abs() < 1e-9);
    }

    #[test]
    fn unbalanced_and_negative_tables_rejected() {
        let mut m = toy::single();
        m.final_demand[0][0] = 70.0;
        assert!(matches!(m.validate(), Err(Error::UnbalancedTables { .. })));
        let mut m = toy::single();
        m.use_[0][0][0] = -1.0;
        assert!(matches!(m.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn shock_arithmetic() {
        let m = toy::single();
        let regions = RegionTable::new(vec![crate::grid::Region {
            id: "d".into(),
            parent: "R".into(),
            population: 1.0,
            annual_value_added: 1.0,
            annual_electricity_gwh: 1.0,
        }])
        .unwrap();
        let table = ResultTable {
            regions: vec!["d".into()],
            records: vec![],
        };
        let rec = ScenarioRecord {
            ordering: 0,
            fraction: 0.1,
            scenario: "current".into(),
            hour: 0,
            unserved_mw: vec![50.0],
            status: crate::failure::RecordStatus::FeasibleWithShedding,
        };
        let s = shock_from_unserved(&m, &rec, &table, &regions, &[200.0]).unwrap();
        assert_eq!(s.delta, vec![vec![0.25]]);
        let none = shock_from_unserved(&m, &rec, &table, &regions, &[0.0]).unwrap();
        assert_eq!(none.delta, vec![vec![0.0]]);
    }

    #[test]
    fn hourly_is_annual_over_8760() {
        assert_eq!(hourly(8760.0), 1.0);
    }
}
