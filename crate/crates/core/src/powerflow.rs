//! DC power flow: `B·θ = P` in per-unit with the slack angle fixed at zero.
//!
//! Injections go in and flows come out in MW; angles are radians. Parallel
//! branches simply add their susceptances in `B`, while flows and limits
//! stay per physical branch.

use crate::error::{Error, Result};
use crate::grid::{validate_connectivity, Grid};
use crate::numerics::{DenseMatrix, LuFactors};

/// Relative slack allowed above a rating before a branch counts as overloaded.
pub const LIMIT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSolution {
    /// Per bus, radians; the slack bus is 0.
    pub angles: Vec<f64>,
    /// Per branch, MW, positive in the from→to direction.
    pub flows_mw: Vec<f64>,
    /// What the slack bus actually injects once it has absorbed the imbalance.
    pub slack_injection_mw: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub branch_id: String,
    pub flow_mw: f64,
    pub rating_mw: f64,
    /// `|flow| / rating − 1`.
    pub overload: f64,
}

/// Bus of the largest total non-international derated capacity; ties go to
/// the smaller bus id. Falls back to the first bus when there are no
/// domestic generators.
pub fn default_slack_bus(grid: &Grid) -> Option<&str> {
    let mut per_bus = vec![0.0; grid.bus_count()];
    for (g, gen) in grid.generators().iter().enumerate() {
        if !gen.is_international() {
            per_bus[grid.generator_bus(g)] += gen.derated_mw();
        }
    }
    let buses = grid.buses();
    (0..buses.len())
        .filter(|&i| per_bus[i] > 0.0)
        .max_by(|&a, &b| per_bus[a].total_cmp(&per_bus[b]).then_with(|| buses[b].id.cmp(&buses[a].id)))
        .or(if buses.is_empty() { None } else { Some(0) })
        .map(|i| buses[i].id.as_str())
}

fn slack_index(grid: &Grid, slack_bus: &str) -> Result<usize> {
    grid.bus_index(slack_bus)
        .ok_or_else(|| Error::Validation(format!("slack bus '{slack_bus}' does not exist")))
}

fn ensure_connected(grid: &Grid) -> Result<()> {
    let conn = validate_connectivity(grid);
    if conn.is_connected() {
        Ok(())
    } else {
        Err(Error::DisconnectedGrid { components: conn.count })
    }
}

/// Reduced nodal susceptance matrix with the slack row and column removed.
/// Remaining buses keep their relative order.
pub fn build_susceptance_matrix(grid: &Grid, slack_bus: &str) -> Result<DenseMatrix> {
    ensure_connected(grid)?;
    let slack = slack_index(grid, slack_bus)?;
    Ok(reduced_matrix(grid, slack))
}

fn reduced_position(slack: usize, bus: usize) -> Option<usize> {
    match bus.cmp(&slack) {
        std::cmp::Ordering::Less => Some(bus),
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some(bus - 1),
    }
}

fn reduced_matrix(grid: &Grid, slack: usize) -> DenseMatrix {
    let n = grid.bus_count() - 1;
    let mut b = DenseMatrix::zeros(n, n);
    for (k, br) in grid.branches().iter().enumerate() {
        let (f, t) = grid.branch_ends(k);
        let s = br.susceptance_pu;
        let (rf, rt) = (reduced_position(slack, f), reduced_position(slack, t));
        if let Some(i) = rf {
            b[(i, i)] += s;
        }
        if let Some(j) = rt {
            b[(j, j)] += s;
        }
        if let (Some(i), Some(j)) = (rf, rt) {
            b[(i, j)] -= s;
            b[(j, i)] -= s;
        }
    }
    b
}

/// One-shot DC power flow. Use [`DcNetwork`] when solving many injection
/// patterns on the same grid.
pub fn dc_power_flow(grid: &Grid, injections_mw: &[f64], slack_bus: &str) -> Result<FlowSolution> {
    DcNetwork::new(grid, slack_bus)?.solve(injections_mw)
}

/// A factorized DC model of one grid, plus its power transfer distribution
/// factors (flow on each branch per MW injected at each bus and withdrawn at
/// the slack).
#[derive(Clone, Debug)]
pub struct DcNetwork {
    slack: usize,
    base_mva: f64,
    ends: Vec<(usize, usize)>,
    susceptance: Vec<f64>,
    lu: LuFactors,
    ptdf: DenseMatrix,
}

impl DcNetwork {
    pub fn new(grid: &Grid, slack_bus: &str) -> Result<Self> {
        ensure_connected(grid)?;
        let slack = slack_index(grid, slack_bus)?;
        let lu = LuFactors::factorize(&reduced_matrix(grid, slack))?;
        let n = grid.bus_count();
        let m = grid.branches().len();
        let ends: Vec<_> = (0..m).map(|k| grid.branch_ends(k)).collect();
        let susceptance: Vec<f64> = grid.branches().iter().map(|b| b.susceptance_pu).collect();

        let mut ptdf = DenseMatrix::zeros(m, n);
        let mut e = vec![0.0; n.saturating_sub(1)];
        for bus in 0..n {
            let Some(r) = reduced_position(slack, bus) else { continue };
            e[r] = 1.0;
            let theta_red = lu.solve(&e);
            e[r] = 0.0;
            let theta = |i: usize| reduced_position(slack, i).map_or(0.0, |j| theta_red[j]);
            for (k, &(f, t)) in ends.iter().enumerate() {
                ptdf[(k, bus)] = susceptance[k] * (theta(f) - theta(t));
            }
        }
        Ok(DcNetwork {
            slack,
            base_mva: grid.base_mva(),
            ends,
            susceptance,
            lu,
            ptdf,
        })
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn bus_count(&self) -> usize {
        self.lu.dim() + 1
    }

    /// Branches × buses; the slack column is zero.
    pub fn ptdf(&self) -> &DenseMatrix {
        &self.ptdf
    }

    pub fn solve(&self, injections_mw: &[f64]) -> Result<FlowSolution> {
        let n = self.bus_count();
        if injections_mw.len() != n {
            return Err(Error::Validation(format!(
                "injection vector has length {}, grid has {} buses",
                injections_mw.len(),
                n
            )));
        }
        if injections_mw.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("injections must be finite".into()));
        }
        let rhs: Vec<f64> = (0..n)
            .filter(|&i| i != self.slack)
            .map(|i| injections_mw[i] / self.base_mva)
            .collect();
        let theta_red = self.lu.solve(&rhs);
        let angles: Vec<f64> = (0..n)
            .map(|i| reduced_position(self.slack, i).map_or(0.0, |j| theta_red[j]))
            .collect();
        let flows_mw = self
            .ends
            .iter()
            .zip(&self.susceptance)
            .map(|(&(f, t), &b)| self.base_mva * b * (angles[f] - angles[t]))
            .collect();
        let others: f64 = (0..n).filter(|&i| i != self.slack).map(|i| injections_mw[i]).sum();
        Ok(FlowSolution {
            angles,
            flows_mw,
            slack_injection_mw: -others,
        })
    }
}

/// Every branch whose `|flow|` exceeds `rating · (1 + 1e-9)`.
pub fn check_limits(grid: &Grid, flows: &FlowSolution) -> Vec<Violation> {
    grid.branches()
        .iter()
        .zip(&flows.flows_mw)
        .filter(|(br, f)| f.abs() > br.rating_mw * (1.0 + LIMIT_TOLERANCE))
        .map(|(br, f)| Violation {
            branch_id: br.id.clone(),
            flow_mw: f.abs(),
            rating_mw: br.rating_mw,
            overload: f.abs() / br.rating_mw - 1.0,
        })
        .collect()
}

/// Net power leaving each bus through its branches, MW.
pub fn bus_outflows(grid: &Grid, flows: &FlowSolution) -> Vec<f64> {
    let mut out = vec![0.0; grid.bus_count()];
    for (k, f) in flows.flows_mw.iter().enumerate() {
        let (a, b) = grid.branch_ends(k);
        out[a] += f;
        out[b] -= f;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::test_support::*;
    use crate::grid::{BranchKind, BusKind, Technology};

    fn triangle(rating: f64) -> Grid {
        Grid::new(
            vec![
                bus("0", 400.0, BusKind::Generation, None),
                bus("1", 400.0, BusKind::Demand, Some("r")),
                bus("2", 400.0, BusKind::Substation, None),
            ],
            vec![
                line("01", "0", "1", 1.0, rating),
                line("02", "0", "2", 1.0, rating),
                line("21", "2", "1", 1.0, rating),
            ],
            vec![gen("g", "0", 200.0, 1.0, Technology::Thermal)],
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn two_bus_matrix_and_flow() {
        let g = Grid::new(
            vec![bus("0", 400.0, BusKind::Generation, None), bus("1", 400.0, BusKind::Demand, Some("r"))],
            vec![line("l", "0", "1", 10.0, 150.0)],
            vec![],
            100.0,
        )
        .unwrap();
        let b = build_susceptance_matrix(&g, "0").unwrap();
        assert_eq!(b, DenseMatrix::from_rows(&[vec![10.0]]).unwrap());
        let sol = dc_power_flow(&g, &[100.0, -100.0], "0").unwrap();
        assert_eq!(sol.angles[0], 0.0);
        assert!((sol.angles[1] + 0.1).abs() < 1e-12);
        assert!((sol.flows_mw[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn triangle_matrix_and_flows() {
        let g = triangle(1000.0);
        let b = build_susceptance_matrix(&g, "0").unwrap();
        assert_eq!(b, DenseMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap());
        // Reduced system: [[2,-1],[-1,2]]·[θ1,θ2] = [-1, 0] → θ1 = -2/3, θ2 = -1/3.
        let sol = dc_power_flow(&g, &[100.0, -100.0, 0.0], "0").unwrap();
        let expect = [200.0 / 3.0, 100.0 / 3.0, 100.0 / 3.0];
        for (f, e) in sol.flows_mw.iter().zip(expect) {
            assert!((f - e).abs() < 1e-9, "{f} vs {e}");
        }
    }

    #[test]
    fn zero_injection_gives_zero_state() {
        let sol = dc_power_flow(&triangle(1.0), &[0.0; 3], "0").unwrap();
        assert!(sol.angles.iter().chain(&sol.flows_mw).all(|v| *v == 0.0));
    }

    #[test]
    fn disconnected_grid_rejected() {
        let g = triangle(1.0).without_branches(&["01", "21"]).unwrap();
        assert!(matches!(
            build_susceptance_matrix(&g, "0"),
            Err(Error::DisconnectedGrid { components: 2 })
        ));
    }

    #[test]
    fn limit_checks() {
        let g = triangle(80.0);
        let flows = FlowSolution {
            angles: vec![0.0; 3],
            flows_mw: vec![100.0, -60.0, 80.0],
            slack_injection_mw: 0.0,
        };
        let v = check_limits(&g, &flows);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].branch_id, "01");
        assert!((v[0].overload - 0.25).abs() < 1e-15);

        let loose = triangle(120.0);
        assert!(check_limits(&loose, &flows).is_empty());
    }

    #[test]
    fn single_overloaded_transformer() {
        // Demand hangs off a 132 kV bus behind two transformers of unequal
        // strength; 300 MW splits 2:1 so only the stronger one (rated 150)
        // exceeds its limit.
        let mut tx_a = line("txa", "hv", "lv", 2.0, 150.0);
        tx_a.kind = BranchKind::Transformer;
        let mut tx_b = line("txb", "hv2", "lv", 1.0, 150.0);
        tx_b.kind = BranchKind::Transformer;
        let g = Grid::new(
            vec![
                bus("hv", 400.0, BusKind::Generation, None),
                bus("hv2", 400.0, BusKind::Substation, None),
                bus("lv", 132.0, BusKind::Demand, Some("r")),
            ],
            vec![line("tie", "hv", "hv2", 1000.0, 1000.0), tx_a, tx_b],
            vec![],
            100.0,
        )
        .unwrap();
        let sol = dc_power_flow(&g, &[300.0, 0.0, -300.0], "hv").unwrap();
        let v = check_limits(&g, &sol);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].branch_id, "txa");
    }

    #[test]
    fn ptdf_reproduces_solve() {
        let g = triangle(1.0);
        let net = DcNetwork::new(&g, "2").unwrap();
        let p = [150.0, -100.0, -50.0];
        let sol = net.solve(&p).unwrap();
        let via_ptdf = net.ptdf().mul_vec(&p);
        for (a, b) in sol.flows_mw.iter().zip(&via_ptdf) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn slack_choice_defaults_to_largest_domestic_bus() {
        let g = Grid::new(
            vec![bus("a", 400.0, BusKind::Generation, None), bus("b", 400.0, BusKind::Generation, None)],
            vec![line("l", "a", "b", 1.0, 1.0)],
            vec![
                gen("g1", "a", 100.0, 0.5, Technology::Wind),
                gen("g2", "b", 80.0, 1.0, Technology::Thermal),
                gen("ic", "a", 500.0, 1.0, Technology::Interconnector),
            ],
            100.0,
        )
        .unwrap();
        assert_eq!(default_slack_bus(&g), Some("b"));
    }
}
