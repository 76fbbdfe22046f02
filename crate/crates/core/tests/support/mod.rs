//! Independent reference implementations shared by the integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use dsmrisk::grid::{Branch, BranchKind, Bus, BusKind, Generator, Grid, Technology};
use dsmrisk::numerics::LinearProgram;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Oracle {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

/// Gaussian elimination with partial pivoting. `None` for a (numerically)
/// singular system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Best vertex of the feasible set clipped to `|x_j| ≤ m` for unbounded ends.
fn best_vertex(lp: &LinearProgram, m: f64) -> Option<f64> {
    let n = lp.num_vars();
    let eq: Vec<(Vec<f64>, f64)> = (0..lp.b_eq.len())
        .map(|i| (lp.a_eq.row(i).to_vec(), lp.b_eq[i]))
        .collect();
    let mut le: Vec<(Vec<f64>, f64)> = (0..lp.b_ub.len())
        .map(|i| (lp.a_ub.row(i).to_vec(), lp.b_ub[i]))
        .collect();
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut unit = vec![0.0; n];
        unit[j] = 1.0;
        let neg: Vec<f64> = unit.iter().map(|v| -v).collect();
        le.push((neg, if lo.is_finite() { -lo } else { m }));
        le.push((unit, if hi.is_finite() { hi } else { m }));
    }
    if eq.len() > n {
        return None;
    }
    let feasible = |x: &[f64]| {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let tol = |rhs: f64, row: &[f64]| 1e-9 * (1.0 + rhs.abs() + row.iter().zip(x).map(|(a, b)| (a * b).abs()).sum::<f64>());
        eq.iter().all(|(r, b)| (dot(r) - b).abs() <= tol(*b, r)) && le.iter().all(|(r, b)| dot(r) - b <= tol(*b, r))
    };
    let mut best: Option<f64> = None;
    combinations(le.len(), n - eq.len(), |pick| {
        let mut a: Vec<Vec<f64>> = eq.iter().map(|(r, _)| r.clone()).collect();
        let mut b: Vec<f64> = eq.iter().map(|(_, v)| *v).collect();
        for &k in pick {
            a.push(le[k].0.clone());
            b.push(le[k].1);
        }
        if let Some(x) = gauss_solve(a, b) {
            if feasible(&x) {
                let obj = lp.objective_at(&x);
                best = Some(best.map_or(obj, |v: f64| v.min(obj)));
            }
        }
    });
    best
}

/// Solves a small LP by enumerating every basic solution. Unboundedness is
/// detected by growing the artificial box around infinite bounds.
pub fn vertex_oracle(lp: &LinearProgram) -> Oracle {
    const M1: f64 = 1e6;
    const M2: f64 = 1e7;
    match (best_vertex(lp, M1), best_vertex(lp, M2)) {
        (None, _) | (_, None) => Oracle::Infeasible,
        (Some(a), Some(b)) => {
            if b < a - 1e-6 * (1.0 + a.abs()) {
                Oracle::Unbounded
            } else {
                Oracle::Optimal(a)
            }
        }
    }
}

/// Random LP with at most six variables and six constraints and small
/// integer data. About a third leave some variables without an upper bound.
pub fn random_lp(rng: &mut impl Rng) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=6);
    let m_eq = rng.gen_range(0..=m.min(n).min(2));
    let coeff = |rng: &mut dyn rand::RngCore| -> f64 {
        if rng.gen_bool(0.25) {
            0.0
        } else {
            f64::from(rng.gen_range(-5i32..=5))
        }
    };
    let objective: Vec<f64> = (0..n).map(|_| coeff(rng)).collect();
    let mut lp = LinearProgram::new(objective);
    for k in 0..m {
        let row: Vec<f64> = (0..n).map(|_| coeff(rng)).collect();
        let rhs = f64::from(rng.gen_range(-4i32..=12));
        if k < m_eq {
            lp.add_eq(&row, rhs);
        } else if rng.gen_bool(0.3) {
            lp.add_ge(&row, rhs);
        } else {
            lp.add_le(&row, rhs);
        }
    }
    let open = rng.gen_bool(0.35);
    for j in 0..n {
        let lo = match rng.gen_range(0..6) {
            0 => f64::NEG_INFINITY,
            1 => -f64::from(rng.gen_range(1..=4)),
            _ => 0.0,
        };
        let hi = if open && rng.gen_bool(0.6) {
            f64::INFINITY
        } else {
            lo.max(0.0) + f64::from(rng.gen_range(1..=10))
        };
        let lo = if !open && lo.is_infinite() { -5.0 } else { lo };
        lp.set_bounds(j, lo, hi);
    }
    lp
}

pub fn bus(id: &str, kind: BusKind, region: Option<&str>) -> Bus {
    Bus {
        id: id.into(),
        voltage_kv: 132.0,
        kind,
        region: region.map(Into::into),
        coordinates: None,
    }
}

pub fn line(id: &str, from: &str, to: &str, susceptance: f64, rating: f64) -> Branch {
    Branch {
        id: id.into(),
        from_bus: from.into(),
        to_bus: to.into(),
        kind: BranchKind::Line,
        susceptance_pu: susceptance,
        rating_mw: rating,
    }
}

pub fn unit(id: &str, at: &str, mw: f64, tech: Technology) -> Generator {
    Generator {
        id: id.into(),
        bus: at.into(),
        rated_mw: mw,
        capacity_factor: 1.0,
        technology: tech,
    }
}

/// A generation bus feeding `demand_buses` demand buses over lines too
/// strong to ever bind. Demand bus `k` is `L{k}` in region `R`.
pub fn copper_plate(units_mw: &[f64], demand_buses: usize) -> Grid {
    let mut buses = vec![bus("G", BusKind::Generation, None)];
    let mut branches = Vec::new();
    for k in 0..demand_buses {
        let id = format!("L{k}");
        buses.push(bus(&id, BusKind::Demand, Some("R")));
        branches.push(line(&format!("X{k}"), "G", &id, 10.0, 1e9));
    }
    let gens = units_mw
        .iter()
        .enumerate()
        .map(|(g, &mw)| unit(&format!("U{g}"), "G", mw, Technology::Thermal))
        .collect();
    Grid::new(buses, branches, gens, 100.0).expect("copper plate grid")
}

/// Connected random network: a random spanning tree plus a few chords,
/// susceptances in `[1, 20]` pu, one generator per bus.
pub fn random_network(rng: &mut impl Rng, n: usize) -> Grid {
    let buses: Vec<Bus> = (0..n)
        .map(|i| bus(&format!("N{i:02}"), BusKind::Substation, None))
        .collect();
    let mut branches = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let b = rng.gen_range(1.0..20.0);
        branches.push(line(&format!("T{i}"), &format!("N{j:02}"), &format!("N{i:02}"), b, 1e6));
    }
    for c in 0..rng.gen_range(0..=n / 2) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            let b = rng.gen_range(1.0..20.0);
            branches.push(line(&format!("C{c}"), &format!("N{i:02}"), &format!("N{j:02}"), b, 1e6));
        }
    }
    let gens = (0..n)
        .map(|i| unit(&format!("U{i}"), &format!("N{i:02}"), 100.0, Technology::Thermal))
        .collect();
    Grid::new(buses, branches, gens, 100.0).expect("random network")
}

/// Reference DC flows: reduced susceptance matrix solved directly, flows
/// `base · b · (θ_from − θ_to)`.
pub fn reference_flows(grid: &Grid, injections_mw: &[f64], slack: usize) -> Vec<f64> {
    let n = grid.bus_count();
    let base = grid.base_mva();
    let mut b = vec![vec![0.0; n]; n];
    for (k, br) in grid.branches().iter().enumerate() {
        let (f, t) = grid.branch_ends(k);
        let s = br.susceptance_pu;
        b[f][f] += s;
        b[t][t] += s;
        b[f][t] -= s;
        b[t][f] -= s;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let a: Vec<Vec<f64>> = keep.iter().map(|&i| keep.iter().map(|&j| b[i][j]).collect()).collect();
    let rhs: Vec<f64> = keep.iter().map(|&i| injections_mw[i] / base).collect();
    let reduced = gauss_solve(a, rhs).expect("connected network");
    let mut theta = vec![0.0; n];
    for (k, &i) in keep.iter().enumerate() {
        theta[i] = reduced[k];
    }
    grid.branches()
        .iter()
        .enumerate()
        .map(|(k, br)| {
            let (f, t) = grid.branch_ends(k);
            base * br.susceptance_pu * (theta[f] - theta[t])
        })
        .collect()
}

/// Random injections summing to zero.
pub fn balanced_injections(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
    let mean = p.iter().sum::<f64>() / n as f64;
    for v in &mut p {
        *v -= mean;
    }
    p
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
