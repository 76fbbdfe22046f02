use dsmrisk_demo::ops::{scenario_names, shed_curve, DemoModel};

#[test]
fn day_profiles() {
    let m = DemoModel::new(1).unwrap();
    assert_eq!(scenario_names().len(), 5);
    let current = m.day_profile("current", 0.2, true).unwrap();
    assert_eq!(current.len(), 24);
    let hp = m.day_profile("heat_pump", 0.2, true).unwrap();
    let max = |v: &[f64]| v.iter().copied().fold(f64::MIN, f64::max);
    assert!(max(&hp) > max(&current));
    assert_eq!(m.day_profile("heat_pump", 0.0, true).unwrap(), current);
    let flat = m.day_profile("flat", 0.2, false).unwrap();
    assert!(flat.windows(2).all(|w| w[0] == w[1]));
    let low = m.day_profile("current", 0.2, false).unwrap();
    assert!(low.iter().sum::<f64>() < current.iter().sum::<f64>());
    assert!(m.day_profile("nope", 0.2, true).is_err());
    assert!(m.day_profile("heat_pump", 1.5, true).is_err());
}

#[test]
fn flows_balance_at_every_bus() {
    let m = DemoModel::new(1).unwrap();
    let n = m.bus_names().len();
    assert_eq!(m.bus_positions().len(), 2 * n);
    let ends = m.branch_ends();
    assert_eq!(ends.len(), 2 * m.branch_ratings().len());
    assert!(m.flows(&vec![0.0; n]).unwrap().iter().all(|f| *f == 0.0));

    let inj = [0.0, 120.0, -30.0, -50.0, -40.0];
    let flows = m.flows(&inj).unwrap();
    let mut net = vec![0.0; n];
    for (k, f) in flows.iter().enumerate() {
        net[ends[2 * k] as usize] += f;
        net[ends[2 * k + 1] as usize] -= f;
    }
    for b in 1..n {
        assert!((net[b] - inj[b]).abs() < 1e-9, "bus {b}: {net:?}");
    }
    assert!((net[0] - (-inj.iter().sum::<f64>())).abs() < 1e-9);

    let doubled = m.flows(&inj.map(|v| 2.0 * v)).unwrap();
    for (a, b) in flows.iter().zip(&doubled) {
        assert!((2.0 * a - b).abs() < 1e-9);
    }
    assert!(m.flows(&[1.0, 2.0]).is_err());
}

#[test]
fn shed_starts_after_the_margin() {
    let curve = shed_curve(100, 0.25, 30, 7).unwrap();
    assert_eq!(curve.len(), 20);
    assert!(curve.windows(2).all(|w| w[1].median >= w[0].median));
    for p in &curve {
        assert!(p.min <= p.median && p.median <= p.max && p.max <= 1.0);
        // Capacity stays above demand until a fifth of it is gone; a
        // removal overshoots by at most one unit.
        if p.fraction <= 0.15 + 1e-9 {
            assert_eq!(p.max, 0.0, "{p:?}");
        }
        if p.fraction >= 0.3 - 1e-9 {
            let deficit = 1.25 * (1.0 - p.fraction);
            assert!(p.min >= 1.0 - deficit - 1e-9, "{p:?}");
        }
    }
    assert_eq!(shed_curve(100, 0.25, 30, 7).unwrap(), curve);
    assert!(shed_curve(0, 0.2, 5, 1).is_err());
    assert!(shed_curve(10, -0.1, 5, 1).is_err());
}
