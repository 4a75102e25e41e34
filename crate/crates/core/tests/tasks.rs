//! Task generators against independent oracles.

use failaware_core::numkit::Rng;
use failaware_core::policies::{base_forward, BaseArchitecture, PolicyWeights};
use failaware_core::tasks::{
    class_means, gen_correlated, gen_map, raycast, AssessConfig, ClassifyConfig, CorrelatedConfig, GridMap,
    LocalizeConfig, Pose, TaskConfig, Truth,
};
use failaware_core::training::{bc_dataset, train_bc, BcConfig};

/// Pooled Pearson correlation of feasibility between circular neighbours.
fn neighbour_correlation(cfg: &CorrelatedConfig, instances: usize, seed: u64) -> (f64, usize) {
    let mut rng = Rng::new(seed);
    let (mut sx, mut sy, mut sxy, mut sxx, mut syy, mut count) = (0.0, 0.0, 0.0, 0.0, 0.0, 0usize);
    for _ in 0..instances {
        let inst = gen_correlated(cfg, &mut rng).unwrap();
        let Truth::Costs(c) = inst.truth() else { panic!() };
        assert!(c.feasible_count() >= 1);
        let n = c.len();
        for i in 0..n {
            let x = c.is_feasible(i) as u8 as f64;
            let y = c.is_feasible((i + 1) % n) as u8 as f64;
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
            count += 1;
        }
    }
    let k = count as f64;
    let cov = sxy / k - (sx / k) * (sy / k);
    let vx = sxx / k - (sx / k).powi(2);
    let vy = syy / k - (sy / k).powi(2);
    (cov / (vx * vy).sqrt(), count)
}

#[test]
fn independent_field_has_uncorrelated_neighbours() {
    // A generous feasible fraction keeps the at-least-one-feasible rejection
    // from inducing a visible negative correlation.
    let cfg = CorrelatedConfig {
        correlation_length: 0.0,
        feasible_fraction: 0.3,
        ..Default::default()
    };
    let (rho, pairs) = neighbour_correlation(&cfg, 10_000, 1);
    assert!(rho.abs() < 3.0 / (pairs as f64).sqrt(), "rho = {rho}");
}

#[test]
fn smooth_field_has_correlated_neighbours() {
    let cfg = |l: f64| CorrelatedConfig {
        correlation_length: l,
        feasible_fraction: 0.3,
        ..Default::default()
    };
    let (r0, pairs) = neighbour_correlation(&cfg(0.0), 10_000, 2);
    let (r5, _) = neighbour_correlation(&cfg(5.0), 10_000, 3);
    // One-sided z test on the difference of two correlations, p < 0.01.
    let se = (2.0 / pairs as f64).sqrt();
    assert!((r5 - r0) / se > 2.326, "{r0} vs {r5}");
    assert!(r5 > 0.5);
}

/// Entry distance of the ray into the unit square centred on (r, c), if it hits.
fn slab_entry(or: f64, oc: f64, dr: f64, dc: f64, r: f64, c: f64) -> Option<f64> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (o, d, centre) in [(or, dr, r), (oc, dc, c)] {
        let (a, b) = (centre - 0.5, centre + 0.5);
        if d.abs() < 1e-15 {
            if o < a || o > b {
                return None;
            }
        } else {
            let (t0, t1) = ((a - o) / d, (b - o) / d);
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
    }
    (hi >= lo && hi > 0.0).then_some(lo)
}

/// Checks every occupied cell and keeps the one the ray enters first.
fn brute_range(map: &GridMap, pose: Pose, theta: f64) -> f64 {
    let (dr, dc) = (theta.sin(), theta.cos());
    let (or, oc) = (pose.row as f64, pose.col as f64);
    let mut best: Option<(f64, usize, usize)> = None;
    for r in 0..map.height() {
        for c in 0..map.width() {
            if !map.is_occupied(r, c) {
                continue;
            }
            if let Some(t) = slab_entry(or, oc, dr, dc, r as f64, c as f64) {
                if best.is_none_or(|b| t < b.0) {
                    best = Some((t, r, c));
                }
            }
        }
    }
    let (_, r, c) = best.expect("bordered map stops every ray");
    ((r as f64 - or).powi(2) + (c as f64 - oc).powi(2)).sqrt()
}

#[test]
fn traversal_agrees_with_brute_force() {
    let mut rng = Rng::new(4);
    let cfg = LocalizeConfig {
        height: 20,
        width: 24,
        ..Default::default()
    };
    let beams = 16;
    for _ in 0..1000 {
        let map = gen_map(&cfg, &mut rng).unwrap();
        let free: Vec<_> = map.free_cells().collect();
        let (row, col) = free[rng.below(free.len())];
        let heading = rng.uniform_in(0.0, std::f64::consts::TAU);
        let pose = Pose { row, col, heading };
        let scan = raycast(&map, pose, beams).unwrap();
        for (j, got) in scan.data().iter().enumerate() {
            let theta = heading + std::f64::consts::TAU * j as f64 / beams as f64;
            let want = brute_range(&map, pose, theta);
            assert!((got - want).abs() < 1e-9, "pose {pose:?} beam {j}: {got} vs {want}");
        }
    }
}

#[test]
fn rotating_map_and_heading_preserves_ranges() {
    let mut rng = Rng::new(6);
    let cfg = LocalizeConfig {
        height: 16,
        width: 22,
        ..Default::default()
    };
    for _ in 0..200 {
        let map = gen_map(&cfg, &mut rng).unwrap();
        let rot = map.rotated();
        let free: Vec<_> = map.free_cells().collect();
        let (row, col) = free[rng.below(free.len())];
        let heading = rng.uniform_in(0.0, std::f64::consts::TAU);
        let a = raycast(&map, Pose { row, col, heading }, 12).unwrap();
        let turned = Pose {
            row: col,
            col: map.height() - 1 - row,
            heading: heading + std::f64::consts::FRAC_PI_2,
        };
        let b = raycast(&rot, turned, 12).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }
}

fn nearest_mean(means: &[Vec<f64>], x: &[f64]) -> usize {
    let d = |m: &Vec<f64>| m.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..means.len()).min_by(|&a, &b| d(&means[a]).total_cmp(&d(&means[b]))).unwrap()
}

#[test]
fn well_separated_classes_are_learned() {
    let cfg = ClassifyConfig {
        classes: 10,
        dim: 10,
        separation: 10.0,
        noise_std: 1.0,
        ..Default::default()
    };
    let task = TaskConfig::Classify(cfg.clone());
    let assess = AssessConfig::default();
    let mut rng = Rng::new(12);
    let train: Vec<_> = (0..1000).map(|_| task.generate(&mut rng).unwrap()).collect();
    let test: Vec<_> = (0..1000).map(|_| task.generate(&mut rng).unwrap()).collect();
    let mut w = PolicyWeights::base(BaseArchitecture::new(10, 10), &mut Rng::new(1)).unwrap();
    train_bc(&mut w, &bc_dataset(&task, &assess, &train).unwrap(), &BcConfig { epochs: 20, ..Default::default() }).unwrap();
    let means = class_means(&cfg).unwrap();
    let (mut bc_hits, mut oracle_hits) = (0, 0);
    for inst in &test {
        let Truth::Label(label) = inst.truth() else { panic!() };
        let aff = base_forward(inst.observation(), &w).unwrap();
        let top = (0..10).max_by(|&a, &b| aff.values()[a].total_cmp(&aff.values()[b])).unwrap();
        bc_hits += (top == *label) as usize;
        oracle_hits += (nearest_mean(&means, inst.observation().data()) == *label) as usize;
    }
    assert!(oracle_hits >= 990, "nearest mean {oracle_hits}");
    assert!(bc_hits >= 950, "behavior cloning {bc_hits}");
}

#[test]
fn zero_separation_carries_no_label_information() {
    let cfg = ClassifyConfig {
        classes: 5,
        dim: 4,
        separation: 0.0,
        ..Default::default()
    };
    let task = TaskConfig::Classify(cfg);
    let mut rng = Rng::new(2);
    // Any fixed rule, here "sign pattern of the first two features", is at chance.
    let n = 20_000;
    let mut hits = 0;
    for _ in 0..n {
        let inst = task.generate(&mut rng).unwrap();
        let Truth::Label(label) = inst.truth() else { panic!() };
        let x = inst.observation().data();
        let guess = ((x[0] > 0.0) as usize + 2 * (x[1] > 0.0) as usize) % 5;
        hits += (guess == *label) as usize;
    }
    let p = 0.2;
    let rate = hits as f64 / n as f64;
    assert!((rate - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{rate}");
}
