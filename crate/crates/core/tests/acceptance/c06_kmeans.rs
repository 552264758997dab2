use eventmem::topics::kmeans;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensure;

const FIXTURES: u64 = 40;

fn blobs(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 4 + (seed as usize % 21);
    let split = rng.random_range(1..n);
    let centers = [
        [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
        [rng.random_range(10.0..20.0), rng.random_range(-5.0..5.0)],
    ];
    (0..n)
        .map(|i| {
            let c = centers[usize::from(i >= split)];
            vec![c[0] + rng.random_range(-1.5..1.5), c[1] + rng.random_range(-1.5..1.5)]
        })
        .collect()
}

/// Minimum-inertia 2-partition by exhaustive Gray-code enumeration.
/// Point 0 always sits on side 0; returns the side-1 mask and its inertia.
fn best_partition(points: &[Vec<f64>]) -> (u32, f64) {
    let n = points.len();
    let sq: f64 = points.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum();
    let total = [points.iter().map(|p| p[0]).sum::<f64>(), points.iter().map(|p| p[1]).sum::<f64>()];
    let (mut s1, mut n1) = ([0.0f64; 2], 0usize);
    let mut gray = 0u32;
    let mut best = (0u32, f64::INFINITY);
    for i in 1u32..(1 << (n - 1)) {
        let next = i ^ (i >> 1);
        let bit = (gray ^ next).trailing_zeros() as usize;
        let p = &points[bit + 1];
        let sign = if next & (1 << bit) != 0 { 1.0 } else { -1.0 };
        s1[0] += sign * p[0];
        s1[1] += sign * p[1];
        n1 = if sign > 0.0 { n1 + 1 } else { n1 - 1 };
        gray = next;
        let s0 = [total[0] - s1[0], total[1] - s1[1]];
        let n0 = n - n1;
        let inertia = sq - (s1[0] * s1[0] + s1[1] * s1[1]) / n1 as f64 - (s0[0] * s0[0] + s0[1] * s0[1]) / n0 as f64;
        if inertia < best.1 {
            best = (gray, inertia);
        }
    }
    (best.0, direct_inertia(points, best.0))
}

/// Two-pass inertia of a partition; the running formula above is only
/// used to rank candidates since it cancels badly.
fn direct_inertia(points: &[Vec<f64>], mask: u32) -> f64 {
    let side = |i: usize| i > 0 && mask & (1 << (i - 1)) != 0;
    (0..2)
        .map(|s| {
            let members: Vec<&Vec<f64>> = points.iter().enumerate().filter(|(i, _)| side(*i) == (s == 1)).map(|(_, p)| p).collect();
            let n = members.len() as f64;
            let c = [members.iter().map(|p| p[0]).sum::<f64>() / n, members.iter().map(|p| p[1]).sum::<f64>() / n];
            members.iter().map(|p| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sum::<f64>()
        })
        .sum()
}

pub fn check() -> Result<String, String> {
    let mut largest = 0;
    for f in 0..FIXTURES {
        let points = blobs(f);
        largest = largest.max(points.len());
        let fit = kmeans(&points, 2, 42).map_err(|e| e.to_string())?;

        let (mask, best) = best_partition(&points);
        let side = |i: usize| i > 0 && mask & (1 << (i - 1)) != 0;
        let flip = fit.assignments[0] != 0;
        for (i, a) in fit.assignments.iter().enumerate() {
            ensure!(((*a == 1) != flip) == side(i), "fixture {f}: point {i} on the wrong side");
        }
        ensure!(
            (fit.inertia() - best).abs() <= 1e-9 * best.max(1.0),
            "fixture {f}: inertia {} vs optimum {best}",
            fit.inertia()
        );
        for w in fit.inertia_history.windows(2) {
            // one ulp-scale allowance for summation order
            ensure!(w[1] <= w[0] * (1.0 + 1e-12), "fixture {f}: inertia rose {} -> {}", w[0], w[1]);
        }
        for _ in 0..5 {
            ensure!(kmeans(&points, 2, 42).map_err(|e| e.to_string())? == fit, "fixture {f}: rerun differs");
        }
    }
    Ok(format!("{FIXTURES} fixtures up to {largest} points"))
}
