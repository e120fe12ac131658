//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use gridmetric::GridMeasure;

/// Support points `(position, weight)` of a measure, positions in `y/N`.
pub fn atoms(mu: &GridMeasure) -> Vec<([f64; 2], f64)> {
    mu.support().map(|(i, w)| (mu.point(i), w)).collect()
}

fn cost(a: [f64; 2], b: [f64; 2], p: u32) -> f64 {
    let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    d.powi(p as i32)
}

/// Flows on a candidate basis (an arc subset), by peeling leaves. `None` if
/// the subset contains a cycle or yields an infeasible flow.
fn basis_flows(supply: &[f64], demand: &[f64], arcs: &[(usize, usize)]) -> Option<Vec<f64>> {
    let m = supply.len();
    let mut res: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut flow = vec![f64::NAN; arcs.len()];
    let mut open: Vec<usize> = (0..arcs.len()).collect();
    while !open.is_empty() {
        let mut degree = vec![0usize; res.len()];
        for &e in &open {
            degree[arcs[e].0] += 1;
            degree[m + arcs[e].1] += 1;
        }
        let (pos, node) = open.iter().enumerate().find_map(|(pos, &e)| {
            let (i, j) = (arcs[e].0, m + arcs[e].1);
            if degree[i] == 1 {
                Some((pos, i))
            } else if degree[j] == 1 {
                Some((pos, j))
            } else {
                None
            }
        })?;
        let e = open.swap_remove(pos);
        let (i, j) = (arcs[e].0, m + arcs[e].1);
        let f = res[node];
        flow[e] = f;
        res[i] -= f;
        res[j] -= f;
    }
    let balanced = res.iter().all(|r| r.abs() <= 1e-12);
    let nonneg = flow.iter().all(|&f| f >= -1e-14);
    (balanced && nonneg).then_some(flow)
}

/// Minimum transport objective `Σ f·|x−y|^p` by enumerating every basis of
/// the transportation polytope. Only for tiny supports.
pub fn brute_force_objective(src: &[([f64; 2], f64)], dst: &[([f64; 2], f64)], p: u32) -> f64 {
    let (m, n) = (src.len(), dst.len());
    assert!(m * n <= 16, "brute force is limited to 4x4 supports");
    let all: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let supply: Vec<f64> = src.iter().map(|a| a.1).collect();
    let demand: Vec<f64> = dst.iter().map(|a| a.1).collect();
    let size = m + n - 1;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << all.len()) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let arcs: Vec<(usize, usize)> = (0..all.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| all[b])
            .collect();
        if let Some(flow) = basis_flows(&supply, &demand, &arcs) {
            let obj: f64 = arcs
                .iter()
                .zip(&flow)
                .map(|(&(i, j), f)| f * cost(src[i].0, dst[j].0, p))
                .sum();
            best = best.min(obj);
        }
    }
    best
}

/// `W₁` on a 1-D grid as the L¹ distance of the cumulative distributions.
pub fn cdf_w1(mu: &GridMeasure, nu: &GridMeasure) -> f64 {
    assert_eq!(mu.dim(), 1);
    let h = 1.0 / mu.n() as f64;
    let mut gap = 0.0;
    let mut total = 0.0;
    for (a, b) in mu.weights().iter().zip(nu.weights()) {
        gap += a - b;
        total += gap.abs() * h;
    }
    total
}

/// `sqrt(Σ (a−b)²)` by a plain loop.
pub fn weight_diff_norm(mu: &GridMeasure, nu: &GridMeasure) -> f64 {
    let mut acc = 0.0;
    for i in 0..mu.len() {
        let d = mu.weights()[i] - nu.weights()[i];
        acc += d * d;
    }
    acc.sqrt()
}
