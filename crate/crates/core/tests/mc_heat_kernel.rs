//! Killed Monte Carlo density against the matrix exponential of the discrete
//! operator, off-centre and at a second stability index.

use fraclap::dirichlet::HeatKernel;
use fraclap::domain::graded_grid;
use fraclap::fraclap_op::build_dirichlet_operator;
use fraclap::killed_mc::{density_from_ensemble, simulate_killed_paths, Bins, MCConfig};
use fraclap::{Alpha, Domain};

/// Bin means of the piecewise-linear interpolant through the nodal values,
/// with zero at both endpoints.
fn bin_means(nodes: &[f64], values: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut xs = vec![-1.0];
    xs.extend_from_slice(nodes);
    xs.push(1.0);
    let mut vs = vec![0.0];
    vs.extend_from_slice(values);
    vs.push(0.0);
    let at = |x: f64| {
        let k = (xs.partition_point(|&y| y <= x) - 1).min(xs.len() - 2);
        let s = (x - xs[k]) / (xs[k + 1] - xs[k]);
        vs[k] + s * (vs[k + 1] - vs[k])
    };
    edges
        .windows(2)
        .map(|e| (0..500).map(|j| at(e[0] + (e[1] - e[0]) * (j as f64 + 0.5) / 500.0)).sum::<f64>() / 500.0)
        .collect()
}

#[test]
fn mc_density_matches_matrix_exponential() {
    let domain = Domain::interval(-1.0, 1.0).unwrap();
    let alpha = Alpha::new(1.5).unwrap();
    let (x0, t) = (0.3, 0.2);
    let cfg = MCConfig {
        seed: 11,
        n_paths: 10_000,
        dt: 1e-4,
        t_max: t,
        domain: domain.clone(),
        alpha,
    };
    let ens = simulate_killed_paths(&cfg, &[x0], &[t]).unwrap();
    let bins = Bins::uniform(-1.0, 1.0, 8);
    let est = density_from_ensemble(&ens, t, &bins).unwrap();

    let grid = graded_grid(&domain, 256, 2.0, None).unwrap();
    let op = build_dirichlet_operator(&domain, &grid, alpha).unwrap();
    let reference = HeatKernel::new(&op).density_from(t, x0);
    let edges: Vec<f64> = (0..=8).map(|k| -1.0 + 0.25 * k as f64).collect();
    let means = bin_means(&grid.nodes, &reference, &edges);

    for k in 0..8 {
        let z = (est.estimates[k] - means[k]) / est.std_err[k];
        assert!(z.abs() <= 3.0, "bin {k}: mc {} vs {} (z = {z:.2})", est.estimates[k], means[k]);
    }
    // the mass killed by t is the same in both
    let mc_mass = est.total_mass();
    let ref_mass: f64 = means.iter().map(|m| 0.25 * m).sum();
    assert!((mc_mass - ref_mass).abs() < 0.02, "{mc_mass} vs {ref_mass}");
}
