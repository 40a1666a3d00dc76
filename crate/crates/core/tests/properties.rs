use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use fraclap::dirichlet::EllipticSolver;
use fraclap::domain::{distance, graded_grid};
use fraclap::fraclap_op::build_dirichlet_operator;
use fraclap::harness::function_bank;
use fraclap::killed_mc::{simulate_killed_paths, survival_csv, MCConfig};
use fraclap::norms::{
    besov_seminorm, psi_on_grid, weighted_holder_norm, weighted_lp_norm, weighted_sobolev_norm, HolderSpec,
    WeightSpec,
};
use fraclap::stable_kernel::{density, KernelQuery};
use fraclap::{Alpha, Domain, Grid, GridFunction};

fn grid() -> &'static Grid {
    static G: OnceLock<Grid> = OnceLock::new();
    G.get_or_init(|| graded_grid(&Domain::interval(-1.0, 1.0).unwrap(), 96, 2.0, None).unwrap())
}

/// `ρ^s (c₀ + c₁x + c₂ sin 3x)`: vanishes at the boundary like a solution would.
fn sample(c: [f64; 3], s: f64) -> GridFunction {
    GridFunction::from_fn(grid(), |x| (1.0 - x.abs()).powf(s) * (c[0] + c[1] * x + c[2] * (3.0 * x).sin())).unwrap()
}

fn add(u: &GridFunction, v: &GridFunction) -> GridFunction {
    GridFunction::new(u.grid.clone(), u.values.iter().zip(&v.values).map(|(a, b)| a + b).collect()).unwrap()
}

/// The four norm families, each with one admissible parameter set.
fn norms(u: &GridFunction) -> [f64; 4] {
    let spec = WeightSpec::new(2.5, 1.2, -0.2).unwrap();
    [
        weighted_lp_norm(u, &spec).unwrap(),
        weighted_sobolev_norm(u, 1, &spec).unwrap(),
        besov_seminorm(u, 0.4, &spec).unwrap(),
        weighted_holder_norm(u, &HolderSpec::new(0.5, 0.25).unwrap()).unwrap(),
    ]
}

fn coeffs() -> impl Strategy<Value = [f64; 3]> {
    [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norms_are_absolutely_homogeneous(c in coeffs(), s in 0.3..1.0f64, lam in -5.0..5.0f64) {
        let u = sample(c, s);
        let base = norms(&u);
        let scaled = norms(&u.scaled(lam));
        for (b, v) in base.iter().zip(&scaled) {
            prop_assert!((v - lam.abs() * b).abs() <= 1e-10 * (1.0 + lam.abs() * b));
        }
    }

    #[test]
    fn norms_satisfy_triangle_inequality(c1 in coeffs(), c2 in coeffs(), s in 0.3..1.0f64) {
        let u = sample(c1, s);
        let v = sample(c2, 0.5);
        let (nu, nv, nw) = (norms(&u), norms(&v), norms(&add(&u, &v)));
        for k in 0..4 {
            prop_assert!(nw[k] <= (nu[k] + nv[k]) * (1.0 + 1e-10), "norm {k}: {} > {} + {}", nw[k], nu[k], nv[k]);
        }
    }

    /// `‖u‖` with `(p, θ, δ₀)` against `‖ψ^{-δ}u‖` with `(p, θ + δp, δ₀)`: the
    /// ratio is a weighted mean of grid-only factors over the common support,
    /// so one constant covers the whole bank.
    #[test]
    fn weight_shift_is_two_sided_comparable(
        delta in -0.5..0.5f64,
        p in 1.5..4.0f64,
        theta in 0.3..1.5f64,
        d0 in -0.5..0.5f64,
    ) {
        let g = grid();
        let psi = psi_on_grid(g).unwrap();
        let rho = g.rho();
        let beta = theta - 1.0;
        // every bank profile vanishes for ρ < 0.01
        let factors: Vec<f64> = (0..g.len())
            .filter(|&i| rho[i] >= 0.005)
            .map(|i| psi[i].powf(-delta * p) * g.cell_power_integral(i, beta + delta * p) / g.cell_power_integral(i, beta))
            .collect();
        let lo = factors.iter().cloned().fold(f64::MAX, f64::min).powf(1.0 / p);
        let hi = factors.iter().cloned().fold(f64::MIN, f64::max).powf(1.0 / p);
        // the bracket itself is that of ψ/ρ, up to a cell-averaging factor
        let bracket = psi.iter().zip(&rho).map(|(s, r)| (s / r).max(r / s)).fold(1.0, f64::max);
        prop_assert!(hi / lo <= bracket.powf(2.0 * delta.abs()) * 4f64.powf(delta.abs()));

        let a = WeightSpec::new(p, theta, d0).unwrap();
        let b = WeightSpec::new(p, theta + delta * p, d0).unwrap();
        for prof in function_bank() {
            let u = GridFunction::from_fn(g, |x| prof.eval(x)).unwrap();
            let shifted = GridFunction::new(g.clone(), u.values.iter().zip(&psi).map(|(v, s)| v * s.powf(-delta)).collect()).unwrap();
            let nu = weighted_lp_norm(&u, &a).unwrap();
            if nu == 0.0 {
                continue;
            }
            let ratio = weighted_lp_norm(&shifted, &b).unwrap() / nu;
            prop_assert!(ratio >= lo * (1.0 - 1e-12) && ratio <= hi * (1.0 + 1e-12), "{}: {ratio} not in [{lo}, {hi}]", prof.name);
        }
    }

    #[test]
    fn same_seed_same_paths(seed in any::<u64>(), alpha in 0.4..1.9f64) {
        let cfg = MCConfig {
            seed,
            n_paths: 300,
            dt: 1e-2,
            t_max: 10.0,
            domain: Domain::interval(-1.0, 1.0).unwrap(),
            alpha: Alpha::new(alpha).unwrap(),
        };
        let a = simulate_killed_paths(&cfg, &[0.1], &[0.5]).unwrap();
        let b = simulate_killed_paths(&cfg, &[0.1], &[0.5]).unwrap();
        prop_assert_eq!(&a.exit_times, &b.exit_times);
        let times = [0.1, 0.5, 1.0];
        prop_assert_eq!(survival_csv(&a.survival_curve(&times)), survival_csv(&b.survival_curve(&times)));
    }

    #[test]
    fn stable_density_is_radial_and_nonnegative(alpha in 0.3..1.95f64, t in 0.05..20.0f64, x in -30.0..30.0f64) {
        let a = Alpha::new(alpha).unwrap();
        let p = density(&KernelQuery::new(a, t, vec![x]).unwrap()).unwrap();
        let m = density(&KernelQuery::new(a, t, vec![-x]).unwrap()).unwrap();
        prop_assert!(p >= 0.0);
        prop_assert_eq!(p, m);
        let origin = density(&KernelQuery::new(a, t, vec![0.0]).unwrap()).unwrap();
        prop_assert!(p <= origin * (1.0 + 1e-12));
    }

    #[test]
    fn distance_is_one_lipschitz(x in -3.0..3.0f64, y in -3.0..3.0f64, r in 0.2..2.0f64) {
        let d = Domain::interval(-r, r).unwrap();
        prop_assert!((distance(&d, &[x]) - distance(&d, &[y])).abs() <= (x - y).abs() + 1e-15);
        let ball = Domain::ball(vec![0.0, 0.0], r).unwrap();
        prop_assert!((distance(&ball, &[x, y]) - distance(&ball, &[y, x * 0.5])).abs()
            <= ((x - y).powi(2) + (y - 0.5 * x).powi(2)).sqrt() + 1e-15);
    }
}

fn operator(alpha: f64) -> Arc<fraclap::DirichletOperator> {
    let g = graded_grid(&Domain::interval(-1.0, 1.0).unwrap(), 64, 2.0, None).unwrap();
    Arc::new(build_dirichlet_operator(&Domain::interval(-1.0, 1.0).unwrap(), &g, Alpha::new(alpha).unwrap()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Discrete maximum principle: non-positive forcing gives a non-negative solution.
    #[test]
    fn nonpositive_forcing_gives_nonnegative_solution(
        alpha in 0.3..1.9f64,
        lambda in 0.0..50.0f64,
        seeds in proptest::collection::vec(0.0..1.0f64, 64),
    ) {
        let op = operator(alpha);
        let f: Vec<f64> = seeds.iter().map(|s| -s).collect();
        let u = EllipticSolver::new(op, lambda).unwrap().solve(&f).unwrap();
        prop_assert!(u.iter().all(|v| *v >= -1e-14), "min {}", u.iter().cloned().fold(f64::MAX, f64::min));
    }
}
