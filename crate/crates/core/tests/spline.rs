use nalgebra::DMatrix;
use pme::points::Points;
use pme::spline::assemble;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    knots: Points,
    targets: Points,
    weights: Vec<f64>,
}

fn instance(seed: u64, d: usize, dim: usize, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let knots: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let targets: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Instance {
        knots: Points::new(d, knots).unwrap(),
        targets: Points::new(dim, targets).unwrap(),
        weights,
    }
}

/// Projector onto `{s : Tᵀ s = 0}` for the polynomial matrix of the knots.
fn null_space_projector(knots: &Points) -> DMatrix<f64> {
    let (n, d) = (knots.len(), knots.dim());
    let t = DMatrix::from_fn(n, d + 1, |i, k| if k == 0 { 1.0 } else { knots.row(i)[k - 1] });
    let gram = (t.transpose() * &t).try_inverse().unwrap();
    DMatrix::identity(n, n) - &t * gram * t.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // the solve is the constrained minimizer: feasible perturbations of either
    // block never lower the objective
    #[test]
    fn solution_minimizes_the_objective(seed in 0u64..10_000, d in 1usize..=3, log_lambda in -6.0f64..2.0) {
        let dim = d + 1;
        let n = 6 + 3 * d;
        let inst = instance(seed, d, dim, n);
        let sys = assemble(&inst.knots, &inst.targets, &inst.weights).unwrap();
        let lambda = log_lambda.exp();
        let f = sys.solve(lambda).unwrap();
        let base = sys.objective(lambda, &f);
        let proj = null_space_projector(&inst.knots);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        for _ in 0..20 {
            let raw = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0));
            let ds = &proj * raw * 1e-2;
            let da = DMatrix::from_fn(d + 1, dim, |_, _| rng.random_range(-1e-2..1e-2));
            let s = f.kernel_coefficients() + ds;
            let a = f.affine_coefficients() + da;
            let g = pme::spline::SplineMap::new(inst.knots.clone(), &s, &a).unwrap();
            let value = sys.objective(lambda, &g);
            prop_assert!(value >= base - 1e-10 * base.abs().max(1e-12), "{value} < {base}");
        }
    }

    #[test]
    fn jacobian_matches_central_differences(seed in 0u64..10_000, d in 1usize..=3) {
        let dim = d + 2;
        let inst = instance(seed, d, dim, 8 + 2 * d);
        let f = assemble(&inst.knots, &inst.targets, &inst.weights).unwrap().solve(1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let t: Vec<f64> = (0..d).map(|_| rng.random_range(-0.9..0.9)).collect();
        let jac = f.jacobian(&t);
        let h = 1e-6;
        for k in 0..d {
            let (mut tp, mut tm) = (t.clone(), t.clone());
            tp[k] += h;
            tm[k] -= h;
            let (fp, fm) = (f.eval(&tp), f.eval(&tm));
            for l in 0..dim {
                let fd = (fp[l] - fm[l]) / (2.0 * h);
                prop_assert!((fd - jac[(l, k)]).abs() <= 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", jac[(l, k)]);
            }
        }
    }

    #[test]
    fn huge_lambda_switches_off_the_kernel(seed in 0u64..10_000, d in 1usize..=3) {
        let inst = instance(seed, d, d + 1, 10 + 2 * d);
        let f = assemble(&inst.knots, &inst.targets, &inst.weights).unwrap().solve(1e12).unwrap();
        let s = f.kernel_coefficients().abs().max();
        let a = f.affine_coefficients().abs().max();
        prop_assert!(s <= 1e-6 * a, "kernel {s} vs affine {a}");
    }

    #[test]
    fn constraint_holds_at_every_lambda(seed in 0u64..10_000, d in 1usize..=3, log_lambda in -15.0f64..5.0) {
        let inst = instance(seed, d, d + 1, 12);
        let sys = assemble(&inst.knots, &inst.targets, &inst.weights).unwrap();
        let sol = sys.solve_full(log_lambda.exp()).unwrap();
        prop_assert!(sol.map.constraint_residual() <= 1e-10);
        prop_assert!(sys.kkt_residual(log_lambda.exp(), &sol) <= 1e-8);
        prop_assert_eq!(sol.map.intrinsic_dim(), d);
    }
}
