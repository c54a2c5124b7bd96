use pme::dataset::{generate, GeneratorSpec, Setting};
use pme::hdmde::Waj;
use pme::isomap::isomap;
use pme::pme::{baseline_isomap_fit, fit_prepared, pme_fit, prepare, select_lambda, PmeOptions, Prepared};
use pme::points::Points;
use pme::projection::Projector;
use pme::spline::{assemble, SplineMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line_cloud(n: usize, seed: u64) -> Points {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            let s: f64 = rng.random_range(-1.0..1.0);
            [0.5 + 0.8 * s, -0.2 + 0.6 * s, 1.0]
        })
        .collect();
    Points::from_rows(&rows).unwrap()
}

fn opts(d: usize) -> PmeOptions {
    let mut o = PmeOptions::new(d);
    o.hdmde.n0 = Some(10);
    o
}

#[test]
fn data_on_a_line_gives_an_affine_fit() {
    let x = line_cloud(300, 1);
    for lambda in [(-10.0f64).exp(), 1.0, (3.0f64).exp()] {
        let fit = pme_fit(&x, lambda, &opts(1)).unwrap();
        let s = fit.f.kernel_coefficients().abs().max();
        let a = fit.f.affine_coefficients().abs().max();
        assert!(s <= 1e-6 * a, "λ = {lambda}: kernel {s}");
        assert!(fit.msd <= 1e-8, "λ = {lambda}: msd {}", fit.msd);
    }
}

/// Weighted residual at fixed knots plus `λ` times the bending energy.
fn objective(f: &SplineMap, waj: &Waj, knots: &Points, lambda: f64) -> f64 {
    let fit: f64 = knots
        .rows()
        .zip(waj.nodes.rows())
        .zip(&waj.theta)
        .map(|((t, mu), w)| w * f.eval(t).iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    fit + lambda * f.hessian_penalty()
}

#[test]
fn every_solve_improves_on_the_previous_map_at_fixed_knots() {
    for (setting, seed) in [(Setting::Fig3b, 0), (Setting::Fig3c, 1), (Setting::Fig4a, 2), (Setting::Fig4Surface, 3)] {
        let x = generate(GeneratorSpec::new(setting, 400, seed)).unwrap().points;
        let o = opts(setting.intrinsic_dim());
        let prep = prepare(&x, &o).unwrap();
        let lambda = (-4.0f64).exp();
        let solve = |k: &Points| assemble(k, &prep.waj.nodes, &prep.waj.theta).unwrap().solve(lambda).unwrap();
        let mut f = solve(&prep.init);
        for _ in 0..6 {
            let p = Projector::new(&f, &o.projection).unwrap();
            let proj = p.project_all(&prep.waj.nodes).unwrap();
            let knots = Points::new(o.d, proj.iter().flat_map(|q| q.t.clone()).collect()).unwrap();
            let next = solve(&knots);
            let (before, after) = (objective(&f, &prep.waj, &knots, lambda), objective(&next, &prep.waj, &knots, lambda));
            assert!(after <= before * (1.0 + 1e-9), "{setting}: {after} > {before}");
            f = next;
        }
    }
}

#[test]
fn fits_are_reproducible() {
    let x = generate(GeneratorSpec::new(Setting::Fig3c, 300, 5)).unwrap().points;
    let a = pme_fit(&x, 0.01, &opts(1)).unwrap();
    let b = pme_fit(&x, 0.01, &opts(1)).unwrap();
    assert_eq!(a.msd.to_bits(), b.msd.to_bits());
    assert_eq!(a.weighted_msd_trace, b.weighted_msd_trace);
    assert_eq!(a.f, b.f);
    for fit in [&a, &b] {
        assert!(fit.f.constraint_residual() <= 1e-10);
        assert!(fit.weighted_msd_trace.iter().all(|v| v.is_finite()));
        if fit.converged {
            let t = &fit.weighted_msd_trace;
            let (p, q) = (t[t.len() - 2], t[t.len() - 1]);
            assert!(((q - p) / p).abs() < 1e-3);
        }
    }
}

#[test]
fn selection_beats_an_independent_sub_grid() {
    let x = generate(GeneratorSpec::new(Setting::Fig3b, 300, 3)).unwrap().points;
    let grid: Vec<f64> = [-8.0, -6.0, -4.0, -2.0, 0.0].iter().map(|k: &f64| k.exp()).collect();
    let o = opts(1);
    let sel = select_lambda(&x, &o, &grid).unwrap();
    let oracle = grid
        .iter()
        .map(|&l| pme_fit(&x, l, &o).unwrap().msd)
        .fold(f64::INFINITY, f64::min);
    assert!(sel.fit.msd <= oracle * (1.0 + 1e-12), "{} > {oracle}", sel.fit.msd);
    assert_eq!(sel.lambda, grid[sel.index]);
}

#[test]
fn ties_go_to_the_largest_lambda() {
    let x = line_cloud(200, 2);
    let grid = [(-5.0f64).exp(), (-2.0f64).exp(), 1.0f64.exp()];
    let sel = select_lambda(&x, &opts(1), &grid).unwrap();
    assert_eq!(sel.index, 2);
    assert_eq!(sel.lambda, grid[2]);

    let one = select_lambda(&x, &opts(1), &[0.3]).unwrap();
    assert_eq!((one.index, one.lambda), (0, 0.3));
}

#[test]
fn baseline_is_the_first_iterate_on_raw_data() {
    let x = generate(GeneratorSpec::new(Setting::Fig3c, 150, 4)).unwrap().points;
    let lambda = 0.05;
    let o = opts(1);
    let base = baseline_isomap_fit(&x, 1, lambda, None, &o.projection).unwrap();
    let n = x.len();
    let prep = Prepared {
        waj: Waj {
            nodes: x.clone(),
            theta: vec![1.0 / n as f64; n],
            sigma: 1.0,
        },
        trace: Vec::new(),
        init: isomap(&x, 1, None).unwrap(),
    };
    let fit = fit_prepared(&x, &prep, lambda, &o).unwrap();
    // the first weighted MSD is the raw-data MSD of the first solve
    let first = fit.weighted_msd_trace[0];
    assert!((first - base.msd).abs() <= 1e-12 * base.msd, "{first} vs {}", base.msd);
    assert_eq!(base.n_iter, 0);
    assert_eq!(base.f.intrinsic_dim(), 1);
}
