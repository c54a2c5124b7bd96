use nalgebra::{DMatrix, DVector};
use pme::points::Points;
use pme::projection::{Projector, ProjectionOptions};
use pme::spline::{assemble, SplineMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_map(seed: u64, d: usize, dim: usize) -> SplineMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 8 + 4 * d;
    let knots: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let targets: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    assemble(
        &Points::new(d, knots).unwrap(),
        &Points::new(dim, targets).unwrap(),
        &vec![1.0 / n as f64; n],
    )
    .unwrap()
    .solve(1e-2)
    .unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Every node of the coarse grid over `bbox`, evaluated independently.
fn grid_minimum(f: &SplineMap, bbox: &[(f64, f64)], g: usize, x: &[f64]) -> f64 {
    let d = bbox.len();
    let mut best = f64::INFINITY;
    for flat in 0..g.pow(d as u32) {
        let t: Vec<f64> = (0..d)
            .map(|k| {
                let i = (flat / g.pow(k as u32)) % g;
                bbox[k].0 + (bbox[k].1 - bbox[k].0) * i as f64 / (g - 1) as f64
            })
            .collect();
        best = best.min(d2(&f.eval(&t), x));
    }
    best.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn never_worse_than_the_coarse_grid(seed in 0u64..10_000, d in 1usize..=2) {
        let f = random_map(seed, d, d + 1);
        let opts = ProjectionOptions::default();
        let p = Projector::new(&f, &opts).unwrap();
        let g = pme::projection::default_grid0(d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        for _ in 0..10 {
            let x = random_point(&mut rng, d + 1);
            let got = p.project(&x).unwrap();
            let oracle = grid_minimum(&f, p.bbox(), g, &x);
            prop_assert!(got.dist() <= oracle + 1e-12, "{} > {oracle}", got.dist());
            prop_assert!((d2(&f.eval(&got.t), &x) - got.dist2).abs() <= 1e-12 * (1.0 + got.dist2));
        }
    }

    #[test]
    fn results_are_bitwise_reproducible(seed in 0u64..10_000, d in 1usize..=2) {
        let f = random_map(seed, d, d + 2);
        let opts = ProjectionOptions::default();
        let xs = {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..20).map(|_| random_point(&mut rng, d + 2)).collect();
            Points::from_rows(&rows).unwrap()
        };
        let a = Projector::new(&f, &opts).unwrap().project_all(&xs).unwrap();
        let b = Projector::new(&f, &opts).unwrap().project_all(&xs).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert_eq!(p.t.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), q.t.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(p.dist2.to_bits(), q.dist2.to_bits());
        }
    }

    #[test]
    fn distance_is_one_lipschitz(seed in 0u64..10_000, d in 1usize..=2) {
        let f = random_map(seed, d, d + 1);
        let p = Projector::new(&f, &ProjectionOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
        for _ in 0..10 {
            let x = random_point(&mut rng, d + 1);
            let y = random_point(&mut rng, d + 1);
            let (dx, dy) = (p.project(&x).unwrap().dist(), p.project(&y).unwrap().dist());
            prop_assert!((dx - dy).abs() <= d2(&x, &y).sqrt() + 1e-6, "{dx} {dy}");
        }
    }

    #[test]
    fn points_on_the_image_project_to_themselves(seed in 0u64..10_000, d in 1usize..=2) {
        let f = random_map(seed, d, d + 1);
        let p = Projector::new(&f, &ProjectionOptions::default()).unwrap();
        let bbox = p.bbox().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 5);
        for _ in 0..10 {
            let t0: Vec<f64> = bbox.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect();
            let x = f.eval(&t0);
            prop_assert!(p.project(&x).unwrap().dist() <= 1e-6);
        }
    }

    #[test]
    fn affine_maps_have_the_least_squares_foot(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, dim) = (2, 4);
        let a = DMatrix::from_fn(d + 1, dim, |_, _| rng.random_range(-1.0..1.0));
        let f = SplineMap::affine(&a).unwrap();
        let opts = ProjectionOptions { bbox: Some(vec![(-100.0, 100.0); d]), ..Default::default() };
        let p = Projector::new(&f, &opts).unwrap();
        let lin = a.rows(1, d).transpose();
        for _ in 0..10 {
            let x = DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
            let rhs = &x - a.row(0).transpose();
            let t = (lin.transpose() * &lin).try_inverse().unwrap() * lin.transpose() * rhs;
            let got = p.project(x.as_slice()).unwrap();
            for k in 0..d {
                prop_assert!((got.t[k] - t[k]).abs() <= 1e-6 * (1.0 + t[k].abs()), "{:?} vs {t}", got.t);
            }
        }
    }
}

#[test]
fn matches_a_dense_curve_scan() {
    for seed in 0..5 {
        let f = random_map(seed, 1, 2);
        let p = Projector::new(&f, &ProjectionOptions::default()).unwrap();
        let (lo, hi) = p.bbox()[0];
        let dense: Vec<Vec<f64>> = (0..100_000)
            .map(|i| f.eval(&[lo + (hi - lo) * i as f64 / 99_999.0]))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..20 {
            let x = random_point(&mut rng, 2);
            let oracle = dense.iter().map(|v| d2(v, &x)).fold(f64::INFINITY, f64::min).sqrt();
            let got = p.project(&x).unwrap().dist();
            assert!(got <= oracle + 1e-9, "seed {seed}: {got} > {oracle}");
        }
    }
}
