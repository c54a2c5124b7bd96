use std::f64::consts::TAU;

use nalgebra::DMatrix;
use pme::dataset::{generate, sphere_truth, GeneratorSpec, PointCloud, Setting, Side};
use pme::gluing::{fit_closed, ClosedOptions};
use pme::interior::{agreement, classify_grid, naive_slice_interior, normal, orientation, regular_grid, slice_polygon, Provenance};
use pme::points::Points;
use pme::projection::ProjectionOptions;
use pme::spline::{assemble, SplineMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_map(seed: u64, d: usize) -> SplineMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 12;
    let knots: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let targets: Vec<f64> = (0..n * (d + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
    assemble(
        &Points::new(d, knots).unwrap(),
        &Points::new(d + 1, targets).unwrap(),
        &vec![1.0 / n as f64; n],
    )
    .unwrap()
    .solve(1e-2)
    .unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Even–odd rule with a horizontal ray to the right.
fn ray_cast(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        if (a[1] > y) != (b[1] > y) {
            let cx = a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if cx > x {
                inside = !inside;
            }
        }
    }
    inside
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normal_is_orthogonal_and_matches_differences(seed in 0u64..10_000, d in 1usize..=2) {
        let f = random_map(seed, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let t: Vec<f64> = (0..d).map(|_| rng.random_range(-0.8..0.8)).collect();
        let n = normal(&f, &t).unwrap();
        let jac = f.jacobian(&t);
        for k in 0..d {
            let col: Vec<f64> = (0..d + 1).map(|l| jac[(l, k)]).collect();
            let dot: f64 = col.iter().zip(&n).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-8 * norm(&col) * norm(&n));
        }
        // the same formula on a central-difference jacobian
        let h = 1e-6;
        let fd = DMatrix::from_fn(d + 1, d, |l, k| {
            let (mut tp, mut tm) = (t.clone(), t.clone());
            tp[k] += h;
            tm[k] -= h;
            (f.eval(&tp)[l] - f.eval(&tm)[l]) / (2.0 * h)
        });
        let want = if d == 1 {
            vec![-fd[(1, 0)], fd[(0, 0)]]
        } else {
            let (u, v) = (fd.column(0), fd.column(1));
            vec![u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
        };
        let gap: Vec<f64> = n.iter().zip(&want).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&gap) <= 1e-5 * norm(&want).max(1e-3));
    }

    #[test]
    fn sign_does_not_depend_on_the_normal_length(seed in 0u64..10_000, d in 1usize..=2) {
        let f = random_map(seed, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let xi: Vec<f64> = (0..d + 1).map(|_| rng.random_range(-1.5..1.5)).collect();
        let o = orientation(&f, &xi, &ProjectionOptions::default()).unwrap();
        prop_assume!(o.sign != 0);
        let nn = norm(&o.normal);
        let unit: f64 = o.foot.iter().zip(&xi).zip(&o.normal).map(|((a, b), n)| (a - b) * n / nn).sum();
        prop_assert_eq!(o.sign, if unit > 0.0 { 1 } else { -1 });
    }

    #[test]
    fn points_on_the_image_have_no_side(seed in 0u64..10_000, d in 1usize..=2) {
        let f = random_map(seed, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
        let t: Vec<f64> = (0..d).map(|_| rng.random_range(-0.8..0.8)).collect();
        let o = orientation(&f, &f.eval(&t), &ProjectionOptions::default()).unwrap();
        prop_assert_eq!(o.sign, 0);
    }

    #[test]
    fn mirrored_points_get_opposite_signs(seed in 0u64..10_000, delta in 0.01f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let f = SplineMap::affine(&a).unwrap();
        let opts = ProjectionOptions { bbox: Some(vec![(-50.0, 50.0); 2]), ..Default::default() };
        let t = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = normal(&f, &t).unwrap();
        prop_assume!(norm(&n) > 1e-3);
        let foot = f.eval(&t);
        let side = |s: f64| -> Vec<f64> { foot.iter().zip(&n).map(|(p, v)| p + s * delta * v / norm(&n)).collect() };
        let (up, down) = (orientation(&f, &side(1.0), &opts).unwrap(), orientation(&f, &side(-1.0), &opts).unwrap());
        prop_assert!(up.sign != 0);
        prop_assert_eq!(up.sign, -down.sign);
    }

    #[test]
    fn slice_scan_matches_ray_casting(seed in 0u64..10_000, star in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(3..14);
        let mut angles: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let (ax, ay) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        let poly: Vec<[f64; 2]> = angles
            .iter()
            .map(|t| {
                let r = if star { rng.random_range(0.5..1.0) } else { 1.0 };
                [0.3 + ax * r * t.cos(), -0.2 + ay * r * t.sin()]
            })
            .collect();
        // the scan orders vertices about their centroid; keep cases where
        // that is the generated order
        let sorted = slice_polygon(&poly);
        let start = sorted.iter().position(|p| *p == poly[0]).unwrap();
        prop_assume!((0..m).all(|i| sorted[(start + i) % m] == poly[i]));

        let cloud = PointCloud {
            points: Points::from_rows(&poly).unwrap(),
            slice: Some(vec![0; m]),
            truth: None,
        };
        let grid: Vec<[f64; 2]> = (0..1000).map(|_| [rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5)]).collect();
        let grid = Points::from_rows(&grid).unwrap();
        let labels = naive_slice_interior(&cloud, &grid, &vec![0; grid.len()]).unwrap();
        for (i, p) in grid.rows().enumerate() {
            prop_assert_eq!(labels.provenance[i], Provenance::SliceScan);
            prop_assert_eq!(labels.labels[i] == Side::Interior, ray_cast(&poly, p[0], p[1]), "{:?}", p);
        }
    }
}

#[test]
fn scan_line_missing_the_polygon_is_exterior() {
    let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let cloud = PointCloud {
        points: Points::from_rows(&square).unwrap(),
        slice: Some(vec![3; 4]),
        truth: None,
    };
    let grid = Points::from_rows(&[[2.0, 0.5], [-1.0, 0.5], [0.5, 0.5], [0.5, 2.0]]).unwrap();
    let labels = naive_slice_interior(&cloud, &grid, &[3; 4]).unwrap();
    assert_eq!(labels.labels, [Side::Exterior, Side::Exterior, Side::Interior, Side::Exterior]);
}

#[test]
fn sphere_grid_labels() {
    let x = generate(GeneratorSpec::new(Setting::PunchedSphereNoiseless, 2000, 1)).unwrap().points;
    let mut opts = ClosedOptions::new(2, 6);
    opts.lambda_grid = (-15..=-11).map(|k| (k as f64).exp()).collect();
    let cf = fit_closed(&x, &opts).unwrap();
    let po = ProjectionOptions::default();
    let c = [0.0; 3];

    let far = Points::from_rows(&[[5.0, 5.0, 5.0], [-4.0, 0.0, 0.0]]).unwrap();
    let l = classify_grid(&cf, &c, &far, &po).unwrap();
    assert!(l.provenance.iter().all(|p| *p == Provenance::BoxReject));
    assert!(l.labels.iter().all(|s| *s == Side::Exterior));

    // five horizontal slices through the sphere, 15 × 15 each
    let zs = [-0.6, -0.3, 0.0, 0.3, 0.6];
    let plane = regular_grid(&[(-1.2, 1.2), (-1.2, 1.2)], &[15, 15]).unwrap();
    let mut rows = Vec::new();
    let mut grid_slices = Vec::new();
    let mut boundary = Vec::new();
    let mut boundary_slices = Vec::new();
    for (s, &z) in zs.iter().enumerate() {
        for p in plane.rows() {
            rows.push([p[0], p[1], z]);
            grid_slices.push(s as i64);
        }
        let r = (1.0 - z * z).sqrt();
        for k in 0..64 {
            let a = TAU * k as f64 / 64.0;
            boundary.push([r * a.cos(), r * a.sin(), z]);
            boundary_slices.push(s as i64);
        }
    }
    let grid = Points::from_rows(&rows).unwrap();
    let labels = classify_grid(&cf, &c, &grid, &po).unwrap();
    assert_eq!(labels.len(), grid.len());
    let counted: usize = [
        Provenance::BoxReject,
        Provenance::ScenarioI,
        Provenance::ScenarioII,
        Provenance::KnnFallback,
    ]
    .iter()
    .map(|p| labels.count(*p))
    .sum();
    assert_eq!(counted, grid.len());

    // a point well inside an overlap box resolves by agreement of both pieces
    let truth = sphere_truth(&grid);
    let deep = (0..grid.len()).find(|&i| labels.provenance[i] == Provenance::ScenarioI && norm(grid.row(i)) < 0.7);
    let deep = deep.expect("an interior point decided by both pieces");
    assert_eq!(labels.labels[deep], Side::Interior);
    assert_eq!(truth[deep], Side::Interior);

    let cloud = PointCloud {
        points: Points::from_rows(&boundary).unwrap(),
        slice: Some(boundary_slices),
        truth: None,
    };
    let naive = naive_slice_interior(&cloud, &grid, &grid_slices).unwrap();
    let share = agreement(&labels, &naive).unwrap();
    assert!(share >= 0.95, "agreement {share}");
}
