use pme::dataset::{generate, generate_with_latent, GeneratorSpec, Setting, OUTLIERS};

#[test]
fn generation_is_deterministic_per_seed() {
    for setting in Setting::ALL {
        let spec = GeneratorSpec::new(setting, 3000, 17);
        let (a, b) = (generate(spec).unwrap(), generate(spec).unwrap());
        assert_eq!(a.points, b.points, "{setting}");
        assert_eq!(a.dim(), setting.ambient_dim());
        assert_ne!(generate(GeneratorSpec::new(setting, 3000, 18)).unwrap().points, a.points);
        // a longer draw starts with the shorter one when there are no outliers
        if setting != Setting::CircleWithOutliers {
            let long = generate(GeneratorSpec::new(setting, 5000, 17)).unwrap();
            assert_eq!(long.points.as_slice()[..a.points.as_slice().len()], *a.points.as_slice());
        }
    }
}

#[test]
fn noise_has_the_stated_covariance() {
    let n = 100_000;
    for setting in Setting::ALL {
        let sd = setting.noise_sd();
        let (cloud, latent) = generate_with_latent(GeneratorSpec::new(setting, n, 3)).unwrap();
        let dim = cloud.dim();
        let rows: Vec<Vec<f64>> = (0..n)
            .filter(|&i| !latent.tau[i * latent.d].is_nan())
            .map(|i| (0..dim).map(|k| cloud.points.row(i)[k] - latent.clean[i * dim + k]).collect())
            .collect();
        let m = rows.len() as f64;
        for a in 0..dim {
            for b in 0..dim {
                let c: f64 = rows.iter().map(|r| r[a] * r[b]).sum::<f64>() / m;
                if sd == 0.0 {
                    assert_eq!(c, 0.0, "{setting}");
                } else if a == b {
                    assert!((c / (sd * sd) - 1.0).abs() < 0.1, "{setting}: var {c}");
                } else {
                    assert!(c.abs() < 0.1 * sd * sd, "{setting}: cov {c}");
                }
            }
        }
    }
}

#[test]
fn sine_wave_second_coordinate_is_centered() {
    let n = 100_000;
    let x = generate(GeneratorSpec::new(Setting::Fig3b, n, 5)).unwrap().points;
    let mean: f64 = x.rows().map(|r| r[1]).sum::<f64>() / n as f64;
    // sin of a uniform full-period angle has variance 1/2
    let sd = (0.5f64 + 0.04).sqrt();
    assert!(mean.abs() < 4.0 * sd / (n as f64).sqrt(), "{mean}");
}

#[test]
fn outliers_sit_at_the_end_near_the_center() {
    let n = 500;
    let (cloud, latent) = generate_with_latent(GeneratorSpec::new(Setting::CircleWithOutliers, n, 2)).unwrap();
    for i in 0..n {
        let r = cloud.points.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if i < n - OUTLIERS {
            assert!(!latent.tau[i].is_nan());
            assert!((r - 1.0).abs() < 0.4, "point {i} at radius {r}");
        } else {
            assert!(latent.tau[i].is_nan());
            assert!(r < 0.4, "outlier {i} at radius {r}");
        }
    }
    assert!(generate(GeneratorSpec::new(Setting::CircleWithOutliers, OUTLIERS, 0)).is_err());
}
