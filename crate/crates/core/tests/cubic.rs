use num_complex::Complex64;
use projective_entropy::cubic::*;
use projective_entropy::fuchsian::octagon_group;
use projective_entropy::mesh::{build_fundamental_mesh, build_torus_mesh, integrate, MetricField, SurfaceMesh};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn level(l: usize) -> SurfaceMesh {
    build_fundamental_mesh(&octagon_group(), l).unwrap()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn series_is_linear_in_the_seed() {
    let g = octagon_group();
    let mesh = level(2);
    let t = Truncation::WordLength(3);
    let (p, q) = (c(0.3, -1.1), c(2.0, 0.5));
    let b1 = poincare_series(&g, 1, t, &mesh).unwrap();
    let b3 = poincare_series(&g, 3, t, &mesh).unwrap();
    let mut seed = vec![c(0.0, 0.0); 4];
    seed[1] = p;
    seed[3] = q;
    let direct = poincare_series_with_seed(&g, &seed, t, &mesh).unwrap();
    let combined = CubicDifferential::combination(&[(p, &b1), (q, &b3)]).unwrap();
    let scale = combined.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    assert!(max_diff(&direct.samples, &combined.samples) < 1e-12 * scale);
    assert!(poincare_series(&g, 5, t, &mesh).is_err());
    assert!(CubicDifferential::combination(&[]).is_err());
}

#[test]
fn transform_residual_shrinks_with_word_length() {
    let g = octagon_group();
    let mesh = level(2);
    let residuals: Vec<f64> = (3..=6)
        .map(|l| poincare_series(&g, 0, Truncation::WordLength(l), &mesh).unwrap().transform_residual)
        .collect();
    for w in residuals.windows(2) {
        assert!(w[1] < w[0], "{residuals:?}");
    }
    assert!(residuals[3] < 1e-3, "{residuals:?}");
}

#[test]
fn golden_norms_at_word_length_six() {
    let b = poincare_series(&octagon_group(), 0, Truncation::WordLength(6), &level(2)).unwrap();
    let mesh = level(2);
    let sup = differential_norm(&mesh, &b, NormKind::SupHyperbolic);
    let flat = differential_norm(&mesh, &b, NormKind::FlatArea);
    assert!((sup / 1.3046792712089833e-1 - 1.0).abs() < 1e-9, "{sup:e}");
    assert!((flat / 1.7710290832275821e0 - 1.0).abs() < 1e-9, "{flat:e}");
}

#[test]
fn gram_rank_of_seed_families() {
    let g = octagon_group();
    let mesh = level(2);
    let t = Truncation::Radius(10.0);
    let monomials: Vec<CubicDifferential> =
        (0..CUBIC_DIMENSION).map(|k| poincare_series(&g, k, t, &mesh).unwrap()).collect();
    assert_eq!(numerical_rank(&petersson_gram(&mesh, &monomials), RANK_TOLERANCE), 4);
    let (basis, m) = cubic_basis(&g, t, &mesh).unwrap();
    assert_eq!(m, 2);
    let gram = petersson_gram(&mesh, &basis);
    assert_eq!(numerical_rank(&gram, RANK_TOLERANCE), 5);
    for i in 0..5 {
        assert!(gram[(i, i)].im.abs() < 1e-12 * gram[(i, i)].re);
        for j in 0..5 {
            assert!((gram[(i, j)] - gram[(j, i)].conj()).norm() < 1e-12 * gram[(i, i)].re);
        }
    }
}

#[test]
fn norms_are_homogeneous() {
    let mesh = level(2);
    let b = poincare_series(&octagon_group(), 2, Truncation::WordLength(4), &mesh).unwrap();
    let z = c(-1.5, 2.0);
    for kind in [NormKind::SupHyperbolic, NormKind::FlatArea] {
        let ratio = differential_norm(&mesh, &b.scaled(z), kind) / differential_norm(&mesh, &b, kind);
        assert!((ratio - z.norm()).abs() < 1e-12, "{}", kind.label());
    }
    let g0 = MetricField::background(&mesh);
    let n1 = pointwise_norm_sq(&mesh, &b, &g0).unwrap();
    let n2 = pointwise_norm_sq(&mesh, &b, &g0.scaled(4.0)).unwrap();
    for (x, y) in n1.iter().zip(&n2) {
        assert!((y * 64.0 - x).abs() <= 1e-14 * x.max(1.0));
    }
    let f1 = flat_metric(&mesh, &b, 1.0).unwrap();
    let f2 = flat_metric(&mesh, &b.scaled(z), 1.0).unwrap();
    let expected = z.norm().powf(2.0 / 3.0);
    for (x, y) in f1.factor.iter().zip(&f2.factor) {
        assert!((y - expected * x).abs() <= 1e-12 * y.max(1.0));
    }
    assert!(flat_metric(&mesh, &b, 0.0).is_err());
}

#[test]
fn torus_flat_metric_area() {
    let torus = build_torus_mesh(3).unwrap();
    let b = CubicDifferential::constant(&torus, c(1.0, 0.0)).unwrap();
    let g = flat_metric(&torus, &b, 2f64.cbrt()).unwrap();
    let area = integrate(&torus, &vec![1.0; torus.vertex_count()], &g);
    assert!((area - 2f64.cbrt()).abs() < 1e-12);
    assert!((differential_norm(&torus, &b, NormKind::FlatArea) - 1.0).abs() < 1e-12);
    assert!(CubicDifferential::constant(&level(0), c(1.0, 0.0)).is_err());
    assert_eq!(b.transform_residual, 0.0);
}

#[test]
fn interpolant_becomes_holomorphic_under_refinement() {
    // a polynomial gives the clean first-order rate
    let cubes: Vec<f64> = (1..=5)
        .map(|l| {
            let mesh = level(l);
            let s = mesh.raw_positions().iter().map(|z| z * z * z).collect();
            holomorphy_residual(&mesh, &CubicDifferential::from_samples(&mesh, s))
        })
        .collect();
    for w in cubes.windows(2) {
        assert!(w[1] < 0.6 * w[0], "{cubes:?}");
    }
    // the interior mask creeps toward the corners, so a series only improves overall
    let g = octagon_group();
    let series = |l: usize| {
        let mesh = level(l);
        holomorphy_residual(&mesh, &poincare_series(&g, 1, Truncation::WordLength(3), &mesh).unwrap())
    };
    assert!(series(5) < 0.5 * series(2));
}

#[test]
fn truncations_validate() {
    assert!(Truncation::WordLength(0).validate().is_err());
    assert!(Truncation::Radius(0.5).validate().is_err());
    assert!(Truncation::Radius(f64::INFINITY).validate().is_err());
    assert!(Truncation::Radius(3.0).validate().is_ok());
    let zero = CubicDifferential::zero(&level(1));
    assert!(zero.is_zero() && zero.converged());
}
