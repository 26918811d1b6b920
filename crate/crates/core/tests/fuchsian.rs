use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use num_complex::Complex64;
use projective_entropy::fuchsian::*;
use projective_entropy::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Circumradius of the regular hyperbolic octagon with interior angle π/4,
/// found by bisection on the law of cosines in one of its eight isosceles
/// triangles.
fn oracle_circumradius() -> f64 {
    let interior_angle = |r: f64| {
        let central = 2.0 * PI / 8.0;
        let side = (r.cosh().powi(2) - r.sinh().powi(2) * central.cos()).acosh();
        let cos_base = (r.cosh() * side.cosh() - r.cosh()) / (r.sinh() * side.sinh());
        2.0 * cos_base.acos()
    };
    let (mut lo, mut hi) = (0.1, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if interior_angle(mid) > FRAC_PI_4 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn vertex_radius_matches_trigonometric_oracle() {
    let expected = (0.5 * oracle_circumradius()).tanh();
    assert!((octagon_vertex_radius() - expected).abs() < 1e-9);
    for z in octagon_group().corners() {
        assert!((z.norm() - expected).abs() < 1e-9);
    }
}

#[test]
fn first_generator_moves_origin_to_oracle_point() {
    // the centre-to-midpoint leg satisfies tanh(inradius) = tanh(R)·cos(π/8),
    // and g0 translates along the real axis by twice the inradius
    let inradius = (oracle_circumradius().tanh() * FRAC_PI_8.cos()).atanh();
    let image = inradius.tanh();
    let g = octagon_group();
    let w = g.generator(0).apply(c(0.0, 0.0)).unwrap();
    assert!((w - c(image, 0.0)).norm() < 1e-12);
    // translation matrix [[cosh, sinh], [sinh, cosh]](δ/2) has derivative 1/cosh²(δ/2) at 0
    let d = g.generator(0).derivative(c(0.0, 0.0)).unwrap();
    assert!((d - c(1.0 - image * image, 0.0)).norm() < 1e-12);
}

#[test]
fn relations_hold() {
    let g = octagon_group();
    let z = c(0.1, 0.2);
    assert!((g.relator().apply(z).unwrap() - z).norm() < 1e-9);
    assert!(g.relator().is_identity(1e-9));
    assert!(g.commutator_relation().is_identity(1e-9));
    for m in &g.generators {
        assert!((m.det() - c(1.0, 0.0)).norm() < 1e-12);
        assert!(m.compose(&m.inverse()).is_identity(1e-12));
        assert!(m.apply(c(0.0, 0.0)).unwrap().norm() < 1.0);
    }
    for i in 0..8u8 {
        assert!(g.generator(i).compose(g.generator(inverse_generator(i))).is_identity(1e-12));
    }
}

#[test]
fn apply_and_distance_examples() {
    let id = MobiusTransform::identity();
    assert_eq!(id.apply(c(0.0, 0.3)).unwrap(), c(0.0, 0.3));
    assert_eq!(id.derivative(c(0.4, -0.2)).unwrap(), c(1.0, 0.0));
    assert!(matches!(id.apply(c(1.0, 0.0)), Err(Error::Domain(_))));
    assert!(matches!(hyperbolic_distance(c(0.0, 0.0), c(0.0, 1.5)), Err(Error::Domain(_))));
    assert_eq!(hyperbolic_distance(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
    assert!((hyperbolic_distance(c(0.0, 0.0), c(0.5, 0.0)).unwrap() - 3f64.ln()).abs() < 1e-12);
}

fn random_disk_point(rng: &mut ChaCha8Rng, max_radius: f64) -> Complex64 {
    Complex64::from_polar(max_radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI))
}

#[test]
fn distance_is_group_invariant_and_metric() {
    let g = octagon_group();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in &g.generators {
        for _ in 0..100 {
            let (z1, z2) = (random_disk_point(&mut rng, 0.6), random_disk_point(&mut rng, 0.6));
            let before = hyperbolic_distance(z1, z2).unwrap();
            let after = hyperbolic_distance(m.apply(z1).unwrap(), m.apply(z2).unwrap()).unwrap();
            assert!((before - after).abs() < 1e-10, "{before} vs {after}");
        }
    }
    for _ in 0..1000 {
        let p: Vec<Complex64> = (0..3).map(|_| random_disk_point(&mut rng, 0.95)).collect();
        let d = |a: usize, b: usize| hyperbolic_distance(p[a], p[b]).unwrap();
        assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-10);
        assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
    }
}

/// All words of length ≤ 3 multiplied out as plain matrices and deduplicated
/// up to sign, with no use of the library's reduction or lookup.
fn brute_force_count(max_length: usize) -> usize {
    type M = [Complex64; 4];
    let g = octagon_group();
    let gens: Vec<M> = g.generators.iter().map(|m| [m.a, m.b, m.c, m.d]).collect();
    let mul = |x: &M, y: &M| -> M {
        [x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]]
    };
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let mut layer: Vec<M> = vec![[one, zero, zero, one]];
    let mut all = layer.clone();
    for _ in 0..max_length {
        layer = layer.iter().flat_map(|m| gens.iter().map(move |s| mul(m, s))).collect();
        all.extend(layer.iter().copied());
    }
    let same = |x: &M, y: &M| {
        let close = |s: f64| (0..4).all(|i| (x[i] - y[i] * s).norm() < 1e-9);
        close(1.0) || close(-1.0)
    };
    let mut distinct: Vec<M> = Vec::new();
    for m in all {
        if !distinct.iter().any(|d| same(d, &m)) {
            distinct.push(m);
        }
    }
    distinct.len()
}

#[test]
fn enumeration_matches_brute_force() {
    let g = octagon_group();
    assert_eq!(enumerate_group(&g, 0).unwrap().len(), 1);
    assert!(enumerate_group(&g, 0).unwrap()[0].is_identity(0.0));
    assert_eq!(enumerate_group(&g, 1).unwrap().len(), 9);
    let brute = brute_force_count(3);
    assert_eq!(brute, 457);
    assert_eq!(enumerate_group(&g, 3).unwrap().len(), brute);
}

#[test]
fn enumeration_is_shortlex_and_prefix_closed() {
    let elements = enumerate_group(&octagon_group(), 4).unwrap();
    let words: Vec<&Vec<u8>> = elements.iter().map(|m| &m.word).collect();
    for w in words.windows(2) {
        assert!((w[0].len(), w[0]) < (w[1].len(), w[1]), "{:?} then {:?}", w[0], w[1]);
    }
    let set: std::collections::HashSet<&Vec<u8>> = words.iter().copied().collect();
    for w in &words {
        if !w.is_empty() {
            assert!(set.contains(&w[..w.len() - 1].to_vec()));
        }
        assert!(w.windows(2).all(|p| p[1] != inverse_generator(p[0])), "unreduced word {w:?}");
    }
}

#[test]
fn orbit_growth_is_exponential() {
    let g = octagon_group();
    let counts: Vec<usize> = (0..=5).map(|l| enumerate_group(&g, l).unwrap().len()).collect();
    for l in 1..5 {
        let (a, b, c) = (counts[l - 1], counts[l], counts[l + 1]);
        assert!(c - b > b - a, "layer sizes {:?}", counts);
    }
}

#[test]
fn displacement_ball_contains_exactly_the_close_elements() {
    let g = octagon_group();
    let ball = GroupBall::enumerate_within(&g, 8.0, DEFAULT_ELEMENT_CAP).unwrap();
    let words = GroupBall::enumerate(&g, ball.max_length(), DEFAULT_ELEMENT_CAP).unwrap();
    let origin = c(0.0, 0.0);
    let inside = words.elements().iter().filter(|m| distance_from_origin(m.map(origin).norm()) <= 8.0).count();
    assert_eq!(ball.len(), inside);
    assert!(GroupBall::enumerate_within(&g, -1.0, 10).is_err());
    assert!(matches!(GroupBall::enumerate_within(&g, 12.0, 100), Err(Error::Resource(_))));
}
