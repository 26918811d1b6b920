//! Möbius arithmetic on the Poincaré disk and the genus-2 octagon group.
//!
//! The fundamental domain is the regular hyperbolic octagon centred at the
//! origin with all interior angles π/4. Side `j` is the geodesic whose
//! midpoint lies on the ray at angle `jπ/4`; its endpoints are the corners at
//! angles `jπ/4 ± π/8`. Generator `j` is the hyperbolic translation carrying
//! the octagon across side `j`, so it maps side `j + 4` onto side `j` and
//! generator `j + 4` is its inverse.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Number of side-pairing generators (with inverses).
pub const GENERATOR_COUNT: usize = 8;

/// Default cap on the number of enumerated group elements.
pub const DEFAULT_ELEMENT_CAP: usize = 5_000_000;

/// Entrywise tolerance for deciding that two matrices are the same element.
pub const ELEMENT_TOLERANCE: f64 = 1e-9;

const KEY_QUANTUM: f64 = 1e-6;

/// Index of the inverse of generator `i`.
#[inline]
pub fn inverse_generator(i: u8) -> u8 {
    (i + 4) % 8
}

/// An orientation-preserving isometry of the Poincaré disk, stored as a
/// unit-determinant matrix `[[a, b], [c, d]]` acting by `z ↦ (az+b)/(cz+d)`.
#[derive(Clone, Debug)]
pub struct MobiusTransform {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    /// Generator indices whose product is this element (bookkeeping only).
    pub word: Vec<u8>,
}

impl MobiusTransform {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { a: one, b: zero, c: zero, d: one, word: Vec::new() }
    }

    /// Builds a transform from raw entries, rescaling so the determinant is 1.
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if det.norm() == 0.0 || !det.is_finite() {
            return Err(Error::Domain(format!("singular Möbius matrix (det = {det})")));
        }
        let s = det.sqrt();
        Ok(Self { a: a / s, b: b / s, c: c / s, d: d / s, word: Vec::new() })
    }

    /// Hyperbolic translation by `distance` along the diameter at angle `theta`.
    pub fn translation(theta: f64, distance: f64) -> Self {
        let ch = (0.5 * distance).cosh();
        let sh = (0.5 * distance).sinh();
        let e = Complex64::from_polar(1.0, theta);
        Self {
            a: Complex64::new(ch, 0.0),
            b: e * sh,
            c: e.conj() * sh,
            d: Complex64::new(ch, 0.0),
            word: Vec::new(),
        }
    }

    /// Rotation `z ↦ e^{iθ} z`.
    pub fn rotation(theta: f64) -> Self {
        let h = Complex64::from_polar(1.0, 0.5 * theta);
        Self { a: h, b: Complex64::new(0.0, 0.0), c: Complex64::new(0.0, 0.0), d: h.conj(), word: Vec::new() }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    /// `self ∘ other` (apply `other` first). Words are concatenated and freely reduced.
    pub fn compose(&self, other: &Self) -> Self {
        let mut word = Vec::with_capacity(self.word.len() + other.word.len());
        word.extend_from_slice(&self.word);
        for &g in &other.word {
            if word.last() == Some(&inverse_generator(g)) {
                word.pop();
            } else {
                word.push(g);
            }
        }
        Self {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
            word,
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
            word: self.word.iter().rev().map(|&g| inverse_generator(g)).collect(),
        }
    }

    /// Image of `z`; `z` must lie in the open unit disk.
    pub fn apply(&self, z: Complex64) -> Result<Complex64> {
        check_disk(z)?;
        Ok(self.map(z))
    }

    /// Image of `z` without the disk check.
    #[inline]
    pub fn map(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Complex derivative `1/(cz+d)²` at `z`.
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        check_disk(z)?;
        let w = self.c * z + self.d;
        if w.norm() == 0.0 {
            return Err(Error::Domain(format!("pole of the transform at {z}")));
        }
        Ok((w * w).inv())
    }

    /// Derivative without the disk check.
    #[inline]
    pub fn map_derivative(&self, z: Complex64) -> Complex64 {
        let w = self.c * z + self.d;
        (w * w).inv()
    }

    /// Entrywise comparison up to the global sign of the matrix.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let diff = |s: f64| {
            [
                (self.a - other.a * s).norm(),
                (self.b - other.b * s).norm(),
                (self.c - other.c * s).norm(),
                (self.d - other.d * s).norm(),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        };
        diff(1.0) <= tol || diff(-1.0) <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&Self::identity(), tol)
    }

    /// Representative with `Re(a) > 0`. Every non-identity element of a
    /// cocompact Fuchsian group is hyperbolic, so `|Re a| = |tr|/2 > 1` and
    /// the choice is never ambiguous.
    fn sign_normalized(&self) -> [Complex64; 4] {
        if self.a.re < 0.0 {
            [-self.a, -self.b, -self.c, -self.d]
        } else {
            [self.a, self.b, self.c, self.d]
        }
    }
}

fn check_disk(z: Complex64) -> Result<()> {
    if !(z.norm() < 1.0) {
        return Err(Error::Domain(format!("{z} is not in the open unit disk")));
    }
    Ok(())
}

/// Distance for the curvature −1 metric `4|dz|²/(1−|z|²)²`.
pub fn hyperbolic_distance(z1: Complex64, z2: Complex64) -> Result<f64> {
    check_disk(z1)?;
    check_disk(z2)?;
    let num = (z1 - z2).norm();
    let den = (Complex64::new(1.0, 0.0) - z1.conj() * z2).norm();
    Ok(2.0 * (num / den).min(1.0).atanh())
}

/// Hyperbolic distance from the origin to the point at Euclidean radius `r`.
pub fn distance_from_origin(r: f64) -> f64 {
    2.0 * r.atanh()
}

/// Euclidean radius of the point at hyperbolic distance `d` from the origin.
pub fn radius_at_distance(d: f64) -> f64 {
    (0.5 * d).tanh()
}

/// Hyperbolic distance from the centre of the octagon to a side midpoint.
pub fn octagon_inradius() -> f64 {
    // cosh(r) = cot(π/8) = 1 + √2
    (1.0 + SQRT_2).acosh()
}

/// Euclidean radius of the octagon corners, `2^{-1/4}`.
pub fn octagon_vertex_radius() -> f64 {
    // cosh(R) = cot²(π/8) = 3 + 2√2, r = tanh(R/2)
    radius_at_distance((3.0 + 2.0 * SQRT_2).acosh())
}

/// The deck group of the genus-2 surface obtained by gluing opposite sides
/// of the regular octagon.
#[derive(Clone, Debug)]
pub struct FuchsianGroup {
    pub generators: Vec<MobiusTransform>,
    /// Cyclic relator: the product of these generators is the identity.
    pub relation_word: Vec<u8>,
}

/// Side-pairing group of the regular octagon with interior angles π/4.
pub fn octagon_group() -> FuchsianGroup {
    let shift = 2.0 * octagon_inradius();
    let generators = (0..GENERATOR_COUNT as u8)
        .map(|j| {
            let mut g = MobiusTransform::translation(f64::from(j) * FRAC_PI_4, shift);
            g.word = vec![j];
            g
        })
        .collect();
    FuchsianGroup { generators, relation_word: vec![0, 3, 6, 1, 4, 7, 2, 5] }
}

impl FuchsianGroup {
    pub fn generator(&self, i: u8) -> &MobiusTransform {
        &self.generators[i as usize]
    }

    pub fn evaluate_word(&self, word: &[u8]) -> MobiusTransform {
        word.iter()
            .fold(MobiusTransform::identity(), |acc, &g| acc.compose(self.generator(g)))
    }

    /// The relator as a transform; the identity up to rounding.
    pub fn relator(&self) -> MobiusTransform {
        self.evaluate_word(&self.relation_word)
    }

    /// Words for a symplectic basis `a1, b1, a2, b2` with
    /// `[a1,b1][a2,b2] = 1`. In terms of `a=g0, b=g3, c=g6, d=g1` (relator
    /// `abcd a⁻¹b⁻¹c⁻¹d⁻¹`) these are `a, b, bac, dc`.
    pub fn symplectic_basis(&self) -> [Vec<u8>; 4] {
        [vec![0], vec![3], vec![3, 0, 6], vec![1, 6]]
    }

    /// `[a1,b1][a2,b2]` evaluated with the symplectic basis.
    pub fn commutator_relation(&self) -> MobiusTransform {
        let [a1, b1, a2, b2] = self.symplectic_basis().map(|w| self.evaluate_word(&w));
        let comm = |x: &MobiusTransform, y: &MobiusTransform| {
            x.compose(y).compose(&x.inverse()).compose(&y.inverse())
        };
        comm(&a1, &b1).compose(&comm(&a2, &b2))
    }

    /// Octagon corners; corner `j` sits between side `j` and side `j + 1`.
    pub fn corners(&self) -> Vec<Complex64> {
        let r = octagon_vertex_radius();
        (0..8)
            .map(|j| Complex64::from_polar(r, f64::from(j) * FRAC_PI_4 + FRAC_PI_8))
            .collect()
    }

    /// Side midpoints; midpoint `j` lies on side `j`.
    pub fn side_midpoints(&self) -> Vec<Complex64> {
        let r = radius_at_distance(octagon_inradius());
        (0..8).map(|j| Complex64::from_polar(r, f64::from(j) * FRAC_PI_4)).collect()
    }
}

type ElementKey = [i64; 4];

fn element_key(m: &MobiusTransform) -> ElementKey {
    let [a, _, c, _] = m.sign_normalized();
    [a.re, a.im, c.re, c.im].map(|x| (x / KEY_QUANTUM).round() as i64)
}

/// Every group element of word length at most `max_length`, in shortlex
/// order of its first-found reduced word, with a lookup index and the table
/// of right multiplications by generators.
#[derive(Clone, Debug)]
pub struct GroupBall {
    elements: Vec<MobiusTransform>,
    index: HashMap<ElementKey, Vec<u32>>,
    neighbors: Vec<[u32; GENERATOR_COUNT]>,
    max_length: usize,
}

const MISSING: u32 = u32::MAX;

impl GroupBall {
    pub fn enumerate(group: &FuchsianGroup, max_length: usize, cap: usize) -> Result<Self> {
        Self::grow(group, max_length, cap, |_| true)
    }

    /// Elements `γ` with `d(0, γ·0) ≤ radius`, reached from the identity
    /// through products that all stay within that radius.
    pub fn enumerate_within(group: &FuchsianGroup, radius: f64, cap: usize) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("ball radius {radius} is not a finite nonnegative number")));
        }
        let origin = Complex64::new(0.0, 0.0);
        Self::grow(group, usize::MAX, cap, |m| distance_from_origin(m.map(origin).norm()) <= radius)
    }

    fn grow(
        group: &FuchsianGroup,
        max_length: usize,
        cap: usize,
        keep: impl Fn(&MobiusTransform) -> bool,
    ) -> Result<Self> {
        let mut ball = Self {
            elements: vec![MobiusTransform::identity()],
            index: HashMap::new(),
            neighbors: Vec::new(),
            max_length: 0,
        };
        ball.insert_key(0);
        let mut level_start = 0;
        while ball.max_length < max_length && level_start < ball.elements.len() {
            let level_end = ball.elements.len();
            for i in level_start..level_end {
                for g in 0..GENERATOR_COUNT as u8 {
                    if ball.elements[i].word.last() == Some(&inverse_generator(g)) {
                        continue;
                    }
                    let candidate = ball.elements[i].compose(group.generator(g));
                    if keep(&candidate) && ball.find(&candidate).is_none() {
                        if ball.elements.len() >= cap {
                            return Err(Error::Resource(format!(
                                "group enumeration exceeds {cap} elements at word length {}",
                                candidate.word.len()
                            )));
                        }
                        ball.elements.push(candidate);
                        ball.insert_key(ball.elements.len() - 1);
                    }
                }
            }
            if ball.elements.len() > level_end {
                ball.max_length += 1;
            }
            level_start = level_end;
        }
        if max_length != usize::MAX {
            ball.max_length = max_length;
        }
        let mut neighbors = Vec::with_capacity(ball.elements.len());
        for e in &ball.elements {
            let mut row = [MISSING; GENERATOR_COUNT];
            for (g, slot) in row.iter_mut().enumerate() {
                let product = e.compose(group.generator(g as u8));
                if let Some(j) = ball.find(&product) {
                    *slot = j as u32;
                }
            }
            neighbors.push(row);
        }
        ball.neighbors = neighbors;
        Ok(ball)
    }

    fn insert_key(&mut self, i: usize) {
        let key = element_key(&self.elements[i]);
        self.index.entry(key).or_default().push(i as u32);
    }

    /// Index of the element equal to `m` up to sign, if present.
    pub fn find(&self, m: &MobiusTransform) -> Option<usize> {
        let key = element_key(m);
        let tol = ELEMENT_TOLERANCE * m.a.norm().max(1.0);
        let matches = |k: &ElementKey| {
            self.index.get(k).and_then(|ids| {
                ids.iter().map(|&i| i as usize).find(|&i| self.elements[i].approx_eq(m, tol))
            })
        };
        if let Some(i) = matches(&key) {
            return Some(i);
        }
        // a coordinate sitting near a cell edge may have rounded the other way
        let [a, _, c, _] = m.sign_normalized();
        let raw = [a.re, a.im, c.re, c.im].map(|x| x / KEY_QUANTUM);
        let mut alternatives = [0i64; 4];
        for (slot, (&x, &k)) in alternatives.iter_mut().zip(raw.iter().zip(key.iter())) {
            let frac = x - k as f64;
            if frac.abs() > 0.49 {
                *slot = frac.signum() as i64;
            }
        }
        for mask in 1..16u32 {
            let mut k = key;
            let mut usable = true;
            for (bit, (slot, &alt)) in k.iter_mut().zip(alternatives.iter()).enumerate() {
                if mask & (1 << bit) != 0 {
                    if alt == 0 {
                        usable = false;
                        break;
                    }
                    *slot += alt;
                }
            }
            if usable {
                if let Some(i) = matches(&k) {
                    return Some(i);
                }
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[MobiusTransform] {
        &self.elements
    }

    pub fn into_elements(self) -> Vec<MobiusTransform> {
        self.elements
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    pub fn word_length(&self, i: usize) -> usize {
        self.elements[i].word.len()
    }

    /// Index of `elements[i] · g`, or `None` when it lies outside the ball.
    pub fn right_neighbor(&self, i: usize, g: u8) -> Option<usize> {
        let j = self.neighbors[i][g as usize];
        (j != MISSING).then_some(j as usize)
    }
}

/// All reduced group elements of word length at most `max_length`, sorted by
/// word length and then lexicographically by word.
pub fn enumerate_group(group: &FuchsianGroup, max_length: usize) -> Result<Vec<MobiusTransform>> {
    Ok(GroupBall::enumerate(group, max_length, DEFAULT_ELEMENT_CAP)?.into_elements())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn generators_are_unit_determinant_disk_automorphisms() {
        let g = octagon_group();
        for t in &g.generators {
            assert_abs_diff_eq!(t.det().re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(t.det().im, 0.0, epsilon = 1e-12);
            assert!(t.apply(Complex64::new(0.0, 0.0)).unwrap().norm() < 1.0);
        }
    }

    #[test]
    fn generator_pairs_opposite_sides() {
        let g = octagon_group();
        let corners = g.corners();
        let mids = g.side_midpoints();
        for j in 0..8usize {
            let gen = g.generator(j as u8);
            // midpoint of side j+4 goes to midpoint of side j
            let m = gen.map(mids[(j + 4) % 8]);
            assert!((m - mids[j]).norm() < 1e-12);
            // start corner of side j+4 (corner j+3) goes to end corner of side j (corner j)
            let c = gen.map(corners[(j + 3) % 8]);
            assert!((c - corners[j]).norm() < 1e-12, "side {j}");
        }
    }

    #[test]
    fn apply_rejects_points_outside_disk() {
        let id = MobiusTransform::identity();
        assert!(matches!(id.apply(Complex64::new(1.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(
            hyperbolic_distance(Complex64::new(0.0, 1.5), Complex64::new(0.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn compose_reduces_words() {
        let g = octagon_group();
        let p = g.generator(2).compose(g.generator(6));
        assert!(p.word.is_empty());
        assert!(p.is_identity(1e-12));
    }

    #[test]
    fn lookup_survives_key_cell_boundaries() {
        let g = octagon_group();
        let original = g.generator(3).compose(g.generator(5));
        // store a copy sitting just below a quantization cell edge of Re(a)
        let edge = ((original.a.re.abs() / KEY_QUANTUM).round() + 0.5) * KEY_QUANTUM;
        let mut stored = original.clone();
        stored.a = Complex64::new((edge - 1e-12).copysign(original.a.re), original.a.im);
        let mut index = HashMap::new();
        index.insert(element_key(&stored), vec![0u32]);
        let ball = GroupBall {
            elements: vec![stored.clone()],
            index,
            neighbors: vec![[MISSING; GENERATOR_COUNT]],
            max_length: 2,
        };
        let mut query = stored.clone();
        query.a = Complex64::new((edge + 1e-12).copysign(original.a.re), original.a.im);
        assert_ne!(element_key(&query), element_key(&stored));
        assert_eq!(ball.find(&query), Some(0));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let g = octagon_group();
        assert!(matches!(GroupBall::enumerate(&g, 3, 100), Err(Error::Resource(_))));
    }
}
