//! Holomorphic cubic differentials from truncated Poincaré series.
//!
//! A cubic differential `b(z) dz³` is stored by its values at the raw mesh
//! vertices, each in the chart of the fundamental domain the vertex belongs
//! to. Identified boundary copies therefore carry values related by the
//! weight-6 law `b(γz)·γ′(z)³ = b(z)`; quantities such as `|b|²/h³` and
//! `|b|^{2/3}/h` are chart independent and are evaluated at canonical
//! representatives.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fuchsian::{distance_from_origin, octagon_group, FuchsianGroup, GroupBall, DEFAULT_ELEMENT_CAP};
use crate::mesh::{integrate, MetricField, SurfaceKind, SurfaceMesh};

/// Dimension of the space of cubic differentials in genus 2.
pub const CUBIC_DIMENSION: usize = 5;

/// Sup-norm size of the last word-length layer above which a series is
/// reported as not converged.
pub const INCREMENT_WARNING: f64 = 1e-6;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct CubicDifferential {
    /// Coefficients of the seed polynomial `H`, lowest degree first.
    pub seed: Vec<Complex64>,
    /// Truncation of the series, `None` for differentials given by samples.
    pub truncation: Option<Truncation>,
    /// Value of `b` at each raw vertex in its own chart.
    pub samples: Vec<Complex64>,
    /// Largest `|b(γz)·γ′(z)³ − b(z)|` over glued boundary pairs.
    pub transform_residual: f64,
    /// Sup norm of the contribution of the longest words.
    pub last_increment: f64,
}

impl CubicDifferential {
    pub fn zero(mesh: &SurfaceMesh) -> Self {
        Self::from_samples(mesh, vec![Complex64::new(0.0, 0.0); mesh.raw_vertex_count()])
    }

    /// Constant `b ≡ value` in the flat torus chart.
    pub fn constant(mesh: &SurfaceMesh, value: Complex64) -> Result<Self> {
        if mesh.kind() != SurfaceKind::FlatTorus {
            return Err(Error::Domain("a constant cubic differential exists only on the torus".into()));
        }
        Ok(Self::from_samples(mesh, vec![value; mesh.raw_vertex_count()]))
    }

    /// Wraps raw-vertex samples and measures their transformation residual.
    pub fn from_samples(mesh: &SurfaceMesh, samples: Vec<Complex64>) -> Self {
        let transform_residual = transform_residual(mesh, &samples);
        Self { seed: Vec::new(), truncation: None, samples, transform_residual, last_increment: 0.0 }
    }

    /// `c·b`, exact on samples.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            seed: self.seed.iter().map(|s| s * c).collect(),
            truncation: self.truncation,
            samples: self.samples.iter().map(|s| s * c).collect(),
            transform_residual: self.transform_residual * c.norm(),
            last_increment: self.last_increment * c.norm(),
        }
    }

    /// `Σ cᵢ·bᵢ` over differentials on the same mesh.
    pub fn combination(terms: &[(Complex64, &CubicDifferential)]) -> Result<Self> {
        let Some(&(_, first)) = terms.first() else {
            return Err(Error::Domain("empty linear combination".into()));
        };
        let n = first.samples.len();
        let mut samples = vec![Complex64::new(0.0, 0.0); n];
        let mut seed: Vec<Complex64> = Vec::new();
        let (mut residual, mut increment) = (0.0, 0.0);
        for &(c, b) in terms {
            if b.samples.len() != n {
                return Err(Error::Domain("differentials live on different meshes".into()));
            }
            for (s, x) in samples.iter_mut().zip(&b.samples) {
                *s += c * x;
            }
            if seed.len() < b.seed.len() {
                seed.resize(b.seed.len(), Complex64::new(0.0, 0.0));
            }
            for (s, x) in seed.iter_mut().zip(&b.seed) {
                *s += c * x;
            }
            residual += c.norm() * b.transform_residual;
            increment += c.norm() * b.last_increment;
        }
        let truncation = first.truncation;
        if terms.iter().any(|(_, b)| b.truncation != truncation) {
            return Err(Error::Domain("differentials use different truncations".into()));
        }
        Ok(Self { seed, truncation, samples, transform_residual: residual, last_increment: increment })
    }

    /// True when the last word-length layer is below [`INCREMENT_WARNING`].
    pub fn converged(&self) -> bool {
        self.last_increment <= INCREMENT_WARNING
    }

    /// Values at canonical representatives, in the representatives' charts.
    pub fn canonical_samples(&self, mesh: &SurfaceMesh) -> Vec<Complex64> {
        mesh.representatives().iter().map(|&r| self.samples[r]).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|s| *s == Complex64::new(0.0, 0.0))
    }
}

/// Seed polynomial `z^k (1 + z)^m`.
pub fn basis_seed(k: usize, m: usize) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); k + m + 1];
    let mut binom = 1.0;
    for j in 0..=m {
        coeffs[k + j] = Complex64::new(binom, 0.0);
        binom = binom * (m - j) as f64 / (j + 1) as f64;
    }
    coeffs
}

/// Which group elements enter a truncated Poincaré series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    /// Words of length at most `L`; the last layer is length exactly `L`.
    WordLength(usize),
    /// Elements with `d(0, γ·0) ≤ R`; the last layer is `R − 1 < d ≤ R`.
    Radius(f64),
}

impl Truncation {
    pub fn validate(self) -> Result<()> {
        match self {
            Truncation::WordLength(l) if l < 1 => {
                Err(Error::Domain("truncation length must be at least 1".into()))
            }
            Truncation::Radius(r) if !(r >= 1.0 && r.is_finite()) => {
                Err(Error::Domain(format!("truncation radius {r} must be at least 1")))
            }
            _ => Ok(()),
        }
    }

    fn elements(self, group: &FuchsianGroup) -> Result<(GroupBall, Vec<bool>)> {
        self.validate()?;
        let origin = Complex64::new(0.0, 0.0);
        match self {
            Truncation::WordLength(l) => {
                let ball = GroupBall::enumerate(group, l, DEFAULT_ELEMENT_CAP)?;
                let last = (0..ball.len()).map(|i| ball.word_length(i) == l).collect();
                Ok((ball, last))
            }
            Truncation::Radius(r) => {
                let ball = GroupBall::enumerate_within(group, r, DEFAULT_ELEMENT_CAP)?;
                let last = ball
                    .elements()
                    .iter()
                    .map(|m| distance_from_origin(m.map(origin).norm()) > r - 1.0)
                    .collect();
                Ok((ball, last))
            }
        }
    }
}

impl std::fmt::Display for Truncation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Truncation::WordLength(l) => write!(f, "word length {l}"),
            Truncation::Radius(r) => write!(f, "radius {r}"),
        }
    }
}

/// Relative Poincaré series with seed `H(z) = z^k`, `0 ≤ k ≤ 4`.
pub fn poincare_series(
    group: &FuchsianGroup,
    k: usize,
    truncation: Truncation,
    mesh: &SurfaceMesh,
) -> Result<CubicDifferential> {
    if k >= CUBIC_DIMENSION {
        return Err(Error::Domain(format!("seed exponent {k} is outside 0..=4")));
    }
    poincare_series_with_seed(group, &basis_seed(k, 0), truncation, mesh)
}

/// `b(z) = Σ_γ H(γz)·γ′(z)³` over the truncated group for a polynomial seed
/// `H`, summed in enumeration order (word length, then first-found word).
pub fn poincare_series_with_seed(
    group: &FuchsianGroup,
    seed: &[Complex64],
    truncation: Truncation,
    mesh: &SurfaceMesh,
) -> Result<CubicDifferential> {
    let (ball, last) = truncation.elements(group)?;
    if mesh.kind() != SurfaceKind::Octagon {
        return Err(Error::Domain("Poincaré series need the octagon surface".into()));
    }
    let coeffs: Vec<[Complex64; 4]> = ball.elements().iter().map(|m| [m.a, m.b, m.c, m.d]).collect();
    let horner = |z: Complex64| seed.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
    let term = |[a, b, c, d]: &[Complex64; 4], z: Complex64| {
        let inv = (c * z + d).inv();
        let inv2 = inv * inv;
        horner((a * z + b) * inv) * inv2 * inv2 * inv2
    };

    let mut samples = Vec::with_capacity(mesh.raw_vertex_count());
    let mut last_increment: f64 = 0.0;
    for &z in mesh.raw_positions() {
        let (mut head, mut tail) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (m, &is_last) in coeffs.iter().zip(&last) {
            if is_last {
                tail += term(m, z);
            } else {
                head += term(m, z);
            }
        }
        last_increment = last_increment.max(tail.norm());
        samples.push(head + tail);
    }
    log::info!(
        "Poincaré series over {} elements ({truncation}): last layer sup norm {last_increment:.3e}",
        ball.len()
    );
    if last_increment > INCREMENT_WARNING {
        log::warn!("Poincaré series not converged: last increment {last_increment:.3e} at {truncation}");
    }
    let transform_residual = transform_residual(mesh, &samples);
    Ok(CubicDifferential {
        seed: seed.to_vec(),
        truncation: Some(truncation),
        samples,
        transform_residual,
        last_increment,
    })
}

/// Largest violation of the weight-6 transformation law across glued sides.
/// Generator `g_j` carries side `j + 4` onto side `j`; torus translations
/// have unit derivative.
pub fn transform_residual(mesh: &SurfaceMesh, samples: &[Complex64]) -> f64 {
    let group = (mesh.kind() == SurfaceKind::Octagon).then(octagon_group);
    let pos = mesh.raw_positions();
    let mut worst: f64 = 0.0;
    for (s, side) in mesh.sides().iter().enumerate() {
        for (&v, &w) in side.vertices.iter().zip(&side.partner_vertices) {
            let weight = match &group {
                Some(g) => g.generator(s as u8).map_derivative(pos[w]).powi(3),
                None => Complex64::new(1.0, 0.0),
            };
            worst = worst.max((samples[v] * weight - samples[w]).norm());
        }
    }
    worst
}

/// Pointwise norm `‖b‖²_g = |b|²/h³` at canonical vertices.
pub fn pointwise_norm_sq(mesh: &SurfaceMesh, b: &CubicDifferential, g: &MetricField) -> Result<Vec<f64>> {
    let values = b.canonical_samples(mesh);
    values
        .iter()
        .zip(&g.factor)
        .enumerate()
        .map(|(i, (bv, &h))| {
            let num = bv.norm_sqr();
            if num == 0.0 {
                Ok(0.0)
            } else if h > 0.0 {
                Ok(num / (h * h * h))
            } else {
                Err(Error::Domain(format!("metric vanishes at vertex {i} where b ≠ 0")))
            }
        })
        .collect()
}

/// The flat metric `scale·|b|^{2/3}|dz|²`.
pub fn flat_metric(mesh: &SurfaceMesh, b: &CubicDifferential, scale: f64) -> Result<MetricField> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("flat metric scale {scale} must be positive")));
    }
    MetricField::new(b.canonical_samples(mesh).iter().map(|v| scale * v.norm().cbrt().powi(2)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// `max ‖b‖_{g0}` over the surface.
    SupHyperbolic,
    /// `Area(|b|^{2/3})^{3/2}`.
    FlatArea,
}

impl NormKind {
    pub fn label(self) -> &'static str {
        match self {
            NormKind::SupHyperbolic => "sup-hyperbolic",
            NormKind::FlatArea => "flat-area",
        }
    }
}

pub fn differential_norm(mesh: &SurfaceMesh, b: &CubicDifferential, kind: NormKind) -> f64 {
    match kind {
        NormKind::SupHyperbolic => {
            let h0 = mesh.raw_background();
            b.samples.iter().zip(h0).map(|(v, h)| v.norm() / (h * h * h).sqrt()).fold(0.0, f64::max)
        }
        NormKind::FlatArea => {
            let flat: Vec<f64> =
                b.canonical_samples(mesh).iter().map(|v| v.norm().cbrt().powi(2)).collect();
            let g = MetricField { factor: flat, cone_vertices: Vec::new() };
            let area = integrate(mesh, &vec![1.0; mesh.vertex_count()], &g);
            area * area.sqrt()
        }
    }
}

/// Discrete Cauchy–Riemann residual `max|∂̄b| / max|∂b|` of the piecewise
/// linear interpolant over triangles with no boundary vertex.
pub fn holomorphy_residual(mesh: &SurfaceMesh, b: &CubicDifferential) -> f64 {
    let interior = mesh.interior_mask();
    let pos = mesh.raw_positions();
    let (mut dbar_max, mut d_max): (f64, f64) = (0.0, 0.0);
    for tri in mesh.triangles() {
        if !tri.iter().all(|&v| interior[v]) {
            continue;
        }
        let (z0, z1, z2) = (pos[tri[0]], pos[tri[1]], pos[tri[2]]);
        let (b0, b1, b2) = (b.samples[tri[0]], b.samples[tri[1]], b.samples[tri[2]]);
        let (e1, e2) = (z1 - z0, z2 - z0);
        let det = e1.re * e2.im - e1.im * e2.re;
        // b ≈ b0 + α·Δx + β·Δy
        let alpha = ((b1 - b0) * e2.im - (b2 - b0) * e1.im) / det;
        let beta = ((b2 - b0) * e1.re - (b1 - b0) * e2.re) / det;
        let i = Complex64::new(0.0, 1.0);
        dbar_max = dbar_max.max((0.5 * (alpha + i * beta)).norm());
        d_max = d_max.max((0.5 * (alpha - i * beta)).norm());
    }
    if d_max == 0.0 {
        0.0
    } else {
        dbar_max / d_max
    }
}

/// Petersson Gram matrix `⟨bᵢ, bⱼ⟩ = ∫ bᵢ·conj(bⱼ) / h0³ dvol_{g0}`.
pub fn petersson_gram(mesh: &SurfaceMesh, bs: &[CubicDifferential]) -> DMatrix<Complex64> {
    let canon: Vec<Vec<Complex64>> = bs.iter().map(|b| b.canonical_samples(mesh)).collect();
    let weight: Vec<f64> = mesh.mass().iter().zip(mesh.background()).map(|(m, h)| m / (h * h * h)).collect();
    DMatrix::from_fn(bs.len(), bs.len(), |i, j| {
        canon[i].iter().zip(&canon[j]).zip(&weight).map(|((x, y), w)| x * y.conj() * *w).sum()
    })
}

/// Singular values of a Gram matrix, largest first.
pub fn singular_values(gram: &DMatrix<Complex64>) -> Vec<f64> {
    let mut s: Vec<f64> = gram.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Count of singular values above `rel_tol` times the largest.
pub fn numerical_rank(gram: &DMatrix<Complex64>, rel_tol: f64) -> usize {
    let s = singular_values(gram);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

/// Five Poincaré series spanning the cubic differentials. Seeds `z^k` come
/// first; when their Gram rank falls short, `z^k(1+z)^m` for `m = 1, 2, …`
/// are tried.
pub fn cubic_basis(
    group: &FuchsianGroup,
    truncation: Truncation,
    mesh: &SurfaceMesh,
) -> Result<(Vec<CubicDifferential>, usize)> {
    for m in 0..=3 {
        let basis = (0..CUBIC_DIMENSION)
            .map(|k| poincare_series_with_seed(group, &basis_seed(k, m), truncation, mesh))
            .collect::<Result<Vec<_>>>()?;
        let rank = numerical_rank(&petersson_gram(mesh, &basis), RANK_TOLERANCE);
        if rank == CUBIC_DIMENSION {
            return Ok((basis, m));
        }
        log::info!("seeds z^k(1+z)^{m} span rank {rank}; trying the next family");
    }
    Err(Error::Domain("no seed family produced five independent cubic differentials".into()))
}
