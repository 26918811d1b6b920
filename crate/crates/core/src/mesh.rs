//! Triangulated fundamental domains with side identifications.
//!
//! Every mesh stores *raw* vertices (positions in one chart of the
//! fundamental polygon, boundary points duplicated on each side) and a map to
//! *canonical* vertices, one per point of the closed surface. Fields live on
//! canonical vertices. A conformal metric `h|dz|²` is stored through its
//! coordinate factor at the canonical representative's position; quantities
//! that must be chart-independent go through the ratio `h / h0` to the
//! background factor.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fuchsian::FuchsianGroup;
use crate::linalg::CsrMatrix;

/// Relative threshold below which a metric factor counts as a cone point.
pub const CONE_THRESHOLD: f64 = 1e-12;

const DEGENERATE_AREA: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    /// Regular octagon in the Poincaré disk, background curvature −1.
    Octagon,
    /// Unit square with wrap-around identification, background curvature 0.
    FlatTorus,
}

impl SurfaceKind {
    /// Curvature of the background metric `h0|dz|²`.
    pub fn background_curvature(self) -> f64 {
        match self {
            SurfaceKind::Octagon => -1.0,
            SurfaceKind::FlatTorus => 0.0,
        }
    }
}

/// One side of the fundamental polygon and how it is glued.
#[derive(Clone, Debug)]
pub struct SidePairing {
    /// Raw vertices along the side, in order.
    pub vertices: Vec<usize>,
    /// Index of the side this one is glued to.
    pub partner: usize,
    /// `partner_vertices[q]` is the raw vertex on the partner side glued to `vertices[q]`.
    pub partner_vertices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    kind: SurfaceKind,
    refinement: usize,
    positions: Vec<Complex64>,
    triangles: Vec<[usize; 3]>,
    canonical: Vec<usize>,
    representatives: Vec<usize>,
    raw_background: Vec<f64>,
    background: Vec<f64>,
    mass: Vec<f64>,
    sides: Vec<SidePairing>,
    edge_count: usize,
    basepoint: usize,
}

/// Conformal factor `4/(1−|z|²)²` of the curvature −1 Poincaré metric.
pub fn poincare_factor(z: Complex64) -> f64 {
    let s = 1.0 - z.norm_sqr();
    4.0 / (s * s)
}

fn triangle_area(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    0.5 * ((b - a).conj() * (c - a)).im
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl SurfaceMesh {
    /// Assembles a mesh from raw geometry and pairs of raw vertices to glue.
    pub fn from_parts(
        kind: SurfaceKind,
        refinement: usize,
        positions: Vec<Complex64>,
        triangles: Vec<[usize; 3]>,
        glued: &[(usize, usize)],
        sides: Vec<SidePairing>,
        basepoint: usize,
    ) -> Result<Self> {
        let n = positions.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!("triangle {t} references a missing vertex")));
            }
            let area = triangle_area(positions[tri[0]], positions[tri[1]], positions[tri[2]]);
            if !(area > DEGENERATE_AREA) {
                return Err(Error::Mesh(format!("triangle {t} is degenerate or inverted (area {area:e})")));
            }
        }
        let mut uf = UnionFind((0..n).collect());
        for &(a, b) in glued {
            uf.union(a, b);
        }
        let mut canonical = vec![usize::MAX; n];
        let mut representatives = Vec::new();
        for v in 0..n {
            let root = uf.find(v);
            if canonical[root] == usize::MAX {
                canonical[root] = representatives.len();
                representatives.push(root);
            }
            canonical[v] = canonical[root];
        }
        let raw_background: Vec<f64> = match kind {
            SurfaceKind::Octagon => positions.iter().map(|&z| poincare_factor(z)).collect(),
            SurfaceKind::FlatTorus => vec![1.0; n],
        };
        let background = representatives.iter().map(|&r| raw_background[r]).collect();

        let factor_at = |z: Complex64| match kind {
            SurfaceKind::Octagon => poincare_factor(z),
            SurfaceKind::FlatTorus => 1.0,
        };
        let mut mass = vec![0.0; representatives.len()];
        let mut raw_edges: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &triangles {
            let z = tri.map(|v| positions[v]);
            let area = triangle_area(z[0], z[1], z[2]);
            for (w, bary) in TRIANGLE_RULE {
                let h = w * area * factor_at(z[0] * bary[0] + z[1] * bary[1] + z[2] * bary[2]);
                for k in 0..3 {
                    mass[canonical[tri[k]]] += h * bary[k];
                }
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *raw_edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if kind == SurfaceKind::Octagon {
            // boundary chords bulge past the geodesic sides; remove each lune
            let mut boundary: Vec<(usize, usize)> =
                raw_edges.iter().filter(|(_, &c)| c == 1).map(|(&e, _)| e).collect();
            boundary.sort_unstable();
            for (a, b) in boundary {
                let lune = lune_area(positions[a], positions[b]);
                mass[canonical[a]] -= 0.5 * lune;
                mass[canonical[b]] -= 0.5 * lune;
            }
        }
        let boundary_edges = raw_edges.values().filter(|&&c| c == 1).count();
        if boundary_edges % 2 != 0 {
            return Err(Error::Mesh("odd number of boundary edges cannot be glued".into()));
        }
        let edge_count = raw_edges.len() - boundary_edges / 2;

        Ok(Self {
            kind,
            refinement,
            positions,
            triangles,
            canonical,
            representatives,
            raw_background,
            background,
            mass,
            sides,
            edge_count,
            basepoint,
        })
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn refinement(&self) -> usize {
        self.refinement
    }

    /// Number of canonical vertices (unknowns of any field).
    pub fn vertex_count(&self) -> usize {
        self.representatives.len()
    }

    pub fn raw_vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count as i64 + self.face_count() as i64
    }

    /// `2π|χ|`, the area of any curvature −1 metric on the surface.
    pub fn gauss_bonnet_area(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.euler_characteristic().unsigned_abs() as f64
    }

    pub fn raw_positions(&self) -> &[Complex64] {
        &self.positions
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Raw vertex → canonical vertex.
    pub fn canonical(&self) -> &[usize] {
        &self.canonical
    }

    /// Canonical vertex → its representative raw vertex.
    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    /// Position of each canonical vertex (in its representative's chart).
    pub fn positions(&self) -> Vec<Complex64> {
        self.representatives.iter().map(|&r| self.positions[r]).collect()
    }

    /// Background factor `h0` at each canonical vertex.
    pub fn background(&self) -> &[f64] {
        &self.background
    }

    /// Background factor at each raw vertex position.
    pub fn raw_background(&self) -> &[f64] {
        &self.raw_background
    }

    /// Lumped mass of each canonical vertex under the background metric.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn sides(&self) -> &[SidePairing] {
        &self.sides
    }

    /// Raw vertex used as `x₀` for orbit counting.
    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    /// Raw vertices lying on no side of the polygon.
    pub fn interior_mask(&self) -> Vec<bool> {
        let mut interior = vec![true; self.positions.len()];
        for side in &self.sides {
            for &v in &side.vertices {
                interior[v] = false;
            }
        }
        interior
    }

    /// Unique raw edges with their Euclidean lengths, sorted by endpoints.
    pub fn raw_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// Degree-5 seven-point rule on a triangle: weights and barycentric points.
const TRIANGLE_RULE: [(f64, [f64; 3]); 7] = {
    const W1: f64 = 0.132_394_152_788_506_18;
    const W2: f64 = 0.125_939_180_544_827_15;
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_09;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_34;
    [
        (0.225, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
        (W1, [A1, B1, B1]),
        (W1, [B1, A1, B1]),
        (W1, [B1, B1, A1]),
        (W2, [A2, B2, B2]),
        (W2, [B2, A2, B2]),
        (W2, [B2, B2, A2]),
    ]
};

const GAUSS_5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Hyperbolic area between the chord `pq` and the geodesic arc through `p`
/// and `q`, integrated in polar coordinates about the arc's centre.
fn lune_area(p: Complex64, q: Complex64) -> f64 {
    // centre c of the circle orthogonal to |z| = 1 through p and q solves
    // 2 Re(c z̄) = 1 + |z|² for z = p, q
    let (r1, r2) = (0.5 * (1.0 + p.norm_sqr()), 0.5 * (1.0 + q.norm_sqr()));
    let det = p.re * q.im - p.im * q.re;
    if det.abs() < 1e-14 {
        return 0.0; // diameter: the geodesic is the chord
    }
    let c = Complex64::new((r1 * q.im - r2 * p.im) / det, (p.re * r2 - q.re * r1) / det);
    let rho = (c.norm_sqr() - 1.0).sqrt();
    let foot = p + (q - p) * ((c - p).re * (q - p).re + (c - p).im * (q - p).im) / (q - p).norm_sqr();
    let d = (foot - c).norm();
    let phi_m = (foot - c).arg();
    let (phi_p, mut phi_q) = ((p - c).arg(), (q - c).arg());
    if phi_q - phi_p > std::f64::consts::PI {
        phi_q -= 2.0 * std::f64::consts::PI;
    } else if phi_p - phi_q > std::f64::consts::PI {
        phi_q += 2.0 * std::f64::consts::PI;
    }
    let (phi_mid, phi_half) = (0.5 * (phi_p + phi_q), 0.5 * (phi_q - phi_p).abs());
    let mut total = 0.0;
    for (x, wx) in GAUSS_5 {
        let phi = phi_mid + phi_half * x;
        let r0 = d / (phi - phi_m).cos();
        let (r_mid, r_half) = (0.5 * (r0 + rho), 0.5 * (rho - r0));
        let dir = Complex64::from_polar(1.0, phi);
        let inner: f64 = GAUSS_5
            .iter()
            .map(|&(y, wy)| {
                let r = r_mid + r_half * y;
                wy * poincare_factor(c + dir * r) * r
            })
            .sum();
        total += wx * phi_half * r_half * inner;
    }
    total
}

/// Point at hyperbolic arclength fraction `tau` along the geodesic from `p` to `q`.
fn geodesic_point(p: Complex64, q: Complex64, tau: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let w = (q - p) / (one - p.conj() * q);
    let r = w.norm();
    if r == 0.0 {
        return p;
    }
    let zeta = w * ((tau * r.atanh()).tanh() / r);
    (zeta + p) / (one + p.conj() * zeta)
}

/// Point at hyperbolic fraction `s` of the way from the origin to `x`.
fn radial_point(x: Complex64, s: f64) -> Complex64 {
    let r = x.norm();
    if r == 0.0 {
        return x;
    }
    x * ((s * r.atanh()).tanh() / r)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum GridKey {
    Centre,
    Ray(usize, usize),
    Inner(usize, usize, usize),
}

/// Triangulates the regular octagon.
///
/// Level 0 is a fan of 16 triangles from the centre to the 8 corners and 8
/// side midpoints; level `L` splits every fan triangle into `4^L` pieces.
/// Radial grid lines are hyperbolic geodesics through the origin, and side
/// points sit at equal hyperbolic arclength, so paired sides match exactly.
pub fn build_fundamental_mesh(group: &FuchsianGroup, refinement: usize) -> Result<SurfaceMesh> {
    if refinement > 12 {
        return Err(Error::Resource(format!("refinement level {refinement} is too large")));
    }
    let n = 1usize << refinement;
    let corners = group.corners();
    let mids = group.side_midpoints();
    // outer[2j] = midpoint of side j, outer[2j+1] = corner j
    let outer: Vec<Complex64> = (0..16).map(|f| if f % 2 == 0 { mids[f / 2] } else { corners[f / 2] }).collect();

    let mut positions = Vec::new();
    let mut ids: HashMap<GridKey, usize> = HashMap::new();
    let mut vertex = |key: GridKey, pos: &dyn Fn() -> Complex64, positions: &mut Vec<Complex64>| -> usize {
        *ids.entry(key).or_insert_with(|| {
            positions.push(pos());
            positions.len() - 1
        })
    };

    // grid[f][i][l] = raw id of point (i, l) of fan triangle f
    let mut grid: Vec<Vec<Vec<usize>>> = Vec::with_capacity(16);
    for f in 0..16 {
        let (p, q) = (outer[f], outer[(f + 1) % 16]);
        let mut rows = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let mut row = Vec::with_capacity(i + 1);
            for l in 0..=i {
                let key = if i == 0 {
                    GridKey::Centre
                } else if l == 0 {
                    GridKey::Ray(f, i)
                } else if l == i {
                    GridKey::Ray((f + 1) % 16, i)
                } else {
                    GridKey::Inner(f, i, l)
                };
                let pos = || {
                    if i == 0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let target = geodesic_point(p, q, l as f64 / i as f64);
                    radial_point(target, i as f64 / n as f64)
                };
                row.push(vertex(key, &pos, &mut positions));
            }
            rows.push(row);
        }
        grid.push(rows);
    }

    let mut triangles = Vec::with_capacity(16 * n * n);
    for rows in &grid {
        for i in 0..n {
            for l in 0..=i {
                triangles.push([rows[i][l], rows[i + 1][l], rows[i + 1][l + 1]]);
                if l < i {
                    triangles.push([rows[i][l], rows[i + 1][l + 1], rows[i][l + 1]]);
                }
            }
        }
    }

    // side j runs from corner j-1 to corner j through midpoint j
    let side_vertices: Vec<Vec<usize>> = (0..8)
        .map(|j| {
            let before = &grid[(2 * j + 15) % 16][n];
            let after = &grid[2 * j][n];
            before.iter().chain(after.iter().skip(1)).copied().collect()
        })
        .collect();
    let mut glued = Vec::new();
    let mut sides = Vec::with_capacity(8);
    for j in 0..8 {
        let partner = (j + 4) % 8;
        let partner_vertices: Vec<usize> = side_vertices[partner].iter().rev().copied().collect();
        if j < 4 {
            glued.extend(side_vertices[j].iter().copied().zip(partner_vertices.iter().copied()));
        }
        sides.push(SidePairing { vertices: side_vertices[j].clone(), partner, partner_vertices });
    }
    let centre = grid[0][0][0];
    SurfaceMesh::from_parts(SurfaceKind::Octagon, refinement, positions, triangles, &glued, sides, centre)
}

/// Unit-square flat torus with `2^(refinement+1)` cells per side, split into
/// right triangles. Side 0 is the bottom edge, then right, top, left.
pub fn build_torus_mesh(refinement: usize) -> Result<SurfaceMesh> {
    if refinement > 12 {
        return Err(Error::Resource(format!("refinement level {refinement} is too large")));
    }
    let n = 2usize << refinement;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let h = 1.0 / n as f64;
    let mut positions = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            positions.push(Complex64::new(i as f64 * h, j as f64 * h));
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let bottom: Vec<usize> = (0..=n).map(|i| id(i, 0)).collect();
    let top: Vec<usize> = (0..=n).map(|i| id(i, n)).collect();
    let left: Vec<usize> = (0..=n).map(|j| id(0, j)).collect();
    let right: Vec<usize> = (0..=n).map(|j| id(n, j)).collect();
    let sides = vec![
        SidePairing { vertices: bottom.clone(), partner: 2, partner_vertices: top.clone() },
        SidePairing { vertices: right.clone(), partner: 3, partner_vertices: left.clone() },
        SidePairing { vertices: top.clone(), partner: 0, partner_vertices: bottom.clone() },
        SidePairing { vertices: left.clone(), partner: 1, partner_vertices: right.clone() },
    ];
    let glued: Vec<(usize, usize)> =
        bottom.into_iter().zip(top).chain(left.into_iter().zip(right)).collect();
    let basepoint = id(n / 2, n / 2);
    SurfaceMesh::from_parts(SurfaceKind::FlatTorus, refinement, positions, triangles, &glued, sides, basepoint)
}

/// Discrete Laplace–Beltrami operator of the background metric:
/// `(Δu)_i = −(K u)_i / m_i` with cotangent stiffness `K` and lumped mass `m`.
#[derive(Clone, Debug)]
pub struct Laplacian {
    stiffness: CsrMatrix,
    mass: Vec<f64>,
}

impl Laplacian {
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let ku = self.stiffness.matvec(u);
        ku.iter().zip(&self.mass).map(|(k, m)| -k / m).collect()
    }
}

pub fn assemble_laplacian(mesh: &SurfaceMesh) -> Laplacian {
    let pos = &mesh.positions;
    let canon = &mesh.canonical;
    let mut triplets = Vec::with_capacity(mesh.triangles.len() * 12 + mesh.vertex_count());
    let mut edge_weight: HashMap<(usize, usize), f64> = HashMap::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (o, a, b) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (ea, eb) = (pos[a] - pos[o], pos[b] - pos[o]);
            let cross = (ea.conj() * eb).im;
            let dotp = (ea.conj() * eb).re;
            let w = 0.5 * dotp / cross;
            let (i, j) = (canon[a], canon[b]);
            if i == j {
                continue;
            }
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
            triplets.push((i, i, w));
            triplets.push((j, j, w));
            *edge_weight.entry((i.min(j), i.max(j))).or_default() += w;
        }
    }
    for i in 0..mesh.vertex_count() {
        triplets.push((i, i, 0.0));
    }
    let negative = edge_weight.values().filter(|&&w| w < 0.0).count();
    if negative > 0 {
        log::debug!("{negative} edges have negative cotangent weight; maximum principle may fail");
    }
    Laplacian {
        stiffness: CsrMatrix::from_triplets(mesh.vertex_count(), triplets),
        mass: mesh.mass.clone(),
    }
}

/// A conformal metric `h|dz|²`, stored as the factor `h` at each canonical
/// vertex.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub factor: Vec<f64>,
    pub cone_vertices: Vec<usize>,
}

impl MetricField {
    pub fn new(factor: Vec<f64>) -> Result<Self> {
        if let Some(i) = factor.iter().position(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::Domain(format!("metric factor {} at vertex {i} is not ≥ 0", factor[i])));
        }
        let max = factor.iter().copied().fold(0.0, f64::max);
        let cone_vertices = factor
            .iter()
            .enumerate()
            .filter(|(_, &h)| h <= CONE_THRESHOLD * max)
            .map(|(i, _)| i)
            .collect();
        Ok(Self { factor, cone_vertices })
    }

    pub fn background(mesh: &SurfaceMesh) -> Self {
        Self { factor: mesh.background.clone(), cone_vertices: Vec::new() }
    }

    /// Metric `ρ·g0` for a chart-independent density `ρ ≥ 0`.
    pub fn from_ratio(mesh: &SurfaceMesh, ratio: &[f64]) -> Result<Self> {
        Self::new(ratio.iter().zip(&mesh.background).map(|(r, h)| r * h).collect())
    }

    /// The chart-independent density `h / h0`.
    pub fn ratio(&self, mesh: &SurfaceMesh) -> Vec<f64> {
        self.factor.iter().zip(&mesh.background).map(|(h, h0)| h / h0).collect()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { factor: self.factor.iter().map(|h| h * t).collect(), cone_vertices: self.cone_vertices.clone() }
    }

    pub fn max_factor(&self) -> f64 {
        self.factor.iter().copied().fold(0.0, f64::max)
    }
}

/// Lumped-mass integral `∫ f dvol_g`.
pub fn integrate(mesh: &SurfaceMesh, f: &[f64], g: &MetricField) -> f64 {
    f.iter()
        .zip(&g.factor)
        .zip(mesh.background.iter().zip(&mesh.mass))
        .map(|((fi, h), (h0, m))| fi * (h / h0) * m)
        .sum()
}

/// Maps every raw vertex of `coarse` to the raw vertex of `fine` at the same
/// position. Refinement levels of one kind are nested and grid points are
/// computed from the same rational parameters, so positions agree bit for bit.
pub fn nested_vertex_map(fine: &SurfaceMesh, coarse: &SurfaceMesh) -> Result<Vec<usize>> {
    if fine.kind != coarse.kind || fine.refinement < coarse.refinement {
        return Err(Error::Mesh("meshes are not a refinement pair of one kind".into()));
    }
    let key = |z: Complex64| (z.re.to_bits(), z.im.to_bits());
    let index: HashMap<(u64, u64), usize> =
        fine.positions.iter().enumerate().map(|(i, &z)| (key(z), i)).collect();
    coarse
        .positions
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            index.get(&key(z)).copied().ok_or_else(|| Error::Mesh(format!("coarse vertex {i} at {z} has no fine copy")))
        })
        .collect()
}

/// Restricts a chart-independent canonical field (such as `h/h0` or `u`)
/// from `fine` to `coarse` through a [`nested_vertex_map`].
pub fn restrict_canonical(fine: &SurfaceMesh, coarse: &SurfaceMesh, map: &[usize], values: &[f64]) -> Vec<f64> {
    coarse.representatives.iter().map(|&r| values[fine.canonical[map[r]]]).collect()
}

/// Writes the mesh in the plain-text exchange format: a header
/// `vertices E F chi`, a column-name comment, one line per raw vertex
/// (`index re im h0` plus extra columns holding per-canonical values), the
/// triangles and the raw → canonical identification.
pub fn write_mesh<W: Write>(out: &mut W, mesh: &SurfaceMesh, extra: &[(&str, &[f64])]) -> Result<()> {
    for (name, values) in extra {
        if values.len() != mesh.vertex_count() {
            return Err(Error::Mesh(format!("column {name} has {} values", values.len())));
        }
    }
    writeln!(
        out,
        "{} {} {} {}",
        mesh.raw_vertex_count(),
        mesh.edge_count(),
        mesh.face_count(),
        mesh.euler_characteristic()
    )?;
    write!(out, "# index re im h0")?;
    for (name, _) in extra {
        write!(out, " {name}")?;
    }
    writeln!(out)?;
    for (v, z) in mesh.positions.iter().enumerate() {
        write!(out, "{v} {:.16e} {:.16e} {:.16e}", z.re, z.im, mesh.raw_background[v])?;
        for (_, values) in extra {
            write!(out, " {:.16e}", values[mesh.canonical[v]])?;
        }
        writeln!(out)?;
    }
    for t in &mesh.triangles {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    for (v, c) in mesh.canonical.iter().enumerate() {
        writeln!(out, "{v} {c}")?;
    }
    Ok(())
}

/// A mesh read back from the text format, with its extra columns.
#[derive(Clone, Debug)]
pub struct MeshFile {
    pub mesh: SurfaceMesh,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl MeshFile {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

fn parse_num<T: std::str::FromStr>(token: Option<&str>, what: &str) -> Result<T> {
    token
        .ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}

/// Reads a mesh written by [`write_mesh`]. Side pairings are not part of the
/// format, so the result supports fields and integrals but not cover graphs.
pub fn read_mesh<R: BufRead>(input: R) -> Result<MeshFile> {
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        lines.next().ok_or_else(|| Error::Parse("unexpected end of file".into()))?.map_err(Error::from)
    };
    let header = next()?;
    let mut tok = header.split_whitespace();
    let nv: usize = parse_num(tok.next(), "vertex count")?;
    let ne: usize = parse_num(tok.next(), "edge count")?;
    let nf: usize = parse_num(tok.next(), "face count")?;
    let chi: i64 = parse_num(tok.next(), "Euler characteristic")?;
    let names_line = next()?;
    let names: Vec<String> = names_line
        .trim_start_matches('#')
        .split_whitespace()
        .skip(4)
        .map(str::to_owned)
        .collect();
    let mut positions = Vec::with_capacity(nv);
    let mut raw_h0 = Vec::with_capacity(nv);
    let mut raw_extra = vec![Vec::with_capacity(nv); names.len()];
    for v in 0..nv {
        let line = next()?;
        let mut tok = line.split_whitespace();
        let index: usize = parse_num(tok.next(), "vertex index")?;
        if index != v {
            return Err(Error::Parse(format!("vertex line {v} has index {index}")));
        }
        let re: f64 = parse_num(tok.next(), "re")?;
        let im: f64 = parse_num(tok.next(), "im")?;
        positions.push(Complex64::new(re, im));
        raw_h0.push(parse_num::<f64>(tok.next(), "h0")?);
        for col in raw_extra.iter_mut() {
            col.push(parse_num::<f64>(tok.next(), "extra column")?);
        }
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = next()?;
        let mut tok = line.split_whitespace();
        triangles.push([
            parse_num(tok.next(), "triangle")?,
            parse_num(tok.next(), "triangle")?,
            parse_num(tok.next(), "triangle")?,
        ]);
    }
    let mut canonical = Vec::with_capacity(nv);
    for v in 0..nv {
        let line = next()?;
        let mut tok = line.split_whitespace();
        let raw: usize = parse_num(tok.next(), "identification")?;
        if raw != v {
            return Err(Error::Parse(format!("identification line {v} names vertex {raw}")));
        }
        canonical.push(parse_num::<usize>(tok.next(), "canonical index")?);
    }
    let kind = if chi == 0 { SurfaceKind::FlatTorus } else { SurfaceKind::Octagon };
    let mut first: HashMap<usize, usize> = HashMap::new();
    let glued: Vec<(usize, usize)> = canonical
        .iter()
        .enumerate()
        .filter_map(|(v, &c)| match first.get(&c) {
            Some(&r) => Some((r, v)),
            None => {
                first.insert(c, v);
                None
            }
        })
        .collect();
    let basepoint = positions
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map_or(0, |(i, _)| i);
    let mesh = SurfaceMesh::from_parts(kind, 0, positions, triangles, &glued, Vec::new(), basepoint)?;
    if mesh.canonical != canonical {
        return Err(Error::Parse("identification is not in canonical first-appearance order".into()));
    }
    if mesh.edge_count() != ne || mesh.euler_characteristic() != chi {
        return Err(Error::Parse(format!(
            "header says E={ne}, chi={chi} but the triangles give E={}, chi={}",
            mesh.edge_count(),
            mesh.euler_characteristic()
        )));
    }
    for (v, (&h, &h_file)) in mesh.raw_background.iter().zip(&raw_h0).enumerate() {
        if (h - h_file).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(Error::Parse(format!("h0 at vertex {v} disagrees with the position")));
        }
    }
    let columns = names
        .into_iter()
        .zip(raw_extra)
        .map(|(name, raw)| {
            let values = mesh.representatives.iter().map(|&r| raw[r]).collect();
            (name, values)
        })
        .collect();
    Ok(MeshFile { mesh, columns })
}
