//! Volume entropy by orbit counting in a discretised universal cover.
//!
//! The cover is a union of tiles, one copy of the fundamental mesh per deck
//! group element, glued along paired sides by zero-length edges. Distances
//! are graph distances along mesh edges weighted by the metric. Tiles are
//! enumerated to a fixed word length, but node storage is allocated lazily
//! as Dijkstra reaches a tile, so the cost is governed by the ball actually
//! explored rather than by the number of enumerated tiles.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use ordered_float::OrderedFloat;

use crate::error::{Error, Result};
use crate::fuchsian::{octagon_group, GroupBall, DEFAULT_ELEMENT_CAP};
use crate::mesh::{MetricField, SurfaceKind, SurfaceMesh};

/// Default number of node distances a single search may allocate.
pub const DEFAULT_NODE_CAP: usize = 60_000_000;

/// Default fit window as fractions of the horizon radius.
pub const DEFAULT_WINDOW: (f64, f64) = (0.4, 0.9);

/// Orbit points wanted inside the fit window before an estimate is trusted.
pub const WINDOW_POINT_TARGET: usize = 50;

const GRID_POINTS: usize = 64;
const NONE: u32 = u32::MAX;

/// Deck-group tiles of the cover with their side adjacency.
#[derive(Clone, Debug)]
pub struct TileSet {
    side_count: usize,
    neighbors: Vec<u32>,
    depth: Vec<u32>,
    max_depth: usize,
}

impl TileSet {
    /// Octagon: all group elements of word length ≤ `depth`.
    /// Torus: translations `(i, j)` with `max(|i|, |j|) ≤ depth`.
    pub fn for_mesh(mesh: &SurfaceMesh, depth: usize) -> Result<Self> {
        match mesh.kind() {
            SurfaceKind::Octagon => {
                let ball = GroupBall::enumerate(&octagon_group(), depth, DEFAULT_ELEMENT_CAP)?;
                Ok(Self::from_ball(&ball))
            }
            SurfaceKind::FlatTorus => Ok(Self::lattice(depth)),
        }
    }

    pub fn from_ball(ball: &GroupBall) -> Self {
        let mut neighbors = Vec::with_capacity(ball.len() * 8);
        for t in 0..ball.len() {
            for g in 0..8u8 {
                neighbors.push(ball.right_neighbor(t, g).map_or(NONE, |j| j as u32));
            }
        }
        let depth = (0..ball.len()).map(|t| ball.word_length(t) as u32).collect();
        Self { side_count: 8, neighbors, depth, max_depth: ball.max_length() }
    }

    /// Square block of torus translations; side order bottom, right, top, left.
    pub fn lattice(depth: usize) -> Self {
        let d = depth as i64;
        let mut cells: Vec<(i64, i64)> = (-d..=d).flat_map(|j| (-d..=d).map(move |i| (i, j))).collect();
        cells.sort_by_key(|&(i, j)| (i.abs().max(j.abs()), j, i));
        let index = |i: i64, j: i64| -> u32 {
            if i.abs() > d || j.abs() > d {
                return NONE;
            }
            cells.iter().position(|&c| c == (i, j)).unwrap() as u32
        };
        let mut neighbors = Vec::with_capacity(cells.len() * 4);
        for &(i, j) in &cells {
            neighbors.extend([index(i, j - 1), index(i + 1, j), index(i, j + 1), index(i - 1, j)]);
        }
        let depth_of = cells.iter().map(|&(i, j)| i.abs().max(j.abs()) as u32).collect();
        Self { side_count: 4, neighbors, depth: depth_of, max_depth: depth }
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Word length (or lattice radius) of a tile.
    pub fn depth(&self, tile: usize) -> usize {
        self.depth[tile] as usize
    }

    pub fn neighbor(&self, tile: usize, side: usize) -> Option<usize> {
        let j = self.neighbors[tile * self.side_count + side];
        (j != NONE).then_some(j as usize)
    }
}

/// Weighted graph on (tile, raw mesh vertex) pairs.
#[derive(Clone, Debug)]
pub struct CoverGraph {
    tiles: TileSet,
    raw_count: usize,
    adj_offsets: Vec<usize>,
    adj_targets: Vec<u32>,
    adj_weights: Vec<f64>,
    glue_offsets: Vec<usize>,
    glue: Vec<(u8, u32)>,
    basepoint: usize,
    node_cap: usize,
}

/// Builds the cover graph of `mesh` with metric `g` over all tiles of depth
/// at most `depth`.
pub fn build_cover_graph(mesh: &SurfaceMesh, g: &MetricField, depth: usize) -> Result<CoverGraph> {
    if depth < 1 {
        return Err(Error::Graph("cover depth must be at least 1".into()));
    }
    let tiles = TileSet::for_mesh(mesh, depth)?;
    CoverGraph::new(mesh, g, tiles)
}

/// Which vertex pairs inside a tile are joined by weighted edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// Mesh edges only.
    Edges,
    /// Mesh edges plus chords to every vertex two edges away, which adds
    /// edge directions and lowers the path-length bias of a triangle lattice.
    TwoRing,
}

impl CoverGraph {
    pub fn new(mesh: &SurfaceMesh, g: &MetricField, tiles: TileSet) -> Result<Self> {
        Self::with_stencil(mesh, g, tiles, Stencil::Edges)
    }

    pub fn with_stencil(mesh: &SurfaceMesh, g: &MetricField, tiles: TileSet, stencil: Stencil) -> Result<Self> {
        let sides = mesh.sides();
        if sides.len() != tiles.side_count {
            return Err(Error::Graph(format!(
                "mesh has {} paired sides but the tiling expects {}",
                sides.len(),
                tiles.side_count
            )));
        }
        if g.factor.len() != mesh.vertex_count() {
            return Err(Error::Graph("metric does not match the mesh".into()));
        }
        let raw_count = mesh.raw_vertex_count();
        let ratio = g.ratio(mesh);
        let root: Vec<f64> = (0..raw_count)
            .map(|v| (ratio[mesh.canonical()[v]] * mesh.raw_background()[v]).sqrt())
            .collect();
        let pos = mesh.raw_positions();

        let mut ring: Vec<Vec<usize>> = vec![Vec::new(); raw_count];
        for (a, b) in mesh.raw_edges() {
            ring[a].push(b);
            ring[b].push(a);
        }
        let mut pairs: Vec<(usize, usize)> = mesh.raw_edges();
        if stencil == Stencil::TwoRing {
            for (v, near) in ring.iter().enumerate() {
                for &w in near {
                    for &x in &ring[w] {
                        if x > v && !near.contains(&x) {
                            pairs.push((v, x));
                        }
                    }
                }
            }
            pairs.sort_unstable();
            pairs.dedup();
        }
        let mut lists: Vec<Vec<(u32, f64)>> = vec![Vec::new(); raw_count];
        for (a, b) in pairs {
            let w = (pos[a] - pos[b]).norm() * 0.5 * (root[a] + root[b]);
            if !w.is_finite() {
                return Err(Error::Graph(format!("edge ({a}, {b}) has non-finite length")));
            }
            lists[a].push((b as u32, w));
            lists[b].push((a as u32, w));
        }
        let mut adj_offsets = Vec::with_capacity(raw_count + 1);
        let mut adj_targets = Vec::new();
        let mut adj_weights = Vec::new();
        adj_offsets.push(0);
        for list in lists {
            for (t, w) in list {
                adj_targets.push(t);
                adj_weights.push(w);
            }
            adj_offsets.push(adj_targets.len());
        }

        let mut glue_lists: Vec<Vec<(u8, u32)>> = vec![Vec::new(); raw_count];
        for (s, side) in sides.iter().enumerate() {
            let partner = sides.get(side.partner).ok_or_else(|| {
                Error::Graph(format!("side {s} is glued to missing side {}", side.partner))
            })?;
            if partner.partner != s || side.partner_vertices.len() != side.vertices.len() {
                return Err(Error::Graph(format!("side {s} has an inconsistent partner")));
            }
            for (&v, &w) in side.vertices.iter().zip(&side.partner_vertices) {
                if !partner.vertices.contains(&w) {
                    return Err(Error::Graph(format!(
                        "boundary vertex {v} on side {s} has no glued partner on side {}",
                        side.partner
                    )));
                }
                glue_lists[v].push((s as u8, w as u32));
            }
        }
        let mut glue_offsets = Vec::with_capacity(raw_count + 1);
        let mut glue = Vec::new();
        glue_offsets.push(0);
        for list in glue_lists {
            glue.extend(list);
            glue_offsets.push(glue.len());
        }

        Ok(Self {
            tiles,
            raw_count,
            adj_offsets,
            adj_targets,
            adj_weights,
            glue_offsets,
            glue,
            basepoint: mesh.basepoint(),
            node_cap: DEFAULT_NODE_CAP,
        })
    }

    pub fn with_node_cap(mut self, cap: usize) -> Self {
        self.node_cap = cap;
        self
    }

    pub fn tiles(&self) -> &TileSet {
        &self.tiles
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn raw_vertex_count(&self) -> usize {
        self.raw_count
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    /// Node index of `(tile, raw vertex)`.
    pub fn node(&self, tile: usize, vertex: usize) -> usize {
        tile * self.raw_count + vertex
    }

    /// Mesh edges incident to a raw vertex, with their lengths.
    pub fn mesh_neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.adj_offsets[v]..self.adj_offsets[v + 1];
        self.adj_targets[span.clone()].iter().map(|&t| t as usize).zip(self.adj_weights[span].iter().copied())
    }

    /// Every edge of the graph listed once as `(node, node, length)`. Only
    /// meant for small covers.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for t in 0..self.tiles.len() {
            for v in 0..self.raw_count {
                for (w, len) in self.mesh_neighbors(v) {
                    if v < w {
                        out.push((self.node(t, v), self.node(t, w), len));
                    }
                }
                for &(side, partner) in &self.glue[self.glue_offsets[v]..self.glue_offsets[v + 1]] {
                    if let Some(u) = self.tiles.neighbor(t, side as usize) {
                        let (a, b) = (self.node(t, v), self.node(u, partner as usize));
                        if a < b {
                            out.push((a, b, 0.0));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchLimit {
    /// Stop once every node closer than the horizon is settled.
    Horizon,
    /// Settle every node of the truncated cover.
    Exhaustive,
}

/// Distances from `x₀` to its orbit points.
#[derive(Clone, Debug)]
pub struct OrbitDistances {
    /// `(tile, distance)` for every tile whose basepoint copy was settled.
    pub distances: Vec<(usize, f64)>,
    /// Radius below which every distance equals its value in the full cover.
    pub horizon: f64,
    pub settled_nodes: usize,
    pub allocated_tiles: usize,
}

impl OrbitDistances {
    pub fn distance_to(&self, tile: usize) -> Option<f64> {
        self.distances.iter().find(|(t, _)| *t == tile).map(|&(_, d)| d)
    }

    /// Distances strictly inside the horizon, sorted.
    pub fn trusted(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.distances.iter().map(|&(_, d)| d).filter(|&d| d < self.horizon).collect();
        d.sort_by(f64::total_cmp);
        d
    }
}

/// Shortest-path distances from the basepoint to each tile's basepoint copy,
/// up to the horizon.
pub fn orbit_distances(graph: &CoverGraph) -> Result<OrbitDistances> {
    orbit_distances_with(graph, SearchLimit::Horizon)
}

/// The horizon is the distance to the nearest node on a side whose glued
/// neighbour tile was not enumerated: any path leaving the truncated cover
/// crosses such a node, so shorter distances are unaffected by truncation.
pub fn orbit_distances_with(graph: &CoverGraph, limit: SearchLimit) -> Result<OrbitDistances> {
    let nv = graph.raw_count;
    let mut dist: Vec<Vec<f64>> = vec![Vec::new(); graph.tiles.len()];
    let mut allocated = 0usize;
    let mut heap: BinaryHeap<Reverse<(OrderedFloat<f64>, usize)>> = BinaryHeap::new();
    let mut horizon = f64::INFINITY;
    let mut settled = 0usize;
    let mut tile_distance: Vec<Option<f64>> = vec![None; graph.tiles.len()];

    let mut touch = |dist: &mut Vec<Vec<f64>>, t: usize| -> Result<()> {
        if dist[t].is_empty() {
            allocated += 1;
            if allocated * nv > graph.node_cap {
                return Err(Error::Resource(format!(
                    "cover search needs more than {} nodes",
                    graph.node_cap
                )));
            }
            dist[t] = vec![f64::INFINITY; nv];
        }
        Ok(())
    };

    touch(&mut dist, 0)?;
    dist[0][graph.basepoint] = 0.0;
    heap.push(Reverse((OrderedFloat(0.0), graph.basepoint)));
    while let Some(Reverse((OrderedFloat(d), node))) = heap.pop() {
        let (t, v) = (node / nv, node % nv);
        if d > dist[t][v] {
            continue;
        }
        if limit == SearchLimit::Horizon && d > horizon {
            break;
        }
        settled += 1;
        if v == graph.basepoint {
            tile_distance[t] = Some(d);
        }
        for k in graph.adj_offsets[v]..graph.adj_offsets[v + 1] {
            let w = graph.adj_targets[k] as usize;
            let nd = d + graph.adj_weights[k];
            if nd < dist[t][w] {
                dist[t][w] = nd;
                heap.push(Reverse((OrderedFloat(nd), t * nv + w)));
            }
        }
        for &(side, partner) in &graph.glue[graph.glue_offsets[v]..graph.glue_offsets[v + 1]] {
            match graph.tiles.neighbor(t, side as usize) {
                Some(u) => {
                    touch(&mut dist, u)?;
                    let p = partner as usize;
                    if d < dist[u][p] {
                        dist[u][p] = d;
                        heap.push(Reverse((OrderedFloat(d), u * nv + p)));
                    }
                }
                None => horizon = horizon.min(d),
            }
        }
    }

    let mut distances = Vec::new();
    for (t, d) in tile_distance.iter().enumerate() {
        match d {
            Some(d) => distances.push((t, *d)),
            None if limit == SearchLimit::Exhaustive => {
                return Err(Error::Graph(format!("tile {t} is not connected to the basepoint")));
            }
            None => {}
        }
    }
    distances.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(OrbitDistances { distances, horizon, settled_nodes: settled, allocated_tiles: allocated })
}

/// Exponential growth rate of the orbit counting function.
#[derive(Clone, Debug)]
pub struct EntropyEstimate {
    pub slope: f64,
    pub intercept: f64,
    /// Fit window `[R_lo, R_hi]`.
    pub window: (f64, f64),
    /// `(R, N(R))` on the fit grid.
    pub counts: Vec<(f64, usize)>,
    pub horizon: f64,
    pub stderr: f64,
    /// Orbit points with `R_lo < d ≤ R_hi`.
    pub points_in_window: usize,
    /// Orbit points strictly inside the horizon.
    pub points_below_horizon: usize,
}

impl EntropyEstimate {
    /// True when the window holds fewer orbit points than the reporting target.
    pub fn low_count(&self) -> bool {
        self.points_in_window < WINDOW_POINT_TARGET
    }

    /// Writes the count table as CSV with columns `R,N,logN`.
    pub fn write_counts_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "R,N,logN")?;
        for &(r, n) in &self.counts {
            writeln!(out, "{:.16e},{},{:.16e}", r, n, (n as f64).ln())?;
        }
        Ok(())
    }
}

/// Least-squares slope of `log N(R)` over `[lo·horizon, hi·horizon]`, where
/// `N(R) = #{d ≤ R}` and `window = (lo, hi)`.
pub fn estimate_entropy(distances: &[f64], horizon: f64, window: (f64, f64)) -> Result<EntropyEstimate> {
    let (lo, hi) = window;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InsufficientData(format!("horizon {horizon} is not a positive radius")));
    }
    if !(0.0 < lo && lo < hi && hi <= 1.0) {
        return Err(Error::InsufficientData(format!("window ({lo}, {hi}) is not inside (0, 1]")));
    }
    let (r_lo, r_hi) = (lo * horizon, hi * horizon);
    let mut sorted: Vec<f64> = distances.iter().copied().filter(|d| *d < horizon).collect();
    sorted.sort_by(f64::total_cmp);
    let count = |r: f64| sorted.partition_point(|&d| d <= r);
    if count(r_hi) < 10 {
        return Err(Error::InsufficientData(format!(
            "only {} orbit points below R = {r_hi:.4}",
            count(r_hi)
        )));
    }
    let counts: Vec<(f64, usize)> = (0..GRID_POINTS)
        .map(|j| {
            let r = r_lo + (r_hi - r_lo) * j as f64 / (GRID_POINTS - 1) as f64;
            (r, count(r))
        })
        .collect();
    let n = counts.len() as f64;
    let mean_r = counts.iter().map(|c| c.0).sum::<f64>() / n;
    let mean_y = counts.iter().map(|c| (c.1 as f64).ln()).sum::<f64>() / n;
    let sxx: f64 = counts.iter().map(|c| (c.0 - mean_r).powi(2)).sum();
    let sxy: f64 = counts.iter().map(|c| (c.0 - mean_r) * ((c.1 as f64).ln() - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_r;
    let sse: f64 = counts
        .iter()
        .map(|c| ((c.1 as f64).ln() - intercept - slope * c.0).powi(2))
        .sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(EntropyEstimate {
        slope,
        intercept,
        window: (r_lo, r_hi),
        points_in_window: count(r_hi) - count(r_lo),
        points_below_horizon: sorted.len(),
        counts,
        horizon,
        stderr,
    })
}

/// Builds the cover, runs the search and fits the growth rate.
pub fn entropy_of_metric(
    mesh: &SurfaceMesh,
    g: &MetricField,
    depth: usize,
    window: (f64, f64),
) -> Result<(EntropyEstimate, OrbitDistances)> {
    let graph = build_cover_graph(mesh, g, depth)?;
    let orbit = orbit_distances(&graph)?;
    let estimate = estimate_entropy(&orbit.trusted(), orbit.horizon, window)?;
    Ok((estimate, orbit))
}
