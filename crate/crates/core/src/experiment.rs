//! The ray experiment: Blaschke metrics of `t·b̂` for a fixed unit cubic
//! differential `b̂`, with areas, the inequality ledger and entropy estimates
//! for each `t`.
//!
//! The Wang equation is solved on a fine mesh (`refine`) and once more one
//! level below it, which measures the discretization tolerance of the area
//! comparisons. Entropy runs on a nested coarser mesh (`cover_refine`); the
//! fine fields restrict to it exactly because refinement levels are nested.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::analysis::{
    area, area_sandwich, check_area_lemma, check_pointwise_bound, comparison_metric, entropy_upper_bound,
    katok_bound, ray_upper_bound, AreaLemmaReport, AreaSandwich, InequalityReport, RayBound,
    ALGEBRAIC_TOLERANCE, HILBERT_CONSTANT_NOTE,
};
use crate::cubic::{differential_norm, flat_metric, poincare_series_with_seed, CubicDifferential, NormKind, Truncation};
use crate::entropy::{
    estimate_entropy, orbit_distances, CoverGraph, EntropyEstimate, Stencil, TileSet, DEFAULT_NODE_CAP,
    DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::fuchsian::{distance_from_origin, octagon_group, GroupBall, DEFAULT_ELEMENT_CAP};
use crate::mesh::{
    assemble_laplacian, build_fundamental_mesh, build_torus_mesh, nested_vertex_map, restrict_canonical,
    MetricField, SurfaceMesh,
};
use crate::wang::{solve_wang_with, ConformalFactorField, WangOptions};

/// Largest refinement level accepted by the experiment.
pub const MAX_REFINE: usize = 8;

/// Largest cover radius accepted for the octagon.
pub const MAX_COVER_RADIUS: f64 = 16.0;

/// Largest lattice half-width accepted for the torus.
pub const MAX_TORUS_DEPTH: usize = 200;

/// Ray parameter from which Newton starts at `max(0, ln(2ψ)/6)`.
pub const WARM_START_T: f64 = 16.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Seed exponent of the Poincaré series, used when `coefficients` is empty.
    pub k: usize,
    /// Seed polynomial, lowest degree first.
    pub coefficients: Vec<Complex64>,
    pub truncation: Truncation,
    /// Level of the mesh the Wang equation is solved on.
    pub refine: usize,
    /// Level of the mesh the cover graphs are built from.
    pub cover_refine: usize,
    /// Octagon covers: tiles `γ` with `d(0, γ·0) ≤ cover_radius`.
    pub cover_radius: f64,
    /// Torus covers: translations with `max(|i|, |j|) ≤ depth`.
    pub depth: usize,
    pub ray: Vec<f64>,
    /// Newton tolerance of the Wang solver.
    pub tol: f64,
    pub window: (f64, f64),
    pub norm: NormKind,
    pub stencil: Stencil,
    pub torus_mode: bool,
    pub node_cap: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 0,
            coefficients: Vec::new(),
            truncation: Truncation::Radius(12.0),
            refine: 5,
            cover_refine: 3,
            cover_radius: 12.0,
            depth: 8,
            ray: vec![0.0, 1.0, 4.0, 16.0, 64.0],
            tol: 1e-10,
            window: DEFAULT_WINDOW,
            norm: NormKind::SupHyperbolic,
            stencil: Stencil::TwoRing,
            torus_mode: false,
            node_cap: DEFAULT_NODE_CAP,
            out: PathBuf::from("out"),
        }
    }
}

fn config_err(key: &str, value: &str) -> Error {
    Error::Config(format!("cannot parse {key} = {value:?}"))
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| config_err(key, value))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// `length:L`, `radius:R`, or a bare number meaning a radius.
pub fn parse_truncation(value: &str) -> Result<Truncation> {
    let v = value.trim();
    if let Some(l) = v.strip_prefix("length:") {
        Ok(Truncation::WordLength(parse_value("truncation", l)?))
    } else if let Some(r) = v.strip_prefix("radius:") {
        Ok(Truncation::Radius(parse_value("truncation", r)?))
    } else {
        Ok(Truncation::Radius(parse_value("truncation", v)?))
    }
}

pub fn parse_norm(value: &str) -> Result<NormKind> {
    match value.trim() {
        "sup-hyperbolic" => Ok(NormKind::SupHyperbolic),
        "flat-area" => Ok(NormKind::FlatArea),
        _ => Err(config_err("norm", value)),
    }
}

pub fn parse_stencil(value: &str) -> Result<Stencil> {
    match value.trim() {
        "edges" => Ok(Stencil::Edges),
        "two-ring" => Ok(Stencil::TwoRing),
        _ => Err(config_err("stencil", value)),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(config_err(key, value)),
    }
}

/// Complex coefficients as `re im` pairs separated by commas.
fn parse_coefficients(value: &str) -> Result<Vec<Complex64>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let parts: Vec<&str> = pair.split_whitespace().collect();
            match parts.as_slice() {
                [re] => Ok(Complex64::new(parse_value("coefficients", re)?, 0.0)),
                [re, im] => Ok(Complex64::new(parse_value("coefficients", re)?, parse_value("coefficients", im)?)),
                _ => Err(config_err("coefficients", pair)),
            }
        })
        .collect()
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "k" => self.k = parse_value(key, value)?,
            "coefficients" => self.coefficients = parse_coefficients(value)?,
            "truncation" => self.truncation = parse_truncation(value)?,
            "refine" => self.refine = parse_value(key, value)?,
            "cover_refine" => self.cover_refine = parse_value(key, value)?,
            "cover_radius" => self.cover_radius = parse_value(key, value)?,
            "depth" => self.depth = parse_value(key, value)?,
            "ray" => self.ray = parse_list(key, value)?,
            "tol" => self.tol = parse_value(key, value)?,
            "window" => match parse_list(key, value)?.as_slice() {
                &[lo, hi] => self.window = (lo, hi),
                _ => return Err(config_err(key, value)),
            },
            "norm" => self.norm = parse_norm(value)?,
            "stencil" => self.stencil = parse_stencil(value)?,
            "torus_mode" => self.torus_mode = parse_bool(key, value)?,
            "node_cap" => self.node_cap = parse_value(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Reads flat `key = value` lines over the current values. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.ray.is_empty() {
            return bad("ray schedule is empty".into());
        }
        if self.ray.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad(format!("ray values {:?} must be finite and ≥ 0", self.ray));
        }
        if self.ray.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("ray schedule {:?} is not strictly increasing", self.ray));
        }
        if self.refine < 1 || self.refine > MAX_REFINE {
            return bad(format!("refine {} outside 1..={MAX_REFINE}", self.refine));
        }
        if self.cover_refine > self.refine {
            return bad(format!("cover_refine {} exceeds refine {}", self.cover_refine, self.refine));
        }
        if !(self.cover_radius > 0.0 && self.cover_radius <= MAX_COVER_RADIUS) {
            return bad(format!("cover_radius {} outside (0, {MAX_COVER_RADIUS}]", self.cover_radius));
        }
        if self.depth < 1 || self.depth > MAX_TORUS_DEPTH {
            return bad(format!("depth {} outside 1..={MAX_TORUS_DEPTH}", self.depth));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol {} must be positive", self.tol));
        }
        let (lo, hi) = self.window;
        if !(0.0 < lo && lo < hi && hi <= 1.0) {
            return bad(format!("window ({lo}, {hi}) is not inside (0, 1]"));
        }
        if self.coefficients.is_empty() && self.k >= 5 {
            return bad(format!("seed exponent k = {} must be < 5", self.k));
        }
        self.truncation.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// The settings as `key = value` lines that [`apply_text`](Self::apply_text) reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let coeffs: Vec<String> = self.coefficients.iter().map(|c| format!("{} {}", c.re, c.im)).collect();
        let ray: Vec<String> = self.ray.iter().map(f64::to_string).collect();
        let truncation = match self.truncation {
            Truncation::WordLength(l) => format!("length:{l}"),
            Truncation::Radius(r) => format!("radius:{r}"),
        };
        let stencil = match self.stencil {
            Stencil::Edges => "edges",
            Stencil::TwoRing => "two-ring",
        };
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "coefficients = {}", coeffs.join(", "));
        let _ = writeln!(s, "truncation = {truncation}");
        let _ = writeln!(s, "refine = {}", self.refine);
        let _ = writeln!(s, "cover_refine = {}", self.cover_refine);
        let _ = writeln!(s, "cover_radius = {}", self.cover_radius);
        let _ = writeln!(s, "depth = {}", self.depth);
        let _ = writeln!(s, "ray = {}", ray.join(","));
        let _ = writeln!(s, "tol = {:e}", self.tol);
        let _ = writeln!(s, "window = {},{}", self.window.0, self.window.1);
        let _ = writeln!(s, "norm = {}", self.norm.label());
        let _ = writeln!(s, "stencil = {stencil}");
        let _ = writeln!(s, "torus_mode = {}", self.torus_mode);
        let _ = writeln!(s, "node_cap = {}", self.node_cap);
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }
}

/// One `t` of the ray. Numeric fields are NaN when they do not apply (for
/// example the ray bound at `t = 0`) or when the row failed.
#[derive(Clone, Debug)]
pub struct RayReportRow {
    pub t: f64,
    pub norm_b: f64,
    pub area_blaschke: f64,
    pub area_flat: f64,
    pub katok_lower: f64,
    pub ray_bound: Option<RayBound>,
    pub entropy_blaschke: Option<EntropyEstimate>,
    pub entropy_flat: Option<EntropyEstimate>,
    pub pointwise: Option<InequalityReport>,
    pub lemma: Option<AreaLemmaReport>,
    /// Identity residual of the solve one level below `refine`.
    pub coarse_identity_residual: f64,
    pub sandwich: Option<AreaSandwich>,
    /// Entropy upper bound fed to the sandwich.
    pub entropy_upper: f64,
    pub solver_iterations: usize,
    pub max_factor: f64,
    pub error: Option<String>,
}

impl RayReportRow {
    fn failed(t: f64, err: &Error) -> Self {
        Self {
            t,
            norm_b: f64::NAN,
            area_blaschke: f64::NAN,
            area_flat: f64::NAN,
            katok_lower: f64::NAN,
            ray_bound: None,
            entropy_blaschke: None,
            entropy_flat: None,
            pointwise: None,
            lemma: None,
            coarse_identity_residual: f64::NAN,
            sandwich: None,
            entropy_upper: f64::NAN,
            solver_iterations: 0,
            max_factor: f64::NAN,
            error: Some(err.to_string()),
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    pub fn entropy_blaschke_value(&self) -> f64 {
        self.entropy_blaschke.as_ref().map_or(f64::NAN, |e| e.slope)
    }

    pub fn entropy_flat_value(&self) -> f64 {
        self.entropy_flat.as_ref().map_or(f64::NAN, |e| e.slope)
    }
}

/// Column names of `ray.csv`, in order.
pub const CSV_COLUMNS: [&str; 19] = [
    "t",
    "normB",
    "areaBlaschke",
    "areaFlat",
    "katokLower",
    "rayUpperBoundQuadraticForm",
    "rayUpperBoundDistance",
    "entropyEstimateBlaschke",
    "entropyEstimateFlat",
    "pointwiseGap",
    "lemmaGap",
    "sandwichGapLower",
    "sandwichGapUpper",
    "solverIterations",
    "horizonBlaschke",
    "pointsInWindowBlaschke",
    "lowCountBlaschke",
    "stderrBlaschke",
    "status",
];

/// Shared state of one experiment: meshes, the unit differential on the
/// fine mesh and the cover tiles.
pub struct RayContext {
    pub config: ExperimentConfig,
    pub fine: SurfaceMesh,
    pub half: SurfaceMesh,
    pub cover: SurfaceMesh,
    half_map: Vec<usize>,
    cover_map: Vec<usize>,
    /// Unit-norm differential on the fine mesh.
    pub unit: CubicDifferential,
    /// Norm of `unit` in the norm that was not chosen.
    pub other_norm: f64,
    /// The raw series before normalisation.
    pub raw_norm: f64,
    tiles: TileSet,
    ball: Option<GroupBall>,
}

fn restrict_differential(coarse: &SurfaceMesh, map: &[usize], b: &CubicDifferential) -> CubicDifferential {
    CubicDifferential::from_samples(coarse, map.iter().map(|&i| b.samples[i]).collect())
}

impl RayContext {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let group = octagon_group();
        let build = |level: usize| {
            if config.torus_mode {
                build_torus_mesh(level)
            } else {
                build_fundamental_mesh(&group, level)
            }
        };
        let fine = build(config.refine)?;
        let half = build(config.refine - 1)?;
        let cover = build(config.cover_refine)?;
        let half_map = nested_vertex_map(&fine, &half)?;
        let cover_map = nested_vertex_map(&fine, &cover)?;

        let raw = if config.torus_mode {
            CubicDifferential::constant(&fine, Complex64::new(1.0, 0.0))?
        } else {
            let seed =
                if config.coefficients.is_empty() { crate::cubic::basis_seed(config.k, 0) } else { config.coefficients.clone() };
            poincare_series_with_seed(&group, &seed, config.truncation, &fine)?
        };
        let raw_norm = differential_norm(&fine, &raw, config.norm);
        if !(raw_norm > 0.0) {
            return Err(Error::Domain("the seed produces a vanishing differential".into()));
        }
        let unit = raw.scaled(Complex64::new(1.0 / raw_norm, 0.0));
        let other = match config.norm {
            NormKind::SupHyperbolic => NormKind::FlatArea,
            NormKind::FlatArea => NormKind::SupHyperbolic,
        };
        let other_norm = differential_norm(&fine, &unit, other);
        let (tiles, ball) = if config.torus_mode {
            (TileSet::lattice(config.depth), None)
        } else {
            let ball = GroupBall::enumerate_within(&group, config.cover_radius, DEFAULT_ELEMENT_CAP)?;
            (TileSet::from_ball(&ball), Some(ball))
        };
        log::info!(
            "meshes: solve level {} ({} vertices), cover level {} ({} vertices), {} tiles",
            config.refine,
            fine.vertex_count(),
            config.cover_refine,
            cover.vertex_count(),
            tiles.len()
        );
        Ok(Self { config, fine, half, cover, half_map, cover_map, unit, other_norm, raw_norm, tiles, ball })
    }

    /// The cover graph of a metric on the cover mesh.
    pub fn graph(&self, g: &MetricField) -> Result<CoverGraph> {
        Ok(CoverGraph::with_stencil(&self.cover, g, self.tiles.clone(), self.config.stencil)?
            .with_node_cap(self.config.node_cap))
    }

    pub fn entropy(&self, g: &MetricField) -> Result<EntropyEstimate> {
        let orbit = orbit_distances(&self.graph(g)?)?;
        estimate_entropy(&orbit.trusted(), orbit.horizon, self.config.window)
    }

    /// Largest ratio of graph distance to exact distance over trusted orbit
    /// points of the background metric. Only the octagon has exact values;
    /// the torus reports 1.
    pub fn distance_distortion(&self) -> Result<f64> {
        let Some(ball) = &self.ball else { return Ok(1.0) };
        let orbit = orbit_distances(&self.graph(&MetricField::background(&self.cover))?)?;
        let origin = Complex64::new(0.0, 0.0);
        Ok(orbit
            .distances
            .iter()
            .filter(|&&(_, d)| d < orbit.horizon)
            .filter_map(|&(tile, d)| {
                let exact = distance_from_origin(ball.elements()[tile].map(origin).norm());
                (exact > 0.0).then(|| d / exact)
            })
            .fold(1.0, f64::max))
    }

    /// Entropy of `|b̂|^{2/3}`, the value of `M` on this ray.
    pub fn sphere_entropy(&self) -> Result<EntropyEstimate> {
        let b = restrict_differential(&self.cover, &self.cover_map, &self.unit);
        self.entropy(&flat_metric(&self.cover, &b, 1.0)?)
    }

    /// Newton from `u ≡ 0`, or from the large-`t` asymptotic when `t ≥ 16`.
    fn solve(&self, mesh: &SurfaceMesh, b: &CubicDifferential, t: f64) -> Result<ConformalFactorField> {
        let options = WangOptions { tol: self.config.tol, warm_start: t >= WARM_START_T, ..WangOptions::default() };
        solve_wang_with(mesh, &assemble_laplacian(mesh), b, &options, None)
    }

    /// `t·b̂` on the fine mesh.
    pub fn differential(&self, t: f64) -> CubicDifferential {
        self.unit.scaled(Complex64::new(t, 0.0))
    }

    /// Solves the Wang equation for `t·b̂` on the fine mesh.
    pub fn solve_fine(&self, t: f64) -> Result<ConformalFactorField> {
        self.solve(&self.fine, &self.differential(t), t)
    }

    /// The Blaschke metric of a fine solution, restricted to the cover mesh.
    pub fn cover_blaschke(&self, solution: &ConformalFactorField) -> Result<MetricField> {
        let ratio: Vec<f64> = solution.u.iter().map(|u| (2.0 * u).exp()).collect();
        MetricField::from_ratio(&self.cover, &restrict_canonical(&self.fine, &self.cover, &self.cover_map, &ratio))
    }

    /// `2^{1/3}|t·b̂|^{2/3}` on the cover mesh.
    pub fn cover_flat(&self, t: f64) -> Result<MetricField> {
        let b = restrict_differential(&self.cover, &self.cover_map, &self.differential(t));
        comparison_metric(&self.cover, &b)
    }

    /// All measurements for one `t`.
    pub fn row(&self, t: f64, m_sphere: f64, distortion: f64) -> Result<RayReportRow> {
        let b = self.differential(t);
        let sol = self.solve(&self.fine, &b, t)?;
        let b_half = restrict_differential(&self.half, &self.half_map, &b);
        let sol_half = self.solve(&self.half, &b_half, t)?;

        let lemma_half = check_area_lemma(&self.half, &sol_half, &b_half, 0.0)?;
        let lemma_probe = check_area_lemma(&self.fine, &sol, &b, 0.0)?;
        let mesh_tolerance = (lemma_probe.report.gap - lemma_half.report.gap).abs().max(ALGEBRAIC_TOLERANCE);
        let lemma = check_area_lemma(&self.fine, &sol, &b, mesh_tolerance)?;
        let pointwise = check_pointwise_bound(&self.fine, &sol, &b)?;
        let blaschke = sol.metric(&self.fine)?;
        let area_blaschke = area(&self.fine, &blaschke);
        let area_flat = area(&self.fine, &comparison_metric(&self.fine, &b)?);
        let katok_lower = katok_bound(area_blaschke, self.fine.euler_characteristic())?;

        let entropy_blaschke = self.entropy(&self.cover_blaschke(&sol)?)?;
        let (entropy_flat, ray_bound) = if t > 0.0 {
            let flat = self.entropy(&self.cover_flat(t)?)?;
            (Some(flat), Some(ray_upper_bound(t, m_sphere)?))
        } else {
            (None, None)
        };
        let entropy_upper = entropy_upper_bound(entropy_blaschke.slope, entropy_blaschke.stderr, distortion);
        let sandwich = area_sandwich(&self.fine, &sol, &b, entropy_upper, mesh_tolerance)?;

        Ok(RayReportRow {
            t,
            norm_b: t,
            area_blaschke,
            area_flat,
            katok_lower,
            ray_bound,
            entropy_blaschke: Some(entropy_blaschke),
            entropy_flat,
            pointwise: Some(pointwise),
            lemma: Some(lemma),
            coarse_identity_residual: lemma_half.identity_residual,
            sandwich: Some(sandwich),
            entropy_upper,
            solver_iterations: sol.iterations,
            max_factor: blaschke.max_factor(),
            error: None,
        })
    }
}

/// Constants measured once per experiment.
#[derive(Clone, Debug)]
pub struct RaySummary {
    pub m_sphere: f64,
    pub distortion: f64,
    pub norm: NormKind,
    pub raw_norm: f64,
    pub other_norm: f64,
    pub rows: Vec<RayReportRow>,
    pub config: ExperimentConfig,
}

/// Runs the whole ray. Configuration errors abort; a failing `t` becomes an
/// error row and the remaining values still run.
pub fn run_ray_experiment(cfg: &ExperimentConfig) -> Result<RaySummary> {
    run_ray_experiment_with(cfg, |_| {})
}

pub fn run_ray_experiment_with(cfg: &ExperimentConfig, mut on_row: impl FnMut(&RayReportRow)) -> Result<RaySummary> {
    cfg.validate()?;
    let ctx = RayContext::new(cfg.clone())?;
    let m_sphere = ctx.sphere_entropy()?.slope;
    let distortion = ctx.distance_distortion()?;
    log::info!("M = {m_sphere:.6}, distance distortion {distortion:.6}");
    let mut rows = Vec::with_capacity(cfg.ray.len());
    for &t in &cfg.ray {
        let row = ctx.row(t, m_sphere, distortion).unwrap_or_else(|e| {
            log::warn!("t = {t}: {e}");
            RayReportRow::failed(t, &e)
        });
        log::info!(
            "t = {t}: entropy {:.6}, area {:.6}, {} Newton steps",
            row.entropy_blaschke_value(),
            row.area_blaschke,
            row.solver_iterations
        );
        on_row(&row);
        rows.push(row);
    }
    Ok(RaySummary {
        m_sphere,
        distortion,
        norm: cfg.norm,
        raw_norm: ctx.raw_norm,
        other_norm: ctx.other_norm,
        rows,
        config: cfg.clone(),
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_line(row: &RayReportRow) -> String {
    let gap = |r: Option<&InequalityReport>| r.map_or(f64::NAN, |r| r.gap);
    let eb = row.entropy_blaschke.as_ref();
    let status = match &row.error {
        None => "ok".to_string(),
        Some(e) => format!("error: {}", e.replace([',', '\n', '\r'], ";")),
    };
    let fields = [
        num(row.t),
        num(row.norm_b),
        num(row.area_blaschke),
        num(row.area_flat),
        num(row.katok_lower),
        num(row.ray_bound.map_or(f64::NAN, |b| b.quadratic_form)),
        num(row.ray_bound.map_or(f64::NAN, |b| b.distance)),
        num(row.entropy_blaschke_value()),
        num(row.entropy_flat_value()),
        num(gap(row.pointwise.as_ref())),
        num(gap(row.lemma.as_ref().map(|l| &l.report))),
        num(gap(row.sandwich.as_ref().map(|s| &s.lower))),
        num(gap(row.sandwich.as_ref().map(|s| &s.upper))),
        row.solver_iterations.to_string(),
        num(eb.map_or(f64::NAN, |e| e.horizon)),
        eb.map_or(0, |e| e.points_in_window).to_string(),
        eb.map_or(true, |e| e.low_count()).to_string(),
        num(eb.map_or(f64::NAN, |e| e.stderr)),
        status,
    ];
    fields.join(",")
}

/// The CSV text for a set of rows.
pub fn csv_text(rows: &[RayReportRow]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&csv_line(row));
        s.push('\n');
    }
    s
}

fn report_text(summary: &RaySummary) -> Result<String> {
    let mut out = Vec::new();
    writeln!(out, "# ray experiment ledger")?;
    writeln!(out, "# {HILBERT_CONSTANT_NOTE}")?;
    writeln!(out, "# Entropy values are finite-radius fits, reported with horizon diagnostics, never as certified limits.")?;
    writeln!(out, "# tolerance classes: algebraic {ALGEBRAIC_TOLERANCE:e}; discretization measured by comparing refine and refine-1; estimator from the fit")?;
    writeln!(out)?;
    writeln!(out, "[config]")?;
    write!(out, "{}", summary.config.to_text())?;
    writeln!(out)?;
    writeln!(out, "[ray]")?;
    writeln!(out, "norm={}", summary.norm.label())?;
    writeln!(out, "raw_norm={}", num(summary.raw_norm))?;
    writeln!(out, "unit_other_norm={}", num(summary.other_norm))?;
    writeln!(out, "m_sphere={}", num(summary.m_sphere))?;
    writeln!(out, "distance_distortion={}", num(summary.distortion))?;
    for row in &summary.rows {
        writeln!(out)?;
        writeln!(out, "[t={}]", row.t)?;
        if let Some(e) = &row.error {
            writeln!(out, "error={e}")?;
            continue;
        }
        writeln!(out, "solver_iterations={}", row.solver_iterations)?;
        writeln!(out, "max_factor={}", num(row.max_factor))?;
        writeln!(out, "katok_lower={}", num(row.katok_lower))?;
        writeln!(out, "entropy_upper={}", num(row.entropy_upper))?;
        if let Some(e) = &row.entropy_blaschke {
            writeln!(out, "entropy_blaschke={} stderr={} horizon={} window_points={} low_count={}",
                num(e.slope), num(e.stderr), num(e.horizon), e.points_in_window, e.low_count())?;
        }
        if let Some(e) = &row.entropy_flat {
            writeln!(out, "entropy_flat={} stderr={} horizon={} window_points={} low_count={}",
                num(e.slope), num(e.stderr), num(e.horizon), e.points_in_window, e.low_count())?;
        }
        if let Some(b) = row.ray_bound {
            writeln!(out, "ray_bound.quadratic_form={}", num(b.quadratic_form))?;
            writeln!(out, "ray_bound.distance={}", num(b.distance))?;
        }
        if let Some(p) = &row.pointwise {
            p.write_block(&mut out)?;
        }
        if let Some(l) = &row.lemma {
            l.report.write_block(&mut out)?;
            writeln!(out, "identity_residual={}", num(l.identity_residual))?;
            writeln!(out, "identity_residual_coarse={}", num(row.coarse_identity_residual))?;
        }
        if let Some(s) = &row.sandwich {
            s.lower.write_block(&mut out)?;
            s.upper.write_block(&mut out)?;
        }
    }
    Ok(String::from_utf8(out).expect("report is UTF-8"))
}

/// Log-log polyline of the entropy estimates against `‖b‖`, one line for
/// the Blaschke metric and one for the flat metric. `None` with fewer than
/// two usable points.
pub fn entropy_svg(rows: &[RayReportRow]) -> Option<String> {
    let series = |f: &dyn Fn(&RayReportRow) -> f64| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.error.is_none() && r.norm_b > 0.0)
            .map(|r| (r.norm_b.ln(), f(r)))
            .filter(|(_, e)| e.is_finite() && *e > 0.0)
            .map(|(x, e)| (x, e.ln()))
            .collect()
    };
    let blaschke = series(&|r| r.entropy_blaschke_value());
    let flat = series(&|r| r.entropy_flat_value());
    if blaschke.len() < 2 {
        return None;
    }
    let all: Vec<&(f64, f64)> = blaschke.iter().chain(&flat).collect();
    let (xmin, xmax) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (ymin, ymax) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let sx = |x: f64| pad + (x - xmin) / (xmax - xmin).max(1e-12) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - ymin) / (ymax - ymin).max(1e-12) * (h - 2.0 * pad);
    let points = |s: &[(f64, f64)]| s.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect::<Vec<_>>().join(" ");
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - pad, w - pad, h - pad);
    let _ = writeln!(svg, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">log ‖b‖ [{xmin:.3}, {xmax:.3}]</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(svg, r#"<text x="14" y="{}" font-size="14" transform="rotate(-90 14 {})" text-anchor="middle">log entropy [{ymin:.3}, {ymax:.3}]</text>"#, h / 2.0, h / 2.0);
    let _ = writeln!(svg, r#"<polyline fill="none" stroke="navy" stroke-width="2" points="{}"/>"#, points(&blaschke));
    if flat.len() >= 2 {
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="darkred" stroke-width="2" stroke-dasharray="6 4" points="{}"/>"#, points(&flat));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12" fill="navy">Blaschke</text>"#, w - pad - 90.0, pad);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12" fill="darkred">flat</text>"#, w - pad - 90.0, pad + 16.0);
    svg.push_str("</svg>\n");
    Some(svg)
}

/// Writes `ray.csv`, `report.txt` and, when there are enough points,
/// `entropy_vs_norm.svg` into `dir`.
pub fn emit_report(summary: &RaySummary, dir: &Path) -> Result<Vec<PathBuf>> {
    if summary.rows.is_empty() {
        return Err(Error::Domain("no rows to report".into()));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = dir.join("ray.csv");
    fs::write(&csv, csv_text(&summary.rows))?;
    written.push(csv);
    let report = dir.join("report.txt");
    fs::write(&report, report_text(summary)?)?;
    written.push(report);
    if let Some(svg) = entropy_svg(&summary.rows) {
        let path = dir.join("entropy_vs_norm.svg");
        fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}
