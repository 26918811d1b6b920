use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use projective_entropy::analysis::{
    area, check_area_lemma, check_pointwise_bound, katok_bound, ALGEBRAIC_TOLERANCE, HILBERT_CONSTANT_NOTE,
};
use projective_entropy::cubic::{holomorphy_residual, CubicDifferential};
use projective_entropy::entropy::{estimate_entropy, orbit_distances};
use projective_entropy::experiment::{emit_report, run_ray_experiment_with, ExperimentConfig, RayContext};
use projective_entropy::mesh::{
    assemble_laplacian, build_fundamental_mesh, build_torus_mesh, read_mesh, write_mesh, MetricField,
};
use projective_entropy::fuchsian::octagon_group;
use projective_entropy::wang::{curvature, wang_residual, ConformalFactorField};
use projective_entropy::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Blaschke metrics, cubic differentials and volume entropy on a genus-2 surface")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Experiment settings. A `--config` file is read first, then flags override it.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Flat key = value file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed exponent of the Poincaré series.
    #[arg(long)]
    k: Option<usize>,
    /// `length:L`, `radius:R` or a bare radius.
    #[arg(long)]
    truncation: Option<String>,
    /// Level of the solve mesh.
    #[arg(long)]
    refine: Option<usize>,
    /// Level of the mesh the cover graph is built from.
    #[arg(long)]
    cover_refine: Option<usize>,
    /// Octagon cover: hyperbolic displacement radius of the tiles.
    #[arg(long)]
    cover_radius: Option<f64>,
    /// Torus cover: lattice half-width.
    #[arg(long)]
    depth: Option<usize>,
    /// Ray schedule t1,t2,...
    #[arg(long, value_delimiter = ',')]
    ray: Option<Vec<f64>>,
    /// Newton tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory or file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat torus with a constant differential instead of the octagon.
    #[arg(long)]
    torus_mode: bool,
    /// `sup-hyperbolic` or `flat-area`.
    #[arg(long)]
    norm: Option<String>,
    /// `two-ring` or `edges`.
    #[arg(long)]
    stencil: Option<String>,
    /// Fit window as fractions of the horizon, lo,hi.
    #[arg(long)]
    window: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            match value {
                Some(v) => cfg.set(key, &v),
                None => Ok(()),
            }
        };
        set("k", self.k.map(|v| v.to_string()))?;
        set("truncation", self.truncation.clone())?;
        set("refine", self.refine.map(|v| v.to_string()))?;
        set("cover_refine", self.cover_refine.map(|v| v.to_string()))?;
        set("cover_radius", self.cover_radius.map(|v| v.to_string()))?;
        set("depth", self.depth.map(|v| v.to_string()))?;
        set("ray", self.ray.as_ref().map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(",")))?;
        set("tol", self.tol.map(|v| v.to_string()))?;
        set("out", self.out.as_ref().map(|p| p.display().to_string()))?;
        set("norm", self.norm.clone())?;
        set("stencil", self.stencil.clone())?;
        set("window", self.window.clone())?;
        if self.torus_mode {
            cfg.torus_mode = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricChoice {
    Hyperbolic,
    Flat,
    Blaschke,
}

#[derive(Subcommand)]
enum Command {
    /// One Wang solve for t·b̂ with diagnostics.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// One entropy estimate.
    Entropy {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "hyperbolic")]
        metric: MetricChoice,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Write the R,N,logN table here.
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// The full ray experiment.
    Ray {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Inequality ledger for a field file written by `solve --out`.
    Check {
        input: PathBuf,
        /// Tolerance for the area comparisons.
        #[arg(long, default_value_t = 1e-3)]
        area_tol: f64,
    },
    /// Build a mesh and export it.
    Mesh {
        #[arg(long, default_value_t = 3)]
        refine: usize,
        #[arg(long)]
        torus_mode: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn solve(cfg: ExperimentConfig, t: f64, out: Option<PathBuf>) -> Result<bool> {
    let ctx = RayContext::new(cfg)?;
    let b = ctx.differential(t);
    let sol = ctx.solve_fine(t)?;
    let mesh = &ctx.fine;
    let lap = assemble_laplacian(mesh);
    let kappa = curvature(mesh, &lap, &sol.u);
    let (kmin, kmax) = kappa.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), &k| (a.min(k), c.max(k)));
    let umax = sol.u.iter().fold(0.0f64, |a, u| a.max(u.abs()));
    println!("mesh: {} vertices, chi {}", mesh.vertex_count(), mesh.euler_characteristic());
    println!("differential: transform residual {:.3e}, holomorphy residual {:.3e}", b.transform_residual, holomorphy_residual(mesh, &b));
    println!("newton: {} steps, residual {:.3e}", sol.iterations, sol.final_residual);
    println!("|u|_inf {umax:.6e}, curvature in [{kmin:.6}, {kmax:.6}]");
    println!("wang residual {:.3e}", wang_residual(mesh, &lap, &sol.u, &b)?);
    let blaschke = sol.metric(mesh)?;
    let a = area(mesh, &blaschke);
    println!("area {a:.10}, katok bound {:.6}", katok_bound(a, mesh.euler_characteristic())?);
    let pointwise = check_pointwise_bound(mesh, &sol, &b)?;
    let lemma = check_area_lemma(mesh, &sol, &b, 1e-3)?;
    println!("{pointwise}");
    println!("{}", lemma.report);
    println!("identity residual {:.3e}", lemma.identity_residual);
    if let Some(path) = &out {
        let samples = b.canonical_samples(mesh);
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        let mut out = BufWriter::new(File::create(path)?);
        write_mesh(&mut out, mesh, &[("u", &sol.u), ("re_b", &re), ("im_b", &im)])?;
        out.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(pointwise.holds())
}

fn entropy(cfg: ExperimentConfig, metric: MetricChoice, t: f64, counts: Option<PathBuf>) -> Result<()> {
    let ctx = RayContext::new(cfg)?;
    let g = match metric {
        MetricChoice::Hyperbolic => MetricField::background(&ctx.cover),
        MetricChoice::Flat => ctx.cover_flat(t)?,
        MetricChoice::Blaschke => ctx.cover_blaschke(&ctx.solve_fine(t)?)?,
    };
    let graph = ctx.graph(&g)?;
    let orbit = orbit_distances(&graph)?;
    let est = estimate_entropy(&orbit.trusted(), orbit.horizon, ctx.config.window)?;
    println!("tiles {}, settled nodes {}, horizon {:.6}", graph.tile_count(), orbit.settled_nodes, orbit.horizon);
    println!("entropy {:.6} ± {:.6} over [{:.4}, {:.4}], {} points in window, {} below horizon",
        est.slope, est.stderr, est.window.0, est.window.1, est.points_in_window, est.points_below_horizon);
    if est.low_count() {
        println!("warning: fewer than 50 orbit points in the window");
    }
    if let Some(path) = counts {
        let mut out = BufWriter::new(File::create(&path)?);
        est.write_counts_csv(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn ray(cfg: ExperimentConfig) -> Result<bool> {
    let summary = run_ray_experiment_with(&cfg, |row| match &row.error {
        None => println!(
            "t = {}: entropy {:.6}, flat {:.6}, area {:.6}, pointwise gap {:.3e}",
            row.t,
            row.entropy_blaschke_value(),
            row.entropy_flat_value(),
            row.area_blaschke,
            row.pointwise.as_ref().map_or(f64::NAN, |p| p.gap)
        ),
        Some(e) => println!("t = {}: error: {e}", row.t),
    })?;
    for path in emit_report(&summary, &cfg.out)? {
        println!("wrote {}", path.display());
    }
    Ok(summary.rows.iter().all(|r| !r.is_error()))
}

fn check(input: PathBuf, area_tol: f64) -> Result<bool> {
    let file = read_mesh(BufReader::new(File::open(&input)?))?;
    let column = |name: &str| {
        file.column(name).ok_or_else(|| Error::Parse(format!("{} has no column {name}", input.display())))
    };
    let (u, re, im) = (column("u")?, column("re_b")?, column("im_b")?);
    let mesh = &file.mesh;
    let samples = mesh.canonical().iter().map(|&c| Complex64::new(re[c], im[c])).collect();
    let b = CubicDifferential::from_samples(mesh, samples);
    let sol = ConformalFactorField { u: u.to_vec(), iterations: 0, final_residual: f64::NAN, residual_history: Vec::new() };
    println!("# {HILBERT_CONSTANT_NOTE}");
    let a = area(mesh, &sol.metric(mesh)?);
    println!("area {a:.10}, katok bound {:.6}", katok_bound(a, mesh.euler_characteristic())?);
    let pointwise = check_pointwise_bound(mesh, &sol, &b)?;
    let lemma = check_area_lemma(mesh, &sol, &b, area_tol.max(ALGEBRAIC_TOLERANCE))?;
    let wang = wang_residual(mesh, &assemble_laplacian(mesh), &sol.u, &b)?;
    println!("{pointwise}");
    println!("{}", lemma.report);
    println!("identity residual {:.3e}, wang residual {wang:.3e}", lemma.identity_residual);
    Ok(pointwise.holds() && lemma.report.holds())
}

fn mesh(refine: usize, torus_mode: bool, out: Option<PathBuf>) -> Result<()> {
    let mesh = if torus_mode { build_torus_mesh(refine)? } else { build_fundamental_mesh(&octagon_group(), refine)? };
    eprintln!(
        "{} raw vertices, V {} E {} F {}, chi {}, area {:.10}",
        mesh.raw_vertex_count(),
        mesh.vertex_count(),
        mesh.edge_count(),
        mesh.face_count(),
        mesh.euler_characteristic(),
        area(&mesh, &MetricField::background(&mesh))
    );
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_mesh(&mut w, &mesh, &[])?;
            w.flush()?;
        }
        None => write_mesh(&mut std::io::stdout().lock(), &mesh, &[])?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { cfg, t } => solve(cfg.resolve()?, t, cfg.out.clone()),
        Command::Entropy { cfg, metric, t, counts } => entropy(cfg.resolve()?, metric, t, counts).map(|_| true),
        Command::Ray { cfg } => ray(cfg.resolve()?),
        Command::Check { input, area_tol } => check(input, area_tol),
        Command::Mesh { refine, torus_mode, out } => mesh(refine, torus_mode, out).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
