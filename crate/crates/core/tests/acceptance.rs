//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use projective_entropy::analysis::*;
use projective_entropy::cubic::CubicDifferential;
use projective_entropy::entropy::*;
use projective_entropy::experiment::*;
use projective_entropy::fuchsian::{octagon_group, GroupBall, DEFAULT_ELEMENT_CAP};
use projective_entropy::mesh::*;
use projective_entropy::wang::*;
use projective_entropy::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(checks: &[(&str, bool)], detail: String) -> Self {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
        let detail = if failed.is_empty() { detail } else { format!("failed [{}]; {detail}", failed.join(", ")) };
        Self { pass: failed.is_empty(), detail }
    }
}

fn sup(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn hyperbolic_entropy(mesh: &SurfaceMesh, radius: f64) -> Result<EntropyEstimate> {
    let ball = GroupBall::enumerate_within(&octagon_group(), radius, DEFAULT_ELEMENT_CAP)?;
    let graph = CoverGraph::with_stencil(mesh, &MetricField::background(mesh), TileSet::from_ball(&ball), Stencil::TwoRing)?;
    let orbit = orbit_distances(&graph)?;
    estimate_entropy(&orbit.trusted(), orbit.horizon, DEFAULT_WINDOW)
}

fn criterion_1() -> Result<Outcome> {
    let fine = build_fundamental_mesh(&octagon_group(), 5)?;
    let sol = solve_wang(&fine, &CubicDifferential::zero(&fine), 1e-10)?;
    let u_sup = sup(&sol.u);
    let a = area(&fine, &sol.metric(&fine)?);
    let cover = build_fundamental_mesh(&octagon_group(), 4)?;
    let radii = [8.0, 10.0, 12.0];
    let estimates = radii.iter().map(|&r| hyperbolic_entropy(&cover, r)).collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = estimates.iter().map(|e| (e.slope - 1.0).abs()).collect();
    let last = estimates.last().unwrap();
    let trend: Vec<String> =
        radii.iter().zip(&estimates).map(|(r, e)| format!("R={r}: {:.4} ({} pts)", e.slope, e.points_in_window)).collect();
    Ok(Outcome::new(
        &[
            ("|u| <= 1e-6", u_sup <= 1e-6),
            ("area 4pi +-1%", (a - 4.0 * PI).abs() <= 0.01 * 4.0 * PI),
            ("entropy in [0.8, 1.2]", (0.8..=1.2).contains(&last.slope)),
            ("trend toward 1", errors.windows(2).all(|w| w[1] < w[0])),
        ],
        format!("|u|_inf {u_sup:.1e}, area {a:.5} vs {:.5}, entropy {}", 4.0 * PI, trend.join(", ")),
    ))
}

fn criterion_2() -> Result<Outcome> {
    let torus = build_torus_mesh(4)?;
    let b = CubicDifferential::constant(&torus, Complex64::new(1.0, 0.0))?;
    let sol = solve_wang(&torus, &b, 1e-12)?;
    let expected = 2f64.ln() / 6.0;
    let u_err = sol.u.iter().fold(0.0f64, |m, u| m.max((u - expected).abs()));
    let kappa = sup(&curvature(&torus, &assemble_laplacian(&torus), &sol.u));
    let gap = check_pointwise_bound(&torus, &sol, &b)?.gap;
    Ok(Outcome::new(
        &[("u = ln2/6", u_err <= 1e-8), ("curvature 0", kappa <= 1e-6), ("pointwise gap 0", gap.abs() <= 1e-8)],
        format!("max |u - ln2/6| {u_err:.1e}, max |kappa| {kappa:.1e}, gap {gap:.1e}"),
    ))
}

fn criterion_3(summary: &RaySummary) -> Outcome {
    let mut checks = Vec::new();
    let mut detail = Vec::new();
    for row in summary.rows.iter().filter(|r| r.t >= 1.0) {
        let (Some(p), Some(l), Some(s)) = (&row.pointwise, &row.lemma, &row.sandwich) else {
            checks.push(false);
            detail.push(format!("t={}: {}", row.t, row.error.as_deref().unwrap_or("missing reports")));
            continue;
        };
        checks.extend([
            p.holds(),
            l.report.holds(),
            s.holds(),
            l.identity_residual <= 1e-3,
            l.identity_residual < row.coarse_identity_residual,
        ]);
        detail.push(format!(
            "t={}: pointwise {:.2e} (tol {:.1e}), lemma {:.3} (tol {:.1e}), sandwich {:.3}/{:.3}, identity {:.1e} < {:.1e}",
            row.t,
            p.gap,
            p.tolerance,
            l.report.gap,
            l.report.tolerance,
            s.lower.gap,
            s.upper.gap,
            l.identity_residual,
            row.coarse_identity_residual
        ));
    }
    Outcome::new(&[("ledger", !checks.is_empty() && checks.iter().all(|&c| c))], detail.join("; "))
}

fn criterion_4(summary: &RaySummary) -> Outcome {
    let rows: Vec<&RayReportRow> = summary.rows.iter().filter(|r| r.t >= 1.0 && !r.is_error()).collect();
    let base = summary.rows.iter().find(|r| r.t == 0.0 && !r.is_error());
    let ent = |r: &RayReportRow| r.entropy_blaschke.as_ref().map_or((f64::NAN, f64::NAN), |e| (e.slope, e.stderr));
    let decreasing = rows.windows(2).all(|w| {
        let ((e0, s0), (e1, s1)) = (ent(w[0]), ent(w[1]));
        e1 < e0 + s0.max(s1)
    });
    let strictly = rows.windows(2).all(|w| ent(w[1]).0 < ent(w[0]).0);
    let bounds = rows.windows(2).all(|w| match (w[0].ray_bound, w[1].ray_bound) {
        (Some(a), Some(b)) => b.quadratic_form < a.quadratic_form && b.distance < a.distance,
        _ => false,
    });
    let last = rows.last().map_or(f64::NAN, |r| ent(r).0);
    let e0 = base.map_or(f64::NAN, |r| ent(r).0);
    let series: Vec<String> = summary.rows.iter().map(|r| format!("{}: {:.4}", r.t, ent(r).0)).collect();
    Outcome::new(
        &[
            ("rows", rows.len() == 4),
            ("Blaschke entropy decreasing", decreasing),
            ("ray bounds decreasing", bounds),
            ("last below half of t=0", last < 0.5 * e0),
        ],
        format!("entropy by t {}; strictly decreasing without tolerance: {strictly}; ratio {:.3}", series.join(", "), last / e0),
    )
}

/// Per-tile graph distances for the trusted part of each cover.
fn distances(ctx: &RayContext, g: &MetricField) -> Result<(Vec<Option<f64>>, EntropyEstimate)> {
    let orbit = orbit_distances(&ctx.graph(g)?)?;
    let estimate = estimate_entropy(&orbit.trusted(), orbit.horizon, ctx.config.window)?;
    let tiles = orbit.distances.iter().map(|d| d.0).max().unwrap_or(0) + 1;
    let mut per_tile = vec![None; tiles];
    for &(t, d) in &orbit.distances {
        if d < orbit.horizon {
            per_tile[t] = Some(d);
        }
    }
    Ok((per_tile, estimate))
}

/// Largest violation of `lo·d1 <= d2 <= hi·d1` over tiles trusted in both.
fn ratio_violation(d1: &[Option<f64>], d2: &[Option<f64>], lo: f64, hi: f64) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut compared = 0;
    for (a, b) in d1.iter().zip(d2) {
        if let (Some(a), Some(b)) = (a, b) {
            compared += 1;
            worst = worst.max(lo * a - b).max(b - hi * a);
        }
    }
    (worst, compared)
}

fn criterion_5(summary: &RaySummary) -> Result<Outcome> {
    let ctx = RayContext::new(summary.config.clone())?;
    let sol = ctx.solve_fine(4.0)?;
    let blaschke = ctx.cover_blaschke(&sol)?;
    let flat = ctx.cover_flat(4.0)?;
    let g0 = MetricField::background(&ctx.cover);
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let mut detail = Vec::new();

    // exact scaling of the estimator
    let base = ctx.entropy(&blaschke)?;
    for t in [2.0, 3.0] {
        let scaled = ctx.entropy(&blaschke.scaled(t * t))?;
        let err = (scaled.slope * t / base.slope - 1.0).abs();
        checks.push(("t^2 scaling", err <= 1e-12));
        detail.push(format!("scale {t}: rel err {err:.1e}"));
    }

    // g1 <= g2 pointwise forces d1 <= d2 and Ent(g1) >= Ent(g2)
    let bump = MetricField::new(
        ctx.cover
            .positions()
            .iter()
            .zip(&g0.factor)
            .map(|(z, h)| h * (1.0 + 0.8 * (-z.norm_sqr() / 0.05).exp()))
            .collect(),
    )?;
    let sol1 = ctx.solve_fine(1.0)?;
    let blaschke1 = ctx.cover_blaschke(&sol1)?;
    for (name, small, large) in
        [("g0 <= g0(1+bump)", &g0, &bump), ("flat <= Blaschke", &flat, &blaschke), ("g0 <= Blaschke(t=1)", &g0, &blaschke1)]
    {
        let ordered = small.factor.iter().zip(&large.factor).all(|(a, b)| a <= b);
        let (d1, e1) = distances(&ctx, small)?;
        let (d2, e2) = distances(&ctx, large)?;
        let (violation, compared) = ratio_violation(&d1, &d2, 1.0, f64::INFINITY);
        let tol = 2.0 * (e1.stderr + e2.stderr);
        checks.push(("monotonicity", ordered && violation <= 0.0 && compared > 0 && e2.slope <= e1.slope + tol));
        detail.push(format!("{name}: {:.4} >= {:.4} (tol {tol:.3}), {compared} tiles ordered", e1.slope, e2.slope));
    }

    // random factor perturbations in [a^-2, a^2] give distances within [1/a, a]
    let a: f64 = 1.2;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (name, g) in [("g0", &g0), ("Blaschke", &blaschke), ("flat", &flat)] {
        let perturbed =
            MetricField::new(g.factor.iter().map(|f| f * a.powf(2.0 * rng.gen_range(-1.0..=1.0))).collect())?;
        let (d1, e1) = distances(&ctx, g)?;
        let (d2, e2) = distances(&ctx, &perturbed)?;
        let (violation, compared) = ratio_violation(&d1, &d2, 1.0 / a, a);
        let tol = 2.0 * (e1.stderr + e2.stderr);
        let within = e2.slope >= e1.slope / a - tol && e2.slope <= a * e1.slope + tol;
        checks.push(("quasi-isometry", violation <= 1e-12 && compared > 0 && within));
        detail.push(format!("QI {name}: {:.4} vs {:.4}, distance violation {violation:.1e}", e1.slope, e2.slope));
    }

    // flat entropy along the ray
    let flat_rows: Vec<(f64, &EntropyEstimate)> =
        summary.rows.iter().filter_map(|r| r.entropy_flat.as_ref().map(|e| (r.t, e))).collect();
    if let Some(&(1.0, e1)) = flat_rows.first() {
        let worst = flat_rows.iter().map(|(t, e)| (e.slope * t.cbrt() - e1.slope).abs()).fold(0.0, f64::max);
        checks.push(("flat t^-1/3 law", flat_rows.len() > 1 && worst <= e1.stderr));
        detail.push(format!("flat law worst deviation {worst:.1e} (stderr {:.1e})", e1.stderr));
    } else {
        checks.push(("flat t^-1/3 law", false));
    }
    Ok(Outcome::new(&checks, detail.join("; ")))
}

fn lattice_distance(a: i64, b: i64, h: f64) -> f64 {
    if a.signum() * b.signum() >= 0 {
        let (lo, hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
        h * ((hi - lo) as f64 + lo as f64 * 2f64.sqrt())
    } else {
        h * (a.abs() + b.abs()) as f64
    }
}

fn criterion_6() -> Result<Outcome> {
    let torus = build_torus_mesh(3)?;
    let n = 2i64 << 3;
    let graph = CoverGraph::new(&torus, &MetricField::background(&torus), TileSet::lattice(1))?;
    let orbit = orbit_distances_with(&graph, SearchLimit::Exhaustive)?;
    let mut got: Vec<f64> = orbit.distances.iter().map(|d| d.1).collect();
    let mut expected: Vec<f64> =
        (-1..=1).flat_map(|i| (-1..=1).map(move |j| lattice_distance(i * n, j * n, 1.0 / n as f64))).collect();
    got.sort_by(f64::total_cmp);
    expected.sort_by(f64::total_cmp);
    let torus_err =
        if got.len() == expected.len() { got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) } else { f64::INFINITY };

    let exact = 2.0 * (1.0 + 2f64.sqrt()).acosh();
    let errors = [3usize, 4]
        .iter()
        .map(|&level| {
            let mesh = build_fundamental_mesh(&octagon_group(), level)?;
            let orbit = orbit_distances_with(&build_cover_graph(&mesh, &MetricField::background(&mesh), 1)?, SearchLimit::Exhaustive)?;
            Ok((1..9).map(|t| orbit.distance_to(t).map_or(f64::INFINITY, |d| (d - exact).abs())).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Outcome::new(
        &[("torus oracle", torus_err <= 1e-10), ("length-1 error halves", errors[1] <= 0.5 * errors[0])],
        format!("torus max err {torus_err:.1e}; length-1 tile error {:.2e} -> {:.2e}", errors[0], errors[1]),
    ))
}

fn criterion_7() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let mut csvs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_projective-entropy"))
            .args(["ray", "--refine", "4", "--cover-refine", "2", "--cover-radius", "9", "--truncation", "length:4"])
            .args(["--ray", "1,4,16,64", "--out"])
            .arg(&out)
            .env("RUST_LOG", "warn")
            .output()?;
        csvs.push((status.status.success(), std::fs::read(out.join("ray.csv")).unwrap_or_default()));
    }
    let same = csvs[0].1 == csvs[1].1;
    let rows = String::from_utf8_lossy(&csvs[0].1).lines().count().saturating_sub(1);
    Ok(Outcome::new(
        &[("runs succeed", csvs.iter().all(|c| c.0)), ("four rows", rows == 4), ("identical bytes", same)],
        format!("{rows} rows, {} bytes each, identical: {same}", csvs[0].1.len()),
    ))
}

fn report(n: usize, outcome: Result<Outcome>, started: Instant) -> bool {
    let seconds = started.elapsed().as_secs_f64();
    match outcome {
        Ok(o) => {
            println!("criterion {n}: {} ({seconds:.1}s) {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            o.pass
        }
        Err(e) => {
            println!("criterion {n}: FAIL ({seconds:.1}s) error: {e}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    let t = Instant::now();
    ok &= report(1, criterion_1(), t);
    let t = Instant::now();
    ok &= report(2, criterion_2(), t);

    let t = Instant::now();
    let summary = run_ray_experiment(&ExperimentConfig::default());
    println!("default ray finished in {:.1}s", t.elapsed().as_secs_f64());
    match &summary {
        Ok(s) => {
            let t = Instant::now();
            ok &= report(3, Ok(criterion_3(s)), t);
            ok &= report(4, Ok(criterion_4(s)), t);
            let t = Instant::now();
            ok &= report(5, criterion_5(s), t);
        }
        Err(e) => {
            for n in 3..=5 {
                println!("criterion {n}: FAIL ray experiment error: {e}");
            }
            ok = false;
        }
    }
    let t = Instant::now();
    ok &= report(6, criterion_6(), t);
    let t = Instant::now();
    ok &= report(7, criterion_7(), t);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
