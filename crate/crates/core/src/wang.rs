//! Wang's equation for the Blaschke metric.
//!
//! Writing `g_B = e^{2u}·g0`, the curvature identity `κ = −1 + 2‖b‖²_{g_B}`
//! becomes the semilinear problem
//!
//! ```text
//! Δ_{g0} u = κ0 + e^{2u} − 2ψ e^{−4u},    ψ = |b|²/h0³,
//! ```
//!
//! discretised with the cotangent stiffness `K` and lumped mass `m` as
//! `F(u) = K u + m·(κ0 + e^{2u} − 2ψ e^{−4u}) = 0`. The Jacobian
//! `K + diag(m·(2e^{2u} + 8ψe^{−4u}))` is symmetric positive definite, so
//! each Newton step is one preconditioned conjugate-gradient solve.

use crate::cubic::{pointwise_norm_sq, CubicDifferential};
use crate::error::{Error, Result};
use crate::linalg::conjugate_gradient;
use crate::mesh::{assemble_laplacian, Laplacian, MetricField, SurfaceKind, SurfaceMesh};

/// Default bound on the sup norm of the discrete equation residual.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

const MIN_STEP: f64 = 1.0 / (1u32 << 20) as f64;

#[derive(Clone, Debug)]
pub struct WangOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Start from `max(0, ln(2ψ)/6)` instead of `u ≡ 0`.
    pub warm_start: bool,
    pub cg_tolerance: f64,
}

impl Default for WangOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOLERANCE, max_iterations: 60, warm_start: false, cg_tolerance: 1e-12 }
    }
}

/// Solution of the discrete Wang equation on canonical vertices.
#[derive(Clone, Debug)]
pub struct ConformalFactorField {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Sup norm of `F(u)/m` at the returned iterate.
    pub final_residual: f64,
    /// Residual before the first step and after every accepted step.
    pub residual_history: Vec<f64>,
}

impl ConformalFactorField {
    /// The Blaschke metric `e^{2u}·g0`.
    pub fn metric(&self, mesh: &SurfaceMesh) -> Result<MetricField> {
        MetricField::new(self.u.iter().zip(mesh.background()).map(|(u, h0)| (2.0 * u).exp() * h0).collect())
    }
}

/// `ψ = ‖b‖²_{g0}` at canonical vertices.
pub fn background_norm_sq(mesh: &SurfaceMesh, b: &CubicDifferential) -> Result<Vec<f64>> {
    pointwise_norm_sq(mesh, b, &MetricField::background(mesh))
}

pub fn solve_wang(mesh: &SurfaceMesh, b: &CubicDifferential, tol: f64) -> Result<ConformalFactorField> {
    let options = WangOptions { tol, ..WangOptions::default() };
    solve_wang_with(mesh, &assemble_laplacian(mesh), b, &options, None)
}

/// Damped Newton iteration. The step is halved until the sup-norm residual
/// decreases, down to a floor of `2⁻²⁰`.
pub fn solve_wang_with(
    mesh: &SurfaceMesh,
    lap: &Laplacian,
    b: &CubicDifferential,
    options: &WangOptions,
    initial: Option<&[f64]>,
) -> Result<ConformalFactorField> {
    if !(options.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {} must be positive", options.tol)));
    }
    let psi = background_norm_sq(mesh, b)?;
    let kappa0 = mesh.kind().background_curvature();
    if mesh.kind() == SurfaceKind::FlatTorus && psi.iter().all(|&p| p == 0.0) {
        return Err(Error::Domain("on the torus the equation has no solution for b = 0".into()));
    }
    let n = mesh.vertex_count();
    let mass = lap.mass();
    let mut u = match initial {
        Some(u0) if u0.len() == n => u0.to_vec(),
        Some(u0) => {
            return Err(Error::Domain(format!("initial guess has {} values for {n} vertices", u0.len())));
        }
        None if options.warm_start => {
            psi.iter().map(|&p| if p > 0.0 { ((2.0 * p).ln() / 6.0).max(0.0) } else { 0.0 }).collect()
        }
        None => vec![0.0; n],
    };

    let residual = |u: &[f64]| -> (Vec<f64>, f64) {
        let mut f = lap.stiffness().matvec(u);
        let mut sup: f64 = 0.0;
        for i in 0..n {
            f[i] += mass[i] * (kappa0 + (2.0 * u[i]).exp() - 2.0 * psi[i] * (-4.0 * u[i]).exp());
            sup = sup.max((f[i] / mass[i]).abs());
        }
        (f, sup)
    };

    let (mut f, mut res) = residual(&u);
    let mut history = vec![res];
    let mut iterations = 0;
    while res > options.tol {
        if iterations == options.max_iterations {
            return Err(Error::NonConvergence { iterations, residual: res });
        }
        iterations += 1;
        let diag: Vec<f64> = (0..n)
            .map(|i| mass[i] * (2.0 * (2.0 * u[i]).exp() + 8.0 * psi[i] * (-4.0 * u[i]).exp()))
            .collect();
        let jac = lap.stiffness().add_diagonal(&diag)?;
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let mut delta = vec![0.0; n];
        conjugate_gradient(&jac, &rhs, &mut delta, options.cg_tolerance, 20 * n + 100)?;

        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(x, d)| x + step * d).collect();
            let (f_trial, res_trial) = residual(&trial);
            if res_trial < res {
                u = trial;
                f = f_trial;
                res = res_trial;
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(Error::NonConvergence { iterations, residual: res });
            }
        }
        log::debug!("Newton step {iterations}: residual {res:.3e} (step {step})");
        history.push(res);
    }
    Ok(ConformalFactorField { u, iterations, final_residual: res, residual_history: history })
}

/// Curvature `κ = e^{−2u}(κ0 − Δ_{g0}u)` of `e^{2u}·g0`.
pub fn curvature(mesh: &SurfaceMesh, lap: &Laplacian, u: &[f64]) -> Vec<f64> {
    let kappa0 = mesh.kind().background_curvature();
    let ku = lap.stiffness().matvec(u);
    ku.iter()
        .zip(lap.mass())
        .zip(u)
        .map(|((k, m), ui)| (-2.0 * ui).exp() * (kappa0 + k / m))
        .collect()
}

/// `sup |κ + 1 − 2‖b‖²_{g_B}|` for `g_B = e^{2u}·g0`.
pub fn wang_residual(mesh: &SurfaceMesh, lap: &Laplacian, u: &[f64], b: &CubicDifferential) -> Result<f64> {
    let psi = background_norm_sq(mesh, b)?;
    let kappa = curvature(mesh, lap, u);
    Ok(kappa
        .iter()
        .zip(&psi)
        .zip(u)
        .map(|((k, p), ui)| (k + 1.0 - 2.0 * p * (-6.0 * ui).exp()).abs())
        .fold(0.0, f64::max))
}
