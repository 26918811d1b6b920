//! Areas and the inequality ledger relating the Blaschke metric, the flat
//! metric of the cubic differential and volume entropy.
//!
//! Every comparison is an [`InequalityReport`] with `gap = rhs − lhs`, so a
//! nonnegative gap means the inequality holds. Tolerances come in three
//! classes: algebraic identities, discretization error measured by comparing
//! refinement levels, and statistical error of the entropy fit.

use std::fmt;
use std::io::Write;

use crate::cubic::{flat_metric, pointwise_norm_sq, CubicDifferential};
use crate::error::{Error, Result};
use crate::mesh::{integrate, MetricField, SurfaceMesh};
use crate::wang::ConformalFactorField;

/// Tolerance for identities that hold up to rounding.
pub const ALGEBRAIC_TOLERANCE: f64 = 1e-10;

/// Relative tolerance of the pointwise bound, multiplied by the largest
/// Blaschke factor.
pub const POINTWISE_RELATIVE_TOLERANCE: f64 = 1e-6;

/// Header carried by every report that mentions the Hilbert metric.
pub const HILBERT_CONSTANT_NOTE: &str = "Hilbert-metric entropy is related to the Blaschke entropy only up to a \
universal constant c that is never given a numeric value here; every statement about Ent(g_H) holds up to \
that symbolic factor c.";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToleranceClass {
    Algebraic,
    Discretization,
    Estimator,
}

impl ToleranceClass {
    pub fn label(self) -> &'static str {
        match self {
            ToleranceClass::Algebraic => "algebraic",
            ToleranceClass::Discretization => "discretization",
            ToleranceClass::Estimator => "estimator",
        }
    }
}

#[derive(Clone, Debug)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub gap: f64,
    pub tolerance: f64,
    pub class: ToleranceClass,
}

impl InequalityReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, tolerance: f64, class: ToleranceClass) -> Self {
        Self { name: name.to_string(), lhs, rhs, gap: rhs - lhs, tolerance, class }
    }

    pub fn holds(&self) -> bool {
        self.gap >= -self.tolerance
    }

    /// Flat `key=value` block, one line per field, keys prefixed by the name.
    pub fn write_block<W: Write>(&self, out: &mut W) -> Result<()> {
        let n = &self.name;
        writeln!(out, "{n}.lhs={:.16e}", self.lhs)?;
        writeln!(out, "{n}.rhs={:.16e}", self.rhs)?;
        writeln!(out, "{n}.gap={:.16e}", self.gap)?;
        writeln!(out, "{n}.tolerance={:.16e}", self.tolerance)?;
        writeln!(out, "{n}.class={}", self.class.label())?;
        writeln!(out, "{n}.holds={}", self.holds())?;
        Ok(())
    }
}

impl fmt::Display for InequalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: lhs {:.6e} rhs {:.6e} gap {:.3e} (tol {:.1e}, {}) {}",
            self.name,
            self.lhs,
            self.rhs,
            self.gap,
            self.tolerance,
            self.class.label(),
            if self.holds() { "holds" } else { "VIOLATED" }
        )
    }
}

/// Total area of a conformal metric.
pub fn area(mesh: &SurfaceMesh, g: &MetricField) -> f64 {
    integrate(mesh, &vec![1.0; mesh.vertex_count()], g)
}

/// `sqrt(2π|χ|/A)`, the smallest entropy a metric of area `A` can have.
pub fn katok_bound(area_value: f64, euler_characteristic: i64) -> Result<f64> {
    if !(area_value > 0.0 && area_value.is_finite()) {
        return Err(Error::Domain(format!("area {area_value} must be positive")));
    }
    Ok((2.0 * std::f64::consts::PI * euler_characteristic.unsigned_abs() as f64 / area_value).sqrt())
}

/// [`katok_bound`] for genus 2: `sqrt(4π/A)`.
pub fn katok_lower_bound(area_value: f64) -> Result<f64> {
    katok_bound(area_value, -2)
}

/// `2^{1/3}|b|^{2/3}|dz|²`, the flat metric bounding the Blaschke metric from below.
pub fn comparison_metric(mesh: &SurfaceMesh, b: &CubicDifferential) -> Result<MetricField> {
    flat_metric(mesh, b, 2f64.cbrt())
}

/// `g_B ≥ 2^{1/3}|b|^{2/3}` checked at the vertex where `e^{2u}h0 − 2^{1/3}|b|^{2/3}`
/// is smallest. Both sides are compared through the chart-free ratio to `h0`
/// and reported at that vertex.
pub fn check_pointwise_bound(
    mesh: &SurfaceMesh,
    solution: &ConformalFactorField,
    b: &CubicDifferential,
) -> Result<InequalityReport> {
    let blaschke = solution.metric(mesh)?;
    let flat = comparison_metric(mesh, b)?;
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    for (&gb, &gf) in blaschke.factor.iter().zip(&flat.factor) {
        if gb - gf < worst.0 {
            worst = (gb - gf, gf, gb);
        }
    }
    let tolerance = POINTWISE_RELATIVE_TOLERANCE * blaschke.max_factor();
    Ok(InequalityReport::new("pointwise", worst.1, worst.2, tolerance, ToleranceClass::Discretization))
}

#[derive(Clone, Debug)]
pub struct AreaLemmaReport {
    pub report: InequalityReport,
    /// `|Area(g_B) − 2π|χ| − ∫ 2‖b‖²_{g_B} dvol_{g_B}|`.
    pub identity_residual: f64,
    pub blaschke_area: f64,
    pub flat_area: f64,
}

/// `Area(g_B) ≤ 2π|χ| + Area(2^{1/3}|b|^{2/3})`, with the tolerance supplied
/// by the caller from a refinement comparison.
pub fn check_area_lemma(
    mesh: &SurfaceMesh,
    solution: &ConformalFactorField,
    b: &CubicDifferential,
    tolerance: f64,
) -> Result<AreaLemmaReport> {
    let blaschke = solution.metric(mesh)?;
    let blaschke_area = area(mesh, &blaschke);
    let flat_area = area(mesh, &comparison_metric(mesh, b)?);
    let topological = mesh.gauss_bonnet_area();
    let norm_sq = pointwise_norm_sq(mesh, b, &blaschke)?;
    let integrand: Vec<f64> = norm_sq.iter().map(|x| 2.0 * x).collect();
    let identity_residual = (blaschke_area - topological - integrate(mesh, &integrand, &blaschke)).abs();
    let report = InequalityReport::new(
        "area_lemma",
        blaschke_area,
        topological + flat_area,
        tolerance,
        ToleranceClass::Discretization,
    );
    Ok(AreaLemmaReport { report, identity_residual, blaschke_area, flat_area })
}

/// The ray bound on `Ent(g_B)` for `‖b‖ = normB`, in both scaling conventions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayBound {
    /// `2^{−1/3}·normB^{−2/3}·M`: the entropy rescaled by the factor multiplying the quadratic form.
    pub quadratic_form: f64,
    /// `2^{−1/6}·normB^{−1/3}·M`: the entropy rescaled by the factor multiplying distances.
    pub distance: f64,
}

pub fn ray_upper_bound(norm_b: f64, m_sphere: f64) -> Result<RayBound> {
    if !(norm_b > 0.0 && norm_b.is_finite()) || !(m_sphere > 0.0 && m_sphere.is_finite()) {
        return Err(Error::Domain(format!("ray bound needs positive inputs, got ‖b‖ = {norm_b}, M = {m_sphere}")));
    }
    Ok(RayBound {
        quadratic_form: 2f64.powf(-1.0 / 3.0) * norm_b.powf(-2.0 / 3.0) * m_sphere,
        distance: 2f64.powf(-1.0 / 6.0) * norm_b.powf(-1.0 / 3.0) * m_sphere,
    })
}

#[derive(Clone, Debug)]
pub struct AreaSandwich {
    /// `2π|χ|/E² ≤ Area(g_B)` for an entropy upper bound `E`.
    pub lower: InequalityReport,
    /// `Area(g_B) ≤ 2π|χ| + Area(2^{1/3}|b|^{2/3})`.
    pub upper: InequalityReport,
}

impl AreaSandwich {
    pub fn holds(&self) -> bool {
        self.lower.holds() && self.upper.holds()
    }
}

pub fn area_sandwich(
    mesh: &SurfaceMesh,
    solution: &ConformalFactorField,
    b: &CubicDifferential,
    entropy_upper: f64,
    tolerance: f64,
) -> Result<AreaSandwich> {
    if !(entropy_upper > 0.0 && entropy_upper.is_finite()) {
        return Err(Error::Domain(format!("entropy upper bound {entropy_upper} must be positive")));
    }
    let blaschke_area = area(mesh, &solution.metric(mesh)?);
    let topological = mesh.gauss_bonnet_area();
    let flat_area = area(mesh, &comparison_metric(mesh, b)?);
    let lower = InequalityReport::new(
        "sandwich_lower",
        topological / (entropy_upper * entropy_upper),
        blaschke_area,
        tolerance,
        ToleranceClass::Estimator,
    );
    let upper = InequalityReport::new(
        "sandwich_upper",
        blaschke_area,
        topological + flat_area,
        tolerance,
        ToleranceClass::Discretization,
    );
    Ok(AreaSandwich { lower, upper })
}

/// Upper bound on the entropy of the underlying metric from a graph fit:
/// `ρ·(slope + 2·stderr)`, where `ρ ≥ 1` bounds graph distance over true
/// distance.
pub fn entropy_upper_bound(slope: f64, stderr: f64, distortion: f64) -> f64 {
    distortion.max(1.0) * (slope + 2.0 * stderr)
}
