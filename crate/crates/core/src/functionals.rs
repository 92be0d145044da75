//! Curvature integrals, anisotropic mixed volumes and variational checks.
//!
//! For a closed hypersurface `M = ∂K` and the Wulff body `L`:
//!
//! ```text
//! area_F(M) = ∫ F(ν) dμ
//! V₁(K, L)  = area_F / (n+1)
//! V₂(K, L)  = ∫ H_F F(ν) dμ / ((n+1) n)
//! Vol(L)    = 1/(n+1) ∫_{Sⁿ} F det A_F dσ
//! ```
//!
//! and the Minkowski-type inequality `V₂ⁿ ≥ V₁^{n−1} Vol(L)` holds for
//! star-shaped, F-mean convex `M`, with equality exactly on dilates and
//! translates of the Wulff shape.

use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{check_admissible, compute_fields, GeometryFields, RadialGraph};
use crate::norm::{restrict, MinkowskiNorm};
use crate::sphere_grid::{pairwise_sum, ScalarField, SphereGrid};
use crate::Dimension;

/// Default floor on the normalized deficit below which the inequality is
/// considered violated.
pub const TOL_INEQUALITY: f64 = 1e-8;
/// Default band around zero deficit reported as equality.
pub const TOL_EQUALITY: f64 = 5e-3;

fn weighted(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    pairwise_sum(&v)
}

/// `∫ F(ν) dμ`.
pub fn anisotropic_area(fields: &GeometryFields) -> f64 {
    pairwise_sum(&fields.mu_f_weight)
}

/// `∫ H_F F(ν) dμ`.
pub fn total_hf(fields: &GeometryFields) -> f64 {
    weighted(fields.h_f.iter().zip(&fields.mu_f_weight).map(|(h, w)| h * w))
}

/// `∫ 2σ₂(κ^F) F(ν) dμ` (zero for curves).
pub fn sigma2_integral(fields: &GeometryFields) -> f64 {
    weighted(fields.sigma2_f.iter().zip(&fields.mu_f_weight).map(|(s, w)| 2.0 * s * w))
}

/// Volume of the Wulff body, `1/(n+1) ∫_{Sⁿ} F det A_F dσ`.
pub fn wulff_volume(norm: &MinkowskiNorm, grid: &SphereGrid) -> Result<f64> {
    if norm.dimension() != grid.dimension() {
        return Err(Error::Config("norm and grid dimensions differ".into()));
    }
    let dim = grid.dimension();
    let mut terms = Vec::with_capacity(grid.len());
    for (i, x) in grid.directions().iter().enumerate() {
        let d = norm.derivatives(x)?;
        let a = restrict(dim, &d.hessian, &grid.frames()[i]);
        let det = match dim {
            Dimension::Curve => a[(0, 0)],
            Dimension::Surface => a.determinant(),
        };
        terms.push(d.value * det * grid.weights()[i]);
    }
    Ok(pairwise_sum(&terms) / (dim.n_f64() + 1.0))
}

/// `(V₁, V₂)` of the body bounded by the graph, relative to the Wulff body.
pub fn mixed_volumes(fields: &GeometryFields) -> (f64, f64) {
    let n = fields.dim.n_f64();
    (anisotropic_area(fields) / (n + 1.0), total_hf(fields) / ((n + 1.0) * n))
}

/// Both sides of `V₂ⁿ ≥ V₁^{n−1} Vol(L)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityReport {
    pub v1: f64,
    pub v2: f64,
    pub vol_l: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `(lhs − rhs) / rhs`.
    pub normalized_deficit: f64,
    pub holds: bool,
    pub near_equality: bool,
    /// The surface is star-shaped with `H_F ≥ 0`, i.e. within the hypotheses.
    pub admissible: bool,
    pub min_h_f: f64,
}

impl InequalityReport {
    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> String {
        format!(
            "V1={:.16e}\nV2={:.16e}\nvol_L={:.16e}\nlhs={:.16e}\nrhs={:.16e}\nnormalized_deficit={:.16e}\n\
             holds={}\nnear_equality={}\nadmissible={}\nmin_H_F={:.16e}\n",
            self.v1,
            self.v2,
            self.vol_l,
            self.lhs,
            self.rhs,
            self.normalized_deficit,
            self.holds,
            self.near_equality,
            self.admissible,
            self.min_h_f
        )
    }

    pub const CSV_HEADER: &'static str = "V1,V2,vol_L,lhs,rhs,normalized_deficit,holds,near_equality,admissible";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            self.v1,
            self.v2,
            self.vol_l,
            self.lhs,
            self.rhs,
            self.normalized_deficit,
            self.holds,
            self.near_equality,
            self.admissible
        )
    }
}

/// Evaluates the Minkowski-type inequality. `vol_l` is the Wulff volume on
/// the same grid (see [`wulff_volume`]).
pub fn minkowski_check(fields: &GeometryFields, vol_l: f64, tol_ineq: f64, tol_eq: f64) -> InequalityReport {
    let n = fields.dim.n() as i32;
    let (v1, v2) = mixed_volumes(fields);
    let lhs = v2.powi(n);
    let rhs = v1.powi(n - 1) * vol_l;
    let deficit = (lhs - rhs) / rhs;
    let adm = check_admissible(fields, 0.0, f64::NEG_INFINITY);
    InequalityReport {
        v1,
        v2,
        vol_l,
        lhs,
        rhs,
        normalized_deficit: deficit,
        holds: deficit >= -tol_ineq,
        near_equality: deficit.abs() < tol_eq,
        admissible: adm.min_u > 0.0 && adm.min_h_f >= 0.0,
        min_h_f: adm.min_h_f,
    }
}

/// Finite-difference check of the first variations
///
/// ```text
/// d/dε ∫ F(ν) dμ       = ∫ H_F ψ dμ
/// d/dε ∫ H_F F(ν) dμ   = ∫ 2σ₂(κ^F) ψ dμ
/// ```
///
/// under the normal variation `X ↦ X + εψν`, realized on radial graphs as
/// `ρ ↦ ρ + εψW` (the radial speed with normal component `ψ`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariationReport {
    pub epsilon: f64,
    pub area_derivative_fd: f64,
    pub area_derivative_formula: f64,
    /// Residual divided by `∫ |H_F ψ| dμ`.
    pub area_residual: f64,
    pub total_hf_derivative_fd: f64,
    pub total_hf_derivative_formula: f64,
    /// Residual divided by `∫ |2σ₂ ψ| dμ`, or by `∫ |H_F ψ| dμ` when that
    /// vanishes (curves).
    pub total_hf_residual: f64,
    pub admissible: bool,
}

impl VariationReport {
    pub const CSV_HEADER: &'static str = "epsilon,area_fd,area_formula,area_residual,total_HF_fd,total_HF_formula,total_HF_residual,admissible";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.epsilon,
            self.area_derivative_fd,
            self.area_derivative_formula,
            self.area_residual,
            self.total_hf_derivative_fd,
            self.total_hf_derivative_formula,
            self.total_hf_residual,
            self.admissible
        )
    }
}

fn perturbed(graph: &RadialGraph, fields: &GeometryFields, psi: &ScalarField, eps: f64) -> Result<RadialGraph> {
    let grid = graph.grid();
    let values: Vec<f64> = fields
        .rho
        .iter()
        .zip(&fields.w)
        .zip(psi.values())
        .map(|((r, w), p)| r + eps * p * w)
        .collect();
    if let Some(i) = values.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("perturbed radius is not positive at node {i}")));
    }
    RadialGraph::new(grid.field(values.iter().map(|v| v.ln()).collect())?)
}

pub fn first_variation_check(
    graph: &RadialGraph,
    norm: &MinkowskiNorm,
    psi: &ScalarField,
    eps: f64,
) -> Result<VariationReport> {
    if !Arc::ptr_eq(graph.grid(), psi.grid()) {
        return Err(Error::Config("ψ must live on the graph's grid".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("ε must be positive, got {eps}")));
    }
    let fields = compute_fields(graph, norm)?;
    let plus = compute_fields(&perturbed(graph, &fields, psi, eps)?, norm)?;
    let minus = compute_fields(&perturbed(graph, &fields, psi, -eps)?, norm)?;
    let admissible = [&fields, &plus, &minus].iter().all(|f| {
        let r = check_admissible(f, 0.0, f64::NEG_INFINITY);
        r.min_u > 0.0 && r.min_h_f > 0.0
    });

    let psi = psi.values();
    let area_fd = (anisotropic_area(&plus) - anisotropic_area(&minus)) / (2.0 * eps);
    let total_fd = (total_hf(&plus) - total_hf(&minus)) / (2.0 * eps);
    let mu = &fields.mu_weight;
    let area_formula = weighted((0..mu.len()).map(|i| fields.h_f[i] * psi[i] * mu[i]));
    let area_scale = weighted((0..mu.len()).map(|i| (fields.h_f[i] * psi[i]).abs() * mu[i]));
    let total_formula = weighted((0..mu.len()).map(|i| 2.0 * fields.sigma2_f[i] * psi[i] * mu[i]));
    let total_scale = weighted((0..mu.len()).map(|i| (2.0 * fields.sigma2_f[i] * psi[i]).abs() * mu[i]));
    let total_scale = if total_scale > 0.0 { total_scale } else { area_scale };
    Ok(VariationReport {
        epsilon: eps,
        area_derivative_fd: area_fd,
        area_derivative_formula: area_formula,
        area_residual: (area_fd - area_formula).abs() / area_scale,
        total_hf_derivative_fd: total_fd,
        total_hf_derivative_formula: total_formula,
        total_hf_residual: (total_fd - total_formula).abs() / total_scale,
        admissible,
    })
}

/// Reports for each `ε` of a ladder plus the observed order of the
/// finite-difference error, estimated from consecutive differences
/// `D(ε) − D(ε/r)` so that the discretization floor cancels. The ladder
/// should use a constant ratio.
#[derive(Clone, Debug)]
pub struct VariationLadder {
    pub reports: Vec<VariationReport>,
    /// One entry per consecutive triple of the ladder: `(area, total_HF)`.
    pub orders: Vec<(f64, f64)>,
}

pub fn first_variation_ladder(
    graph: &RadialGraph,
    norm: &MinkowskiNorm,
    psi: &ScalarField,
    epsilons: &[f64],
) -> Result<VariationLadder> {
    let reports = epsilons
        .iter()
        .map(|&e| first_variation_check(graph, norm, psi, e))
        .collect::<Result<Vec<_>>>()?;
    // With D(ε) ≈ D₀ + c εᵖ and ladder ratio r = ε₀/ε₁:
    // (D(ε₀) − D(ε₁)) / (D(ε₁) − D(ε₂)) = rᵖ.
    let order = |d: [f64; 3], r: f64| ((d[0] - d[1]).abs() / (d[1] - d[2]).abs()).ln() / r.ln();
    let orders = reports
        .windows(3)
        .map(|w| {
            let r = w[0].epsilon / w[1].epsilon;
            let area = order([w[0].area_derivative_fd, w[1].area_derivative_fd, w[2].area_derivative_fd], r);
            let total = order(
                [w[0].total_hf_derivative_fd, w[1].total_hf_derivative_fd, w[2].total_hf_derivative_fd],
                r,
            );
            (area, total)
        })
        .collect();
    Ok(VariationLadder { reports, orders })
}

/// Radius of the translated, dilated Wulff shape `λ𝒲 + v` in direction `x`,
/// found by bisection on `F⁰(ρx − v) = λ`. Requires `F⁰(v) < λ`.
pub fn translated_wulff_radius(norm: &MinkowskiNorm, scale: f64, shift: &Vector3<f64>, x: &Vector3<f64>) -> Result<f64> {
    let g = |r: f64| -> Result<f64> {
        let p = x * r - shift;
        Ok(if p.norm() == 0.0 { -scale } else { norm.dual_eval(&p)? - scale })
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numeric("translated Wulff radius bracket failed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
