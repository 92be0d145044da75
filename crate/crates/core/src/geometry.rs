//! Pointwise geometry of a radial graph `X(x) = e^{γ(x)} x`.
//!
//! With `ρ = e^γ`, `W = √(1 + |∇γ|²)` and `∇γ`, `∇²γ` taken on the unit
//! sphere in the grid frame `(e_a)`:
//!
//! ```text
//! ν     = (x − ∇γ) / W
//! T_a   = ∂_a X = ρ (e_a + γ_a x)
//! g_ab  = ρ² (δ_ab + γ_a γ_b)
//! h_ab  = ρ (δ_ab + γ_a γ_b − γ_ab) / W
//! u     = ⟨X, ν⟩ = ρ / W,        û = u / F(ν)
//! dμ    = ρⁿ W dσ,               dμ_F = F(ν) dμ
//! ```
//!
//! The anisotropic Weingarten map is `dν_F = D²F(ν) ∘ dν` on `ν^⊥`. In the
//! coordinate basis `T_a` its matrix is `g⁻¹ Ã g⁻¹ h` with
//! `Ã_ab = ⟨T_a, D²F(ν) T_b⟩`, so `H_F = tr(g⁻¹ Ã g⁻¹ h)`. For the
//! principal curvatures the same map is written in an orthonormal basis of
//! `ν^⊥` (Cholesky of `g`), where it becomes `M Ŝ` with `M`, `Ŝ` symmetric,
//! and `κ^F` are the eigenvalues of the symmetric matrix `M^{1/2} Ŝ M^{1/2}`.
//!
//! Curves use the same formulas with a single tangent direction.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::norm::{restrict, sym2_eigenvalues, MinkowskiNorm, NormDerivatives};
use crate::sphere_grid::{NodeDerivatives, ScalarField, SphereGrid};
use crate::Dimension;

/// Smallest admissible eigenvalue of `D²F(ν)` on `ν^⊥`.
pub const MIN_MF_EIGENVALUE: f64 = 1e-8;

/// A star-shaped hypersurface stored as `γ = log ρ` on a grid.
#[derive(Clone, Debug)]
pub struct RadialGraph {
    gamma: ScalarField,
}

impl RadialGraph {
    pub fn new(gamma: ScalarField) -> Result<Self> {
        if let Some(i) = gamma.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("log-radius is not finite at node {i}")));
        }
        Ok(RadialGraph { gamma })
    }

    /// Graph of a positive radius function.
    pub fn from_radius(grid: &Arc<SphereGrid>, rho: impl Fn(&Vector3<f64>) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for (i, x) in grid.directions().iter().enumerate() {
            let r = rho(x);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Domain(format!("radius {r} at node {i} is not positive")));
            }
            values.push(r.ln());
        }
        Self::new(grid.field(values)?)
    }

    pub fn sphere(grid: &Arc<SphereGrid>, radius: f64) -> Result<Self> {
        Self::from_radius(grid, |_| radius)
    }

    /// `λ𝒲` as a radial graph: `ρ(x) = λ / F⁰(x)`.
    pub fn wulff(grid: &Arc<SphereGrid>, norm: &MinkowskiNorm, scale: f64) -> Result<Self> {
        let dual = dual_on_grid(grid, norm)?;
        Self::new(grid.field(dual.iter().map(|d| (scale / d).ln()).collect())?)
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        self.gamma.grid()
    }

    pub fn dimension(&self) -> Dimension {
        self.grid().dimension()
    }

    pub fn gamma(&self) -> &ScalarField {
        &self.gamma
    }

    pub fn gamma_mut(&mut self) -> &mut [f64] {
        self.gamma.values_mut()
    }

    pub fn radius(&self) -> Vec<f64> {
        self.gamma.values().iter().map(|g| g.exp()).collect()
    }

    /// The dilation `λ X`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let shift = lambda.ln();
        RadialGraph { gamma: self.gamma.map(|g| g + shift) }
    }
}

/// `F⁰` at every grid direction.
pub fn dual_on_grid(grid: &SphereGrid, norm: &MinkowskiNorm) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(grid.len());
    let mut start = grid.direction(0);
    for (i, x) in grid.directions().iter().enumerate() {
        // Consecutive nodes have nearby maximizers; warm-start unless the
        // previous one is far away (pole to first row, row wrap-around).
        let sol = if i == 0 || start.dot(x) < 0.5 {
            norm.dual_solve(x)?
        } else {
            norm.dual_solve_from(x, &start)?
        };
        start = sol.argmax;
        values.push(sol.value);
    }
    Ok(values)
}

/// Per-node geometry of a radial graph. Matrices are in the orthonormal
/// basis of `ν^⊥` obtained from the coordinate tangents by Gram–Schmidt.
#[derive(Clone, Debug)]
pub struct GeometryFields {
    pub dim: Dimension,
    pub position: Vec<Vector3<f64>>,
    pub normal: Vec<Vector3<f64>>,
    /// `ν_F = DF(ν)`, a point of the Wulff shape.
    pub normal_f: Vec<Vector3<f64>>,
    /// Coordinate tangents `T_a = ∂_a X`.
    pub tangents: Vec<[Vector3<f64>; 2]>,
    pub rho: Vec<f64>,
    /// `W = √(1 + |∇γ|²)`.
    pub w: Vec<f64>,
    /// `F(ν)`.
    pub f_nu: Vec<f64>,
    pub u: Vec<f64>,
    pub u_hat: Vec<f64>,
    /// Euclidean Weingarten map `Ŝ`.
    pub weingarten: Vec<Matrix2<f64>>,
    /// `D²F(ν)` on `ν^⊥`.
    pub m_f: Vec<Matrix2<f64>>,
    pub h_f: Vec<f64>,
    /// Anisotropic principal curvatures, ascending; for curves only the
    /// first entry is meaningful and the second is 0.
    pub kappa_f: Vec<[f64; 2]>,
    /// `κ₁^F κ₂^F` (0 for curves).
    pub sigma2_f: Vec<f64>,
    /// Quadrature weight of `dμ` at the node.
    pub mu_weight: Vec<f64>,
    /// Quadrature weight of `dμ_F = F(ν) dμ`.
    pub mu_f_weight: Vec<f64>,
}

impl GeometryFields {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// `H_F · û`, scale invariant.
    pub fn p(&self) -> Vec<f64> {
        self.h_f.iter().zip(&self.u_hat).map(|(h, u)| h * u).collect()
    }
}

/// Everything the time stepper needs at one node.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NodeCore {
    pub rho: f64,
    pub w: f64,
    pub nu: Vector3<f64>,
    pub norm: NormDerivatives,
    pub tangents: [Vector3<f64>; 2],
    /// Metric and second fundamental form in the coordinate basis.
    pub g: Matrix2<f64>,
    pub h: Matrix2<f64>,
    pub a_tilde: Matrix2<f64>,
    /// `g⁻¹ Ã g⁻¹`, the coefficient of `h` in `H_F`.
    pub s_f: Matrix2<f64>,
    pub h_f: f64,
}

fn located(grid: &SphereGrid, node: usize, reason: impl Into<String>) -> Error {
    let d = grid.direction(node);
    Error::Degenerate { node, direction: [d[0], d[1], d[2]], reason: reason.into() }
}

fn grad_vector(frame: &[Vector3<f64>; 2], g: &Vector2<f64>) -> Vector3<f64> {
    frame[0] * g[0] + frame[1] * g[1]
}

/// Embeds the curve case in 2×2 matrices: the unused direction carries an
/// identity metric and zero curvature.
fn pad_curve(dim: Dimension, g: &mut Matrix2<f64>, h: &mut Matrix2<f64>, a: &mut Matrix2<f64>) {
    if dim == Dimension::Curve {
        g[(0, 1)] = 0.0;
        g[(1, 0)] = 0.0;
        g[(1, 1)] = 1.0;
        h[(0, 1)] = 0.0;
        h[(1, 0)] = 0.0;
        h[(1, 1)] = 0.0;
        a[(0, 1)] = 0.0;
        a[(1, 0)] = 0.0;
        a[(1, 1)] = 0.0;
    }
}

pub(crate) fn node_core(
    dim: Dimension,
    x: &Vector3<f64>,
    frame: &[Vector3<f64>; 2],
    gamma: f64,
    d: &NodeDerivatives,
    norm: &MinkowskiNorm,
) -> std::result::Result<NodeCore, String> {
    let rho = gamma.exp();
    let gr = d.grad;
    let w2 = 1.0 + gr.norm_squared();
    if !(w2.is_finite() && rho.is_finite() && rho > 0.0) {
        return Err(format!("non-finite graph data (ρ = {rho}, 1 + |∇γ|² = {w2})"));
    }
    let w = w2.sqrt();
    let nu = (x - grad_vector(frame, &gr)) / w;
    let nd = norm.derivatives(&nu).map_err(|e| e.to_string())?;
    let tangents = [(frame[0] + x * gr[0]) * rho, (frame[1] + x * gr[1]) * rho];
    let ggt = gr * gr.transpose();
    let mut g = (Matrix2::identity() + ggt) * (rho * rho);
    let mut h = (Matrix2::identity() + ggt - d.hess) * (rho / w);
    let mut a_tilde = restrict(dim, &nd.hessian, &tangents);
    pad_curve(dim, &mut g, &mut h, &mut a_tilde);
    let g_inv = g.try_inverse().ok_or("singular induced metric")?;
    let s_f = g_inv * a_tilde * g_inv;
    let h_f = (s_f * h).trace();
    Ok(NodeCore { rho, w, nu, norm: nd, tangents, g, h, a_tilde, s_f, h_f })
}

/// Lower Cholesky factor of a 2×2 SPD matrix.
fn cholesky2(g: &Matrix2<f64>) -> Matrix2<f64> {
    let l11 = g[(0, 0)].sqrt();
    let l21 = g[(1, 0)] / l11;
    let l22 = (g[(1, 1)] - l21 * l21).sqrt();
    Matrix2::new(l11, 0.0, l21, l22)
}

/// Square root of a symmetric positive semidefinite 2×2 matrix.
fn sqrt_psd2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let s = m.determinant().max(0.0).sqrt();
    let t = (m.trace() + 2.0 * s).sqrt();
    if t == 0.0 {
        return Matrix2::zeros();
    }
    (m + Matrix2::identity() * s) / t
}

fn symmetrize(m: Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

/// Derivatives of `γ` at every node.
pub(crate) fn graph_derivatives(graph: &RadialGraph) -> Vec<NodeDerivatives> {
    graph.grid().derivatives(graph.gamma.values())
}

/// Runs `f` over all nodes in parallel and reports the first failure in node
/// order, so errors are deterministic.
pub(crate) fn per_node<T: Send>(
    grid: &SphereGrid,
    f: impl Fn(usize) -> std::result::Result<T, String> + Sync,
) -> Result<Vec<T>> {
    let results: Vec<_> = (0..grid.len()).into_par_iter().map(&f).collect();
    let mut out = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(reason) => return Err(located(grid, i, reason)),
        }
    }
    Ok(out)
}

/// `H_F` at every node via the trace route (no eigen-decomposition).
pub fn anisotropic_mean_curvature(graph: &RadialGraph, norm: &MinkowskiNorm) -> Result<Vec<f64>> {
    let grid = graph.grid();
    let derivs = graph_derivatives(graph);
    let gamma = graph.gamma.values();
    per_node(grid, |i| {
        node_core(grid.dimension(), &grid.direction(i), &grid.frames()[i], gamma[i], &derivs[i], norm)
            .map(|c| c.h_f)
    })
}

struct NodeFields {
    core: NodeCore,
    weingarten: Matrix2<f64>,
    m_f: Matrix2<f64>,
    kappa: [f64; 2],
}

/// All geometric quantities of the graph under the norm.
///
/// Fails with [`Error::Degenerate`] at the first node where the graph data
/// are not finite or `D²F(ν)` is not positive definite on `ν^⊥`.
pub fn compute_fields(graph: &RadialGraph, norm: &MinkowskiNorm) -> Result<GeometryFields> {
    let grid = graph.grid();
    let dim = grid.dimension();
    let derivs = graph_derivatives(graph);
    let gamma = graph.gamma.values();
    let nodes = per_node(grid, |i| {
        let core = node_core(dim, &grid.direction(i), &grid.frames()[i], gamma[i], &derivs[i], norm)?;
        let l = cholesky2(&core.g);
        let l_inv = l.try_inverse().ok_or("singular induced metric")?;
        let weingarten = symmetrize(l_inv * core.h * l_inv.transpose());
        let m_f = symmetrize(l_inv * core.a_tilde * l_inv.transpose());
        let kappa = match dim {
            Dimension::Curve => {
                if m_f[(0, 0)] < MIN_MF_EIGENVALUE {
                    return Err(format!("D²F(ν) degenerate on ν^⊥ (eigenvalue {:e})", m_f[(0, 0)]));
                }
                [m_f[(0, 0)] * weingarten[(0, 0)], 0.0]
            }
            Dimension::Surface => {
                let (lo, _) = sym2_eigenvalues(&m_f);
                if !(lo >= MIN_MF_EIGENVALUE) {
                    return Err(format!("D²F(ν) degenerate on ν^⊥ (eigenvalue {lo:e})"));
                }
                let r = sqrt_psd2(&m_f);
                let (k1, k2) = sym2_eigenvalues(&symmetrize(r * weingarten * r));
                [k1, k2]
            }
        };
        Ok(NodeFields { core, weingarten, m_f, kappa })
    })?;

    let n = dim.n() as i32;
    let weights = grid.weights();
    let mut f = GeometryFields {
        dim,
        position: Vec::with_capacity(nodes.len()),
        normal: Vec::with_capacity(nodes.len()),
        normal_f: Vec::with_capacity(nodes.len()),
        tangents: Vec::with_capacity(nodes.len()),
        rho: Vec::with_capacity(nodes.len()),
        w: Vec::with_capacity(nodes.len()),
        f_nu: Vec::with_capacity(nodes.len()),
        u: Vec::with_capacity(nodes.len()),
        u_hat: Vec::with_capacity(nodes.len()),
        weingarten: Vec::with_capacity(nodes.len()),
        m_f: Vec::with_capacity(nodes.len()),
        h_f: Vec::with_capacity(nodes.len()),
        kappa_f: Vec::with_capacity(nodes.len()),
        sigma2_f: Vec::with_capacity(nodes.len()),
        mu_weight: Vec::with_capacity(nodes.len()),
        mu_f_weight: Vec::with_capacity(nodes.len()),
    };
    for (i, nf) in nodes.into_iter().enumerate() {
        let c = nf.core;
        let fnu = c.norm.value;
        let u = c.rho / c.w;
        let mu = c.rho.powi(n) * c.w * weights[i];
        f.position.push(grid.direction(i) * c.rho);
        f.normal.push(c.nu);
        f.normal_f.push(c.norm.gradient);
        f.tangents.push(c.tangents);
        f.rho.push(c.rho);
        f.w.push(c.w);
        f.f_nu.push(fnu);
        f.u.push(u);
        f.u_hat.push(u / fnu);
        f.weingarten.push(nf.weingarten);
        f.m_f.push(nf.m_f);
        f.h_f.push(c.h_f);
        f.kappa_f.push(nf.kappa);
        f.sigma2_f.push(if dim == Dimension::Surface { nf.kappa[0] * nf.kappa[1] } else { 0.0 });
        f.mu_weight.push(mu);
        f.mu_f_weight.push(mu * fnu);
    }
    Ok(f)
}

/// `H_F` from the scalar graph formula
///
/// ```text
/// H_F = 1/(ρW) · tr( A (I + ∇γ∇γᵀ) (I − (I − ∇γ∇γᵀ/W²) ∇²γ) ),
/// A_ab = ⟨e_a, D²F(ν) e_b⟩,
/// ```
///
/// an independent route to the same quantity as [`compute_fields`].
pub fn anisotropic_h_graph_formula(graph: &RadialGraph, norm: &MinkowskiNorm) -> Result<ScalarField> {
    let grid = graph.grid();
    let dim = grid.dimension();
    let derivs = graph_derivatives(graph);
    let gamma = graph.gamma.values();
    let values = per_node(grid, |i| {
        let x = grid.direction(i);
        let frame = &grid.frames()[i];
        let d = &derivs[i];
        let rho = gamma[i].exp();
        let w2 = 1.0 + d.grad.norm_squared();
        let w = w2.sqrt();
        let nu = (x - grad_vector(frame, &d.grad)) / w;
        let hess_f = norm.derivatives(&nu).map_err(|e| e.to_string())?.hessian;
        let a = restrict(dim, &hess_f, frame);
        let ggt = d.grad * d.grad.transpose();
        let id = Matrix2::identity();
        let inner = id - (id - ggt / w2) * d.hess;
        let mut inner = inner;
        if dim == Dimension::Curve {
            inner[(1, 1)] = 0.0;
        }
        Ok((a * (id + ggt) * inner).trace() / (rho * w))
    })?;
    grid.field(values)
}

/// Star-shapedness and F-mean-convexity margins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub min_u: f64,
    pub min_u_node: usize,
    pub min_h_f: f64,
    pub min_h_f_node: usize,
    pub admissible: bool,
}

/// Admissible means `min u > u_margin` and `min H_F > h_margin`.
pub fn check_admissible(fields: &GeometryFields, u_margin: f64, h_margin: f64) -> AdmissibilityReport {
    let argmin = |v: &[f64]| {
        v.iter()
            .enumerate()
            .fold((usize::MAX, f64::INFINITY), |(bi, bv), (i, &x)| if x < bv || x.is_nan() && bi == usize::MAX { (i, x) } else { (bi, bv) })
    };
    let (un, u) = argmin(&fields.u);
    let (hn, h) = argmin(&fields.h_f);
    AdmissibilityReport {
        min_u: u,
        min_u_node: un,
        min_h_f: h,
        min_h_f_node: hn,
        admissible: u > u_margin && h > h_margin,
    }
}
