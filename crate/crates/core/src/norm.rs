//! Minkowski norms, their duals and the associated Wulff shapes.
//!
//! A [`MinkowskiNorm`] `F` is the support function of a smooth strictly convex
//! body `L` containing the origin, extended 1-homogeneously to R^{n+1}. For
//! a unit vector `x` the boundary point of `L` with outer normal `x` is
//!
//! ```text
//! φ(x) = F(x) x + ∇^S F(x) = DF(x)
//! ```
//!
//! and `A_F(x) = ∇^S∇^S F + F σ`, the restriction of `D²F(x)` to `x^⊥`, holds
//! the principal radii of `∂L` at `φ(x)`. The dual norm
//! `F⁰(ξ) = sup ⟨x, ξ⟩ / F(x)` has the Wulff shape `∂L` as its unit sphere.
//!
//! For curves (`n = 1`) every family acts on the `xy`-plane and ignores the
//! third coordinate.

use std::sync::OnceLock;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::harmonics::HarmonicTerm;
use crate::jet::{Jet, Real};
use crate::sphere_grid::tangent_frame;
use crate::Dimension;

/// The anisotropy families supported in closed form.
#[derive(Clone, Debug, PartialEq)]
pub enum NormFamily {
    /// `F(x) = |x|`.
    Euclidean,
    /// `F(x) = |M x|` for a symmetric positive definite `M`; the Wulff shape is
    /// the ellipsoid `M·S^n` whose semi-axes are the eigenvalues of `M`.
    ///
    /// For curves only the upper-left 2×2 block is used.
    Ellipsoid { matrix: Matrix3<f64> },
    /// `F(x) = |x| (1 + Σ ε Y(x/|x|))` with the harmonics of
    /// [`harmonics`](crate::harmonics).
    PerturbedSphere { terms: Vec<HarmonicTerm> },
    /// `F(x) = √((1−λ)|x|² + λ‖x‖_p²)`. Uniformly elliptic for every
    /// `p ∈ (1, ∞)` as long as `λ < 1`.
    BlendedLp { p: f64, blend: f64 },
}

impl NormFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NormFamily::Euclidean => "euclidean",
            NormFamily::Ellipsoid { .. } => "ellipsoid",
            NormFamily::PerturbedSphere { .. } => "perturbed_sphere",
            NormFamily::BlendedLp { .. } => "blended_lp",
        }
    }
}

/// How first and second derivatives of `F` are produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    /// Exact derivatives by forward-mode differentiation of the closed form.
    Analytic,
    /// Central differences with steps `step·|x|` (gradient) and
    /// `10·step·|x|` (Hessian).
    FiniteDifference { step: f64 },
}

impl DerivativeMode {
    pub const DEFAULT_FD_STEP: f64 = 1e-5;
}

/// `F`, `DF` and `D²F` at a point.
#[derive(Clone, Copy, Debug)]
pub struct NormDerivatives {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
    /// Estimated truncation error of the finite-difference derivatives
    /// (Richardson comparison against doubled steps). `None` when analytic.
    pub fd_error: Option<f64>,
}

/// A point of the Wulff shape together with `A_F` in the tangent frame at `x`.
#[derive(Clone, Copy, Debug)]
pub struct WulffSample {
    pub direction: Vector3<f64>,
    pub point: Vector3<f64>,
    /// Orthonormal frame of `T_x S^n` in which `a_f` is expressed. For curves
    /// the second vector is zero.
    pub frame: [Vector3<f64>; 2],
    /// `A_F(x)`; for curves only the `(0, 0)` entry is meaningful.
    pub a_f: Matrix2<f64>,
}

impl WulffSample {
    /// Eigenvalues of `A_F` in ascending order (the principal radii of the
    /// Wulff shape at `point`).
    pub fn principal_radii(&self, dim: Dimension) -> Vec<f64> {
        match dim {
            Dimension::Curve => vec![self.a_f[(0, 0)]],
            Dimension::Surface => {
                let (a, b) = sym2_eigenvalues(&self.a_f);
                vec![a, b]
            }
        }
    }
}

/// Outcome of [`MinkowskiNorm::validate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormValidityReport {
    pub min_af_eigenvalue: f64,
    pub max_af_eigenvalue: f64,
    pub homogeneity_residual: f64,
    pub gradient_check_residual: f64,
    pub valid: bool,
}

/// Thresholds used by [`MinkowskiNorm::validate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidityTolerances {
    /// `A_F` must have all eigenvalues above this.
    pub min_eigenvalue: f64,
    /// Relative Euler-identity residual `|⟨x, DF⟩ − F| / F`.
    pub homogeneity: f64,
    /// Relative difference between the configured derivatives and an
    /// independent central-difference gradient.
    pub gradient: f64,
}

impl Default for ValidityTolerances {
    fn default() -> Self {
        ValidityTolerances { min_eigenvalue: 1e-10, homogeneity: 1e-8, gradient: 1e-6 }
    }
}

/// Outcome of [`MinkowskiNorm::duality_check`]; all entries are maxima of
/// relative residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualityReport {
    pub samples: usize,
    pub dual_of_gradient: f64,
    pub dual_gradient: f64,
    pub bidual: f64,
    /// `None` when the family has no closed-form dual.
    pub analytic_vs_numeric: Option<f64>,
}

impl DualityReport {
    pub fn max_residual(&self) -> f64 {
        [self.dual_of_gradient, self.dual_gradient, self.bidual, self.analytic_vs_numeric.unwrap_or(0.0)]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Maximizer of `⟨x, ξ⟩ / F(x)` over unit `x`.
#[derive(Clone, Copy, Debug)]
pub struct DualSolution {
    pub value: f64,
    /// Unit maximizer; `DF(argmax)` is parallel to `ξ`.
    pub argmax: Vector3<f64>,
}

/// Minimum number of quasi-uniform directions accepted by
/// [`MinkowskiNorm::validate`].
pub const MIN_VALIDATION_SAMPLES: usize = 16;

/// Coarse direction count for the numeric dual.
const DUAL_COARSE_DIRECTIONS: usize = 2000;
const DUAL_TOLERANCE: f64 = 1e-10;
const DUAL_MAX_ITERATIONS: usize = 200;

/// A Minkowski norm on R^{n+1}.
#[derive(Clone, Debug)]
pub struct MinkowskiNorm {
    dim: Dimension,
    family: NormFamily,
    mode: DerivativeMode,
    /// Ellipsoid inverse, cached.
    inverse: Option<Matrix3<f64>>,
}

impl MinkowskiNorm {
    pub fn new(dim: Dimension, family: NormFamily, mode: DerivativeMode) -> Result<Self> {
        let mut inverse = None;
        let family = match family {
            NormFamily::Ellipsoid { matrix } => {
                let m = match dim {
                    Dimension::Surface => matrix,
                    Dimension::Curve => {
                        let mut m = Matrix3::zeros();
                        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&matrix.fixed_view::<2, 2>(0, 0));
                        m
                    }
                };
                let k = dim.n() + 1;
                let block = m.view((0, 0), (k, k)).into_owned();
                if (block.clone() - block.transpose()).abs().max() > 1e-12 * block.abs().max() {
                    return Err(Error::Config("ellipsoid matrix must be symmetric".into()));
                }
                let eig = block.clone().symmetric_eigen();
                if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
                    return Err(Error::Config(format!(
                        "ellipsoid matrix must be positive definite (eigenvalues {:?})",
                        eig.eigenvalues.as_slice()
                    )));
                }
                let inv = block.try_inverse().ok_or_else(|| {
                    Error::Config("ellipsoid matrix is singular".into())
                })?;
                let mut full_inv = Matrix3::zeros();
                full_inv.view_mut((0, 0), (k, k)).copy_from(&inv);
                inverse = Some(full_inv);
                NormFamily::Ellipsoid { matrix: m }
            }
            NormFamily::PerturbedSphere { terms } => {
                for t in &terms {
                    t.validate(dim)?;
                }
                NormFamily::PerturbedSphere { terms }
            }
            NormFamily::BlendedLp { p, blend } => {
                if !(p > 1.0 && p.is_finite()) {
                    return Err(Error::Config(format!("blended_lp needs p in (1, ∞), got {p}")));
                }
                if !(0.0..=1.0).contains(&blend) {
                    return Err(Error::Config(format!("blended_lp needs blend in [0, 1], got {blend}")));
                }
                NormFamily::BlendedLp { p, blend }
            }
            NormFamily::Euclidean => NormFamily::Euclidean,
        };
        if let DerivativeMode::FiniteDifference { step } = mode {
            if !(step > 0.0 && step < 1e-1) {
                return Err(Error::Config(format!("finite-difference step must lie in (0, 0.1), got {step}")));
            }
        }
        Ok(MinkowskiNorm { dim, family, mode, inverse })
    }

    pub fn euclidean(dim: Dimension) -> Self {
        MinkowskiNorm { dim, family: NormFamily::Euclidean, mode: DerivativeMode::Analytic, inverse: None }
    }

    /// `F(x) = |diag(axes) x|`: the Wulff shape has these semi-axes.
    pub fn ellipsoid_axes(dim: Dimension, axes: &[f64]) -> Result<Self> {
        if axes.len() != dim.n() + 1 {
            return Err(Error::Config(format!("expected {} semi-axes, got {}", dim.n() + 1, axes.len())));
        }
        let mut m = Matrix3::identity();
        for (i, a) in axes.iter().enumerate() {
            m[(i, i)] = *a;
        }
        Self::new(dim, NormFamily::Ellipsoid { matrix: m }, DerivativeMode::Analytic)
    }

    pub fn dimension(&self) -> Dimension {
        self.dim
    }

    pub fn family(&self) -> &NormFamily {
        &self.family
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.mode
    }

    /// Same norm with another derivative mode.
    pub fn with_mode(&self, mode: DerivativeMode) -> Result<Self> {
        Self::new(self.dim, self.family.clone(), mode)
    }

    fn planar(&self) -> bool {
        self.dim == Dimension::Curve
    }

    fn check_nonzero(&self, x: &Vector3<f64>) -> Result<f64> {
        let r = if self.planar() { x.xy().norm() } else { x.norm() };
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("norm evaluated at the zero (or non-finite) vector {x:?}")));
        }
        Ok(r)
    }

    fn value_generic<T: Real>(&self, c: &[T; 3]) -> T {
        let r2 = if self.planar() {
            c[0] * c[0] + c[1] * c[1]
        } else {
            c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
        };
        match &self.family {
            NormFamily::Euclidean => r2.sqrt(),
            NormFamily::Ellipsoid { matrix } => {
                let k = self.dim.n() + 1;
                let mut sum = T::cst(0.0);
                for i in 0..k {
                    let mut y = T::cst(0.0);
                    for j in 0..k {
                        let mij = matrix[(i, j)];
                        if mij != 0.0 {
                            y = y + c[j] * mij;
                        }
                    }
                    sum = sum + y * y;
                }
                sum.sqrt()
            }
            NormFamily::PerturbedSphere { terms } => {
                let r = r2.sqrt();
                let mut f = r;
                for t in terms {
                    let solid = t.solid(self.dim, c);
                    f = f + solid * r.powi(1 - t.degree as i32);
                }
                f
            }
            NormFamily::BlendedLp { p, blend } => {
                let k = self.dim.n() + 1;
                let mut s = T::cst(0.0);
                for ci in c.iter().take(k) {
                    s = s + ci.abs_pow(*p);
                }
                let lp2 = s.powf(2.0 / p);
                (r2 * (1.0 - blend) + lp2 * *blend).sqrt()
            }
        }
    }

    /// `F(x)` without the zero check.
    pub(crate) fn value_unchecked(&self, x: &Vector3<f64>) -> f64 {
        self.value_generic(&[x[0], x[1], x[2]])
    }

    /// The 1-homogeneous extension `F(x) = |x| F(x/|x|)`.
    pub fn eval(&self, x: &Vector3<f64>) -> Result<f64> {
        self.check_nonzero(x)?;
        Ok(self.value_unchecked(x))
    }

    /// `F`, `DF` and `D²F` at a nonzero `x`, using the configured mode.
    pub fn derivatives(&self, x: &Vector3<f64>) -> Result<NormDerivatives> {
        let r = self.check_nonzero(x)?;
        Ok(match self.mode {
            DerivativeMode::Analytic => self.analytic_derivatives(x),
            DerivativeMode::FiniteDifference { step } => self.fd_derivatives(x, r, step),
        })
    }

    pub(crate) fn analytic_derivatives(&self, x: &Vector3<f64>) -> NormDerivatives {
        // F = |Mx| has DF = MᵀMx/F and D²F = (MᵀM − DF DFᵀ)/F.
        let quadratic = |m: &Matrix3<f64>| {
            let y = m * x;
            let value = y.norm();
            let gradient = m.transpose() * y / value;
            let hessian = (m.transpose() * m - gradient * gradient.transpose()) / value;
            NormDerivatives { value, gradient, hessian, fd_error: None }
        };
        match &self.family {
            NormFamily::Euclidean if self.planar() => quadratic(&Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0))),
            NormFamily::Euclidean => quadratic(&Matrix3::identity()),
            NormFamily::Ellipsoid { matrix } => quadratic(matrix),
            _ => self.jet_derivatives(x),
        }
    }

    fn jet_derivatives(&self, x: &Vector3<f64>) -> NormDerivatives {
        let j = self.value_generic(&Jet::coordinates(x));
        NormDerivatives { value: j.v, gradient: j.gradient(), hessian: j.hessian(), fd_error: None }
    }

    fn fd_derivatives(&self, x: &Vector3<f64>, r: f64, step: f64) -> NormDerivatives {
        let k = self.dim.n() + 1;
        let f = |y: Vector3<f64>| self.value_unchecked(&y);
        let grad_with = |h: f64| {
            let mut g = Vector3::zeros();
            for i in 0..k {
                let e = Vector3::ith(i, h);
                g[i] = (f(x + e) - f(x - e)) / (2.0 * h);
            }
            g
        };
        let hess_with = |h: f64| {
            let mut m = Matrix3::zeros();
            let f0 = f(*x);
            for i in 0..k {
                let ei = Vector3::ith(i, h);
                m[(i, i)] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / (h * h);
                for j in (i + 1)..k {
                    let ej = Vector3::ith(j, h);
                    let v = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h * h);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        };
        let h1 = step * r;
        let h2 = 10.0 * step * r;
        let gradient = grad_with(h1);
        let hessian = hess_with(h2);
        let g_err = (gradient - grad_with(2.0 * h1)).abs().max() / 3.0;
        let h_err = (hessian - hess_with(2.0 * h2)).abs().max() / 3.0;
        NormDerivatives { value: f(*x), gradient, hessian, fd_error: Some(g_err.max(h_err)) }
    }

    pub fn gradient(&self, x: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.derivatives(x)?.gradient)
    }

    pub fn hessian(&self, x: &Vector3<f64>) -> Result<Matrix3<f64>> {
        Ok(self.derivatives(x)?.hessian)
    }

    /// `φ(x) = F(x) x + ∇^S F(x)` and `A_F(x)` in the tangent frame at `x`.
    pub fn wulff_point(&self, x: &Vector3<f64>) -> Result<WulffSample> {
        let x = self.unit(x)?;
        let d = self.derivatives(&x)?;
        let frame = tangent_frame(self.dim, &x);
        let tangential = d.gradient - x * x.dot(&d.gradient);
        let point = x * d.value + tangential;
        Ok(WulffSample { direction: x, point, frame, a_f: restrict(self.dim, &d.hessian, &frame) })
    }

    fn unit(&self, x: &Vector3<f64>) -> Result<Vector3<f64>> {
        let r = self.check_nonzero(x)?;
        let mut u = x / r;
        if self.planar() {
            u[2] = 0.0;
        }
        Ok(u)
    }

    /// Dual norm `F⁰(ξ) = sup_{x≠0} ⟨x, ξ⟩ / F(x)`.
    ///
    /// Closed form for the Euclidean and ellipsoidal families; otherwise a
    /// coarse search over ~2·10³ directions followed by a safeguarded Newton
    /// ascent on the sphere.
    pub fn dual_eval(&self, xi: &Vector3<f64>) -> Result<f64> {
        Ok(self.dual_solve(xi)?.value)
    }

    /// Like [`dual_eval`](Self::dual_eval) but also returns the maximizer.
    pub fn dual_solve(&self, xi: &Vector3<f64>) -> Result<DualSolution> {
        self.check_nonzero(xi)?;
        match &self.family {
            NormFamily::Euclidean => {
                let u = self.unit(xi)?;
                Ok(DualSolution { value: if self.planar() { xi.xy().norm() } else { xi.norm() }, argmax: u })
            }
            NormFamily::Ellipsoid { .. } => {
                let inv = self.inverse.expect("ellipsoid inverse cached at construction");
                let y = inv * xi;
                let argmax = self.unit(&(inv * y))?;
                Ok(DualSolution { value: y.norm(), argmax })
            }
            _ => self.dual_solve_numeric(xi),
        }
    }

    /// Numeric dual regardless of family (used to cross-check closed forms).
    pub fn dual_solve_numeric(&self, xi: &Vector3<f64>) -> Result<DualSolution> {
        self.check_nonzero(xi)?;
        let xi = self.project(xi);
        let start = coarse_directions(self.dim)
            .iter()
            .map(|d| (d.dot(&xi) / self.value_unchecked(d), d))
            .fold((f64::NEG_INFINITY, &xi), |best, cand| if cand.0 > best.0 { cand } else { best })
            .1;
        self.dual_refine(&xi, start)
    }

    /// Local ascent for the dual from a starting direction. For a valid norm
    /// the maximizer is the unique critical point with `⟨x, ξ⟩ > 0`, so any
    /// start in that hemisphere converges.
    pub fn dual_solve_from(&self, xi: &Vector3<f64>, start: &Vector3<f64>) -> Result<DualSolution> {
        self.check_nonzero(xi)?;
        match self.family {
            NormFamily::Euclidean | NormFamily::Ellipsoid { .. } => self.dual_solve(xi),
            _ => self.dual_refine(&self.project(xi), start),
        }
    }

    fn project(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let mut v = *v;
        if self.planar() {
            v[2] = 0.0;
        }
        v
    }

    fn dual_refine(&self, xi: &Vector3<f64>, start: &Vector3<f64>) -> Result<DualSolution> {
        let xi_norm = xi.norm();
        let objective = |x: &Vector3<f64>| x.dot(xi) / self.value_unchecked(x);
        let mut x = self.unit(start)?;
        let mut value = objective(&x);
        let mut grad_norm = f64::INFINITY;
        for _ in 0..DUAL_MAX_ITERATIONS {
            let d = self.analytic_derivatives(&x);
            let f = d.value;
            let s = x.dot(xi);
            let mut grad = xi / f - d.gradient * (s / (f * f));
            grad -= x * x.dot(&grad);
            grad_norm = grad.norm();
            if grad_norm * f <= DUAL_TOLERANCE * xi_norm {
                return Ok(DualSolution { value, argmax: x });
            }
            let hess = -(xi * d.gradient.transpose() + d.gradient * xi.transpose()) / (f * f)
                - d.hessian * (s / (f * f))
                + d.gradient * d.gradient.transpose() * (2.0 * s / (f * f * f));
            let frame = tangent_frame(self.dim, &x);
            let dir = ascent_direction(self.dim, &frame, &grad, &hess);
            let slope = grad.dot(&dir);
            if slope <= 1e-13 * value.abs() {
                // The predicted gain is below round-off in the objective, so a
                // line search cannot rank the step; take it as is.
                x = self.unit(&(x + dir))?;
                value = objective(&x);
                continue;
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = self.unit(&(x + dir * step))?;
                let v = objective(&trial);
                if v >= value + 1e-4 * step * slope {
                    x = trial;
                    value = v;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // No measurable ascent left: the gradient sits at round-off.
                if grad_norm * f <= 1e-7 * xi_norm {
                    return Ok(DualSolution { value, argmax: x });
                }
                break;
            }
        }
        Err(Error::Numeric(format!(
            "dual norm ascent did not converge for ξ = {xi:?}: best bound {value:.17e}, \
             tangential gradient {grad_norm:.3e}"
        )))
    }

    /// Tabulates `F⁰` on the coarse direction set; input to
    /// [`bidual_eval`](Self::bidual_eval).
    pub fn dual_table(&self) -> Result<DualTable> {
        let directions = coarse_directions(self.dim).to_vec();
        let solutions = directions
            .iter()
            .map(|d| self.dual_solve(d))
            .collect::<Result<Vec<_>>>()?;
        Ok(DualTable { directions, solutions })
    }

    /// `F⁰⁰(x) = sup_ξ ⟨ξ, x⟩ / F⁰(ξ)`, evaluated with the same coarse-then-
    /// ascent sup oracle applied to `F⁰`. Should reproduce `F(x)`.
    pub fn bidual_eval(&self, x: &Vector3<f64>, table: &DualTable) -> Result<f64> {
        self.check_nonzero(x)?;
        let x = self.project(x);
        let (mut best, mut idx) = (f64::NEG_INFINITY, 0);
        for (i, (d, s)) in table.directions.iter().zip(&table.solutions).enumerate() {
            let v = d.dot(&x) / s.value;
            if v > best {
                best = v;
                idx = i;
            }
        }
        let mut xi = table.directions[idx];
        let mut sol = table.solutions[idx];
        let mut value = best;
        let mut tau = 0.1;
        for _ in 0..400 {
            // Envelope theorem: DF⁰(ξ) = x*/F(x*).
            let dual_grad = sol.argmax / self.value_unchecked(&sol.argmax);
            let mut grad = x / sol.value - dual_grad * (xi.dot(&x) / (sol.value * sol.value));
            grad -= xi * xi.dot(&grad);
            if grad.norm() * sol.value <= 1e-9 * x.norm() {
                return Ok(value);
            }
            let dir = grad / grad.norm();
            let mut accepted = false;
            for _ in 0..50 {
                let trial = self.unit(&(xi + dir * tau))?;
                let trial_sol = self.dual_solve_from(&trial, &sol.argmax)?;
                let v = trial.dot(&x) / trial_sol.value;
                if v > value {
                    xi = trial;
                    sol = trial_sol;
                    value = v;
                    accepted = true;
                    tau *= 1.5;
                    break;
                }
                tau *= 0.5;
            }
            if !accepted {
                return Ok(value);
            }
        }
        Ok(value)
    }

    /// Worst residuals of the duality identities over `sample_count`
    /// quasi-uniform unit directions `x`:
    ///
    /// ```text
    /// F⁰(DF(x)) = 1,   DF⁰(DF(x)) = x / F(x),   F⁰⁰(x) = F(x)
    /// ```
    ///
    /// For families with a closed-form dual the numeric dual is compared
    /// against it at the same points.
    pub fn duality_check(&self, sample_count: usize) -> Result<DualityReport> {
        if sample_count < MIN_VALIDATION_SAMPLES {
            return Err(Error::Config(format!(
                "duality check needs at least {MIN_VALIDATION_SAMPLES} directions, got {sample_count}"
            )));
        }
        let table = self.dual_table()?;
        let closed_form = matches!(self.family, NormFamily::Euclidean | NormFamily::Ellipsoid { .. });
        let mut report = DualityReport {
            samples: sample_count,
            dual_of_gradient: 0.0,
            dual_gradient: 0.0,
            bidual: 0.0,
            analytic_vs_numeric: closed_form.then_some(0.0),
        };
        for x in quasi_uniform_directions(self.dim, sample_count) {
            let d = self.derivatives(&x)?;
            let sol = self.dual_solve(&d.gradient)?;
            report.dual_of_gradient = report.dual_of_gradient.max((sol.value - 1.0).abs());
            // DF⁰(ξ) is the maximizer scaled by 1/F.
            let dual_grad = sol.argmax / self.value_unchecked(&sol.argmax);
            let want = x / d.value;
            report.dual_gradient = report.dual_gradient.max((dual_grad - want).norm() / want.norm());
            let bidual = self.bidual_eval(&x, &table)?;
            report.bidual = report.bidual.max((bidual - d.value).abs() / d.value);
            if let Some(worst) = report.analytic_vs_numeric.as_mut() {
                let xi = x + d.gradient;
                let exact = self.dual_eval(&xi)?;
                let numeric = self.dual_solve_numeric(&xi)?.value;
                *worst = worst.max((numeric - exact).abs() / exact);
            }
        }
        Ok(report)
    }

    /// Samples `A_F` and the derivative identities over quasi-uniform
    /// directions (plus the coordinate axes) and reports the extremes.
    ///
    /// Never fails on an invalid norm: problems show up as `valid = false`.
    pub fn validate(&self, sample_count: usize, tol: &ValidityTolerances) -> Result<NormValidityReport> {
        if sample_count < MIN_VALIDATION_SAMPLES {
            return Err(Error::Config(format!(
                "validation needs at least {MIN_VALIDATION_SAMPLES} directions, got {sample_count}"
            )));
        }
        let mut min_eig = f64::INFINITY;
        let mut max_eig = f64::NEG_INFINITY;
        let mut euler: f64 = 0.0;
        let mut grad_res: f64 = 0.0;
        let mut finite = true;
        let fd_step = match self.mode {
            DerivativeMode::FiniteDifference { step } => step,
            DerivativeMode::Analytic => DerivativeMode::DEFAULT_FD_STEP,
        };
        for x in validation_directions(self.dim, sample_count) {
            let d = match self.derivatives(&x) {
                Ok(d) => d,
                Err(_) => {
                    finite = false;
                    continue;
                }
            };
            let frame = tangent_frame(self.dim, &x);
            let a = restrict(self.dim, &d.hessian, &frame);
            let eig = match self.dim {
                Dimension::Curve => (a[(0, 0)], a[(0, 0)]),
                Dimension::Surface => sym2_eigenvalues(&a),
            };
            if !(eig.0.is_finite() && eig.1.is_finite() && d.value.is_finite()) {
                finite = false;
                continue;
            }
            min_eig = min_eig.min(eig.0);
            max_eig = max_eig.max(eig.1);
            euler = euler.max((x.dot(&d.gradient) - d.value).abs() / d.value.abs());
            let reference = self.fd_derivatives(&x, 1.0, fd_step).gradient;
            let scale = d.gradient.norm().max(1e-300);
            grad_res = grad_res.max((reference - d.gradient).norm() / scale);
        }
        let valid = finite
            && min_eig > tol.min_eigenvalue
            && euler <= tol.homogeneity
            && grad_res <= tol.gradient;
        Ok(NormValidityReport {
            min_af_eigenvalue: min_eig,
            max_af_eigenvalue: max_eig,
            homogeneity_residual: euler,
            gradient_check_residual: grad_res,
            valid,
        })
    }

    /// Largest eigenvalue of `A_F` over a fixed direction sample (the
    /// parabolicity constant used by the time-step rule).
    pub fn max_af_eigenvalue(&self) -> f64 {
        self.validate(512, &ValidityTolerances::default())
            .map(|r| r.max_af_eigenvalue)
            .unwrap_or(f64::NAN)
    }
}

/// `F⁰` on the coarse direction set.
#[derive(Clone, Debug)]
pub struct DualTable {
    directions: Vec<Vector3<f64>>,
    solutions: Vec<DualSolution>,
}

/// `[eᵢᵀ H eⱼ]` in the given frame.
pub(crate) fn restrict(dim: Dimension, h: &Matrix3<f64>, frame: &[Vector3<f64>; 2]) -> Matrix2<f64> {
    match dim {
        Dimension::Curve => Matrix2::new(frame[0].dot(&(h * frame[0])), 0.0, 0.0, 0.0),
        Dimension::Surface => {
            let h0 = h * frame[0];
            let h1 = h * frame[1];
            let off = 0.5 * (frame[1].dot(&h0) + frame[0].dot(&h1));
            Matrix2::new(frame[0].dot(&h0), off, off, frame[1].dot(&h1))
        }
    }
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub(crate) fn sym2_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let r = (half * half + off * off).sqrt();
    (mean - r, mean + r)
}

fn ascent_direction(
    dim: Dimension,
    frame: &[Vector3<f64>; 2],
    grad: &Vector3<f64>,
    hess: &Matrix3<f64>,
) -> Vector3<f64> {
    let r = restrict(dim, hess, frame);
    let newton = match dim {
        Dimension::Curve => {
            let g = frame[0].dot(grad);
            (r[(0, 0)] < 0.0).then(|| frame[0] * (-g / r[(0, 0)]))
        }
        Dimension::Surface => {
            let g = Vector2::new(frame[0].dot(grad), frame[1].dot(grad));
            let (lo, hi) = sym2_eigenvalues(&r);
            if hi < 0.0 && lo.is_finite() {
                r.try_inverse().map(|inv| {
                    let d = -(inv * g);
                    frame[0] * d[0] + frame[1] * d[1]
                })
            } else {
                None
            }
        }
    };
    match newton {
        Some(d) if d.dot(grad) > 0.0 && d.norm() < 0.5 => d,
        Some(d) if d.dot(grad) > 0.0 => d * (0.5 / d.norm()),
        _ => {
            let n = grad.norm();
            if n > 0.0 {
                grad * (0.2 / n).min(1.0)
            } else {
                *grad
            }
        }
    }
}

/// Fibonacci (spiral) points on S² or equally spaced angles on S¹.
pub fn quasi_uniform_directions(dim: Dimension, count: usize) -> Vec<Vector3<f64>> {
    match dim {
        Dimension::Curve => (0..count)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / count as f64;
                Vector3::new(t.cos(), t.sin(), 0.0)
            })
            .collect(),
        Dimension::Surface => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let s = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    Vector3::new(s * a.cos(), s * a.sin(), z)
                })
                .collect()
        }
    }
}

fn validation_directions(dim: Dimension, count: usize) -> Vec<Vector3<f64>> {
    let k = dim.n() + 1;
    let mut dirs: Vec<Vector3<f64>> = (0..k)
        .flat_map(|i| [Vector3::ith(i, 1.0), Vector3::ith(i, -1.0)])
        .collect();
    dirs.extend(quasi_uniform_directions(dim, count));
    dirs
}

fn coarse_directions(dim: Dimension) -> &'static [Vector3<f64>] {
    static CURVE: OnceLock<Vec<Vector3<f64>>> = OnceLock::new();
    static SURFACE: OnceLock<Vec<Vector3<f64>>> = OnceLock::new();
    match dim {
        Dimension::Curve => CURVE.get_or_init(|| quasi_uniform_directions(dim, DUAL_COARSE_DIRECTIONS)),
        Dimension::Surface => SURFACE.get_or_init(|| quasi_uniform_directions(dim, DUAL_COARSE_DIRECTIONS)),
    }
}
