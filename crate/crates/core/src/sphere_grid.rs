//! Discretization of the circle and of the 2-sphere.
//!
//! # Layout
//!
//! * `n = 1`: `N` equally spaced angles `θ_i = 2πi/N`, uniform weights `2π/N`.
//! * `n = 2`: an equiangular latitude–longitude grid. Node 0 is the north
//!   pole, then `N_θ` latitude rows at colatitudes `θ_r = rπ/(N_θ+1)`,
//!   `r = 1..=N_θ`, each with `N_φ` longitudes `φ_j = 2πj/N_φ`, and finally the
//!   south pole. `N_φ` is even.
//!
//! # Derivatives
//!
//! Tangential gradients and covariant Hessians are expressed in the
//! orthonormal frame `(e_θ, e_φ)`; at the poles the frame is `(e_x, e_y)`.
//! Interior nodes use fourth-order centered differences in `θ` and `φ`
//! (periodic in `φ`) with the round-metric Christoffel corrections
//!
//! ```text
//! ∇²f(e_θ, e_θ) = f_θθ
//! ∇²f(e_θ, e_φ) = (f_θφ − cot θ f_φ) / sin θ
//! ∇²f(e_φ, e_φ) = (f_φφ + sin θ cos θ f_θ) / sin² θ
//! ```
//!
//! Stencils that reach past a pole read the pole node (row 0) and a ghost row
//! equal to row 1 shifted by `π` in longitude, which is the value of `f` at
//! colatitude `−Δθ`. Derivatives at a pole node come from the Fourier modes
//! `0, 1, 2` of the four nearest rings, fitted by even or odd polynomials in
//! the geodesic radius; [`SphereGrid::close_poles`] uses the same fit to reset
//! pole values.
//!
//! # Quadrature
//!
//! Weights are Clenshaw–Curtis in `cos θ` (the latitude rows together with
//! the poles are exactly the Chebyshev–Lobatto points) times the trapezoid
//! rule in `φ`. They sum to `4π` and integrate spherical harmonics of degree
//! below `N_θ` exactly. Sums use a fixed pairwise reduction, so results do not
//! depend on thread count.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2, Vector3};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::Dimension;

/// Smallest number of latitude rows accepted for `n = 2`.
pub const MIN_LATITUDES: usize = 16;
/// Smallest node count accepted for `n = 1`.
pub const MIN_CIRCLE_NODES: usize = 8;

/// Orthonormal frame of `T_x Sⁿ`. On S² this is `(e_θ, e_φ)` away from the
/// poles and `(e_x, e_y)` at them; on S¹ the second vector is zero.
pub fn tangent_frame(dim: Dimension, x: &Vector3<f64>) -> [Vector3<f64>; 2] {
    match dim {
        Dimension::Curve => {
            let r = x.xy().norm();
            [Vector3::new(-x[1] / r, x[0] / r, 0.0), Vector3::zeros()]
        }
        Dimension::Surface => {
            let s = x.xy().norm();
            if s <= 1e-12 * x.norm() {
                [Vector3::x(), Vector3::y()]
            } else {
                let z = x[2] / x.norm();
                let (cp, sp) = (x[0] / s, x[1] / s);
                let st = s / x.norm();
                [Vector3::new(z * cp, z * sp, -st), Vector3::new(-sp, cp, 0.0)]
            }
        }
    }
}

/// Tangential gradient and covariant Hessian at one node, in the node frame.
/// For curves only the first component / `(0, 0)` entry is used.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeDerivatives {
    pub grad: Vector2<f64>,
    pub hess: Matrix2<f64>,
}

#[derive(Clone, Debug)]
enum Layout {
    Circle { nodes: usize },
    LatLong { n_theta: usize, n_phi: usize },
}

/// A discretized Sⁿ with nodes, frames and quadrature weights. Immutable.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    dim: Dimension,
    layout: Layout,
    directions: Vec<Vector3<f64>>,
    frames: Vec<[Vector3<f64>; 2]>,
    weights: Vec<f64>,
    /// Angular spacing: `Δθ` on S², `2π/N` on S¹.
    spacing: f64,
    /// Per latitude row (index 0..=N_θ+1): sin θ and cos θ.
    row_trig: Vec<(f64, f64)>,
}

impl SphereGrid {
    /// `n = 1` with `nodes` equally spaced angles.
    pub fn circle(nodes: usize) -> Result<Arc<Self>> {
        if nodes < MIN_CIRCLE_NODES {
            return Err(Error::Config(format!(
                "circle grid needs at least {MIN_CIRCLE_NODES} nodes, got {nodes}"
            )));
        }
        let h = 2.0 * PI / nodes as f64;
        let directions: Vec<_> = (0..nodes)
            .map(|i| {
                let t = h * i as f64;
                Vector3::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let frames = directions.iter().map(|d| tangent_frame(Dimension::Curve, d)).collect();
        Ok(Arc::new(SphereGrid {
            dim: Dimension::Curve,
            layout: Layout::Circle { nodes },
            directions,
            frames,
            weights: vec![h; nodes],
            spacing: h,
            row_trig: Vec::new(),
        }))
    }

    /// `n = 2` with `n_theta` latitude rows and `n_phi` longitudes.
    pub fn lat_long(n_theta: usize, n_phi: usize) -> Result<Arc<Self>> {
        if n_theta < MIN_LATITUDES {
            return Err(Error::Config(format!(
                "lat-long grid needs at least {MIN_LATITUDES} latitude rows, got {n_theta}"
            )));
        }
        if n_phi < 8 || !n_phi.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "lat-long grid needs an even number (>= 8) of longitudes, got {n_phi}"
            )));
        }
        let intervals = n_theta + 1;
        let dtheta = PI / intervals as f64;
        let dphi = 2.0 * PI / n_phi as f64;
        let cc = clenshaw_curtis(intervals);
        let row_trig: Vec<(f64, f64)> = (0..=intervals)
            .map(|r| {
                let t = dtheta * r as f64;
                if r == 0 {
                    (0.0, 1.0)
                } else if r == intervals {
                    (0.0, -1.0)
                } else {
                    (t.sin(), t.cos())
                }
            })
            .collect();

        let count = n_theta * n_phi + 2;
        let mut directions = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        directions.push(Vector3::z());
        weights.push(2.0 * PI * cc[0]);
        for r in 1..=n_theta {
            let (st, ct) = row_trig[r];
            for j in 0..n_phi {
                let p = dphi * j as f64;
                directions.push(Vector3::new(st * p.cos(), st * p.sin(), ct));
                weights.push(cc[r] * dphi);
            }
        }
        directions.push(-Vector3::z());
        weights.push(2.0 * PI * cc[intervals]);
        let frames = directions.iter().map(|d| tangent_frame(Dimension::Surface, d)).collect();
        Ok(Arc::new(SphereGrid {
            dim: Dimension::Surface,
            layout: Layout::LatLong { n_theta, n_phi },
            directions,
            frames,
            weights,
            spacing: dtheta,
            row_trig,
        }))
    }

    /// Default grid of the given dimension: `resolution` nodes on S¹, or
    /// `resolution × 2·resolution` on S².
    pub fn build(dim: Dimension, resolution: usize) -> Result<Arc<Self>> {
        match dim {
            Dimension::Curve => Self::circle(resolution),
            Dimension::Surface => Self::lat_long(resolution, 2 * resolution),
        }
    }

    pub fn dimension(&self) -> Dimension {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.directions
    }

    pub fn direction(&self, node: usize) -> Vector3<f64> {
        self.directions[node]
    }

    pub fn frames(&self) -> &[[Vector3<f64>; 2]] {
        &self.frames
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Δθ` on S², `2π/N` on S¹.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `(N_θ, N_φ)` for lat–long grids.
    pub fn lat_long_shape(&self) -> Option<(usize, usize)> {
        match self.layout {
            Layout::LatLong { n_theta, n_phi } => Some((n_theta, n_phi)),
            Layout::Circle { .. } => None,
        }
    }

    /// Node index of latitude row `r` (1-based) and longitude `j`.
    pub fn node(&self, row: usize, col: usize) -> usize {
        match self.layout {
            Layout::LatLong { n_phi, .. } => 1 + (row - 1) * n_phi + col,
            Layout::Circle { .. } => col,
        }
    }

    /// Indices of the pole nodes (north, south) on S².
    pub fn pole_nodes(&self) -> Option<(usize, usize)> {
        self.lat_long_shape().map(|_| (0, self.len() - 1))
    }

    /// Samples `f` at every node.
    pub fn sample(self: &Arc<Self>, f: impl Fn(&Vector3<f64>) -> f64) -> ScalarField {
        ScalarField { grid: Arc::clone(self), values: self.directions.iter().map(f).collect() }
    }

    pub fn field(self: &Arc<Self>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != self.len() {
            return Err(Error::Config(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                self.len()
            )));
        }
        Ok(ScalarField { grid: Arc::clone(self), values })
    }

    /// `Σ wᵢ fᵢ` with a fixed pairwise reduction.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len(), "field does not live on this grid");
        let products: Vec<f64> = self.weights.iter().zip(values).map(|(w, f)| w * f).collect();
        pairwise_sum(&products)
    }

    pub fn integrate(&self, field: &ScalarField) -> f64 {
        self.integrate_values(&field.values)
    }

    /// Gradient and covariant Hessian at every node.
    pub fn derivatives(&self, values: &[f64]) -> Vec<NodeDerivatives> {
        assert_eq!(values.len(), self.len(), "field does not live on this grid");
        match self.layout {
            Layout::Circle { nodes } => circle_derivatives(values, nodes, self.spacing),
            Layout::LatLong { n_theta, n_phi } => {
                let mut out = vec![NodeDerivatives::default(); self.len()];
                let view = LatLongView { values, n_theta, n_phi };
                let dphi = 2.0 * PI / n_phi as f64;
                let ext = view.extended(dphi);
                for r in 1..=n_theta {
                    let (st, ct) = self.row_trig[r];
                    for j in 0..n_phi {
                        out[self.node(r, j)] = ext.interior(r, j, self.spacing, dphi, st, ct);
                    }
                }
                out[0] = view.pole(true, self.spacing);
                out[self.len() - 1] = view.pole(false, self.spacing);
                out
            }
        }
    }

    pub fn grad_s(&self, field: &ScalarField) -> Vec<Vector2<f64>> {
        self.derivatives(&field.values).into_iter().map(|d| d.grad).collect()
    }

    pub fn hess_s(&self, field: &ScalarField) -> Vec<Matrix2<f64>> {
        self.derivatives(&field.values).into_iter().map(|d| d.hess).collect()
    }

    /// Laplace–Beltrami operator (trace of the covariant Hessian).
    pub fn laplacian(self: &Arc<Self>, field: &ScalarField) -> ScalarField {
        let n = self.dim.n();
        let values = self
            .derivatives(&field.values)
            .into_iter()
            .map(|d| (0..n).map(|i| d.hess[(i, i)]).sum())
            .collect();
        ScalarField { grid: Arc::clone(self), values }
    }

    /// Resets both pole values from the nearest rings (no-op on S¹).
    pub fn close_poles(&self, values: &mut [f64]) {
        if let Layout::LatLong { n_theta, n_phi } = self.layout {
            let north = ring_means(values, n_theta, n_phi, true);
            let south = ring_means(values, n_theta, n_phi, false);
            values[0] = ring_coefficient(&north, 0, 0);
            let last = values.len() - 1;
            values[last] = ring_coefficient(&south, 0, 0);
        }
    }

    /// Fourth-order Lagrange interpolation at an arbitrary direction.
    pub fn interpolate(&self, field: &ScalarField, x: &Vector3<f64>) -> f64 {
        let values = &field.values;
        match self.layout {
            Layout::Circle { nodes } => {
                let t = x[1].atan2(x[0]).rem_euclid(2.0 * PI) / self.spacing;
                let base = t.floor() as isize;
                let frac = t - base as f64;
                let w = lagrange4(frac);
                (0..4)
                    .map(|k| {
                        let idx = (base - 1 + k as isize).rem_euclid(nodes as isize) as usize;
                        w[k] * values[idx]
                    })
                    .sum()
            }
            Layout::LatLong { n_theta, n_phi } => {
                let view = LatLongView { values, n_theta, n_phi };
                let u = x.normalize();
                let theta = u[2].clamp(-1.0, 1.0).acos();
                let phi = u[1].atan2(u[0]).rem_euclid(2.0 * PI);
                let dphi = 2.0 * PI / n_phi as f64;
                let tr = theta / self.spacing;
                let tp = phi / dphi;
                let r0 = (tr.floor() as isize).clamp(0, n_theta as isize);
                let c0 = tp.floor() as isize;
                let wr = lagrange4(tr - r0 as f64);
                let wc = lagrange4(tp - c0 as f64);
                let mut acc = 0.0;
                for (a, wa) in wr.iter().enumerate() {
                    for (b, wb) in wc.iter().enumerate() {
                        acc += wa * wb * view.at(r0 - 1 + a as isize, c0 - 1 + b as isize);
                    }
                }
                acc
            }
        }
    }
}

/// A real value per node of a [`SphereGrid`].
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: Arc::clone(&self.grid), values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// Fixed-order pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Clenshaw–Curtis weights for `∫_{-1}^{1}` at `x_k = cos(kπ/M)`, `k = 0..=M`.
fn clenshaw_curtis(m: usize) -> Vec<f64> {
    let mf = m as f64;
    (0..=m)
        .map(|k| {
            let theta = k as f64 * PI / mf;
            let mut s = 1.0;
            for j in 1..=(m / 2) {
                let b = if 2 * j == m { 1.0 } else { 2.0 };
                s -= b / (4.0 * (j * j) as f64 - 1.0) * (2.0 * j as f64 * theta).cos();
            }
            let c = if k == 0 || k == m { 1.0 } else { 2.0 };
            c / mf * s
        })
        .collect()
}

fn lagrange4(t: f64) -> [f64; 4] {
    // Nodes at -1, 0, 1, 2 relative to the base index.
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

#[inline]
fn d1(m2: f64, m1: f64, p1: f64, p2: f64, h: f64) -> f64 {
    (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)
}

#[inline]
fn d2(m2: f64, m1: f64, c: f64, p1: f64, p2: f64, h: f64) -> f64 {
    (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h)
}

fn circle_derivatives(values: &[f64], n: usize, h: f64) -> Vec<NodeDerivatives> {
    let at = |i: isize| values[i.rem_euclid(n as isize) as usize];
    (0..n as isize)
        .map(|i| {
            let (m2, m1, c, p1, p2) = (at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2));
            NodeDerivatives {
                grad: Vector2::new(d1(m2, m1, p1, p2, h), 0.0),
                hess: Matrix2::new(d2(m2, m1, c, p1, p2, h), 0.0, 0.0, 0.0),
            }
        })
        .collect()
}

/// Read access to lat–long values in the extended chart `(θ, φ)`, where row
/// `r` may run from `-1` to `N_θ + 2`.
struct LatLongView<'a> {
    values: &'a [f64],
    n_theta: usize,
    n_phi: usize,
}

impl LatLongView<'_> {
    #[inline]
    fn at(&self, r: isize, j: isize) -> f64 {
        let nt = self.n_theta as isize;
        let np = self.n_phi as isize;
        let (row, col) = if r < 0 {
            (-r, j + np / 2)
        } else if r > nt + 1 {
            (2 * (nt + 1) - r, j + np / 2)
        } else {
            (r, j)
        };
        if row == 0 {
            return self.values[0];
        }
        if row == nt + 1 {
            return self.values[self.values.len() - 1];
        }
        let col = col.rem_euclid(np) as usize;
        self.values[1 + (row as usize - 1) * self.n_phi + col]
    }

    /// Values on rows `-1..=N_θ+2` with two ghost columns on each side, and
    /// the longitude derivative on the same rows.
    fn extended(&self, dphi: f64) -> Extended {
        let width = self.n_phi + 4;
        let rows = self.n_theta + 4;
        let mut values = Vec::with_capacity(rows * width);
        for er in 0..rows {
            for c in 0..width {
                values.push(self.at(er as isize - 1, c as isize - 2));
            }
        }
        let mut f_phi = vec![0.0; rows * self.n_phi];
        for er in 0..rows {
            let r = er as isize - 1;
            if r == 0 || r == self.n_theta as isize + 1 {
                continue;
            }
            let v = &values[er * width..(er + 1) * width];
            for j in 0..self.n_phi {
                f_phi[er * self.n_phi + j] = d1(v[j], v[j + 1], v[j + 3], v[j + 4], dphi);
            }
        }
        Extended { values, f_phi, width, n_phi: self.n_phi }
    }

    /// Derivatives at a pole from ring Fourier modes; see the module docs.
    fn pole(&self, north: bool, h: f64) -> NodeDerivatives {
        let [m, a1, b1, a2, b2] = ring_modes(self.values, self.n_theta, self.n_phi, north);
        // In normal coordinates y = θ(cos φ, sin φ):
        //   mean    = f0 + tr(H)/4 θ² + …
        //   cos/sin φ modes = g₁ θ, g₂ θ + …
        //   cos 2φ  = (H₁₁ − H₂₂)/4 θ² + …,   sin 2φ = H₁₂/2 θ² + …
        let alpha = ring_coefficient(&m, 0, 1) / (h * h);
        let g1 = ring_coefficient(&a1, 1, 0) / h;
        let g2 = ring_coefficient(&b1, 1, 0) / h;
        let p = ring_coefficient(&a2, 2, 0) / (h * h);
        let q = ring_coefficient(&b2, 2, 0) / (h * h);
        let trace = 4.0 * alpha;
        let h11 = 0.5 * (trace + 4.0 * p);
        let h22 = 0.5 * (trace - 4.0 * p);
        let h12 = 2.0 * q;
        NodeDerivatives { grad: Vector2::new(g1, g2), hess: Matrix2::new(h11, h12, h12, h22) }
    }
}

/// Padded copy of a lat–long field; see [`LatLongView::extended`].
struct Extended {
    values: Vec<f64>,
    f_phi: Vec<f64>,
    width: usize,
    n_phi: usize,
}

impl Extended {
    #[inline]
    fn interior(&self, r: usize, j: usize, dtheta: f64, dphi: f64, st: f64, ct: f64) -> NodeDerivatives {
        let (er, c) = (r + 1, j + 2);
        let w = self.width;
        let v = &self.values;
        let at = |dr: usize| v[(er + dr - 2) * w + c];
        let col = [at(0), at(1), at(2), at(3), at(4)];
        let row = &v[er * w + c - 2..er * w + c + 3];
        let fp = |dr: usize| self.f_phi[(er + dr - 2) * self.n_phi + j];
        let f_t = d1(col[0], col[1], col[3], col[4], dtheta);
        let f_tt = d2(col[0], col[1], col[2], col[3], col[4], dtheta);
        let f_p = d1(row[0], row[1], row[3], row[4], dphi);
        let f_pp = d2(row[0], row[1], row[2], row[3], row[4], dphi);
        let f_tp = d1(fp(0), fp(1), fp(3), fp(4), dtheta);
        let h_tt = f_tt;
        let h_tp = (f_tp - ct / st * f_p) / st;
        let h_pp = (f_pp + st * ct * f_t) / (st * st);
        NodeDerivatives { grad: Vector2::new(f_t, f_p / st), hess: Matrix2::new(h_tt, h_tp, h_tp, h_pp) }
    }
}

/// Number of rings used by the pole fits.
const RINGS: usize = 4;

/// Fits `samples[k] = Σ_j c_j (k+1)^(first + 2j)` (ring radii in units of the
/// spacing) and returns `c_want`. Truncation error is `O(h^(2·RINGS))`
/// relative to the leading power.
fn ring_coefficient(samples: &[f64; RINGS], first: i32, want: usize) -> f64 {
    let v = nalgebra::Matrix4::from_fn(|k, j| ((k + 1) as f64).powi(first + 2 * j as i32));
    let rhs = nalgebra::Vector4::from_column_slice(samples);
    let c = v.lu().solve(&rhs).expect("ring Vandermonde matrix is nonsingular");
    c[want]
}

/// Fourier modes (mean, cos φ, sin φ, cos 2φ, sin 2φ) of the rings nearest a
/// pole, ordered by geodesic distance.
fn ring_modes(values: &[f64], n_theta: usize, n_phi: usize, north: bool) -> [[f64; RINGS]; 5] {
    let mut out = [[0.0; RINGS]; 5];
    let dphi = 2.0 * PI / n_phi as f64;
    for k in 0..RINGS {
        let row = if north { 1 + k } else { n_theta - k };
        let base = 1 + (row - 1) * n_phi;
        let mut acc = [0.0; 5];
        for (j, f) in values[base..base + n_phi].iter().enumerate() {
            let (s1, c1) = (dphi * j as f64).sin_cos();
            acc[0] += f;
            acc[1] += f * c1;
            acc[2] += f * s1;
            acc[3] += f * (c1 * c1 - s1 * s1);
            acc[4] += f * 2.0 * s1 * c1;
        }
        out[0][k] = acc[0] / n_phi as f64;
        for mode in 1..5 {
            out[mode][k] = 2.0 * acc[mode] / n_phi as f64;
        }
    }
    out
}

fn ring_means(values: &[f64], n_theta: usize, n_phi: usize, north: bool) -> [f64; RINGS] {
    let mut out = [0.0; RINGS];
    for (k, o) in out.iter_mut().enumerate() {
        let row = if north { 1 + k } else { n_theta - k };
        let base = 1 + (row - 1) * n_phi;
        *o = values[base..base + n_phi].iter().sum::<f64>() / n_phi as f64;
    }
    out
}

/// Removes longitudinal Fourier modes that the latitude row cannot resolve at
/// the equatorial spacing: row `r` keeps wavenumbers `k ≤ sin θ_r · N_φ / 2`.
///
/// Applied to time derivatives it lifts the explicit time-step restriction
/// caused by the clustering of longitudes near the poles.
pub struct PolarFilter {
    n_theta: usize,
    n_phi: usize,
    cutoffs: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PolarFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolarFilter").field("cutoffs", &self.cutoffs).finish()
    }
}

impl PolarFilter {
    /// `None` for circle grids, which need no filtering.
    pub fn new(grid: &SphereGrid) -> Option<Self> {
        let (n_theta, n_phi) = grid.lat_long_shape()?;
        let mut planner = FftPlanner::new();
        let nyquist = n_phi / 2;
        let cutoffs = (1..=n_theta)
            .map(|r| ((grid.row_trig[r].0 * nyquist as f64) + 1e-9).floor() as usize)
            .collect();
        Some(PolarFilter {
            n_theta,
            n_phi,
            cutoffs,
            forward: planner.plan_fft_forward(n_phi),
            inverse: planner.plan_fft_inverse(n_phi),
        })
    }

    pub fn apply(&self, values: &mut [f64]) {
        let nyquist = self.n_phi / 2;
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_phi];
        for r in 1..=self.n_theta {
            let cutoff = self.cutoffs[r - 1];
            if cutoff >= nyquist {
                continue;
            }
            let base = 1 + (r - 1) * self.n_phi;
            let row = &mut values[base..base + self.n_phi];
            for (b, v) in buf.iter_mut().zip(row.iter()) {
                *b = Complex::new(*v, 0.0);
            }
            self.forward.process(&mut buf);
            for (k, b) in buf.iter_mut().enumerate() {
                let wavenumber = k.min(self.n_phi - k);
                if wavenumber > cutoff {
                    *b = Complex::new(0.0, 0.0);
                }
            }
            self.inverse.process(&mut buf);
            let scale = 1.0 / self.n_phi as f64;
            for (v, b) in row.iter_mut().zip(&buf) {
                *v = b.re * scale;
            }
        }
    }
}
