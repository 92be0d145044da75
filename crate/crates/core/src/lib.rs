//! Inverse anisotropic mean curvature flow of star-shaped hypersurfaces.
//!
//! The crate evolves radial graphs `X(x) = e^{γ(x)} x` over the circle or the
//! 2-sphere by the parabolic equation
//!
//! ```text
//! ∂γ/∂t = √(1 + |∇γ|²) F(ν) / (ρ H_F)
//! ```
//!
//! where `F` is a Minkowski norm (the support function of a Wulff shape) and
//! `H_F` is the anisotropic mean curvature. Along the way it checks the
//! monotone and conserved quantities of the flow, measures convergence of the
//! rescaled surfaces to a dilate of the Wulff shape, and evaluates the
//! Minkowski-type inequality between the first two anisotropic mixed volumes.
//!
//! Module map:
//!
//! * [`norm`]: the anisotropy `F`, its derivatives, dual norm and Wulff shape
//! * [`sphere_grid`]: discretization of Sⁿ, tangential derivatives, quadrature
//! * [`geometry`]: pointwise geometry of a radial graph
//! * [`flow`]: time integration and per-step diagnostics
//! * [`functionals`]: curvature integrals, mixed volumes, variational checks
//! * [`config`] and [`cli`]: run configuration and the `wulffflow` commands

pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod harmonics;
pub mod jet;
pub mod norm;
pub mod output;
pub mod sphere_grid;

pub use error::{Error, Result};
pub use flow::{FlowParams, FlowRecord, FlowState, RunResult};
pub use geometry::{GeometryFields, RadialGraph};
pub use harmonics::{HarmonicSeries, HarmonicTerm};
pub use norm::{DerivativeMode, MinkowskiNorm, NormFamily};
pub use sphere_grid::{ScalarField, SphereGrid};

/// Dimension of the evolving hypersurface: a closed curve in R² (`n = 1`) or
/// a closed surface in R³ (`n = 2`).
///
/// Curves live in the `xy`-plane of R³; their third coordinate is always 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dimension {
    Curve,
    Surface,
}

impl Dimension {
    pub fn from_n(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Dimension::Curve),
            2 => Ok(Dimension::Surface),
            _ => Err(Error::Config(format!("dimension must be 1 or 2, got {n}"))),
        }
    }

    /// Intrinsic dimension `n`.
    pub fn n(self) -> usize {
        match self {
            Dimension::Curve => 1,
            Dimension::Surface => 2,
        }
    }

    pub fn n_f64(self) -> f64 {
        self.n() as f64
    }

    /// Surface measure of Sⁿ.
    pub fn sphere_measure(self) -> f64 {
        match self {
            Dimension::Curve => 2.0 * std::f64::consts::PI,
            Dimension::Surface => 4.0 * std::f64::consts::PI,
        }
    }
}
