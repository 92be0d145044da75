//! Time integration of the inverse anisotropic mean curvature flow.
//!
//! In the log-radius `γ` the flow is the scalar parabolic equation
//!
//! ```text
//! ∂γ/∂t = W F(ν) / (ρ H_F)
//! ```
//!
//! advanced with classical RK4. Spheres and Wulff shapes expand
//! homothetically with `γ(t) = γ(0) + t/n`; diagnostics are reported for the
//! rescaled surface `X̃ = e^{−t/n} X`, whose anisotropic area is conserved.
//!
//! The step is limited by the principal symbol of the linearized operator,
//! `δγ_t = F/H_F² · tr(g⁻¹Ãg⁻¹ ∇²δγ)`, whose largest eigenvalue is scale
//! invariant, so the step does not shrink as the surface grows.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{anisotropic_area, total_hf, wulff_volume};
use crate::geometry::{compute_fields, dual_on_grid, node_core, GeometryFields, RadialGraph};
use crate::norm::{sym2_eigenvalues, MinkowskiNorm};
use crate::sphere_grid::{pairwise_sum, PolarFilter, ScalarField, SphereGrid};
use crate::Dimension;

/// Integrator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    /// Fraction of the explicit stability limit `h² / D_max`.
    pub c_cfl: f64,
    pub dt_max: f64,
    pub t_max: f64,
    /// Stop once `umb_deficit` drops below this. `None` means
    /// `10⁻⁸ · area_F(0)`; `Some(0.0)` disables early stopping.
    pub eps_stop: Option<f64>,
    pub record_interval: f64,
    /// Times at which the graph is kept for mesh output.
    pub snapshot_times: Vec<f64>,
    /// Filter unresolved longitudinal modes of the tendency near the poles.
    pub polar_filter: bool,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            c_cfl: 0.15,
            dt_max: 0.01,
            t_max: 6.0,
            eps_stop: None,
            record_interval: 0.01,
            snapshot_times: Vec::new(),
            polar_filter: true,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("c_cfl", self.c_cfl)?;
        if self.c_cfl > 1.0 {
            return Err(Error::Config(format!("c_cfl must not exceed 1, got {}", self.c_cfl)));
        }
        positive("dt_max", self.dt_max)?;
        positive("t_max", self.t_max)?;
        positive("record_interval", self.record_interval)?;
        if let Some(e) = self.eps_stop {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Config(format!("eps_stop must be non-negative, got {e}")));
            }
        }
        for &s in &self.snapshot_times {
            if !(s >= 0.0 && s <= self.t_max) {
                return Err(Error::Config(format!("snapshot time {s} outside [0, t_max]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub graph: RadialGraph,
    /// Size of the step that produced this state (0 initially).
    pub dt_last: f64,
    pub step_index: usize,
}

impl FlowState {
    pub fn new(graph: RadialGraph) -> Self {
        FlowState { t: 0.0, graph, dt_last: 0.0, step_index: 0 }
    }

    /// `γ̃ = γ − t/n`.
    pub fn rescaled_graph(&self) -> RadialGraph {
        let n = self.graph.dimension().n_f64();
        self.graph.scaled((-self.t / n).exp())
    }
}

/// Diagnostics of one state, all taken on the rescaled surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowRecord {
    pub t: f64,
    /// `∫F(ν)dμ` of the unrescaled surface.
    pub area_f: f64,
    /// `∫H̃_F dμ̃_F`.
    pub h_func: f64,
    /// Extremes of `P = H_F û`.
    pub p_min: f64,
    pub p_max: f64,
    /// `∫P dμ̃_F`.
    pub p_integral: f64,
    pub u_hat_min: f64,
    pub u_hat_max: f64,
    /// Extremes of `F⁰(X̃)`.
    pub gauge_min: f64,
    pub gauge_max: f64,
    /// `∫Σ(κ̃ᵢ − H̃_F/n)² dμ̃_F`.
    pub umb_deficit: f64,
    pub dt: f64,
}

impl FlowRecord {
    pub const CSV_HEADER: &'static str =
        "t,area_F,H_func,P_min,P_max,P_integral,u_hat_min,gauge_min,gauge_max,umb_deficit,dt";

    pub fn to_csv_row(&self) -> String {
        [
            self.t,
            self.area_f,
            self.h_func,
            self.p_min,
            self.p_max,
            self.p_integral,
            self.u_hat_min,
            self.gauge_min,
            self.gauge_max,
            self.umb_deficit,
            self.dt,
        ]
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(",")
    }

    fn is_finite(&self) -> bool {
        [
            self.t,
            self.area_f,
            self.h_func,
            self.p_min,
            self.p_max,
            self.p_integral,
            self.u_hat_min,
            self.u_hat_max,
            self.gauge_min,
            self.gauge_max,
            self.umb_deficit,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Long-time behaviour of the rescaled support function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitReport {
    /// Midrange of `û` on the final rescaled surface.
    pub alpha: f64,
    /// `(area_F(0) / ((n+1) Vol(L)))^{1/n}`, forced by area conservation.
    pub alpha_area_prediction: f64,
    /// `area_F(0)`, the constant as printed in the convergence theorem.
    pub alpha_stated: f64,
    /// `sup |û − α|` at the final time.
    pub final_deviation: f64,
    /// Decay rate `λ` of the fit `sup |û − α| ≈ C e^{−λt}` over the final
    /// third of the run; `NaN` with fewer than 3 usable points.
    pub rate: f64,
    /// RMS residual of the log-linear fit.
    pub rate_residual: f64,
    pub fit_points: usize,
}

impl LimitReport {
    pub fn to_key_values(&self) -> String {
        format!(
            "alpha = {:.16e}\n\
             alpha_area_prediction = {:.16e}\n\
             alpha_stated = {:.16e}\n\
             alpha_discrepancy = {:.16e}\n\
             final_deviation = {:.16e}\n\
             rate = {:.16e}\n\
             rate_residual = {:.16e}\n\
             fit_points = {}\n",
            self.alpha,
            self.alpha_area_prediction,
            self.alpha_stated,
            self.alpha - self.alpha_area_prediction,
            self.final_deviation,
            self.rate,
            self.rate_residual,
            self.fit_points,
        )
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub graph: RadialGraph,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub records: Vec<FlowRecord>,
    pub final_state: FlowState,
    pub limit_report: LimitReport,
    pub snapshots: Vec<Snapshot>,
    /// The run ended on the umbilicity threshold before `t_max`.
    pub stopped_early: bool,
    /// Steps that succeeded only after halving `dt`.
    pub retries: usize,
}

fn breakdown(t: f64, grid: &SphereGrid, node: usize, reason: impl Into<String>) -> Error {
    let d = grid.direction(node);
    Error::FlowBreakdown { t, node, direction: [d[0], d[1], d[2]], reason: reason.into() }
}

fn as_breakdown(t: f64, e: Error) -> Error {
    match e {
        Error::Degenerate { node, direction, reason } => Error::FlowBreakdown { t, node, direction, reason },
        other => other,
    }
}

/// Speed and local diffusion coefficient at every node of `gamma`.
fn speed_and_symbol(
    grid: &SphereGrid,
    gamma: &[f64],
    norm: &MinkowskiNorm,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = grid.dimension();
    let derivs = grid.derivatives(gamma);
    let out: Vec<std::result::Result<(f64, f64), String>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let c = node_core(dim, &grid.direction(i), &grid.frames()[i], gamma[i], &derivs[i], norm)?;
            if !c.h_f.is_finite() {
                return Err(format!("H_F is not finite ({})", c.h_f));
            }
            if c.h_f <= 0.0 {
                return Err(format!("H_F = {:e} is not positive", c.h_f));
            }
            let f = c.norm.value;
            let s = c.s_f;
            let lam = match dim {
                Dimension::Curve => s[(0, 0)],
                Dimension::Surface => sym2_eigenvalues(&((s + s.transpose()) * 0.5)).1,
            };
            let speed = c.w * f / (c.rho * c.h_f);
            Ok((speed, f * lam / (c.h_f * c.h_f)))
        })
        .collect();
    let mut speed = Vec::with_capacity(out.len());
    let mut symbol = Vec::with_capacity(out.len());
    for (i, r) in out.into_iter().enumerate() {
        match r {
            Ok((s, d)) => {
                speed.push(s);
                symbol.push(d);
            }
            Err(reason) => return Err(breakdown(t, grid, i, reason)),
        }
    }
    Ok((speed, symbol))
}

/// `W F(ν) / (ρ H_F)` at every node.
pub fn rhs(graph: &RadialGraph, norm: &MinkowskiNorm) -> Result<ScalarField> {
    let grid = graph.grid();
    let mut gamma = graph.gamma().values().to_vec();
    grid.close_poles(&mut gamma);
    let (speed, _) = speed_and_symbol(grid, &gamma, norm, 0.0)?;
    grid.field(speed)
}

/// Integrates the flow for one norm on one grid.
pub struct FlowSolver {
    norm: MinkowskiNorm,
    grid: Arc<SphereGrid>,
    params: FlowParams,
    filter: Option<PolarFilter>,
    dual: Vec<f64>,
}

impl std::fmt::Debug for FlowSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowSolver").field("params", &self.params).finish_non_exhaustive()
    }
}

impl FlowSolver {
    pub fn new(norm: MinkowskiNorm, grid: Arc<SphereGrid>, params: FlowParams) -> Result<Self> {
        params.validate()?;
        if norm.dimension() != grid.dimension() {
            return Err(Error::Config("norm and grid dimensions differ".into()));
        }
        let filter = if params.polar_filter { PolarFilter::new(&grid) } else { None };
        let dual = dual_on_grid(&grid, &norm)?;
        Ok(FlowSolver { norm, grid, params, filter, dual })
    }

    pub fn norm(&self) -> &MinkowskiNorm {
        &self.norm
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    fn check_graph(&self, graph: &RadialGraph) -> Result<()> {
        if !Arc::ptr_eq(graph.grid(), &self.grid) && graph.grid().len() != self.grid.len() {
            return Err(Error::Config("graph lives on a different grid".into()));
        }
        Ok(())
    }

    /// Filtered tendency and largest symbol at the (pole-closed) values.
    fn tendency(&self, gamma: &mut [f64], t: f64) -> Result<(Vec<f64>, f64)> {
        self.grid.close_poles(gamma);
        let (mut speed, symbol) = speed_and_symbol(&self.grid, gamma, &self.norm, t)?;
        if let Some(f) = &self.filter {
            f.apply(&mut speed);
        }
        let d_max = symbol.iter().copied().fold(0.0, f64::max);
        Ok((speed, d_max))
    }

    fn dt_from_symbol(&self, d_max: f64) -> f64 {
        let h = self.grid.spacing();
        let stable = if d_max > 0.0 { self.params.c_cfl * h * h / d_max } else { f64::INFINITY };
        stable.min(self.params.dt_max)
    }

    /// Stable step for the state, capped by `dt_max`.
    pub fn choose_dt(&self, state: &FlowState) -> Result<f64> {
        self.check_graph(&state.graph)?;
        let mut gamma = state.graph.gamma().values().to_vec();
        let (_, d_max) = self.tendency(&mut gamma, state.t)?;
        Ok(self.dt_from_symbol(d_max))
    }

    fn rk4(&self, state: &FlowState, k1: &[f64], dt: f64) -> Result<FlowState> {
        let t = state.t;
        let y0 = state.graph.gamma().values();
        let stage = |k: &[f64], a: f64| -> Vec<f64> { y0.iter().zip(k).map(|(y, k)| y + a * k).collect() };
        let mut y = stage(k1, 0.5 * dt);
        let (k2, _) = self.tendency(&mut y, t + 0.5 * dt)?;
        let mut y = stage(&k2, 0.5 * dt);
        let (k3, _) = self.tendency(&mut y, t + 0.5 * dt)?;
        let mut y = stage(&k3, dt);
        let (k4, _) = self.tendency(&mut y, t + dt)?;
        let mut next: Vec<f64> = (0..y0.len())
            .map(|i| y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        self.grid.close_poles(&mut next);
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(breakdown(t + dt, &self.grid, i, "log-radius became non-finite"));
        }
        let mut graph = state.graph.clone();
        graph.gamma_mut().copy_from_slice(&next);
        Ok(FlowState { t: t + dt, graph, dt_last: dt, step_index: state.step_index + 1 })
    }

    /// One RK4 step of size `dt`.
    pub fn step(&self, state: &FlowState, dt: f64) -> Result<FlowState> {
        self.check_graph(&state.graph)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let mut y = state.graph.gamma().values().to_vec();
        let (k1, _) = self.tendency(&mut y, state.t)?;
        self.rk4(state, &k1, dt)
    }

    /// Diagnostics of a state.
    pub fn record(&self, state: &FlowState) -> Result<FlowRecord> {
        let mut graph = state.graph.clone();
        self.grid.close_poles(graph.gamma_mut());
        let fields = compute_fields(&graph, &self.norm).map_err(|e| as_breakdown(state.t, e))?;
        let rec = self.record_from_fields(state, &fields);
        if !rec.is_finite() {
            return Err(Error::Numeric(format!("non-finite diagnostics at t = {}", state.t)));
        }
        Ok(rec)
    }

    fn record_from_fields(&self, state: &FlowState, fields: &GeometryFields) -> FlowRecord {
        let t = state.t;
        let n = self.grid.dimension().n_f64();
        let shrink = (-t / n).exp();
        let area_f = anisotropic_area(fields);
        let p = fields.p();
        let p_weighted: Vec<f64> = p.iter().zip(&fields.mu_f_weight).map(|(p, w)| p * w).collect();
        let umb: Vec<f64> = match self.grid.dimension() {
            Dimension::Curve => vec![0.0],
            Dimension::Surface => fields
                .kappa_f
                .iter()
                .zip(&fields.h_f)
                .zip(&fields.mu_f_weight)
                .map(|((k, h), w)| {
                    let m = h / n;
                    ((k[0] - m).powi(2) + (k[1] - m).powi(2)) * w
                })
                .collect(),
        };
        let (mut g_min, mut g_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (r, d) in fields.rho.iter().zip(&self.dual) {
            let g = r * d * shrink;
            g_min = g_min.min(g);
            g_max = g_max.max(g);
        }
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        FlowRecord {
            t,
            area_f,
            h_func: ((1.0 - n) * t / n).exp() * total_hf(fields),
            p_min: min(&p),
            p_max: max(&p),
            p_integral: (-t).exp() * pairwise_sum(&p_weighted),
            u_hat_min: min(&fields.u_hat) * shrink,
            u_hat_max: max(&fields.u_hat) * shrink,
            gauge_min: g_min,
            gauge_max: g_max,
            umb_deficit: (2.0 * t / n - t).exp() * pairwise_sum(&umb),
            dt: state.dt_last,
        }
    }

    /// Step from `state` towards `t_target`, retrying once with half the
    /// step after a breakdown.
    fn advance(&self, state: &FlowState, t_target: f64, retries: &mut usize) -> Result<FlowState> {
        let mut y = state.graph.gamma().values().to_vec();
        let (k1, d_max) = self.tendency(&mut y, state.t)?;
        let mut dt = self.dt_from_symbol(d_max);
        let remaining = t_target - state.t;
        // Land exactly on the target, and avoid a sliver step right before it.
        if dt >= remaining * (1.0 - 1e-9) {
            dt = remaining;
        } else if dt > 0.5 * remaining {
            dt = 0.5 * remaining;
        }
        let landing = |s: FlowState| {
            if dt == remaining {
                FlowState { t: t_target, ..s }
            } else {
                s
            }
        };
        match self.rk4(state, &k1, dt) {
            Ok(s) => Ok(landing(s)),
            Err(first) => {
                let half = 0.5 * dt;
                let mid = self.rk4(state, &k1, half).map_err(|_| first)?;
                *retries += 1;
                Ok(mid)
            }
        }
    }

    /// Integrates from `graph` at `t = 0` until `t_max` or the umbilicity
    /// threshold.
    pub fn run(&self, graph: RadialGraph) -> Result<RunResult> {
        self.check_graph(&graph)?;
        let mut state = FlowState::new(graph);
        self.grid.close_poles(state.graph.gamma_mut());
        let first = self.record(&state)?;
        let eps_stop = self.params.eps_stop.unwrap_or(1e-8 * first.area_f);
        // Only a deficit that starts above the threshold can trigger the stop;
        // otherwise Wulff data would end the run at t = 0.
        let stop_enabled = eps_stop > 0.0 && first.umb_deficit >= eps_stop;
        let mut records = vec![first];
        let mut snapshots = Vec::new();
        let mut snaps: Vec<f64> = self.params.snapshot_times.clone();
        snaps.sort_by(f64::total_cmp);
        snaps.dedup();
        let mut next_snap = 0;
        while next_snap < snaps.len() && snaps[next_snap] <= 0.0 {
            snapshots.push(Snapshot { t: 0.0, graph: state.graph.clone() });
            next_snap += 1;
        }
        let interval = self.params.record_interval;
        let t_max = self.params.t_max;
        let mut record_index = 1usize;
        let mut retries = 0;
        let mut stopped_early = false;
        let tiny = 1e-12 * t_max.max(1.0);
        loop {
            let next_record = (record_index as f64 * interval).min(t_max);
            let mut target = next_record;
            if next_snap < snaps.len() {
                target = target.min(snaps[next_snap]);
            }
            state = self.advance(&state, target, &mut retries)?;
            if next_snap < snaps.len() && (snaps[next_snap] - state.t).abs() <= tiny {
                snapshots.push(Snapshot { t: snaps[next_snap], graph: state.graph.clone() });
                next_snap += 1;
            }
            if (next_record - state.t).abs() <= tiny {
                state.t = next_record;
                let rec = self.record(&state)?;
                let done_deficit = stop_enabled && rec.umb_deficit < eps_stop;
                records.push(rec);
                record_index += 1;
                if done_deficit && next_record < t_max {
                    stopped_early = true;
                    break;
                }
                if next_record >= t_max {
                    break;
                }
            }
        }
        let limit_report = self.limit_report(&records)?;
        Ok(RunResult { records, final_state: state, limit_report, snapshots, stopped_early, retries })
    }

    fn limit_report(&self, records: &[FlowRecord]) -> Result<LimitReport> {
        let n = self.grid.dimension().n_f64();
        let first = &records[0];
        let last = records.last().expect("at least one record");
        let alpha = 0.5 * (last.u_hat_min + last.u_hat_max);
        let vol_l = wulff_volume(&self.norm, &self.grid)?;
        let deviation = |r: &FlowRecord| (r.u_hat_max - alpha).max(alpha - r.u_hat_min);
        let t_start = last.t * 2.0 / 3.0;
        let pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.t >= t_start)
            .map(|r| (r.t, deviation(r)))
            .filter(|(_, d)| *d > 0.0)
            .map(|(t, d)| (t, d.ln()))
            .collect();
        let (rate, rate_residual) = if pts.len() >= 3 {
            let (slope, intercept) = least_squares(&pts);
            let ss: f64 = pts.iter().map(|(t, y)| (y - (intercept + slope * t)).powi(2)).sum();
            (-slope, (ss / pts.len() as f64).sqrt())
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(LimitReport {
            alpha,
            alpha_area_prediction: (first.area_f / ((n + 1.0) * vol_l)).powf(1.0 / n),
            alpha_stated: first.area_f,
            final_deviation: deviation(last),
            rate,
            rate_residual,
            fit_points: pts.len(),
        })
    }
}

/// Slope and intercept of the least-squares line through `pts`.
fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let m = pts.len() as f64;
    let tx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ty = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - tx) * (y - ty)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - tx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, ty - slope * tx)
}

/// Runs the flow with a fresh solver.
pub fn run(norm: &MinkowskiNorm, graph: RadialGraph, params: FlowParams) -> Result<RunResult> {
    FlowSolver::new(norm.clone(), graph.grid().clone(), params)?.run(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{HarmonicSeries, HarmonicTerm};

    fn surface_grid(rows: usize) -> Arc<SphereGrid> {
        SphereGrid::build(Dimension::Surface, rows).unwrap()
    }

    fn ellipsoid() -> MinkowskiNorm {
        MinkowskiNorm::ellipsoid_axes(Dimension::Surface, &[1.0, 1.3, 1.7]).unwrap()
    }

    #[test]
    fn sphere_speed_is_one_over_n() {
        let g = surface_grid(32);
        let r = rhs(&RadialGraph::sphere(&g, 2.5).unwrap(), &MinkowskiNorm::euclidean(Dimension::Surface)).unwrap();
        for v in r.values() {
            assert!((v - 0.5).abs() < 1e-12, "{v}");
        }
        let c = SphereGrid::circle(64).unwrap();
        let r = rhs(&RadialGraph::sphere(&c, 0.3).unwrap(), &MinkowskiNorm::euclidean(Dimension::Curve)).unwrap();
        for v in r.values() {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn wulff_speed_is_one_over_n() {
        let g = surface_grid(48);
        let norm = ellipsoid();
        let r = rhs(&RadialGraph::wulff(&g, &norm, 1.0).unwrap(), &norm).unwrap();
        let err = r.values().iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn spheroid_equator_speed() {
        // Spheroid with semi-axes (a, a, c): at the equator the curvatures are
        // 1/a (parallel) and a/c² (meridian ellipse), with ν = x.
        let (a, c) = (1.0, 1.4);
        // An odd row count puts row 32 on the equator.
        let g = SphereGrid::lat_long(63, 126).unwrap();
        let graph = RadialGraph::from_radius(&g, |x| {
            let s2 = x[0] * x[0] + x[1] * x[1];
            1.0 / (s2 / (a * a) + x[2] * x[2] / (c * c)).sqrt()
        })
        .unwrap();
        let r = rhs(&graph, &MinkowskiNorm::euclidean(Dimension::Surface)).unwrap();
        let expect = 1.0 / (a * (1.0 / a + a / (c * c)));
        for col in 0..126 {
            let i = g.node(32, col);
            assert!(g.direction(i)[2].abs() < 1e-15);
            assert!((r.values()[i] - expect).abs() < 1e-6, "{}", r.values()[i] - expect);
        }
    }

    #[test]
    fn sphere_gains_t_over_n() {
        let g = surface_grid(24);
        let norm = MinkowskiNorm::euclidean(Dimension::Surface);
        let s = FlowSolver::new(norm, g.clone(), FlowParams::default()).unwrap();
        let mut state = FlowState::new(RadialGraph::sphere(&g, 1.0).unwrap());
        for _ in 0..5 {
            let dt = s.choose_dt(&state).unwrap();
            state = s.step(&state, dt).unwrap();
        }
        for v in state.graph.gamma().values() {
            assert!((v - state.t / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn step_is_scale_invariant() {
        let g = surface_grid(24);
        let norm = ellipsoid();
        let s = FlowSolver::new(norm, g.clone(), FlowParams::default()).unwrap();
        let small = FlowState::new(RadialGraph::sphere(&g, 1.0).unwrap());
        let big = FlowState::new(RadialGraph::sphere(&g, 50.0).unwrap());
        let a = s.choose_dt(&small).unwrap();
        let b = s.choose_dt(&big).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn wulff_stays_homothetic() {
        let g = surface_grid(32);
        let norm = ellipsoid();
        let params = FlowParams { t_max: 0.5, ..FlowParams::default() };
        let res = run(&norm, RadialGraph::wulff(&g, &norm, 1.0).unwrap(), params).unwrap();
        let dual = dual_on_grid(&g, &norm).unwrap();
        let t = res.final_state.t;
        assert!((t - 0.5).abs() < 1e-14);
        let err = res
            .final_state
            .graph
            .radius()
            .iter()
            .zip(&dual)
            .map(|(r, d)| (r * d * (-t / 2.0).exp() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
        assert!(!res.stopped_early);
        assert_eq!(res.records.len(), 51);
    }

    #[test]
    fn curve_flow_area_law() {
        let g = SphereGrid::circle(128).unwrap();
        let norm = MinkowskiNorm::ellipsoid_axes(Dimension::Curve, &[1.0, 1.6]).unwrap();
        let graph = RadialGraph::from_radius(&g, |x| 1.0 + 0.1 * (2.0 * x[1].atan2(x[0])).cos()).unwrap();
        let params = FlowParams { t_max: 1.0, record_interval: 0.25, ..FlowParams::default() };
        let res = run(&norm, graph, params).unwrap();
        let a0 = res.records[0].area_f;
        for r in &res.records {
            assert!((r.area_f / (a0 * r.t.exp()) - 1.0).abs() < 1e-6, "{r:?}");
            assert_eq!(r.umb_deficit, 0.0);
        }
    }

    #[test]
    fn records_land_on_interval_and_snapshots() {
        let g = surface_grid(16);
        let norm = MinkowskiNorm::euclidean(Dimension::Surface);
        let params = FlowParams {
            t_max: 0.1,
            record_interval: 0.03,
            snapshot_times: vec![0.0, 0.05, 0.1],
            ..FlowParams::default()
        };
        let graph = RadialGraph::from_radius(&g, |x| 1.0 + 0.1 * x[2] * x[2]).unwrap();
        let res = run(&norm, graph, params).unwrap();
        let ts: Vec<f64> = res.records.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 5);
        for (t, e) in ts.iter().zip([0.0, 0.03, 0.06, 0.09, 0.1]) {
            assert!((t - e).abs() < 1e-15, "{t} vs {e}");
        }
        let st: Vec<f64> = res.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(st, vec![0.0, 0.05, 0.1]);
        assert_eq!(res.records[0].dt, 0.0);
    }

    #[test]
    fn breakdown_is_located() {
        let g = surface_grid(24);
        let norm = MinkowskiNorm::euclidean(Dimension::Surface);
        let graph = RadialGraph::from_radius(&g, |x| 1.0 + 0.95 * x[2]).unwrap();
        match rhs(&graph, &norm) {
            Err(Error::FlowBreakdown { reason, .. }) => assert!(reason.contains("H_F")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn perturbed_sphere_monotone() {
        let g = surface_grid(24);
        let norm = MinkowskiNorm::euclidean(Dimension::Surface);
        let y20 = HarmonicSeries::new(1.0, vec![HarmonicTerm::new(2, 0, 0.2)]);
        let graph = RadialGraph::from_radius(&g, |x| y20.eval(Dimension::Surface, x)).unwrap();
        let params = FlowParams { t_max: 1.0, record_interval: 0.05, ..FlowParams::default() };
        let res = run(&norm, graph, params).unwrap();
        let r = &res.records;
        for w in r.windows(2) {
            assert!(w[1].h_func <= w[0].h_func * (1.0 + 1e-6));
            assert!(w[1].u_hat_min >= w[0].u_hat_min * (1.0 - 1e-6));
        }
        assert!(r.last().unwrap().umb_deficit < 0.1 * r[0].umb_deficit);
        let p0 = r[0].p_integral;
        for x in r {
            assert!((x.p_integral / p0 - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn halving_cfl_leaves_solution_unchanged() {
        let g = surface_grid(24);
        let norm = ellipsoid();
        let y = HarmonicSeries::new(1.0, vec![HarmonicTerm::new(2, 0, 0.2), HarmonicTerm::new(3, 1, 0.05)]);
        let graph = RadialGraph::from_radius(&g, |x| y.eval(Dimension::Surface, x)).unwrap();
        let solve = |c_cfl| {
            let params = FlowParams { c_cfl, t_max: 1.0, record_interval: 1.0, eps_stop: Some(0.0), ..FlowParams::default() };
            run(&norm, graph.clone(), params).unwrap()
        };
        let coarse = solve(0.15);
        let fine = solve(0.075);
        assert!(coarse.records.last().unwrap().dt < FlowParams::default().dt_max);
        let diff = coarse
            .final_state
            .graph
            .radius()
            .iter()
            .zip(fine.final_state.graph.radius())
            .map(|(a, b)| (a / b - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn csv_row_has_all_columns() {
        let rec = FlowRecord {
            t: 0.0,
            area_f: 1.0,
            h_func: 2.0,
            p_min: 1.0,
            p_max: 1.0,
            p_integral: 1.0,
            u_hat_min: 1.0,
            u_hat_max: 1.0,
            gauge_min: 1.0,
            gauge_max: 1.0,
            umb_deficit: 0.0,
            dt: 0.0,
        };
        assert_eq!(rec.to_csv_row().split(',').count(), FlowRecord::CSV_HEADER.split(',').count());
    }
}
