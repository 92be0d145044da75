//! Run configuration: an INI-like text format with `[section]` headers and
//! `key = value` lines.
//!
//! ```text
//! [grid]
//! dimension = 2
//! resolution = 64
//!
//! [norm]
//! family = ellipsoid
//! axes = 1, 1.3, 1.7
//!
//! [initial]
//! shape = harmonic
//! radius = 1
//! terms = 2:0:0.2
//!
//! [flow]
//! t_max = 6
//!
//! [output]
//! directory = out
//! ```
//!
//! `#` and `;` start comments. Lists are comma separated; harmonic terms are
//! written `degree:order:amplitude`. Every key has a default except those
//! that select a variant (`family`, `shape`) and their required parameters.
//! Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::functionals::{TOL_EQUALITY, TOL_INEQUALITY};
use crate::geometry::RadialGraph;
use crate::harmonics::{HarmonicSeries, HarmonicTerm};
use crate::norm::{DerivativeMode, MinkowskiNorm, NormFamily};
use crate::sphere_grid::SphereGrid;
use crate::Dimension;

/// The anisotropy as written in the configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum NormSpec {
    Euclidean,
    /// Symmetric positive definite matrix, row-major; `n+1` square.
    Ellipsoid { matrix: Vec<f64> },
    PerturbedSphere { terms: Vec<HarmonicTerm> },
    BlendedLp { p: f64, blend: f64 },
}

/// Initial surface.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    Sphere { radius: f64 },
    /// `λ𝒲`.
    Wulff { scale: f64 },
    /// `ρ = radius + Σ amplitude·Y`.
    Harmonic { radius: f64, terms: Vec<HarmonicTerm> },
    /// A file of `node, ρ` lines covering every grid node.
    Table { path: PathBuf },
}

/// Settings of the `inequality`, `norm-check` and `variation-check` commands.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckSpec {
    pub tol_inequality: f64,
    pub tol_equality: f64,
    /// Directions sampled by the norm check.
    pub samples: usize,
    /// Perturbation `ψ` of the variation check.
    pub psi_constant: f64,
    pub psi_terms: Vec<HarmonicTerm>,
    /// `ε` ladder of the variation check, decreasing with constant ratio.
    pub epsilons: Vec<f64>,
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec {
            tol_inequality: TOL_INEQUALITY,
            tol_equality: TOL_EQUALITY,
            samples: 1000,
            psi_constant: 0.0,
            psi_terms: vec![HarmonicTerm::new(2, 1, 1.0)],
            epsilons: vec![4e-4, 2e-4, 1e-4],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dimension: Dimension,
    /// `N_θ` on S² (with `2N_θ` longitudes) or the node count on S¹.
    pub resolution: usize,
    pub norm: NormSpec,
    pub derivative_mode: DerivativeMode,
    pub initial: InitialSpec,
    pub flow: FlowParams,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub check: CheckSpec,
}

impl RunConfig {
    pub fn default_resolution(dim: Dimension) -> usize {
        match dim {
            Dimension::Curve => 256,
            Dimension::Surface => 64,
        }
    }

    /// Unit sphere under the Euclidean norm with all defaults.
    pub fn new(dimension: Dimension) -> Self {
        RunConfig {
            dimension,
            resolution: Self::default_resolution(dimension),
            norm: NormSpec::Euclidean,
            derivative_mode: DerivativeMode::Analytic,
            initial: InitialSpec::Sphere { radius: 1.0 },
            flow: FlowParams::default(),
            threads: 0,
            output_dir: PathBuf::from("out"),
            check: CheckSpec::default(),
        }
    }

    pub fn build_grid(&self) -> Result<Arc<SphereGrid>> {
        SphereGrid::build(self.dimension, self.resolution)
    }

    pub fn build_norm(&self) -> Result<MinkowskiNorm> {
        let family = match &self.norm {
            NormSpec::Euclidean => NormFamily::Euclidean,
            NormSpec::Ellipsoid { matrix } => {
                let k = self.dimension.n() + 1;
                if matrix.len() != k * k {
                    return Err(Error::Config(format!(
                        "norm.matrix needs {} entries for dimension {}, got {}",
                        k * k,
                        self.dimension.n(),
                        matrix.len()
                    )));
                }
                let mut m = Matrix3::identity();
                for i in 0..k {
                    for j in 0..k {
                        m[(i, j)] = matrix[i * k + j];
                    }
                }
                NormFamily::Ellipsoid { matrix: m }
            }
            NormSpec::PerturbedSphere { terms } => NormFamily::PerturbedSphere { terms: terms.clone() },
            NormSpec::BlendedLp { p, blend } => NormFamily::BlendedLp { p: *p, blend: *blend },
        };
        MinkowskiNorm::new(self.dimension, family, self.derivative_mode)
            .map_err(|e| Error::Config(format!("[norm]: {}", strip_prefix(&e))))
    }

    pub fn build_initial(&self, grid: &Arc<SphereGrid>, norm: &MinkowskiNorm) -> Result<RadialGraph> {
        let dim = self.dimension;
        match &self.initial {
            InitialSpec::Sphere { radius } => RadialGraph::sphere(grid, *radius),
            InitialSpec::Wulff { scale } => RadialGraph::wulff(grid, norm, *scale),
            InitialSpec::Harmonic { radius, terms } => {
                let series = HarmonicSeries::new(*radius, terms.clone());
                series.validate(dim)?;
                RadialGraph::from_radius(grid, |x| series.eval(dim, x))
            }
            InitialSpec::Table { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let values = parse_table(&text, grid.len())?;
                let gamma = values.iter().map(|r| r.ln()).collect();
                RadialGraph::new(grid.field(gamma)?)
            }
        }
    }

    pub fn psi_series(&self) -> HarmonicSeries {
        HarmonicSeries::new(self.check.psi_constant, self.check.psi_terms.clone())
    }

    /// Semantic checks beyond what parsing enforces.
    pub fn validate(&self) -> Result<()> {
        self.build_grid().map_err(|e| Error::Config(format!("grid.resolution: {}", strip_prefix(&e))))?;
        self.build_norm()?;
        self.flow.validate()?;
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{key} must be positive, got {v}")))
            }
        };
        match &self.initial {
            InitialSpec::Sphere { radius } => positive("initial.radius", *radius)?,
            InitialSpec::Wulff { scale } => positive("initial.scale", *scale)?,
            InitialSpec::Harmonic { radius, terms } => {
                positive("initial.radius", *radius)?;
                HarmonicSeries::new(*radius, terms.clone())
                    .validate(self.dimension)
                    .map_err(|e| Error::Config(format!("initial.terms: {}", strip_prefix(&e))))?;
            }
            InitialSpec::Table { .. } => {}
        }
        positive("check.tol_inequality", self.check.tol_inequality)?;
        positive("check.tol_equality", self.check.tol_equality)?;
        if self.check.samples < crate::norm::MIN_VALIDATION_SAMPLES {
            return Err(Error::Config(format!(
                "check.samples must be at least {}, got {}",
                crate::norm::MIN_VALIDATION_SAMPLES,
                self.check.samples
            )));
        }
        self.psi_series()
            .validate(self.dimension)
            .map_err(|e| Error::Config(format!("check.psi_terms: {}", strip_prefix(&e))))?;
        if self.check.epsilons.is_empty() {
            return Err(Error::Config("check.epsilons must not be empty".into()));
        }
        for &e in &self.check.epsilons {
            positive("check.epsilons", e)?;
        }
        if self.check.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("check.epsilons must be strictly decreasing".into()));
        }
        Ok(())
    }

    /// Canonical text form; parsing it returns an equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line("[grid]".into());
        line(format!("dimension = {}", self.dimension.n()));
        line(format!("resolution = {}", self.resolution));
        line(String::new());
        line("[norm]".into());
        match &self.norm {
            NormSpec::Euclidean => line("family = euclidean".into()),
            NormSpec::Ellipsoid { matrix } => {
                line("family = ellipsoid".into());
                line(format!("matrix = {}", real_list(matrix)));
            }
            NormSpec::PerturbedSphere { terms } => {
                line("family = perturbed_sphere".into());
                line(format!("terms = {}", term_list(terms)));
            }
            NormSpec::BlendedLp { p, blend } => {
                line("family = blended_lp".into());
                line(format!("p = {}", real(*p)));
                line(format!("blend = {}", real(*blend)));
            }
        }
        match self.derivative_mode {
            DerivativeMode::Analytic => line("derivative_mode = analytic".into()),
            DerivativeMode::FiniteDifference { step } => {
                line("derivative_mode = finite_difference".into());
                line(format!("fd_step = {}", real(step)));
            }
        }
        line(String::new());
        line("[initial]".into());
        match &self.initial {
            InitialSpec::Sphere { radius } => {
                line("shape = sphere".into());
                line(format!("radius = {}", real(*radius)));
            }
            InitialSpec::Wulff { scale } => {
                line("shape = wulff".into());
                line(format!("scale = {}", real(*scale)));
            }
            InitialSpec::Harmonic { radius, terms } => {
                line("shape = harmonic".into());
                line(format!("radius = {}", real(*radius)));
                line(format!("terms = {}", term_list(terms)));
            }
            InitialSpec::Table { path } => {
                line("shape = table".into());
                line(format!("path = {}", path.display()));
            }
        }
        line(String::new());
        let f = &self.flow;
        line("[flow]".into());
        line(format!("c_cfl = {}", real(f.c_cfl)));
        line(format!("dt_max = {}", real(f.dt_max)));
        line(format!("t_max = {}", real(f.t_max)));
        line(format!("eps_stop = {}", f.eps_stop.map_or("auto".to_string(), real)));
        line(format!("record_interval = {}", real(f.record_interval)));
        line(format!("snapshot_times = {}", real_list(&f.snapshot_times)));
        line(format!("polar_filter = {}", f.polar_filter));
        line(format!("threads = {}", self.threads));
        line(String::new());
        line("[output]".into());
        line(format!("directory = {}", self.output_dir.display()));
        line(String::new());
        let c = &self.check;
        line("[check]".into());
        line(format!("tol_inequality = {}", real(c.tol_inequality)));
        line(format!("tol_equality = {}", real(c.tol_equality)));
        line(format!("samples = {}", c.samples));
        line(format!("psi_constant = {}", real(c.psi_constant)));
        line(format!("psi_terms = {}", term_list(&c.psi_terms)));
        line(format!("epsilons = {}", real_list(&c.epsilons)));
        out
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::Domain(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Shortest representation that parses back to the same value.
fn real(v: f64) -> String {
    format!("{v:?}")
}

fn real_list(v: &[f64]) -> String {
    v.iter().map(|x| real(*x)).collect::<Vec<_>>().join(", ")
}

fn term_list(terms: &[HarmonicTerm]) -> String {
    terms
        .iter()
        .map(|t| format!("{}:{}:{}", t.degree, t.order, real(t.amplitude)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Values of a `node, ρ` table.
fn parse_table(text: &str, len: usize) -> Result<Vec<f64>> {
    let mut values = vec![f64::NAN; len];
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let mut parts = line.split(',').map(str::trim);
        let (Some(i), Some(r), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected `node, radius`, got `{line}`")));
        };
        let i: usize = i.parse().map_err(|_| err(format!("invalid node index `{i}`")))?;
        let r: f64 = r.parse().map_err(|_| err(format!("invalid radius `{r}`")))?;
        if i >= len {
            return Err(err(format!("node {i} outside the grid ({len} nodes)")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(err(format!("radius must be positive, got {r}")));
        }
        if !values[i].is_nan() {
            return Err(err(format!("node {i} listed twice")));
        }
        values[i] = r;
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::Config(format!("radius table is missing node {i}")));
    }
    Ok(values)
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

/// One `key = value` line; `line` is 0 for command-line overrides.
#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

type Raw = BTreeMap<(String, String), Entry>;

const SECTIONS: [&str; 6] = ["grid", "norm", "initial", "flow", "output", "check"];

fn parse_raw(text: &str) -> Result<Raw> {
    let mut raw = Raw::new();
    let mut section: Option<String> = None;
    for (k, full) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = strip_comment(full).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header `{line}`")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(err("missing key before `=`".into()));
        }
        let sec = section.clone().ok_or_else(|| err(format!("key `{key}` appears before any section")))?;
        let entry = Entry { value: value.trim().to_string(), line: line_no };
        if let Some(prev) = raw.insert((sec.clone(), key.to_string()), entry) {
            return Err(err(format!("duplicate key `{key}` in [{sec}] (first set on line {})", prev.line)));
        }
    }
    Ok(raw)
}

/// Applies `section.key=value` overrides.
fn apply_overrides(raw: &mut Raw, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (path, value) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` must have the form section.key=value")))?;
        let (sec, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override `{o}` must have the form section.key=value")))?;
        if !SECTIONS.contains(&sec) {
            return Err(Error::Config(format!("override `{o}` names unknown section [{sec}]")));
        }
        raw.insert((sec.to_string(), key.trim().to_string()), Entry { value: value.trim().to_string(), line: 0 });
    }
    Ok(())
}

/// Typed access to the raw entries; tracks which keys were consumed.
struct Reader {
    raw: Raw,
    used: std::collections::BTreeSet<(String, String)>,
}

impl Reader {
    fn error(&self, sec: &str, key: &str, message: impl std::fmt::Display) -> Error {
        match self.raw.get(&(sec.to_string(), key.to_string())) {
            Some(e) if e.line > 0 => Error::Parse { line: e.line, message: format!("{sec}.{key}: {message}") },
            _ => Error::Config(format!("{sec}.{key}: {message}")),
        }
    }

    fn text(&mut self, sec: &str, key: &str) -> Option<String> {
        let k = (sec.to_string(), key.to_string());
        let v = self.raw.get(&k).map(|e| e.value.clone());
        if v.is_some() {
            self.used.insert(k);
        }
        v
    }

    fn parsed<T: std::str::FromStr>(&mut self, sec: &str, key: &str, what: &str) -> Result<Option<T>> {
        match self.text(sec, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.error(sec, key, format!("expected {what}, got `{v}`"))),
        }
    }

    fn real(&mut self, sec: &str, key: &str) -> Result<Option<f64>> {
        let v = self.parsed::<f64>(sec, key, "a real number")?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(self.error(sec, key, "value must be finite"));
            }
        }
        Ok(v)
    }

    fn real_or(&mut self, sec: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.real(sec, key)?.unwrap_or(default))
    }

    fn required_real(&mut self, sec: &str, key: &str) -> Result<f64> {
        self.real(sec, key)?.ok_or_else(|| Error::Config(format!("{sec}.{key} is required")))
    }

    fn reals(&mut self, sec: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.text(sec, key) else { return Ok(None) };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.error(sec, key, format!("invalid number `{s}` in list")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn terms(&mut self, sec: &str, key: &str) -> Result<Option<Vec<HarmonicTerm>>> {
        let Some(v) = self.text(sec, key) else { return Ok(None) };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|s| {
                let s = s.trim();
                let bad = || self.error(sec, key, format!("expected degree:order:amplitude, got `{s}`"));
                let parts: Vec<&str> = s.split(':').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                let degree = parts[0].parse().map_err(|_| bad())?;
                let order = parts[1].parse().map_err(|_| bad())?;
                let amplitude: f64 = parts[2].parse().map_err(|_| bad())?;
                if !amplitude.is_finite() {
                    return Err(bad());
                }
                Ok(HarmonicTerm::new(degree, order, amplitude))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn bool_or(&mut self, sec: &str, key: &str, default: bool) -> Result<bool> {
        match self.text(sec, key).as_deref() {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(self.error(sec, key, format!("expected true or false, got `{v}`"))),
        }
    }

    fn reject_unused(&self) -> Result<()> {
        for ((sec, key), e) in &self.raw {
            if !self.used.contains(&(sec.clone(), key.clone())) {
                let message = format!("unknown key `{key}` in [{sec}]");
                return Err(if e.line > 0 {
                    Error::Parse { line: e.line, message }
                } else {
                    Error::Config(format!("{message} (from --override)"))
                });
            }
        }
        Ok(())
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut raw = parse_raw(text)?;
    apply_overrides(&mut raw, overrides)?;
    let mut r = Reader { raw, used: Default::default() };

    let n = r.parsed::<usize>("grid", "dimension", "1 or 2")?.unwrap_or(2);
    let dimension = Dimension::from_n(n).map_err(|_| r.error("grid", "dimension", format!("must be 1 or 2, got {n}")))?;
    let mut cfg = RunConfig::new(dimension);
    if let Some(res) = r.parsed::<usize>("grid", "resolution", "a positive integer")? {
        cfg.resolution = res;
    }

    let family = r.text("norm", "family").unwrap_or_else(|| "euclidean".into());
    cfg.norm = match family.as_str() {
        "euclidean" => NormSpec::Euclidean,
        "ellipsoid" => {
            let k = dimension.n() + 1;
            match (r.reals("norm", "matrix")?, r.reals("norm", "axes")?) {
                (Some(_), Some(_)) => {
                    return Err(r.error("norm", "axes", "give either norm.matrix or norm.axes, not both"))
                }
                (Some(m), None) => NormSpec::Ellipsoid { matrix: m },
                (None, Some(a)) => {
                    if a.len() != k {
                        return Err(r.error("norm", "axes", format!("expected {k} semi-axes, got {}", a.len())));
                    }
                    let mut m = vec![0.0; k * k];
                    for (i, v) in a.iter().enumerate() {
                        m[i * k + i] = *v;
                    }
                    NormSpec::Ellipsoid { matrix: m }
                }
                (None, None) => return Err(Error::Config("norm.matrix or norm.axes is required for family ellipsoid".into())),
            }
        }
        "perturbed_sphere" => NormSpec::PerturbedSphere {
            terms: r.terms("norm", "terms")?.ok_or_else(|| Error::Config("norm.terms is required for family perturbed_sphere".into()))?,
        },
        "blended_lp" => NormSpec::BlendedLp { p: r.required_real("norm", "p")?, blend: r.required_real("norm", "blend")? },
        other => {
            return Err(r.error(
                "norm",
                "family",
                format!("unknown family `{other}` (euclidean, ellipsoid, perturbed_sphere, blended_lp)"),
            ))
        }
    };
    cfg.derivative_mode = match r.text("norm", "derivative_mode").as_deref() {
        None | Some("analytic") => {
            if r.raw.contains_key(&("norm".to_string(), "fd_step".to_string())) {
                return Err(r.error("norm", "fd_step", "only valid with derivative_mode = finite_difference"));
            }
            DerivativeMode::Analytic
        }
        Some("finite_difference") => DerivativeMode::FiniteDifference {
            step: r.real_or("norm", "fd_step", DerivativeMode::DEFAULT_FD_STEP)?,
        },
        Some(other) => {
            return Err(r.error("norm", "derivative_mode", format!("expected analytic or finite_difference, got `{other}`")))
        }
    };

    let shape = r.text("initial", "shape").unwrap_or_else(|| "sphere".into());
    cfg.initial = match shape.as_str() {
        "sphere" => InitialSpec::Sphere { radius: r.real_or("initial", "radius", 1.0)? },
        "wulff" => InitialSpec::Wulff { scale: r.real_or("initial", "scale", 1.0)? },
        "harmonic" => InitialSpec::Harmonic {
            radius: r.real_or("initial", "radius", 1.0)?,
            terms: r.terms("initial", "terms")?.unwrap_or_default(),
        },
        "table" => InitialSpec::Table {
            path: r
                .text("initial", "path")
                .map(PathBuf::from)
                .ok_or_else(|| Error::Config("initial.path is required for shape table".into()))?,
        },
        other => {
            return Err(r.error("initial", "shape", format!("unknown shape `{other}` (sphere, wulff, harmonic, table)")))
        }
    };

    let d = FlowParams::default();
    cfg.flow = FlowParams {
        c_cfl: r.real_or("flow", "c_cfl", d.c_cfl)?,
        dt_max: r.real_or("flow", "dt_max", d.dt_max)?,
        t_max: r.real_or("flow", "t_max", d.t_max)?,
        eps_stop: match r.text("flow", "eps_stop").as_deref() {
            None | Some("auto") => None,
            Some(_) => Some(r.required_real("flow", "eps_stop")?),
        },
        record_interval: r.real_or("flow", "record_interval", d.record_interval)?,
        snapshot_times: r.reals("flow", "snapshot_times")?.unwrap_or_default(),
        polar_filter: r.bool_or("flow", "polar_filter", d.polar_filter)?,
    };
    cfg.threads = r.parsed::<usize>("flow", "threads", "a non-negative integer")?.unwrap_or(0);

    if let Some(dir) = r.text("output", "directory") {
        if dir.is_empty() {
            return Err(r.error("output", "directory", "must not be empty"));
        }
        cfg.output_dir = PathBuf::from(dir);
    }

    let c = CheckSpec::default();
    cfg.check = CheckSpec {
        tol_inequality: r.real_or("check", "tol_inequality", c.tol_inequality)?,
        tol_equality: r.real_or("check", "tol_equality", c.tol_equality)?,
        samples: r.parsed("check", "samples", "a positive integer")?.unwrap_or(c.samples),
        psi_constant: r.real_or("check", "psi_constant", c.psi_constant)?,
        psi_terms: r.terms("check", "psi_terms")?.unwrap_or(c.psi_terms),
        epsilons: r.reals("check", "epsilons")?.unwrap_or(c.epsilons),
    };

    r.reject_unused()?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a configuration file. Relative table paths are resolved
/// against the file's directory.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config_with_overrides(&text, overrides)?;
    if let InitialSpec::Table { path: table } = &mut cfg.initial {
        if table.is_relative() {
            if let Some(dir) = path.parent() {
                *table = dir.join(&*table);
            }
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_round_trips() {
        let cfg = parse_config("[norm]\nfamily = euclidean\n[initial]\nshape = sphere\nradius = 1\n").unwrap();
        assert_eq!(cfg, RunConfig::new(Dimension::Surface));
        let again = parse_config(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn full_config_round_trips() {
        let text = "
# everything non-default
[grid]
dimension = 2
resolution = 40
[norm]
family = perturbed_sphere
terms = 2:1:0.05, 3:-2:0.01   ; inline comment
derivative_mode = finite_difference
fd_step = 2e-5
[initial]
shape = harmonic
radius = 1.5
terms = 2:0:0.2
[flow]
c_cfl = 0.1
dt_max = 0.005
t_max = 2.5
eps_stop = 0
record_interval = 0.05
snapshot_times = 0, 1.25, 2.5
polar_filter = false
threads = 3
[output]
directory = results/run1
[check]
tol_inequality = 1e-9
tol_equality = 1e-3
samples = 64
psi_constant = 0.5
psi_terms = 1:0:1, 4:3:0.25
epsilons = 1e-3, 5e-4
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.flow.eps_stop, Some(0.0));
        assert_eq!(cfg.threads, 3);
        assert_eq!(cfg.flow.snapshot_times, vec![0.0, 1.25, 2.5]);
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("[flow]\ndtmax = 0.1\n").unwrap_err();
        match &err {
            Error::Parse { line, message } => {
                assert_eq!(*line, 2);
                assert!(message.contains("dtmax"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_spd_matrix_is_a_semantic_error() {
        let err = parse_config("[norm]\nfamily = ellipsoid\nmatrix = 1,0,0, 0,-1,0, 0,0,1\n").unwrap_err();
        match err {
            Error::Config(m) => assert!(m.contains("positive definite"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_lines() {
        for (text, line) in [
            ("[grid]\nresolution 64\n", 2),
            ("[grid\n", 1),
            ("\n\n[nope]\n", 3),
            ("resolution = 1\n", 1),
            ("[grid]\nresolution = 32\nresolution = 48\n", 3),
            ("[flow]\nt_max = soon\n", 2),
        ] {
            match parse_config(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn overrides_replace_and_validate() {
        let cfg = parse_config_with_overrides("[flow]\nt_max = 1\n", &["flow.t_max=3".into(), "grid.resolution = 32".into()])
            .unwrap();
        assert_eq!(cfg.flow.t_max, 3.0);
        assert_eq!(cfg.resolution, 32);
        assert!(parse_config_with_overrides("", &["flow.tmax=3".into()]).is_err());
        assert!(parse_config_with_overrides("", &["t_max=3".into()]).is_err());
    }

    #[test]
    fn semantic_errors_name_keys() {
        for (text, key) in [
            ("[flow]\nc_cfl = -1\n", "c_cfl"),
            ("[grid]\nresolution = 4\n", "grid.resolution"),
            ("[initial]\nshape = sphere\nradius = 0\n", "initial.radius"),
            ("[check]\nepsilons = 1e-4, 2e-4\n", "check.epsilons"),
            ("[norm]\nfamily = ellipsoid\naxes = 1, 2\n", "norm.axes"),
        ] {
            let msg = parse_config(text).unwrap_err().to_string();
            assert!(msg.contains(key), "{text}: {msg}");
        }
    }

    #[test]
    fn axes_shorthand() {
        let cfg = parse_config("[grid]\ndimension = 1\n[norm]\nfamily = ellipsoid\naxes = 1, 2\n").unwrap();
        assert_eq!(cfg.norm, NormSpec::Ellipsoid { matrix: vec![1.0, 0.0, 0.0, 2.0] });
        assert_eq!(cfg.resolution, 256);
        cfg.build_norm().unwrap();
    }

    #[test]
    fn radius_table() {
        let grid = SphereGrid::circle(8).unwrap();
        let text: String = (0..8).map(|i| format!("{i}, {}\n", 1.0 + 0.1 * i as f64)).collect();
        let v = parse_table(&format!("# node, rho\n{text}"), 8).unwrap();
        assert_eq!(v[3], 1.3);
        assert!(parse_table("0, 1\n", grid.len()).is_err());
        assert!(matches!(parse_table("0, -1\n", 1), Err(Error::Parse { line: 1, .. })));
    }
}
