//! Dispersal kernels: construction, tail function, moments and tail classification.
//!
//! A [`Kernel`] is an even, nonnegative probability density on the real line.
//! Besides pointwise evaluation it carries a cached table of the one-sided tail
//! `Ĵ(z) = ∫_z^∞ J(y) dy` on a geometric mesh, which is what the boundary-flux
//! integrals and the wave-speed functional consume.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::quad::{gauss_legendre, gauss_legendre_split};
use crate::stats::fit_line;

/// Default tail budget: the numerical support is cut where `Ĵ < DEFAULT_EPS_TAIL`.
pub const DEFAULT_EPS_TAIL: f64 = 1e-8;

/// Ratio between consecutive tail-table abscissae.
pub const TAIL_MESH_RATIO: f64 = 1.05;

/// First nonzero tail-table abscissa, relative to the kernel core scale.
const TAIL_MESH_START: f64 = 1e-3;

/// Hard cap on tail-table size; only reachable for absurd parameter choices.
const TAIL_MESH_MAX: usize = 20_000;

fn default_core_width() -> f64 {
    1.0
}

/// Parametric description of a kernel, as it appears in scenario configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    /// `J = 1/(2r)` on `[-r, r]`.
    Uniform { radius: f64 },
    /// `J = e^{-|x|/s} / (2s)`.
    Laplace { scale: f64 },
    /// Centred normal density.
    Gaussian { sigma: f64 },
    /// `J ∝ (w + |x|)^{-γ}`, with `w` the core width.
    Powerlaw {
        gamma: f64,
        #[serde(default = "default_core_width")]
        core_width: f64,
    },
    /// Piecewise-linear density through symmetric samples, zero outside them.
    Table { points: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("power-law kernel with gamma = {0} is not normalizable (need gamma > 1)")]
    NonNormalizable(f64),
    #[error("table value {value} at index {index} is negative")]
    NegativeTableValue { index: usize, value: f64 },
    #[error("invalid kernel parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid kernel table: {0}")]
    InvalidTable(String),
    #[error("tail budget {0} outside (0, 1e-4]")]
    InvalidTailBudget(f64),
    #[error("exponential moment needs lambda > 0, got {0}")]
    InvalidLambda(f64),
}

/// A moment that may diverge. `Infinite` compares greater than every finite value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn is_finite(self) -> bool {
        matches!(self, Moment::Finite(_))
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }
}

impl PartialOrd for Moment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Moment::Finite(a), Moment::Finite(b)) => a.partial_cmp(b),
            (Moment::Finite(_), Moment::Infinite) => Some(Less),
            (Moment::Infinite, Moment::Finite(_)) => Some(Greater),
            (Moment::Infinite, Moment::Infinite) => Some(Equal),
        }
    }
}

/// Moment-condition flags and the fitted tail exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub satisfies_j1: bool,
    pub satisfies_j2: bool,
    /// Fitted `γ` such that `J(x) ~ |x|^{-γ}`; `None` for compact support or
    /// super-polynomial decay.
    pub gamma_hat: Option<f64>,
    pub gamma_stderr: Option<f64>,
}

/// Half-line piecewise-linear representation of a table kernel (unnormalized).
#[derive(Clone, Debug)]
struct HalfTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// `suffix[k] = ∫_{xs[k]}^{end} y`.
    suffix: Vec<f64>,
}

impl HalfTable {
    fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        let last = *self.xs.last().unwrap();
        if ax > last {
            return 0.0;
        }
        let k = self.xs.partition_point(|&p| p <= ax);
        if k == 0 {
            return self.ys[0];
        }
        if k >= self.xs.len() {
            return *self.ys.last().unwrap();
        }
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (ax - x0) / (x1 - x0)
    }

    fn tail(&self, z: f64) -> f64 {
        let last = *self.xs.last().unwrap();
        if z >= last {
            return 0.0;
        }
        let k = self.xs.partition_point(|&p| p <= z);
        // z lies in [xs[k-1], xs[k])
        let b = self.xs[k];
        (b - z) * 0.5 * (self.eval(z) + self.ys[k]) + self.suffix[k]
    }
}

fn build_half_table(points: &[f64], values: &[f64]) -> Result<HalfTable, KernelError> {
    if points.len() != values.len() {
        return Err(KernelError::InvalidTable(format!(
            "{} points but {} values",
            points.len(),
            values.len()
        )));
    }
    if points.len() < 2 {
        return Err(KernelError::InvalidTable("need at least two samples".into()));
    }
    for (index, &value) in values.iter().enumerate() {
        if value < 0.0 {
            return Err(KernelError::NegativeTableValue { index, value });
        }
        if !value.is_finite() {
            return Err(KernelError::InvalidTable(format!("value at {index} is not finite")));
        }
    }
    if points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(KernelError::InvalidTable("points must be strictly increasing".into()));
    }
    let n = points.len();
    let span = points[n - 1].abs().max(points[0].abs());
    for i in 0..n {
        let j = n - 1 - i;
        if (points[i] + points[j]).abs() > 1e-12 * span {
            return Err(KernelError::InvalidTable("sample grid not symmetric about 0".into()));
        }
        let scale = values[i].abs().max(values[j].abs()).max(f64::MIN_POSITIVE);
        if (values[i] - values[j]).abs() > 1e-12 * scale {
            return Err(KernelError::InvalidTable("values are not even".into()));
        }
    }
    let mut xs = vec![0.0];
    let mut ys = Vec::new();
    let first_pos = points.partition_point(|&p| p < 0.0);
    if points[first_pos].abs() <= 1e-15 * span {
        ys.push(values[first_pos]);
        for k in first_pos + 1..n {
            xs.push(points[k]);
            ys.push(values[k]);
        }
    } else {
        // even count: J(0) interpolated between ±p, which are equal
        ys.push(values[first_pos]);
        for k in first_pos..n {
            xs.push(points[k]);
            ys.push(values[k]);
        }
    }
    if ys[0] <= 0.0 {
        return Err(KernelError::InvalidTable("J(0) must be positive".into()));
    }
    let m = xs.len();
    let mut suffix = vec![0.0; m];
    for k in (0..m - 1).rev() {
        suffix[k] = suffix[k + 1] + 0.5 * (xs[k + 1] - xs[k]) * (ys[k] + ys[k + 1]);
    }
    Ok(HalfTable { xs, ys, suffix })
}

#[derive(Clone, Debug)]
enum Shape {
    Uniform { radius: f64 },
    Laplace { scale: f64 },
    Gaussian { sigma: f64 },
    Powerlaw { gamma: f64, width: f64 },
    Table(HalfTable),
}

/// A normalized, even dispersal kernel with a cached tail table.
#[derive(Clone, Debug)]
pub struct Kernel {
    spec: KernelSpec,
    shape: Shape,
    normalizer: f64,
    eps_tail: f64,
    tail_z: Vec<f64>,
    tail_v: Vec<f64>,
    cutoff_radius: f64,
    compact: bool,
}

fn check_positive(name: &'static str, value: f64) -> Result<(), KernelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter { name, value })
    }
}

/// Builds a kernel and its tail table. `eps_tail` must lie in `(0, 1e-4]`.
pub fn make_kernel(spec: KernelSpec, eps_tail: f64) -> Result<Kernel, KernelError> {
    Kernel::new(spec, eps_tail)
}

impl Kernel {
    pub fn new(spec: KernelSpec, eps_tail: f64) -> Result<Self, KernelError> {
        if !(eps_tail > 0.0 && eps_tail <= 1e-4) {
            return Err(KernelError::InvalidTailBudget(eps_tail));
        }
        let (shape, normalizer) = match &spec {
            KernelSpec::Uniform { radius } => {
                check_positive("radius", *radius)?;
                (Shape::Uniform { radius: *radius }, 0.5 / radius)
            }
            KernelSpec::Laplace { scale } => {
                check_positive("scale", *scale)?;
                (Shape::Laplace { scale: *scale }, 0.5 / scale)
            }
            KernelSpec::Gaussian { sigma } => {
                check_positive("sigma", *sigma)?;
                (Shape::Gaussian { sigma: *sigma }, 1.0 / (sigma * (2.0 * PI).sqrt()))
            }
            KernelSpec::Powerlaw { gamma, core_width } => {
                if !gamma.is_finite() {
                    return Err(KernelError::InvalidParameter { name: "gamma", value: *gamma });
                }
                if *gamma <= 1.0 {
                    return Err(KernelError::NonNormalizable(*gamma));
                }
                check_positive("core_width", *core_width)?;
                let norm = 0.5 * (gamma - 1.0) * core_width.powf(gamma - 1.0);
                (
                    Shape::Powerlaw {
                        gamma: *gamma,
                        width: *core_width,
                    },
                    norm,
                )
            }
            KernelSpec::Table { points, values } => {
                let table = build_half_table(points, values)?;
                let mass = 2.0 * table.suffix[0];
                if !(mass > 0.0) {
                    return Err(KernelError::InvalidTable("zero total mass".into()));
                }
                (Shape::Table(table), 1.0 / mass)
            }
        };
        let mut kernel = Kernel {
            spec,
            shape,
            normalizer,
            eps_tail,
            tail_z: Vec::new(),
            tail_v: Vec::new(),
            cutoff_radius: 0.0,
            compact: false,
        };
        kernel.build_tail_table();
        Ok(kernel)
    }

    fn build_tail_table(&mut self) {
        let support = self.support_radius();
        self.compact = support.is_some();
        let core = self.core_scale();
        let mut zs = vec![0.0];
        let mut z = TAIL_MESH_START * core;
        match support {
            Some(r) => {
                while z < r && zs.len() < TAIL_MESH_MAX {
                    zs.push(z);
                    z *= TAIL_MESH_RATIO;
                }
                if let Shape::Table(t) = &self.shape {
                    zs.extend(t.xs.iter().copied().filter(|&p| p > 0.0 && p < r));
                    zs.sort_by(|a, b| a.total_cmp(b));
                    zs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * r);
                }
                if zs.last().is_some_and(|&l| (r - l).abs() <= 1e-12 * r) {
                    zs.pop();
                }
                zs.push(r);
                self.cutoff_radius = r;
            }
            None => {
                loop {
                    zs.push(z);
                    if self.exact_tail(z) < self.eps_tail || zs.len() >= TAIL_MESH_MAX {
                        break;
                    }
                    z *= TAIL_MESH_RATIO;
                }
                self.cutoff_radius = *zs.last().unwrap();
            }
        }
        self.tail_v = zs.iter().map(|&z| self.exact_tail(z)).collect();
        self.tail_z = zs;
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn eps_tail(&self) -> f64 {
        self.eps_tail
    }

    /// Radius beyond which the kernel is treated as zero.
    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_radius
    }

    pub fn is_compact(&self) -> bool {
        self.compact
    }

    /// The tail table as `(z, Ĵ(z))` pairs.
    pub fn tail_table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.tail_z.iter().copied().zip(self.tail_v.iter().copied())
    }

    /// Mass outside `[-R, R]` that the numerical support drops.
    pub fn mass_deficit(&self) -> f64 {
        if self.compact {
            0.0
        } else {
            2.0 * self.exact_tail(self.cutoff_radius)
        }
    }

    /// Characteristic width of the kernel core, in spatial units.
    pub fn core_scale(&self) -> f64 {
        match &self.shape {
            Shape::Uniform { radius } => *radius,
            Shape::Laplace { scale } => *scale,
            Shape::Gaussian { sigma } => *sigma,
            Shape::Powerlaw { width, .. } => *width,
            Shape::Table(t) => *t.xs.last().unwrap(),
        }
    }

    fn support_radius(&self) -> Option<f64> {
        match &self.shape {
            Shape::Uniform { radius } => Some(*radius),
            Shape::Table(t) => Some(*t.xs.last().unwrap()),
            _ => None,
        }
    }

    /// Kernel density `J(x)`.
    pub fn density(&self, x: f64) -> f64 {
        let ax = x.abs();
        let raw = match &self.shape {
            Shape::Uniform { radius } => {
                if ax <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::Laplace { scale } => (-ax / scale).exp(),
            Shape::Gaussian { sigma } => (-0.5 * (ax / sigma).powi(2)).exp(),
            Shape::Powerlaw { gamma, width } => (width + ax).powf(-gamma),
            Shape::Table(t) => t.eval(ax),
        };
        self.normalizer * raw
    }

    /// Closed-form (or exact piecewise) tail, used to fill the table.
    fn exact_tail(&self, z: f64) -> f64 {
        let z = z.max(0.0);
        match &self.shape {
            Shape::Uniform { radius } => {
                if z >= *radius {
                    0.0
                } else {
                    0.5 * (radius - z) / radius
                }
            }
            Shape::Laplace { scale } => 0.5 * (-z / scale).exp(),
            Shape::Gaussian { sigma } => 0.5 * erfc(z / (sigma * 2f64.sqrt())),
            Shape::Powerlaw { gamma, width } => 0.5 * (width / (width + z)).powf(gamma - 1.0),
            Shape::Table(t) => self.normalizer * t.tail(z),
        }
    }

    /// `Ĵ(z) = ∫_z^∞ J(y) dy` for `z ≥ 0`, by cubic Hermite interpolation of the
    /// tail table (nodal slopes are `-J`). Zero at and beyond the cutoff radius.
    pub fn tail_mass(&self, z: f64) -> f64 {
        let z = z.max(0.0);
        if z >= self.cutoff_radius {
            return 0.0;
        }
        let k = self.tail_z.partition_point(|&p| p <= z);
        if k == 0 {
            return self.tail_v[0];
        }
        let (z0, z1) = (self.tail_z[k - 1], self.tail_z[k]);
        let (v0, v1) = (self.tail_v[k - 1], self.tail_v[k]);
        let h = z1 - z0;
        let s = (z - z0) / h;
        let value = if self.compact {
            // left limit at the support edge
            let d0 = -self.density(z0) * h;
            let d1 = -self.density_left(z1) * h;
            hermite(s, v0, v1, d0, d1)
        } else {
            // in log space, exact for exponential tails: (ln Ĵ)' = -J/Ĵ
            let d0 = -self.density(z0) / v0 * h;
            let d1 = -self.density(z1) / v1 * h;
            hermite(s, v0.ln(), v1.ln(), d0, d1).exp()
        };
        value.clamp(v1, v0)
    }

    fn density_left(&self, z: f64) -> f64 {
        match &self.shape {
            Shape::Uniform { radius } if z >= *radius => self.normalizer,
            _ => self.density(z),
        }
    }

    /// Points where the density is not smooth, restricted to `x ≥ 0`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Uniform { radius } => vec![0.0, *radius],
            Shape::Table(t) => t.xs.clone(),
            _ => vec![0.0],
        }
    }

    /// `∫_a^b J(y) w(y) dy` over the numerical support, split at breakpoints.
    pub fn integrate_weighted<W: Fn(f64) -> f64>(&self, weight: W, a: f64, b: f64) -> f64 {
        let r = self.cutoff_radius;
        let lo = a.max(-r);
        let hi = b.min(r);
        if hi <= lo {
            return 0.0;
        }
        let mut breaks: Vec<f64> = Vec::new();
        for p in self.breakpoints() {
            breaks.push(p);
            breaks.push(-p);
        }
        let f = |y: f64| self.density(y) * weight(y);
        gauss_legendre_split(&f, lo, hi, &breaks)
    }

    /// Discrete convolution weight for lattice offset `j`:
    /// `∫ J(y) hat_j(y) dy`, with `hat_j` the unit hat centred at `j·dx`.
    /// Weights over all offsets sum to the numerical mass `1 - mass_deficit()`.
    pub fn lattice_weight(&self, j: i64, dx: f64) -> f64 {
        let c = j as f64 * dx;
        let hat = |y: f64| (1.0 - (y - c).abs() / dx).max(0.0);
        self.integrate_weighted(hat, c - dx, c) + self.integrate_weighted(hat, c, c + dx)
    }

    /// Largest lattice offset with a nonzero weight on a mesh of spacing `dx`.
    pub fn max_lattice_offset(&self, dx: f64) -> u64 {
        let m = (self.cutoff_radius / dx).ceil();
        if m >= u64::MAX as f64 / 4.0 {
            u64::MAX / 4
        } else {
            m as u64 + 1
        }
    }

    /// Half-line first moment `∫_0^∞ x J(x) dx`.
    pub fn first_moment(&self) -> Moment {
        match &self.shape {
            Shape::Uniform { radius } => Moment::Finite(radius / 4.0),
            Shape::Laplace { scale } => Moment::Finite(scale / 2.0),
            Shape::Gaussian { sigma } => Moment::Finite(sigma / (2.0 * PI).sqrt()),
            Shape::Powerlaw { gamma, width } => {
                if *gamma <= 2.0 {
                    Moment::Infinite
                } else {
                    Moment::Finite(width / (2.0 * (gamma - 2.0)))
                }
            }
            Shape::Table(t) => {
                let body = self.table_half_integral(t, |x| x);
                match self.table_extrapolation(t) {
                    TailExtrapolation::Polynomial { gamma, .. } if gamma <= 2.0 => Moment::Infinite,
                    TailExtrapolation::Polynomial { gamma, .. } => {
                        let p = *t.xs.last().unwrap();
                        let jp = self.normalizer * t.ys.last().unwrap();
                        Moment::Finite(body + jp * p * p / (gamma - 2.0))
                    }
                    _ => Moment::Finite(body),
                }
            }
        }
    }

    /// Half-line exponential moment `∫_0^∞ e^{λx} J(x) dx`.
    pub fn exp_moment(&self, lambda: f64) -> Result<Moment, KernelError> {
        if !(lambda > 0.0) {
            return Err(KernelError::InvalidLambda(lambda));
        }
        Ok(match &self.shape {
            Shape::Uniform { radius } => {
                Moment::Finite(((lambda * radius).exp() - 1.0) / (2.0 * radius * lambda))
            }
            Shape::Laplace { scale } => {
                if lambda * scale >= 1.0 {
                    Moment::Infinite
                } else {
                    Moment::Finite(0.5 / (1.0 - lambda * scale))
                }
            }
            Shape::Gaussian { sigma } => {
                let ls = lambda * sigma;
                Moment::Finite(0.5 * (0.5 * ls * ls).exp() * erfc(-ls / 2f64.sqrt()))
            }
            Shape::Powerlaw { .. } => Moment::Infinite,
            Shape::Table(t) => match self.table_extrapolation(t) {
                TailExtrapolation::Polynomial { .. } => Moment::Infinite,
                _ => Moment::Finite(self.table_half_integral(t, |x| (lambda * x).exp())),
            },
        })
    }

    /// Two-sided transform `∫_ℝ J(y) e^{λy} dy`, for any real `λ`.
    pub fn two_sided_mgf(&self, lambda: f64) -> Moment {
        if lambda == 0.0 {
            return Moment::Finite(1.0);
        }
        let l = lambda.abs();
        match &self.shape {
            Shape::Uniform { radius } => Moment::Finite((l * radius).sinh() / (l * radius)),
            Shape::Laplace { scale } => {
                if l * scale >= 1.0 {
                    Moment::Infinite
                } else {
                    Moment::Finite(1.0 / (1.0 - (l * scale).powi(2)))
                }
            }
            Shape::Gaussian { sigma } => Moment::Finite((0.5 * (l * sigma).powi(2)).exp()),
            Shape::Powerlaw { .. } => Moment::Infinite,
            Shape::Table(t) => match self.table_extrapolation(t) {
                TailExtrapolation::Polynomial { .. } => Moment::Infinite,
                _ => Moment::Finite(2.0 * self.table_half_integral(t, |x| (l * x).cosh())),
            },
        }
    }

    /// Largest `λ` for which the exponential moment is finite (`+∞` when all are).
    /// Zero when no exponential moment exists.
    pub fn exp_moment_abscissa(&self) -> f64 {
        match &self.shape {
            Shape::Laplace { scale } => 1.0 / scale,
            Shape::Powerlaw { .. } => 0.0,
            Shape::Table(t) => match self.table_extrapolation(t) {
                TailExtrapolation::Polynomial { .. } => 0.0,
                _ => f64::INFINITY,
            },
            _ => f64::INFINITY,
        }
    }

    fn table_half_integral<W: Fn(f64) -> f64>(&self, t: &HalfTable, weight: W) -> f64 {
        let f = |x: f64| self.density(x) * weight(x);
        t.xs.windows(2).map(|w| gauss_legendre(f, w[0], w[1])).sum()
    }

    /// Classifies the sample tail of a table kernel: compact when its last value
    /// is zero, otherwise extrapolated from the outer decade of samples.
    fn table_extrapolation(&self, t: &HalfTable) -> TailExtrapolation {
        if *t.ys.last().unwrap() <= 0.0 {
            return TailExtrapolation::Compact;
        }
        let p = *t.xs.last().unwrap();
        let pts: Vec<(f64, f64)> = t
            .xs
            .iter()
            .zip(t.ys.iter())
            .filter(|(&x, &y)| x >= p / 10.0 && x > 0.0 && y > 0.0)
            .map(|(&x, &y)| (x.ln(), y.ln()))
            .collect();
        match power_tail_fit(&pts) {
            Some((slope, stderr)) => TailExtrapolation::Polynomial {
                gamma: -slope,
                stderr,
            },
            None => TailExtrapolation::SuperPolynomial,
        }
    }

    /// Moment conditions and tail exponent.
    pub fn classify(&self) -> ClassReport {
        let satisfies_j1 = self.first_moment().is_finite();
        let lam = match self.exp_moment_abscissa() {
            a if a.is_infinite() => 1.0,
            a => 0.5 * a,
        };
        let satisfies_j2 = lam > 0.0 && self.exp_moment(lam).map(|m| m.is_finite()).unwrap_or(false);
        let (gamma_hat, gamma_stderr) = match &self.shape {
            Shape::Table(t) => match self.table_extrapolation(t) {
                TailExtrapolation::Polynomial { gamma, stderr } => (Some(gamma), Some(stderr)),
                _ => (None, None),
            },
            _ if self.compact => (None, None),
            _ => {
                let r = self.cutoff_radius;
                let pts: Vec<(f64, f64)> = self
                    .tail_table()
                    .filter(|&(z, v)| z >= r / 10.0 && z > 0.0 && v > 0.0)
                    .map(|(z, v)| (z.ln(), v.ln()))
                    .collect();
                match power_tail_fit(&pts) {
                    // Ĵ ~ z^{1-γ}
                    Some((slope, stderr)) => (Some(1.0 - slope), Some(stderr)),
                    None => (None, None),
                }
            }
        };
        ClassReport {
            satisfies_j1,
            satisfies_j2,
            gamma_hat,
            gamma_stderr,
        }
    }
}

fn hermite(s: f64, v0: f64, v1: f64, d0: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * v0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * v1 + (s3 - s2) * d1
}

enum TailExtrapolation {
    Compact,
    Polynomial { gamma: f64, stderr: f64 },
    SuperPolynomial,
}

/// Fits a line to log-log tail points. Returns `(slope, stderr)` when the two
/// halves of the range agree on the slope to 10%, i.e. the decay is polynomial.
fn power_tail_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 6 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let full = fit_line(&xs, &ys)?;
    let mid = pts.len() / 2;
    let lo = fit_line(&xs[..=mid], &ys[..=mid])?;
    let hi = fit_line(&xs[mid..], &ys[mid..])?;
    let spread = (lo.slope - hi.slope).abs();
    if spread <= 0.1 * lo.slope.abs().max(hi.slope.abs()) && full.slope < 0.0 {
        Some((full.slope, full.slope_stderr))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(spec: KernelSpec) -> Kernel {
        make_kernel(spec, DEFAULT_EPS_TAIL).unwrap()
    }

    #[test]
    fn uniform_density_and_cutoff() {
        let u = k(KernelSpec::Uniform { radius: 1.0 });
        assert_eq!(u.density(0.3), 0.5);
        assert_eq!(u.density(-1.0), 0.5);
        assert_eq!(u.density(1.01), 0.0);
        assert_eq!(u.cutoff_radius(), 1.0);
        assert!(u.is_compact());
    }

    #[test]
    fn powerlaw_gamma_below_one_rejected() {
        let err = make_kernel(
            KernelSpec::Powerlaw {
                gamma: 0.9,
                core_width: 1.0,
            },
            1e-6,
        )
        .unwrap_err();
        assert_eq!(err, KernelError::NonNormalizable(0.9));
    }

    #[test]
    fn negative_table_value_rejected() {
        let err = make_kernel(
            KernelSpec::Table {
                points: vec![-1.0, 0.0, 1.0],
                values: vec![-0.1, 1.0, -0.1],
            },
            1e-6,
        )
        .unwrap_err();
        assert!(matches!(err, KernelError::NegativeTableValue { index: 0, .. }));
    }

    #[test]
    fn asymmetric_table_rejected() {
        let err = make_kernel(
            KernelSpec::Table {
                points: vec![-1.0, 0.0, 2.0],
                values: vec![0.0, 1.0, 0.0],
            },
            1e-6,
        )
        .unwrap_err();
        assert!(matches!(err, KernelError::InvalidTable(_)));
    }

    #[test]
    fn tail_budget_bounds() {
        let spec = KernelSpec::Laplace { scale: 1.0 };
        assert!(make_kernel(spec.clone(), 0.0).is_err());
        assert!(make_kernel(spec.clone(), 1e-3).is_err());
        assert!(make_kernel(spec, 1e-4).is_ok());
    }

    #[test]
    fn tail_mass_examples() {
        let u = k(KernelSpec::Uniform { radius: 1.0 });
        assert_eq!(u.tail_mass(0.0), 0.5);
        assert_eq!(u.tail_mass(1.0), 0.0);
        assert!((u.tail_mass(0.5) - 0.25).abs() < 1e-14);
        let l = k(KernelSpec::Laplace { scale: 1.0 });
        assert!((l.tail_mass(1.0) - 0.5 * (-1.0f64).exp()).abs() < 1e-9);
        assert!((l.tail_mass(1.0) - 0.18394).abs() < 1e-5);
    }

    #[test]
    fn tail_mass_interpolation_accuracy() {
        let g = k(KernelSpec::Gaussian { sigma: 1.3 });
        for i in 0..200 {
            let z = i as f64 * 0.037;
            let exact = 0.5 * erfc(z / (1.3 * 2f64.sqrt()));
            if z < g.cutoff_radius() {
                assert!((g.tail_mass(z) - exact).abs() < 1e-6 * exact, "z = {z}");
            }
        }
    }

    #[test]
    fn table_kernel_matches_triangle() {
        // triangle on [-2, 2]: J = (2 - |x|)/4
        let t = k(KernelSpec::Table {
            points: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            values: vec![0.0, 1.0, 2.0, 1.0, 0.0],
        });
        assert!((t.density(0.0) - 0.5).abs() < 1e-14);
        assert!((t.tail_mass(0.0) - 0.5).abs() < 1e-14);
        let z: f64 = 0.7;
        let exact = (2.0 - z).powi(2) / 8.0;
        assert!((t.tail_mass(z) - exact).abs() < 1e-12);
        let m1 = t.first_moment().value().unwrap();
        assert!((m1 - 1.0 / 3.0).abs() < 1e-14);
        let c = t.classify();
        assert!(c.satisfies_j1 && c.satisfies_j2 && c.gamma_hat.is_none());
    }

    #[test]
    fn moments_closed_forms() {
        let u = k(KernelSpec::Uniform { radius: 1.0 });
        let l = k(KernelSpec::Laplace { scale: 1.0 });
        assert_eq!(u.first_moment(), Moment::Finite(0.25));
        assert_eq!(l.first_moment(), Moment::Finite(0.5));
        let p2 = k(KernelSpec::Powerlaw {
            gamma: 2.0,
            core_width: 1.0,
        });
        assert_eq!(p2.first_moment(), Moment::Infinite);
        assert_eq!(l.exp_moment(0.5).unwrap(), Moment::Finite(1.0));
        assert_eq!(l.exp_moment(1.5).unwrap(), Moment::Infinite);
        let p15 = k(KernelSpec::Powerlaw {
            gamma: 1.5,
            core_width: 1.0,
        });
        assert_eq!(p15.exp_moment(0.1).unwrap(), Moment::Infinite);
        assert_eq!(l.exp_moment(0.0), Err(KernelError::InvalidLambda(0.0)));
    }

    #[test]
    fn moments_against_quadrature() {
        let kernels = [
            k(KernelSpec::Gaussian { sigma: 0.7 }),
            k(KernelSpec::Uniform { radius: 2.5 }),
            k(KernelSpec::Laplace { scale: 1.5 }),
            k(KernelSpec::Powerlaw {
                gamma: 3.5,
                core_width: 2.0,
            }),
        ];
        for ker in &kernels {
            let r = ker.cutoff_radius();
            let f = |x: f64| x * ker.density(x);
            let q = crate::quad::gauss_legendre_composite(&f, 0.0, r, 20_000);
            let m = ker.first_moment().value().unwrap();
            // powerlaw loses the far tail beyond R
            assert!((q - m).abs() < 2e-3 * m, "{:?}: {q} vs {m}", ker.spec());
            if ker.exp_moment_abscissa() > 0.3 {
                let g = |x: f64| (0.3 * x).exp() * ker.density(x);
                let q = crate::quad::gauss_legendre_composite(&g, 0.0, r, 20_000);
                let m = ker.exp_moment(0.3).unwrap().value().unwrap();
                // laplace truncation at R costs ~e^{-(1/s-0.3)R}
                assert!((q - m).abs() < 1e-4 * m, "{:?}", ker.spec());
            }
        }
    }

    #[test]
    fn classify_examples() {
        let u = k(KernelSpec::Uniform { radius: 1.0 }).classify();
        assert!(u.satisfies_j1 && u.satisfies_j2 && u.gamma_hat.is_none());
        let l = k(KernelSpec::Laplace { scale: 1.0 }).classify();
        assert!(l.satisfies_j1 && l.satisfies_j2 && l.gamma_hat.is_none());
        let g = k(KernelSpec::Gaussian { sigma: 1.0 }).classify();
        assert!(g.satisfies_j1 && g.satisfies_j2 && g.gamma_hat.is_none());
        let p = k(KernelSpec::Powerlaw {
            gamma: 1.5,
            core_width: 1.0,
        })
        .classify();
        assert!(!p.satisfies_j1 && !p.satisfies_j2);
        assert!((p.gamma_hat.unwrap() - 1.5).abs() < 0.1);
    }

    #[test]
    fn heavy_table_extrapolates() {
        // samples of (1+|x|)^{-1.5} out to 100: polynomial tail with γ ≈ 1.5
        let mut points = Vec::new();
        let mut values = Vec::new();
        for i in -400..=400 {
            let x = i as f64 * 0.25;
            points.push(x);
            values.push((1.0 + x.abs()).powf(-1.5));
        }
        let t = k(KernelSpec::Table { points, values });
        let c = t.classify();
        assert!(!c.satisfies_j1 && !c.satisfies_j2);
        assert!((c.gamma_hat.unwrap() - 1.5).abs() < 0.1);
    }

    #[test]
    fn lattice_weights_sum_to_numerical_mass() {
        for spec in [
            KernelSpec::Uniform { radius: 1.0 },
            KernelSpec::Laplace { scale: 1.0 },
            KernelSpec::Gaussian { sigma: 0.8 },
        ] {
            let ker = k(spec);
            let dx = 0.1;
            let m = ker.max_lattice_offset(dx) as i64;
            let total: f64 = (-m..=m).map(|j| ker.lattice_weight(j, dx)).sum();
            assert!((total - (1.0 - ker.mass_deficit())).abs() < 1e-12, "{total}");
            assert!((ker.lattice_weight(3, dx) - ker.lattice_weight(-3, dx)).abs() < 1e-16);
        }
    }

    #[test]
    fn kernel_spec_json_shape() {
        let spec: KernelSpec =
            serde_json::from_str(r#"{"family":"powerlaw","gamma":1.5,"core_width":1.0}"#).unwrap();
        assert_eq!(
            spec,
            KernelSpec::Powerlaw {
                gamma: 1.5,
                core_width: 1.0
            }
        );
        let spec: KernelSpec = serde_json::from_str(r#"{"family":"laplace","scale":2.0}"#).unwrap();
        assert_eq!(spec, KernelSpec::Laplace { scale: 2.0 });
    }
}
