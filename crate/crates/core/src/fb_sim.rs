//! Explicit time stepping of the free-boundary system: nonlocal dispersal on
//! `(g(t), h(t))`, reaction, and boundary laws driven by the outward flux.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::Kernel;
use crate::nonlocal_ops::{Convolver, GridFunction, OpsError, Side};
use crate::reactions::{ReactionError, ReactionModel};

/// Values below this are treated as round-off and clamped to zero.
pub const NEG_TOL: f64 = 1e-12;
/// Allowed overshoot above the ceiling.
pub const CEIL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("instability at t = {t}: {detail}")]
    Instability { t: f64, detail: String },
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScheme {
    #[default]
    Euler,
    Heun,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileShape {
    /// `A(1 - |x|/h0)`
    #[default]
    Tent,
    /// `A cos(πx / 2h0)`
    Cosine,
}

/// Initial data on `[-h0, h0]`; amplitudes default to `u*/2`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialProfile {
    #[serde(default)]
    pub shape: ProfileShape,
    #[serde(default)]
    pub amplitudes: Option<Vec<f64>>,
}

impl InitialProfile {
    pub fn amplitudes(&self, u_star: &[f64]) -> Vec<f64> {
        self.amplitudes
            .clone()
            .unwrap_or_else(|| u_star.iter().map(|v| 0.5 * v).collect())
    }

    /// Value of every component at `x` given the half-width `h0`.
    pub fn eval(&self, amps: &[f64], h0: f64, x: f64) -> Vec<f64> {
        let s = (x.abs() / h0).min(1.0);
        let shape = match self.shape {
            ProfileShape::Tent => 1.0 - s,
            ProfileShape::Cosine => (0.5 * std::f64::consts::PI * s).cos().max(0.0),
        };
        amps.iter().map(|a| a * shape).collect()
    }
}

/// Outcome-classification heuristics, all overridable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Spreading needs `h - g` to grow by more than this multiple of `h0`.
    pub growth_factor: f64,
    /// Spreading needs `min Σu` on `[-h0, h0]` above this fraction of `Σu*`.
    pub spread_fraction: f64,
    /// Vanishing needs `max Σu` below this fraction of `Σu*`.
    pub vanish_fraction: f64,
    /// Vanishing needs the final-window growth of `h - g` below this multiple of `h0`.
    pub stall_fraction: f64,
    /// Fraction of the horizon forming the final window.
    pub final_window: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            growth_factor: 10.0,
            spread_fraction: 0.5,
            vanish_fraction: 1e-3,
            stall_fraction: 1e-4,
            final_window: 0.25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FBConfig {
    pub model: ReactionModel,
    /// One kernel per diffusing component.
    pub kernels: Vec<Kernel>,
    /// Expansion coefficients of the diffusing components.
    pub mu: Vec<f64>,
    pub h0: f64,
    pub initial: InitialProfile,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub sample_stride: usize,
    pub scheme: TimeScheme,
    pub thresholds: Thresholds,
}

impl FBConfig {
    /// Checks everything except the stability bound (a too-large `dt` is
    /// allowed to run into `Instability`).
    pub fn validate(&self) -> Result<(), SimError> {
        let m0 = self.model.m0();
        let bad = |s: String| Err(SimError::InvalidConfig(s));
        if self.kernels.len() != m0 {
            return bad(format!("expected {m0} kernels, got {}", self.kernels.len()));
        }
        if self.mu.len() != m0 {
            return bad(format!("expected {m0} expansion coefficients, got {}", self.mu.len()));
        }
        if self.mu.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || !(self.mu.iter().sum::<f64>() > 0.0) {
            return bad("mu must be nonnegative with positive sum".into());
        }
        if !(self.h0 > 0.0 && self.h0.is_finite()) {
            return bad(format!("h0 = {} must be positive", self.h0));
        }
        if !(self.dx > 0.0) || !(self.dt > 0.0) || !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("dx, dt must be positive and t_end nonnegative".into());
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be at least 1".into());
        }
        let u_star = self.model.positive_equilibrium()?;
        let amps = self.initial.amplitudes(&u_star);
        if amps.len() != self.model.m() {
            return bad(format!("expected {} amplitudes, got {}", self.model.m(), amps.len()));
        }
        if amps.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return bad("initial amplitudes must be positive".into());
        }
        if let Some(c) = self.model.ceiling() {
            if amps.iter().zip(c).any(|(a, c)| a > c) {
                return bad("initial profile exceeds the ceiling".into());
            }
        }
        for k in &self.kernels {
            crate::nonlocal_ops::check_mesh(k, self.dx)?;
        }
        Ok(())
    }

    pub fn stability_bound(&self) -> f64 {
        stability_bound(&self.model)
    }
}

/// `0.5 / (max d + L_F)`.
pub fn stability_bound(model: &ReactionModel) -> f64 {
    let dmax = model.diffusion().iter().cloned().fold(0.0, f64::max);
    0.5 / (dmax + model.lipschitz_estimate())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FBState {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    pub u: GridFunction,
}

/// Global lattice indices strictly inside `(g, h)`; `None` if there are none.
pub fn interior_range(g: f64, h: f64, dx: f64) -> Option<(i64, usize)> {
    let lo = (g / dx).floor() as i64 + 1;
    let hi = (h / dx).ceil() as i64 - 1;
    (hi >= lo).then(|| (lo, (hi - lo + 1) as usize))
}

impl FBState {
    pub fn initial(cfg: &FBConfig) -> Result<Self, SimError> {
        let u_star = cfg.model.positive_equilibrium()?;
        let amps = cfg.initial.amplitudes(&u_star);
        let (start, len) = interior_range(-cfg.h0, cfg.h0, cfg.dx)
            .ok_or_else(|| SimError::InvalidConfig("h0 smaller than one lattice cell".into()))?;
        let m = cfg.model.m();
        let u = GridFunction::from_fn(cfg.dx, start, len, m, |i, x| cfg.initial.eval(&amps, cfg.h0, x)[i])?;
        Ok(FBState {
            t: 0.0,
            g: -cfg.h0,
            h: cfg.h0,
            u,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontSample {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    /// `min Σu` over nodes with `|x| ≤ h0`.
    pub center_min: f64,
    /// `max Σu` over all nodes.
    pub total_max: f64,
    /// `max ‖u - u*‖∞` over nodes with `|x| ≤ h0`.
    pub center_dev: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrontSeries {
    pub samples: Vec<FrontSample>,
    pub snapshots: Vec<(f64, GridFunction)>,
}

impl FrontSeries {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn h(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.h).collect()
    }

    pub fn g(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.g).collect()
    }

    pub fn last(&self) -> Option<&FrontSample> {
        self.samples.last()
    }
}

/// Per-component right-hand side plus boundary velocities.
struct Rhs {
    du: Vec<Vec<f64>>,
    dg: f64,
    dh: f64,
}

pub struct FBSim {
    cfg: FBConfig,
    convolvers: Vec<Convolver>,
    state: FBState,
    u_star: Vec<f64>,
    conv_out: Vec<f64>,
    tmp: Vec<f64>,
    steps: u64,
}

impl FBSim {
    pub fn new(cfg: &FBConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let state = FBState::initial(cfg)?;
        Self::with_state(cfg, state)
    }

    /// Starts from an arbitrary admissible state.
    pub fn with_state(cfg: &FBConfig, state: FBState) -> Result<Self, SimError> {
        let convolvers = cfg
            .kernels
            .iter()
            .map(|k| Convolver::new(k.clone(), cfg.dx))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FBSim {
            u_star: cfg.model.positive_equilibrium()?,
            cfg: cfg.clone(),
            convolvers,
            state,
            conv_out: Vec::new(),
            tmp: Vec::new(),
            steps: 0,
        })
    }

    pub fn state(&self) -> &FBState {
        &self.state
    }

    pub fn config(&self) -> &FBConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn rhs(&mut self, g: f64, h: f64, u: &GridFunction) -> Rhs {
        let model = &self.cfg.model;
        let m = model.m();
        let n = u.len();
        let x_first = u.x(0);
        let mut du = vec![vec![0.0; n]; m];
        let (mut dg, mut dh) = (0.0, 0.0);
        self.conv_out.resize(n, 0.0);
        for (i, conv) in self.convolvers.iter_mut().enumerate() {
            let ui = u.component(i);
            let d = model.diffusion()[i];
            conv.convolve_clipped_into(ui, x_first, g, h, &mut self.tmp, &mut self.conv_out);
            for k in 0..n {
                du[i][k] = d * (self.conv_out[k] - ui[k]);
            }
            let mu = self.cfg.mu[i];
            if mu > 0.0 {
                dh += mu * conv.flux(ui, x_first, g, h, Side::Right);
                dg -= mu * conv.flux(ui, x_first, g, h, Side::Left);
            }
        }
        let mut point = vec![0.0; m];
        let mut rates = vec![0.0; m];
        for k in 0..n {
            for (i, p) in point.iter_mut().enumerate() {
                *p = u.component(i)[k];
            }
            model.rates_into(&point, &mut rates);
            for i in 0..m {
                du[i][k] += rates[i];
            }
        }
        Rhs { du, dg, dh }
    }

    /// Advances by `dt` (the configured step unless the horizon is closer).
    pub fn step_by(&mut self, dt: f64) -> Result<(), SimError> {
        let (g, h) = (self.state.g, self.state.h);
        let u0 = self.state.u.clone();
        let k1 = self.rhs(g, h, &u0);
        let (g_new, h_new, mut u_new) = match self.cfg.scheme {
            TimeScheme::Euler => {
                let mut u = u0.clone();
                for (i, d) in k1.du.iter().enumerate() {
                    for (v, r) in u.component_mut(i).iter_mut().zip(d) {
                        *v += dt * r;
                    }
                }
                (g + dt * k1.dg, h + dt * k1.dh, u)
            }
            TimeScheme::Heun => {
                let (gp, hp) = (g + dt * k1.dg, h + dt * k1.dh);
                let mut up = u0.clone();
                for (i, d) in k1.du.iter().enumerate() {
                    for (v, r) in up.component_mut(i).iter_mut().zip(d) {
                        *v += dt * r;
                    }
                }
                extend_to_interior(&mut up, gp, hp);
                for v in up.values().iter().flatten() {
                    if !v.is_finite() {
                        return Err(self.instability("non-finite predictor"));
                    }
                }
                clamp_small_negatives(&mut up);
                let k2 = self.rhs(gp, hp, &up);
                let g_new = g + 0.5 * dt * (k1.dg + k2.dg);
                let h_new = h + 0.5 * dt * (k1.dh + k2.dh);
                let mut u = u0.clone();
                extend_to_interior(&mut u, g_new.min(g), h_new.max(h));
                let start = u.start();
                for i in 0..u.m() {
                    for k in 0..u.len() {
                        let gk = start + k as i64;
                        let r1 = local(&u0, gk).map_or(0.0, |l| k1.du[i][l]);
                        let r2 = local(&up, gk).map_or(0.0, |l| k2.du[i][l]);
                        u.component_mut(i)[k] += 0.5 * dt * (r1 + r2);
                    }
                }
                (g_new, h_new, u)
            }
        };
        if !(g_new.is_finite() && h_new.is_finite()) {
            return Err(self.instability("non-finite boundary"));
        }
        extend_to_interior(&mut u_new, g_new, h_new);
        self.state.t += dt;
        check_and_clamp(&mut u_new, self.cfg.model.ceiling(), self.state.t)?;
        self.state.g = g_new.min(g);
        self.state.h = h_new.max(h);
        self.state.u = u_new;
        self.steps += 1;
        Ok(())
    }

    /// One step of the configured size.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.step_by(self.cfg.dt)
    }

    fn instability(&self, detail: &str) -> SimError {
        SimError::Instability {
            t: self.state.t,
            detail: detail.to_string(),
        }
    }

    pub fn sample(&self) -> FrontSample {
        sample_state(&self.state.u, self.state.t, self.state.g, self.state.h, self.cfg.h0, &self.u_star)
    }
}

/// Rejects non-finite, clearly negative or above-ceiling values and zeroes
/// round-off negatives.
pub(crate) fn check_and_clamp(u: &mut GridFunction, ceiling: Option<&[f64]>, t: f64) -> Result<(), SimError> {
    let x0 = u.x(0);
    let dx = u.dx();
    let fail = |detail: String| SimError::Instability { t, detail };
    for i in 0..u.m() {
        for (k, v) in u.component_mut(i).iter_mut().enumerate() {
            let x = x0 + k as f64 * dx;
            if !v.is_finite() {
                return Err(fail(format!("u{} non-finite at x = {x}", i + 1)));
            }
            if *v < -NEG_TOL {
                return Err(fail(format!("u{} = {:e} < 0 at x = {x}", i + 1, *v)));
            }
            if let Some(c) = ceiling {
                if *v > c[i] + CEIL_TOL {
                    return Err(fail(format!("u{} = {} above ceiling {} at x = {x}", i + 1, *v, c[i])));
                }
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    Ok(())
}

fn local(u: &GridFunction, k: i64) -> Option<usize> {
    let l = k - u.start();
    (l >= 0 && l < u.len() as i64).then_some(l as usize)
}

fn clamp_small_negatives(u: &mut GridFunction) {
    for i in 0..u.m() {
        for v in u.component_mut(i) {
            if *v < 0.0 && *v >= -NEG_TOL {
                *v = 0.0;
            }
        }
    }
}

/// Activates (zero-filled) every lattice node strictly inside `(g, h)`.
pub fn extend_to_interior(u: &mut GridFunction, g: f64, h: f64) {
    if let Some((lo, len)) = interior_range(g, h, u.dx()) {
        let cur_end = u.start() + u.len() as i64;
        let start = lo.min(u.start());
        let end = (lo + len as i64).max(cur_end);
        if start < u.start() || end > cur_end {
            u.extend_to(start, (end - start) as usize);
        }
    }
}

pub(crate) fn sample_state(u: &GridFunction, t: f64, g: f64, h: f64, probe: f64, u_star: &[f64]) -> FrontSample {
    let mut center_min = f64::INFINITY;
    let mut total_max: f64 = 0.0;
    let mut center_dev: f64 = 0.0;
    for k in 0..u.len() {
        let x = u.x(k);
        let sum: f64 = (0..u.m()).map(|i| u.component(i)[k]).sum();
        total_max = total_max.max(sum);
        if x.abs() <= probe + 1e-12 {
            center_min = center_min.min(sum);
            for (i, us) in u_star.iter().enumerate() {
                center_dev = center_dev.max((u.component(i)[k] - us).abs());
            }
        }
    }
    if !center_min.is_finite() {
        center_min = 0.0;
    }
    FrontSample {
        t,
        g,
        h,
        center_min,
        total_max,
        center_dev,
    }
}

/// Integrates to `t_end`, returning the series gathered so far together with
/// the error that stopped the run, if any.
pub fn run_partial(cfg: &FBConfig) -> (FrontSeries, Option<SimError>) {
    let mut series = FrontSeries::default();
    let mut sim = match FBSim::new(cfg) {
        Ok(s) => s,
        Err(e) => return (series, Some(e)),
    };
    let err = drive(&mut sim, cfg.t_end, cfg.dt, cfg.sample_stride, &cfg.snapshot_times, &mut series).err();
    (series, err)
}

/// Shared time loop: fixed steps, the last one shortened to land on `t_end`.
fn drive(
    sim: &mut FBSim,
    t_end: f64,
    dt: f64,
    stride: usize,
    snapshot_times: &[f64],
    series: &mut FrontSeries,
) -> Result<(), SimError> {
    let mut snaps: Vec<f64> = snapshot_times.iter().copied().filter(|&t| t >= 0.0 && t <= t_end).collect();
    snaps.sort_by(f64::total_cmp);
    let mut next_snap = 0;
    let take_snaps = |sim: &FBSim, next: &mut usize, series: &mut FrontSeries| {
        while *next < snaps.len() && snaps[*next] <= sim.state.t + 1e-9 * dt {
            series.snapshots.push((sim.state.t, sim.state.u.clone()));
            *next += 1;
        }
    };
    series.samples.push(sim.sample());
    take_snaps(sim, &mut next_snap, series);
    let n_steps = steps_for(t_end, dt);
    for s in 1..=n_steps {
        let step = if s == n_steps { t_end - (n_steps - 1) as f64 * dt } else { dt };
        sim.step_by(step)?;
        if s == n_steps {
            sim.state.t = t_end;
        }
        if s % stride as u64 == 0 || s == n_steps {
            series.samples.push(sim.sample());
        }
        take_snaps(sim, &mut next_snap, series);
    }
    Ok(())
}

pub(crate) fn steps_for(t_end: f64, dt: f64) -> u64 {
    if t_end <= 0.0 {
        0
    } else {
        ((t_end / dt) - 1e-9).ceil().max(1.0) as u64
    }
}

pub fn run(cfg: &FBConfig) -> Result<FrontSeries, SimError> {
    match run_partial(cfg) {
        (series, None) => Ok(series),
        (_, Some(e)) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Spreading,
    Vanishing,
    Undetermined,
}

/// Finite-horizon spreading/vanishing classification.
pub fn classify_outcome(series: &FrontSeries, cfg: &FBConfig) -> Outcome {
    let th = &cfg.thresholds;
    let (Some(first), Some(last)) = (series.samples.first(), series.samples.last()) else {
        return Outcome::Undetermined;
    };
    if cfg.t_end <= 0.0 || last.t - first.t < 0.2 * cfg.t_end {
        return Outcome::Undetermined;
    }
    let Ok(u_star) = cfg.model.positive_equilibrium() else {
        return Outcome::Undetermined;
    };
    let sum_star: f64 = u_star.iter().sum();
    let t_win = last.t - th.final_window * (last.t - first.t);
    let window: Vec<&FrontSample> = series.samples.iter().filter(|s| s.t >= t_win).collect();
    if window.len() < 2 {
        return Outcome::Undetermined;
    }
    let growth = (last.h - last.g) - (first.h - first.g);
    let center_min = window.iter().map(|s| s.center_min).fold(f64::INFINITY, f64::min);
    if growth > th.growth_factor * cfg.h0 && center_min > th.spread_fraction * sum_star {
        return Outcome::Spreading;
    }
    let w0 = window[0];
    let late_growth = (last.h - last.g) - (w0.h - w0.g);
    let max_total = window.iter().map(|s| s.total_max).fold(0.0, f64::max);
    let decreasing = last.total_max < w0.total_max;
    if late_growth < th.stall_fraction * cfg.h0 && max_total < th.vanish_fraction * sum_star && decreasing {
        return Outcome::Vanishing;
    }
    Outcome::Undetermined
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use std::collections::BTreeMap;

    fn wnv() -> ReactionModel {
        let p: BTreeMap<String, f64> = [("a1", 1.0), ("a2", 1.0), ("b1", 0.5), ("b2", 0.5), ("e1", 1.0), ("e2", 1.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        ReactionModel::wnv(&p, vec![1.0, 1.0]).unwrap()
    }

    pub(crate) fn cfg(h0: f64, mu: f64, t_end: f64) -> FBConfig {
        let k = Kernel::new(KernelSpec::Laplace { scale: 1.0 }, 1e-8).unwrap();
        let model = wnv();
        let dt = 0.5 * stability_bound(&model);
        FBConfig {
            model,
            kernels: vec![k.clone(), k],
            mu: vec![mu, mu],
            h0,
            initial: InitialProfile::default(),
            dx: 0.25,
            dt,
            t_end,
            snapshot_times: vec![],
            sample_stride: 1,
            scheme: TimeScheme::Euler,
            thresholds: Thresholds::default(),
        }
    }

    #[test]
    fn zero_horizon_gives_single_sample() {
        let s = run(&cfg(5.0, 1.0, 0.0)).unwrap();
        assert_eq!(s.samples.len(), 1);
        assert_eq!((s.samples[0].g, s.samples[0].h), (-5.0, 5.0));
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let mut sim = FBSim::new(&cfg(3.0, 2.0, 10.0)).unwrap();
        for _ in 0..100 {
            sim.step().unwrap();
            let st = sim.state();
            assert!((st.g + st.h).abs() < 1e-12, "{} {}", st.g, st.h);
        }
        let u = &sim.state().u;
        let n = u.len();
        for i in 0..2 {
            for k in 0..n / 2 {
                assert!((u.component(i)[k] - u.component(i)[n - 1 - k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn boundaries_move_outward_and_stay_confined() {
        let s = run(&cfg(4.0, 1.0, 8.0)).unwrap();
        for w in s.samples.windows(2) {
            assert!(w[1].h >= w[0].h && w[1].g <= w[0].g);
            assert!(w[1].t > w[0].t);
        }
        assert!(s.last().unwrap().h > 4.0);
    }

    #[test]
    fn oversized_step_is_unstable() {
        let mut c = cfg(4.0, 1.0, 50.0);
        c.dt = 3.0;
        assert!(matches!(run(&c), Err(SimError::Instability { .. })));
    }

    #[test]
    fn heun_close_to_euler() {
        let c = cfg(4.0, 1.0, 4.0);
        let mut h = c.clone();
        h.scheme = TimeScheme::Heun;
        let a = run(&c).unwrap().last().unwrap().h;
        let b = run(&h).unwrap().last().unwrap().h;
        assert!((a - b).abs() < 0.02 * (a - 4.0), "{a} {b}");
    }

    #[test]
    fn interior_range_is_strict() {
        assert_eq!(interior_range(-1.0, 1.0, 0.5), Some((-1, 3)));
        assert_eq!(interior_range(-1.1, 1.1, 0.5), Some((-2, 5)));
        assert_eq!(interior_range(-0.1, 0.1, 0.5), Some((0, 1)));
    }
}
