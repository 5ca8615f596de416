//! Whole-line problem (no free boundary) on a window that widens whenever the
//! solution stops being negligible near its edges, plus level-set tracking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fb_sim::{check_and_clamp, stability_bound, InitialProfile, SimError};
use crate::kernels::Kernel;
use crate::nonlocal_ops::{Convolver, GridFunction};
use crate::reactions::ReactionModel;

/// Nodes added per side on each widening.
pub const GROW_BLOCK: usize = 64;
/// Fraction of the window (per side) checked for edge smallness.
pub const EDGE_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LevelError {
    #[error("level {lambda} outside (0, u*_{component}) = (0, {u_star})", component = .component + 1)]
    InvalidLevel { component: usize, lambda: f64, u_star: f64 },
    #[error("component {component} out of range (m = {m})", component = .component + 1)]
    ComponentOutOfRange { component: usize, m: usize },
}

/// A tracked level: component index (0-based) and value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub component: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct CauchyConfig {
    pub model: ReactionModel,
    pub kernels: Vec<Kernel>,
    /// Initial data is supported on `[-h0, h0]`.
    pub h0: f64,
    pub initial: InitialProfile,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub sample_stride: usize,
    pub levels: Vec<LevelSpec>,
    /// The window never grows beyond this half-width.
    pub max_half_width: f64,
    /// Edge smallness threshold; `1e-8 · min u*` when `None`.
    pub edge_tol: Option<f64>,
}

impl CauchyConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let m = self.model.m();
        let bad = |s: String| Err(SimError::InvalidConfig(s));
        if self.kernels.len() != self.model.m0() {
            return bad(format!("expected {} kernels, got {}", self.model.m0(), self.kernels.len()));
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
        if !(self.max_half_width > self.h0) {
            return bad("max_half_width must exceed h0".into());
        }
        if let Some(e) = self.edge_tol {
            if !(e > 0.0) {
                return bad("edge_tol must be positive".into());
            }
        }
        let u_star = self.model.positive_equilibrium()?;
        for l in &self.levels {
            if l.component >= m {
                return bad(format!("level component {} out of range (m = {m})", l.component + 1));
            }
            let us = u_star[l.component];
            if !(l.lambda > 0.0 && l.lambda < us) {
                return bad(format!("level {} outside (0, {us}) for u{}", l.lambda, l.component + 1));
            }
        }
        let amps = self.initial.amplitudes(&u_star);
        if amps.len() != m || amps.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return bad("initial amplitudes must be positive, one per component".into());
        }
        for k in &self.kernels {
            crate::nonlocal_ops::check_mesh(k, self.dx)?;
        }
        Ok(())
    }

    pub fn stability_bound(&self) -> f64 {
        stability_bound(&self.model)
    }

    pub fn edge_tolerance(&self) -> Result<f64, SimError> {
        let u_star = self.model.positive_equilibrium()?;
        Ok(self
            .edge_tol
            .unwrap_or_else(|| 1e-8 * u_star.iter().cloned().fold(f64::INFINITY, f64::min)))
    }
}

/// Solution on the symmetric window `[-X, X]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyState {
    pub t: f64,
    pub u: GridFunction,
}

impl CauchyState {
    pub fn initial(cfg: &CauchyConfig) -> Result<Self, SimError> {
        let u_star = cfg.model.positive_equilibrium()?;
        let amps = cfg.initial.amplitudes(&u_star);
        let half = (cfg.h0 / cfg.dx).ceil() as i64 + GROW_BLOCK as i64;
        let u = GridFunction::from_fn(cfg.dx, -half, (2 * half + 1) as usize, cfg.model.m(), |i, x| {
            cfg.initial.eval(&amps, cfg.h0, x)[i]
        })?;
        Ok(CauchyState { t: 0.0, u })
    }

    /// Current half-width `X`.
    pub fn half_width(&self) -> f64 {
        let right = self.u.x(self.u.len() - 1);
        right.max(-self.u.x(0))
    }
}

/// Outermost crossings `(x⁻, x⁺)` of `u_i` through `lambda`, by linear
/// interpolation (values beyond the window count as 0). `None` if `u_i < lambda`
/// everywhere.
pub fn level_set(u: &GridFunction, i: usize, lambda: f64, u_star: &[f64]) -> Result<Option<(f64, f64)>, LevelError> {
    if i >= u.m() || i >= u_star.len() {
        return Err(LevelError::ComponentOutOfRange { component: i, m: u.m() });
    }
    if !(lambda > 0.0 && lambda < u_star[i]) {
        return Err(LevelError::InvalidLevel {
            component: i,
            lambda,
            u_star: u_star[i],
        });
    }
    let v = u.component(i);
    let n = v.len();
    let (Some(first), Some(last)) = (v.iter().position(|&y| y >= lambda), v.iter().rposition(|&y| y >= lambda)) else {
        return Ok(None);
    };
    let dx = u.dx();
    let cross = |inside: f64, outside: f64| (inside - lambda) / (inside - outside);
    let outer_right = if last + 1 < n { v[last + 1] } else { 0.0 };
    let x_plus = u.x(last) + dx * cross(v[last], outer_right);
    let outer_left = if first > 0 { v[first - 1] } else { 0.0 };
    let x_minus = u.x(first) - dx * cross(v[first], outer_left);
    Ok(Some((x_minus, x_plus)))
}

/// `max ‖u(x) - u*‖∞` over nodes with `|x| ≤ radius`; `None` if no node qualifies.
pub fn interior_deviation(u: &GridFunction, u_star: &[f64], radius: f64) -> Option<f64> {
    let mut dev: Option<f64> = None;
    for k in 0..u.len() {
        if u.x(k).abs() <= radius + 1e-12 {
            let d = (0..u.m())
                .map(|i| (u.component(i)[k] - u_star[i]).abs())
                .fold(0.0, f64::max);
            dev = Some(dev.map_or(d, |v| v.max(d)));
        }
    }
    dev
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSample {
    pub t: f64,
    pub x_minus: Option<f64>,
    pub x_plus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTrack {
    pub level: LevelSpec,
    pub samples: Vec<LevelSample>,
}

impl LevelTrack {
    /// `(t, x⁺)` over the samples where the level set exists.
    pub fn right(&self) -> (Vec<f64>, Vec<f64>) {
        self.samples.iter().filter_map(|s| s.x_plus.map(|x| (s.t, x))).unzip()
    }

    pub fn left(&self) -> (Vec<f64>, Vec<f64>) {
        self.samples.iter().filter_map(|s| s.x_minus.map(|x| (s.t, x))).unzip()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelSeries {
    pub tracks: Vec<LevelTrack>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchySample {
    pub t: f64,
    pub half_width: f64,
    /// `max Σu` over the window.
    pub total_max: f64,
    /// Largest value over the outer edge region.
    pub edge_max: f64,
    /// Bound on the exterior contribution dropped by the truncation.
    pub leak_bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CauchySeries {
    pub samples: Vec<CauchySample>,
    pub levels: LevelSeries,
    pub snapshots: Vec<(f64, GridFunction)>,
    /// Largest per-sample leak bound.
    pub leak_bound: f64,
    /// Whether the window reached `max_half_width`.
    pub capped: bool,
}

pub struct CauchySim {
    cfg: CauchyConfig,
    convolvers: Vec<Convolver>,
    state: CauchyState,
    u_star: Vec<f64>,
    edge_tol: f64,
    max_nodes: i64,
    capped: bool,
    conv_out: Vec<f64>,
    rhs: Vec<Vec<f64>>,
}

impl CauchySim {
    pub fn new(cfg: &CauchyConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let state = CauchyState::initial(cfg)?;
        Self::with_state(cfg, state)
    }

    pub fn with_state(cfg: &CauchyConfig, state: CauchyState) -> Result<Self, SimError> {
        let convolvers = cfg
            .kernels
            .iter()
            .map(|k| Convolver::new(k.clone(), cfg.dx))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CauchySim {
            u_star: cfg.model.positive_equilibrium()?,
            edge_tol: cfg.edge_tolerance()?,
            max_nodes: (cfg.max_half_width / cfg.dx).floor() as i64,
            cfg: cfg.clone(),
            convolvers,
            state,
            capped: false,
            conv_out: Vec::new(),
            rhs: Vec::new(),
        })
    }

    pub fn state(&self) -> &CauchyState {
        &self.state
    }

    pub fn capped(&self) -> bool {
        self.capped
    }

    /// One explicit Euler step of size `dt`, then widening as needed.
    pub fn cstep_by(&mut self, dt: f64) -> Result<(), SimError> {
        let model = &self.cfg.model;
        let m = model.m();
        let u = &mut self.state.u;
        let n = u.len();
        self.rhs.resize(m, Vec::new());
        self.conv_out.resize(n, 0.0);
        for i in 0..m {
            self.rhs[i].clear();
            self.rhs[i].resize(n, 0.0);
        }
        for (i, conv) in self.convolvers.iter_mut().enumerate() {
            let ui = u.component(i);
            let d = model.diffusion()[i];
            conv.convolve_into(ui, &mut self.conv_out);
            for k in 0..n {
                self.rhs[i][k] = d * (self.conv_out[k] - ui[k]);
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
                self.rhs[i][k] += rates[i];
            }
        }
        for i in 0..m {
            for (v, r) in u.component_mut(i).iter_mut().zip(&self.rhs[i]) {
                *v += dt * r;
            }
        }
        self.state.t += dt;
        check_and_clamp(&mut self.state.u, model.ceiling(), self.state.t)?;
        self.widen();
        Ok(())
    }

    pub fn cstep(&mut self) -> Result<(), SimError> {
        self.cstep_by(self.cfg.dt)
    }

    /// Largest value over the outer `EDGE_FRACTION` of nodes on each side.
    pub fn edge_max(&self) -> (f64, f64) {
        let u = &self.state.u;
        let n = u.len();
        let w = ((EDGE_FRACTION * n as f64).ceil() as usize).clamp(1, n);
        let side = |range: std::ops::Range<usize>| {
            (0..u.m())
                .flat_map(|i| u.component(i)[range.clone()].iter().copied())
                .fold(0.0, f64::max)
        };
        (side(0..w), side(n - w..n))
    }

    fn widen(&mut self) {
        loop {
            let (left, right) = self.edge_max();
            let u = &self.state.u;
            let (start, end) = (u.start(), u.start() + u.len() as i64);
            let grow_left = left >= self.edge_tol && -start < self.max_nodes;
            let grow_right = right >= self.edge_tol && end - 1 < self.max_nodes;
            if (left >= self.edge_tol && !grow_left) || (right >= self.edge_tol && !grow_right) {
                self.capped = true;
            }
            if !grow_left && !grow_right {
                return;
            }
            let b = GROW_BLOCK as i64;
            let new_start = if grow_left { (start - b).max(-self.max_nodes) } else { start };
            let new_end = if grow_right { (end + b).min(self.max_nodes + 1) } else { end };
            self.state.u.extend_to(new_start, (new_end - new_start) as usize);
        }
    }

    /// Bound on the dropped exterior convolution mass seen at distance
    /// `dist` inside the edge: `max_i d_i Ĵ_i(dist) · max u`.
    pub fn leak_bound(&self, dist: f64) -> f64 {
        let u = &self.state.u;
        let umax = u.values().iter().flatten().cloned().fold(0.0, f64::max);
        self.cfg
            .kernels
            .iter()
            .zip(self.cfg.model.diffusion())
            .map(|(k, d)| d * k.tail_mass(dist.max(0.0)))
            .fold(0.0, f64::max)
            * umax
    }

    pub fn levels(&self) -> Vec<LevelSample> {
        self.cfg
            .levels
            .iter()
            .map(|l| {
                let r = level_set(&self.state.u, l.component, l.lambda, &self.u_star)
                    .ok()
                    .flatten();
                LevelSample {
                    t: self.state.t,
                    x_minus: r.map(|p| p.0),
                    x_plus: r.map(|p| p.1),
                }
            })
            .collect()
    }

    pub fn sample(&self, levels: &[LevelSample]) -> CauchySample {
        let x_w = self.state.half_width();
        // distance from the outermost tracked level (or the initial support)
        // to the window edge
        let reach = levels
            .iter()
            .flat_map(|s| [s.x_minus.map(f64::abs), s.x_plus.map(f64::abs)])
            .flatten()
            .fold(self.cfg.h0, f64::max);
        let (l, r) = self.edge_max();
        let u = &self.state.u;
        let total_max = (0..u.len())
            .map(|k| (0..u.m()).map(|i| u.component(i)[k]).sum::<f64>())
            .fold(0.0, f64::max);
        CauchySample {
            t: self.state.t,
            half_width: x_w,
            total_max,
            edge_max: l.max(r),
            leak_bound: self.leak_bound(x_w - reach),
        }
    }
}

/// Integrates to `t_end`, returning what was gathered and the error that
/// stopped the run, if any.
pub fn run_partial(cfg: &CauchyConfig) -> (CauchySeries, Option<SimError>) {
    let mut series = CauchySeries {
        levels: LevelSeries {
            tracks: cfg
                .levels
                .iter()
                .map(|&level| LevelTrack {
                    level,
                    samples: Vec::new(),
                })
                .collect(),
        },
        ..Default::default()
    };
    let mut sim = match CauchySim::new(cfg) {
        Ok(s) => s,
        Err(e) => return (series, Some(e)),
    };
    let err = drive(&mut sim, cfg, &mut series).err();
    series.capped = sim.capped;
    (series, err)
}

fn record(sim: &CauchySim, series: &mut CauchySeries) {
    let lv = sim.levels();
    let s = sim.sample(&lv);
    series.leak_bound = series.leak_bound.max(s.leak_bound);
    series.samples.push(s);
    for (track, l) in series.levels.tracks.iter_mut().zip(lv) {
        track.samples.push(l);
    }
}

fn drive(sim: &mut CauchySim, cfg: &CauchyConfig, series: &mut CauchySeries) -> Result<(), SimError> {
    let dt = cfg.dt;
    let mut snaps: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|&t| t >= 0.0 && t <= cfg.t_end).collect();
    snaps.sort_by(f64::total_cmp);
    let mut next = 0;
    let take = |sim: &CauchySim, next: &mut usize, series: &mut CauchySeries| {
        while *next < snaps.len() && snaps[*next] <= sim.state.t + 1e-9 * dt {
            series.snapshots.push((sim.state.t, sim.state.u.clone()));
            *next += 1;
        }
    };
    record(sim, series);
    take(sim, &mut next, series);
    let n_steps = crate::fb_sim::steps_for(cfg.t_end, dt);
    for s in 1..=n_steps {
        let step = if s == n_steps { cfg.t_end - (n_steps - 1) as f64 * dt } else { dt };
        sim.cstep_by(step)?;
        if s == n_steps {
            sim.state.t = cfg.t_end;
        }
        if s % cfg.sample_stride as u64 == 0 || s == n_steps {
            record(sim, series);
        }
        take(sim, &mut next, series);
    }
    Ok(())
}

pub fn run(cfg: &CauchyConfig) -> Result<CauchySeries, SimError> {
    match run_partial(cfg) {
        (series, None) => Ok(series),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fb_sim;
    use crate::kernels::KernelSpec;
    use std::collections::BTreeMap;

    fn wnv() -> ReactionModel {
        let p: BTreeMap<String, f64> = [("a1", 1.0), ("a2", 1.0), ("b1", 0.5), ("b2", 0.5), ("e1", 1.0), ("e2", 1.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        ReactionModel::wnv(&p, vec![1.0, 1.0]).unwrap()
    }

    fn cfg(t_end: f64) -> CauchyConfig {
        let model = wnv();
        let k = Kernel::new(KernelSpec::Laplace { scale: 1.0 }, 1e-8).unwrap();
        let dt = 0.5 * stability_bound(&model);
        CauchyConfig {
            model,
            kernels: vec![k.clone(), k],
            h0: 5.0,
            initial: InitialProfile::default(),
            dx: 0.25,
            dt,
            t_end,
            snapshot_times: vec![t_end],
            sample_stride: 10,
            levels: vec![LevelSpec { component: 0, lambda: 0.25 }],
            max_half_width: 1e4,
            edge_tol: None,
        }
    }

    fn tent() -> GridFunction {
        GridFunction::from_fn(0.1, -20, 41, 1, |_, x| (1.0 - x.abs()).max(0.0)).unwrap()
    }

    #[test]
    fn tent_level_set() {
        let (a, b) = level_set(&tent(), 0, 0.5, &[1.0]).unwrap().unwrap();
        assert!((a + 0.5).abs() < 0.1 && (b - 0.5).abs() < 0.1);
        let zero = GridFunction::from_fn(0.1, -5, 11, 1, |_, _| 0.0).unwrap();
        assert_eq!(level_set(&zero, 0, 0.3, &[1.0]).unwrap(), None);
        assert!(matches!(level_set(&tent(), 0, 1.0, &[1.0]), Err(LevelError::InvalidLevel { .. })));
        assert!(matches!(level_set(&tent(), 0, 0.0, &[1.0]), Err(LevelError::InvalidLevel { .. })));
        assert!(matches!(level_set(&tent(), 1, 0.5, &[1.0, 1.0]), Err(LevelError::ComponentOutOfRange { .. })));
    }

    #[test]
    fn outermost_crossing_wins() {
        // two bumps: the outer crossings belong to different bumps
        let u = GridFunction::from_fn(0.5, -20, 41, 1, |_, x| if (x - 5.0).abs() < 2.0 || (x + 3.0).abs() < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let (a, b) = level_set(&u, 0, 0.5, &[2.0]).unwrap().unwrap();
        assert!(a < -3.0 && b > 6.0);
    }

    #[test]
    fn zero_stays_zero() {
        let c = cfg(5.0);
        let u = GridFunction::from_fn(0.25, -40, 81, 2, |_, _| 0.0).unwrap();
        let mut sim = CauchySim::with_state(&c, CauchyState { t: 0.0, u }).unwrap();
        for _ in 0..50 {
            sim.cstep().unwrap();
        }
        assert!(sim.state().u.values().iter().flatten().all(|&v| v == 0.0));
        assert_eq!(sim.state().u.len(), 81);
    }

    #[test]
    fn equilibrium_interior_is_stationary() {
        let c = CauchyConfig {
            max_half_width: 100.0,
            ..cfg(5.0)
        };
        let u = GridFunction::from_fn(0.25, -400, 801, 2, |_, _| 0.5).unwrap();
        let mut sim = CauchySim::with_state(&c, CauchyState { t: 0.0, u }).unwrap();
        for _ in 0..40 {
            sim.cstep().unwrap();
        }
        let dev = interior_deviation(&sim.state().u, &[0.5, 0.5], 50.0).unwrap();
        assert!(dev < 1e-8, "{dev}");
        assert!(sim.capped());
    }

    #[test]
    fn compact_data_converges_to_u_star_and_window_grows() {
        let c = cfg(40.0);
        let s = run(&c).unwrap();
        let (_, u) = s.snapshots.last().unwrap();
        assert!(interior_deviation(u, &[0.5, 0.5], 1.0).unwrap() < 1e-3);
        let first = s.samples[0].half_width;
        assert!(s.samples.last().unwrap().half_width > first);
        for smp in &s.samples {
            assert!(smp.edge_max < c.edge_tolerance().unwrap());
        }
        // even data: symmetric level set
        for l in &s.levels.tracks[0].samples {
            if let (Some(a), Some(b)) = (l.x_minus, l.x_plus) {
                assert!((a + b).abs() < 0.25);
            }
        }
    }

    #[test]
    fn dominates_free_boundary_solution() {
        let c = cfg(20.0);
        let mut f = fb_sim::tests::cfg(5.0, 1.0, 20.0);
        f.dt = c.dt;
        f.snapshot_times = vec![5.0, 10.0, 20.0];
        let c = CauchyConfig {
            snapshot_times: f.snapshot_times.clone(),
            ..c
        };
        let a = fb_sim::run(&f).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.snapshots.len(), b.snapshots.len());
        for ((ta, ua), (tb, ub)) in a.snapshots.iter().zip(&b.snapshots) {
            assert!((ta - tb).abs() < 1e-9);
            for k in ua.start()..ua.start() + ua.len() as i64 {
                for i in 0..2 {
                    assert!(ua.at_index(i, k) <= ub.at_index(i, k) + 1e-14);
                }
            }
        }
    }
}
