//! Semi-wave profiles on a truncated half-line, the flux identity that fixes
//! the spreading speed `c0`, and the minimal traveling-wave speed `C*`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{Kernel, Moment};
use crate::nonlocal_ops::{Convolver, OpsError};
use crate::reactions::{principal_eigenvalue, ReactionError, ReactionModel};

/// Tolerance of the monotonicity check on returned profiles.
pub const MONOTONE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SemiwaveError {
    #[error("relaxation did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("profile component {component} increases by {excess:e} at x = {x}")]
    NonMonotone {
        component: usize,
        x: f64,
        excess: f64,
        solution: Box<SemiWaveSolution>,
    },
    #[error("kernel of component {0} violates the first-moment condition: spreading speed is infinite")]
    J1Violated(usize),
    #[error("no sign change of Ψ(c) - c found below c = {0}")]
    BracketNotFound(f64),
    #[error("threshold not bracketed by the speed grid: {0}")]
    ThresholdNotBracketed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiWaveSolution {
    pub c: f64,
    pub l: f64,
    pub dx: f64,
    /// Nodes `-L + k·dx`, last node at 0.
    pub mesh: Vec<f64>,
    /// `phi[i][k]`: component `i` at node `k`.
    pub phi: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Ψ(c) for the `mu` used when solving (None when no `mu` was given).
    pub flux_value: Option<f64>,
}

impl SemiWaveSolution {
    /// Value of component `i` at `x` by linear interpolation.
    pub fn value_at(&self, i: usize, x: f64) -> f64 {
        let s = ((x + self.l) / self.dx).clamp(0.0, (self.mesh.len() - 1) as f64);
        let k = (s.floor() as usize).min(self.mesh.len() - 2);
        let w = s - k as f64;
        (1.0 - w) * self.phi[i][k] + w * self.phi[i][k + 1]
    }

    /// Largest increase of any component, with its location.
    pub fn monotonicity_defect(&self) -> (usize, f64, f64) {
        let mut worst = (0, self.mesh[0], 0.0);
        for (i, p) in self.phi.iter().enumerate() {
            for k in 1..p.len() {
                let inc = p[k] - p[k - 1];
                if inc > worst.2 {
                    worst = (i, self.mesh[k], inc);
                }
            }
        }
        worst
    }

    /// `l_μ`: first position (from the left) where `φ_i` drops below `u*_i / 2`.
    pub fn half_level(&self, i: usize, u_star_i: f64) -> Option<f64> {
        let p = &self.phi[i];
        let target = 0.5 * u_star_i;
        for k in 1..p.len() {
            if p[k - 1] >= target && p[k] < target {
                let w = (p[k - 1] - target) / (p[k - 1] - p[k]);
                return Some(-(self.mesh[k - 1] + w * self.dx));
            }
        }
        None
    }
}

/// Discretization and stopping parameters of the relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub dx: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            dx: 0.25,
            tol: 1e-9,
            max_iter: 2_000_000,
        }
    }
}

/// Reusable relaxation workspace for one (model, kernels, L, dx).
pub struct ProfileSolver<'a> {
    model: &'a ReactionModel,
    convolvers: Vec<Convolver>,
    /// Tail sums `S_i(n) = Σ_{o ≥ n} w_o` of the lattice weights.
    tails: Vec<Vec<f64>>,
    u_star: Vec<f64>,
    lf: f64,
    l: f64,
    dx: f64,
    n: usize,
}

impl<'a> ProfileSolver<'a> {
    pub fn new(model: &'a ReactionModel, kernels: &[Kernel], l: f64, dx: f64) -> Result<Self, SemiwaveError> {
        let m0 = model.m0();
        if kernels.len() != m0 {
            return Err(SemiwaveError::InvalidInput(format!("expected {m0} kernels, got {}", kernels.len())));
        }
        let scale = kernels.iter().map(|k| k.core_scale()).fold(0.0, f64::max);
        if !(l >= 20.0 * scale) {
            return Err(SemiwaveError::InvalidInput(format!("L = {l} below 20 kernel scales ({scale})")));
        }
        let u_star = model.positive_equilibrium()?;
        let n = (l / dx).round() as usize;
        let l = n as f64 * dx;
        let mut convolvers = Vec::with_capacity(m0);
        let mut tails = Vec::with_capacity(m0);
        for k in kernels {
            let mut conv = Convolver::new(k.clone(), dx)?;
            let w = conv.weights(n + 2).to_vec();
            let mut s = vec![0.0; n + 3];
            for o in (0..w.len()).rev() {
                s[o] = s[o + 1] + w[o];
            }
            // offsets beyond n + 1 carry the remaining half-mass
            let beyond = (0.5 * (1.0 - k.mass_deficit()) + 0.5 * w[0]) - s[0];
            for v in s.iter_mut() {
                *v += beyond.max(0.0);
            }
            tails.push(s);
            convolvers.push(conv);
        }
        Ok(ProfileSolver {
            model,
            convolvers,
            tails,
            u_star,
            lf: model.lipschitz_estimate(),
            l,
            dx,
            n,
        })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn mesh(&self) -> Vec<f64> {
        (0..=self.n).map(|k| -self.l + k as f64 * self.dx).collect()
    }

    /// Initial guess `φ = u*` with `φ(0) = 0`: a supersolution.
    pub fn initial_profile(&self) -> Vec<Vec<f64>> {
        self.u_star
            .iter()
            .map(|&u| {
                let mut p = vec![u; self.n + 1];
                p[self.n] = 0.0;
                p
            })
            .collect()
    }

    pub fn pseudo_step(&self, c: f64) -> f64 {
        let dmax = self.model.diffusion().iter().cloned().fold(0.0, f64::max);
        0.5 / (dmax + self.lf + 1.5 * c / self.dx)
    }

    /// Relaxes `phi` in place at speed `c`. `stop` is consulted every 64
    /// iterations and can end the iteration early (returns `Ok(false)` then).
    pub fn relax(
        &mut self,
        c: f64,
        phi: &mut [Vec<f64>],
        tol: f64,
        max_iter: usize,
        mut stop: impl FnMut(&[Vec<f64>]) -> bool,
    ) -> Result<(bool, usize, f64), SemiwaveError> {
        let m = self.model.m();
        let m0 = self.model.m0();
        let n = self.n;
        let dt = self.pseudo_step(c);
        let inv_dx = 1.0 / self.dx;
        let mut conv = vec![vec![0.0; n + 1]; m0];
        let mut rhs = vec![vec![0.0; n + 1]; m];
        let mut point = vec![0.0; m];
        let mut rates = vec![0.0; m];
        let mut residual = f64::INFINITY;
        for iter in 0..max_iter {
            for i in 0..m0 {
                self.convolvers[i].convolve_into(&phi[i], &mut conv[i]);
                let us = self.u_star[i];
                for (k, v) in conv[i].iter_mut().enumerate() {
                    *v += us * self.tails[i][k + 1];
                }
            }
            residual = 0.0;
            for k in 1..n {
                for (i, p) in point.iter_mut().enumerate() {
                    *p = phi[i][k];
                }
                self.model.rates_into(&point, &mut rates);
                for i in 0..m {
                    let d = if k + 2 <= n {
                        0.5 * (4.0 * phi[i][k + 1] - 3.0 * phi[i][k] - phi[i][k + 2])
                    } else {
                        phi[i][k + 1] - phi[i][k]
                    };
                    let mut r = rates[i] + c * d * inv_dx;
                    if i < m0 {
                        r += self.model.diffusion()[i] * (conv[i][k] - phi[i][k]);
                    }
                    rhs[i][k] = r;
                    residual = residual.max(r.abs());
                }
            }
            if !residual.is_finite() {
                return Err(SemiwaveError::NoConvergence {
                    iterations: iter,
                    residual,
                });
            }
            if residual < tol {
                return Ok((true, iter, residual));
            }
            for i in 0..m {
                for k in 1..n {
                    phi[i][k] = (phi[i][k] + dt * rhs[i][k]).max(0.0);
                }
            }
            if iter % 64 == 63 && stop(phi) {
                return Ok((false, iter + 1, residual));
            }
        }
        Ok((false, max_iter, residual))
    }

    fn finish(&self, c: f64, phi: Vec<Vec<f64>>, residual: f64, iterations: usize, converged: bool) -> SemiWaveSolution {
        SemiWaveSolution {
            c,
            l: self.l,
            dx: self.dx,
            mesh: self.mesh(),
            phi,
            residual,
            iterations,
            converged,
            flux_value: None,
        }
    }

    /// Full solve from `start` (default: the `u*` supersolution).
    pub fn solve(&mut self, c: f64, start: Option<Vec<Vec<f64>>>, tol: f64, max_iter: usize) -> Result<SemiWaveSolution, SemiwaveError> {
        let mut phi = start.unwrap_or_else(|| self.initial_profile());
        let (converged, iterations, residual) = self.relax(c, &mut phi, tol, max_iter, |_| false)?;
        if !converged {
            return Err(SemiwaveError::NoConvergence { iterations, residual });
        }
        let sol = self.finish(c, phi, residual, iterations, true);
        check_monotone(sol)
    }
}

fn check_monotone(sol: SemiWaveSolution) -> Result<SemiWaveSolution, SemiwaveError> {
    let (component, x, excess) = sol.monotonicity_defect();
    if excess > MONOTONE_TOL {
        return Err(SemiwaveError::NonMonotone {
            component,
            x,
            excess,
            solution: Box::new(sol),
        });
    }
    Ok(sol)
}

/// Relaxes the truncated semi-wave problem at speed `c` on `[-L, 0]`.
pub fn solve_profile(
    c: f64,
    model: &ReactionModel,
    kernels: &[Kernel],
    l: f64,
    params: &SolverParams,
) -> Result<SemiWaveSolution, SemiwaveError> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(SemiwaveError::InvalidInput(format!("c = {c} must be nonnegative")));
    }
    if !(params.tol > 0.0) {
        return Err(SemiwaveError::InvalidInput("tol must be positive".into()));
    }
    let mut solver = ProfileSolver::new(model, kernels, l, params.dx)?;
    solver.solve(c, None, params.tol, params.max_iter)
}

/// Ψ = Σ μ_i ∫_{-L}^0 φ_i(x) Ĵ_i(-x) dx by the trapezoid rule.
pub fn flux_functional(sol: &SemiWaveSolution, kernels: &[Kernel], mu: &[f64]) -> f64 {
    let n = sol.mesh.len();
    let mut total = 0.0;
    for (i, (&m, k)) in mu.iter().zip(kernels).enumerate() {
        if m == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for j in 0..n {
            let w = if j == 0 || j == n - 1 { 0.5 * sol.dx } else { sol.dx };
            acc += w * sol.phi[i][j] * k.tail_mass(-sol.mesh[j]);
        }
        total += m * acc;
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C0Result {
    pub c0: f64,
    pub solution: SemiWaveSolution,
    /// `(c, Ψ(c) - c)` for every evaluated speed, in evaluation order.
    pub trace: Vec<(f64, f64)>,
    /// Number of sign changes of `G` along the trace sorted by `c`.
    pub sign_changes: usize,
    pub bracket: (f64, f64),
}

fn sign_changes(trace: &[(f64, f64)]) -> usize {
    let mut t = trace.to_vec();
    t.sort_by(|a, b| a.0.total_cmp(&b.0));
    t.windows(2).filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0)).count()
}

/// Speed `c0` solving `Ψ(c) = c` by doubling from `tol_c` and bisection.
pub fn find_c0(
    model: &ReactionModel,
    kernels: &[Kernel],
    mu: &[f64],
    l: f64,
    tol_c: f64,
    params: &SolverParams,
) -> Result<C0Result, SemiwaveError> {
    if mu.len() != kernels.len() {
        return Err(SemiwaveError::InvalidInput("mu and kernels differ in length".into()));
    }
    if !(tol_c > 0.0) {
        return Err(SemiwaveError::InvalidInput("tol_c must be positive".into()));
    }
    for (i, (k, &m)) in kernels.iter().zip(mu).enumerate() {
        if m > 0.0 && !k.classify().satisfies_j1 {
            return Err(SemiwaveError::J1Violated(i + 1));
        }
    }
    let mut solver = ProfileSolver::new(model, kernels, l, params.dx)?;
    let mut trace = Vec::new();
    let eval = |solver: &mut ProfileSolver,
                    c: f64,
                    start: Option<Vec<Vec<f64>>>,
                    trace: &mut Vec<(f64, f64)>|
     -> Result<(f64, SemiWaveSolution), SemiwaveError> {
        let mut sol = solver.solve(c, start, params.tol, params.max_iter)?;
        let psi = flux_functional(&sol, kernels, mu);
        sol.flux_value = Some(psi);
        trace.push((c, psi - c));
        Ok((psi - c, sol))
    };
    // warm starts: a profile at a smaller speed is a supersolution at a larger one
    let mut lo = tol_c;
    let (mut g_lo, mut sol_lo) = eval(&mut solver, lo, None, &mut trace)?;
    if g_lo <= 0.0 {
        return Err(SemiwaveError::BracketNotFound(lo));
    }
    let mut hi = 2.0 * lo;
    let (mut g_hi, mut sol_hi);
    let mut doublings = 0;
    loop {
        let (g, sol) = eval(&mut solver, hi, Some(sol_lo.phi.clone()), &mut trace)?;
        if g <= 0.0 {
            g_hi = g;
            sol_hi = sol;
            break;
        }
        lo = hi;
        g_lo = g;
        sol_lo = sol;
        hi *= 2.0;
        doublings += 1;
        if doublings >= 60 {
            return Err(SemiwaveError::BracketNotFound(hi));
        }
    }
    while hi - lo > tol_c && g_lo.abs() >= tol_c && g_hi.abs() >= tol_c {
        let mid = 0.5 * (lo + hi);
        let (g, sol) = eval(&mut solver, mid, Some(sol_lo.phi.clone()), &mut trace)?;
        if g > 0.0 {
            lo = mid;
            g_lo = g;
            sol_lo = sol;
        } else {
            hi = mid;
            g_hi = g;
            sol_hi = sol;
        }
    }
    let (c0, solution) = if g_lo.abs() < tol_c || g_hi.abs() < tol_c {
        // an endpoint already satisfies |Ψ(c) - c| < tol_c
        if g_lo.abs() <= g_hi.abs() {
            (lo, sol_lo)
        } else {
            (hi, sol_hi)
        }
    } else {
        // linear interpolation of G inside the final bracket
        let c = lo + (hi - lo) * g_lo / (g_lo - g_hi);
        let sol = if c - lo <= hi - c { sol_lo } else { sol_hi };
        (c, sol)
    };
    Ok(C0Result {
        c0,
        solution,
        sign_changes: sign_changes(&trace),
        trace,
        bracket: (lo, hi),
    })
}

/// One existence-proxy evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyRecord {
    pub c: f64,
    pub l: f64,
    /// `min_i φ_i(-L/2) / u*_i` when the relaxation stopped.
    pub mid_ratio: f64,
    pub exists: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CStarEstimate {
    pub value: Moment,
    pub bracket: Option<(f64, f64)>,
    pub linearized: Option<f64>,
    pub records: Vec<ProxyRecord>,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CStarParams {
    pub l_schedule: Vec<f64>,
    pub c_grid: Vec<f64>,
    /// Relative bisection tolerance.
    pub rel_tol: f64,
    /// Existence threshold on `φ(-L/2) / u*`.
    pub proxy_threshold: f64,
    pub solver: SolverParams,
}

impl Default for CStarParams {
    fn default() -> Self {
        CStarParams {
            l_schedule: vec![50.0, 100.0, 200.0],
            c_grid: (1..=16).map(|k| 0.25 * k as f64).collect(),
            rel_tol: 2e-3,
            proxy_threshold: 0.5,
            solver: SolverParams::default(),
        }
    }
}

/// Existence proxy at speed `c`: φ(-L/2) ends above the threshold on the
/// longest domain tried. Relaxation from `u*` is monotone decreasing in
/// pseudo-time, so dropping below the threshold settles a miss early.
fn proxy_exists(
    solvers: &mut [ProfileSolver],
    c: f64,
    params: &CStarParams,
    records: &mut Vec<ProxyRecord>,
) -> Result<bool, SemiwaveError> {
    // near C* the transition layer is wider than the short domains: one miss
    // is not decisive, two consecutive misses count as decay
    let mut misses = 0;
    let mut exists = false;
    for solver in solvers.iter_mut() {
        let u_star = solver.u_star.clone();
        let mid = solver.n / 2;
        let ratio = |phi: &[Vec<f64>]| {
            phi.iter()
                .zip(&u_star)
                .map(|(p, u)| p[mid] / u)
                .fold(f64::INFINITY, f64::min)
        };
        let mut phi = solver.initial_profile();
        let th = params.proxy_threshold;
        let (_, iterations, _) = solver.relax(c, &mut phi, params.solver.tol, params.solver.max_iter, |p| ratio(p) < th)?;
        let r = ratio(&phi);
        exists = r >= th;
        records.push(ProxyRecord {
            c,
            l: solver.l,
            mid_ratio: r,
            exists,
            iterations,
        });
        misses = if exists { 0 } else { misses + 1 };
        if misses >= 2 {
            return Ok(false);
        }
    }
    Ok(exists)
}

/// Minimal traveling-wave speed by the existence-proxy threshold search.
pub fn estimate_cstar(model: &ReactionModel, kernels: &[Kernel], params: &CStarParams) -> Result<CStarEstimate, SemiwaveError> {
    for (i, k) in kernels.iter().enumerate() {
        if !k.classify().satisfies_j2 {
            return Ok(CStarEstimate {
                value: Moment::Infinite,
                bracket: None,
                linearized: None,
                records: Vec::new(),
                reason: Some(format!("kernel of component {} violates the exponential-moment condition", i + 1)),
            });
        }
    }
    let linearized = linearized_speed(model, kernels);
    let mut solvers = params
        .l_schedule
        .iter()
        .map(|&l| ProfileSolver::new(model, kernels, l, params.solver.dx))
        .collect::<Result<Vec<_>, _>>()?;
    let mut records = Vec::new();
    let mut grid = params.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut last_exists: Option<f64> = None;
    let mut first_missing: Option<f64> = None;
    for &c in &grid {
        if proxy_exists(&mut solvers, c, params, &mut records)? {
            last_exists = Some(c);
        } else {
            first_missing = Some(c);
            break;
        }
    }
    let (Some(mut lo), Some(mut hi)) = (last_exists, first_missing) else {
        return Err(SemiwaveError::ThresholdNotBracketed(format!(
            "last existing speed {last_exists:?}, first missing {first_missing:?}"
        )));
    };
    while hi - lo > params.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if proxy_exists(&mut solvers, mid, params, &mut records)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CStarEstimate {
        value: Moment::Finite(0.5 * (lo + hi)),
        bracket: Some((lo, hi)),
        linearized,
        records,
        reason: None,
    })
}

/// Diagnostic `min_λ s(λ)/λ`, `s(λ)` the principal eigenvalue of
/// `diag(d_i(∫J_i(y)e^{-λy}dy - 1)) + ∇F(0)`. None if any moment diverges on
/// the whole search range.
pub fn linearized_speed(model: &ReactionModel, kernels: &[Kernel]) -> Option<f64> {
    let m = model.m();
    let j0 = model.jacobian_unchecked(&vec![0.0; m]);
    let lam_max = kernels.iter().map(|k| k.exp_moment_abscissa()).fold(f64::INFINITY, f64::min);
    let lam_max = if lam_max.is_finite() { lam_max } else { 50.0 };
    let speed = |lam: f64| -> Option<f64> {
        let mut a: DMatrix<f64> = j0.clone();
        for (i, k) in kernels.iter().enumerate() {
            let mgf = k.two_sided_mgf(lam).value()?;
            a[(i, i)] += model.diffusion()[i] * (mgf - 1.0);
        }
        Some(principal_eigenvalue(&a) / lam)
    };
    let n = 400;
    let mut best: Option<(f64, f64)> = None;
    for j in 1..n {
        let lam = lam_max * j as f64 / n as f64;
        if let Some(s) = speed(lam) {
            if best.map_or(true, |b| s < b.1) {
                best = Some((lam, s));
            }
        }
    }
    let (lam0, _) = best?;
    // golden-section refinement around the grid minimum
    let h = lam_max / n as f64;
    let (mut a, mut b) = ((lam0 - h).max(1e-12), (lam0 + h).min(lam_max * (1.0 - 1e-12)));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        match (speed(x1), speed(x2)) {
            (Some(f1), Some(f2)) if f1 <= f2 => b = x2,
            (Some(_), Some(_)) => a = x1,
            _ => break,
        }
    }
    speed(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
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

    fn laplace() -> Vec<Kernel> {
        let k = Kernel::new(KernelSpec::Laplace { scale: 1.0 }, 1e-8).unwrap();
        vec![k.clone(), k]
    }

    fn params() -> SolverParams {
        SolverParams {
            dx: 0.25,
            tol: 1e-8,
            max_iter: 500_000,
        }
    }

    #[test]
    fn pinned_ends_and_saturation_at_small_speed() {
        let sol = solve_profile(0.01, &wnv(), &laplace(), 40.0, &params()).unwrap();
        for p in &sol.phi {
            assert_eq!(p[0], 0.5);
            assert_eq!(*p.last().unwrap(), 0.0);
            assert!((sol.value_at(0, -20.0) - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn flux_functional_is_linear_in_mu() {
        let k = laplace();
        let sol = solve_profile(0.1, &wnv(), &k, 40.0, &params()).unwrap();
        let a = flux_functional(&sol, &k, &[1.0, 1.0]);
        let b = flux_functional(&sol, &k, &[2.0, 2.0]);
        assert!((b - 2.0 * a).abs() < 1e-14);
        assert_eq!(flux_functional(&sol, &k, &[0.0, 0.0]), 0.0);
        let mut zero = sol.clone();
        zero.phi.iter_mut().for_each(|p| p.iter_mut().for_each(|v| *v = 0.0));
        assert_eq!(flux_functional(&zero, &k, &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn heavy_tail_violates_j1() {
        let k = Kernel::new(KernelSpec::Powerlaw { gamma: 1.5, core_width: 1.0 }, 1e-8).unwrap();
        let err = find_c0(&wnv(), &[k.clone(), k], &[1.0, 1.0], 40.0, 1e-3, &params()).unwrap_err();
        assert_eq!(err, SemiwaveError::J1Violated(1));
    }

    #[test]
    fn heavy_tail_cstar_infinite() {
        let k = Kernel::new(KernelSpec::Powerlaw { gamma: 3.0, core_width: 1.0 }, 1e-8).unwrap();
        let est = estimate_cstar(&wnv(), &[k.clone(), k], &CStarParams::default()).unwrap();
        assert_eq!(est.value, Moment::Infinite);
    }

    #[test]
    fn linearized_speed_laplace_wnv() {
        // independent oracle: closed-form eigenvalue of the symmetric 2×2 case,
        // s(λ) = 1/(1-λ²) - 1 - 1/2 + 1, minimized over a fine grid
        let oracle = (1..100_000)
            .map(|j| {
                let l = j as f64 / 100_000.0;
                (1.0 / (1.0 - l * l) - 0.5) / l
            })
            .fold(f64::INFINITY, f64::min);
        let got = linearized_speed(&wnv(), &laplace()).unwrap();
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
    }
}
