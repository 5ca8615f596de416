//! Discrete convolution `J * u` on a uniform lattice and the boundary flux
//! integrals driving the free boundaries.
//!
//! Node values are interpreted as a piecewise-linear interpolant, so the
//! convolution weights are `∫ J(y) hat_j(y) dy` (product integration); their
//! sum is exactly the kernel's numerical mass.

use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::kernels::Kernel;

/// Window size above which the FFT path is used.
pub const FFT_THRESHOLD: usize = 512;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OpsError {
    #[error("mesh too coarse: dx = {dx} exceeds kernel core scale / 4 = {limit}")]
    MeshTooCoarse { dx: f64, limit: f64 },
    #[error("component {component} out of range (m = {m})")]
    ComponentOutOfRange { component: usize, m: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Per-component node values on the lattice `x_k = k·dx`, `k ∈ [start, start + len)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    dx: f64,
    start: i64,
    values: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn new(dx: f64, start: i64, values: Vec<Vec<f64>>) -> Result<Self, OpsError> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(OpsError::InvalidGrid(format!("dx = {dx}")));
        }
        let Some(len) = values.first().map(Vec::len) else {
            return Err(OpsError::InvalidGrid("no components".into()));
        };
        if len == 0 {
            return Err(OpsError::InvalidGrid("empty active range".into()));
        }
        if values.iter().any(|c| c.len() != len) {
            return Err(OpsError::InvalidGrid("components differ in length".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(OpsError::InvalidGrid("non-finite value".into()));
        }
        Ok(GridFunction { dx, start, values })
    }

    /// Samples `f(component, x)` on the lattice nodes of `[start, start + len)`.
    pub fn from_fn(dx: f64, start: i64, len: usize, m: usize, f: impl Fn(usize, f64) -> f64) -> Result<Self, OpsError> {
        let values = (0..m)
            .map(|i| (0..len).map(|k| f(i, (start + k as i64) as f64 * dx)).collect())
            .collect();
        Self::new(dx, start, values)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Global lattice index of the first active node.
    pub fn start(&self) -> i64 {
        self.start
    }

    /// Position of the node at `x = 0` relative to the first active node.
    pub fn origin_index(&self) -> i64 {
        -self.start
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// Position of local node `k`.
    pub fn x(&self, k: usize) -> f64 {
        (self.start + k as i64) as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.x(k)).collect()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Value of component `i` at global lattice index `k` (0 outside the active range).
    pub fn at_index(&self, i: usize, k: i64) -> f64 {
        let local = k - self.start;
        if local < 0 || local >= self.len() as i64 {
            0.0
        } else {
            self.values[i][local as usize]
        }
    }

    /// Extends the active range to `[start, start + len)` with zeros.
    /// The new range must contain the current one.
    pub fn extend_to(&mut self, start: i64, len: usize) {
        let end = start + len as i64;
        let cur_end = self.start + self.len() as i64;
        debug_assert!(start <= self.start && end >= cur_end);
        let front = (self.start - start) as usize;
        let back = (end - cur_end) as usize;
        for c in &mut self.values {
            if front > 0 {
                c.splice(0..0, std::iter::repeat(0.0).take(front));
            }
            c.extend(std::iter::repeat(0.0).take(back));
        }
        self.start = start;
    }

    fn check_component(&self, component: usize) -> Result<(), OpsError> {
        if component >= self.m() {
            return Err(OpsError::ComponentOutOfRange {
                component,
                m: self.m(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Convolution engine for one kernel on one mesh. Caches lattice weights and
/// kernel spectra per padded FFT size.
pub struct Convolver {
    kernel: Kernel,
    dx: f64,
    max_offset: u64,
    weights: Vec<f64>,
    planner: FftPlanner<f64>,
    spectra: HashMap<usize, Arc<SpectrumEntry>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

struct SpectrumEntry {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
}

impl Clone for Convolver {
    fn clone(&self) -> Self {
        Convolver {
            kernel: self.kernel.clone(),
            dx: self.dx,
            max_offset: self.max_offset,
            weights: self.weights.clone(),
            planner: FftPlanner::new(),
            spectra: self.spectra.clone(),
            buf: Vec::new(),
            scratch: Vec::new(),
        }
    }
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("dx", &self.dx)
            .field("max_offset", &self.max_offset)
            .field("cached_weights", &self.weights.len())
            .finish()
    }
}

/// Rejects meshes that undersample the kernel core.
pub fn check_mesh(kernel: &Kernel, dx: f64) -> Result<(), OpsError> {
    let limit = kernel.core_scale() / 4.0;
    if !(dx > 0.0) || dx > limit * (1.0 + 1e-12) {
        return Err(OpsError::MeshTooCoarse { dx, limit });
    }
    Ok(())
}

impl Convolver {
    pub fn new(kernel: Kernel, dx: f64) -> Result<Self, OpsError> {
        check_mesh(&kernel, dx)?;
        let max_offset = kernel.max_lattice_offset(dx);
        Ok(Convolver {
            kernel,
            dx,
            max_offset,
            weights: Vec::new(),
            planner: FftPlanner::new(),
            spectra: HashMap::new(),
            buf: Vec::new(),
            scratch: Vec::new(),
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Weights for offsets `0..n` (fewer if the kernel support ends first).
    pub fn weights(&mut self, n: usize) -> &[f64] {
        let n = n.min(self.max_offset.saturating_add(1).min(usize::MAX as u64) as usize);
        while self.weights.len() < n {
            let j = self.weights.len() as i64;
            self.weights.push(self.kernel.lattice_weight(j, self.dx));
        }
        &self.weights[..n]
    }

    /// Effective half-window for an active range of `n` nodes.
    fn half_window(&self, n: usize) -> usize {
        (n.saturating_sub(1) as u64).min(self.max_offset) as usize
    }

    /// Whether a range of `n` nodes is convolved by FFT.
    pub fn uses_fft(&self, n: usize) -> bool {
        2 * self.half_window(n) + 1 > FFT_THRESHOLD
    }

    /// `out[k] = Σ_j w_{k-j} f[j]`, choosing the direct or FFT path.
    pub fn convolve_into(&mut self, f: &[f64], out: &mut [f64]) {
        if self.uses_fft(f.len()) {
            self.convolve_fft_into(f, out);
        } else {
            self.convolve_direct_into(f, out);
        }
    }

    /// Direct windowed summation.
    pub fn convolve_direct_into(&mut self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let w_len = self.half_window(n) + 1;
        let w = self.weights(w_len).to_vec();
        let width = w.len();
        for (k, o) in out.iter_mut().enumerate().take(n) {
            let lo = k.saturating_sub(width - 1);
            let hi = (k + width).min(n);
            let mut acc = 0.0;
            for (j, &fj) in f.iter().enumerate().take(hi).skip(lo) {
                acc += w[k.abs_diff(j)] * fj;
            }
            *o = acc;
        }
    }

    /// Zero-padded circular convolution; exact linear convolution since the
    /// padded size is at least `2n`.
    pub fn convolve_fft_into(&mut self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let p = (2 * n).next_power_of_two();
        let entry = self.spectrum(p);
        self.buf.clear();
        self.buf.extend(f.iter().map(|&v| Complex64::new(v, 0.0)));
        self.buf.resize(p, Complex64::new(0.0, 0.0));
        let scratch_len = entry.forward.get_inplace_scratch_len().max(entry.inverse.get_inplace_scratch_len());
        self.scratch.resize(scratch_len, Complex64::new(0.0, 0.0));
        entry.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (b, k) in self.buf.iter_mut().zip(&entry.kernel_hat) {
            *b *= k;
        }
        entry.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / p as f64;
        for (o, b) in out.iter_mut().zip(&self.buf).take(n) {
            *o = b.re * scale;
        }
    }

    fn spectrum(&mut self, p: usize) -> Arc<SpectrumEntry> {
        if let Some(e) = self.spectra.get(&p) {
            return e.clone();
        }
        let half = p / 2;
        let w = self.weights(half).to_vec();
        let mut hat = vec![Complex64::new(0.0, 0.0); p];
        for (j, &wj) in w.iter().enumerate() {
            hat[j] = Complex64::new(wj, 0.0);
            if j > 0 {
                hat[p - j] = Complex64::new(wj, 0.0);
            }
        }
        let forward = self.planner.plan_fft_forward(p);
        let inverse = self.planner.plan_fft_inverse(p);
        let mut scratch = vec![Complex64::new(0.0, 0.0); forward.get_inplace_scratch_len()];
        forward.process_with_scratch(&mut hat, &mut scratch);
        let entry = Arc::new(SpectrumEntry {
            forward,
            inverse,
            kernel_hat: hat,
        });
        self.spectra.insert(p, entry.clone());
        entry
    }

    /// Convolution of node values `f` (first node at `x_first`) supported on
    /// `(g, h)`: the interpolant vanishes at `g` and `h` rather than at the
    /// neighbouring lattice nodes. The end cells enter through scaled end
    /// values, which keeps the operator Toeplitz.
    pub fn convolve_clipped_into(&mut self, f: &[f64], x_first: f64, g: f64, h: f64, tmp: &mut Vec<f64>, out: &mut [f64]) {
        let n = f.len();
        tmp.clear();
        tmp.extend_from_slice(f);
        if n > 0 {
            let (a, b) = end_factors(n, self.dx, x_first, g, h);
            tmp[0] *= a;
            tmp[n - 1] *= b;
            if n == 1 {
                // both ends in the same node: one combined factor
                tmp[0] = f[0] * (a + b - 1.0);
            }
        }
        let data = std::mem::take(tmp);
        self.convolve_into(&data, out);
        *tmp = data;
    }

    /// Flux `∫_g^h Ĵ(h - x) f(x) dx` (right) or `∫_g^h Ĵ(x - g) f(x) dx` (left)
    /// by the trapezoid rule on the nodes plus the two partial end cells.
    pub fn flux(&self, f: &[f64], x_first: f64, g: f64, h: f64, side: Side) -> f64 {
        boundary_flux_nodes(&self.kernel, f, x_first, self.dx, g, h, side)
    }
}

/// Scale factors for the first and last node when the interpolant vanishes at
/// `g`, `h` instead of at the lattice neighbours.
fn end_factors(n: usize, dx: f64, x_first: f64, g: f64, h: f64) -> (f64, f64) {
    let x_last = x_first + (n - 1) as f64 * dx;
    let a = (dx + (x_first - g).clamp(0.0, dx)) / (2.0 * dx);
    let b = (dx + (h - x_last).clamp(0.0, dx)) / (2.0 * dx);
    (a, b)
}

fn boundary_flux_nodes(kernel: &Kernel, f: &[f64], x_first: f64, dx: f64, g: f64, h: f64, side: Side) -> f64 {
    let n = f.len();
    if n == 0 {
        return 0.0;
    }
    let x_last = x_first + (n - 1) as f64 * dx;
    let left_gap = (x_first - g).max(0.0);
    let right_gap = (h - x_last).max(0.0);
    let mut acc = 0.0;
    for (k, &v) in f.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let mut w = dx;
        if k == 0 {
            w = 0.5 * (dx + left_gap);
        }
        if k == n - 1 {
            w = if n == 1 { 0.5 * (left_gap + right_gap) } else { 0.5 * (dx + right_gap) };
        }
        let x = x_first + k as f64 * dx;
        let z = match side {
            Side::Right => h - x,
            Side::Left => x - g,
        };
        acc += w * kernel.tail_mass(z) * v;
    }
    acc
}

/// One-shot convolution of a component, zero-extended outside the active range.
pub fn convolve(kernel: &Kernel, f: &GridFunction, component: usize) -> Result<Vec<f64>, OpsError> {
    f.check_component(component)?;
    let mut conv = Convolver::new(kernel.clone(), f.dx)?;
    let mut out = vec![0.0; f.len()];
    conv.convolve_into(f.component(component), &mut out);
    Ok(out)
}

/// Boundary flux for `f` supported on `(g, h)`.
pub fn boundary_flux(kernel: &Kernel, f: &GridFunction, component: usize, side: Side, g: f64, h: f64) -> Result<f64, OpsError> {
    f.check_component(component)?;
    check_mesh(kernel, f.dx)?;
    let x_first = f.x(0);
    let x_last = f.x(f.len() - 1);
    if !(g < h) || x_first < g - f.dx || x_first - g > f.dx * (1.0 + 1e-9) || h - x_last > f.dx * (1.0 + 1e-9) || x_last > h + f.dx {
        return Err(OpsError::InvalidGrid(format!(
            "boundaries g = {g}, h = {h} do not match the active range [{x_first}, {x_last}]"
        )));
    }
    Ok(boundary_flux_nodes(kernel, f.component(component), x_first, f.dx, g, h, side))
}

/// Node values of the tent `l - |x|` on `[-l, l]` (`l` rounded to the lattice).
fn tent(l: f64, dx: f64) -> (Vec<f64>, f64) {
    let n = (l / dx).round() as i64;
    let l = n as f64 * dx;
    let vals = (-n..=n).map(|k| l - (k as f64 * dx).abs()).collect();
    (vals, l)
}

/// Node values of the plateau-ramp `min(1, (l2 - |x|)/l1)` on `[-l2, l2]`.
fn plateau(l1: f64, l2: f64, dx: f64) -> Vec<f64> {
    let n = (l2 / dx).round() as i64;
    (-n..=n)
        .map(|k| ((l2 - (k as f64 * dx).abs()) / l1).min(1.0).max(0.0))
        .collect()
}

/// Checks `∫ J(x-y) φ(y) dy ≥ (1-ε) φ(x)` at every node for the given profile.
fn lemma_holds(conv: &mut Convolver, phi: &[f64], eps: f64) -> bool {
    let mut out = vec![0.0; phi.len()];
    conv.convolve_into(phi, &mut out);
    out.iter().zip(phi).all(|(&c, &p)| c >= (1.0 - eps) * p - 1e-12)
}

/// Outcome of a lemma search over increasing `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaSearch {
    pub smallest_l: Option<f64>,
    pub tried: Vec<(f64, bool)>,
}

/// Default `l` schedule: 1, 1.5, 2, 3, 4, 6, ... up to `l_max`.
pub fn l_schedule(l_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut base = 1.0;
    while base <= l_max {
        out.push(base);
        if 1.5 * base <= l_max {
            out.push(1.5 * base);
        }
        base *= 2.0;
    }
    out
}

/// Smallest `l` in the schedule for which the tent inequality holds.
pub fn search_tent_lemma(kernel: &Kernel, eps: f64, l_max: f64, dx: f64) -> Result<LemmaSearch, OpsError> {
    let mut conv = Convolver::new(kernel.clone(), dx)?;
    let mut tried = Vec::new();
    for l in l_schedule(l_max) {
        let (phi, _) = tent(l, dx);
        let ok = lemma_holds(&mut conv, &phi, eps);
        tried.push((l, ok));
        if ok {
            return Ok(LemmaSearch { smallest_l: Some(l), tried });
        }
    }
    Ok(LemmaSearch { smallest_l: None, tried })
}

/// Same search for the plateau-ramp profile with `l1 = l`, `l2 = 2l`.
pub fn search_plateau_lemma(kernel: &Kernel, eps: f64, l_max: f64, dx: f64) -> Result<LemmaSearch, OpsError> {
    let mut conv = Convolver::new(kernel.clone(), dx)?;
    let mut tried = Vec::new();
    for l in l_schedule(l_max) {
        let phi = plateau(l, 2.0 * l, dx);
        let ok = lemma_holds(&mut conv, &phi, eps);
        tried.push((l, ok));
        if ok {
            return Ok(LemmaSearch { smallest_l: Some(l), tried });
        }
    }
    Ok(LemmaSearch { smallest_l: None, tried })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform() -> Kernel {
        Kernel::new(KernelSpec::Uniform { radius: 1.0 }, 1e-8).unwrap()
    }

    fn laplace() -> Kernel {
        Kernel::new(KernelSpec::Laplace { scale: 1.0 }, 1e-8).unwrap()
    }

    #[test]
    fn constant_interior_is_one() {
        for k in [uniform(), laplace()] {
            let f = GridFunction::from_fn(0.1, -400, 801, 1, |_, _| 1.0).unwrap();
            let out = convolve(&k, &f, 0).unwrap();
            assert!((out[400] - 1.0).abs() < 1e-6, "{}", out[400]);
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let f = GridFunction::from_fn(0.1, -50, 101, 1, |_, _| 0.0).unwrap();
        assert!(convolve(&laplace(), &f, 0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mesh_too_coarse() {
        let f = GridFunction::from_fn(0.5, -5, 11, 1, |_, _| 1.0).unwrap();
        assert!(matches!(convolve(&uniform(), &f, 0), Err(OpsError::MeshTooCoarse { .. })));
    }

    // direct double loop over the lattice weights, independent of the engine
    fn oracle(kernel: &Kernel, dx: f64, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| kernel.lattice_weight(k as i64 - j as i64, dx) * f[j])
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fft_matches_direct_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kernel = Kernel::new(KernelSpec::Powerlaw { gamma: 1.5, core_width: 1.0 }, 1e-8).unwrap();
        let dx = 0.25;
        let f: Vec<f64> = (0..700).map(|_| rng.gen::<f64>()).collect();
        let mut conv = Convolver::new(kernel.clone(), dx).unwrap();
        assert!(conv.uses_fft(f.len()));
        let mut fft = vec![0.0; f.len()];
        conv.convolve_fft_into(&f, &mut fft);
        let mut direct = vec![0.0; f.len()];
        conv.convolve_direct_into(&f, &mut direct);
        let want = oracle(&kernel, dx, &f);
        for k in 0..f.len() {
            assert!((fft[k] - direct[k]).abs() < 1e-10);
            assert!((direct[k] - want[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_right_flux_is_quarter() {
        let h = 3.0;
        // f ≡ 1 up to and including the boundary nodes
        let f = GridFunction::from_fn(0.05, -60, 121, 1, |_, _| 1.0).unwrap();
        let flux = boundary_flux(&uniform(), &f, 0, Side::Right, -h, h).unwrap();
        assert!((flux - 0.25).abs() < 1e-12, "{flux}");
    }

    #[test]
    fn symmetric_fluxes_agree() {
        let f = GridFunction::from_fn(0.1, -29, 59, 1, |_, x| (1.0 - (x / 3.0).powi(2)).max(0.0)).unwrap();
        let left = boundary_flux(&laplace(), &f, 0, Side::Left, -2.95, 2.95).unwrap();
        let right = boundary_flux(&laplace(), &f, 0, Side::Right, -2.95, 2.95).unwrap();
        assert!((left - right).abs() < 1e-12);
        assert!(left > 0.0);
    }

    #[test]
    fn clipped_end_factors() {
        // boundary exactly one cell away: plain hat interpolation
        let (a, b) = end_factors(3, 0.1, 0.0, -0.1, 0.3);
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-12);
        // boundary on the node: half the cell mass
        let (a, _) = end_factors(3, 0.1, 0.0, 0.0, 0.3);
        assert!((a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lemma_searches_pass_within_budget() {
        for k in [uniform(), laplace()] {
            let t = search_tent_lemma(&k, 0.05, 200.0, 0.05).unwrap();
            assert!(t.smallest_l.is_some(), "{t:?}");
            let p = search_plateau_lemma(&k, 0.05, 200.0, 0.05).unwrap();
            assert!(p.smallest_l.is_some(), "{p:?}");
        }
    }
}
