//! Cooperative reaction terms `F`, the positive equilibrium `u*`, and sampled
//! checks of the structural hypotheses on `F`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Expr, ExprError};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ReactionError {
    #[error("state component {index} is negative ({value})")]
    OutOfCone { index: usize, value: f64 },
    #[error("state component {index} = {value} exceeds ceiling {ceiling}")]
    AboveCeiling { index: usize, value: f64, ceiling: f64 },
    #[error("no positive equilibrium: {0}")]
    NoPositiveRoot(String),
    #[error("invalid reaction model: {0}")]
    Invalid(String),
    #[error("expression for f{component}: {source}")]
    Expression {
        component: usize,
        #[source]
        source: ExprError,
    },
}

/// The concrete reaction term.
#[derive(Clone, Debug)]
pub enum Reaction {
    /// `f1 = -a u1 + c u2`, `f2 = -b u2 + αu1/(1+βu1)`.
    Cholera { a: f64, b: f64, c: f64, alpha: f64, beta: f64 },
    /// `f1 = a1(e1-u1)u2 - b1 u1`, `f2 = a2(e2-u2)u1 - b2 u2`.
    Wnv { a1: f64, a2: f64, b1: f64, b2: f64, e1: f64, e2: f64 },
    /// `f1 = -a u1 + αu2/(1+u2)`, `f2 = -b u2 + β ln(1+u1)`.
    Concave { a: f64, b: f64, alpha: f64, beta: f64 },
    /// One parsed expression per component; Jacobian by central differences.
    Custom { exprs: Vec<Expr> },
}

/// An `m`-component cooperative reaction with diffusion data.
#[derive(Clone, Debug)]
pub struct ReactionModel {
    m: usize,
    m0: usize,
    diffusion: Vec<f64>,
    reaction: Reaction,
    ceiling: Option<Vec<f64>>,
    params: BTreeMap<String, f64>,
    name: String,
    u_star: Result<Vec<f64>, ReactionError>,
}

fn param(params: &BTreeMap<String, f64>, key: &str) -> Result<f64, ReactionError> {
    let v = *params
        .get(key)
        .ok_or_else(|| ReactionError::Invalid(format!("missing parameter {key}")))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(ReactionError::Invalid(format!("parameter {key} = {v} must be positive")));
    }
    Ok(v)
}

impl ReactionModel {
    fn build(
        name: &str,
        m: usize,
        m0: usize,
        diffusion: Vec<f64>,
        reaction: Reaction,
        ceiling: Option<Vec<f64>>,
        params: BTreeMap<String, f64>,
        threshold: Option<String>,
    ) -> Result<Self, ReactionError> {
        if m == 0 {
            return Err(ReactionError::Invalid("m must be at least 1".into()));
        }
        if m0 == 0 || m0 > m {
            return Err(ReactionError::Invalid(format!("m0 = {m0} must satisfy 1 <= m0 <= m = {m}")));
        }
        if diffusion.len() != m {
            return Err(ReactionError::Invalid(format!(
                "expected {m} diffusion rates, got {}",
                diffusion.len()
            )));
        }
        for (i, &d) in diffusion.iter().enumerate() {
            let ok = if i < m0 { d > 0.0 && d.is_finite() } else { d == 0.0 };
            if !ok {
                return Err(ReactionError::Invalid(format!(
                    "diffusion rate d{} = {d} (need > 0 for diffusing, 0 otherwise)",
                    i + 1
                )));
            }
        }
        if let Some(c) = &ceiling {
            if c.len() != m || c.iter().any(|&v| !(v > 0.0)) {
                return Err(ReactionError::Invalid("ceiling must have m positive entries".into()));
            }
        }
        let mut model = ReactionModel {
            m,
            m0,
            diffusion,
            reaction,
            ceiling,
            params,
            name: name.to_string(),
            u_star: Err(ReactionError::NoPositiveRoot("not computed".into())),
        };
        model.u_star = match threshold {
            Some(why) => Err(ReactionError::NoPositiveRoot(why)),
            None => model.solve_equilibrium(),
        };
        Ok(model)
    }

    /// Cholera-type preset with `G(z) = αz/(1+βz)`.
    pub fn cholera(params: &BTreeMap<String, f64>, diffusion: Vec<f64>) -> Result<Self, ReactionError> {
        let (a, b, c) = (param(params, "a")?, param(params, "b")?, param(params, "c")?);
        let (alpha, beta) = (param(params, "alpha")?, param(params, "beta")?);
        let r0 = alpha * c / (a * b);
        let threshold = (r0 <= 1.0).then(|| format!("R0 = G'(0)c/(ab) = {r0} <= 1"));
        Self::build(
            "cholera",
            2,
            2,
            diffusion,
            Reaction::Cholera { a, b, c, alpha, beta },
            None,
            params.clone(),
            threshold,
        )
    }

    /// West Nile virus preset; ceiling `(e1, e2)`.
    pub fn wnv(params: &BTreeMap<String, f64>, diffusion: Vec<f64>) -> Result<Self, ReactionError> {
        let (a1, a2) = (param(params, "a1")?, param(params, "a2")?);
        let (b1, b2) = (param(params, "b1")?, param(params, "b2")?);
        let (e1, e2) = (param(params, "e1")?, param(params, "e2")?);
        let threshold = (a1 * a2 * e1 * e2 <= b1 * b2)
            .then(|| format!("a1 a2 e1 e2 = {} <= b1 b2 = {}", a1 * a2 * e1 * e2, b1 * b2));
        Self::build(
            "wnv",
            2,
            2,
            diffusion,
            Reaction::Wnv { a1, a2, b1, b2, e1, e2 },
            Some(vec![e1, e2]),
            params.clone(),
            threshold,
        )
    }

    /// Concave-nonlinearity preset with `H(z) = αz/(1+z)`, `G(z) = β ln(z+1)`.
    pub fn concave(params: &BTreeMap<String, f64>, diffusion: Vec<f64>) -> Result<Self, ReactionError> {
        let (a, b) = (param(params, "a")?, param(params, "b")?);
        let (alpha, beta) = (param(params, "alpha")?, param(params, "beta")?);
        let threshold = (alpha * beta <= a * b).then(|| format!("H'(0)G'(0)/(ab) = {} <= 1", alpha * beta / (a * b)));
        Self::build(
            "concave",
            2,
            2,
            diffusion,
            Reaction::Concave { a, b, alpha, beta },
            None,
            params.clone(),
            threshold,
        )
    }

    /// User-supplied reaction: one expression per component.
    pub fn custom(
        m: usize,
        m0: usize,
        sources: &[String],
        params: &BTreeMap<String, f64>,
        diffusion: Vec<f64>,
        ceiling: Option<Vec<f64>>,
    ) -> Result<Self, ReactionError> {
        if sources.len() != m {
            return Err(ReactionError::Invalid(format!("expected {m} expressions, got {}", sources.len())));
        }
        let exprs = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                expr::parse(s, params, m).map_err(|source| ReactionError::Expression {
                    component: i + 1,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::build(
            "custom",
            m,
            m0,
            diffusion,
            Reaction::Custom { exprs },
            ceiling,
            params.clone(),
            None,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    pub fn ceiling(&self) -> Option<&[f64]> {
        self.ceiling.as_deref()
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        !matches!(self.reaction, Reaction::Custom { .. })
    }

    /// Unchecked evaluation of `F(u)` into `out`. Hot path of the simulators.
    #[inline]
    pub fn rates_into(&self, u: &[f64], out: &mut [f64]) {
        match &self.reaction {
            Reaction::Cholera { a, b, c, alpha, beta } => {
                out[0] = -a * u[0] + c * u[1];
                out[1] = -b * u[1] + alpha * u[0] / (1.0 + beta * u[0]);
            }
            Reaction::Wnv { a1, a2, b1, b2, e1, e2 } => {
                out[0] = a1 * (e1 - u[0]) * u[1] - b1 * u[0];
                out[1] = a2 * (e2 - u[1]) * u[0] - b2 * u[1];
            }
            Reaction::Concave { a, b, alpha, beta } => {
                out[0] = -a * u[0] + alpha * u[1] / (1.0 + u[1]);
                out[1] = -b * u[1] + beta * u[0].ln_1p();
            }
            Reaction::Custom { exprs } => {
                for (o, e) in out.iter_mut().zip(exprs) {
                    *o = e.eval(u);
                }
            }
        }
    }

    fn rates(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.rates_into(u, &mut out);
        out
    }

    fn check_admissible(&self, u: &[f64]) -> Result<(), ReactionError> {
        if u.len() != self.m {
            return Err(ReactionError::Invalid(format!("state has {} components, expected {}", u.len(), self.m)));
        }
        for (index, &value) in u.iter().enumerate() {
            if value < 0.0 || value.is_nan() {
                return Err(ReactionError::OutOfCone { index, value });
            }
        }
        if let Some(c) = &self.ceiling {
            for (index, (&value, &ceiling)) in u.iter().zip(c).enumerate() {
                if value > ceiling {
                    return Err(ReactionError::AboveCeiling { index, value, ceiling });
                }
            }
        }
        Ok(())
    }

    /// `F(u)` for an admissible state `0 ⪯ u ⪯ û`.
    pub fn eval_f(&self, u: &[f64]) -> Result<Vec<f64>, ReactionError> {
        self.check_admissible(u)?;
        Ok(self.rates(u))
    }

    /// `∇F(u)` for an admissible state.
    pub fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>, ReactionError> {
        self.check_admissible(u)?;
        Ok(self.jacobian_unchecked(u))
    }

    /// Analytic for presets, central differences for custom models.
    pub fn jacobian_unchecked(&self, u: &[f64]) -> DMatrix<f64> {
        match &self.reaction {
            Reaction::Cholera { a, b, c, alpha, beta } => {
                let gp = alpha / (1.0 + beta * u[0]).powi(2);
                DMatrix::from_row_slice(2, 2, &[-a, *c, gp, -b])
            }
            Reaction::Wnv { a1, a2, b1, b2, e1, e2 } => DMatrix::from_row_slice(
                2,
                2,
                &[-a1 * u[1] - b1, a1 * (e1 - u[0]), a2 * (e2 - u[1]), -a2 * u[0] - b2],
            ),
            Reaction::Concave { a, b, alpha, beta } => DMatrix::from_row_slice(
                2,
                2,
                &[-a, alpha / (1.0 + u[1]).powi(2), beta / (1.0 + u[0]), -b],
            ),
            Reaction::Custom { .. } => self.jacobian_fd(u),
        }
    }

    /// Central-difference Jacobian with step `1e-6 · max(1, |u_j|)`.
    pub fn jacobian_fd(&self, u: &[f64]) -> DMatrix<f64> {
        let m = self.m;
        let mut jac = DMatrix::zeros(m, m);
        let mut up = u.to_vec();
        let mut fp = vec![0.0; m];
        let mut fm = vec![0.0; m];
        for j in 0..m {
            let h = 1e-6 * u[j].abs().max(1.0);
            up[j] = u[j] + h;
            self.rates_into(&up, &mut fp);
            up[j] = u[j] - h;
            self.rates_into(&up, &mut fm);
            up[j] = u[j];
            for i in 0..m {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    /// The cached positive equilibrium `u*`.
    pub fn positive_equilibrium(&self) -> Result<Vec<f64>, ReactionError> {
        self.u_star.clone()
    }

    /// `u*`, panicking if the model has none. For callers that validated already.
    pub fn u_star(&self) -> &[f64] {
        self.u_star.as_ref().expect("model without positive equilibrium")
    }

    fn solve_equilibrium(&self) -> Result<Vec<f64>, ReactionError> {
        let mut seeds: Vec<Vec<f64>> = Vec::new();
        if let Some(c) = &self.ceiling {
            seeds.push(c.iter().map(|v| 0.5 * v).collect());
        }
        for s in [0.1, 1.0, 10.0] {
            seeds.push(vec![s; self.m]);
        }
        for seed in &seeds {
            if let Some(root) = self.newton(seed, 50) {
                let scale = root.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
                let positive = root.iter().all(|&v| v > 1e-9 * scale);
                let below = self
                    .ceiling
                    .as_ref()
                    .map_or(true, |c| root.iter().zip(c).all(|(&v, &cv)| v < cv));
                if positive && below {
                    return Ok(root);
                }
            }
        }
        Err(ReactionError::NoPositiveRoot(format!(
            "Newton failed from all {} seeds",
            seeds.len()
        )))
    }

    /// Damped Newton iteration for `F(u) = 0`, kept in the closed positive cone.
    fn newton(&self, seed: &[f64], max_iter: usize) -> Option<Vec<f64>> {
        let m = self.m;
        let mut u = seed.to_vec();
        let mut f = self.rates(&u);
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for _ in 0..max_iter {
            let scale = norm(&u).max(1.0);
            if norm(&f) < 1e-14 * scale {
                return Some(u);
            }
            let jac = self.jacobian_unchecked(&u);
            let rhs = DVector::from_iterator(m, f.iter().map(|v| -v));
            let step = jac.lu().solve(&rhs)?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
                if trial.iter().all(|&v| v >= 0.0 && v.is_finite()) {
                    let ft = self.rates(&trial);
                    if ft.iter().all(|v| v.is_finite()) && norm(&ft) <= (1.0 - 1e-4 * t) * norm(&f) + 1e-15 * scale {
                        u = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                // full step if nothing better: lets the iteration escape flat regions
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| (a + s).max(0.0)).collect();
                let ft = self.rates(&trial);
                if norm(&ft) < norm(&f) {
                    u = trial;
                    f = ft;
                } else {
                    return None;
                }
            }
        }
        let scale = norm(&u).max(1.0);
        (norm(&f) < 1e-12 * scale).then_some(u)
    }

    /// Sampling box for assumption checks and Lipschitz estimates:
    /// `[0, û]` when bounded, `[0, 2u*]` otherwise.
    pub fn sampling_box(&self) -> Vec<f64> {
        match (&self.ceiling, &self.u_star) {
            (Some(c), _) => c.clone(),
            (None, Ok(us)) => us.iter().map(|v| 2.0 * v).collect(),
            (None, Err(_)) => vec![1.0; self.m],
        }
    }

    /// Sampled Lipschitz bound of `F` on the sampling box (max ∞-norm of `∇F`,
    /// times a 1.5 safety factor).
    pub fn lipschitz_estimate(&self) -> f64 {
        let top = self.sampling_box();
        let pts = stratified_samples(&top, 256, 0x5eed);
        let mut best: f64 = 0.0;
        let mut corner = vec![0.0; self.m];
        for mask in 0..(1usize << self.m.min(10)) {
            for (j, c) in corner.iter_mut().enumerate() {
                *c = if mask >> j & 1 == 1 { top[j] } else { 0.0 };
            }
            best = best.max(inf_norm(&self.jacobian_unchecked(&corner)));
        }
        for p in &pts {
            best = best.max(inf_norm(&self.jacobian_unchecked(p)));
        }
        1.5 * best
    }
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Latin-hypercube samples in the box `[0, top]`.
pub fn stratified_samples(top: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = top.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for &t in top {
        let mut strata: Vec<f64> = (0..n).map(|k| (k as f64 + rng.gen::<f64>()) / n as f64 * t).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            strata.swap(i, j);
        }
        cols.push(strata);
    }
    (0..n).map(|k| (0..m).map(|j| cols[j][k]).collect()).collect()
}

/// Perron root of a Metzler matrix via power iteration on `A + σI`.
pub fn principal_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let sigma = (0..n).map(|i| (-a[(i, i)]).max(0.0)).fold(0.0, f64::max) + 1.0;
    let shifted = a + DMatrix::identity(n, n) * sigma;
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut rho = 0.0;
    for _ in 0..10_000 {
        let w = &shifted * &v;
        let norm = w.iter().map(|x| x.abs()).sum::<f64>();
        if norm == 0.0 {
            return -sigma;
        }
        let next = w / norm;
        let diff = (&next - &v).iter().map(|x| x.abs()).fold(0.0, f64::max);
        rho = norm;
        v = next;
        if diff < 1e-15 {
            break;
        }
    }
    rho - sigma
}

/// True when the directed graph of nonzero off-diagonal entries is strongly connected.
pub fn is_irreducible(a: &DMatrix<f64>, tol: f64) -> bool {
    let n = a.nrows();
    if n == 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let entry = if forward { a[(i, j)] } else { a[(j, i)] };
                if i != j && entry.abs() > tol && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    NotChecked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub status: CheckStatus,
    pub witness: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub model: String,
    pub ceiling: Option<Vec<f64>>,
    pub u_star: Option<Vec<f64>>,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn status(&self, id: &str) -> Option<CheckStatus> {
        self.checks.iter().find(|c| c.id == id).map(|c| c.status)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.id.as_str())
            .collect()
    }
}

fn check(id: &str, status: CheckStatus, witness: Option<Vec<f64>>, detail: impl Into<String>) -> AssumptionCheck {
    AssumptionCheck {
        id: id.to_string(),
        status,
        witness,
        detail: detail.into(),
    }
}

/// Samples the static hypotheses on `F`. The dynamical ones (ODE and Cauchy
/// attractivity) are reported as not checked.
pub fn verify_assumptions(model: &ReactionModel, n_samples: usize, seed: u64) -> AssumptionReport {
    let n = n_samples.max(100);
    let m = model.m;
    let top = model.sampling_box();
    let samples = stratified_samples(&top, n, seed);
    let mut checks = Vec::new();
    let u_star = model.positive_equilibrium().ok();
    let scale = u_star
        .as_ref()
        .map(|u| u.iter().fold(1.0f64, |a, &b| a.max(b)))
        .unwrap_or(1.0);

    // (f1)(i): F = 0 has exactly the roots 0 and u* in the sampled region
    match &u_star {
        None => checks.push(check("f1(i)", CheckStatus::Fail, None, "no positive equilibrium")),
        Some(us) => {
            let mut extra = None;
            for s in samples.iter().step_by((n / 50).max(1)) {
                if let Some(r) = model.newton(s, 60) {
                    let near = |t: &[f64]| r.iter().zip(t).all(|(a, b)| (a - b).abs() <= 1e-6 * scale);
                    if !near(us) && !near(&vec![0.0; m]) && r.iter().all(|&v| v >= 0.0) {
                        extra = Some(r);
                        break;
                    }
                }
            }
            match extra {
                Some(r) => checks.push(check("f1(i)", CheckStatus::Fail, Some(r), "third nonnegative root")),
                None => checks.push(check("f1(i)", CheckStatus::Pass, None, "only 0 and u* found by multi-start Newton")),
            }
        }
    }

    // (f1)(ii): cooperative on [0, û]
    let mut witness = None;
    'outer: for s in &samples {
        let jac = model.jacobian_unchecked(s);
        for i in 0..m {
            for j in 0..m {
                if i != j && jac[(i, j)] < -1e-12 * scale {
                    witness = Some(s.clone());
                    break 'outer;
                }
            }
        }
    }
    checks.push(match witness {
        Some(w) => check("f1(ii)", CheckStatus::Fail, Some(w), "negative off-diagonal partial derivative"),
        None => check("f1(ii)", CheckStatus::Pass, None, "off-diagonal Jacobian nonnegative at all samples"),
    });

    // (f1)(iii): ∇F(0) irreducible with positive principal eigenvalue
    let zero = vec![0.0; m];
    let j0 = model.jacobian_unchecked(&zero);
    let irreducible = is_irreducible(&j0, 1e-14);
    let s0 = principal_eigenvalue(&j0);
    checks.push(if irreducible && s0 > 0.0 {
        check("f1(iii)", CheckStatus::Pass, None, format!("principal eigenvalue {s0:.6e}"))
    } else {
        check(
            "f1(iii)",
            CheckStatus::Fail,
            Some(zero.clone()),
            format!("irreducible = {irreducible}, principal eigenvalue {s0:.6e}"),
        )
    });

    // (f1)(iv): non-diffusing components driven by diffusing ones
    if model.m0 == m {
        checks.push(check("f1(iv)", CheckStatus::Pass, None, "vacuous: all components diffuse"));
    } else {
        let box_star = u_star.clone().unwrap_or_else(|| top.clone());
        let pts = stratified_samples(&box_star, n, seed ^ 0x1f);
        let mut witness = None;
        'iv: for s in &pts {
            let jac = model.jacobian_unchecked(s);
            for i in model.m0..m {
                for j in 0..model.m0 {
                    if jac[(i, j)] <= 0.0 {
                        witness = Some(s.clone());
                        break 'iv;
                    }
                }
            }
        }
        checks.push(match witness {
            Some(w) => check("f1(iv)", CheckStatus::Fail, Some(w), "∂_j f_i <= 0 for j <= m0 < i"),
            None => check("f1(iv)", CheckStatus::Pass, None, "∂_j f_i > 0 for j <= m0 < i at all samples"),
        });
    }

    // (f2): subhomogeneity
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf2);
    let mut witness = None;
    for (idx, s) in samples.iter().enumerate() {
        let k = (idx as f64 + rng.gen::<f64>()) / n as f64;
        let ku: Vec<f64> = s.iter().map(|v| k * v).collect();
        let fk = model.rates(&ku);
        let f = model.rates(s);
        let tol = 1e-10 * f.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        if fk.iter().zip(&f).any(|(a, b)| *a < k * b - tol) {
            let mut w = s.clone();
            w.push(k);
            witness = Some(w);
            break;
        }
    }
    checks.push(match witness {
        Some(w) => check("f2", CheckStatus::Fail, Some(w), "F(ku) < kF(u); witness is (u, k)"),
        None => check("f2", CheckStatus::Pass, None, "F(ku) >= kF(u) at all sampled (k, u)"),
    });

    // (f3): ∇F(u*) invertible; row sums of ∇F(u*)u* negative, or F linear near u*
    match &u_star {
        None => checks.push(check("f3", CheckStatus::Fail, None, "no positive equilibrium")),
        Some(us) => {
            let js = model.jacobian_unchecked(us);
            let det = js.clone().lu().determinant();
            let jscale = inf_norm(&js).max(1e-300);
            let mut notes = Vec::new();
            let mut ok = det.abs() > 1e-12 * jscale.powi(m as i32);
            if !ok {
                notes.push(format!("singular: det = {det:.3e}"));
            }
            let tol = 1e-10 * jscale * scale;
            let eps0 = 1e-2 * us.iter().cloned().fold(f64::INFINITY, f64::min);
            let fstar = model.rates(us);
            for i in 0..m {
                let row: f64 = (0..m).map(|j| js[(i, j)] * us[j]).sum();
                if row < -tol {
                    continue;
                }
                if row > tol {
                    ok = false;
                    notes.push(format!("row {}: sum = {row:.3e} > 0", i + 1));
                    continue;
                }
                // linear branch: compare f_i with its tangent plane on [u* - ε0·1, u*]
                let lower: Vec<f64> = us.iter().map(|v| v - eps0).collect();
                let pts = stratified_samples(&vec![eps0; m], 64, seed ^ (i as u64 + 3));
                let linear = pts.iter().all(|p| {
                    let u: Vec<f64> = lower.iter().zip(p).map(|(a, b)| a + b).collect();
                    let lin: f64 = fstar[i] + (0..m).map(|j| js[(i, j)] * (u[j] - us[j])).sum::<f64>();
                    (model.rates(&u)[i] - lin).abs() <= 1e-9 * scale.max(jscale * eps0)
                });
                if linear {
                    notes.push(format!("row {}: sum = 0, f{} linear near u* (sampled)", i + 1, i + 1));
                } else {
                    ok = false;
                    notes.push(format!("row {}: sum = 0 but f{} not linear near u*", i + 1, i + 1));
                }
            }
            let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
            let witness = (!ok).then(|| us.clone());
            checks.push(check("f3", status, witness, notes.join("; ")));
        }
    }

    checks.push(check("f4", CheckStatus::NotChecked, None, "dynamical; probed by simulation"));
    checks.push(check("f5", CheckStatus::NotChecked, None, "dynamical; probed by simulation"));

    // (f6)
    match &u_star {
        None => checks.push(check("f6", CheckStatus::Fail, None, "no positive equilibrium")),
        Some(us) => {
            let tol = 1e-12 * scale;
            let js = model.jacobian_unchecked(us);
            let mut fails = Vec::new();
            let mut witness = None;
            for i in 0..m {
                let at0: f64 = (0..m).map(|j| j0[(i, j)] * us[j]).sum();
                let at_star: f64 = (0..m).map(|j| js[(i, j)] * us[j]).sum();
                if at0 <= tol {
                    fails.push(format!("row {}: ∇F(0)u* = {at0:.3e} not > 0", i + 1));
                    witness.get_or_insert_with(|| zero.clone());
                }
                if at_star >= -tol {
                    fails.push(format!("row {}: ∇F(u*)u* = {at_star:.3e} not < 0", i + 1));
                    witness.get_or_insert_with(|| us.clone());
                }
            }
            for k in 0..n {
                let eta = (k as f64 + 0.5) / n as f64;
                let pt: Vec<f64> = us.iter().map(|v| eta * v).collect();
                let f = model.rates(&pt);
                if let Some(i) = f.iter().position(|&v| v <= tol * eta) {
                    fails.push(format!("f{}(η u*) <= 0 at η = {eta:.4}", i + 1));
                    witness.get_or_insert(pt);
                    break;
                }
            }
            checks.push(if fails.is_empty() {
                check("f6", CheckStatus::Pass, None, "all sampled conditions hold")
            } else {
                check("f6", CheckStatus::Fail, witness, fails.join("; "))
            });
        }
    }

    AssumptionReport {
        model: model.name.clone(),
        ceiling: model.ceiling.clone(),
        u_star,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn wnv(b: f64) -> ReactionModel {
        ReactionModel::wnv(
            &p(&[("a1", 1.0), ("a2", 1.0), ("b1", b), ("b2", b), ("e1", 1.0), ("e2", 1.0)]),
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    fn cholera() -> ReactionModel {
        ReactionModel::cholera(
            &p(&[("a", 1.0), ("b", 1.0), ("c", 1.0), ("alpha", 2.0), ("beta", 3.0)]),
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn zero_is_equilibrium() {
        for model in [wnv(0.5), cholera()] {
            assert_eq!(model.eval_f(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn cone_and_ceiling_errors() {
        let m = wnv(0.5);
        assert!(matches!(m.eval_f(&[-0.1, 0.2]), Err(ReactionError::OutOfCone { index: 0, .. })));
        assert!(matches!(m.eval_f(&[0.1, 1.2]), Err(ReactionError::AboveCeiling { index: 1, .. })));
        assert!(cholera().eval_f(&[10.0, 10.0]).is_ok());
    }

    #[test]
    fn equilibria() {
        let us = wnv(0.5).positive_equilibrium().unwrap();
        assert!((us[0] - 0.5).abs() < 1e-12 && (us[1] - 0.5).abs() < 1e-12);
        let us = cholera().positive_equilibrium().unwrap();
        assert!((us[0] - 1.0 / 3.0).abs() < 1e-12 && (us[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(wnv(1.0).positive_equilibrium(), Err(ReactionError::NoPositiveRoot(_))));
    }

    #[test]
    fn m0_validation() {
        let err = ReactionModel::custom(
            2,
            3,
            &["-u1".into(), "-u2".into()],
            &BTreeMap::new(),
            vec![1.0, 1.0],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ReactionError::Invalid(_)));
    }

    #[test]
    fn jacobians_at_zero() {
        let j = cholera().jacobian(&[0.0, 0.0]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -1.0]));
        let j = wnv(0.5).jacobian(&[0.0, 0.0]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 1.0, -0.5]));
    }

    #[test]
    fn principal_eigenvalue_of_symmetric_metzler() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 1.0, -0.5]);
        assert!((principal_eigenvalue(&a) - 0.5).abs() < 1e-12);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((principal_eigenvalue(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn irreducibility() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        assert!(!is_irreducible(&a, 0.0));
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -1.0]);
        assert!(is_irreducible(&b, 0.0));
    }

    #[test]
    fn non_cooperative_model_fails_f1ii_with_witness() {
        let model = ReactionModel::custom(
            2,
            2,
            &["u1*(1-u1) - 0.5*u1*u2 + 0.1*u2".into(), "u1 - u2".into()],
            &BTreeMap::new(),
            vec![1.0, 1.0],
            Some(vec![2.0, 2.0]),
        )
        .unwrap();
        let report = verify_assumptions(&model, 200, 7);
        let c = report.checks.iter().find(|c| c.id == "f1(ii)").unwrap();
        assert_eq!(c.status, CheckStatus::Fail);
        let w = c.witness.as_ref().unwrap();
        let j = model.jacobian_unchecked(w);
        assert!(j[(0, 1)] < 0.0);
    }

    fn static_failures(model: &ReactionModel) -> Vec<String> {
        verify_assumptions(model, 2048, 11)
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.id.clone())
            .collect()
    }

    #[test]
    fn wnv_passes_static_checks() {
        let report = verify_assumptions(&wnv(0.5), 2048, 11);
        for c in &report.checks {
            match c.id.as_str() {
                "f4" | "f5" => assert_eq!(c.status, CheckStatus::NotChecked),
                _ => assert_eq!(c.status, CheckStatus::Pass, "{}: {}", c.id, c.detail),
            }
        }
        assert_eq!(report.ceiling, Some(vec![1.0, 1.0]));
    }

    #[test]
    fn cholera_fails_only_f6() {
        assert_eq!(static_failures(&cholera()), vec!["f6".to_string()]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn wnv_is_subhomogeneous(k in 0.0f64..1.0, u1 in 0.0f64..1.0, u2 in 0.0f64..1.0, b in 0.2f64..0.9) {
                let m = wnv(b);
                let fu = m.eval_f(&[u1, u2]).unwrap();
                let fku = m.eval_f(&[k * u1, k * u2]).unwrap();
                for i in 0..2 {
                    prop_assert!(fku[i] >= k * fu[i] - 1e-12);
                }
            }

            #[test]
            fn analytic_jacobian_matches_differences(u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
                for m in [wnv(0.5), cholera()] {
                    let a = m.jacobian_unchecked(&[u1, u2]);
                    let f = m.jacobian_fd(&[u1, u2]);
                    prop_assert!((a - f).abs().max() < 1e-6);
                }
            }

            #[test]
            fn cooperative_off_diagonal(u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
                for m in [wnv(0.5), cholera()] {
                    let j = m.jacobian_unchecked(&[u1, u2]);
                    prop_assert!(j[(0, 1)] >= 0.0 && j[(1, 0)] >= 0.0);
                }
            }
        }
    }
}
