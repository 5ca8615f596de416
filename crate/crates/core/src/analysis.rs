//! Growth-law regression of front trajectories and ordering checks between
//! trajectory pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fb_sim::FrontSeries;
use crate::stats::{fit_line, LineFit};

/// Minimum number of samples inside a fit window.
pub const MIN_SAMPLES: usize = 20;
/// r² differences below this make model selection ambiguous.
pub const TIE_TOL: f64 = 1e-4;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("insufficient data: {got} samples in window, need {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthLaw {
    Linear,
    Tlogt,
    Power,
}

impl GrowthLaw {
    pub const ALL: [GrowthLaw; 3] = [GrowthLaw::Linear, GrowthLaw::Tlogt, GrowthLaw::Power];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    /// Slope against `t` or `t ln t`; the prefactor `e^intercept` for power.
    pub coefficient: f64,
    /// Exponent `p` of the power law.
    pub exponent: Option<f64>,
    pub intercept: f64,
    pub coefficient_stderr: f64,
    pub exponent_stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: GrowthLaw,
    pub params: FitParams,
    /// r² of the fitted curve against the raw trajectory on the window. For
    /// the power law this is evaluated in the original (not log) coordinates
    /// so the three laws are comparable.
    pub r_squared: f64,
    /// r² of the regression in its own coordinates (log-log for power).
    pub r_squared_regression: f64,
    pub window: (f64, f64),
    pub n: usize,
}

impl FitReport {
    pub fn predict(&self, t: f64) -> f64 {
        let p = &self.params;
        match self.model {
            GrowthLaw::Linear => p.coefficient * t + p.intercept,
            GrowthLaw::Tlogt => p.coefficient * t * t.ln() + p.intercept,
            GrowthLaw::Power => p.coefficient * t.powf(p.exponent.unwrap_or(1.0)),
        }
    }
}

/// Default tail window `[t_end/2, t_end]`.
pub fn default_window(ts: &[f64]) -> (f64, f64) {
    let t_end = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0.5 * t_end, t_end)
}

/// Fits `x(t)` to one growth law on `window` (default: final half).
pub fn fit_trajectory(ts: &[f64], xs: &[f64], law: GrowthLaw, window: Option<(f64, f64)>) -> Result<FitReport, AnalysisError> {
    let window = window.unwrap_or_else(|| default_window(ts));
    let needs_positive = law != GrowthLaw::Linear;
    let (wt, wx): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(xs)
        .filter(|(&t, &x)| t >= window.0 && t <= window.1 && (!needs_positive || (t > 1.0 && x > 0.0)))
        .map(|(&t, &x)| (t, x))
        .unzip();
    if wt.len() < MIN_SAMPLES {
        return Err(AnalysisError::InsufficientData {
            got: wt.len(),
            need: MIN_SAMPLES,
        });
    }
    let insufficient = || AnalysisError::InsufficientData {
        got: wt.len(),
        need: MIN_SAMPLES,
    };
    let (params, reg): (FitParams, LineFit) = match law {
        GrowthLaw::Linear => {
            let f = fit_line(&wt, &wx).ok_or_else(insufficient)?;
            (
                FitParams {
                    coefficient: f.slope,
                    exponent: None,
                    intercept: f.intercept,
                    coefficient_stderr: f.slope_stderr,
                    exponent_stderr: None,
                },
                f,
            )
        }
        GrowthLaw::Tlogt => {
            let reg: Vec<f64> = wt.iter().map(|t| t * t.ln()).collect();
            let f = fit_line(&reg, &wx).ok_or_else(insufficient)?;
            (
                FitParams {
                    coefficient: f.slope,
                    exponent: None,
                    intercept: f.intercept,
                    coefficient_stderr: f.slope_stderr,
                    exponent_stderr: None,
                },
                f,
            )
        }
        GrowthLaw::Power => {
            let lt: Vec<f64> = wt.iter().map(|t| t.ln()).collect();
            let lx: Vec<f64> = wx.iter().map(|x| x.ln()).collect();
            let f = fit_line(&lt, &lx).ok_or_else(insufficient)?;
            let coefficient = f.intercept.exp();
            (
                FitParams {
                    coefficient,
                    exponent: Some(f.slope),
                    intercept: f.intercept,
                    coefficient_stderr: coefficient * f.intercept_stderr,
                    exponent_stderr: Some(f.slope_stderr),
                },
                f,
            )
        }
    };
    let mut report = FitReport {
        model: law,
        params,
        r_squared: reg.r_squared,
        r_squared_regression: reg.r_squared,
        window,
        n: wt.len(),
    };
    if law == GrowthLaw::Power {
        report.r_squared = raw_r_squared(&wt, &wx, |t| report.predict(t));
    }
    Ok(report)
}

fn raw_r_squared(ts: &[f64], xs: &[f64], pred: impl Fn(f64) -> f64) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sst: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let sse: f64 = ts.iter().zip(xs).map(|(&t, &x)| (x - pred(t)).powi(2)).sum();
    if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Fits the right boundary `h(t)` of a front series.
pub fn fit_front(series: &FrontSeries, law: GrowthLaw, window: Option<(f64, f64)>) -> Result<FitReport, AnalysisError> {
    fit_trajectory(&series.times(), &series.h(), law, window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSelection {
    pub best: GrowthLaw,
    pub ambiguous: bool,
    pub fits: Vec<FitReport>,
}

impl GrowthSelection {
    pub fn fit(&self, law: GrowthLaw) -> &FitReport {
        self.fits.iter().find(|f| f.model == law).expect("all laws fitted")
    }

    pub fn best_fit(&self) -> &FitReport {
        self.fit(self.best)
    }
}

/// Fits all three laws on the tail window and keeps the highest r².
pub fn best_growth_law_of(ts: &[f64], xs: &[f64], window: Option<(f64, f64)>) -> Result<GrowthSelection, AnalysisError> {
    let fits = GrowthLaw::ALL
        .iter()
        .map(|&law| fit_trajectory(ts, xs, law, window))
        .collect::<Result<Vec<_>, _>>()?;
    let mut order: Vec<&FitReport> = fits.iter().collect();
    order.sort_by(|a, b| b.r_squared.total_cmp(&a.r_squared));
    let best = order[0].model;
    let ambiguous = order[0].r_squared - order[1].r_squared < TIE_TOL;
    Ok(GrowthSelection { best, ambiguous, fits })
}

pub fn best_growth_law(series: &FrontSeries) -> Result<GrowthSelection, AnalysisError> {
    best_growth_law_of(&series.times(), &series.h(), None)
}

/// Level-set speed: slope of `x(t)` over the tail window.
pub fn tail_slope(ts: &[f64], xs: &[f64], window: Option<(f64, f64)>) -> Result<f64, AnalysisError> {
    Ok(fit_trajectory(ts, xs, GrowthLaw::Linear, window)?.params.coefficient)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ViolationKind {
    RightBoundary,
    LeftBoundary,
    Component { index: usize, x: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
    pub a: f64,
    pub b: f64,
}

/// Result of checking `a ⪯ b`: `h_a ≤ h_b`, `g_a ≥ g_b`, `u_a ⪯ u_b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub ordered: bool,
    pub equal: bool,
    pub first_violation: Option<Violation>,
    pub samples_checked: usize,
    pub nodes_checked: usize,
}

/// Checks that trajectory `a` lies below `b` at every common sample and snapshot.
pub fn compare_orderings(a: &FrontSeries, b: &FrontSeries) -> Result<OrderReport, AnalysisError> {
    if a.samples.len() != b.samples.len() {
        return Err(AnalysisError::GridMismatch(format!(
            "{} vs {} samples",
            a.samples.len(),
            b.samples.len()
        )));
    }
    if a.snapshots.len() != b.snapshots.len() {
        return Err(AnalysisError::GridMismatch(format!(
            "{} vs {} snapshots",
            a.snapshots.len(),
            b.snapshots.len()
        )));
    }
    let mut first_violation = None;
    let mut equal = true;
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        if sa.t != sb.t {
            return Err(AnalysisError::GridMismatch(format!("sample times {} vs {}", sa.t, sb.t)));
        }
        equal &= sa.h == sb.h && sa.g == sb.g;
        if first_violation.is_none() {
            if sa.h > sb.h {
                first_violation = Some(Violation { t: sa.t, kind: ViolationKind::RightBoundary, a: sa.h, b: sb.h });
            } else if sa.g < sb.g {
                first_violation = Some(Violation { t: sa.t, kind: ViolationKind::LeftBoundary, a: sa.g, b: sb.g });
            }
        }
    }
    let mut nodes = 0;
    for ((ta, ua), (tb, ub)) in a.snapshots.iter().zip(&b.snapshots) {
        if ta != tb {
            return Err(AnalysisError::GridMismatch(format!("snapshot times {ta} vs {tb}")));
        }
        if ua.dx() != ub.dx() || ua.m() != ub.m() {
            return Err(AnalysisError::GridMismatch("different lattices".into()));
        }
        let lo = ua.start().min(ub.start());
        let hi = (ua.start() + ua.len() as i64).max(ub.start() + ub.len() as i64);
        for k in lo..hi {
            for i in 0..ua.m() {
                let (va, vb) = (ua.at_index(i, k), ub.at_index(i, k));
                nodes += 1;
                equal &= va == vb;
                if va > vb && first_violation.is_none() {
                    first_violation = Some(Violation {
                        t: *ta,
                        kind: ViolationKind::Component { index: i, x: k as f64 * ua.dx() },
                        a: va,
                        b: vb,
                    });
                }
            }
        }
    }
    Ok(OrderReport {
        ordered: first_violation.is_none(),
        equal,
        first_violation,
        samples_checked: a.samples.len(),
        nodes_checked: nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t0: f64, t1: f64) -> Vec<f64> {
        (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_linear() {
        let t = grid(100, 1.0, 100.0);
        let h: Vec<f64> = t.iter().map(|t| 2.0 * t).collect();
        let f = fit_trajectory(&t, &h, GrowthLaw::Linear, None).unwrap();
        assert!((f.params.coefficient - 2.0).abs() < 1e-6);
        assert!(f.r_squared > 0.999999);
        assert_eq!(best_growth_law_of(&t, &h, None).unwrap().best, GrowthLaw::Linear);
    }

    #[test]
    fn exact_tlogt() {
        let t = grid(100, 2.0, 100.0);
        let h: Vec<f64> = t.iter().map(|t| 3.0 * t * t.ln()).collect();
        let f = fit_trajectory(&t, &h, GrowthLaw::Tlogt, None).unwrap();
        assert!((f.params.coefficient - 3.0).abs() < 1e-4);
    }

    #[test]
    fn exact_power() {
        let t = grid(100, 2.0, 100.0);
        let h: Vec<f64> = t.iter().map(|t| t * t).collect();
        let f = fit_trajectory(&t, &h, GrowthLaw::Power, None).unwrap();
        assert!((f.params.exponent.unwrap() - 2.0).abs() < 1e-3);
        assert_eq!(best_growth_law_of(&t, &h, None).unwrap().best, GrowthLaw::Power);
    }

    #[test]
    fn too_few_samples() {
        let t = grid(30, 1.0, 10.0);
        assert!(matches!(
            fit_trajectory(&t, &t, GrowthLaw::Linear, None),
            Err(AnalysisError::InsufficientData { .. })
        ));
    }
}
