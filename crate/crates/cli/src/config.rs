//! Scenario files: JSON schema, defaults, and translation into core configs.
//! Every rejection carries a JSON pointer to the offending field.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use nlfb_core::cauchy_sim::{CauchyConfig, LevelSpec};
use nlfb_core::fb_sim::{stability_bound, FBConfig, InitialProfile, Thresholds, TimeScheme};
use nlfb_core::kernels::{Kernel, KernelSpec};
use nlfb_core::nonlocal_ops::check_mesh;
use nlfb_core::reactions::{ReactionError, ReactionModel};
use nlfb_core::semiwave::{CStarParams, SolverParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{pointer}: {message}")]
    Invalid { pointer: String, message: String },
}

impl ConfigError {
    pub fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// JSON pointer of the offending field ("" for the document root).
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { pointer, .. } => Some(pointer),
            ConfigError::Io { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Wnv,
    Cholera,
    Concave,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub dx: f64,
    /// Defaults to half the stability bound.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub sample_stride: usize,
    pub scheme: TimeScheme,
    /// Truncation half-width for Cauchy runs.
    pub max_half_width: f64,
    pub edge_tol: Option<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            dx: 0.25,
            dt: None,
            t_end: 100.0,
            snapshot_times: Vec::new(),
            sample_stride: 1,
            scheme: TimeScheme::Euler,
            max_half_width: 5000.0,
            edge_tol: None,
        }
    }
}

/// Level to track in Cauchy runs; `i` counts components from 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelEntry {
    pub i: usize,
    pub lambda: f64,
}

/// Either one value for every diffusing component or one per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuValue {
    Uniform(f64),
    PerComponent(Vec<f64>),
}

impl MuValue {
    pub fn expand(&self, m0: usize) -> Vec<f64> {
        match self {
            MuValue::Uniform(v) => vec![*v; m0],
            MuValue::PerComponent(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedsSection {
    /// Truncated half-line length for the semi-wave solve.
    pub l: f64,
    pub tol_c: f64,
    pub mu_sweep: Vec<MuValue>,
    pub cstar: bool,
    pub cstar_params: CStarParams,
    pub solver: SolverParams,
}

impl Default for SpeedsSection {
    fn default() -> Self {
        SpeedsSection {
            l: 50.0,
            tol_c: 1e-4,
            mu_sweep: Vec::new(),
            cstar: true,
            cstar_params: CStarParams::default(),
            solver: SolverParams::default(),
        }
    }
}

fn default_eps_tail() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub model: ModelName,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Custom models only.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub m0: Option<usize>,
    #[serde(default)]
    pub f: Option<Vec<String>>,
    #[serde(default)]
    pub ceiling: Option<Vec<f64>>,
    /// Defaults to 1 for diffusing components, 0 otherwise.
    #[serde(default)]
    pub diffusion: Option<Vec<f64>>,
    pub kernels: Vec<KernelSpec>,
    #[serde(default = "default_eps_tail")]
    pub eps_tail: f64,
    #[serde(default)]
    pub mu: Option<MuValue>,
    #[serde(default)]
    pub h0: Option<f64>,
    #[serde(default)]
    pub initial: InitialProfile,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub levels: Vec<LevelEntry>,
    #[serde(default)]
    pub speeds: SpeedsSection,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s.push_str(&format!("/{index}")),
            Segment::Map { key } => s.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => s.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    s
}

/// Deserializes any config type, reporting the failing field as a JSON pointer.
pub fn from_value<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let pointer = pointer_of(e.path());
        ConfigError::at(pointer, e.into_inner().to_string())
    })
}

pub fn parse_json(text: &str) -> Result<Value, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::at("", format!("malformed JSON: {e}")))
}

pub fn read_value(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_json(&text)
}

/// Recursively overlays `patch` onto `base` (objects merge, everything else replaces).
pub fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

impl Scenario {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        from_value(parse_json(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        from_value(read_value(path)?)
    }

    fn reaction_error(&self, e: ReactionError) -> ConfigError {
        match e {
            ReactionError::Expression { component, source } => {
                ConfigError::at(format!("/f/{}", component - 1), source.to_string())
            }
            ReactionError::NoPositiveRoot(why) => ConfigError::at("/params", format!("no positive equilibrium: {why}")),
            other => ConfigError::at("/params", other.to_string()),
        }
    }

    /// `(m, m0)` after validating the custom-model fields.
    pub fn dims(&self) -> Result<(usize, usize), ConfigError> {
        match self.model {
            ModelName::Custom => {
                let m = self.m.ok_or_else(|| ConfigError::at("/m", "custom models need m"))?;
                let m0 = self.m0.ok_or_else(|| ConfigError::at("/m0", "custom models need m0"))?;
                if m == 0 {
                    return Err(ConfigError::at("/m", "m must be at least 1"));
                }
                if m0 == 0 || m0 > m {
                    return Err(ConfigError::at("/m0", format!("m0 = {m0} must lie in 1..={m}")));
                }
                Ok((m, m0))
            }
            _ => {
                for (field, present) in [
                    ("/m", self.m.is_some()),
                    ("/m0", self.m0.is_some()),
                    ("/f", self.f.is_some()),
                    ("/ceiling", self.ceiling.is_some()),
                ] {
                    if present {
                        return Err(ConfigError::at(field, "only custom models accept this field"));
                    }
                }
                Ok((2, 2))
            }
        }
    }

    pub fn build_model(&self) -> Result<ReactionModel, ConfigError> {
        let (m, m0) = self.dims()?;
        let diffusion = match &self.diffusion {
            Some(d) => {
                if d.len() != m {
                    return Err(ConfigError::at("/diffusion", format!("expected {m} entries, got {}", d.len())));
                }
                d.clone()
            }
            None => (0..m).map(|i| if i < m0 { 1.0 } else { 0.0 }).collect(),
        };
        let model = match self.model {
            ModelName::Wnv => ReactionModel::wnv(&self.params, diffusion),
            ModelName::Cholera => ReactionModel::cholera(&self.params, diffusion),
            ModelName::Concave => ReactionModel::concave(&self.params, diffusion),
            ModelName::Custom => {
                let f = self.f.as_ref().ok_or_else(|| ConfigError::at("/f", "custom models need f"))?;
                if f.len() != m {
                    return Err(ConfigError::at("/f", format!("expected {m} expressions, got {}", f.len())));
                }
                ReactionModel::custom(m, m0, f, &self.params, diffusion, self.ceiling.clone())
            }
        }
        .map_err(|e| match e {
            ReactionError::Invalid(msg) if msg.contains("diffusion") => ConfigError::at("/diffusion", msg),
            ReactionError::Invalid(msg) if msg.contains("ceiling") => ConfigError::at("/ceiling", msg),
            other => self.reaction_error(other),
        })?;
        model.positive_equilibrium().map_err(|e| self.reaction_error(e))?;
        Ok(model)
    }

    pub fn build_kernels(&self, m0: usize) -> Result<Vec<Kernel>, ConfigError> {
        if self.kernels.len() != m0 {
            return Err(ConfigError::at(
                "/kernels",
                format!("expected {m0} kernels (one per diffusing component), got {}", self.kernels.len()),
            ));
        }
        let kernels = self
            .kernels
            .iter()
            .enumerate()
            .map(|(i, s)| Kernel::new(s.clone(), self.eps_tail).map_err(|e| ConfigError::at(format!("/kernels/{i}"), e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(kernels)
    }

    pub fn mu(&self, m0: usize) -> Result<Vec<f64>, ConfigError> {
        let mu = self.mu.as_ref().ok_or_else(|| ConfigError::at("/mu", "mu is required"))?.expand(m0);
        check_mu(&mu, m0, "/mu")?;
        Ok(mu)
    }

    fn h0(&self) -> Result<f64, ConfigError> {
        let h0 = self.h0.ok_or_else(|| ConfigError::at("/h0", "h0 is required"))?;
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(ConfigError::at("/h0", format!("h0 = {h0} must be positive")));
        }
        Ok(h0)
    }

    fn check_numerics(&self, model: &ReactionModel, kernels: &[Kernel]) -> Result<f64, ConfigError> {
        let n = &self.numerics;
        for k in kernels {
            check_mesh(k, n.dx).map_err(|e| ConfigError::at("/numerics/dx", e.to_string()))?;
        }
        if !(n.t_end >= 0.0 && n.t_end.is_finite()) {
            return Err(ConfigError::at("/numerics/t_end", "t_end must be finite and nonnegative"));
        }
        if n.sample_stride == 0 {
            return Err(ConfigError::at("/numerics/sample_stride", "must be at least 1"));
        }
        let bound = stability_bound(model);
        let dt = n.dt.unwrap_or(0.5 * bound);
        if !(dt > 0.0) {
            return Err(ConfigError::at("/numerics/dt", "dt must be positive"));
        }
        if dt > bound {
            return Err(ConfigError::at(
                "/numerics/dt",
                format!("dt = {dt} exceeds the stability bound {bound}"),
            ));
        }
        Ok(dt)
    }

    fn check_initial(&self, model: &ReactionModel) -> Result<(), ConfigError> {
        if let Some(a) = &self.initial.amplitudes {
            if a.len() != model.m() {
                return Err(ConfigError::at("/initial/amplitudes", format!("expected {} entries", model.m())));
            }
            for (i, &v) in a.iter().enumerate() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ConfigError::at(format!("/initial/amplitudes/{i}"), "must be positive"));
                }
                if let Some(c) = model.ceiling() {
                    if v > c[i] {
                        return Err(ConfigError::at(format!("/initial/amplitudes/{i}"), format!("exceeds the ceiling {}", c[i])));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn fb_config(&self) -> Result<FBConfig, ConfigError> {
        let model = self.build_model()?;
        let kernels = self.build_kernels(model.m0())?;
        let mu = self.mu(model.m0())?;
        let h0 = self.h0()?;
        let dt = self.check_numerics(&model, &kernels)?;
        self.check_initial(&model)?;
        let n = &self.numerics;
        let cfg = FBConfig {
            model,
            kernels,
            mu,
            h0,
            initial: self.initial.clone(),
            dx: n.dx,
            dt,
            t_end: n.t_end,
            snapshot_times: n.snapshot_times.clone(),
            sample_stride: n.sample_stride,
            scheme: n.scheme,
            thresholds: self.thresholds,
        };
        cfg.validate().map_err(|e| ConfigError::at("", e.to_string()))?;
        Ok(cfg)
    }

    pub fn cauchy_config(&self) -> Result<CauchyConfig, ConfigError> {
        let model = self.build_model()?;
        let kernels = self.build_kernels(model.m0())?;
        let h0 = self.h0()?;
        let dt = self.check_numerics(&model, &kernels)?;
        self.check_initial(&model)?;
        let u_star = model.u_star().to_vec();
        let mut levels = Vec::with_capacity(self.levels.len());
        for (j, l) in self.levels.iter().enumerate() {
            if l.i == 0 || l.i > model.m() {
                return Err(ConfigError::at(format!("/levels/{j}/i"), format!("component {} out of 1..={}", l.i, model.m())));
            }
            let us = u_star[l.i - 1];
            if !(l.lambda > 0.0 && l.lambda < us) {
                return Err(ConfigError::at(format!("/levels/{j}/lambda"), format!("level must lie in (0, {us})")));
            }
            levels.push(LevelSpec {
                component: l.i - 1,
                lambda: l.lambda,
            });
        }
        let n = &self.numerics;
        if !(n.max_half_width > h0) {
            return Err(ConfigError::at("/numerics/max_half_width", "must exceed h0"));
        }
        let cfg = CauchyConfig {
            model,
            kernels,
            h0,
            initial: self.initial.clone(),
            dx: n.dx,
            dt,
            t_end: n.t_end,
            snapshot_times: n.snapshot_times.clone(),
            sample_stride: n.sample_stride,
            levels,
            max_half_width: n.max_half_width,
            edge_tol: n.edge_tol,
        };
        cfg.validate().map_err(|e| ConfigError::at("", e.to_string()))?;
        Ok(cfg)
    }

    /// Expansion-coefficient vectors for a speeds run: the sweep, or `mu` alone.
    pub fn speed_mus(&self, m0: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
        if self.speeds.mu_sweep.is_empty() {
            return Ok(vec![self.mu(m0)?]);
        }
        self.speeds
            .mu_sweep
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let mu = v.expand(m0);
                check_mu(&mu, m0, &format!("/speeds/mu_sweep/{j}"))?;
                Ok(mu)
            })
            .collect()
    }
}

fn check_mu(mu: &[f64], m0: usize, pointer: &str) -> Result<(), ConfigError> {
    if mu.len() != m0 {
        return Err(ConfigError::at(pointer, format!("expected {m0} entries, got {}", mu.len())));
    }
    if mu.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || !(mu.iter().sum::<f64>() > 0.0) {
        return Err(ConfigError::at(pointer, "entries must be nonnegative with a positive sum"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"model": "wnv", "params": {"a1":1, "a2":1, "b1":0.5, "b2":0.5, "e1":1, "e2":1},
        "kernels": [{"family": "laplace", "scale": 1}, {"family": "laplace", "scale": 1}], "mu": 1, "h0": 10}"#;

    fn with(patch: &str) -> Result<Scenario, ConfigError> {
        let mut v = parse_json(BASE).unwrap();
        merge(&mut v, &parse_json(patch).unwrap());
        from_value(v)
    }

    #[test]
    fn base_builds_with_default_dt() {
        let s = with("{}").unwrap();
        let cfg = s.fb_config().unwrap();
        assert_eq!(cfg.mu, vec![1.0, 1.0]);
        assert!((cfg.dt - 0.5 * cfg.stability_bound()).abs() < 1e-15);
    }

    #[test]
    fn type_errors_carry_pointer() {
        let e = with(r#"{"kernels": [{"family": "powerlaw", "gamma": "x"}, {"family": "laplace", "scale": 1}]}"#).unwrap_err();
        // tagged kernel entries are buffered, so the path stops at the entry
        assert_eq!(e.pointer(), Some("/kernels/0"), "{e}");
        assert!(e.to_string().contains("expected f64"), "{e}");
        let e = with(r#"{"numerics": {"dtt": 0.1}}"#).unwrap_err();
        assert!(e.pointer().unwrap().starts_with("/numerics"), "{e}");
    }

    #[test]
    fn semantic_errors_carry_pointer() {
        let e = with(r#"{"numerics": {"dt": 10.0}}"#).unwrap().fb_config().unwrap_err();
        assert_eq!(e.pointer(), Some("/numerics/dt"));
        let e = with(r#"{"kernels": [{"family": "powerlaw", "gamma": 0.5}, {"family": "laplace", "scale": 1}]}"#)
            .unwrap()
            .fb_config()
            .unwrap_err();
        assert_eq!(e.pointer(), Some("/kernels/0"));
        let e = with(r#"{"model": "custom", "params": {}, "m": 1, "m0": 2, "f": ["u1*(1-u1)"]}"#)
            .unwrap()
            .fb_config()
            .unwrap_err();
        assert_eq!(e.pointer(), Some("/m0"));
        let e = with(r#"{"params": {"b1": 1, "b2": 1}}"#).unwrap().fb_config().unwrap_err();
        assert_eq!(e.pointer(), Some("/params"));
    }
}
