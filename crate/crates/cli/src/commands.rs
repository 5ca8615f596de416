//! Subcommand implementations. Each writes its files into `out` and returns
//! a JSON summary of what happened.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use nlfb_core::analysis::{best_growth_law_of, GrowthSelection};
use nlfb_core::cauchy_sim;
use nlfb_core::fb_sim::{self, classify_outcome, SimError};
use nlfb_core::kernels::Moment;
use nlfb_core::semiwave::{estimate_cstar, find_c0, SemiwaveError};

use crate::config::{self, ConfigError, Scenario};
use crate::output;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {0}")]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Run(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn sim_error_json(e: &SimError) -> Value {
    match e {
        SimError::Instability { t, detail } => json!({"kind": "Instability", "t": t, "detail": detail}),
        other => json!({"kind": "Error", "detail": other.to_string()}),
    }
}

pub fn simulate_fb(scenario: &Scenario, out: &Path) -> Result<Value, CliError> {
    let cfg = scenario.fb_config()?;
    prepare_out(out)?;
    let (series, err) = fb_sim::run_partial(&cfg);
    output::write_fronts(&out.join("fronts.csv"), &series)?;
    output::write_snapshots(&out.join("snapshots.csv"), cfg.model.m(), &series.snapshots)?;
    let last = series.last().copied();
    let summary = json!({
        "name": scenario.name,
        "outcome": if err.is_some() { Value::Null } else { json!(classify_outcome(&series, &cfg)) },
        "final_t": last.map(|s| s.t),
        "final_g": last.map(|s| s.g),
        "final_h": last.map(|s| s.h),
        "center_deviation": last.map(|s| s.center_dev),
        "thresholds_used": cfg.thresholds,
        "stability_bound": cfg.stability_bound(),
        "numerics": {"dx": cfg.dx, "dt": cfg.dt, "t_end": cfg.t_end, "scheme": cfg.scheme, "sample_stride": cfg.sample_stride},
        "u_star": cfg.model.u_star(),
        "error": err.as_ref().map(sim_error_json),
    });
    output::write_json(&out.join("summary.json"), &summary)?;
    match err {
        Some(e) => Err(CliError::Run(e.to_string())),
        None => Ok(summary),
    }
}

pub fn simulate_cauchy(scenario: &Scenario, out: &Path) -> Result<Value, CliError> {
    let cfg = scenario.cauchy_config()?;
    prepare_out(out)?;
    let (series, err) = cauchy_sim::run_partial(&cfg);
    output::write_levels(&out.join("levels.csv"), &series.levels)?;
    output::write_snapshots(&out.join("snapshots.csv"), cfg.model.m(), &series.snapshots)?;
    let last = series.samples.last().copied();
    let mut flags = Vec::new();
    if cfg.model.ceiling().is_some() {
        flags.push("bounded ceiling: statements that assume an unbounded ceiling are not covered by this run");
    }
    if series.capped {
        flags.push("window reached max_half_width: exterior mass is truncated (see leak_bound)");
    }
    let summary = json!({
        "name": scenario.name,
        "final_t": last.map(|s| s.t),
        "half_width": last.map(|s| s.half_width),
        "capped": series.capped,
        "leak_bound": series.leak_bound,
        "edge_tol": cfg.edge_tolerance().ok(),
        "stability_bound": cfg.stability_bound(),
        "numerics": {"dx": cfg.dx, "dt": cfg.dt, "t_end": cfg.t_end, "max_half_width": cfg.max_half_width, "sample_stride": cfg.sample_stride},
        "u_star": cfg.model.u_star(),
        "levels": cfg.levels.iter().map(|l| json!({"i": l.component + 1, "lambda": l.lambda})).collect::<Vec<_>>(),
        "flags": flags,
        "error": err.as_ref().map(sim_error_json),
    });
    output::write_json(&out.join("summary.json"), &summary)?;
    match err {
        Some(e) => Err(CliError::Run(e.to_string())),
        None => Ok(summary),
    }
}

fn speed_value(v: Option<f64>) -> Value {
    match v {
        Some(x) => json!(x),
        None => json!("infinite"),
    }
}

pub fn speeds(scenario: &Scenario, out: &Path) -> Result<Value, CliError> {
    let model = scenario.build_model()?;
    let kernels = scenario.build_kernels(model.m0())?;
    let mus = scenario.speed_mus(model.m0())?;
    let sp = &scenario.speeds;
    prepare_out(out)?;
    let mut sweep = Vec::new();
    let mut reason: Option<String> = None;
    let mut profile_written = false;
    for mu in &mus {
        match find_c0(&model, &kernels, mu, sp.l, sp.tol_c, &sp.solver) {
            Ok(r) => {
                if !profile_written {
                    output::write_semiwave(&out.join("semiwave.csv"), &r.solution)?;
                    profile_written = true;
                }
                sweep.push(json!({"mu": mu, "c0": r.c0, "bracket": r.bracket, "sign_changes": r.sign_changes, "evaluations": r.trace.len()}));
            }
            Err(SemiwaveError::J1Violated(_)) => {
                reason = Some("J1 violated".into());
                sweep.push(json!({"mu": mu, "c0": "infinite"}));
            }
            Err(e) => return Err(CliError::Run(format!("find_c0 at mu = {mu:?}: {e}"))),
        }
    }
    let c0 = sweep[0]["c0"].clone();
    let mut result = json!({
        "name": scenario.name,
        "c0": c0,
        "c0_bracket": sweep[0].get("bracket").cloned(),
        "l": sp.l,
        "tol_c": sp.tol_c,
        "mu_sweep": sweep,
        "reason": reason,
    });
    if sp.cstar {
        let est = estimate_cstar(&model, &kernels, &sp.cstar_params).map_err(|e| CliError::Run(format!("estimate_cstar: {e}")))?;
        result["cstar"] = speed_value(match est.value {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        });
        result["cstar_bracket"] = json!(est.bracket);
        result["cstar_linearized_diagnostic"] = json!(est.linearized);
        result["cstar_reason"] = json!(est.reason);
        result["cstar_proxy_records"] = json!(est.records);
    }
    output::write_json(&out.join("speeds.json"), &result)?;
    Ok(result)
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesFit {
    pub series: String,
    #[serde(flatten)]
    pub selection: GrowthSelection,
}

/// Fits every trajectory in a `fronts.csv` (h and -g) or `levels.csv`
/// (x_plus and -x_minus per tracked level).
pub fn fit(input: &Path, window: Option<(f64, f64)>, out: &Path) -> Result<Value, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(input)
        .map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
    let headers: Vec<String> = r.headers().map_err(|e| CliError::Io(e.to_string()))?.iter().map(String::from).collect();
    let col = |n: &str| headers.iter().position(|h| h == n);
    let parse = |s: Option<&str>| s.and_then(|v| v.parse::<f64>().ok());
    // series name -> (t, x)
    let mut series: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let t_col = col("t").ok_or_else(|| CliError::Run(format!("{}: no 't' column", input.display())))?;
    let mut specs: Vec<(usize, f64, &str)> = Vec::new();
    if let (Some(g), Some(h)) = (col("g"), col("h")) {
        specs.push((h, 1.0, "h"));
        specs.push((g, -1.0, "minus_g"));
    } else if let (Some(xm), Some(xp)) = (col("x_minus"), col("x_plus")) {
        specs.push((xp, 1.0, "x_plus"));
        specs.push((xm, -1.0, "minus_x_minus"));
    } else {
        return Err(CliError::Run(format!("{}: expected fronts (t,g,h) or levels (t,i,lambda,x_minus,x_plus)", input.display())));
    }
    let (i_col, l_col) = (col("i"), col("lambda"));
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Io(e.to_string()))?;
        let Some(t) = parse(rec.get(t_col)) else { continue };
        let tag = match (i_col, l_col) {
            (Some(i), Some(l)) => format!("[i={},lambda={}]", rec.get(i).unwrap_or(""), parse(rec.get(l)).unwrap_or(f64::NAN)),
            _ => String::new(),
        };
        for &(c, sign, name) in &specs {
            if let Some(x) = parse(rec.get(c)) {
                let e = series.entry(format!("{name}{tag}")).or_default();
                e.0.push(t);
                e.1.push(sign * x);
            }
        }
    }
    prepare_out(out)?;
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for (name, (t, x)) in &series {
        match best_growth_law_of(t, x, window) {
            Ok(selection) => fits.push(SeriesFit {
                series: name.clone(),
                selection,
            }),
            Err(e) => skipped.push(json!({"series": name, "reason": e.to_string()})),
        }
    }
    let result = json!({"input": input.display().to_string(), "fits": fits, "skipped": skipped});
    output::write_json(&out.join("fits.json"), &result)?;
    Ok(result)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    SimulateFb,
    SimulateCauchy,
    Speeds,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRun {
    pub name: String,
    pub command: RunKind,
    /// Scenario path, relative to the sweep file.
    pub config: PathBuf,
    #[serde(default)]
    pub overrides: Option<Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub runs: Vec<SweepRun>,
}

pub fn run_scenario(kind: RunKind, scenario: &Scenario, out: &Path) -> Result<Value, CliError> {
    match kind {
        RunKind::SimulateFb => simulate_fb(scenario, out),
        RunKind::SimulateCauchy => simulate_cauchy(scenario, out),
        RunKind::Speeds => speeds(scenario, out),
    }
}

/// Runs independent scenarios concurrently, each into `out/<name>`.
pub fn sweep(path: &Path, jobs: usize, out: &Path) -> Result<Value, CliError> {
    let sweep: SweepConfig = config::from_value(config::read_value(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut names = std::collections::BTreeSet::new();
    let mut prepared = Vec::new();
    for (j, run) in sweep.runs.iter().enumerate() {
        if !names.insert(run.name.clone()) || run.name.is_empty() || run.name.contains(['/', '\\']) {
            return Err(ConfigError::at(format!("/runs/{j}/name"), "run names must be unique plain directory names").into());
        }
        let mut v = config::read_value(&base.join(&run.config)).map_err(|e| match e {
            ConfigError::Io { message, .. } => ConfigError::at(format!("/runs/{j}/config"), message),
            other => other,
        })?;
        if let Some(p) = &run.overrides {
            config::merge(&mut v, p);
        }
        let scenario: Scenario = config::from_value(v).map_err(|e| match e {
            ConfigError::Invalid { pointer, message } => ConfigError::at(format!("/runs/{j}/config{pointer}"), message),
            other => other,
        })?;
        prepared.push((run.clone(), scenario));
    }
    prepare_out(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Run(e.to_string()))?;
    let results: Vec<Value> = pool.install(|| {
        use rayon::prelude::*;
        prepared
            .par_iter()
            .map(|(run, scenario)| {
                let dir = out.join(&run.name);
                match run_scenario(run.command, scenario, &dir) {
                    Ok(_) => json!({"name": run.name, "status": "ok"}),
                    Err(e) => json!({"name": run.name, "status": "failed", "exit_code": e.exit_code(), "error": e.to_string()}),
                }
            })
            .collect()
    });
    let failed = results.iter().filter(|r| r["status"] != "ok").count();
    let report = json!({"runs": results, "failed": failed});
    output::write_json(&out.join("sweep.json"), &report)?;
    if failed > 0 {
        return Err(CliError::Run(format!("{failed} of {} runs failed", prepared.len())));
    }
    Ok(report)
}
