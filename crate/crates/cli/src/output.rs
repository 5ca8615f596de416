//! CSV/JSON writers. Floats go out with 17 significant digits so files
//! round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use nlfb_core::cauchy_sim::LevelSeries;
use nlfb_core::fb_sim::FrontSeries;
use nlfb_core::nonlocal_ops::GridFunction;
use nlfb_core::semiwave::SemiWaveSolution;

pub fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn csv_writer(path: &Path) -> std::io::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_fronts(path: &Path, series: &FrontSeries) -> std::io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "g", "h"]).map_err(csv_err)?;
    for s in &series.samples {
        w.write_record([fmt(s.t), fmt(s.g), fmt(s.h)]).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_snapshots(path: &Path, m: usize, snapshots: &[(f64, GridFunction)]) -> std::io::Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string(), "x".to_string()];
    header.extend((1..=m).map(|i| format!("u{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, u) in snapshots {
        for k in 0..u.len() {
            let mut row = vec![fmt(*t), fmt(u.x(k))];
            row.extend((0..u.m()).map(|i| fmt(u.component(i)[k])));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()
}

/// `t,i,lambda,x_minus,x_plus` with `i` counted from 1; empty cells where the
/// level set does not exist.
pub fn write_levels(path: &Path, levels: &LevelSeries) -> std::io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "i", "lambda", "x_minus", "x_plus"]).map_err(csv_err)?;
    let n = levels.tracks.first().map_or(0, |t| t.samples.len());
    for j in 0..n {
        for tr in &levels.tracks {
            let s = &tr.samples[j];
            w.write_record([
                fmt(s.t),
                (tr.level.component + 1).to_string(),
                fmt(tr.level.lambda),
                opt(s.x_minus),
                opt(s.x_plus),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
}

pub fn write_semiwave(path: &Path, sol: &SemiWaveSolution) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# c={} L={} residual={:e} converged={}", fmt(sol.c), fmt(sol.l), sol.residual, sol.converged)?;
    let mut w = csv::Writer::from_writer(f);
    let mut header = vec!["x".to_string()];
    header.extend((1..=sol.phi.len()).map(|i| format!("phi_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (k, x) in sol.mesh.iter().enumerate() {
        let mut row = vec![fmt(*x)];
        row.extend(sol.phi.iter().map(|p| fmt(p[k])));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()
}

/// Reads named columns of a CSV with a header row (comment lines start with `#`).
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, String> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let idx = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| format!("{}: no column '{n}'", path.display()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let vals: Option<Vec<f64>> = idx.iter().map(|&i| rec.get(i).and_then(|s| s.parse().ok())).collect();
        // rows with empty cells (absent level sets) are skipped
        if let Some(vals) = vals {
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(v);
            }
        } else if idx.iter().any(|&i| rec.get(i).is_some_and(|s| !s.is_empty() && s.parse::<f64>().is_err())) {
            return Err(format!("{}: unparsable value on data row {}", path.display(), line + 1));
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.123] {
            let s = fmt(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }
}
