//! Plot-ready CSVs: per-method error histograms and per-setting scatter
//! pairs of baseline error against ours. Nothing is rendered.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{BenchmarkReport, Method, ReportRow};
use crate::error::{Error, Result};

const MAX_BINS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlotFiles {
    pub histogram: PathBuf,
    pub scatter: PathBuf,
}

/// Writes `histogram.csv` and `scatter.csv` into `dir`.
///
/// `bin_width = None` uses the Freedman-Diaconis rule per scenario.
pub fn export_plot_data(report: &BenchmarkReport, dir: &Path, bin_width: Option<f64>) -> Result<PlotFiles> {
    std::fs::create_dir_all(dir)?;
    let files = PlotFiles { histogram: dir.join("histogram.csv"), scatter: dir.join("scatter.csv") };
    let mut h = BufWriter::new(File::create(&files.histogram)?);
    write_histogram(report, bin_width, &mut h)?;
    h.flush()?;
    let mut s = BufWriter::new(File::create(&files.scatter)?);
    write_scatter(report, &mut s)?;
    s.flush()?;
    Ok(files)
}

fn ok_rows(report: &BenchmarkReport) -> impl Iterator<Item = &ReportRow> {
    report.rows.iter().filter(|r| r.status == "ok" && r.ate_error.is_finite())
}

/// `2 IQR / n^(1/3)`; `None` when fewer than two values or zero spread.
pub fn freedman_diaconis_width(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let iqr = quantile(&v, 0.75) - quantile(&v, 0.25);
    let w = 2.0 * iqr / (v.len() as f64).cbrt();
    (w > 0.0).then_some(w)
}

/// Linear interpolation between order statistics of sorted `v`.
fn quantile(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Columns `scenario_id, method, bin_lo, bin_hi, count`. Bin edges are
/// shared by every method within a scenario.
pub fn write_histogram<W: Write>(report: &BenchmarkReport, bin_width: Option<f64>, out: W) -> Result<()> {
    if let Some(w) = bin_width {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Config(format!("bin width {w} must be positive")));
        }
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["scenario_id", "method", "bin_lo", "bin_hi", "count"])?;
    let mut by_cell: BTreeMap<(usize, &str), Vec<&ReportRow>> = BTreeMap::new();
    for r in ok_rows(report) {
        by_cell.entry((r.cell, &r.scenario_id)).or_default().push(r);
    }
    for ((_, id), rows) in by_cell {
        let errs: Vec<f64> = rows.iter().map(|r| r.ate_error).collect();
        let lo = errs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = errs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = bin_width.or_else(|| freedman_diaconis_width(&errs)).unwrap_or((hi - lo).max(f64::MIN_POSITIVE));
        let bins = (((hi - lo) / width).floor() as usize + 1).min(MAX_BINS);
        let width = if bins == MAX_BINS { (hi - lo) / (MAX_BINS - 1) as f64 } else { width };
        let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        for m in methods {
            let mut counts = vec![0usize; bins];
            for r in rows.iter().filter(|r| r.method == m) {
                let b = (((r.ate_error - lo) / width).floor() as usize).min(bins - 1);
                counts[b] += 1;
            }
            for (b, c) in counts.iter().enumerate() {
                let a = lo + b as f64 * width;
                wtr.write_record([id, m.as_str(), &a.to_string(), &(a + width).to_string(), &c.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Columns `scenario_id, setting, baseline, baseline_error, ours_error`;
/// one row per setting and baseline where both succeeded.
pub fn write_scatter<W: Write>(report: &BenchmarkReport, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["scenario_id", "setting", "baseline", "baseline_error", "ours_error"])?;
    let mut by_key: BTreeMap<(usize, usize), BTreeMap<Method, &ReportRow>> = BTreeMap::new();
    for r in ok_rows(report) {
        by_key.entry((r.cell, r.setting)).or_default().insert(r.method, r);
    }
    for ((_, setting), methods) in by_key {
        let Some(ours) = methods.get(&Method::Ours) else { continue };
        for (m, r) in methods.iter().filter(|(m, _)| **m != Method::Ours) {
            wtr.write_record([
                r.scenario_id.as_str(),
                &setting.to_string(),
                m.as_str(),
                &r.ate_error.to_string(),
                &ours.ate_error.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
