use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Method, ScenarioConfig};
use crate::discovery::Lambda2Rule;
use crate::error::Result;

/// One method on one parameter setting. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario_id: String,
    #[serde(skip)]
    pub cell: usize,
    pub setting: usize,
    pub method: Method,
    pub ate_estimate: f64,
    pub ate_error: f64,
    /// Column ids joined by `;`.
    pub selected: String,
    pub runtime_ms: u64,
    pub seed: u64,
    pub config_hash: String,
    /// `ok`, or `error: ...` when the method failed.
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Median absolute ATE error over successful rows; NaN if none.
    pub median_ate_error: f64,
    pub ok: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scenario_id: String,
    pub methods: Vec<MethodSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub lambda2_rule: Lambda2Rule,
    pub cells: Vec<CellSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
}

impl BenchmarkReport {
    pub(crate) fn new(rows: Vec<ReportRow>, cfg: &ScenarioConfig) -> Self {
        let summary = summarize(&rows, cfg.hash(), cfg.discovery.lambda2_rule);
        BenchmarkReport { rows, summary }
    }

    /// Rebuilds a report from its CSV; cells are numbered by first
    /// appearance of each scenario id.
    pub fn read_csv<R: Read>(input: R, lambda2_rule: Lambda2Rule) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        let mut cells: Vec<String> = Vec::new();
        for rec in rdr.deserialize() {
            let mut row: ReportRow = rec?;
            row.cell = match cells.iter().position(|c| *c == row.scenario_id) {
                Some(i) => i,
                None => {
                    cells.push(row.scenario_id.clone());
                    cells.len() - 1
                }
            };
            rows.push(row);
        }
        let hash = rows.first().map(|r| r.config_hash.clone()).unwrap_or_default();
        let summary = summarize(&rows, hash, lambda2_rule);
        Ok(BenchmarkReport { rows, summary })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(REPORT_HEADER)?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }

    pub fn median_error(&self, scenario_id: &str, method: Method) -> Option<f64> {
        self.summary
            .cells
            .iter()
            .find(|c| c.scenario_id == scenario_id)?
            .methods
            .iter()
            .find(|m| m.method == method)
            .map(|m| m.median_ate_error)
    }
}

pub const REPORT_HEADER: [&str; 10] = [
    "scenario_id",
    "setting",
    "method",
    "ate_estimate",
    "ate_error",
    "selected",
    "runtime_ms",
    "seed",
    "config_hash",
    "status",
];

fn summarize(rows: &[ReportRow], config_hash: String, lambda2_rule: Lambda2Rule) -> Summary {
    let mut by_cell: BTreeMap<(usize, &str), BTreeMap<Method, Vec<&ReportRow>>> = BTreeMap::new();
    for r in rows {
        by_cell.entry((r.cell, r.scenario_id.as_str())).or_default().entry(r.method).or_default().push(r);
    }
    let cells = by_cell
        .into_iter()
        .map(|((_, id), methods)| CellSummary {
            scenario_id: id.to_owned(),
            methods: methods
                .into_iter()
                .map(|(method, rs)| {
                    let mut errs: Vec<f64> =
                        rs.iter().filter(|r| r.status == "ok" && r.ate_error.is_finite()).map(|r| r.ate_error).collect();
                    let ok = errs.len();
                    MethodSummary { method, median_ate_error: median(&mut errs), ok, failed: rs.len() - ok }
                })
                .collect(),
        })
        .collect();
    Summary { config_hash, lambda2_rule, cells }
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
