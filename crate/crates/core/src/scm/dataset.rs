use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::graph::Role;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub id: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<String>,
}

/// Column-major sample matrix with role-tagged columns.
///
/// `row_ids` tracks where each row came from in the generated pool, so
/// downstream code can prove which rows a computation consumed.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    matrix: DMatrix<f64>,
    columns: Vec<Column>,
    standardized: bool,
    scale_factors: Vec<f64>,
    row_ids: Vec<usize>,
}

/// Sidecar mapping column id -> role, stored as a flat JSON object.
pub type RoleMap = BTreeMap<String, Role>;

impl Dataset {
    pub fn new(matrix: DMatrix<f64>, columns: Vec<Column>) -> Result<Self> {
        if matrix.ncols() != columns.len() {
            return input(format!("{} columns declared for a {}-column matrix", columns.len(), matrix.ncols()));
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.id == c.id) {
                return input(format!("duplicate column `{}`", c.id));
            }
        }
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            return input(format!("non-finite value in column `{}`", columns[pos / matrix.nrows().max(1)].id));
        }
        let p = columns.len();
        let n = matrix.nrows();
        Ok(Dataset { matrix, columns, standardized: false, scale_factors: vec![1.0; p], row_ids: (0..n).collect() })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Pre-standardization standard deviation of each column (1 when raw).
    pub fn scale_factors(&self) -> &[f64] {
        &self.scale_factors
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.columns.iter().position(|c| c.id == id).ok_or_else(|| Error::UnknownNode(id.to_owned()))
    }

    pub fn with_role(&self, role: Role) -> Vec<usize> {
        (0..self.n_cols()).filter(|&i| self.columns[i].role == role).collect()
    }

    /// The single column carrying `role` (W, X or Y).
    pub fn role_column(&self, role: Role) -> Result<usize> {
        match self.with_role(role).as_slice() {
            [i] => Ok(*i),
            [] => input(format!("dataset has no {role} column")),
            _ => input(format!("dataset has more than one {role} column")),
        }
    }

    pub fn z_columns(&self) -> Vec<usize> {
        self.with_role(Role::Z)
    }

    /// Drops latent (role U) columns.
    pub fn observed(&self) -> Dataset {
        let keep: Vec<usize> = (0..self.n_cols()).filter(|&i| self.columns[i].role != Role::U).collect();
        self.select_columns(&keep)
    }

    pub fn select_columns(&self, keep: &[usize]) -> Dataset {
        Dataset {
            matrix: self.matrix.select_columns(keep),
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            standardized: self.standardized,
            scale_factors: keep.iter().map(|&i| self.scale_factors[i]).collect(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Rescales every column to unit sample variance (n - 1 divisor).
    pub fn standardize(mut self) -> Result<Dataset> {
        let n = self.n_rows();
        if n < 2 {
            return input("standardization needs at least two rows");
        }
        for j in 0..self.n_cols() {
            let mut col = self.matrix.column_mut(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            if !(var > 0.0) {
                return Err(Error::DegenerateColumn(self.columns[j].id.clone()));
            }
            let sd = var.sqrt();
            col /= sd;
            self.scale_factors[j] *= sd;
        }
        self.standardized = true;
        Ok(self)
    }

    pub fn rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            matrix: self.matrix.select_rows(idx),
            columns: self.columns.clone(),
            standardized: self.standardized,
            scale_factors: self.scale_factors.clone(),
            row_ids: idx.iter().map(|&r| self.row_ids[r]).collect(),
        }
    }

    /// Contiguous split by fractions summing to 1; the last part takes any
    /// rounding remainder.
    pub fn split(&self, fractions: &[f64]) -> Result<Vec<Dataset>> {
        if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) {
            return input("split fractions must be positive");
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return input("split fractions must sum to 1");
        }
        let n = self.n_rows();
        let mut parts = Vec::with_capacity(fractions.len());
        let mut start = 0;
        for (k, f) in fractions.iter().enumerate() {
            let end = if k + 1 == fractions.len() { n } else { start + (f * n as f64).floor() as usize };
            let idx: Vec<usize> = (start..end.min(n)).collect();
            parts.push(self.rows(&idx));
            start = end.min(n);
        }
        Ok(parts)
    }

    pub fn role_map(&self) -> RoleMap {
        self.columns.iter().map(|c| (c.id.clone(), c.role)).collect()
    }

    /// CSV with a header row of column ids.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.id.as_str()))?;
        let mut record = Vec::with_capacity(self.n_cols());
        for r in 0..self.n_rows() {
            record.clear();
            record.extend((0..self.n_cols()).map(|c| format!("{:?}", self.matrix[(r, c)])));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV whose header names every column listed in `roles`.
    pub fn read_csv<R: Read>(input_csv: R, roles: &RoleMap) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_reader(input_csv);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
        let mut columns = Vec::with_capacity(header.len());
        for h in &header {
            let role = roles.get(h).ok_or_else(|| Error::Input(format!("column `{h}` missing from roles file")))?;
            columns.push(Column { id: h.clone(), role: *role, block: None });
        }
        if let Some(missing) = roles.keys().find(|k| !header.contains(k)) {
            return input(format!("roles file names `{missing}`, which is not a CSV column"));
        }
        let mut values = Vec::new();
        let mut n = 0;
        for record in rdr.records() {
            let record = record?;
            for field in record.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Input(format!("row {}: cannot parse `{field}` as a number", n + 1)))?;
                values.push(v);
            }
            n += 1;
        }
        let p = header.len();
        let matrix = DMatrix::from_row_slice(n, p, &values);
        Dataset::new(matrix, columns)
    }
}
