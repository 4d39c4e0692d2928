//! Column-oriented time-series tables.
//!
//! A [`Dataset`] keeps its rows in time order; none of the operations here
//! reorder rows except [`Dataset::permute_column`], which shuffles exactly one
//! column. Columns can be flagged *hidden*: they travel with the data for
//! evaluation purposes but are never offered to a model as input or target.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// A named real-valued series.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    hidden: BTreeSet<String>,
    rows: usize,
}

impl Dataset {
    /// Builds a dataset from `(name, values)` pairs in column order.
    pub fn new<S: Into<String>>(columns: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let columns: Vec<Column> = columns
            .into_iter()
            .map(|(name, values)| Column {
                name: name.into(),
                values,
            })
            .collect();
        let rows = columns.first().map_or(0, |c| c.values.len());
        let mut seen = BTreeSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::InvalidDataset("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate column name `{}`",
                    c.name
                )));
            }
            if c.values.len() != rows {
                return Err(Error::InvalidDataset(format!(
                    "column `{}` has {} values, expected {}",
                    c.name,
                    c.values.len(),
                    rows
                )));
            }
        }
        Ok(Self {
            columns,
            hidden: BTreeSet::new(),
            rows,
        })
    }

    /// Marks the named columns as hidden.
    pub fn with_hidden<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self> {
        for n in names {
            let n = n.as_ref();
            self.index_of(n)?;
            self.hidden.insert(n.to_string());
        }
        Ok(self)
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Names of the columns a model may use, in column order.
    pub fn visible_names(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| !self.hidden.contains(&c.name))
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn hidden_names(&self) -> Vec<&str> {
        self.hidden.iter().map(String::as_str).collect()
    }

    pub fn is_hidden(&self, name: &str) -> bool {
        self.hidden.contains(name)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.index_of(name)?].values)
    }

    /// Returns a copy with the named column's values replaced.
    pub fn with_column_values(&self, name: &str, values: Vec<f64>) -> Result<Self> {
        let idx = self.index_of(name)?;
        if values.len() != self.rows {
            return Err(Error::InvalidDataset(format!(
                "replacement for `{name}` has {} values, expected {}",
                values.len(),
                self.rows
            )));
        }
        let mut out = self.clone();
        out.columns[idx].values = values;
        Ok(out)
    }

    /// Appends a column at the end.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidDataset("empty column name".into()));
        }
        if self.has_column(&name) {
            return Err(Error::InvalidDataset(format!("duplicate column name `{name}`")));
        }
        if !self.columns.is_empty() && values.len() != self.rows {
            return Err(Error::InvalidDataset(format!(
                "column `{name}` has {} values, expected {}",
                values.len(),
                self.rows
            )));
        }
        self.rows = values.len();
        self.columns.push(Column { name, values });
        Ok(())
    }

    /// Reorders columns to the given name order (which must be a permutation
    /// of the current names).
    pub fn reorder_columns<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        if order.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "column order lists {} names, dataset has {}",
                order.len(),
                self.columns.len()
            )));
        }
        let mut columns = Vec::with_capacity(order.len());
        for n in order {
            columns.push(self.columns[self.index_of(n.as_ref())?].clone());
        }
        let distinct: BTreeSet<&str> = columns.iter().map(|c: &Column| c.name.as_str()).collect();
        if distinct.len() != columns.len() {
            return Err(Error::InvalidArgument("column order repeats a name".into()));
        }
        Ok(Self {
            columns,
            hidden: self.hidden.clone(),
            rows: self.rows,
        })
    }

    /// Rows in `range`, all columns, hidden flags kept.
    pub fn slice_rows(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.rows && range.start <= range.end);
        Self {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: c.values[range.clone()].to_vec(),
                })
                .collect(),
            hidden: self.hidden.clone(),
            rows: range.end - range.start,
        }
    }

    /// Appends the rows of `other`, which must have the same column names in
    /// the same order.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.names() != other.names() {
            return Err(Error::InvalidDataset("column sets differ".into()));
        }
        let mut out = self.clone();
        for (c, o) in out.columns.iter_mut().zip(&other.columns) {
            c.values.extend_from_slice(&o.values);
        }
        out.rows += other.rows;
        out.hidden.extend(other.hidden.iter().cloned());
        Ok(out)
    }

    /// Chronological split: the first `floor(ratio * rows)` rows train, the
    /// remainder test.
    pub fn split(&self, ratio: f64) -> Result<(Self, Self)> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "split ratio {ratio} outside (0, 1)"
            )));
        }
        if self.rows == 0 {
            return Err(Error::InvalidDataset("cannot split an empty dataset".into()));
        }
        let cut = (ratio * self.rows as f64).floor() as usize;
        Ok((self.slice_rows(0..cut), self.slice_rows(cut..self.rows)))
    }

    /// Copy with the values of `var` shuffled by a uniform random permutation
    /// drawn from `seed`. Other columns are untouched.
    pub fn permute_column(&self, var: &str, seed: u64) -> Result<Self> {
        let idx = self.index_of(var)?;
        let mut out = self.clone();
        let mut rng = seeded(seed);
        out.columns[idx].values.shuffle(&mut rng);
        Ok(out)
    }

    /// Appends `d1_<var>` and `d2_<var>` for each var.
    ///
    /// Interior rows use central differences; the first and last row use
    /// first-order one-sided differences (for d2, the neighbouring interior
    /// value is repeated).
    pub fn add_derivatives<S: AsRef<str>>(&self, vars: &[S], dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if self.rows < 3 {
            return Err(Error::InvalidDataset(format!(
                "derivatives need at least 3 rows, got {}",
                self.rows
            )));
        }
        let mut out = self.clone();
        for v in vars {
            let v = v.as_ref();
            let x = self.column(v)?;
            let (d1, d2) = derivatives(x, dt);
            out.push_column(format!("d1_{v}"), d1)?;
            out.push_column(format!("d2_{v}"), d2)?;
        }
        Ok(out)
    }

    /// Sliding windows `[start, start + size)` for `start = 0, step, 2*step, ...`
    /// while the window fits.
    pub fn windows(&self, spec: WindowSpec) -> Result<Vec<(usize, Dataset)>> {
        Ok(window_starts(self.rows, spec)?
            .into_iter()
            .map(|s| (s, self.slice_rows(s..s + spec.size)))
            .collect())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 1,
                column: 0,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row: line,
                column: 0,
                message: e.to_string(),
            })?;
            if rec.len() != header.len() {
                return Err(Error::Parse {
                    row: line,
                    column: rec.len().min(header.len()) + 1,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: line,
                    column: j + 1,
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: line,
                        column: j + 1,
                        message: format!("`{cell}` is not finite"),
                    });
                }
                cols[j].push(v);
            }
        }
        Self::new(header.into_iter().zip(cols).collect())
    }

    /// CSV text with a header row; floats use the shortest round-trip form.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.names().join(","));
        s.push('\n');
        for r in 0..self.rows {
            for (j, c) in self.columns.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                write!(s, "{}", c.values[r]).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Central-difference first and second derivatives with one-sided ends.
fn derivatives(x: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 1..n - 1 {
        d1[i] = (x[i + 1] - x[i - 1]) / (2.0 * dt);
        d2[i] = (x[i + 1] - 2.0 * x[i] + x[i - 1]) / (dt * dt);
    }
    d1[0] = (x[1] - x[0]) / dt;
    d1[n - 1] = (x[n - 1] - x[n - 2]) / dt;
    d2[0] = d2[1];
    d2[n - 1] = d2[n - 2];
    (d1, d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub size: usize,
    pub step: usize,
}

impl WindowSpec {
    pub fn new(size: usize, step: usize) -> Result<Self> {
        let spec = Self { size, step };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::InvalidArgument(format!(
                "window size must be at least 2, got {}",
                self.size
            )));
        }
        if self.step == 0 || self.step > self.size {
            return Err(Error::InvalidArgument(format!(
                "window step must be in 1..={}, got {}",
                self.size, self.step
            )));
        }
        Ok(())
    }

    /// Row index at the window's center.
    pub fn center(&self, start: usize) -> usize {
        start + self.size / 2
    }
}

pub fn window_starts(rows: usize, spec: WindowSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    if spec.size > rows {
        return Err(Error::InvalidArgument(format!(
            "window of {} rows exceeds dataset of {rows} rows",
            spec.size
        )));
    }
    Ok((0..=rows - spec.size).step_by(spec.step).collect())
}
