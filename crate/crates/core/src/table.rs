//! Real-valued functions on a product of two finite index sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense `rows × cols` table of finite reals.
///
/// Tables that live on the torus `(Z/NZ)^2` are square with `rows == cols == N`
/// and are indexed by residues; [`FunctionTable2::wrap`] makes shifted lookups
/// total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct FunctionTable2 {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    sup: f64,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    rows: usize,
    cols: usize,
    values: Vec<Vec<f64>>,
}

impl TryFrom<TableRepr> for FunctionTable2 {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        if r.values.len() != r.rows || r.values.iter().any(|row| row.len() != r.cols) {
            return Err(Error::Shape(format!(
                "declared {}x{} does not match the value rows",
                r.rows, r.cols
            )));
        }
        FunctionTable2::new(r.rows, r.cols, r.values.into_iter().flatten().collect())
    }
}

impl From<FunctionTable2> for TableRepr {
    fn from(t: FunctionTable2) -> Self {
        let values = t.values.chunks(t.cols.max(1)).map(<[f64]>::to_vec).collect();
        TableRepr { rows: t.rows, cols: t.cols, values }
    }
}

impl FunctionTable2 {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape("tables must be nonempty".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} table",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite table value {v}")));
        }
        let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self { rows, cols, values, sup })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    /// Square table on `(Z/NZ)^2`.
    pub fn torus(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_fn(n, n, f)
    }

    pub fn constant(rows: usize, cols: usize, c: f64) -> Result<Self> {
        Self::new(rows, cols, vec![c; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_torus(&self) -> bool {
        self.rows == self.cols
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Lookup with both coordinates reduced modulo the table dimensions.
    #[inline]
    pub fn wrap(&self, i: i64, j: i64) -> f64 {
        let i = i.rem_euclid(self.rows as i64) as usize;
        let j = j.rem_euclid(self.cols as i64) as usize;
        self.get(i, j)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.rows, self.cols, self.values.iter().map(|v| c * v).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.rows, self.cols, self.values.iter().map(|&v| f(v)).collect())
    }

    /// CSV with one line per row index and no header.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for i in 0..self.rows {
            w.write_record(self.row(i).iter().map(|v| format!("{v:?}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut values = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        for rec in rdr.records() {
            let rec = rec?;
            if cols.is_some_and(|c| c != rec.len()) {
                return Err(Error::Shape(format!("ragged CSV at row {}", rows + 1)));
            }
            cols = Some(rec.len());
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!("row {}: cannot parse {field:?}", rows + 1))
                })?;
                values.push(v);
            }
            rows += 1;
        }
        Self::new(rows, cols.unwrap_or(0), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let t = FunctionTable2::from_fn(2, 3, |i, j| i as f64 - 0.1 * j as f64).unwrap();
        let back = FunctionTable2::from_csv(&t.to_csv().unwrap()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn json_round_trip() {
        let t = FunctionTable2::from_fn(3, 2, |i, j| (i * j) as f64 / 7.0).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<FunctionTable2>(&s).unwrap(), t);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(FunctionTable2::new(2, 2, vec![0.0; 3]).is_err());
        assert!(FunctionTable2::from_csv("1,2\n3\n").is_err());
        assert!(FunctionTable2::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn wrap_reduces() {
        let t = FunctionTable2::torus(3, |i, j| (3 * i + j) as f64).unwrap();
        assert_eq!(t.wrap(-1, 4), t.get(2, 1));
        assert_eq!(t.sup_norm(), 8.0);
    }
}
