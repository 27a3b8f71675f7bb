//! Matrix-valued time series and their CSV representation.
//!
//! Two layouts are accepted and detected from the header:
//!
//! * wide: `t,v_1_1,v_2_1,...,v_d1_d2` (one row per time step, column-major cells)
//! * long: `t,row,col,value` (one row per cell)
//!
//! `t` holds ISO-8601 dates when the series is dated, integer steps otherwise.
//! Row and column labels are 1-based.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::error::{CmarError, Result};
use crate::linalg::vec;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeries {
    d1: usize,
    d2: usize,
    values: Vec<DMatrix<f64>>,
    index: Option<Vec<NaiveDate>>,
}

impl MatrixSeries {
    pub fn new(values: Vec<DMatrix<f64>>) -> Result<Self> {
        let (d1, d2) = values
            .first()
            .map(|m| m.shape())
            .ok_or_else(|| CmarError::Shape("empty series".into()))?;
        if let Some((t, m)) = values.iter().enumerate().find(|(_, m)| m.shape() != (d1, d2)) {
            return Err(CmarError::Shape(format!(
                "observation {t} is {}x{}, expected {d1}x{d2}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(MatrixSeries {
            d1,
            d2,
            values,
            index: None,
        })
    }

    pub fn with_index(values: Vec<DMatrix<f64>>, index: Vec<NaiveDate>) -> Result<Self> {
        let mut s = Self::new(values)?;
        if index.len() != s.len() {
            return Err(CmarError::Shape(format!(
                "{} dates for {} observations",
                index.len(),
                s.len()
            )));
        }
        s.index = Some(index);
        Ok(s)
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn index(&self) -> Option<&[NaiveDate]> {
        self.index.as_deref()
    }

    pub fn get(&self, t: usize) -> &DMatrix<f64> {
        &self.values[t]
    }

    /// Observations `range`, keeping the matching dates.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(CmarError::Shape(format!(
                "slice {:?} out of bounds for length {}",
                range,
                self.len()
            )));
        }
        Ok(MatrixSeries {
            d1: self.d1,
            d2: self.d2,
            values: self.values[range.clone()].to_vec(),
            index: self.index.as_ref().map(|ix| ix[range].to_vec()),
        })
    }

    /// `vec(X_t)` for every `t`.
    pub fn vectorized(&self) -> Vec<DVector<f64>> {
        self.values.iter().map(vec).collect()
    }

    pub fn transposed(&self) -> Self {
        MatrixSeries {
            d1: self.d2,
            d2: self.d1,
            values: self.values.iter().map(|m| m.transpose()).collect(),
            index: self.index.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        MatrixSeries {
            values: self.values.iter().map(|m| m * c).collect(),
            ..self.clone()
        }
    }

    /// Applies `f` to every observation; the shape may change.
    pub fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Result<Self> {
        let values = self.values.iter().map(f).collect();
        let mut s = Self::new(values)?;
        s.index = self.index.clone();
        Ok(s)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        for j in 0..self.d2 {
            for i in 0..self.d1 {
                header.push(format!("v_{}_{}", i + 1, j + 1));
            }
        }
        out.write_record(&header)?;
        for (t, m) in self.values.iter().enumerate() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(match &self.index {
                Some(ix) => ix[t].format("%Y-%m-%d").to_string(),
                None => (t + 1).to_string(),
            });
            rec.extend(m.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| CmarError::Format(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
        if header.first().map(String::as_str) != Some("t") {
            return Err(CmarError::Format(format!(
                "first column must be `t`, got {:?}",
                header.first()
            )));
        }
        if header.len() == 4 && header[1] == "row" && header[2] == "col" && header[3] == "value" {
            read_long(&records)
        } else {
            read_wide(&header, &records)
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn parse_value(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| CmarError::Format(format!("not a number: {s:?}")))
}

/// Parses the `t` column: all dates, or all integers.
fn parse_times(labels: &[String]) -> Result<Option<Vec<NaiveDate>>> {
    if labels.iter().all(|l| l.parse::<i64>().is_ok()) {
        return Ok(None);
    }
    labels
        .iter()
        .map(|l| {
            NaiveDate::parse_from_str(l, "%Y-%m-%d").map_err(|_| CmarError::Format(format!("bad time label {l:?}")))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn parse_cell_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("v_")?;
    let (i, j) = rest.split_once('_')?;
    let (i, j) = (i.parse::<usize>().ok()?, j.parse::<usize>().ok()?);
    (i >= 1 && j >= 1).then_some((i - 1, j - 1))
}

fn read_wide(header: &[String], records: &[csv::StringRecord]) -> Result<MatrixSeries> {
    let cells: Vec<(usize, usize)> = header[1..]
        .iter()
        .map(|h| {
            parse_cell_name(h).ok_or_else(|| {
                CmarError::Format(format!(
                    "unrecognised column {h:?}; expected `t,row,col,value` or `t,v_1_1,...`"
                ))
            })
        })
        .collect::<Result<_>>()?;
    let d1 = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let d2 = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    if cells.len() != d1 * d2 {
        return Err(CmarError::Format(format!(
            "{} cell columns do not fill a {d1}x{d2} matrix",
            cells.len()
        )));
    }
    let mut seen = vec![false; d1 * d2];
    for &(i, j) in &cells {
        if std::mem::replace(&mut seen[i + j * d1], true) {
            return Err(CmarError::Format(format!("duplicate column v_{}_{}", i + 1, j + 1)));
        }
    }
    let mut labels = Vec::with_capacity(records.len());
    let mut values = Vec::with_capacity(records.len());
    for rec in records {
        if rec.len() != header.len() {
            return Err(CmarError::Format(format!(
                "row has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        labels.push(rec[0].to_string());
        let mut m = DMatrix::zeros(d1, d2);
        for (c, &(i, j)) in cells.iter().enumerate() {
            m[(i, j)] = parse_value(&rec[c + 1])?;
        }
        values.push(m);
    }
    finish(values, &labels)
}

fn read_long(records: &[csv::StringRecord]) -> Result<MatrixSeries> {
    let mut order: Vec<String> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<Vec<(usize, usize, f64)>> = Vec::new();
    for rec in records {
        if rec.len() != 4 {
            return Err(CmarError::Format("long-format row needs 4 fields".into()));
        }
        let t = rec[0].to_string();
        let idx = *slot.entry(t.clone()).or_insert_with(|| {
            order.push(t);
            cells.push(Vec::new());
            cells.len() - 1
        });
        let i: usize = rec[1]
            .parse()
            .map_err(|_| CmarError::Format(format!("bad row label {:?}", &rec[1])))?;
        let j: usize = rec[2]
            .parse()
            .map_err(|_| CmarError::Format(format!("bad col label {:?}", &rec[2])))?;
        if i == 0 || j == 0 {
            return Err(CmarError::Format("row/col labels are 1-based".into()));
        }
        cells[idx].push((i - 1, j - 1, parse_value(&rec[3])?));
    }
    let d1 = cells.iter().flatten().map(|c| c.0 + 1).max().unwrap_or(0);
    let d2 = cells.iter().flatten().map(|c| c.1 + 1).max().unwrap_or(0);
    let mut values = Vec::with_capacity(cells.len());
    for (t, group) in order.iter().zip(&cells) {
        let mut m = DMatrix::from_element(d1, d2, f64::NAN);
        for &(i, j, v) in group {
            if !m[(i, j)].is_nan() {
                return Err(CmarError::Format(format!(
                    "duplicate cell ({}, {}) at t={t}",
                    i + 1,
                    j + 1
                )));
            }
            m[(i, j)] = v;
        }
        if m.iter().any(|v| v.is_nan()) {
            return Err(CmarError::Format(format!("incomplete matrix at t={t}")));
        }
        values.push(m);
    }
    finish(values, &order)
}

fn finish(values: Vec<DMatrix<f64>>, labels: &[String]) -> Result<MatrixSeries> {
    let index = parse_times(labels)?;
    let mut s = MatrixSeries::new(values)?;
    s.index = index;
    Ok(s)
}
