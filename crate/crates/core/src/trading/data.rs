//! Reader for the 25-portfolio daily files of the Fama-French data library.
//!
//! The files carry free-text preambles and several stacked blocks (value
//! weighted, equal weighted, ...). Only the first block is read. Column labels
//! such as `LoBM LoOP`, `BM2 OP3` or `SMALL HiBM` give the two quintiles of
//! each portfolio; rows of the panel follow operating profitability when it is
//! present, columns the other sort.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{CmarError, Result};
use crate::series::MatrixSeries;

/// How the numeric cells are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelValues {
    /// Values are already price levels.
    Levels,
    /// Simple returns, compounded into levels starting from 1.
    Returns,
    /// Simple returns in percent, the convention of the data library.
    PercentReturns,
}

/// Parsed panel and the dates of rows dropped for missing values.
#[derive(Debug, Clone)]
pub struct FfPanel {
    pub series: MatrixSeries,
    pub dropped: Vec<NaiveDate>,
}

const EXPECTED: &str = "expected 25 labels of the form `LoBM LoOP`, `BM1 OP2`, `ME3 BM4` or `SMALL HiBM`";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sort {
    Size,
    BookToMarket,
    Profitability,
}

fn parse_part(p: &str) -> Option<(Sort, usize)> {
    let sort_of = |s: &str| match s {
        "ME" => Some(Sort::Size),
        "BM" => Some(Sort::BookToMarket),
        "OP" => Some(Sort::Profitability),
        _ => None,
    };
    match p {
        "SMALL" => return Some((Sort::Size, 1)),
        "BIG" => return Some((Sort::Size, 5)),
        _ => {}
    }
    if let Some(rest) = p.strip_prefix("Lo") {
        return sort_of(rest).map(|s| (s, 1));
    }
    if let Some(rest) = p.strip_prefix("Hi") {
        return sort_of(rest).map(|s| (s, 5));
    }
    if p.len() == 3 {
        let q = p[2..].parse::<usize>().ok().filter(|q| (1..=5).contains(q))?;
        return sort_of(&p[..2]).map(|s| (s, q));
    }
    None
}

fn parse_label(label: &str) -> Option<[(Sort, usize); 2]> {
    let parts: Vec<&str> = label.split_whitespace().collect();
    if parts.len() != 2 {
        return None;
    }
    let a = parse_part(parts[0])?;
    let b = parse_part(parts[1])?;
    (a.0 != b.0).then_some([a, b])
}

/// Maps 25 labels to `(row, col)` cells, profitability on the rows.
fn layout(labels: &[&str]) -> Result<Vec<(usize, usize)>> {
    if labels.len() != 25 {
        return Err(CmarError::Format(format!(
            "found {} portfolio columns; {EXPECTED}",
            labels.len()
        )));
    }
    let parsed: Vec<[(Sort, usize); 2]> = labels
        .iter()
        .map(|l| parse_label(l).ok_or_else(|| CmarError::Format(format!("unknown column {l:?}; {EXPECTED}"))))
        .collect::<Result<_>>()?;
    let first = parsed[0];
    let row_sort = if first.iter().any(|p| p.0 == Sort::Profitability) {
        Sort::Profitability
    } else {
        first[0].0
    };
    let col_sort = first
        .iter()
        .map(|p| p.0)
        .find(|&s| s != row_sort)
        .expect("two distinct sorts");
    let mut seen = [[false; 5]; 5];
    let mut cells = Vec::with_capacity(25);
    for (label, p) in labels.iter().zip(&parsed) {
        let find = |s: Sort| p.iter().find(|x| x.0 == s).map(|x| x.1 - 1);
        let (Some(r), Some(c)) = (find(row_sort), find(col_sort)) else {
            return Err(CmarError::Format(format!("column {label:?} mixes sorts; {EXPECTED}")));
        };
        if std::mem::replace(&mut seen[r][c], true) {
            return Err(CmarError::Format(format!("duplicate portfolio column {label:?}")));
        }
        cells.push((r, c));
    }
    Ok(cells)
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y%m%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
        .ok()
}

fn is_missing(v: f64) -> bool {
    (v + 99.99).abs() < 1e-9 || (v + 999.0).abs() < 1e-9
}

/// Parses the first data block of a 25-portfolio file.
pub fn parse_ff_panel(text: &str, values: PanelValues) -> Result<FfPanel> {
    let mut lines = text.lines().map(str::trim_end);
    let header = loop {
        let Some(line) = lines.next() else {
            return Err(CmarError::Format(format!("no portfolio header found; {EXPECTED}")));
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() >= 26 && fields[1..].iter().any(|f| parse_label(f).is_some()) {
            break fields;
        }
    };
    let cells = layout(&header[1..])?;

    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some(date) = fields.first().and_then(|f| parse_date(f)) else {
            break;
        };
        if fields.len() != 26 {
            return Err(CmarError::Format(format!(
                "{date}: expected 26 fields, found {}",
                fields.len()
            )));
        }
        let vals: Vec<f64> = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| CmarError::Format(format!("{date}: cannot parse value {f:?}")))
            })
            .collect::<Result<_>>()?;
        if vals.iter().any(|&v| is_missing(v) || !v.is_finite()) {
            dropped.push(date);
            continue;
        }
        if dates.last().is_some_and(|&d| d >= date) {
            return Err(CmarError::Format(format!("dates are not increasing at {date}")));
        }
        dates.push(date);
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(CmarError::Format("no data rows after the header".into()));
    }

    let scale = match values {
        PanelValues::PercentReturns => 0.01,
        _ => 1.0,
    };
    let mut level = [1.0_f64; 25];
    let mats = rows
        .iter()
        .map(|vals| {
            let mut m = DMatrix::zeros(5, 5);
            for (j, (&v, &(r, c))) in vals.iter().zip(&cells).enumerate() {
                m[(r, c)] = match values {
                    PanelValues::Levels => v,
                    _ => {
                        level[j] *= 1.0 + v * scale;
                        level[j]
                    }
                };
            }
            m
        })
        .collect();
    Ok(FfPanel {
        series: MatrixSeries::with_index(mats, dates)?,
        dropped,
    })
}

pub fn load_ff_panel(path: impl AsRef<Path>, values: PanelValues) -> Result<FfPanel> {
    let text = std::fs::read_to_string(path)?;
    parse_ff_panel(&text, values)
}

/// Writes a dated 5×5 panel in the library layout (`YYYYMMDD,BM1 OP1,...`),
/// rows as profitability and columns as book-to-market quintiles.
pub fn write_ff_panel<W: Write>(series: &MatrixSeries, mut w: W) -> Result<()> {
    if series.d1() != 5 || series.d2() != 5 {
        return Err(CmarError::Shape("the portfolio layout needs a 5x5 panel".into()));
    }
    let dates = series
        .index()
        .ok_or_else(|| CmarError::Format("the portfolio layout needs dated rows".into()))?;
    let mut header = String::new();
    for r in 0..5 {
        for c in 0..5 {
            header.push_str(&format!(",BM{} OP{}", c + 1, r + 1));
        }
    }
    writeln!(w, "{header}")?;
    for (date, m) in dates.iter().zip(series.values()) {
        let mut line = date.format("%Y%m%d").to_string();
        for r in 0..5 {
            for c in 0..5 {
                line.push_str(&format!(",{}", m[(r, c)]));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
