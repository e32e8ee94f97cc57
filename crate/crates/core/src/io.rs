//! CSV input readers. Lines starting with `#` are comments; a non-numeric first
//! row is taken as a header.

use std::io::Read;

use crate::current_status::CurrentStatusSample;
use crate::error::{Error, Result};
use crate::grenander::WeightedSample;

fn records<R: Read>(input: R) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push((line, v)),
            Err(_) if rows.is_empty() && k == 0 => {}
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: format!("{e} in {:?}", rec.iter().collect::<Vec<_>>()),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Degenerate("input contains no data rows".into()));
    }
    Ok(rows)
}

fn expect_columns(line: usize, row: &[f64], n: usize) -> Result<()> {
    if row.len() != n {
        return Err(Error::Parse {
            line,
            message: format!("expected {n} columns, found {}", row.len()),
        });
    }
    Ok(())
}

/// Rows `t,delta` with `delta ∈ {0, 1}`.
pub fn read_current_status<R: Read>(input: R) -> Result<CurrentStatusSample> {
    let mut pairs = Vec::new();
    for (line, row) in records(input)? {
        expect_columns(line, &row, 2)?;
        let d = row[1];
        if d != 0.0 && d != 1.0 {
            return Err(Error::Parse {
                line,
                message: format!("status indicator must be 0 or 1, found {d}"),
            });
        }
        if !row[0].is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("time {} is not finite", row[0]),
            });
        }
        pairs.push((row[0], d as u8));
    }
    CurrentStatusSample::from_pairs(pairs)
}

/// One observation per row (first column).
pub fn read_raw<R: Read>(input: R) -> Result<Vec<f64>> {
    records(input)?
        .into_iter()
        .map(|(line, row)| {
            expect_columns(line, &row, 1)?;
            if !(row[0].is_finite() && row[0] > 0.0) {
                return Err(Error::Parse {
                    line,
                    message: format!("observation {} must be finite and > 0", row[0]),
                });
            }
            Ok(row[0])
        })
        .collect()
}

/// Either raw observations (one column) or `t,weight` rows (two columns).
pub fn read_density<R: Read>(input: R) -> Result<WeightedSample> {
    let rows = records(input)?;
    if rows[0].1.len() == 1 {
        let raw = rows
            .into_iter()
            .map(|(line, row)| {
                expect_columns(line, &row, 1)?;
                Ok(row[0])
            })
            .collect::<Result<Vec<_>>>()?;
        return WeightedSample::from_raw(&raw);
    }
    let mut times = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        expect_columns(line, &row, 2)?;
        let w = row[1];
        if !(w >= 1.0 && w.fract() == 0.0 && w <= u32::MAX as f64) {
            return Err(Error::Parse {
                line,
                message: format!("weight {w} must be a positive integer"),
            });
        }
        times.push(row[0]);
        weights.push(w as u32);
    }
    WeightedSample::new(times, weights)
}
