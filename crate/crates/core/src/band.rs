//! Pointwise confidence bands and their CSV form.

use std::fmt;
use std::io::Write;

use crate::current_status::{self, CurrentStatusSample};
use crate::error::{Error, Result};
use crate::grenander::{self, WeightedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Lr,
    SmleBoot,
    SmleBootBiasCorr,
    DensityRatio,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lr => "lr",
            Method::SmleBoot => "smle-boot",
            Method::SmleBootBiasCorr => "smle-boot-biascorr",
            Method::DensityRatio => "density-ratio",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub t: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub estimate: Vec<f64>,
    pub method: Method,
    /// Bootstrap replicates dropped per point (zero studentizing denominator).
    pub excluded: Vec<usize>,
}

impl ConfidenceBand {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn covers(&self, i: usize, value: f64) -> bool {
        self.lower[i] <= value && value <= self.upper[i]
    }

    /// Writes `t,lower,upper,estimate,method` rows with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "lower", "upper", "estimate", "method"])
            .map_err(csv_err)?;
        for i in 0..self.len() {
            w.write_record([
                self.t[i].to_string(),
                self.lower[i].to_string(),
                self.upper[i].to_string(),
                self.estimate[i].to_string(),
                self.method.as_str().to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Validation(format!("csv: {other:?}")),
    }
}

/// LR intervals for `F(t)` at every grid point.
pub fn lr_band(sample: &CurrentStatusSample, t_grid: &[f64], level: f64, q: f64) -> Result<ConfidenceBand> {
    let mle = current_status::mle(sample)?;
    let mut band = empty(Method::Lr, t_grid);
    for &t in t_grid {
        let ci = current_status::lr_ci(sample, t, level, q)?;
        band.lower.push(ci.lower);
        band.upper.push(ci.upper);
        band.estimate.push(mle.eval(t)?);
    }
    Ok(band)
}

/// LR intervals for a decreasing density at every grid point.
pub fn lr_band_density(ws: &WeightedSample, t_grid: &[f64], level: f64, q: f64) -> Result<ConfidenceBand> {
    let fit = grenander::grenander_mle(ws)?;
    let mut band = empty(Method::Lr, t_grid);
    for &t in t_grid {
        let ci = grenander::lr_ci_density(ws, t, level, q)?;
        band.lower.push(ci.lower);
        band.upper.push(ci.upper);
        band.estimate.push(fit.eval(t)?);
    }
    Ok(band)
}

pub(crate) fn empty(method: Method, t_grid: &[f64]) -> ConfidenceBand {
    ConfidenceBand {
        t: t_grid.to_vec(),
        lower: Vec::with_capacity(t_grid.len()),
        upper: Vec::with_capacity(t_grid.len()),
        estimate: Vec::with_capacity(t_grid.len()),
        method,
        excluded: vec![0; t_grid.len()],
    }
}
