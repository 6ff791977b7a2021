//! Mean-order sweeps: one Weibull MWLE per grid point and column, under a
//! Lehmer policy (order β, shape 1) or a Hölder policy (order = shape k).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::families::{weibull_model, WeibullSpec};
use crate::mwle::{fit, FitOptions, WeightPolicy};
use crate::pipeline::format_significant;

/// Relative slack allowed when checking that a column never decreases.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Lehmer,
    Holder,
}

impl SweepMode {
    /// Name of the swept parameter.
    pub fn parameter(&self) -> &'static str {
        match self {
            SweepMode::Lehmer => "beta",
            SweepMode::Holder => "k",
        }
    }

    pub fn default_grid(&self) -> Grid {
        match self {
            SweepMode::Lehmer => Grid::new(-3.0, 4.0, 0.1),
            SweepMode::Holder => Grid::new(0.1, 6.0, 0.1),
        }
        .expect("default grids are valid")
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lehmer" => Ok(SweepMode::Lehmer),
            "holder" | "hölder" => Ok(SweepMode::Holder),
            other => Err(Error::Config(format!("unknown sweep mode `{other}`"))),
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::Lehmer => "lehmer",
            SweepMode::Holder => "holder",
        })
    }
}

/// Evenly spaced, strictly ascending orders.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(Vec<f64>);

impl Grid {
    /// `start, start + step, …` up to `stop` inclusive. Points are rounded to
    /// 12 significant digits so that `0.1 * 3` prints as `0.3`.
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::Config(format!("grid step {step} must be positive")));
        }
        if stop < start {
            return Err(Error::Config(format!(
                "grid stop {stop} is below start {start}"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(Error::Config(format!(
                "grid has {count} points, more than 10^6"
            )));
        }
        let points = (0..count)
            .map(|i| {
                let v = start + i as f64 * step;
                let r: f64 = format_significant(v, 12).parse().unwrap_or(v);
                if r.abs() < step * 1e-9 {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        Grid::from_points(points)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("grid points must be finite".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid must be strictly ascending".into()));
        }
        Ok(Grid(points))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// `start:stop:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("grid `{s}` is not start:stop:step")));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("grid `{s}`: `{p}` is not a number")))
        };
        Grid::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub order: f64,
    /// `None` marks a gap: the fit failed at this order.
    pub estimates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: String,
    /// Column labels; the CSV header prefixes each with `lambda_`.
    pub series: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Labels of the three election columns.
pub fn party_series() -> Vec<String> {
    vec!["dem".into(), "rep".into(), "oth".into()]
}

/// Scale estimates of every column at one order.
pub fn fit_at(mode: SweepMode, order: f64, observations: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = observations.first().map_or(0, Vec::len);
    let (model, policy) = match mode {
        SweepMode::Lehmer => (
            weibull_model(&WeibullSpec::uniform(1.0, k))?,
            WeightPolicy::lehmer(vec![order]),
        ),
        SweepMode::Holder => {
            if order <= 0.0 {
                return Err(Error::Domain(format!(
                    "Hölder sweep needs k > 0, got {order}"
                )));
            }
            (
                weibull_model(&WeibullSpec::uniform(order, k))?,
                WeightPolicy::holder(),
            )
        }
    };
    Ok(fit(&model, observations, &policy, &FitOptions::default())?.theta_hat)
}

/// Fits every grid point in parallel; rows come back in grid order. A failed
/// point becomes a gap and the sweep continues.
pub fn run_sweep(
    mode: SweepMode,
    grid: &Grid,
    observations: &[Vec<f64>],
    series: Vec<String>,
) -> Result<SweepTable> {
    if observations.is_empty() {
        return Err(Error::Domain("sweep needs at least one observation".into()));
    }
    if series.len() != observations[0].len() {
        return Err(Error::Config(format!(
            "{} series labels for {} columns",
            series.len(),
            observations[0].len()
        )));
    }
    if mode == SweepMode::Holder && grid.points()[0] <= 0.0 {
        return Err(Error::Config(
            "Hölder grid must be restricted to k > 0".into(),
        ));
    }
    let rows = grid
        .points()
        .par_iter()
        .map(|&order| {
            let estimates = match fit_at(mode, order, observations) {
                Ok(e) if e.iter().all(|v| v.is_finite() && *v > 0.0) => Some(e),
                Ok(e) => {
                    log::warn!(
                        "{mode} order {order}: non-positive estimate {e:?}, recorded as a gap"
                    );
                    None
                }
                Err(err) => {
                    log::warn!("{mode} order {order}: {err}; recorded as a gap");
                    None
                }
            };
            SweepRow { order, estimates }
        })
        .collect();
    let table = SweepTable {
        parameter: mode.parameter().into(),
        series,
        rows,
    };
    table.validate()?;
    Ok(table)
}

impl SweepTable {
    /// Ascending grid, finite positive estimates, and every column
    /// non-decreasing across the non-gap rows.
    pub fn validate(&self) -> Result<()> {
        if self.rows.windows(2).any(|w| w[1].order <= w[0].order) {
            return Err(Error::Numeric(
                "sweep grid is not strictly ascending".into(),
            ));
        }
        let mut previous: Option<&SweepRow> = None;
        for row in &self.rows {
            let Some(est) = &row.estimates else { continue };
            if est.len() != self.series.len() {
                return Err(Error::Numeric(format!(
                    "order {}: {} estimates for {} series",
                    row.order,
                    est.len(),
                    self.series.len()
                )));
            }
            if est.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Numeric(format!(
                    "order {}: estimate not positive",
                    row.order
                )));
            }
            if let Some(prev) = previous {
                let prev_est = prev.estimates.as_ref().expect("previous rows are not gaps");
                for (j, (a, b)) in prev_est.iter().zip(est).enumerate() {
                    if *b < a * (1.0 - MONOTONE_SLACK) {
                        return Err(Error::Numeric(format!(
                            "lambda_{} decreases from {a} at {} to {b} at {}",
                            self.series[j], prev.order, row.order
                        )));
                    }
                }
            }
            previous = Some(row);
        }
        Ok(())
    }

    pub fn gaps(&self) -> usize {
        self.rows.iter().filter(|r| r.estimates.is_none()).count()
    }

    /// Estimates of series `j` as `(order, λ)`, skipping gaps.
    pub fn column(&self, j: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.estimates.as_ref().map(|e| (r.order, e[j])))
            .collect()
    }

    /// `order,lambda_<series>…`; gaps leave the estimate fields empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["order".to_string()];
        header.extend(self.series.iter().map(|s| format!("lambda_{s}")));
        out.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.order.to_string()];
            match &row.estimates {
                Some(e) => record.extend(e.iter().map(f64::to_string)),
                None => record.extend(self.series.iter().map(|_| String::new())),
            }
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, parameter: &str) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let headers = input.headers()?.clone();
        if headers.get(0) != Some("order") || headers.len() < 2 {
            return Err(Error::Schema(
                "sweep CSV must start with an `order` column".into(),
            ));
        }
        let series = headers
            .iter()
            .skip(1)
            .map(|h| {
                h.strip_prefix("lambda_")
                    .map(str::to_string)
                    .ok_or_else(|| Error::Schema(format!("column `{h}` lacks the lambda_ prefix")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for (i, record) in input.records().enumerate() {
            let record = record?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Schema(format!("row {}: `{s}` is not a number", i + 1)))
            };
            let order = num(&record[0])?;
            let fields: Vec<&str> = record.iter().skip(1).collect();
            let estimates = if fields.iter().all(|f| f.trim().is_empty()) {
                None
            } else {
                Some(fields.iter().map(|f| num(f)).collect::<Result<Vec<_>>>()?)
            };
            rows.push(SweepRow { order, estimates });
        }
        Ok(SweepTable {
            parameter: parameter.into(),
            series,
            rows,
        })
    }
}
