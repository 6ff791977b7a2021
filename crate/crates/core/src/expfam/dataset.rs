use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// `n × k` observations paired with strictly positive weights `u(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDataset {
    observations: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl WeightedDataset {
    pub fn new(observations: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Domain("dataset has no observations".into()));
        }
        if observations.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} observations but {} weights",
                observations.len(),
                weights.len()
            )));
        }
        let k = observations[0].len();
        if k == 0 {
            return Err(Error::Domain("observations have no components".into()));
        }
        for (i, row) in observations.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Domain(format!(
                    "row {i} has {} components, expected {k}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "row {i} contains non-finite value {v}"
                )));
            }
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Domain(format!(
                "weight {w} of row {i} is not finite and positive"
            )));
        }
        Ok(WeightedDataset {
            observations,
            weights,
        })
    }

    /// All weights equal to one.
    pub fn unweighted(observations: Vec<Vec<f64>>) -> Result<Self> {
        let n = observations.len();
        WeightedDataset::new(observations, vec![1.0; n])
    }

    /// Same observations under new weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        WeightedDataset::new(self.observations.clone(), weights)
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn k(&self) -> usize {
        self.observations[0].len()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.observations.iter().map(Vec::as_slice)
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.observations.iter().map(|row| row[j]).collect()
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// CSV with header `x1,…,xk,u`. Values use the shortest representation
    /// that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.k()).map(|j| format!("x{j}")).collect();
        header.push("u".into());
        out.write_record(&header)?;
        for (row, u) in self.observations.iter().zip(&self.weights) {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(u.to_string());
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let header = input.headers()?.clone();
        if header.iter().next_back() != Some("u") {
            return Err(Error::Schema(
                "last column of a weighted dataset must be `u`".into(),
            ));
        }
        let mut observations = Vec::new();
        let mut weights = Vec::new();
        for (line, record) in input.records().enumerate() {
            let record = record?;
            let mut values = record
                .iter()
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| {
                        Error::Schema(format!("row {}: `{f}` is not a number", line + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            weights.push(values.pop().unwrap_or(f64::NAN));
            observations.push(values);
        }
        WeightedDataset::new(observations, weights)
    }
}
