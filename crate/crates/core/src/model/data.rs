use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A response vector plus named numeric covariate columns of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    response_name: String,
    response: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

impl Dataset {
    pub fn new(response_name: impl Into<String>, response: Vec<f64>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = response.len();
        if n == 0 {
            return Err(Error::Data("empty response".into()));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("response has a non-finite value at row {}", i + 1)));
        }
        for (idx, (name, col)) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Data(format!("column '{name}' has {} rows, response has {n}", col.len())));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("column '{name}' has a non-finite value at row {}", i + 1)));
            }
            if columns[..idx].iter().any(|(other, _)| other == name) {
                return Err(Error::Data(format!("duplicate column '{name}'")));
            }
        }
        Ok(Self { response_name: response_name.into(), response, columns })
    }

    /// Reads a comma-separated file with a header row; `response` names the
    /// response column, every other column becomes a covariate.
    pub fn from_csv_path(path: impl AsRef<Path>, response: &str) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(file, response)
    }

    pub fn from_csv_reader<R: Read>(reader: R, response: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> =
            rdr.headers().map_err(|e| Error::Data(e.to_string()))?.iter().map(str::to_owned).collect();
        let resp_idx = headers
            .iter()
            .position(|h| h == response)
            .ok_or_else(|| Error::Data(format!("response column '{response}' not found")))?;
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Data(e.to_string()))?;
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Data(format!("row {}, column '{}': cannot parse '{field}' as a number", row + 1, headers[j]))
                })?;
                cols[j].push(v);
            }
        }
        let y = std::mem::take(&mut cols[resp_idx]);
        let covariates =
            headers.into_iter().zip(cols).enumerate().filter(|(j, _)| *j != resp_idx).map(|(_, c)| c).collect();
        Self::new(response, y, covariates)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
            .ok_or_else(|| Error::Data(format!("covariate column '{name}' not found")))
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn with_response(&self, response: Vec<f64>) -> Result<Self> {
        Self::new(self.response_name.clone(), response, self.columns.clone())
    }
}
