use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SERIES_SCHEMA_VERSION: u32 = 1;

/// Named observable columns sampled on a common time grid (units of 1/J).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    t_grid: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct SeriesDocument {
    schema_version: u32,
    #[serde(flatten)]
    series: TimeSeries,
}

impl TimeSeries {
    pub fn new(t_grid: Vec<f64>) -> Result<Self> {
        if t_grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("time grid must be finite".into()));
        }
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
        }
        Ok(TimeSeries {
            t_grid,
            columns: Vec::new(),
        })
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn columns(&self) -> &[(String, Vec<f64>)] {
        &self.columns
    }

    /// Appends a column, or replaces one with the same name.
    pub fn insert(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.t_grid.len() {
            return Err(Error::LengthMismatch {
                expected: self.t_grid.len(),
                got: values.len(),
            });
        }
        if name == "t" || name.is_empty() || name.contains(',') {
            return Err(Error::InvalidParameter(format!("invalid column name {name:?}")));
        }
        match self.columns.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = values,
            None => self.columns.push((name.to_string(), values)),
        }
        Ok(())
    }

    pub fn with(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        self.insert(name, values)?;
        Ok(self)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::InvalidParameter(format!("series has no column {name:?}")))
    }

    /// Keep only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let mut out = TimeSeries::new(self.t_grid.clone())?;
        for name in names {
            out.insert(name, self.column(name)?.to_vec())?;
        }
        Ok(out)
    }

    /// CSV with a header row `t,<columns...>`; numbers as `{:.16e}`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["t"];
        header.extend(self.column_names());
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for (i, t) in self.t_grid.iter().enumerate() {
            let row = std::iter::once(format_number(*t)).chain(self.columns.iter().map(|(_, v)| format_number(v[i])));
            w.write_record(row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header: Vec<String> = r
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Serde(format!("{}: first column must be t", path.display())));
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for record in r.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            for (c, field) in cols.iter_mut().zip(record.iter()) {
                let v = field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Serde(format!("{}: {field:?}: {e}", path.display())))?;
                c.push(v);
            }
        }
        let mut cols = cols.into_iter();
        let mut out = TimeSeries::new(cols.next().unwrap_or_default())?;
        for (name, values) in header[1..].iter().zip(cols) {
            out.insert(name, values)?;
        }
        Ok(out)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let doc = SeriesDocument {
            schema_version: SERIES_SCHEMA_VERSION,
            series: self.clone(),
        };
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &doc)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let doc: SeriesDocument = serde_json::from_reader(std::io::BufReader::new(file))?;
        if doc.schema_version != SERIES_SCHEMA_VERSION {
            return Err(Error::Serde(format!(
                "unsupported series schema version {}",
                doc.schema_version
            )));
        }
        let s = doc.series;
        let mut out = TimeSeries::new(s.t_grid)?;
        for (name, values) in s.columns {
            out.insert(&name, values)?;
        }
        Ok(out)
    }
}

pub(crate) fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Serde(format!("{}: {e}", path.display()))
}
