use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Field {
    pub fn render(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) => format_float(*v),
            Field::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_owned())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

/// 17 significant digits; every non-finite value is written as `nan`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".to_owned()
    }
}

pub fn parse_float(s: &str) -> Result<f64> {
    if s == "nan" {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| Error::data(format!("not a number: '{s}'")))
}

/// `<run_id>.<kind>.csv`, so concurrent runs never share a file.
pub fn run_file_name(run_id: &str, kind: &str) -> String {
    format!("{run_id}.{kind}.csv")
}

/// Append-only CSV writer with a fixed header.
pub struct MetricsSink {
    path: PathBuf,
    columns: usize,
    writer: csv::Writer<File>,
}

impl MetricsSink {
    /// Opens (creating parent-less files only) and writes the header unless the
    /// file already starts with the same one.
    pub fn open(path: &Path, header: &[&str]) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).read(true).open(path)?;
        let existing = BufReader::new(&file).lines().next().transpose()?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        match existing {
            None => {
                writer.write_record(header)?;
                writer.flush()?;
            }
            Some(line) => {
                let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(line.as_bytes());
                let found = r.records().next().transpose()?.unwrap_or_default();
                if found.iter().ne(header.iter().copied()) {
                    return Err(Error::data(format!(
                        "{} has header '{line}', expected '{}'",
                        path.display(),
                        header.join(",")
                    )));
                }
            }
        }
        Ok(MetricsSink {
            path: path.to_path_buf(),
            columns: header.len(),
            writer,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes and flushes one row.
    pub fn write_row(&mut self, row: &[Field]) -> Result<()> {
        if row.len() != self.columns {
            return Err(Error::arg(format!("row has {} fields, header has {}", row.len(), self.columns)));
        }
        self.writer.write_record(row.iter().map(Field::render))?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Reads a sink file back as header plus rows of raw strings.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}
