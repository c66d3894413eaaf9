//! CSV ingestion and the CSV files the command line writes.
//!
//! Input files are comma separated UTF-8 with a header row. When the first
//! cell of the first data row is not a number, the whole first column is
//! treated as a timestamp and skipped; every other column is a channel.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use hcfreq_core::data::Dataset;
use hcfreq_core::Tensor;

/// Ingestion failure, with 1-based line and column where one applies.
#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing header row")]
    NoHeader,
    #[error("header has no channel columns")]
    NoChannels,
    #[error("no data rows")]
    NoRows,
    #[error("line {line}: expected {expected} cells, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {column} ({name}): {value:?} is not a finite number")]
    NotNumeric {
        line: u64,
        column: usize,
        name: String,
        value: String,
    },
    #[error("{0}")]
    Dataset(#[from] hcfreq_core::Error),
}

/// A parsed file: the dataset plus the skipped timestamp column, if any.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub dataset: Dataset,
    pub timestamps: Option<Vec<String>>,
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read_csv<R: Read>(name: &str, reader: R) -> Result<CsvTable, CsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_error(&e))?,
        None => return Err(CsvError::NoHeader),
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let mut skip: Option<bool> = None;
    let mut values = Vec::new();
    let mut stamps = Vec::new();
    let mut rows = 0usize;
    for rec in records {
        let rec = rec.map_err(|e| parse_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(CsvError::Ragged {
                line,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let skip = *skip.get_or_insert_with(|| parse_cell(&rec[0]).is_none());
        let first = usize::from(skip);
        if first == header.len() {
            return Err(CsvError::NoChannels);
        }
        if skip {
            stamps.push(rec[0].trim().to_string());
        }
        for c in first..rec.len() {
            let v = parse_cell(&rec[c]).ok_or_else(|| CsvError::NotNumeric {
                line,
                column: c + 1,
                name: header[c].clone(),
                value: rec[c].to_string(),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let skip = skip.ok_or(CsvError::NoRows)?;
    let names: Vec<String> = header[usize::from(skip)..].to_vec();
    let values = Tensor::from_vec(&[rows, names.len()], values)?;
    Ok(CsvTable {
        dataset: Dataset::new(name, values, names)?,
        timestamps: skip.then_some(stamps),
    })
}

fn parse_error(e: &csv::Error) -> CsvError {
    CsvError::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Loads a CSV file; the dataset is named after the file stem.
pub fn load_csv(path: &Path) -> Result<CsvTable, CsvError> {
    let file = File::open(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    read_csv(name, std::io::BufReader::new(file))
}

/// Writes a dataset in the input format, optionally with a timestamp column.
pub fn write_dataset<W: Write>(ds: &Dataset, timestamps: Option<&[String]>, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = Vec::new();
    if timestamps.is_some() {
        header.push("date");
    }
    header.extend(ds.channel_names.iter().map(String::as_str));
    w.write_record(&header)?;
    let d = ds.channels();
    for (i, row) in ds.values.data().chunks(d).enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(d + 1);
        if let Some(ts) = timestamps {
            rec.push(ts[i].clone());
        }
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
