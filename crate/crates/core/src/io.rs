//! File formats: network matrices as JSON, samples as JSON Lines or
//! CSV, outcome tables as CSV, and test reports as JSON.
//!
//! JSON Lines is the full-fidelity sample format — every field of
//! [`SampleRecord`] survives a round trip. The CSV sample format is a
//! lossy tabular export (`z_1,...,z_n,prob`) for spreadsheet work.
//! Numbers are written in shortest round-trip form, so values read back
//! bit-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::{ModeMultiset, OutcomeTable};
use crate::error::Error;
use crate::linalg::{Complex64, ComplexMatrix};
use crate::sampler::SampleRecord;
use crate::verify::TestReport;
use crate::Result;

/// Optional generation metadata stored alongside a matrix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    /// Seed the matrix was generated from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Largest deviation from orthonormality at generation time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthonormality_deviation: Option<f64>,
    /// Free-form description of how the matrix was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    /// Row-major entries as `[re, im]` pairs.
    data: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<MatrixMeta>,
}

/// Writes a matrix as JSON: `{"rows", "cols", "data": [[re, im], ...]}`
/// in row-major order, plus an optional `"meta"` block.
pub fn write_matrix<W: Write>(
    mut writer: W,
    a: &ComplexMatrix,
    meta: Option<MatrixMeta>,
) -> Result<()> {
    let file = MatrixFile {
        rows: a.rows(),
        cols: a.cols(),
        data: (0..a.rows())
            .flat_map(|i| (0..a.cols()).map(move |j| (i, j)))
            .map(|(i, j)| {
                let v = a.get(i, j);
                [v.re, v.im]
            })
            .collect(),
        meta,
    };
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writeln!(writer)?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix`], validating shape and
/// finiteness.
pub fn read_matrix<R: Read>(reader: R) -> Result<(ComplexMatrix, Option<MatrixMeta>)> {
    let file: MatrixFile = serde_json::from_reader(reader)?;
    let data: Vec<Complex64> = file
        .data
        .iter()
        .map(|&[re, im]| Complex64::new(re, im))
        .collect();
    Ok((ComplexMatrix::new(file.rows, file.cols, data)?, file.meta))
}

pub fn save_matrix(
    path: impl AsRef<Path>,
    a: &ComplexMatrix,
    meta: Option<MatrixMeta>,
) -> Result<()> {
    write_matrix(BufWriter::new(File::create(path)?), a, meta)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<(ComplexMatrix, Option<MatrixMeta>)> {
    read_matrix(BufReader::new(File::open(path)?))
}

/// Writes samples as JSON Lines: one record object per line.
pub fn write_samples_jsonl<W: Write>(mut writer: W, records: &[SampleRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Writes samples as CSV with header `z_1,...,z_n,prob`. The `prob`
/// field is left empty for records without a probability. All records
/// must have the same photon count.
pub fn write_samples_csv<W: Write>(writer: W, records: &[SampleRecord]) -> Result<()> {
    let n = match records.first() {
        Some(first) => first.z.len(),
        None => return Err(Error::invalid("no samples to write")),
    };
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=n).map(|j| format!("z_{j}")).collect();
    header.push("prob".to_string());
    wtr.write_record(&header)?;
    for record in records {
        if record.z.len() != n {
            return Err(Error::invalid(format!(
                "record {:?} has {} photons, expected {n}",
                record.z.values(),
                record.z.len()
            )));
        }
        let mut row: Vec<String> = record.z.values().iter().map(|v| v.to_string()).collect();
        row.push(record.probability.map(|p| p.to_string()).unwrap_or_default());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads JSON Lines samples with full fidelity.
pub fn read_samples<R: Read>(mut reader: R) -> Result<Vec<SampleRecord>> {
    let mut content = String::new();
    reader.read_to_string(&mut content)?;
    let mut records = Vec::new();
    for line in content.lines() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line)?);
    }
    if records.is_empty() {
        return Err(Error::invalid("no samples found"));
    }
    Ok(records)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    read_samples(BufReader::new(File::open(path)?))
}

/// Reads just the outcomes from a sample file, accepting either format:
/// content starting with `{` parses as JSON Lines, anything else as
/// CSV. CSV outcome values may appear in any order within a row.
pub fn read_sample_outcomes<R: Read>(mut reader: R) -> Result<Vec<ModeMultiset>> {
    let mut content = String::new();
    reader.read_to_string(&mut content)?;
    if content.trim().is_empty() {
        return Err(Error::invalid("sample file is empty"));
    }
    if content.trim_start().starts_with('{') {
        let records = read_samples(content.as_bytes())?;
        return Ok(records.into_iter().map(|r| r.z).collect());
    }
    let mut rdr = csv::Reader::from_reader(content.as_bytes());
    let z_columns = mode_columns(rdr.headers()?)?;
    let mut outcomes = Vec::new();
    for row in rdr.records() {
        let row = row?;
        outcomes.push(parse_modes(&row, &z_columns)?);
    }
    if outcomes.is_empty() {
        return Err(Error::invalid("no samples found"));
    }
    Ok(outcomes)
}

pub fn load_sample_outcomes(path: impl AsRef<Path>) -> Result<Vec<ModeMultiset>> {
    read_sample_outcomes(BufReader::new(File::open(path)?))
}

/// Indices of the `z_1,...,z_n` header columns, which must appear in
/// order starting at the first column.
fn mode_columns(headers: &csv::StringRecord) -> Result<Vec<usize>> {
    let mut columns = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        if name.starts_with("z_") {
            if idx != columns.len() || name != format!("z_{}", idx + 1) {
                return Err(Error::invalid(format!(
                    "expected header column z_{} at position {}, found {name:?}",
                    columns.len() + 1,
                    idx + 1
                )));
            }
            columns.push(idx);
        }
    }
    if columns.is_empty() {
        return Err(Error::invalid("no z_1,...,z_n columns in CSV header"));
    }
    Ok(columns)
}

fn parse_modes(row: &csv::StringRecord, z_columns: &[usize]) -> Result<ModeMultiset> {
    let mut values = Vec::with_capacity(z_columns.len());
    for &idx in z_columns {
        let field = row.get(idx).ok_or_else(|| {
            Error::invalid(format!("row {row:?} is missing column {}", idx + 1))
        })?;
        let value: usize = field
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse mode index from {field:?}")))?;
        values.push(value);
    }
    values.sort_unstable();
    ModeMultiset::from_values(values)
}

/// Writes an outcome table as CSV with header
/// `z_1,...,z_n,probability`, one row per outcome in table order.
pub fn write_table_csv<W: Write>(writer: W, table: &OutcomeTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=table.n()).map(|j| format!("z_{j}")).collect();
    header.push("probability".to_string());
    wtr.write_record(&header)?;
    for (z, p) in table.entries() {
        let mut row: Vec<String> = z.values().iter().map(|v| v.to_string()).collect();
        row.push(p.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an outcome table written by [`write_table_csv`]. The mode
/// count is inferred from the largest occupied mode.
pub fn read_table_csv<R: Read>(reader: R) -> Result<OutcomeTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let z_columns = mode_columns(&headers)?;
    let prob_column = headers
        .iter()
        .position(|h| h == "probability")
        .ok_or_else(|| Error::invalid("no probability column in CSV header"))?;
    let mut entries = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let z = parse_modes(&row, &z_columns)?;
        let field = row.get(prob_column).ok_or_else(|| {
            Error::invalid(format!("row {row:?} is missing the probability column"))
        })?;
        let p: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse probability from {field:?}")))?;
        entries.push((z, p));
    }
    if entries.is_empty() {
        return Err(Error::invalid("outcome table is empty"));
    }
    let n = z_columns.len();
    let m = entries
        .iter()
        .flat_map(|(z, _)| z.values().iter().copied())
        .max()
        .expect("entries is non-empty");
    OutcomeTable::from_entries(m, n, entries)
}

pub fn save_table_csv(path: impl AsRef<Path>, table: &OutcomeTable) -> Result<()> {
    write_table_csv(BufWriter::new(File::create(path)?), table)
}

pub fn load_table_csv(path: impl AsRef<Path>) -> Result<OutcomeTable> {
    read_table_csv(BufReader::new(File::open(path)?))
}

/// Writes a test report as pretty-printed JSON.
pub fn write_report<W: Write>(mut writer: W, report: &TestReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, report)?;
    writeln!(writer)?;
    Ok(())
}

pub fn read_report<R: Read>(reader: R) -> Result<TestReport> {
    Ok(serde_json::from_reader(reader)?)
}
