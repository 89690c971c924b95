//! CSV ingestion of mixed-frequency panels and atomic CSV export.
//!
//! Input layout: a header row, then one row per low-frequency period with a
//! date label, the outcome, the instrument and `m` high-frequency columns
//! `z_1 … z_m`. Floats are written in the shortest form that parses back to
//! the same `f64`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::simulate::SimulatedSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    DropRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub date_col: String,
    pub y_col: String,
    pub w_col: String,
    /// High-frequency columns are `{z_prefix}1 … {z_prefix}m`.
    pub z_prefix: String,
    pub grid_start: f64,
    pub grid_end: f64,
    pub log_y: bool,
    pub log_z: bool,
    pub log_w: bool,
    pub missing: MissingPolicy,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_col: "date".into(),
            y_col: "y".into(),
            w_col: "w".into(),
            z_prefix: "z_".into(),
            grid_start: 0.0,
            grid_end: 24.0,
            log_y: false,
            log_z: false,
            log_w: false,
            missing: MissingPolicy::Reject,
        }
    }
}

impl CsvSchema {
    /// Schema for samples from the simulator: grid `[0, 1]`, no transforms.
    pub fn unit_interval() -> Self {
        Self {
            grid_start: 0.0,
            grid_end: 1.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmpiricalDataset {
    pub dates: Vec<String>,
    pub y: Vec<f64>,
    /// `T × m`, one period per row.
    pub z: DMatrix<f64>,
    pub w: Vec<f64>,
    pub grid: Arc<SamplingGrid<f64>>,
    /// Rows skipped under [`MissingPolicy::DropRow`].
    pub dropped_rows: usize,
}

impl EmpiricalDataset {
    pub fn sample_size(&self) -> usize {
        self.y.len()
    }

    pub fn from_simulated(sample: &SimulatedSample) -> Self {
        Self {
            dates: (1..=sample.sample_size()).map(|t| t.to_string()).collect(),
            y: sample.y.clone(),
            z: sample.z.clone(),
            w: sample.w.clone(),
            grid: Arc::clone(&sample.grid),
            dropped_rows: 0,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan")
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<EmpiricalDataset> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, &path.display().to_string(), schema)
}

/// Parses a dataset from any reader; `label` names the source in errors.
pub fn read_csv<R: std::io::Read>(reader: R, label: &str, schema: &CsvSchema) -> Result<EmpiricalDataset> {
    let format_err = |message: String| Error::Format {
        path: label.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format_err(format!("missing column `{name}`")))
    };
    let date_idx = find(&schema.date_col)?;
    let y_idx = find(&schema.y_col)?;
    let w_idx = find(&schema.w_col)?;
    let mut z_idx = Vec::new();
    while let Some(i) = headers.iter().position(|h| h == format!("{}{}", schema.z_prefix, z_idx.len() + 1)) {
        z_idx.push(i);
    }
    if z_idx.is_empty() {
        return Err(format_err(format!("no `{}1…` columns", schema.z_prefix)));
    }
    let m = z_idx.len();
    let grid = Arc::new(SamplingGrid::uniform(m, schema.grid_start, schema.grid_end)?);

    let mut dates = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut z_flat = Vec::new();
    let mut dropped_rows = 0;

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::Cell {
                path: label.to_string(),
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let cell = |idx: usize, log: bool| -> Result<Option<f64>> {
            let raw = &record[idx];
            let err = |message: String| Error::Cell {
                path: label.to_string(),
                row,
                column: headers[idx].to_string(),
                message,
            };
            if is_missing(raw) {
                return match schema.missing {
                    MissingPolicy::Reject => Err(err("missing value".into())),
                    MissingPolicy::DropRow => Ok(None),
                };
            }
            let v: f64 = raw.parse().map_err(|_| err(format!("not a number: `{raw}`")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value `{raw}`")));
            }
            if log {
                if v <= 0.0 {
                    return Err(err(format!("log transform needs a positive value, got {v}")));
                }
                return Ok(Some(v.ln()));
            }
            Ok(Some(v))
        };
        let yv = cell(y_idx, schema.log_y)?;
        let wv = cell(w_idx, schema.log_w)?;
        let zv = z_idx.iter().map(|&i| cell(i, schema.log_z)).collect::<Result<Vec<_>>>()?;
        match (yv, wv, zv.iter().copied().collect::<Option<Vec<f64>>>()) {
            (Some(yv), Some(wv), Some(zv)) => {
                dates.push(record[date_idx].to_string());
                y.push(yv);
                w.push(wv);
                z_flat.extend(zv);
            }
            _ => dropped_rows += 1,
        }
    }
    if dropped_rows > 0 {
        log::warn!("{label}: dropped {dropped_rows} row(s) with missing values");
    }
    if y.is_empty() {
        return Err(format_err("no complete data rows".into()));
    }
    let z = DMatrix::from_row_slice(y.len(), m, &z_flat);
    Ok(EmpiricalDataset {
        dates,
        y,
        z,
        w,
        grid,
        dropped_rows,
    })
}

/// Shortest decimal form that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| Error::Io { path: p, source }
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp: PathBuf = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Writes a numeric table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(row.into_iter().map(fmt_f64))?;
    }
    write_atomic(path, &finish(wtr)?)
}

fn finish(wtr: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    wtr.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

pub fn dataset_to_csv(data: &EmpiricalDataset, schema: &CsvSchema) -> Result<Vec<u8>> {
    let m = data.z.ncols();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec![schema.date_col.clone(), schema.y_col.clone(), schema.w_col.clone()];
    header.extend((1..=m).map(|j| format!("{}{j}", schema.z_prefix)));
    wtr.write_record(&header)?;
    for t in 0..data.sample_size() {
        let mut rec = vec![data.dates[t].clone(), fmt_f64(data.y[t]), fmt_f64(data.w[t])];
        rec.extend(data.z.row(t).iter().map(|v| fmt_f64(*v)));
        wtr.write_record(&rec)?;
    }
    finish(wtr)
}

pub fn write_dataset_csv(path: &Path, data: &EmpiricalDataset, schema: &CsvSchema) -> Result<()> {
    write_atomic(path, &dataset_to_csv(data, schema)?)
}

/// Intraday elasticity used by [`synthetic_market_dataset`], `s` in hours.
pub fn synthetic_market_slope(s: f64) -> f64 {
    0.15 + 0.015 * (2.0 * std::f64::consts::PI * (s - 18.0) / 24.0).cos()
}

/// A daily-quantity / half-hourly-price / temperature panel in levels
/// (apply `log_y` and `log_z` when loading).
///
/// Log prices load on temperature and on a daily supply shock that also
/// enters the demand error, so prices are endogenous while temperature is a
/// valid instrument.
pub fn synthetic_market_dataset(sample_size: usize, seed: u64) -> Result<EmpiricalDataset> {
    if sample_size == 0 {
        return Err(Error::InvalidArgument("sample_size must be >= 1".into()));
    }
    let m = 48;
    let grid = Arc::new(SamplingGrid::uniform(m, 0.0, 24.0)?);
    let nodes = grid.nodes().to_vec();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(sample_size);
    let mut w = Vec::with_capacity(sample_size);
    let mut z = DMatrix::zeros(sample_size, m);
    for t in 0..sample_size {
        let n = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
        let temp = 20.0 + 5.0 * (two_pi * t as f64 / 365.0).sin() + 3.0 * n(&mut rng);
        let shock = 0.03 * n(&mut rng);
        let u = 0.5 * shock + 0.01 * n(&mut rng);
        let mut signal = 0.0;
        for (j, &s) in nodes.iter().enumerate() {
            let daily = 0.3 * (two_pi * (s - 18.0) / 24.0).cos();
            let log_p = 4.0 + daily + 0.04 * (temp - 20.0) * (1.0 + 0.5 * daily) + shock + 0.05 * n(&mut rng);
            z[(t, j)] = log_p.exp();
            signal += synthetic_market_slope(s) * log_p * grid.weights()[j];
        }
        y.push((signal + u).exp());
        w.push(temp);
    }
    Ok(EmpiricalDataset {
        dates: (0..sample_size).map(|t| format!("day{:05}", t + 1)).collect(),
        y,
        z,
        w,
        grid,
        dropped_rows: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "date,y,w,z_1,z_2,z_3\n\
        d1,1.5,20.0,10.0,11.0,12.0\n\
        d2,2.5,21.0,13.0,14.0,15.0\n\
        d3,3.5,19.5,16.0,17.0,18.0\n";

    fn schema() -> CsvSchema {
        CsvSchema {
            grid_start: 0.0,
            grid_end: 3.0,
            ..CsvSchema::default()
        }
    }

    #[test]
    fn loads_known_fixture() {
        let d = read_csv(FIXTURE.as_bytes(), "fixture", &schema()).unwrap();
        assert_eq!(d.dates, ["d1", "d2", "d3"]);
        assert_eq!(d.y, [1.5, 2.5, 3.5]);
        assert_eq!(d.w, [20.0, 21.0, 19.5]);
        assert_eq!(d.z[(1, 2)], 15.0);
        assert_eq!(d.grid.nodes(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn default_grid_is_half_hourly() {
        let g = SamplingGrid::uniform(48, 0.0, 24.0).unwrap();
        assert_eq!(g.nodes()[0], 0.5);
        assert_eq!(g.nodes()[47], 24.0);
        assert!(g.weights().iter().all(|&d| d == 0.5));
    }

    #[test]
    fn log_transform_applied() {
        let s = CsvSchema { log_z: true, ..schema() };
        let d = read_csv(FIXTURE.as_bytes(), "fixture", &s).unwrap();
        assert_eq!(d.z[(0, 0)], 10.0f64.ln());
        assert_eq!(d.y[0], 1.5);
    }

    #[test]
    fn zero_price_under_log_reports_cell() {
        let text = FIXTURE.replace("14.0", "0");
        let s = CsvSchema { log_z: true, ..schema() };
        match read_csv(text.as_bytes(), "fixture", &s) {
            Err(Error::Cell { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "z_2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_cell_reports_coordinates() {
        let text = FIXTURE.replace("19.5", "warm");
        match read_csv(text.as_bytes(), "fixture", &schema()) {
            Err(Error::Cell { row, column, .. }) => assert_eq!((row, column.as_str()), (3, "w")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_row_rejected() {
        let text = FIXTURE.replace("d2,2.5,21.0,13.0,14.0,15.0", "d2,2.5,21.0,13.0");
        assert!(matches!(read_csv(text.as_bytes(), "fixture", &schema()), Err(Error::Cell { row: 2, .. })));
    }

    #[test]
    fn missing_cell_policy() {
        let text = FIXTURE.replace("11.0", "");
        assert!(matches!(read_csv(text.as_bytes(), "f", &schema()), Err(Error::Cell { row: 1, .. })));
        let s = CsvSchema {
            missing: MissingPolicy::DropRow,
            ..schema()
        };
        let d = read_csv(text.as_bytes(), "f", &s).unwrap();
        assert_eq!(d.sample_size(), 2);
        assert_eq!(d.dropped_rows, 1);
        assert_eq!(d.dates, ["d2", "d3"]);
    }

    #[test]
    fn missing_column_rejected() {
        let text = FIXTURE.replace("date,", "day,");
        assert!(matches!(read_csv(text.as_bytes(), "f", &schema()), Err(Error::Format { .. })));
    }

    #[test]
    fn export_then_load_is_bit_exact() {
        let d = synthetic_market_dataset(5, 1).unwrap();
        let s = CsvSchema::default();
        let bytes = dataset_to_csv(&d, &s).unwrap();
        let back = read_csv(&bytes[..], "mem", &s).unwrap();
        assert_eq!(back.y, d.y);
        assert_eq!(back.w, d.w);
        assert_eq!(back.z, d.z);
        assert_eq!(back.dates, d.dates);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -1e-300, 123456789.125, f64::MIN_POSITIVE, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_table(&p, &["a", "b"], vec![vec![1.0, 0.5]]).unwrap();
        write_table(&p, &["a", "b"], vec![vec![2.0, 0.25]]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n2.0,0.25\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn synthetic_market_is_positive() {
        let d = synthetic_market_dataset(50, 3).unwrap();
        assert!(d.y.iter().all(|&v| v > 0.0));
        assert!(d.z.iter().all(|&v| v > 0.0));
        assert_eq!(d.z.ncols(), 48);
    }
}
