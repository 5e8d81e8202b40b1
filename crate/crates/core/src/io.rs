//! CSV outputs and their readers.
//!
//! | file          | columns                                             |
//! |---------------|-----------------------------------------------------|
//! | traces.csv    | storage_time_us, t_us, amp_re, amp_im, intensity    |
//! | peaks.csv     | storage_time_us, peak_time_us, peak_intensity       |
//! | classical.csv | t_us, Mx, My, Mz                                    |
//! | sweep.csv     | b_gauss, freq_hz, freq2_hz, tau_us, model           |
//!
//! Empty cells in sweep.csv mean "not available".

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::PeakSeries;
use crate::classical::MomentTrajectory;
use crate::dynamics::RetrievedTrace;
use crate::error::{Error, Result};

pub const TRACES_HEADER: [&str; 5] = ["storage_time_us", "t_us", "amp_re", "amp_im", "intensity"];
pub const PEAKS_HEADER: [&str; 3] = ["storage_time_us", "peak_time_us", "peak_intensity"];
pub const CLASSICAL_HEADER: [&str; 4] = ["t_us", "Mx", "My", "Mz"];
pub const SWEEP_HEADER: [&str; 5] = ["b_gauss", "freq_hz", "freq2_hz", "tau_us", "model"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub storage_time_us: f64,
    pub t_us: f64,
    pub amp_re: f64,
    pub amp_im: f64,
    pub intensity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    pub storage_time_us: f64,
    pub peak_time_us: f64,
    pub peak_intensity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRow {
    pub t_us: f64,
    #[serde(rename = "Mx")]
    pub mx: f64,
    #[serde(rename = "My")]
    pub my: f64,
    #[serde(rename = "Mz")]
    pub mz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub b_gauss: f64,
    pub freq_hz: f64,
    pub freq2_hz: Option<f64>,
    pub tau_us: Option<f64>,
    pub model: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsvKind {
    Traces,
    Peaks,
    Classical,
    Sweep,
}

impl CsvKind {
    pub fn from_header<S: AsRef<str>>(header: &[S]) -> Option<Self> {
        let h: Vec<&str> = header.iter().map(|s| s.as_ref().trim()).collect();
        [
            (CsvKind::Traces, &TRACES_HEADER[..]),
            (CsvKind::Peaks, &PEAKS_HEADER[..]),
            (CsvKind::Classical, &CLASSICAL_HEADER[..]),
            (CsvKind::Sweep, &SWEEP_HEADER[..]),
        ]
        .into_iter()
        .find(|(_, expected)| h == *expected)
        .map(|(k, _)| k)
    }
}

fn csv_err(origin: &str, message: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: origin.to_string(),
        message: message.to_string(),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let origin = path.display().to_string();
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(&origin, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read all rows of a CSV whose header must equal `header` exactly.
fn read_rows<T: DeserializeOwned, R: Read>(reader: R, origin: &str, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = r.headers().map_err(|e| csv_err(origin, e))?.clone();
    let found: Vec<&str> = found.iter().collect();
    if found != header {
        for (i, name) in header.iter().enumerate() {
            if found.get(i) != Some(name) {
                return Err(csv_err(
                    origin,
                    format!("column {} should be {name:?}, found {:?}", i + 1, found.get(i).unwrap_or(&"")),
                ));
            }
        }
        return Err(csv_err(origin, format!("unexpected extra columns {:?}", &found[header.len()..])));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| csv_err(origin, format!("row {}: {e}", i + 2))))
        .collect()
}

fn check_finite(origin: &str, row: usize, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(csv_err(origin, format!("row {}: non-finite value", row + 2)))
    }
}

pub fn trace_rows(traces: &[RetrievedTrace]) -> Vec<TraceRow> {
    traces
        .iter()
        .flat_map(|tr| {
            (0..tr.len()).map(move |i| TraceRow {
                storage_time_us: tr.storage_time * 1e6,
                t_us: tr.times[i] * 1e6,
                amp_re: tr.amplitude[i].re,
                amp_im: tr.amplitude[i].im,
                intensity: tr.intensity[i],
            })
        })
        .collect()
}

pub fn write_traces(path: &Path, traces: &[RetrievedTrace]) -> Result<()> {
    write_rows(path, trace_rows(traces))
}

pub fn write_peaks(path: &Path, peaks: &PeakSeries) -> Result<()> {
    write_rows(
        path,
        (0..peaks.len()).map(|i| PeakRow {
            storage_time_us: peaks.storage_times[i] * 1e6,
            peak_time_us: peaks.peak_time[i] * 1e6,
            peak_intensity: peaks.peak_intensity[i],
        }),
    )
}

pub fn write_classical(path: &Path, traj: &MomentTrajectory) -> Result<()> {
    write_rows(
        path,
        traj.times.iter().zip(&traj.moments).map(|(t, m)| ClassicalRow {
            t_us: t * 1e6,
            mx: m.x,
            my: m.y,
            mz: m.z,
        }),
    )
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    // header written explicitly so it appears even for zero rows
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(std::io::BufWriter::new(file));
    let origin = path.display().to_string();
    w.write_record(SWEEP_HEADER).map_err(|e| csv_err(&origin, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(&origin, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Traces from CSV text; consecutive rows with equal storage time form one
/// trace. Times are converted to seconds.
pub fn parse_traces<R: Read>(reader: R, origin: &str) -> Result<Vec<RetrievedTrace>> {
    let rows: Vec<TraceRow> = read_rows(reader, origin, &TRACES_HEADER)?;
    let mut traces: Vec<RetrievedTrace> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        check_finite(origin, i, &[r.storage_time_us, r.t_us, r.amp_re, r.amp_im, r.intensity])?;
        if r.intensity < 0.0 {
            return Err(csv_err(origin, format!("row {}: negative intensity", i + 2)));
        }
        let st = r.storage_time_us * 1e-6;
        match traces.last_mut() {
            Some(tr) if tr.storage_time == st => {
                tr.times.push(r.t_us * 1e-6);
                tr.amplitude.push(C64::new(r.amp_re, r.amp_im));
                tr.intensity.push(r.intensity);
            }
            _ => traces.push(RetrievedTrace {
                storage_time: st,
                times: vec![r.t_us * 1e-6],
                amplitude: vec![C64::new(r.amp_re, r.amp_im)],
                intensity: vec![r.intensity],
            }),
        }
    }
    Ok(traces)
}

pub fn parse_peaks<R: Read>(reader: R, origin: &str) -> Result<PeakSeries> {
    let rows: Vec<PeakRow> = read_rows(reader, origin, &PEAKS_HEADER)?;
    for (i, r) in rows.iter().enumerate() {
        check_finite(origin, i, &[r.storage_time_us, r.peak_time_us, r.peak_intensity])?;
    }
    PeakSeries::new(
        rows.iter().map(|r| r.storage_time_us * 1e-6).collect(),
        rows.iter().map(|r| r.peak_intensity).collect(),
        rows.iter().map(|r| r.peak_time_us * 1e-6).collect(),
    )
}

pub fn parse_sweep<R: Read>(reader: R, origin: &str) -> Result<Vec<SweepRow>> {
    let rows: Vec<SweepRow> = read_rows(reader, origin, &SWEEP_HEADER)?;
    for (i, r) in rows.iter().enumerate() {
        let mut v = vec![r.b_gauss, r.freq_hz];
        v.extend(r.freq2_hz);
        v.extend(r.tau_us);
        check_finite(origin, i, &v)?;
    }
    Ok(rows)
}

pub fn parse_classical<R: Read>(reader: R, origin: &str) -> Result<Vec<ClassicalRow>> {
    let rows: Vec<ClassicalRow> = read_rows(reader, origin, &CLASSICAL_HEADER)?;
    for (i, r) in rows.iter().enumerate() {
        check_finite(origin, i, &[r.t_us, r.mx, r.my, r.mz])?;
    }
    Ok(rows)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn read_traces(path: &Path) -> Result<Vec<RetrievedTrace>> {
    parse_traces(open(path)?, &path.display().to_string())
}

pub fn read_peaks(path: &Path) -> Result<PeakSeries> {
    parse_peaks(open(path)?, &path.display().to_string())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    parse_sweep(open(path)?, &path.display().to_string())
}

/// Kind of a CSV file, from its header row.
pub fn detect_kind(path: &Path) -> Result<CsvKind> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let origin = path.display().to_string();
    let header = r.headers().map_err(|e| csv_err(&origin, e))?;
    let cols: Vec<&str> = header.iter().collect();
    CsvKind::from_header(&cols).ok_or_else(|| csv_err(&origin, format!("unrecognized header {cols:?}")))
}

/// Write `text` to `path`.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
