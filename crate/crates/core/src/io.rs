//! File and wire formats: frame CSV, centerline CSV, calibration dataset CSV
//! and JSON-lines stream records.
//!
//! Every float written by this module goes through [`fmt_num`] so output is
//! byte-identical for identical inputs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::calibrate::{CalibrationDataset, CalibrationSample};
use crate::domain::{WavelengthFrame, ACTIVE_AREAS, FIBERS};
use crate::error::{Error, Result};
use crate::reconstruct::CenterlinePolyline;
use crate::sensing::{Bend, Deflection};

pub const FRAME_HEADER: [&str; 7] = ["t", "l11", "l12", "l13", "l21", "l22", "l23"];
pub const CENTERLINE_HEADER: [&str; 3] = ["s_mm", "x_mm", "y_mm"];
pub const DATASET_EXTRA_HEADER: [&str; 7] = [
    "kappa1",
    "kappa2",
    "kappa3",
    "phi1_deg",
    "phi2_deg",
    "phi3_deg",
    "deflection",
];
pub const SUMMARY_HEADER: [&str; 6] = ["frame", "t", "tip_x_mm", "tip_y_mm", "tip_angle_deg", "deflection"];

const SIGNIFICANT_DIGITS: i32 = 9;

/// Formats `x` with nine significant digits, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = SIGNIFICANT_DIGITS - 1 - exponent;
    let text = if (0..=17).contains(&decimals) {
        format!("{x:.*}", decimals as usize)
    } else if decimals < 0 && exponent < 16 {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (x / scale).round() * scale)
    } else {
        let sci = format!("{x:.8e}");
        let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    };
    let text = if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    };
    if text == "-0" {
        "0".to_string()
    } else {
        text
    }
}

fn parse_field(value: &str, name: &str, line: u64) -> Result<f64> {
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: field `{name}`: cannot parse `{value}` as a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: field `{name}` is not finite")));
    }
    Ok(v)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let ok = found.len() == expected.len() && found.iter().zip(expected).all(|(a, b)| a.trim() == *b);
    if !ok {
        return Err(Error::Parse(format!(
            "line 1: expected header `{}`, found `{}`",
            expected.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse(format!("line {line}: {kind:?}")),
    }
}

fn frame_from_fields(fields: &[&str], line: u64) -> Result<WavelengthFrame> {
    let t = parse_field(fields[0], "t", line)?;
    let mut lambda = [[0.0; ACTIVE_AREAS]; FIBERS];
    for k in 0..FIBERS {
        for j in 0..ACTIVE_AREAS {
            let i = 1 + k * ACTIVE_AREAS + j;
            lambda[k][j] = parse_field(fields[i], FRAME_HEADER[i], line)?;
        }
    }
    let frame = WavelengthFrame { timestamp: t, lambda };
    frame.validate().map_err(|e| at_line(e, line))?;
    Ok(frame)
}

fn at_line(e: Error, line: u64) -> Error {
    match e {
        Error::Invariant { field, reason } => Error::Invariant {
            field: format!("line {line}: {field}"),
            reason,
        },
        other => other,
    }
}

fn check_width(record: &csv::StringRecord, width: usize, line: u64) -> Result<()> {
    if record.len() != width {
        return Err(Error::Parse(format!(
            "line {line}: expected {width} fields, found {}",
            record.len()
        )));
    }
    Ok(())
}

/// Reads a frame CSV with header `t,l11,l12,l13,l21,l22,l23`.
pub fn read_frames_csv<R: Read>(reader: R) -> Result<Vec<WavelengthFrame>> {
    let mut rdr = csv_reader(reader);
    check_header(rdr.headers().map_err(csv_error)?, &FRAME_HEADER)?;
    let mut frames = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        check_width(&record, FRAME_HEADER.len(), line)?;
        let fields: Vec<&str> = record.iter().collect();
        frames.push(frame_from_fields(&fields, line)?);
    }
    Ok(frames)
}

fn frame_fields(frame: &WavelengthFrame) -> Vec<String> {
    std::iter::once(frame.timestamp)
        .chain(frame.lambda.iter().flatten().copied())
        .map(fmt_num)
        .collect()
}

pub fn write_frames_csv<W: Write>(writer: W, frames: &[WavelengthFrame]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FRAME_HEADER).map_err(csv_error)?;
    for f in frames {
        w.write_record(frame_fields(f)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_centerline_csv<W: Write>(writer: W, polyline: &CenterlinePolyline) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CENTERLINE_HEADER).map_err(csv_error)?;
    for (s, p) in polyline.arc.iter().zip(&polyline.points) {
        w.write_record([fmt_num(*s), fmt_num(p[0]), fmt_num(p[1])])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a centerline CSV back into `(s, x, y)` rows.
pub fn read_centerline_csv<R: Read>(reader: R) -> Result<Vec<[f64; 3]>> {
    let mut rdr = csv_reader(reader);
    check_header(rdr.headers().map_err(csv_error)?, &CENTERLINE_HEADER)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        check_width(&record, 3, line)?;
        let mut row = [0.0; 3];
        for (i, v) in record.iter().enumerate() {
            row[i] = parse_field(v, CENTERLINE_HEADER[i], line)?;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// One row of the per-frame reconstruction summary.
#[derive(Debug, Clone, PartialEq)]
pub struct TipSummary {
    pub frame: usize,
    pub timestamp: f64,
    pub tip: [f64; 2],
    /// Tangent angle from the proximal axis, rad.
    pub tip_angle: f64,
    pub deflection: Deflection,
}

pub fn write_summary_csv<W: Write>(writer: W, rows: &[TipSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.frame.to_string(),
            fmt_num(r.timestamp),
            fmt_num(r.tip[0]),
            fmt_num(r.tip[1]),
            fmt_num(r.tip_angle.to_degrees()),
            r.deflection.as_str().to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn dataset_header() -> Vec<&'static str> {
    FRAME_HEADER.iter().chain(&DATASET_EXTRA_HEADER).copied().collect()
}

/// Reads a calibration dataset: a frame row followed by the sensor-path
/// curvature, bending direction (degrees) and deflection sign per sample.
pub fn read_dataset_csv<R: Read>(reader: R) -> Result<CalibrationDataset> {
    let header = dataset_header();
    let mut rdr = csv_reader(reader);
    check_header(rdr.headers().map_err(csv_error)?, &header)?;
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        check_width(&record, header.len(), line)?;
        let fields: Vec<&str> = record.iter().collect();
        let frame = frame_from_fields(&fields[..FRAME_HEADER.len()], line)?;
        let base = FRAME_HEADER.len();
        let mut truth = [Bend { kappa: 0.0, phi: 0.0 }; ACTIVE_AREAS];
        for j in 0..ACTIVE_AREAS {
            truth[j].kappa = parse_field(fields[base + j], header[base + j], line)?;
            let deg = parse_field(fields[base + 3 + j], header[base + 3 + j], line)?;
            truth[j].phi = deg.to_radians();
        }
        let text = fields[base + 6];
        let deflection = Deflection::parse(text)
            .ok_or_else(|| Error::Parse(format!("line {line}: unknown deflection `{text}`")))?;
        samples.push(CalibrationSample {
            frame,
            truth,
            deflection,
        });
    }
    CalibrationDataset::new(samples)
}

pub fn write_dataset_csv<W: Write>(writer: W, dataset: &CalibrationDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset_header()).map_err(csv_error)?;
    for s in &dataset.samples {
        let mut row = frame_fields(&s.frame);
        row.extend(s.truth.iter().map(|b| fmt_num(b.kappa)));
        row.extend(s.truth.iter().map(|b| fmt_num(b.phi.to_degrees())));
        row.push(s.deflection.as_str().to_string());
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Wire form of one interrogator sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub t: f64,
    pub l11: f64,
    pub l12: f64,
    pub l13: f64,
    pub l21: f64,
    pub l22: f64,
    pub l23: f64,
}

impl From<&WavelengthFrame> for FrameRecord {
    fn from(f: &WavelengthFrame) -> Self {
        let [[l11, l12, l13], [l21, l22, l23]] = f.lambda;
        Self {
            t: f.timestamp,
            l11,
            l12,
            l13,
            l21,
            l22,
            l23,
        }
    }
}

impl From<FrameRecord> for WavelengthFrame {
    fn from(r: FrameRecord) -> Self {
        WavelengthFrame {
            timestamp: r.t,
            lambda: [[r.l11, r.l12, r.l13], [r.l21, r.l22, r.l23]],
        }
    }
}

/// Parses one JSON-lines frame record.
pub fn parse_frame_json(text: &str) -> Result<WavelengthFrame> {
    let record: FrameRecord = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let frame = WavelengthFrame::from(record);
    frame.validate()?;
    Ok(frame)
}

pub fn frame_to_json(frame: &WavelengthFrame) -> String {
    serde_json::to_string(&FrameRecord::from(frame)).expect("frame record serializes")
}

pub fn write_frames_jsonl<W: Write>(mut writer: W, frames: &[WavelengthFrame]) -> Result<()> {
    for f in frames {
        writeln!(writer, "{}", frame_to_json(f))?;
    }
    writer.flush()?;
    Ok(())
}
