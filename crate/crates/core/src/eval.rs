//! Frame records, error metrics and CSV formats.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::wrap_angle;
use crate::sim::GroundTruthFrame;
use crate::tracker::Estimate;

/// Tracker output next to the matching ground truth.
///
/// `g*` columns hold the estimate, `gins*`/`ins*` the reference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
    pub gyaw: f64,
    pub gv: f64,
    pub gc: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub ginssx: f64,
    pub ginssy: f64,
    pub ginsyaw: f64,
    pub ginsv: f64,
    pub insl: f64,
    pub insw: f64,
    pub time_ms: f64,
}

pub const FRAME_COLUMNS: [&str; 17] = [
    "frame", "gx", "gy", "gz", "gyaw", "gv", "gc", "l", "w", "h", "ginssx", "ginssy", "ginsyaw",
    "ginsv", "insl", "insw", "time_ms",
];

impl FrameRecord {
    pub fn new(truth: &GroundTruthFrame, est: &Estimate) -> Self {
        TruthRecord::from_frame(truth).record(est)
    }

    fn values(&self) -> [f64; 16] {
        [
            self.gx, self.gy, self.gz, self.gyaw, self.gv, self.gc, self.l, self.w, self.h,
            self.ginssx, self.ginssy, self.ginsyaw, self.ginsv, self.insl, self.insw, self.time_ms,
        ]
    }

    fn from_values(frame: usize, v: &[f64]) -> Self {
        Self {
            frame,
            gx: v[0],
            gy: v[1],
            gz: v[2],
            gyaw: v[3],
            gv: v[4],
            gc: v[5],
            l: v[6],
            w: v[7],
            h: v[8],
            ginssx: v[9],
            ginssy: v[10],
            ginsyaw: v[11],
            ginsv: v[12],
            insl: v[13],
            insw: v[14],
            time_ms: v[15],
        }
    }
}

/// Nine significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameErrors {
    pub velocity: f64,
    pub area: f64,
    /// `|Δx| + |Δy|`.
    pub position: f64,
    pub yaw: f64,
}

pub fn frame_errors(r: &FrameRecord) -> FrameErrors {
    FrameErrors {
        velocity: (r.gv - r.ginsv).abs(),
        area: (r.l * r.w - r.insl * r.insw).abs(),
        position: (r.gx - r.ginssx).abs() + (r.gy - r.ginssy).abs(),
        yaw: wrap_angle(r.gyaw - r.ginsyaw).abs(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_velocity: f64,
    pub rmse_area: f64,
    pub rmse_position: f64,
    /// Absent when orientation is suppressed.
    pub rmse_yaw: Option<f64>,
    pub mean_time_ms: f64,
    pub frames: usize,
    pub series: Vec<FrameErrors>,
}

pub fn rmse(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

pub fn aggregate(records: &[FrameRecord], with_yaw: bool) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::EmptyReport);
    }
    let series: Vec<FrameErrors> = records.iter().map(frame_errors).collect();
    Ok(MetricsReport {
        rmse_velocity: rmse(series.iter().map(|e| e.velocity)),
        rmse_area: rmse(series.iter().map(|e| e.area)),
        rmse_position: rmse(series.iter().map(|e| e.position)),
        rmse_yaw: with_yaw.then(|| rmse(series.iter().map(|e| e.yaw))),
        mean_time_ms: records.iter().map(|r| r.time_ms).sum::<f64>() / records.len() as f64,
        frames: records.len(),
        series,
    })
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "run,E_v,E_A,E_pos,E_psi,t_ms";

    pub fn csv_row(&self, run: &str) -> String {
        let yaw = self.rmse_yaw.map_or_else(|| "-".to_string(), fmt_float);
        format!(
            "{run},{},{},{},{yaw},{}",
            fmt_float(self.rmse_velocity),
            fmt_float(self.rmse_area),
            fmt_float(self.rmse_position),
            fmt_float(self.mean_time_ms)
        )
    }
}

pub fn write_frames<W: Write>(out: W, records: &[FrameRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FRAME_COLUMNS)?;
    for r in records {
        let mut row = vec![r.frame.to_string()];
        row.extend(r.values().iter().map(|v| fmt_float(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn column_index(headers: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>> {
    let map: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    names
        .iter()
        .map(|n| map.get(n).copied().ok_or_else(|| Error::MissingColumn((*n).to_string())))
        .collect()
}

fn parse_field<T: std::str::FromStr>(row: &csv::StringRecord, col: usize, name: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = row.get(col).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing value for `{name}`"),
    })?;
    raw.trim().parse().map_err(|e: T::Err| Error::Parse {
        line,
        message: format!("`{name}`: {e}"),
    })
}

fn read_rows<R: Read, T>(
    input: R,
    names: &[&str],
    mut build: impl FnMut(&csv::StringRecord, &[usize], usize) -> Result<T>,
) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let cols = column_index(reader.headers()?, names)?;
    let mut out = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(build(&row, &cols, line)?);
    }
    Ok(out)
}

pub fn read_frames<R: Read>(input: R) -> Result<Vec<FrameRecord>> {
    read_rows(input, &FRAME_COLUMNS, |row, cols, line| {
        let frame = parse_field(row, cols[0], FRAME_COLUMNS[0], line)?;
        let values = (1..FRAME_COLUMNS.len())
            .map(|k| parse_field(row, cols[k], FRAME_COLUMNS[k], line))
            .collect::<Result<Vec<f64>>>()?;
        Ok(FrameRecord::from_values(frame, &values))
    })
}

pub fn write_frames_file(path: &Path, records: &[FrameRecord]) -> Result<()> {
    write_frames(File::create(path)?, records)
}

pub fn read_frames_file(path: &Path) -> Result<Vec<FrameRecord>> {
    read_frames(File::open(path)?)
}

/// Writes `frame,x,y,z` rows.
pub fn write_points<W: Write>(out: W, frames: &[Vec<Vector3<f64>>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "x", "y", "z"])?;
    for (k, pts) in frames.iter().enumerate() {
        for p in pts {
            w.write_record([k.to_string(), fmt_float(p.x), fmt_float(p.y), fmt_float(p.z)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Groups `frame,x,y,z` rows by frame; frames without rows stay empty.
pub fn read_points<R: Read>(input: R, frames: usize) -> Result<Vec<Vec<Vector3<f64>>>> {
    let names = ["frame", "x", "y", "z"];
    let rows = read_rows(input, &names, |row, cols, line| {
        let k: usize = parse_field(row, cols[0], "frame", line)?;
        let p = Vector3::new(
            parse_field(row, cols[1], "x", line)?,
            parse_field(row, cols[2], "y", line)?,
            parse_field(row, cols[3], "z", line)?,
        );
        Ok((k, p))
    })?;
    let n = rows.iter().map(|(k, _)| k + 1).max().unwrap_or(0).max(frames);
    let mut out = vec![Vec::new(); n];
    for (k, p) in rows {
        out[k].push(p);
    }
    Ok(out)
}

/// Reference trajectory row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub frame: usize,
    pub center: Vector3<f64>,
    pub yaw: f64,
    pub velocity: f64,
    pub curvature: f64,
    pub dims: Vector3<f64>,
}

const TRUTH_COLUMNS: [&str; 10] = ["frame", "x", "y", "z", "yaw", "v", "c", "length", "width", "height"];

impl TruthRecord {
    pub fn from_frame(f: &GroundTruthFrame) -> Self {
        Self {
            frame: f.index,
            center: f.truth.center,
            yaw: f.truth.yaw,
            velocity: f.truth.velocity,
            curvature: f.truth.curvature,
            dims: f.dims,
        }
    }

    /// Pairs this reference with an estimate.
    pub fn record(&self, est: &Estimate) -> FrameRecord {
        FrameRecord {
            frame: self.frame,
            gx: est.center.x,
            gy: est.center.y,
            gz: est.center.z,
            gyaw: est.yaw,
            gv: est.velocity,
            gc: est.curvature,
            l: est.length,
            w: est.width,
            h: est.height,
            ginssx: self.center.x,
            ginssy: self.center.y,
            ginsyaw: self.yaw,
            ginsv: self.velocity,
            insl: self.dims.x,
            insw: self.dims.y,
            time_ms: est.time_ms,
        }
    }
}

pub fn write_truth<W: Write>(out: W, rows: &[TruthRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRUTH_COLUMNS)?;
    for r in rows {
        let vals = [
            r.center.x, r.center.y, r.center.z, r.yaw, r.velocity, r.curvature, r.dims.x, r.dims.y,
            r.dims.z,
        ];
        let mut row = vec![r.frame.to_string()];
        row.extend(vals.iter().map(|v| fmt_float(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth<R: Read>(input: R) -> Result<Vec<TruthRecord>> {
    read_rows(input, &TRUTH_COLUMNS, |row, cols, line| {
        let f = |k: usize| parse_field::<f64>(row, cols[k], TRUTH_COLUMNS[k], line);
        Ok(TruthRecord {
            frame: parse_field(row, cols[0], "frame", line)?,
            center: Vector3::new(f(1)?, f(2)?, f(3)?),
            yaw: f(4)?,
            velocity: f(5)?,
            curvature: f(6)?,
            dims: Vector3::new(f(7)?, f(8)?, f(9)?),
        })
    })
}
