//! File formats.
//!
//! - IMU CSV: header `t,ax,ay,az` or `t,ax,ay,az,gx,gy,gz`, one sample per
//!   row, seconds and SI units, `.` decimal separator.
//! - Trajectory: TUM format, `t x y z qx qy qz qw` space-separated (note the
//!   file stores the quaternion x-y-z-w while the in-memory order is w-x-y-z).
//! - Template library / fault mask / mitigation log / metrics: JSON.
//! - Detection report: JSON lines; first line is a `meta` record carrying the
//!   detector configuration echo, then one record per slice or sample run.
//!
//! Floats are written with the shortest round-trip representation, so
//! write-then-read reproduces values exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::detect::{DetectionRecord, DetectionReport, DetectorMode, TemplateLibrary};
use crate::error::{Error, Result};
use crate::mitigate::MitigationLog;
use crate::quat::Quaternion;
use crate::sim::FaultMask;
use crate::types::{validate_stream, ImuSample, NavState, Trajectory};

const IMU_HEADER_ACC: &str = "t,ax,ay,az";
const IMU_HEADER_FULL: &str = "t,ax,ay,az,gx,gy,gz";

fn csv_error(line: usize, e: csv::Error) -> Error {
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

/// Read an IMU CSV stream; the header decides whether gyro channels exist.
pub fn read_imu_csv(path: &Path) -> Result<Vec<ImuSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(0, e))?;
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let header = headers.iter().collect::<Vec<_>>().join(",");
    let with_gyro = match header.as_str() {
        h if h == IMU_HEADER_ACC => false,
        h if h == IMU_HEADER_FULL => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "unexpected header '{other}' (expected '{IMU_HEADER_ACC}' or '{IMU_HEADER_FULL}')"
                ),
            })
        }
    };
    let expected_fields = if with_gyro { 7 } else { 4 };

    let mut stream = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if record.len() != expected_fields {
            return Err(Error::Parse {
                line,
                msg: format!("expected {expected_fields} fields, got {}", record.len()),
            });
        }
        let mut values = [0.0f64; 7];
        for (j, field) in record.iter().enumerate() {
            values[j] = field.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("field {}: {e}", j + 1),
            })?;
        }
        let gyro = with_gyro.then(|| Vector3::new(values[4], values[5], values[6]));
        stream.push(ImuSample::new(
            values[0],
            Vector3::new(values[1], values[2], values[3]),
            gyro,
        ));
    }
    validate_stream(&stream)?;
    Ok(stream)
}

/// Write an IMU CSV stream. Gyro presence must be uniform across samples.
pub fn write_imu_csv(path: &Path, stream: &[ImuSample]) -> Result<()> {
    let with_gyro = stream.first().is_some_and(|s| s.gyro.is_some());
    if stream.iter().any(|s| s.gyro.is_some() != with_gyro) {
        return Err(Error::ShapeMismatch(
            "stream mixes samples with and without gyro data".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", if with_gyro { IMU_HEADER_FULL } else { IMU_HEADER_ACC })?;
    for s in stream {
        write!(w, "{},{},{},{}", s.t, s.acc.x, s.acc.y, s.acc.z)?;
        if let Some(g) = s.gyro {
            write!(w, ",{},{},{}", g.x, g.y, g.z)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a TUM trajectory file (`t x y z qx qy qz qw`, `#` comments allowed).
pub fn read_tum(path: &Path) -> Result<Trajectory> {
    let reader = BufReader::new(File::open(path)?);
    let mut states = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != 8 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let mut v = [0.0f64; 8];
        for (j, f) in fields.iter().enumerate() {
            v[j] = f.parse().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("field {}: {e}", j + 1),
            })?;
        }
        states.push(NavState::new(
            v[0],
            Vector3::new(v[1], v[2], v[3]),
            Vector3::zeros(),
            Quaternion::new(v[7], v[4], v[5], v[6]),
        ));
    }
    Trajectory::new(states)
}

/// Write a TUM trajectory file. Velocities are not part of the format and
/// are dropped.
pub fn write_tum(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# t x y z qx qy qz qw")?;
    for s in traj.iter() {
        writeln!(
            w,
            "{} {} {} {} {} {} {} {}",
            s.t, s.p.x, s.p.y, s.p.z, s.q.x, s.q.y, s.q.z, s.q.w
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_template_library(path: &Path) -> Result<TemplateLibrary> {
    let library: TemplateLibrary = read_json(path)?;
    library.validate()?;
    Ok(library)
}

pub fn write_template_library(path: &Path, library: &TemplateLibrary) -> Result<()> {
    write_json_pretty(path, library)
}

/// Meta line of a detection report JSONL file.
#[derive(Debug, Serialize, Deserialize)]
struct ReportMeta {
    kind: String,
    mode: DetectorMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    acc_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dtw_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slice_len: Option<usize>,
}

/// Write a detection report as JSON lines: one meta line, then one line per
/// record in stream order.
pub fn write_report_jsonl(path: &Path, report: &DetectionReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let meta = ReportMeta {
        kind: "meta".into(),
        mode: report.mode,
        acc_threshold: report.acc_threshold,
        dtw_threshold: report.dtw_threshold,
        reference: report.reference,
        slice_len: report.slice_len,
    };
    writeln!(w, "{}", serde_json::to_string(&meta).expect("serializable"))?;
    for record in &report.records {
        writeln!(w, "{}", serde_json::to_string(record).expect("serializable"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_jsonl(path: &Path) -> Result<DetectionReport> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let meta_line = lines
        .next()
        .ok_or(Error::EmptyInput("detection report"))??;
    let meta: ReportMeta = serde_json::from_str(&meta_line).map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    if meta.kind != "meta" {
        return Err(Error::Parse {
            line: 1,
            msg: "first line of a report must be the meta record".into(),
        });
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DetectionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 2,
            msg: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(DetectionReport {
        mode: meta.mode,
        acc_threshold: meta.acc_threshold,
        dtw_threshold: meta.dtw_threshold,
        reference: meta.reference,
        slice_len: meta.slice_len,
        records,
    })
}

/// Fault mask file schema.
#[derive(Debug, Serialize, Deserialize)]
struct MaskFile {
    version: u32,
    len: usize,
    flagged: Vec<usize>,
}

pub fn write_mask_json(path: &Path, mask: &FaultMask) -> Result<()> {
    write_json_pretty(
        path,
        &MaskFile {
            version: 1,
            len: mask.len(),
            flagged: mask.indices(),
        },
    )
}

pub fn read_mask_json(path: &Path) -> Result<FaultMask> {
    let file: MaskFile = read_json(path)?;
    if let Some(&bad) = file.flagged.iter().find(|&&i| i >= file.len) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("mask index {bad} outside stream of {}", file.len),
        });
    }
    Ok(FaultMask::from_indices(file.len, &file.flagged))
}

pub fn write_mitigation_log(path: &Path, log: &MitigationLog) -> Result<()> {
    write_json_pretty(path, log)
}

pub fn read_mitigation_log(path: &Path) -> Result<MitigationLog> {
    read_json(path)
}

pub fn write_nav_state(path: &Path, state: &NavState) -> Result<()> {
    write_json_pretty(path, state)
}

pub fn read_nav_state(path: &Path) -> Result<NavState> {
    read_json(path)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let reader = BufReader::new(File::open(path)?);
    serde_json::from_reader(reader).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| {
        Error::Io(std::io::Error::other(e))
    })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Verdict;
    use proptest::prelude::*;
    use tempfile::TempDir;

    fn sample(t: f64, with_gyro: bool) -> ImuSample {
        ImuSample::new(
            t,
            Vector3::new(0.125 * t, -t, 9.81),
            with_gyro.then(|| Vector3::new(t, 0.5 * t, -0.25)),
        )
    }

    #[test]
    fn imu_csv_round_trips_both_layouts() {
        let dir = TempDir::new().unwrap();
        for with_gyro in [false, true] {
            let path = dir.path().join(format!("s{with_gyro}.csv"));
            let stream: Vec<ImuSample> = (0..10).map(|i| sample(i as f64 * 0.1, with_gyro)).collect();
            write_imu_csv(&path, &stream).unwrap();
            let back = read_imu_csv(&path).unwrap();
            assert_eq!(back, stream);
        }
    }

    #[test]
    fn mixed_gyro_presence_is_rejected_on_write() {
        let dir = TempDir::new().unwrap();
        let stream = vec![sample(0.0, true), sample(1.0, false)];
        assert!(matches!(
            write_imu_csv(&dir.path().join("bad.csv"), &stream),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn bad_header_reports_line_one() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "time,x,y,z\n0,1,2,3\n").unwrap();
        match read_imu_csv(&path) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_field_reports_its_line() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,ax,ay,az\n0,1,2,3\n0.1,oops,2,3\n").unwrap();
        match read_imu_csv(&path) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tum_round_trips_pose_data() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("traj.tum");
        let traj = Trajectory::new(
            (0..20)
                .map(|i| {
                    let t = i as f64 * 0.25;
                    NavState::new(
                        t,
                        Vector3::new(t, -2.0 * t, 0.125),
                        Vector3::zeros(),
                        Quaternion::from_euler_zyx(0.01 * t, -0.02, 0.3 * t),
                    )
                })
                .collect(),
        )
        .unwrap();
        write_tum(&path, &traj).unwrap();
        let back = read_tum(&path).unwrap();
        for (a, b) in traj.iter().zip(back.iter()) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.p, b.p);
            assert_eq!(a.q, b.q);
        }
    }

    #[test]
    fn report_jsonl_round_trips() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("report.jsonl");
        let report = DetectionReport {
            mode: DetectorMode::Dtw,
            acc_threshold: None,
            dtw_threshold: Some(123.5),
            reference: None,
            slice_len: Some(40),
            records: vec![
                DetectionRecord::Slice {
                    start_index: 0,
                    len: 40,
                    verdict: Verdict::Normal,
                    best_distance: 1.25,
                    matched_template_id: "t3".into(),
                },
                DetectionRecord::Residual {
                    start_index: 40,
                    len: 7,
                },
            ],
        };
        write_report_jsonl(&path, &report).unwrap();
        assert_eq!(read_report_jsonl(&path).unwrap(), report);
        // One meta line plus one line per record.
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().contains("\"meta\""));
    }

    #[test]
    fn mask_round_trips() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("mask.json");
        let mask = FaultMask::from_indices(100, &[3, 4, 5, 70]);
        write_mask_json(&path, &mask).unwrap();
        assert_eq!(read_mask_json(&path).unwrap(), mask);
    }

    proptest! {
        /// Shortest-repr float writing means CSV round-trips are exact.
        #[test]
        fn csv_round_trip_is_exact(
            values in proptest::collection::vec(
                (-1e9f64..1e9, -1e9f64..1e9, -1e9f64..1e9),
                1..20,
            )
        ) {
            let dir = TempDir::new().unwrap();
            let path = dir.path().join("rt.csv");
            let stream: Vec<ImuSample> = values
                .iter()
                .enumerate()
                .map(|(i, &(x, y, z))| ImuSample::new(i as f64, Vector3::new(x, y, z), None))
                .collect();
            write_imu_csv(&path, &stream).unwrap();
            let back = read_imu_csv(&path).unwrap();
            prop_assert_eq!(back, stream);
        }
    }
}
