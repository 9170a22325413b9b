//! Fault mitigation: replace detected-abnormal measurements.
//!
//! Threshold-mode flags are repaired per sample (signed clamp to the
//! threshold, or the mean of prior clean samples); DTW-mode abnormal slices
//! are replaced wholesale by their best-matching template, linearly resampled
//! from template length N to slice length M. Timestamps are never touched.

use serde::{Deserialize, Serialize};

use crate::detect::{DetectionReport, DetectorMode, TemplateLibrary};
use crate::error::{Error, Result};
use crate::types::ImuSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationMode {
    Clamp,
    MovingAverage,
    TemplateSubstitution,
}

/// Template length adaptation strategy (linear is the only one implemented).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MitigationConfig {
    pub mode: MitigationMode,
    /// Clean-sample window for moving-average replacement.
    pub window_n: usize,
    pub resample: ResampleMode,
}

impl MitigationConfig {
    pub fn new(mode: MitigationMode) -> Self {
        Self {
            mode,
            window_n: 5,
            resample: ResampleMode::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_n == 0 {
            return Err(Error::Config("window_n must be >= 1".into()));
        }
        Ok(())
    }
}

/// What changed and by which rule; one entry per repaired sample or slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MitigationEntry {
    Clamp { index: usize, axes: [bool; 3] },
    MovingAverage { index: usize, axes: [bool; 3] },
    /// Moving-average requested but no clean predecessors existed.
    ClampFallback { index: usize, axes: [bool; 3] },
    TemplateSubstitution {
        start_index: usize,
        len: usize,
        template_id: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MitigationLog {
    pub entries: Vec<MitigationEntry>,
}

/// Repair threshold-mode flags.
///
/// Clamp sets each flagged axis to `reference ± acc_threshold`, keeping the
/// deviation's sign. Moving average replaces the axis value with the mean of
/// that axis over the most recent `window_n` fully-unflagged samples; with no
/// clean predecessor at all it falls back to the clamp and logs that.
pub fn mitigate_threshold(
    stream: &[ImuSample],
    report: &DetectionReport,
    cfg: &MitigationConfig,
) -> Result<(Vec<ImuSample>, MitigationLog)> {
    cfg.validate()?;
    if report.mode != DetectorMode::Threshold {
        return Err(Error::CorruptReport(
            "threshold mitigation requires a threshold-mode report".into(),
        ));
    }
    if cfg.mode == MitigationMode::TemplateSubstitution {
        return Err(Error::Config(
            "template substitution applies to dtw reports; use mitigate_dtw".into(),
        ));
    }
    let threshold = report
        .acc_threshold
        .ok_or_else(|| Error::CorruptReport("report is missing acc_threshold".into()))?;
    let reference = report
        .reference
        .ok_or_else(|| Error::CorruptReport("report is missing the static reference".into()))?;

    let flagged = report.flagged_samples();
    let mut flagged_any = vec![false; stream.len()];
    for (i, _) in &flagged {
        if *i >= stream.len() {
            return Err(Error::CorruptReport(format!(
                "flagged index {i} outside stream of {}",
                stream.len()
            )));
        }
        flagged_any[*i] = true;
    }

    let clamp = |value: f64, axis: usize| -> f64 {
        reference[axis] + (value - reference[axis]).signum() * threshold
    };

    let mut out = stream.to_vec();
    let mut log = MitigationLog::default();
    for (index, axes) in flagged {
        let mut averaged = [false; 3];
        let mut fell_back = [false; 3];
        for axis in 0..3 {
            if !axes[axis] {
                continue;
            }
            match cfg.mode {
                MitigationMode::Clamp => {
                    out[index].acc[axis] = clamp(stream[index].acc[axis], axis);
                }
                MitigationMode::MovingAverage => {
                    let mut values = Vec::with_capacity(cfg.window_n);
                    for j in (0..index).rev() {
                        if !flagged_any[j] {
                            values.push(stream[j].acc[axis]);
                            if values.len() == cfg.window_n {
                                break;
                            }
                        }
                    }
                    if values.is_empty() {
                        out[index].acc[axis] = clamp(stream[index].acc[axis], axis);
                        fell_back[axis] = true;
                    } else {
                        out[index].acc[axis] =
                            values.iter().sum::<f64>() / values.len() as f64;
                        averaged[axis] = true;
                    }
                }
                MitigationMode::TemplateSubstitution => unreachable!("rejected above"),
            }
        }
        match cfg.mode {
            MitigationMode::Clamp => log.entries.push(MitigationEntry::Clamp { index, axes }),
            MitigationMode::MovingAverage => {
                if averaged.iter().any(|&a| a) {
                    log.entries.push(MitigationEntry::MovingAverage {
                        index,
                        axes: averaged,
                    });
                }
                if fell_back.iter().any(|&a| a) {
                    log.entries.push(MitigationEntry::ClampFallback {
                        index,
                        axes: fell_back,
                    });
                }
            }
            MitigationMode::TemplateSubstitution => unreachable!("rejected above"),
        }
    }
    Ok((out, log))
}

/// Replace each abnormal slice's channel values with its matched template,
/// resampled to the slice length. Only channels present in the library are
/// substituted (a d = 3 library leaves gyro data untouched); normal and
/// residual slices pass through bit-identical.
pub fn mitigate_dtw(
    stream: &[ImuSample],
    report: &DetectionReport,
    library: &TemplateLibrary,
    cfg: &MitigationConfig,
) -> Result<(Vec<ImuSample>, MitigationLog)> {
    cfg.validate()?;
    if report.mode != DetectorMode::Dtw {
        return Err(Error::CorruptReport(
            "dtw mitigation requires a dtw-mode report".into(),
        ));
    }
    library.validate()?;

    let mut out = stream.to_vec();
    let mut log = MitigationLog::default();
    for (start, len, template_id) in report.abnormal_slices() {
        if start + len > stream.len() {
            return Err(Error::CorruptReport(format!(
                "slice [{start}, {}) outside stream of {}",
                start + len,
                stream.len()
            )));
        }
        let template = library.template_by_id(template_id).ok_or_else(|| {
            Error::CorruptReport(format!("matched template '{template_id}' not in library"))
        })?;
        let rows = linear_resample(&template.rows, len);
        for (j, row) in rows.iter().enumerate() {
            let sample = &mut out[start + j];
            sample.acc.x = row[0];
            sample.acc.y = row[1];
            sample.acc.z = row[2];
            if library.d == 6 {
                sample.gyro = Some(nalgebra::Vector3::new(row[3], row[4], row[5]));
            }
        }
        log.entries.push(MitigationEntry::TemplateSubstitution {
            start_index: start,
            len,
            template_id: template_id.to_string(),
        });
    }
    Ok((out, log))
}

/// Resample `rows` to `target` rows by linear interpolation along the row
/// index. Exact at shared knots; every output value stays inside the convex
/// hull of its two bracketing rows.
fn linear_resample(rows: &[Vec<f64>], target: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    if n == target {
        return rows.to_vec();
    }
    if n == 1 || target == 1 {
        return vec![rows[0].clone(); target];
    }
    let scale = (n - 1) as f64 / (target - 1) as f64;
    (0..target)
        .map(|j| {
            let x = j as f64 * scale;
            let i0 = (x.floor() as usize).min(n - 2);
            let frac = x - i0 as f64;
            rows[i0]
                .iter()
                .zip(&rows[i0 + 1])
                .map(|(a, b)| a + frac * (b - a))
                .collect()
        })
        .collect()
}
