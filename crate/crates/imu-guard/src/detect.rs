//! Fault detection over IMU streams.
//!
//! Two detectors: a per-sample threshold on the deviation from the static
//! gravity reference, and a slice-wise DTW match against a library of
//! known-good motion templates. Template libraries are extracted from clean
//! recordings with per-label k-medoids under DTW distance, and the DTW
//! decision threshold is calibrated as a quantile of best-match distances
//! over clean validation slices.

use serde::{Deserialize, Serialize};

use crate::dtw::{best_match, dtw_distance, Series};
use crate::error::{Error, Result};
use crate::types::{ImuSample, WorldModel};

/// Channel layout of a detection series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesDims {
    /// Accelerometer only.
    Three,
    /// Accelerometer plus gyroscope, concatenated as (ax, ay, az, gx, gy, gz).
    Six,
}

impl SeriesDims {
    pub fn channels(self) -> usize {
        match self {
            SeriesDims::Three => 3,
            SeriesDims::Six => 6,
        }
    }

    pub fn from_channels(d: usize) -> Result<Self> {
        match d {
            3 => Ok(SeriesDims::Three),
            6 => Ok(SeriesDims::Six),
            _ => Err(Error::ShapeMismatch(format!("unsupported dimension d = {d}"))),
        }
    }
}

/// A fixed-length, non-overlapping window of consecutive samples; the unit of
/// DTW detection and substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub start_index: usize,
    pub samples: Vec<ImuSample>,
}

impl Slice {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// View the slice as an N x d series. Gyro channels are scaled by
    /// `gyro_weight` (rad/s and m/s² are incommensurate; the weight is
    /// recorded in the template library so matching stays consistent).
    pub fn series(&self, dims: SeriesDims, gyro_weight: f64) -> Result<Series> {
        let rows: Result<Vec<Vec<f64>>> = self
            .samples
            .iter()
            .map(|s| match dims {
                SeriesDims::Three => Ok(vec![s.acc.x, s.acc.y, s.acc.z]),
                SeriesDims::Six => {
                    let g = s.gyro.ok_or_else(|| {
                        Error::ShapeMismatch(
                            "six-channel detection requires gyro data on every sample".into(),
                        )
                    })?;
                    Ok(vec![
                        s.acc.x,
                        s.acc.y,
                        s.acc.z,
                        g.x * gyro_weight,
                        g.y * gyro_weight,
                        g.z * gyro_weight,
                    ])
                }
            })
            .collect();
        Series::from_rows(&rows?)
    }
}

/// Full slices plus the trailing partial window, which is carried through
/// undetected and unmitigated.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicedStream {
    pub slices: Vec<Slice>,
    pub residual: Option<Slice>,
}

/// Group a stream into `floor(len / slice_len)` non-overlapping slices.
pub fn slice_stream(stream: &[ImuSample], slice_len: usize) -> Result<SlicedStream> {
    if slice_len == 0 {
        return Err(Error::Config("slice length must be >= 1".into()));
    }
    let full = stream.len() / slice_len;
    let slices = (0..full)
        .map(|i| Slice {
            start_index: i * slice_len,
            samples: stream[i * slice_len..(i + 1) * slice_len].to_vec(),
        })
        .collect();
    let residual_start = full * slice_len;
    let residual = (residual_start < stream.len()).then(|| Slice {
        start_index: residual_start,
        samples: stream[residual_start..].to_vec(),
    });
    Ok(SlicedStream { slices, residual })
}

/// A known-good motion pattern. Rows hold raw SI values; the gyro weight is
/// applied only when building match series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub label: String,
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<TemplateSource>,
}

/// Provenance of an extracted template: which recording and sample offset
/// the medoid window came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSource {
    pub recording: usize,
    pub offset: usize,
}

/// Serializable template library (the `templates.json` schema).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateLibrary {
    pub version: u32,
    pub d: usize,
    #[serde(rename = "N")]
    pub template_len: usize,
    pub gyro_weight: f64,
    pub templates: Vec<Template>,
}

pub const TEMPLATE_LIBRARY_VERSION: u32 = 1;

impl TemplateLibrary {
    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Config("template library is empty".into()));
        }
        if self.d != 3 && self.d != 6 {
            return Err(Error::ShapeMismatch(format!(
                "library dimension d = {} (expected 3 or 6)",
                self.d
            )));
        }
        for t in &self.templates {
            if t.rows.len() != self.template_len {
                return Err(Error::ShapeMismatch(format!(
                    "template '{}' has {} rows, library N = {}",
                    t.id,
                    t.rows.len(),
                    self.template_len
                )));
            }
            for row in &t.rows {
                if row.len() != self.d {
                    return Err(Error::ShapeMismatch(format!(
                        "template '{}' row has {} channels, library d = {}",
                        t.id,
                        row.len(),
                        self.d
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("template entry"));
                }
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> Result<SeriesDims> {
        SeriesDims::from_channels(self.d)
    }

    pub fn template_by_id(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// Series used for matching: gyro channels scaled by the library weight,
    /// optionally z-scored per channel.
    pub fn match_series(&self, zscore: bool) -> Result<Vec<Series>> {
        self.templates
            .iter()
            .map(|t| {
                let rows: Vec<Vec<f64>> = t
                    .rows
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .map(|(c, &v)| if c >= 3 { v * self.gyro_weight } else { v })
                            .collect()
                    })
                    .collect();
                let s = Series::from_rows(&rows)?;
                Ok(if zscore { s.z_scored() } else { s })
            })
            .collect()
    }
}

/// Which detector runs and with what parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub mode: DetectorMode,
    /// Per-axis deviation bound from the static reference, m/s² (threshold mode).
    pub acc_threshold: f64,
    /// Best-match distance bound (dtw mode).
    pub dtw_threshold: f64,
    /// Slice length M.
    pub slice_len: usize,
    pub dims: SeriesDims,
    /// Worker threads for template matching.
    pub parallelism: usize,
    /// Per-channel z-scoring of slices and templates before matching
    /// (off by default; comparisons are in raw SI units).
    pub zscore: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    Threshold,
    Dtw,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            mode: DetectorMode::Dtw,
            acc_threshold: 12.0,
            dtw_threshold: 0.0,
            slice_len: 40,
            dims: SeriesDims::Six,
            parallelism: 1,
            zscore: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            DetectorMode::Threshold if self.acc_threshold <= 0.0 => {
                return Err(Error::Config("acc_threshold must be positive".into()))
            }
            DetectorMode::Dtw if self.dtw_threshold < 0.0 => {
                return Err(Error::Config("dtw_threshold must be >= 0".into()))
            }
            _ => {}
        }
        if self.slice_len == 0 {
            return Err(Error::Config("slice_len must be >= 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Normal,
    Abnormal,
}

/// One line of a detection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectionRecord {
    /// DTW mode: one record per full slice.
    Slice {
        start_index: usize,
        len: usize,
        verdict: Verdict,
        best_distance: f64,
        matched_template_id: String,
    },
    /// Threshold mode: one record per run of consecutive flagged samples.
    SampleRun {
        start_index: usize,
        flagged_sample_indices: Vec<usize>,
        /// Per flagged sample, which axes exceeded the bound (x, y, z).
        flagged_axes: Vec<[bool; 3]>,
    },
    /// Trailing partial window, passed through unprocessed.
    Residual { start_index: usize, len: usize },
}

/// Detection outcome plus the configuration echo mitigation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub mode: DetectorMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtw_threshold: Option<f64>,
    /// Static reference the threshold detector compared against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_len: Option<usize>,
    pub records: Vec<DetectionRecord>,
}

impl DetectionReport {
    /// All flagged sample indices (threshold mode), in stream order.
    pub fn flagged_samples(&self) -> Vec<(usize, [bool; 3])> {
        let mut out = Vec::new();
        for r in &self.records {
            if let DetectionRecord::SampleRun {
                flagged_sample_indices,
                flagged_axes,
                ..
            } = r
            {
                out.extend(flagged_sample_indices.iter().copied().zip(flagged_axes.iter().copied()));
            }
        }
        out
    }

    /// Slices judged abnormal (dtw mode): (start_index, len, template id).
    pub fn abnormal_slices(&self) -> Vec<(usize, usize, &str)> {
        self.records
            .iter()
            .filter_map(|r| match r {
                DetectionRecord::Slice {
                    start_index,
                    len,
                    verdict: Verdict::Abnormal,
                    matched_template_id,
                    ..
                } => Some((*start_index, *len, matched_template_id.as_str())),
                _ => None,
            })
            .collect()
    }
}

/// The static reference the threshold detector measures deviations from:
/// gravity on z, zero on x/y. Raw accelerometer readings include gravity, so
/// thresholding the deviation from this vector (rather than from zero) keeps
/// the z axis comparable to x and y.
pub fn static_reference(world: &WorldModel) -> [f64; 3] {
    [0.0, 0.0, world.gravity.norm()]
}

/// Flag every sample with any accelerometer axis deviating more than
/// `acc_threshold` from the static reference.
pub fn detect_threshold(
    stream: &[ImuSample],
    world: &WorldModel,
    cfg: &DetectorConfig,
) -> Result<DetectionReport> {
    cfg.validate()?;
    if cfg.mode != DetectorMode::Threshold {
        return Err(Error::Config("detector config is not in threshold mode".into()));
    }
    let reference = static_reference(world);
    let mut records = Vec::new();
    let mut run_indices: Vec<usize> = Vec::new();
    let mut run_axes: Vec<[bool; 3]> = Vec::new();

    let flush = |indices: &mut Vec<usize>, axes: &mut Vec<[bool; 3]>, records: &mut Vec<DetectionRecord>| {
        if !indices.is_empty() {
            records.push(DetectionRecord::SampleRun {
                start_index: indices[0],
                flagged_sample_indices: std::mem::take(indices),
                flagged_axes: std::mem::take(axes),
            });
        }
    };

    for (i, s) in stream.iter().enumerate() {
        let axes = [
            (s.acc.x - reference[0]).abs() > cfg.acc_threshold,
            (s.acc.y - reference[1]).abs() > cfg.acc_threshold,
            (s.acc.z - reference[2]).abs() > cfg.acc_threshold,
        ];
        if axes.iter().any(|&a| a) {
            if !run_indices.is_empty() && *run_indices.last().unwrap() + 1 != i {
                flush(&mut run_indices, &mut run_axes, &mut records);
            }
            run_indices.push(i);
            run_axes.push(axes);
        } else {
            flush(&mut run_indices, &mut run_axes, &mut records);
        }
    }
    flush(&mut run_indices, &mut run_axes, &mut records);

    Ok(DetectionReport {
        mode: DetectorMode::Threshold,
        acc_threshold: Some(cfg.acc_threshold),
        dtw_threshold: None,
        reference: Some(reference),
        slice_len: None,
        records,
    })
}

/// Classify each full slice by its best template match: normal iff the best
/// DTW distance is within the threshold.
pub fn detect_dtw(
    sliced: &SlicedStream,
    library: &TemplateLibrary,
    cfg: &DetectorConfig,
) -> Result<DetectionReport> {
    cfg.validate()?;
    if cfg.mode != DetectorMode::Dtw {
        return Err(Error::Config("detector config is not in dtw mode".into()));
    }
    library.validate()?;
    if library.d != cfg.dims.channels() {
        return Err(Error::ShapeMismatch(format!(
            "library d = {} but detector expects {}",
            library.d,
            cfg.dims.channels()
        )));
    }
    let templates = library.match_series(cfg.zscore)?;

    let mut records = Vec::with_capacity(sliced.slices.len() + 1);
    for slice in &sliced.slices {
        let mut series = slice.series(cfg.dims, library.gyro_weight)?;
        if cfg.zscore {
            series = series.z_scored();
        }
        let result = best_match(&series, &templates, cfg.parallelism)?;
        let verdict = if result.distance <= cfg.dtw_threshold {
            Verdict::Normal
        } else {
            Verdict::Abnormal
        };
        records.push(DetectionRecord::Slice {
            start_index: slice.start_index,
            len: slice.len(),
            verdict,
            best_distance: result.distance,
            matched_template_id: library.templates[result.template_index].id.clone(),
        });
    }
    if let Some(res) = &sliced.residual {
        records.push(DetectionRecord::Residual {
            start_index: res.start_index,
            len: res.len(),
        });
    }

    Ok(DetectionReport {
        mode: DetectorMode::Dtw,
        acc_threshold: None,
        dtw_threshold: Some(cfg.dtw_threshold),
        reference: None,
        slice_len: Some(cfg.slice_len),
        records,
    })
}

/// A recording known to be glitch-free, tagged with the motion it shows
/// (e.g. "straight", "circling", "climbing", "downhill").
#[derive(Debug, Clone)]
pub struct LabeledStream {
    pub label: String,
    pub samples: Vec<ImuSample>,
}

/// Cap on candidate windows per label during extraction; beyond this the
/// windows are subsampled at an even stride to keep the pairwise distance
/// matrix tractable.
const MAX_CANDIDATES_PER_LABEL: usize = 512;

/// Extract `count` templates of length `template_len` from clean recordings.
///
/// Candidates are the non-overlapping windows of each recording; each label
/// gets an even share of the count and contributes its k-medoids under DTW
/// distance, so templates are always real measured windows rather than
/// synthetic averages.
pub fn extract_templates(
    recordings: &[LabeledStream],
    template_len: usize,
    count: usize,
    dims: SeriesDims,
    gyro_weight: f64,
) -> Result<TemplateLibrary> {
    if template_len == 0 || count == 0 {
        return Err(Error::Config("template length and count must be >= 1".into()));
    }
    if recordings.is_empty() {
        return Err(Error::EmptyInput("recordings"));
    }
    let total: usize = recordings.iter().map(|r| r.samples.len()).sum();
    if total < count * template_len {
        return Err(Error::InsufficientData(format!(
            "{total} samples cannot yield {count} templates of length {template_len}"
        )));
    }

    // Labels in first-appearance order.
    let mut labels: Vec<&str> = Vec::new();
    for r in recordings {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }

    struct Candidate {
        recording: usize,
        offset: usize,
        series: Series,
        rows: Vec<Vec<f64>>,
    }

    let mut per_label: Vec<Vec<Candidate>> =
        (0..labels.len()).map(|_| Vec::new()).collect();
    for (ri, rec) in recordings.iter().enumerate() {
        let li = labels.iter().position(|&l| l == rec.label).unwrap();
        for w in 0..rec.samples.len() / template_len {
            let offset = w * template_len;
            let slice = Slice {
                start_index: offset,
                samples: rec.samples[offset..offset + template_len].to_vec(),
            };
            let series = slice.series(dims, gyro_weight)?;
            let rows = slice
                .samples
                .iter()
                .map(|s| match dims {
                    SeriesDims::Three => vec![s.acc.x, s.acc.y, s.acc.z],
                    SeriesDims::Six => {
                        let g = s.gyro.expect("validated by series()");
                        vec![s.acc.x, s.acc.y, s.acc.z, g.x, g.y, g.z]
                    }
                })
                .collect();
            per_label[li].push(Candidate {
                recording: ri,
                offset,
                series,
                rows,
            });
        }
    }

    // Even quota split: the first (count % labels) labels get one extra.
    let base = count / labels.len();
    let extra = count % labels.len();

    let mut templates = Vec::with_capacity(count);
    for (li, candidates) in per_label.iter_mut().enumerate() {
        let quota = base + usize::from(li < extra);
        if quota == 0 {
            continue;
        }
        if candidates.len() > MAX_CANDIDATES_PER_LABEL {
            let stride = candidates.len().div_ceil(MAX_CANDIDATES_PER_LABEL);
            let mut kept = Vec::new();
            for (i, c) in candidates.drain(..).enumerate() {
                if i % stride == 0 {
                    kept.push(c);
                }
            }
            *candidates = kept;
        }
        if candidates.len() < quota {
            return Err(Error::InsufficientData(format!(
                "label '{}' has {} candidate windows but needs {}",
                labels[li],
                candidates.len(),
                quota
            )));
        }
        let series: Vec<&Series> = candidates.iter().map(|c| &c.series).collect();
        let mut medoids = k_medoids(&series, quota)?;
        medoids.sort_unstable();
        for m in medoids {
            let c = &candidates[m];
            templates.push(Template {
                id: format!("t{}", templates.len()),
                label: labels[li].to_string(),
                rows: c.rows.clone(),
                source: Some(TemplateSource {
                    recording: c.recording,
                    offset: c.offset,
                }),
            });
        }
    }

    let library = TemplateLibrary {
        version: TEMPLATE_LIBRARY_VERSION,
        d: dims.channels(),
        template_len,
        gyro_weight,
        templates,
    };
    library.validate()?;
    Ok(library)
}

/// Deterministic PAM: greedy build phase, then best-improvement swaps until
/// convergence. Ties always break toward the lowest candidate index.
fn k_medoids(items: &[&Series], k: usize) -> Result<Vec<usize>> {
    let n = items.len();
    if k > n {
        return Err(Error::InsufficientData(format!(
            "cannot pick {k} medoids from {n} candidates"
        )));
    }
    // Pairwise distances (symmetric).
    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dtw_distance(items[i], items[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    let total_cost = |medoids: &[usize]| -> f64 {
        (0..n)
            .map(|j| {
                medoids
                    .iter()
                    .map(|&m| dist[m][j])
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    };

    // Build: start with the 1-medoid, then greedily add.
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let first = (0..n)
        .min_by(|&a, &b| {
            let ca: f64 = dist[a].iter().sum();
            let cb: f64 = dist[b].iter().sum();
            ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
        })
        .expect("non-empty candidates");
    medoids.push(first);
    let mut nearest: Vec<f64> = (0..n).map(|j| dist[first][j]).collect();
    while medoids.len() < k {
        let next = (0..n)
            .filter(|i| !medoids.contains(i))
            .min_by(|&a, &b| {
                let ca: f64 = (0..n).map(|j| nearest[j].min(dist[a][j])).sum();
                let cb: f64 = (0..n).map(|j| nearest[j].min(dist[b][j])).sum();
                ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
            })
            .expect("fewer medoids than candidates");
        medoids.push(next);
        for (j, v) in nearest.iter_mut().enumerate() {
            *v = v.min(dist[next][j]);
        }
    }

    // Swap phase.
    let mut best_cost = total_cost(&medoids);
    for _ in 0..100 {
        let mut best_swap: Option<(usize, usize, f64)> = None;
        for mi in 0..medoids.len() {
            for c in 0..n {
                if medoids.contains(&c) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[mi] = c;
                let cost = total_cost(&trial);
                if cost + 1e-12 < best_cost
                    && best_swap.is_none_or(|(_, _, prev)| cost < prev)
                {
                    best_swap = Some((mi, c, cost));
                }
            }
        }
        match best_swap {
            Some((mi, c, cost)) => {
                medoids[mi] = c;
                best_cost = cost;
            }
            None => break,
        }
    }
    Ok(medoids)
}

/// Calibrate the DTW decision threshold: the `target_pass` quantile
/// (nearest rank) of best-match distances over clean validation slices,
/// scaled by a 1.2 safety margin.
pub fn calibrate_dtw_threshold(
    library: &TemplateLibrary,
    validation: &[Slice],
    target_pass: f64,
    cfg: &DetectorConfig,
) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::InsufficientData("no validation slices".into()));
    }
    if !(0.0 < target_pass && target_pass < 1.0) {
        return Err(Error::Config("target_pass must be in (0, 1)".into()));
    }
    library.validate()?;
    let templates = library.match_series(cfg.zscore)?;
    let mut distances = Vec::with_capacity(validation.len());
    for slice in validation {
        let mut series = slice.series(cfg.dims, library.gyro_weight)?;
        if cfg.zscore {
            series = series.z_scored();
        }
        distances.push(best_match(&series, &templates, cfg.parallelism)?.distance);
    }
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((target_pass * distances.len() as f64).ceil() as usize).clamp(1, distances.len());
    Ok(distances[rank - 1] * 1.2)
}
