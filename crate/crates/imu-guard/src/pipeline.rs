//! End-to-end pipeline: simulate (or load) a corrupted stream, build and
//! calibrate a template library, then run the requested variants — raw,
//! threshold-mitigated, DTW-mitigated — through detection, mitigation,
//! pose-anchored integration, and evaluation, writing every intermediate
//! artifact plus a comparison summary.
//!
//! Variants run concurrently; every stage consumes and produces only the
//! documented file formats, so any stage can be rerun standalone from a
//! prior run directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::{
    calibrate_dtw_threshold, detect_dtw, detect_threshold, extract_templates, slice_stream,
    DetectionReport, DetectorConfig, DetectorMode, LabeledStream, SeriesDims, TemplateLibrary,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, AlignmentMode, MetricReport, DEFAULT_LENGTHS};
use crate::ins::{integrate, AnchorConfig, IntegratorConfig, Method};
use crate::io;
use crate::mitigate::{mitigate_dtw, mitigate_threshold, MitigationConfig, MitigationMode};
use crate::sim::{
    generate_truth, inject_glitches, synthesize_imu, GlitchSpec, GroundTruth, Shape,
    TrajectorySpec,
};
use crate::types::{ImuBias, ImuSample, NavState, NoiseSpec, Trajectory, WorldModel};

pub const CONFIG_VERSION: u32 = 1;

/// Declarative run description; loadable from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Simulated input (default). Mutually exclusive with `input`.
    pub sim: Option<SimSection>,
    /// Recorded input files.
    pub input: Option<InputSection>,
    pub detection: DetectionSection,
    pub mitigation: MitigationSection,
    pub integration: IntegrationSection,
    pub evaluation: EvaluationSection,
    pub variants: Vec<VariantConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            output_dir: PathBuf::from("run"),
            sim: Some(SimSection::default()),
            input: None,
            detection: DetectionSection::default(),
            mitigation: MitigationSection::default(),
            integration: IntegrationSection::default(),
            evaluation: EvaluationSection::default(),
            variants: VariantConfig::default_set(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Glitch regime: one of `n0_1`, `n1_10`, `n50_10`, or `none`.
    pub preset: String,
    pub shape: String,
    pub poses: usize,
    pub duration: f64,
    /// IMU rate, Hz; `None` synthesizes at the pose rate.
    pub imu_rate: Option<f64>,
    /// Measurement white noise applied everywhere (the glitch regimes come
    /// on top of this).
    pub base_acc_sigma: f64,
    pub base_gyro_sigma: f64,
    /// Glitch coverage/burst overrides of the preset defaults.
    pub affected_fraction: Option<f64>,
    pub burst_len: Option<usize>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            preset: "n50_10".into(),
            shape: "ellipse3d".into(),
            poses: 2000,
            duration: 10.0,
            imu_rate: None,
            base_acc_sigma: 1.0,
            base_gyro_sigma: 0.002,
            affected_fraction: None,
            burst_len: None,
        }
    }
}

impl SimSection {
    pub fn trajectory_spec(&self) -> Result<TrajectorySpec> {
        let shape = match self.shape.as_str() {
            "ellipse3d" => Shape::Ellipse3d {
                rx: 5.0,
                ry: 4.0,
                z_amp: 1.0,
                angular_rate: 0.9,
            },
            "line" => Shape::Line {
                velocity: [1.0, 0.5, 0.0],
            },
            "figure_eight" => Shape::FigureEight {
                radius: 5.0,
                z_amp: 1.0,
                angular_rate: 0.9,
            },
            other => return Err(Error::Config(format!("unknown shape '{other}'"))),
        };
        let pose_rate = (self.poses.saturating_sub(1)) as f64 / self.duration;
        Ok(TrajectorySpec {
            shape,
            duration: self.duration,
            pose_count: self.poses,
            imu_rate: self.imu_rate.unwrap_or(pose_rate),
        })
    }

    fn glitch_spec(&self, seed: u64) -> Result<Option<GlitchSpec>> {
        if self.preset == "none" {
            return Ok(None);
        }
        let mut spec = GlitchSpec::preset(&self.preset, seed).ok_or_else(|| {
            Error::Config(format!(
                "unknown preset '{}' (expected one of {:?} or 'none')",
                self.preset,
                GlitchSpec::PRESET_NAMES
            ))
        })?;
        if let Some(f) = self.affected_fraction {
            spec.affected_fraction = f;
        }
        if let Some(b) = self.burst_len {
            spec.burst_len = b;
        }
        Ok(Some(spec))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub imu_csv: PathBuf,
    pub truth_tum: PathBuf,
    /// Exact initial state JSON; without it the initial pose comes from the
    /// truth file with a finite-difference velocity.
    pub initial_state: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub template_count: usize,
    pub template_len: usize,
    pub slice_len: usize,
    pub dims: usize,
    pub gyro_weight: f64,
    pub parallelism: usize,
    pub zscore: bool,
    /// Fraction of clean validation slices the calibrated threshold admits.
    pub target_pass: f64,
    pub acc_threshold: f64,
    /// Explicit DTW threshold; `None` calibrates from clean validation runs.
    pub dtw_threshold: Option<f64>,
    /// Existing library; `None` extracts one from a clean simulated run.
    pub templates_file: Option<PathBuf>,
    /// Number of seeded clean runs pooled for calibration.
    pub validation_runs: usize,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            template_count: 10,
            template_len: 10,
            slice_len: 40,
            dims: 6,
            gyro_weight: 1.0,
            parallelism: 1,
            zscore: false,
            target_pass: 0.99,
            acc_threshold: 12.0,
            dtw_threshold: None,
            templates_file: None,
            validation_runs: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationSection {
    /// Threshold-variant replacement rule: `clamp` or `moving_average`.
    pub threshold_mode: String,
    pub window_n: usize,
}

impl Default for MitigationSection {
    fn default() -> Self {
        Self {
            threshold_mode: "clamp".into(),
            window_n: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationSection {
    pub method: String,
    /// Pose-anchor period, s; `None` integrates open loop.
    pub anchor_period: Option<f64>,
    pub max_gap: Option<f64>,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self {
            method: "midpoint".into(),
            anchor_period: Some(1.0),
            max_gap: None,
        }
    }
}

impl IntegrationSection {
    pub fn method(&self) -> Result<Method> {
        match self.method.as_str() {
            "midpoint" => Ok(Method::Midpoint),
            "euler" => Ok(Method::Euler),
            other => Err(Error::Config(format!("unknown integration method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub align: String,
    pub lengths: Vec<f64>,
    /// Association tolerance, s; `None` uses half the median sample period.
    pub max_dt: Option<f64>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            align: "se3".into(),
            lengths: DEFAULT_LENGTHS.to_vec(),
            max_dt: None,
        }
    }
}

/// One pipeline variant: which detector feeds which mitigation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantConfig {
    pub name: String,
    /// `threshold`, `dtw`, or absent for the raw pass-through.
    pub detector: Option<String>,
    /// `clamp`, `moving_average`, or `template_substitution`.
    pub mitigation: Option<String>,
}

impl VariantConfig {
    /// The three variants compared throughout: raw pass-through,
    /// threshold-detected with the configured threshold rule, and
    /// DTW-detected with template substitution.
    pub fn default_set() -> Vec<VariantConfig> {
        vec![
            VariantConfig {
                name: "raw".into(),
                detector: None,
                mitigation: None,
            },
            VariantConfig {
                name: "threshold".into(),
                detector: Some("threshold".into()),
                mitigation: Some("clamp".into()),
            },
            VariantConfig {
                name: "dtw".into(),
                detector: Some("dtw".into()),
                mitigation: Some("template_substitution".into()),
            },
        ]
    }

    fn detector_mode(&self) -> Result<Option<DetectorMode>> {
        match self.detector.as_deref() {
            None => Ok(None),
            Some("threshold") => Ok(Some(DetectorMode::Threshold)),
            Some("dtw") => Ok(Some(DetectorMode::Dtw)),
            Some(other) => Err(Error::Config(format!("unknown detector '{other}'"))),
        }
    }

    fn mitigation_mode(&self) -> Result<Option<MitigationMode>> {
        match self.mitigation.as_deref() {
            None => Ok(None),
            Some("clamp") => Ok(Some(MitigationMode::Clamp)),
            Some("moving_average") => Ok(Some(MitigationMode::MovingAverage)),
            Some("template_substitution") => Ok(Some(MitigationMode::TemplateSubstitution)),
            Some(other) => Err(Error::Config(format!("unknown mitigation '{other}'"))),
        }
    }
}

impl PipelineConfig {
    /// Load from TOML or JSON, decided by the file extension.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: e.line(),
                msg: e.to_string(),
            })?
        } else {
            toml::from_str(&text).map_err(|e| Error::Parse {
                line: 0,
                msg: e.to_string(),
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (this build reads {CONFIG_VERSION})",
                self.version
            )));
        }
        match (&self.sim, &self.input) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set either sim or input, not both".into()))
            }
            (None, None) => {
                return Err(Error::Config("one of sim or input is required".into()))
            }
            _ => {}
        }
        if self.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        let mut names = HashSet::new();
        for v in &self.variants {
            if v.name.is_empty() || !names.insert(&v.name) {
                return Err(Error::Config(format!(
                    "variant names must be unique and non-empty (offender: '{}')",
                    v.name
                )));
            }
            let detector = v.detector_mode()?;
            let mitigation = v.mitigation_mode()?;
            match (detector, mitigation) {
                (None, None) => {}
                (Some(DetectorMode::Dtw), Some(MitigationMode::TemplateSubstitution)) => {}
                (Some(DetectorMode::Threshold), Some(MitigationMode::Clamp))
                | (Some(DetectorMode::Threshold), Some(MitigationMode::MovingAverage)) => {}
                _ => {
                    return Err(Error::Config(format!(
                        "variant '{}' pairs detector {:?} with mitigation {:?}",
                        v.name, v.detector, v.mitigation
                    )))
                }
            }
        }
        SeriesDims::from_channels(self.detection.dims)?;
        if !(0.0 < self.detection.target_pass && self.detection.target_pass < 1.0) {
            return Err(Error::Config("target_pass must be in (0, 1)".into()));
        }
        if self.detection.parallelism == 0 {
            return Err(Error::Config("parallelism must be >= 1".into()));
        }
        self.integration.method()?;
        self.evaluation.align.parse::<AlignmentMode>()?;
        if let Some(sim) = &self.sim {
            sim.trajectory_spec()?.validate()?;
            sim.glitch_spec(0)?;
        }
        if let Some(input) = &self.input {
            for path in [Some(&input.imu_csv), Some(&input.truth_tum), input.initial_state.as_ref()]
                .into_iter()
                .flatten()
            {
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "referenced input file '{}' does not exist",
                        path.display()
                    )));
                }
            }
            let needs_dtw = self
                .variants
                .iter()
                .any(|v| v.detector.as_deref() == Some("dtw"));
            if needs_dtw {
                if self.detection.templates_file.is_none() {
                    return Err(Error::Config(
                        "input mode with a dtw variant requires detection.templates_file".into(),
                    ));
                }
                if self.detection.dtw_threshold.is_none() {
                    return Err(Error::Config(
                        "input mode with a dtw variant requires detection.dtw_threshold".into(),
                    ));
                }
            }
        }
        if let Some(path) = &self.detection.templates_file {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "referenced template library '{}' does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// Per-variant comparison entry in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub name: String,
    pub detector: Option<DetectorMode>,
    pub mitigation: Option<MitigationMode>,
    /// Threshold mode: flagged samples. DTW mode: abnormal slices.
    pub flagged: usize,
    pub metrics: MetricReport,
}

/// The run comparison (`summary.json`): per-variant ATE plus relative
/// translation/yaw errors over the configured path lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: u32,
    pub seed: u64,
    pub preset: String,
    pub acc_threshold: f64,
    /// Threshold actually used by DTW variants (calibrated or configured).
    pub dtw_threshold: Option<f64>,
    pub variants: Vec<VariantSummary>,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub summary: Summary,
    pub run_dir: PathBuf,
}

/// Mix a run seed with a stage tag (splitmix64) so every random stage gets
/// an independent, reproducible stream.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_BASE_NOISE: u64 = 1;
const TAG_GLITCH: u64 = 2;
const TAG_TEMPLATES: u64 = 3;
const TAG_VALIDATION: u64 = 4;

struct PreparedInputs {
    truth: Trajectory,
    corrupted: Vec<ImuSample>,
    initial: NavState,
    library: Option<TemplateLibrary>,
    dtw_threshold: Option<f64>,
}

fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| e.in_stage(name))
}

fn synthesize_clean(sim: &SimSection, truth: &GroundTruth, seed: u64) -> Result<Vec<ImuSample>> {
    let noise = NoiseSpec::new(sim.base_acc_sigma, sim.base_gyro_sigma, seed);
    let rate = sim.imu_rate.unwrap_or_else(|| truth.pose_rate());
    synthesize_imu(truth, &ImuBias::default(), &noise, &WorldModel::default(), rate)
}

fn prepare_sim(cfg: &PipelineConfig, sim: &SimSection, run_dir: &Path) -> Result<PreparedInputs> {
    let truth = stage("simulate", generate_truth(&sim.trajectory_spec()?))?;
    stage("simulate", io::write_tum(&run_dir.join("truth.tum"), &truth.trajectory))?;

    let clean = stage(
        "simulate",
        synthesize_clean(sim, &truth, derive_seed(cfg.seed, TAG_BASE_NOISE)),
    )?;
    stage("simulate", io::write_imu_csv(&run_dir.join("clean.csv"), &clean))?;

    let (corrupted, mask) = match sim.glitch_spec(derive_seed(cfg.seed, TAG_GLITCH))? {
        Some(glitch) => stage("simulate", inject_glitches(&clean, &glitch))?,
        None => (clean.clone(), crate::sim::FaultMask::empty(clean.len())),
    };
    stage("simulate", io::write_imu_csv(&run_dir.join("corrupted.csv"), &corrupted))?;
    stage("simulate", io::write_mask_json(&run_dir.join("mask.json"), &mask))?;

    let initial = truth.trajectory.states()[0];
    stage("simulate", io::write_nav_state(&run_dir.join("initial_state.json"), &initial))?;

    let det = &cfg.detection;
    let dims = SeriesDims::from_channels(det.dims)?;
    let library = match &det.templates_file {
        Some(path) => stage("templates", io::read_template_library(path))?,
        None => {
            let source = stage(
                "templates",
                synthesize_clean(sim, &truth, derive_seed(cfg.seed, TAG_TEMPLATES)),
            )?;
            let recording = LabeledStream {
                label: sim.shape.clone(),
                samples: source,
            };
            stage(
                "templates",
                extract_templates(
                    &[recording],
                    det.template_len,
                    det.template_count,
                    dims,
                    det.gyro_weight,
                ),
            )?
        }
    };
    stage(
        "templates",
        io::write_template_library(&run_dir.join("templates.json"), &library),
    )?;

    let dtw_threshold = match det.dtw_threshold {
        Some(t) => Some(t),
        None => {
            let mut validation = Vec::new();
            for run in 0..det.validation_runs.max(1) {
                let stream = stage(
                    "calibrate",
                    synthesize_clean(
                        sim,
                        &truth,
                        derive_seed(cfg.seed, TAG_VALIDATION + run as u64),
                    ),
                )?;
                validation.extend(stage("calibrate", slice_stream(&stream, det.slice_len))?.slices);
            }
            let detector = DetectorConfig {
                mode: DetectorMode::Dtw,
                dims,
                parallelism: det.parallelism,
                zscore: det.zscore,
                slice_len: det.slice_len,
                ..DetectorConfig::default()
            };
            Some(stage(
                "calibrate",
                calibrate_dtw_threshold(&library, &validation, det.target_pass, &detector),
            )?)
        }
    };

    Ok(PreparedInputs {
        truth: truth.trajectory,
        corrupted,
        initial,
        library: Some(library),
        dtw_threshold,
    })
}

fn prepare_input(cfg: &PipelineConfig, input: &InputSection) -> Result<PreparedInputs> {
    let truth = stage("load", io::read_tum(&input.truth_tum))?;
    let corrupted = stage("load", io::read_imu_csv(&input.imu_csv))?;
    let initial = match &input.initial_state {
        Some(path) => stage("load", io::read_nav_state(path))?,
        None => {
            let states = truth.states();
            if states.len() < 2 {
                return Err(Error::InsufficientData(
                    "truth trajectory needs >= 2 poses to derive an initial velocity".into(),
                )
                .in_stage("load"));
            }
            let dt = states[1].t - states[0].t;
            NavState::new(
                states[0].t,
                states[0].p,
                (states[1].p - states[0].p) / dt,
                states[0].q,
            )
        }
    };
    // Presence of the library and threshold is enforced by validate().
    let library = match &cfg.detection.templates_file {
        Some(path) => Some(stage("load", io::read_template_library(path))?),
        None => None,
    };
    let dtw_threshold = cfg.detection.dtw_threshold;
    Ok(PreparedInputs {
        truth,
        corrupted,
        initial,
        library,
        dtw_threshold,
    })
}

/// Execute the configured pipeline, writing all artifacts under
/// `cfg.output_dir` (one subdirectory per variant) and returning the summary.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let run_dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&run_dir)?;

    let prepared = match (&cfg.sim, &cfg.input) {
        (Some(sim), None) => prepare_sim(cfg, sim, &run_dir)?,
        (None, Some(input)) => prepare_input(cfg, input)?,
        _ => unreachable!("validated"),
    };

    let mut results: Vec<Option<Result<VariantSummary>>> =
        (0..cfg.variants.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let prepared = &prepared;
        let run_dir = &run_dir;
        for (variant, slot) in cfg.variants.iter().zip(results.iter_mut()) {
            scope.spawn(move || {
                *slot = Some(run_variant(cfg, variant, prepared, run_dir));
            });
        }
    });

    let mut variants = Vec::with_capacity(results.len());
    for slot in results {
        variants.push(slot.expect("variant thread completed")?);
    }

    let summary = Summary {
        version: CONFIG_VERSION,
        seed: cfg.seed,
        preset: cfg
            .sim
            .as_ref()
            .map(|s| s.preset.clone())
            .unwrap_or_else(|| "input".into()),
        acc_threshold: cfg.detection.acc_threshold,
        dtw_threshold: prepared.dtw_threshold,
        variants,
    };
    io::write_json_pretty(&run_dir.join("summary.json"), &summary)?;
    Ok(PipelineOutcome { summary, run_dir })
}

fn run_variant(
    cfg: &PipelineConfig,
    variant: &VariantConfig,
    prepared: &PreparedInputs,
    run_dir: &Path,
) -> Result<VariantSummary> {
    let dir = run_dir.join(&variant.name);
    std::fs::create_dir_all(&dir).map_err(|e| Error::from(e).in_stage(&variant.name))?;
    let det = &cfg.detection;
    let dims = SeriesDims::from_channels(det.dims)?;
    let detector_mode = variant.detector_mode()?;
    let mitigation_mode = variant.mitigation_mode()?;

    let mut flagged = 0usize;
    let stream: Vec<ImuSample> = match detector_mode {
        None => prepared.corrupted.clone(),
        Some(DetectorMode::Threshold) => {
            let detector = DetectorConfig {
                mode: DetectorMode::Threshold,
                acc_threshold: det.acc_threshold,
                slice_len: det.slice_len,
                dims,
                parallelism: det.parallelism,
                zscore: det.zscore,
                ..DetectorConfig::default()
            };
            let report = stage(
                &format!("{}/detect", variant.name),
                detect_threshold(&prepared.corrupted, &WorldModel::default(), &detector),
            )?;
            flagged = report.flagged_samples().len();
            write_detection_outputs(&dir, &report, &variant.name)?;
            let mut mit = MitigationConfig::new(
                mitigation_mode.expect("validated: threshold detector has mitigation"),
            );
            mit.window_n = cfg.mitigation.window_n;
            let (cleaned, log) = stage(
                &format!("{}/mitigate", variant.name),
                mitigate_threshold(&prepared.corrupted, &report, &mit),
            )?;
            stage(
                &format!("{}/mitigate", variant.name),
                io::write_mitigation_log(&dir.join("mitigation.json"), &log),
            )?;
            cleaned
        }
        Some(DetectorMode::Dtw) => {
            let library = prepared
                .library
                .as_ref()
                .expect("validated: dtw variant has a library");
            let detector = DetectorConfig {
                mode: DetectorMode::Dtw,
                dtw_threshold: prepared
                    .dtw_threshold
                    .expect("validated: dtw variant has a threshold"),
                slice_len: det.slice_len,
                dims,
                parallelism: det.parallelism,
                zscore: det.zscore,
                ..DetectorConfig::default()
            };
            let sliced = stage(
                &format!("{}/detect", variant.name),
                slice_stream(&prepared.corrupted, det.slice_len),
            )?;
            let report = stage(
                &format!("{}/detect", variant.name),
                detect_dtw(&sliced, library, &detector),
            )?;
            flagged = report.abnormal_slices().len();
            write_detection_outputs(&dir, &report, &variant.name)?;
            let mit = MitigationConfig::new(MitigationMode::TemplateSubstitution);
            let (cleaned, log) = stage(
                &format!("{}/mitigate", variant.name),
                mitigate_dtw(&prepared.corrupted, &report, library, &mit),
            )?;
            stage(
                &format!("{}/mitigate", variant.name),
                io::write_mitigation_log(&dir.join("mitigation.json"), &log),
            )?;
            cleaned
        }
    };
    stage(
        &format!("{}/mitigate", variant.name),
        io::write_imu_csv(&dir.join("cleaned.csv"), &stream),
    )?;

    let integrator = IntegratorConfig {
        method: cfg.integration.method()?,
        world: WorldModel::default(),
        bias: ImuBias::default(),
        max_gap: cfg.integration.max_gap,
        anchor: cfg.integration.anchor_period.map(|period| AnchorConfig {
            period,
            source: prepared.truth.clone(),
        }),
    };
    let est = stage(
        &format!("{}/integrate", variant.name),
        integrate(&prepared.initial, &stream, &integrator),
    )?;
    stage(
        &format!("{}/integrate", variant.name),
        io::write_tum(&dir.join("est.tum"), &est),
    )?;

    let max_dt = cfg.evaluation.max_dt.unwrap_or_else(|| {
        let states = prepared.truth.states();
        if states.len() >= 2 {
            0.5 * (states[states.len() - 1].t - states[0].t) / (states.len() - 1) as f64
        } else {
            0.01
        }
    });
    let metrics = stage(
        &format!("{}/evaluate", variant.name),
        evaluate(
            &est,
            &prepared.truth,
            cfg.evaluation.align.parse()?,
            &cfg.evaluation.lengths,
            max_dt,
        ),
    )?;
    stage(
        &format!("{}/evaluate", variant.name),
        io::write_json_pretty(&dir.join("metrics.json"), &metrics),
    )?;

    Ok(VariantSummary {
        name: variant.name.clone(),
        detector: detector_mode,
        mitigation: mitigation_mode,
        flagged,
        metrics,
    })
}

fn write_detection_outputs(dir: &Path, report: &DetectionReport, variant: &str) -> Result<()> {
    stage(
        &format!("{variant}/detect"),
        io::write_report_jsonl(&dir.join("report.jsonl"), report),
    )
}
