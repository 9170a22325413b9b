//! Synthetic ground truth and IMU stream generation.
//!
//! Trajectories are analytic paths with closed-form first and second
//! derivatives, so the synthesized accelerations and angular rates are exact
//! rather than finite-differenced. Glitches are additive Gaussian bursts on
//! selected axes, with the exact fault mask returned for detector scoring.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quaternion;
use crate::types::{measure, ImuBias, ImuSample, NavState, NoiseSpec, Trajectory, WorldModel};

/// Roll/pitch swing of the tangent-following orientation profile, rad.
const ROLL_AMP: f64 = 0.05;
const PITCH_AMP: f64 = 0.05;

/// Analytic path family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Elliptical x-y orbit with sinusoidal z (two vertical cycles per lap).
    Ellipse3d {
        rx: f64,
        ry: f64,
        z_amp: f64,
        angular_rate: f64,
    },
    /// Constant-velocity straight line from the origin.
    Line { velocity: [f64; 3] },
    /// Planar figure eight with sinusoidal z.
    FigureEight {
        radius: f64,
        z_amp: f64,
        angular_rate: f64,
    },
}

/// Ground-truth trajectory description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub shape: Shape,
    /// Total time span, s.
    pub duration: f64,
    /// Number of poses sampled uniformly over the span (endpoints included).
    pub pose_count: usize,
    /// Nominal IMU rate, Hz (used by the CLI as the synthesis default).
    pub imu_rate: f64,
}

impl TrajectorySpec {
    /// Default simulation setup: 2000 poses over 10 s on an elliptical orbit
    /// long enough (about 40 m of path) to evaluate relative errors at 35 m.
    pub fn default_ellipse() -> Self {
        Self {
            shape: Shape::Ellipse3d {
                rx: 5.0,
                ry: 4.0,
                z_amp: 0.3,
                angular_rate: 0.9,
            },
            duration: 10.0,
            pose_count: 2000,
            imu_rate: 200.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pose_count < 2 {
            return Err(Error::Config("pose_count must be >= 2".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config("duration must be positive".into()));
        }
        if !(self.imu_rate.is_finite() && self.imu_rate > 0.0) {
            return Err(Error::Config("imu_rate must be positive".into()));
        }
        match self.shape {
            Shape::Ellipse3d {
                rx,
                ry,
                z_amp,
                angular_rate,
            } => {
                if rx <= 0.0 || ry <= 0.0 || z_amp < 0.0 || angular_rate == 0.0 {
                    return Err(Error::Config(
                        "ellipse3d requires positive radii and a nonzero angular rate".into(),
                    ));
                }
            }
            Shape::Line { velocity } => {
                if velocity.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("line velocity must be finite".into()));
                }
            }
            Shape::FigureEight {
                radius,
                z_amp,
                angular_rate,
            } => {
                if radius <= 0.0 || z_amp < 0.0 || angular_rate == 0.0 {
                    return Err(Error::Config(
                        "figure_eight requires a positive radius and a nonzero angular rate".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Exact kinematics at one instant.
struct PathPoint {
    p: Vector3<f64>,
    v: Vector3<f64>,
    a: Vector3<f64>,
    q: Quaternion,
    w_body: Vector3<f64>,
}

/// Evaluate the analytic path at time `t`.
fn eval_path(shape: &Shape, t: f64) -> PathPoint {
    match *shape {
        Shape::Line { velocity } => {
            let v = Vector3::from(velocity);
            let yaw = if v.x == 0.0 && v.y == 0.0 {
                0.0
            } else {
                v.y.atan2(v.x)
            };
            PathPoint {
                p: v * t,
                v,
                a: Vector3::zeros(),
                q: Quaternion::from_euler_zyx(0.0, 0.0, yaw),
                w_body: Vector3::zeros(),
            }
        }
        Shape::Ellipse3d {
            rx,
            ry,
            z_amp,
            angular_rate: w,
        } => {
            let a = w * t;
            let (sa, ca) = a.sin_cos();
            let (s2a, c2a) = (2.0 * a).sin_cos();
            let p = Vector3::new(rx * ca, ry * sa, z_amp * s2a);
            let v = Vector3::new(-rx * w * sa, ry * w * ca, 2.0 * z_amp * w * c2a);
            let acc = Vector3::new(-rx * w * w * ca, -ry * w * w * sa, -4.0 * z_amp * w * w * s2a);
            tangent_frame(p, v, acc, a, w)
        }
        Shape::FigureEight {
            radius: r,
            z_amp,
            angular_rate: w,
        } => {
            let a = w * t;
            let (sa, ca) = a.sin_cos();
            let (s2a, c2a) = (2.0 * a).sin_cos();
            let p = Vector3::new(r * sa, 0.5 * r * s2a, z_amp * s2a);
            let v = Vector3::new(r * w * ca, r * w * c2a, 2.0 * z_amp * w * c2a);
            let acc = Vector3::new(-r * w * w * sa, -2.0 * r * w * w * s2a, -4.0 * z_amp * w * w * s2a);
            tangent_frame(p, v, acc, a, w)
        }
    }
}

/// Orientation that follows the planar path tangent (exact yaw from the
/// velocity direction), with small sinusoidal roll and pitch. Body rates come
/// from the exact ZYX Euler-rate kinematics, so no numerical differentiation
/// is involved anywhere.
fn tangent_frame(p: Vector3<f64>, v: Vector3<f64>, a: Vector3<f64>, phase: f64, w: f64) -> PathPoint {
    let yaw = v.y.atan2(v.x);
    // d/dt atan2(vy, vx) using only the planar components.
    let planar_speed_sq = v.x * v.x + v.y * v.y;
    let yaw_rate = (v.x * a.y - v.y * a.x) / planar_speed_sq;

    let (s2, c2) = (2.0 * phase).sin_cos();
    let (s1, c1) = phase.sin_cos();
    let roll = ROLL_AMP * s2;
    let roll_rate = 2.0 * w * ROLL_AMP * c2;
    let pitch = PITCH_AMP * s1;
    let pitch_rate = w * PITCH_AMP * c1;

    let q = Quaternion::from_euler_zyx(roll, pitch, yaw);
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let w_body = Vector3::new(
        roll_rate - yaw_rate * sp,
        pitch_rate * cr + yaw_rate * cp * sr,
        -pitch_rate * sr + yaw_rate * cp * cr,
    );
    PathPoint {
        p,
        v,
        a,
        q,
        w_body,
    }
}

/// Ground truth: the sampled trajectory plus the exact world-frame
/// acceleration and body-frame angular rate at every pose time.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub trajectory: Trajectory,
    pub world_acc: Vec<Vector3<f64>>,
    pub body_gyro: Vec<Vector3<f64>>,
}

impl GroundTruth {
    /// Pose sampling rate, Hz.
    pub fn pose_rate(&self) -> f64 {
        let states = self.trajectory.states();
        (states.len() - 1) as f64 / (states[states.len() - 1].t - states[0].t)
    }
}

/// Sample the analytic path uniformly in time.
pub fn generate_truth(spec: &TrajectorySpec) -> Result<GroundTruth> {
    spec.validate()?;
    let n = spec.pose_count;
    let dt = spec.duration / (n - 1) as f64;
    let mut states = Vec::with_capacity(n);
    let mut world_acc = Vec::with_capacity(n);
    let mut body_gyro = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let point = eval_path(&spec.shape, t);
        states.push(NavState::new(t, point.p, point.v, point.q));
        world_acc.push(point.a);
        body_gyro.push(point.w_body);
    }
    Ok(GroundTruth {
        trajectory: Trajectory::new(states)?,
        world_acc,
        body_gyro,
    })
}

/// Synthesize an IMU stream from ground truth at `rate` Hz by applying the
/// measurement model at every selected pose.
///
/// The rate must divide the truth pose rate (integer stride), so the exact
/// analytic sequences are used as-is; anything finer or non-integral is a
/// resampling error.
pub fn synthesize_imu(
    truth: &GroundTruth,
    bias: &ImuBias,
    noise: &NoiseSpec,
    world: &WorldModel,
    rate: f64,
) -> Result<Vec<ImuSample>> {
    if truth.trajectory.len() < 2 {
        return Err(Error::InsufficientData("ground truth needs >= 2 poses".into()));
    }
    let pose_rate = truth.pose_rate();
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Config("imu rate must be positive".into()));
    }
    let stride_f = pose_rate / rate;
    let stride = stride_f.round();
    if stride < 1.0 || (stride_f - stride).abs() > 1e-6 {
        return Err(Error::Resample {
            requested: rate,
            available: pose_rate,
        });
    }
    let stride = stride as usize;
    let mut rng = noise.rng();
    let states = truth.trajectory.states();
    let mut stream = Vec::with_capacity(states.len() / stride + 1);
    for i in (0..states.len()).step_by(stride) {
        let s = &states[i];
        stream.push(measure(
            s.t,
            truth.world_acc[i],
            truth.body_gyro[i],
            s.q.conjugate(),
            bias,
            noise,
            world,
            &mut rng,
        )?);
    }
    Ok(stream)
}

/// Burst glitch description: additive draws from N(mu, sigma^2) on the
/// selected axes of `burst_len` consecutive samples, covering roughly
/// `affected_fraction` of the stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlitchSpec {
    /// Offset, m/s².
    pub mu: f64,
    /// Spread, m/s².
    pub sigma: f64,
    /// Fraction of samples to corrupt (rounded to whole bursts).
    pub affected_fraction: f64,
    /// Samples per burst; 1 recovers scattered single-sample glitches.
    pub burst_len: usize,
    /// Corrupted accelerometer axes as (x, y, z) flags.
    pub axes: [bool; 3],
    pub seed: u64,
}

impl GlitchSpec {
    /// The named noise regimes. All share 1% coverage, 40-sample bursts
    /// (0.2 s of shock at 200 Hz, the impulse width ground contact
    /// produces), and z-axis corruption; `mu`/`sigma` vary per regime.
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        let (mu, sigma) = match name {
            "n0_1" => (0.0, 1.0),
            "n1_10" => (1.0, 10.0),
            "n50_10" => (50.0, 10.0),
            _ => return None,
        };
        Some(Self {
            mu,
            sigma,
            affected_fraction: 0.01,
            burst_len: 40,
            axes: [false, false, true],
            seed,
        })
    }

    pub const PRESET_NAMES: [&'static str; 3] = ["n0_1", "n1_10", "n50_10"];

    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::Config("glitch sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.affected_fraction) {
            return Err(Error::Config("affected_fraction must be in [0, 1]".into()));
        }
        if self.burst_len == 0 {
            return Err(Error::Config("burst_len must be >= 1".into()));
        }
        if !self.axes.iter().any(|&a| a) {
            return Err(Error::Config("at least one glitch axis must be selected".into()));
        }
        Ok(())
    }
}

/// Ground-truth fault mask produced alongside the corrupted stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultMask {
    flags: Vec<bool>,
}

impl FaultMask {
    pub fn empty(len: usize) -> Self {
        Self {
            flags: vec![false; len],
        }
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut flags = vec![false; len];
        for &i in indices {
            flags[i] = true;
        }
        Self { flags }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.flags.get(index).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    /// True if any sample in [start, start + len) is masked.
    pub fn overlaps(&self, start: usize, len: usize) -> bool {
        self.flags[start..(start + len).min(self.flags.len())]
            .iter()
            .any(|&f| f)
    }
}

/// Corrupt a stream with non-overlapping glitch bursts and return the exact
/// fault mask. Deterministic in the spec seed.
pub fn inject_glitches(
    stream: &[ImuSample],
    spec: &GlitchSpec,
) -> Result<(Vec<ImuSample>, FaultMask)> {
    spec.validate()?;
    let len = stream.len();
    if spec.affected_fraction == 0.0 {
        return Ok((stream.to_vec(), FaultMask::empty(len)));
    }
    let target = spec.affected_fraction * len as f64;
    let n_bursts = ((target / spec.burst_len as f64).round() as usize).max(1);
    if n_bursts * spec.burst_len > len {
        return Err(Error::Config(format!(
            "{n_bursts} bursts of {} samples cannot fit in a stream of {len}",
            spec.burst_len
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut occupied = vec![false; len];
    let mut starts = Vec::with_capacity(n_bursts);
    let max_attempts = 10_000 * n_bursts;
    let mut attempts = 0usize;
    while starts.len() < n_bursts {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Config(
                "could not place non-overlapping glitch bursts".into(),
            ));
        }
        let s = rng.gen_range(0..=len - spec.burst_len);
        if occupied[s..s + spec.burst_len].iter().any(|&o| o) {
            continue;
        }
        occupied[s..s + spec.burst_len].iter_mut().for_each(|o| *o = true);
        starts.push(s);
    }
    starts.sort_unstable();

    let dist = Normal::new(spec.mu, spec.sigma).expect("validated sigma");
    let mut out = stream.to_vec();
    for &start in &starts {
        for sample in &mut out[start..start + spec.burst_len] {
            for (axis, &enabled) in spec.axes.iter().enumerate() {
                if enabled {
                    sample.acc[axis] += dist.sample(&mut rng);
                }
            }
        }
    }
    Ok((out, FaultMask { flags: occupied }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_line_has_zero_acc_and_rate() {
        let spec = TrajectorySpec {
            shape: Shape::Line {
                velocity: [1.0, 2.0, 0.5],
            },
            duration: 5.0,
            pose_count: 100,
            imu_rate: 20.0,
        };
        let truth = generate_truth(&spec).unwrap();
        assert!(truth.world_acc.iter().all(|a| a.norm() == 0.0));
        assert!(truth.body_gyro.iter().all(|w| w.norm() == 0.0));
        let last = truth.trajectory.states().last().unwrap();
        assert_abs_diff_eq!(last.p.x, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn planar_circle_has_centripetal_acceleration() {
        let (r, w) = (3.0, 0.7);
        let spec = TrajectorySpec {
            shape: Shape::Ellipse3d {
                rx: r,
                ry: r,
                z_amp: 0.0,
                angular_rate: w,
            },
            duration: 8.0,
            pose_count: 400,
            imu_rate: 50.0,
        };
        let truth = generate_truth(&spec).unwrap();
        for a in &truth.world_acc {
            assert_abs_diff_eq!(a.norm(), r * w * w, epsilon = 1e-10);
        }
    }

    /// Finite-difference oracle: central differences of the sampled positions
    /// must reproduce the analytic velocities to O(dt^2), and the error must
    /// shrink quadratically when the pose density doubles.
    #[test]
    fn analytic_velocity_matches_finite_differences()  {
        let max_fd_error = |pose_count: usize| -> f64 {
            let spec = TrajectorySpec {
                pose_count,
                ..TrajectorySpec::default_ellipse()
            };
            let truth = generate_truth(&spec).unwrap();
            let states = truth.trajectory.states();
            let dt = states[1].t - states[0].t;
            let mut worst = 0.0f64;
            for i in 1..states.len() - 1 {
                let fd = (states[i + 1].p - states[i - 1].p) / (2.0 * dt);
                worst = worst.max((fd - states[i].v).norm());
            }
            worst
        };
        let coarse = max_fd_error(1000);
        let fine = max_fd_error(2000);
        assert!(coarse < 5e-4, "coarse FD error {coarse}");
        assert!(
            coarse / fine > 3.0,
            "expected O(dt^2) convergence, got {coarse} -> {fine}"
        );
    }

    /// The quaternion sequence must be kinematically consistent with the
    /// analytic body rates: the incremental rotation between consecutive
    /// poses matches w^b * dt at the interval midpoint.
    #[test]
    fn body_rates_consistent_with_orientation_sequence() {
        let spec = TrajectorySpec {
            pose_count: 4000,
            ..TrajectorySpec::default_ellipse()
        };
        let truth = generate_truth(&spec).unwrap();
        let states = truth.trajectory.states();
        let dt = states[1].t - states[0].t;
        for i in 0..states.len() - 1 {
            let dq = states[i].q.conjugate() * states[i + 1].q;
            let dq = if dq.w < 0.0 {
                Quaternion::new(-dq.w, -dq.x, -dq.y, -dq.z)
            } else {
                dq
            };
            let vec_norm = (dq.x * dq.x + dq.y * dq.y + dq.z * dq.z).sqrt();
            let angle = 2.0 * vec_norm.atan2(dq.w);
            let w_mid = 0.5 * (truth.body_gyro[i] + truth.body_gyro[i + 1]);
            assert_abs_diff_eq!(angle, w_mid.norm() * dt, epsilon = 1e-6);
        }
    }

    #[test]
    fn degenerate_spec_is_rejected() {
        let mut spec = TrajectorySpec::default_ellipse();
        spec.duration = 0.0;
        assert!(matches!(generate_truth(&spec), Err(Error::Config(_))));
        let bad = TrajectorySpec {
            shape: Shape::Ellipse3d {
                rx: 0.0,
                ry: 1.0,
                z_amp: 0.0,
                angular_rate: 1.0,
            },
            ..TrajectorySpec::default_ellipse()
        };
        assert!(matches!(generate_truth(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn static_truth_synthesizes_constant_gravity() {
        let spec = TrajectorySpec {
            shape: Shape::Line {
                velocity: [0.0, 0.0, 0.0],
            },
            duration: 1.0,
            pose_count: 201,
            imu_rate: 200.0,
        };
        let truth = generate_truth(&spec).unwrap();
        let stream = synthesize_imu(
            &truth,
            &ImuBias::default(),
            &NoiseSpec::none(),
            &WorldModel::default(),
            200.0,
        )
        .unwrap();
        assert_eq!(stream.len(), 201);
        for s in &stream {
            assert_eq!(s.acc, Vector3::new(0.0, 0.0, crate::types::GRAVITY));
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_streams() {
        let truth = generate_truth(&TrajectorySpec::default_ellipse()).unwrap();
        let noise = NoiseSpec::new(0.3, 0.01, 1234);
        let world = WorldModel::default();
        let rate = truth.pose_rate();
        let a = synthesize_imu(&truth, &ImuBias::default(), &noise, &world, rate).unwrap();
        let b = synthesize_imu(&truth, &ImuBias::default(), &noise, &world, rate).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthesized_noise_std_is_within_five_percent() {
        let spec = TrajectorySpec {
            shape: Shape::Line {
                velocity: [0.0, 0.0, 0.0],
            },
            duration: 50.0,
            pose_count: 10_001,
            imu_rate: 200.0,
        };
        let truth = generate_truth(&spec).unwrap();
        let noise = NoiseSpec::new(1.0, 0.0, 5);
        let stream = synthesize_imu(
            &truth,
            &ImuBias::default(),
            &noise,
            &WorldModel::default(),
            200.0,
        )
        .unwrap();
        for axis in 0..3 {
            let n = stream.len() as f64;
            let mean = stream.iter().map(|s| s.acc[axis]).sum::<f64>() / n;
            let std = (stream
                .iter()
                .map(|s| (s.acc[axis] - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt();
            assert!((std - 1.0).abs() < 0.05, "axis {axis} std {std}");
        }
    }

    #[test]
    fn oversampling_is_a_resample_error() {
        let truth = generate_truth(&TrajectorySpec::default_ellipse()).unwrap();
        let result = synthesize_imu(
            &truth,
            &ImuBias::default(),
            &NoiseSpec::none(),
            &WorldModel::default(),
            500.0,
        );
        assert!(matches!(result, Err(Error::Resample { .. })));
    }

    fn test_stream(len: usize) -> Vec<ImuSample> {
        (0..len)
            .map(|i| {
                ImuSample::new(
                    i as f64 * 0.005,
                    Vector3::new(0.0, 0.0, crate::types::GRAVITY),
                    Some(Vector3::zeros()),
                )
            })
            .collect()
    }

    #[test]
    fn zero_fraction_is_identity_with_empty_mask() {
        let stream = test_stream(100);
        let spec = GlitchSpec {
            affected_fraction: 0.0,
            ..GlitchSpec::preset("n50_10", 1).unwrap()
        };
        let (out, mask) = inject_glitches(&stream, &spec).unwrap();
        assert_eq!(out, stream);
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn mask_matches_corrupted_indices_exactly() {
        let stream = test_stream(2000);
        let spec = GlitchSpec::preset("n50_10", 42).unwrap();
        let (out, mask) = inject_glitches(&stream, &spec).unwrap();
        for (i, (orig, got)) in stream.iter().zip(&out).enumerate() {
            let changed = orig.acc != got.acc;
            assert_eq!(changed, mask.contains(i), "index {i}");
        }
    }

    #[test]
    fn mask_cardinality_rounds_to_whole_bursts() {
        let stream = test_stream(2000);
        let spec = GlitchSpec {
            burst_len: 5,
            ..GlitchSpec::preset("n50_10", 3).unwrap()
        };
        let (_, mask) = inject_glitches(&stream, &spec).unwrap();
        // 1% of 2000 = 20 samples = 4 bursts of 5.
        assert_eq!(mask.count(), 20);
        assert_eq!(mask.indices().len(), 20);
        // The default 40-sample burst rounds 20 target samples up to one
        // whole burst.
        let (_, mask) = inject_glitches(&stream, &GlitchSpec::preset("n50_10", 3).unwrap()).unwrap();
        assert_eq!(mask.count(), 40);
    }

    #[test]
    fn masked_z_deviation_mean_is_near_mu() {
        let stream = test_stream(2000);
        let mut deviations = Vec::new();
        for seed in 0..20 {
            let spec = GlitchSpec {
                burst_len: 5,
                ..GlitchSpec::preset("n50_10", seed).unwrap()
            };
            let (out, mask) = inject_glitches(&stream, &spec).unwrap();
            for i in mask.indices() {
                deviations.push(out[i].acc.z - stream[i].acc.z);
            }
        }
        let mean = deviations.iter().sum::<f64>() / deviations.len() as f64;
        assert!((30.0..=70.0).contains(&mean), "mean deviation {mean}");
    }

    #[test]
    fn impossible_burst_packing_is_rejected() {
        let stream = test_stream(10);
        let spec = GlitchSpec {
            affected_fraction: 1.0,
            burst_len: 4,
            ..GlitchSpec::preset("n50_10", 0).unwrap()
        };
        // 10 samples / bursts of 4 -> round(2.5) = 3 bursts = 12 > 10.
        assert!(matches!(inject_glitches(&stream, &spec), Err(Error::Config(_))));
    }
}
