//! Domain types: IMU samples, noise/bias specs, navigation states, and the
//! measurement model that maps true motion to sensor readings.

use nalgebra::Vector3;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quaternion;

/// Standard gravity magnitude, m/s².
pub const GRAVITY: f64 = 9.81;

/// One timestamped IMU reading in the body frame. The gyroscope is optional:
/// accelerometer-only streams carry `None`, not zeros, so downstream code can
/// tell a 3-channel stream from a 6-channel one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// Timestamp, seconds.
    pub t: f64,
    /// Specific-force measurement, m/s².
    pub acc: Vector3<f64>,
    /// Angular-rate measurement, rad/s.
    pub gyro: Option<Vector3<f64>>,
}

impl ImuSample {
    pub fn new(t: f64, acc: Vector3<f64>, gyro: Option<Vector3<f64>>) -> Self {
        Self { t, acc, gyro }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.acc.iter().all(|v| v.is_finite())
            && self.gyro.is_none_or(|g| g.iter().all(|v| v.is_finite()))
    }
}

/// Check stream ordering and finiteness invariants.
pub fn validate_stream(stream: &[ImuSample]) -> Result<()> {
    for (i, s) in stream.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFinite("imu sample"));
        }
        if i > 0 && s.t <= stream[i - 1].t {
            return Err(Error::NonIncreasingTime { t: s.t });
        }
    }
    Ok(())
}

/// Additive sensor biases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ImuBias {
    /// Accelerometer bias, m/s².
    pub acc: Vector3<f64>,
    /// Gyroscope bias, rad/s.
    pub gyro: Vector3<f64>,
}

impl ImuBias {
    pub fn new(acc: Vector3<f64>, gyro: Vector3<f64>) -> Self {
        Self { acc, gyro }
    }
}

/// White-noise standard deviations plus the seed for the noise stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Accelerometer noise sigma, m/s².
    pub acc_sigma: f64,
    /// Gyroscope noise sigma, rad/s.
    pub gyro_sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(acc_sigma: f64, gyro_sigma: f64, seed: u64) -> Self {
        Self {
            acc_sigma,
            gyro_sigma,
            seed,
        }
    }

    /// Noiseless spec (deterministic measurements).
    pub fn none() -> Self {
        Self::new(0.0, 0.0, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.acc_sigma < 0.0 || self.gyro_sigma < 0.0 {
            return Err(Error::Config("noise sigmas must be >= 0".into()));
        }
        Ok(())
    }

    /// The RNG driving the noise stream; one instance per synthesized stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// World constants; currently just the gravity vector added inside the
/// accelerometer model, so a static level sensor reads +|g| on z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub gravity: Vector3<f64>,
}

impl Default for WorldModel {
    fn default() -> Self {
        Self {
            gravity: Vector3::new(0.0, 0.0, GRAVITY),
        }
    }
}

impl WorldModel {
    /// Terrestrial sanity check; tests may construct out-of-range worlds
    /// directly, but config-driven entry points go through this.
    pub fn validate(&self) -> Result<()> {
        let g = self.gravity.norm();
        if !(9.0..=10.5).contains(&g) {
            return Err(Error::Config(format!(
                "gravity magnitude {g} outside [9.0, 10.5] m/s^2"
            )));
        }
        Ok(())
    }
}

/// Navigation state: position, velocity, and body-to-world orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavState {
    /// Timestamp, seconds.
    pub t: f64,
    /// Position in the world frame, m.
    pub p: Vector3<f64>,
    /// Velocity in the world frame, m/s.
    pub v: Vector3<f64>,
    /// Orientation q^w_b (body to world).
    pub q: Quaternion,
}

impl NavState {
    pub fn new(t: f64, p: Vector3<f64>, v: Vector3<f64>, q: Quaternion) -> Self {
        Self { t, p, v, q }
    }

    /// At-rest state at the origin.
    pub fn origin(t: f64) -> Self {
        Self::new(t, Vector3::zeros(), Vector3::zeros(), Quaternion::IDENTITY)
    }
}

/// Time-ordered sequence of navigation states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    states: Vec<NavState>,
}

impl Trajectory {
    /// Build from states, enforcing strictly increasing timestamps.
    pub fn new(states: Vec<NavState>) -> Result<Self> {
        for (i, s) in states.iter().enumerate() {
            if !s.t.is_finite() || !s.p.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("trajectory state"));
            }
            if i > 0 && s.t <= states[i - 1].t {
                return Err(Error::NonIncreasingTime { t: s.t });
            }
        }
        Ok(Self { states })
    }

    pub fn states(&self) -> &[NavState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, NavState> {
        self.states.iter()
    }

    pub fn start_time(&self) -> Option<f64> {
        self.states.first().map(|s| s.t)
    }

    pub fn end_time(&self) -> Option<f64> {
        self.states.last().map(|s| s.t)
    }

    /// Pose interpolated at time `t` (linear position/velocity, nlerp
    /// orientation). Returns `None` outside the covered time span.
    /// Exact at stored timestamps.
    pub fn pose_at(&self, t: f64) -> Option<NavState> {
        let first = self.states.first()?;
        let last = self.states.last()?;
        if t < first.t || t > last.t {
            return None;
        }
        let idx = self.states.partition_point(|s| s.t < t);
        if idx < self.states.len() && self.states[idx].t == t {
            return Some(self.states[idx]);
        }
        // t is strictly between idx-1 and idx here.
        let a = &self.states[idx - 1];
        let b = &self.states[idx];
        let alpha = (t - a.t) / (b.t - a.t);
        Some(NavState::new(
            t,
            a.p + alpha * (b.p - a.p),
            a.v + alpha * (b.v - a.v),
            Quaternion::nlerp(&a.q, &b.q, alpha),
        ))
    }
}

/// Apply the measurement model to true motion:
/// acc = q^b_w (a^w + g^w) + b^a + n^a, gyro = w^b + b^g + n^g,
/// with noise drawn i.i.d. Gaussian per axis from `rng`.
///
/// `q_world_to_body` is q^b_w. The RNG is passed in so one seeded stream
/// spans a whole synthesized recording (see [`NoiseSpec::rng`]).
#[allow(clippy::too_many_arguments)]
pub fn measure(
    t: f64,
    true_acc_world: Vector3<f64>,
    true_gyro_body: Vector3<f64>,
    q_world_to_body: Quaternion,
    bias: &ImuBias,
    noise: &NoiseSpec,
    world: &WorldModel,
    rng: &mut ChaCha8Rng,
) -> Result<ImuSample> {
    if !q_world_to_body.is_unit() {
        return Err(Error::InvalidRotation {
            norm: q_world_to_body.norm(),
        });
    }
    noise.validate()?;
    let acc_noise = Normal::new(0.0, noise.acc_sigma).expect("validated sigma");
    let gyro_noise = Normal::new(0.0, noise.gyro_sigma).expect("validated sigma");
    let n_a = Vector3::new(
        acc_noise.sample(rng),
        acc_noise.sample(rng),
        acc_noise.sample(rng),
    );
    let n_g = Vector3::new(
        gyro_noise.sample(rng),
        gyro_noise.sample(rng),
        gyro_noise.sample(rng),
    );
    let acc = q_world_to_body.rotate(true_acc_world + world.gravity) + bias.acc + n_a;
    let gyro = true_gyro_body + bias.gyro + n_g;
    Ok(ImuSample::new(t, acc, Some(gyro)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn static_measure(noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> ImuSample {
        measure(
            0.0,
            Vector3::zeros(),
            Vector3::zeros(),
            Quaternion::IDENTITY,
            &ImuBias::default(),
            noise,
            &WorldModel::default(),
            rng,
        )
        .unwrap()
    }

    #[test]
    fn static_robot_measures_gravity_only() {
        let noise = NoiseSpec::none();
        let s = static_measure(&noise, &mut noise.rng());
        assert_eq!(s.acc, Vector3::new(0.0, 0.0, GRAVITY));
        assert_eq!(s.gyro, Some(Vector3::zeros()));
    }

    #[test]
    fn bias_superposes_linearly() {
        let noise = NoiseSpec::none();
        let bias = ImuBias::new(Vector3::new(0.1, 0.0, 0.0), Vector3::zeros());
        let s = measure(
            0.0,
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::zeros(),
            Quaternion::IDENTITY,
            &bias,
            &noise,
            &WorldModel::default(),
            &mut noise.rng(),
        )
        .unwrap();
        assert_abs_diff_eq!(s.acc.x, 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.acc.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.acc.z, GRAVITY, epsilon = 1e-15);
    }

    #[test]
    fn noise_std_matches_configured_sigma() {
        let noise = NoiseSpec::new(0.05, 0.0, 99);
        let mut rng = noise.rng();
        let n = 10_000;
        let samples: Vec<Vector3<f64>> = (0..n)
            .map(|_| static_measure(&noise, &mut rng).acc)
            .collect();
        for axis in 0..3 {
            let reference = if axis == 2 { GRAVITY } else { 0.0 };
            let mean = samples.iter().map(|s| s[axis]).sum::<f64>() / n as f64;
            let var = samples
                .iter()
                .map(|s| (s[axis] - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            assert!((reference - mean).abs() < 0.01);
            let std = var.sqrt();
            assert!(
                (0.045..=0.055).contains(&std),
                "axis {axis} std {std} outside [0.045, 0.055]"
            );
        }
    }

    #[test]
    fn non_unit_quaternion_is_rejected() {
        let noise = NoiseSpec::none();
        let err = measure(
            0.0,
            Vector3::zeros(),
            Vector3::zeros(),
            Quaternion::new(2.0, 0.0, 0.0, 0.0),
            &ImuBias::default(),
            &noise,
            &WorldModel::default(),
            &mut noise.rng(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidRotation { .. }));
    }

    #[test]
    fn zero_noise_model_is_affine_in_acc_and_bias() {
        let noise = NoiseSpec::none();
        let world = WorldModel::default();
        let q = Quaternion::from_euler_zyx(0.3, -0.2, 1.1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a1 = Vector3::new(rng.gen_range(-5.0..5.0), rng.gen(), rng.gen());
            let a2 = Vector3::new(rng.gen(), rng.gen_range(-5.0..5.0), rng.gen());
            let b = ImuBias::new(Vector3::new(rng.gen(), rng.gen(), rng.gen()), Vector3::zeros());
            let zero_b = ImuBias::default();
            let m = |a: Vector3<f64>, bias: &ImuBias| {
                measure(0.0, a, Vector3::zeros(), q, bias, &noise, &world, &mut noise.rng())
                    .unwrap()
                    .acc
            };
            // Superposition: m(a1 + a2, b) - m(0, 0) == (m(a1, 0) - m(0, 0)) + (m(a2, 0) - m(0, 0)) + b
            let base = m(Vector3::zeros(), &zero_b);
            let combined = m(a1 + a2, &b);
            let parts = (m(a1, &zero_b) - base) + (m(a2, &zero_b) - base) + b.acc + base;
            assert!((combined - parts).norm() < 1e-12);
        }
    }

    #[test]
    fn perfect_inverse_correction_recovers_world_acc() {
        let noise = NoiseSpec::none();
        let world = WorldModel::default();
        let q = Quaternion::from_euler_zyx(0.4, 0.1, -0.8);
        let a_w = Vector3::new(1.25, -0.5, 2.0);
        let s = measure(
            0.0,
            a_w,
            Vector3::zeros(),
            q,
            &ImuBias::default(),
            &noise,
            &world,
            &mut noise.rng(),
        )
        .unwrap();
        // Invert the measurement model: a^w = q^w_b * acc - g.
        let recovered = q.conjugate().rotate(s.acc) - world.gravity;
        assert!((recovered - a_w).norm() < 1e-12);
    }

    #[test]
    fn off_world_gravity_fails_validation() {
        assert!(WorldModel::default().validate().is_ok());
        let moon = WorldModel {
            gravity: Vector3::new(0.0, 0.0, 1.62),
        };
        assert!(matches!(moon.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn trajectory_rejects_non_increasing_time() {
        let s0 = NavState::origin(0.0);
        let s1 = NavState::origin(0.0);
        assert!(matches!(
            Trajectory::new(vec![s0, s1]),
            Err(Error::NonIncreasingTime { .. })
        ));
    }

    #[test]
    fn pose_interpolation_is_exact_at_knots() {
        let states: Vec<NavState> = (0..5)
            .map(|i| {
                NavState::new(
                    i as f64,
                    Vector3::new(i as f64, 0.0, 0.0),
                    Vector3::x(),
                    Quaternion::from_euler_zyx(0.0, 0.0, 0.1 * i as f64),
                )
            })
            .collect();
        let traj = Trajectory::new(states.clone()).unwrap();
        for s in &states {
            let p = traj.pose_at(s.t).unwrap();
            assert_eq!(p.p, s.p);
            assert_eq!(p.q, s.q);
        }
        let mid = traj.pose_at(1.5).unwrap();
        assert_abs_diff_eq!(mid.p.x, 1.5, epsilon = 1e-12);
        assert!(traj.pose_at(-0.1).is_none());
        assert!(traj.pose_at(4.1).is_none());
    }
}
