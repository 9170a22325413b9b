//! Strapdown inertial integration.
//!
//! Propagates position, velocity, and orientation from body-frame IMU
//! readings, either with the forward-Euler discrete model or with the
//! midpoint (Runge-Kutta) variant that averages consecutive corrected
//! samples. An optional pose anchor periodically resets position and
//! orientation to an external trajectory, standing in for visual
//! corrections; velocity is deliberately never anchored, so
//! acceleration faults keep accumulating in the velocity between
//! corrections.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quaternion;
use crate::types::{validate_stream, ImuBias, ImuSample, NavState, Trajectory, WorldModel};

/// Discrete integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Midpoint,
}

/// Periodic pose correction from an external trajectory.
#[derive(Debug, Clone)]
pub struct AnchorConfig {
    /// Seconds between corrections.
    pub period: f64,
    /// Reference poses to reset to (interpolated at the correction time).
    pub source: Trajectory,
}

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub method: Method,
    pub world: WorldModel,
    pub bias: ImuBias,
    /// Largest tolerated gap between consecutive samples, seconds. `None`
    /// infers 5x the median sample period of the stream being integrated.
    pub max_gap: Option<f64>,
    pub anchor: Option<AnchorConfig>,
}

impl IntegratorConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            world: WorldModel::default(),
            bias: ImuBias::default(),
            max_gap: None,
            anchor: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(anchor) = &self.anchor {
            if !(anchor.period.is_finite() && anchor.period > 0.0) {
                return Err(Error::Config("anchor period must be positive".into()));
            }
            if anchor.source.is_empty() {
                return Err(Error::EmptyInput("anchor source trajectory"));
            }
        }
        if let Some(gap) = self.max_gap {
            if !(gap.is_finite() && gap > 0.0) {
                return Err(Error::Config("max_gap must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Advance one state by one sample interval.
///
/// Euler uses the previous sample's corrected readings; midpoint averages the
/// corrected readings of both endpoints (rotating the accelerations with the
/// orientations at their respective endpoints). Streams without gyro data
/// integrate with zero angular rate.
pub fn step(
    state: &NavState,
    prev: &ImuSample,
    curr: &ImuSample,
    cfg: &IntegratorConfig,
) -> Result<NavState> {
    if curr.t <= prev.t {
        return Err(Error::NonIncreasingTime { t: curr.t });
    }
    if (state.t - prev.t).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "state time {} does not match previous sample time {}",
            state.t, prev.t
        )));
    }
    if !state.q.is_unit() {
        return Err(Error::InvalidRotation {
            norm: state.q.norm(),
        });
    }
    let dt = curr.t - prev.t;
    if let Some(max) = cfg.max_gap {
        if dt > max {
            return Err(Error::GapExceeded {
                t: curr.t,
                dt,
                max,
            });
        }
    }

    let gravity = cfg.world.gravity;
    let prev_gyro = prev.gyro.unwrap_or_else(Vector3::zeros) - cfg.bias.gyro;
    let prev_acc = prev.acc - cfg.bias.acc;

    let (a_world, q_next) = match cfg.method {
        Method::Euler => {
            let a_world = state.q.rotate(prev_acc) - gravity;
            let q_next = (state.q * Quaternion::small_angle(prev_gyro * dt)).normalized();
            (a_world, q_next)
        }
        Method::Midpoint => {
            let curr_gyro = curr.gyro.unwrap_or_else(Vector3::zeros) - cfg.bias.gyro;
            let w_mid = 0.5 * (prev_gyro + curr_gyro);
            let q_next = (state.q * Quaternion::small_angle(w_mid * dt)).normalized();
            let curr_acc = curr.acc - cfg.bias.acc;
            let a_world =
                0.5 * ((state.q.rotate(prev_acc) - gravity) + (q_next.rotate(curr_acc) - gravity));
            (a_world, q_next)
        }
    };

    Ok(NavState {
        t: curr.t,
        p: state.p + state.v * dt + 0.5 * a_world * dt * dt,
        v: state.v + a_world * dt,
        q: q_next,
    })
}

/// Integrate a whole stream, producing one state per sample.
///
/// The first output state carries `initial`'s position/velocity/orientation
/// at the first sample's timestamp. With anchoring enabled, position and
/// orientation (never velocity) are reset to the anchor source at every
/// anchor period after the stream start.
pub fn integrate(
    initial: &NavState,
    stream: &[ImuSample],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if stream.is_empty() {
        return Err(Error::EmptyInput("imu stream"));
    }
    validate_stream(stream)?;
    if initial.t > stream[0].t + 1e-9 {
        return Err(Error::Config(
            "initial state is later than the first sample".into(),
        ));
    }

    let max_gap = cfg.max_gap.or_else(|| median_dt(stream).map(|dt| 5.0 * dt));
    let resolved = IntegratorConfig {
        max_gap,
        ..cfg.clone()
    };

    let start_t = stream[0].t;
    let mut state = NavState::new(start_t, initial.p, initial.v, initial.q);
    let mut out = Vec::with_capacity(stream.len());
    let mut anchor_epoch = 1u64;
    out.push(state);

    for pair in stream.windows(2) {
        state = step(&state, &pair[0], &pair[1], &resolved)?;
        if let Some(anchor) = &resolved.anchor {
            let mut next_t = start_t + anchor_epoch as f64 * anchor.period;
            if state.t + 1e-9 >= next_t {
                if let Some(pose) = anchor.source.pose_at(state.t) {
                    state.p = pose.p;
                    state.q = pose.q;
                }
                while state.t + 1e-9 >= next_t {
                    anchor_epoch += 1;
                    next_t = start_t + anchor_epoch as f64 * anchor.period;
                }
            }
        }
        out.push(state);
    }
    Trajectory::new(out)
}

fn median_dt(stream: &[ImuSample]) -> Option<f64> {
    if stream.len() < 2 {
        return None;
    }
    let mut dts: Vec<f64> = stream.windows(2).map(|w| w[1].t - w[0].t).collect();
    dts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(dts[dts.len() / 2])
}
