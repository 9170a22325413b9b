//! Trajectory accuracy metrics: aligned ATE RMSE and relative
//! translation/yaw errors over fixed sub-trajectory path lengths.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quaternion;
use crate::types::{NavState, Trajectory};

/// How the estimate is aligned onto the reference before ATE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMode {
    Se3,
    Sim3,
    PosYaw,
    None,
}

impl std::str::FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se3" => Ok(Self::Se3),
            "sim3" => Ok(Self::Sim3),
            "posyaw" => Ok(Self::PosYaw),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown alignment mode '{other}'"))),
        }
    }
}

/// A timestamp-associated (estimate, reference) pose pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePair {
    pub est: NavState,
    pub reference: NavState,
}

/// Association outcome; unmatched poses are dropped and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub pairs: Vec<PosePair>,
    pub dropped: usize,
}

/// Pair each estimated pose with the nearest reference pose within `max_dt`.
pub fn associate(est: &Trajectory, reference: &Trajectory, max_dt: f64) -> Result<Association> {
    if est.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("trajectory"));
    }
    let refs = reference.states();
    let mut pairs = Vec::with_capacity(est.len());
    let mut dropped = 0usize;
    for e in est.iter() {
        let idx = refs.partition_point(|r| r.t < e.t);
        let mut best: Option<&NavState> = None;
        for cand in [idx.checked_sub(1), Some(idx)].into_iter().flatten() {
            if let Some(r) = refs.get(cand) {
                if best.is_none_or(|b| (r.t - e.t).abs() < (b.t - e.t).abs()) {
                    best = Some(r);
                }
            }
        }
        match best {
            Some(r) if (r.t - e.t).abs() <= max_dt => pairs.push(PosePair {
                est: *e,
                reference: *r,
            }),
            _ => dropped += 1,
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(Association { pairs, dropped })
}

/// Similarity transform aligning estimated positions onto the reference:
/// `p -> scale * rotation * p + translation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Alignment {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Closed-form least-squares alignment of the estimated positions onto the
/// reference positions (Umeyama for se3/sim3, planar yaw for posyaw).
pub fn align(pairs: &[PosePair], mode: AlignmentMode) -> Result<Alignment> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pose pairs"));
    }
    match mode {
        AlignmentMode::None => Ok(Alignment::identity()),
        AlignmentMode::PosYaw => Ok(align_posyaw(pairs)),
        AlignmentMode::Se3 => umeyama(pairs, false),
        AlignmentMode::Sim3 => umeyama(pairs, true),
    }
}

fn centroids(pairs: &[PosePair]) -> (Vector3<f64>, Vector3<f64>) {
    let n = pairs.len() as f64;
    let mu_e = pairs.iter().map(|p| p.est.p).sum::<Vector3<f64>>() / n;
    let mu_r = pairs.iter().map(|p| p.reference.p).sum::<Vector3<f64>>() / n;
    (mu_e, mu_r)
}

fn umeyama(pairs: &[PosePair], with_scale: bool) -> Result<Alignment> {
    if pairs.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "need >= 3 pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let (mu_e, mu_r) = centroids(pairs);
    let mut cov = Matrix3::zeros();
    let mut var_e = 0.0;
    for p in pairs {
        let e = p.est.p - mu_e;
        let r = p.reference.p - mu_r;
        cov += r * e.transpose();
        var_e += e.norm_squared();
    }
    cov /= n;
    var_e /= n;

    let svd = cov.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::RankDeficient("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::RankDeficient("SVD failed".into()))?;
    let d = svd.singular_values;
    if !d[0].is_finite() || d[0] <= 0.0 || d[1] <= 1e-9 * d[0] {
        return Err(Error::RankDeficient(
            "pose pairs are collinear or coincident".into(),
        ));
    }
    let mut s = Vector3::new(1.0, 1.0, 1.0);
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s[2] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s) * v_t;
    let scale = if with_scale {
        if var_e <= 0.0 {
            return Err(Error::RankDeficient("estimate has zero spread".into()));
        }
        d.dot(&s) / var_e
    } else {
        1.0
    };
    let translation = mu_r - scale * (rotation * mu_e);
    Ok(Alignment {
        rotation,
        translation,
        scale,
    })
}

/// Translation plus yaw-only rotation, the alignment a gravity-observing
/// estimator deserves: minimizes planar residuals over the z rotation.
fn align_posyaw(pairs: &[PosePair]) -> Alignment {
    let (mu_e, mu_r) = centroids(pairs);
    let mut num = 0.0;
    let mut den = 0.0;
    for p in pairs {
        let e = p.est.p - mu_e;
        let r = p.reference.p - mu_r;
        num += e.x * r.y - e.y * r.x;
        den += e.x * r.x + e.y * r.y;
    }
    let yaw = num.atan2(den);
    let (sy, cy) = yaw.sin_cos();
    let rotation = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let translation = mu_r - rotation * mu_e;
    Alignment {
        rotation,
        translation,
        scale: 1.0,
    }
}

/// Root mean square of aligned position residuals.
pub fn ate_rmse(pairs: &[PosePair], transform: &Alignment) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|p| (transform.apply(p.est.p) - p.reference.p).norm_squared())
        .sum();
    (sum / pairs.len() as f64).sqrt()
}

/// Rigid pose for relative-error composition.
#[derive(Debug, Clone, Copy)]
struct Se3 {
    q: Quaternion,
    p: Vector3<f64>,
}

impl Se3 {
    fn from_state(s: &NavState) -> Self {
        Self { q: s.q, p: s.p }
    }

    fn inverse(self) -> Self {
        let qc = self.q.conjugate();
        Se3 {
            q: qc,
            p: -qc.rotate(self.p),
        }
    }

    fn compose(self, other: Se3) -> Se3 {
        Se3 {
            q: self.q * other.q,
            p: self.p + self.q.rotate(other.p),
        }
    }
}

/// Per-length relative error statistics. Mean is the primary statistic;
/// the median is reported alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelErrorStat {
    /// Sub-trajectory path length, m.
    pub length: f64,
    pub trans_mean: f64,
    pub trans_median: f64,
    pub yaw_mean_deg: f64,
    pub yaw_median_deg: f64,
    /// Number of start poses evaluated.
    pub count: usize,
}

/// Relative errors over all valid start poses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrorReport {
    pub per_length: Vec<RelErrorStat>,
    /// Lengths longer than the reference path, skipped with a warning.
    pub skipped_lengths: Vec<f64>,
}

/// Default sub-trajectory lengths, m.
pub const DEFAULT_LENGTHS: [f64; 5] = [7.0, 14.0, 21.0, 28.0, 35.0];

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// For each length L: from every start pose, walk to the first pose at
/// accumulated reference path length >= L and compare the estimated relative
/// transform against the reference one. Reports |translation| of the error
/// transform and |yaw| of its rotation, in degrees. Relative transforms are
/// invariant to global rigid motions of either trajectory, so no alignment
/// is applied here.
pub fn relative_errors(pairs: &[PosePair], lengths: &[f64]) -> Result<RelativeErrorReport> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(
            "need >= 2 pose pairs for relative errors".into(),
        ));
    }
    for &l in lengths {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Config("lengths must be positive".into()));
        }
    }
    // Accumulated reference path length.
    let mut cum = Vec::with_capacity(pairs.len());
    cum.push(0.0);
    for w in pairs.windows(2) {
        let step = (w[1].reference.p - w[0].reference.p).norm();
        cum.push(cum.last().unwrap() + step);
    }

    let mut report = RelativeErrorReport::default();
    for &length in lengths {
        let mut trans = Vec::new();
        let mut yaw = Vec::new();
        let mut end = 0usize;
        for start in 0..pairs.len() {
            // First index whose accumulated length reaches `length`
            // (within a small slack so exact hits are not skipped).
            if end <= start {
                end = start + 1;
            }
            while end < pairs.len() && cum[end] - cum[start] < length - 1e-9 {
                end += 1;
            }
            if end >= pairs.len() {
                break;
            }
            let d_ref = Se3::from_state(&pairs[start].reference)
                .inverse()
                .compose(Se3::from_state(&pairs[end].reference));
            let d_est = Se3::from_state(&pairs[start].est)
                .inverse()
                .compose(Se3::from_state(&pairs[end].est));
            let err = d_ref.inverse().compose(d_est);
            trans.push(err.p.norm());
            yaw.push(err.q.yaw().abs().to_degrees());
        }
        if trans.is_empty() {
            report.skipped_lengths.push(length);
            continue;
        }
        let n = trans.len() as f64;
        let trans_mean = trans.iter().sum::<f64>() / n;
        let yaw_mean = yaw.iter().sum::<f64>() / n;
        trans.sort_by(|a, b| a.partial_cmp(b).unwrap());
        yaw.sort_by(|a, b| a.partial_cmp(b).unwrap());
        report.per_length.push(RelErrorStat {
            length,
            trans_mean,
            trans_median: median(&trans),
            yaw_mean_deg: yaw_mean,
            yaw_median_deg: median(&yaw),
            count: trans.len(),
        });
    }
    Ok(report)
}

/// Full evaluation report (the `metrics.json` schema).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub alignment: AlignmentMode,
    /// Association tolerance used, s.
    pub max_dt: f64,
    pub pairs: usize,
    pub dropped: usize,
    pub ate_rmse: f64,
    /// Recovered scale (1.0 except sim3).
    pub scale: f64,
    pub relative: RelativeErrorReport,
}

/// Associate, align, and compute every metric in one call.
pub fn evaluate(
    est: &Trajectory,
    reference: &Trajectory,
    mode: AlignmentMode,
    lengths: &[f64],
    max_dt: f64,
) -> Result<MetricReport> {
    let assoc = associate(est, reference, max_dt)?;
    let transform = align(&assoc.pairs, mode)?;
    let ate = ate_rmse(&assoc.pairs, &transform);
    let relative = relative_errors(&assoc.pairs, lengths)?;
    Ok(MetricReport {
        alignment: mode,
        max_dt,
        pairs: assoc.pairs.len(),
        dropped: assoc.dropped,
        ate_rmse: ate,
        scale: transform.scale,
        relative,
    })
}
