//! Dynamic time warping distance kernel.
//!
//! The production kernel keeps a single rolling row of `M + 1` cells, so the
//! working storage is O(M) while the time cost stays O(N M). A full-matrix
//! reference implementation is kept alongside it as an independent check, and
//! `best_match` fans a query out over a template set with a fixed number of
//! worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multichannel time series: `rows` time steps by `dims` channels,
/// stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    data: Vec<f64>,
    rows: usize,
    dims: usize,
}

impl Series {
    /// Build from row vectors; every row must share one dimension and all
    /// entries must be finite.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::EmptyInput("series has no rows"));
        };
        let dims = first.len();
        if dims == 0 {
            return Err(Error::ShapeMismatch("series rows have zero channels".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dims);
        for row in rows {
            if row.len() != dims {
                return Err(Error::ShapeMismatch(format!(
                    "row has {} channels, expected {dims}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite("series entry"));
                }
                data.push(v);
            }
        }
        Ok(Self {
            data,
            rows: rows.len(),
            dims,
        })
    }

    /// Build from a flat row-major buffer.
    pub fn from_flat(data: Vec<f64>, dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::ShapeMismatch("dims must be >= 1".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptyInput("series has no rows"));
        }
        if !data.len().is_multiple_of(dims) {
            return Err(Error::ShapeMismatch(format!(
                "buffer of {} values is not a multiple of {dims} channels",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("series entry"));
        }
        let rows = data.len() / dims;
        Ok(Self { data, rows, dims })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Per-channel z-scored copy (mean 0, std 1; constant channels are left
    /// centered). Off by default everywhere; comparisons are in raw SI units.
    pub fn z_scored(&self) -> Series {
        let mut out = self.clone();
        for c in 0..self.dims {
            let mean =
                (0..self.rows).map(|r| self.data[r * self.dims + c]).sum::<f64>() / self.rows as f64;
            let var = (0..self.rows)
                .map(|r| (self.data[r * self.dims + c] - mean).powi(2))
                .sum::<f64>()
                / self.rows as f64;
            let std = var.sqrt();
            for r in 0..self.rows {
                let v = &mut out.data[r * self.dims + c];
                *v -= mean;
                if std > 0.0 {
                    *v /= std;
                }
            }
        }
        out
    }
}

/// Squared Euclidean distance between two rows: `||p - q||^2`, no square root.
///
/// Panics if the slices differ in length; series-level entry points validate
/// shapes before reaching this kernel.
#[inline]
pub fn point_cost(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "point_cost dimension mismatch");
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

fn check_pair(p: &Series, q: &Series) -> Result<()> {
    if p.dims != q.dims {
        return Err(Error::ShapeMismatch(format!(
            "series have {} and {} channels",
            p.dims, q.dims
        )));
    }
    Ok(())
}

/// DTW distance with a rolling row: minimum over monotone warping paths of
/// the summed squared point costs.
///
/// `T` is indexed 0..=M; `T[0]` starts at 0 and every level pushes the
/// upper-left corner through the row, so only M + 1 cells are ever live.
pub fn dtw_distance(p: &Series, q: &Series) -> Result<f64> {
    check_pair(p, q)?;
    let (n, m) = (p.rows, q.rows);
    let mut t = vec![f64::INFINITY; m + 1];
    t[0] = 0.0;
    for level in 0..n {
        let p_row = p.row(level);
        let mut ul_corner = t[0];
        t[0] = f64::INFINITY;
        for i in 1..=m {
            let min_v = point_cost(p_row, q.row(i - 1)) + ul_corner.min(t[i - 1]).min(t[i]);
            ul_corner = t[i];
            t[i] = min_v;
        }
    }
    Ok(t[m])
}

/// Full-matrix reference DP, O(N M) space. Kept as the independent oracle
/// for the rolling-array kernel; both accumulate cell values in the same
/// order, so agreement is exact.
pub fn dtw_distance_full(p: &Series, q: &Series) -> Result<f64> {
    check_pair(p, q)?;
    let (n, m) = (p.rows, q.rows);
    let mut cost = vec![vec![f64::INFINITY; m + 1]; n + 1];
    cost[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let c = point_cost(p.row(i - 1), q.row(j - 1));
            cost[i][j] = c + cost[i - 1][j - 1].min(cost[i][j - 1]).min(cost[i - 1][j]);
        }
    }
    Ok(cost[n][m])
}

/// Outcome of matching a query against a template set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Index of the winning template in the list passed to `best_match`.
    pub template_index: usize,
    /// DTW distance to that template.
    pub distance: f64,
}

/// Find the template with minimum DTW distance to `query`.
///
/// Ties break toward the lowest template index, and the distances are
/// computed independently per template, so the result is bit-identical for
/// every parallelism level.
pub fn best_match(query: &Series, templates: &[Series], parallelism: usize) -> Result<MatchResult> {
    if templates.is_empty() {
        return Err(Error::Config("template list is empty".into()));
    }
    if parallelism == 0 {
        return Err(Error::Config("parallelism must be >= 1".into()));
    }
    for t in templates {
        check_pair(t, query)?;
    }

    let mut distances = vec![0.0f64; templates.len()];
    let workers = parallelism.min(templates.len());
    if workers <= 1 {
        for (slot, template) in distances.iter_mut().zip(templates) {
            *slot = dtw_distance(template, query).expect("shapes validated");
        }
    } else {
        let chunk = templates.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for (out, chunk_templates) in distances.chunks_mut(chunk).zip(templates.chunks(chunk)) {
                scope.spawn(move || {
                    for (slot, template) in out.iter_mut().zip(chunk_templates) {
                        *slot = dtw_distance(template, query).expect("shapes validated");
                    }
                });
            }
        });
    }

    let (template_index, &distance) = distances
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.partial_cmp(b).unwrap().then(ia.cmp(ib)))
        .expect("non-empty template list");
    Ok(MatchResult {
        template_index,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(rows: &[&[f64]]) -> Series {
        Series::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn arb_series(max_rows: usize, dims: usize) -> impl Strategy<Value = Series> {
        proptest::collection::vec(
            proptest::collection::vec(-50.0f64..50.0, dims),
            1..=max_rows,
        )
        .prop_map(|rows| Series::from_rows(&rows).unwrap())
    }

    #[test]
    fn point_cost_of_identical_vectors_is_zero() {
        assert_eq!(point_cost(&[1.5, -2.0, 3.0], &[1.5, -2.0, 3.0]), 0.0);
    }

    #[test]
    fn point_cost_direct_evaluation() {
        assert_eq!(point_cost(&[0.0, 0.0, 0.0], &[1.0, 2.0, 2.0]), 9.0);
    }

    #[test]
    fn self_distance_is_zero() {
        let p = series(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        assert_eq!(dtw_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn duplicated_sample_matches_at_zero_cost() {
        let p = series(&[&[0.0], &[1.0]]);
        let q = series(&[&[0.0], &[1.0], &[1.0]]);
        // Frozen from the full-matrix oracle: the repeated 1 warps onto the
        // final row of P at zero cost.
        assert_eq!(dtw_distance_full(&p, &q).unwrap(), 0.0);
        assert_eq!(dtw_distance(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let p = series(&[&[0.0, 1.0]]);
        let q = series(&[&[0.0]]);
        assert!(matches!(
            dtw_distance(&p, &q),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(matches!(
            Series::from_rows(&[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn exact_copy_wins_with_zero_distance() {
        let q = series(&[&[1.0, 0.0], &[2.0, 1.0], &[0.5, -1.0]]);
        let other = series(&[&[9.0, 9.0], &[8.0, 8.0]]);
        let result = best_match(&q, &[q.clone(), other], 1).unwrap();
        assert_eq!(result.template_index, 0);
        assert_eq!(result.distance, 0.0);
    }

    #[test]
    fn ties_break_toward_lowest_index() {
        let q = series(&[&[1.0], &[2.0]]);
        let result = best_match(&q, &[q.clone(), q.clone(), q.clone()], 4).unwrap();
        assert_eq!(result.template_index, 0);
    }

    /// The standard matching configuration (ten 10-row templates against a
    /// 40-row six-channel slice) is bit-identical across worker counts.
    #[test]
    fn standard_configuration_is_parallel_deterministic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
        let mut random_series = |rows: usize| {
            Series::from_flat(
                (0..rows * 6).map(|_| rng.gen_range(-20.0..20.0)).collect(),
                6,
            )
            .unwrap()
        };
        let templates: Vec<Series> = (0..10).map(|_| random_series(10)).collect();
        let query = random_series(40);
        let reference = best_match(&query, &templates, 1).unwrap();
        for level in [2usize, 4, 8] {
            let got = best_match(&query, &templates, level).unwrap();
            assert_eq!(got.template_index, reference.template_index);
            assert_eq!(got.distance.to_bits(), reference.distance.to_bits());
        }
    }

    #[test]
    fn empty_template_list_is_a_config_error() {
        let q = series(&[&[1.0]]);
        assert!(matches!(best_match(&q, &[], 1), Err(Error::Config(_))));
    }

    #[test]
    fn zero_parallelism_is_a_config_error() {
        let q = series(&[&[1.0]]);
        let templates = std::slice::from_ref(&q);
        assert!(matches!(
            best_match(&q, templates, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn z_scoring_centers_and_scales_each_channel() {
        let s = series(&[&[1.0, 5.0], &[3.0, 5.0], &[5.0, 5.0]]);
        let z = s.z_scored();
        for c in 0..2 {
            let mean: f64 = (0..3).map(|r| z.row(r)[c]).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
        }
        // Constant channel stays centered at zero rather than dividing by 0.
        assert!(z.row(0)[1] == 0.0 && z.row(2)[1] == 0.0);
    }

    proptest! {
        #[test]
        fn point_cost_matches_componentwise_oracle(
            p in proptest::collection::vec(-100.0f64..100.0, 1..8),
            q_seed in proptest::collection::vec(-100.0f64..100.0, 1..8),
        ) {
            let q: Vec<f64> = q_seed.iter().cycle().take(p.len()).copied().collect();
            let oracle: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            prop_assert_eq!(point_cost(&p, &q), oracle);
        }

        #[test]
        fn rolling_equals_full_matrix_exactly(
            p in arb_series(20, 3),
            q in arb_series(20, 3),
        ) {
            prop_assert_eq!(dtw_distance(&p, &q).unwrap(), dtw_distance_full(&p, &q).unwrap());
        }

        #[test]
        fn distance_is_symmetric(p in arb_series(12, 2), q in arb_series(12, 2)) {
            let d_pq = dtw_distance(&p, &q).unwrap();
            let d_qp = dtw_distance(&q, &p).unwrap();
            prop_assert!((d_pq - d_qp).abs() <= 1e-9 * (1.0 + d_pq.abs()));
        }

        #[test]
        fn distance_is_non_negative(p in arb_series(12, 3), q in arb_series(12, 3)) {
            prop_assert!(dtw_distance(&p, &q).unwrap() >= 0.0);
        }

        #[test]
        fn quadratic_cost_scaling(p in arb_series(10, 3), q in arb_series(10, 3), c in 0.25f64..8.0) {
            let scale = |s: &Series| {
                Series::from_rows(
                    &s.to_rows()
                        .into_iter()
                        .map(|r| r.into_iter().map(|v| v * c).collect())
                        .collect::<Vec<_>>(),
                )
                .unwrap()
            };
            let base = dtw_distance(&p, &q).unwrap();
            let scaled = dtw_distance(&scale(&p), &scale(&q)).unwrap();
            prop_assert!((scaled - c * c * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
        }

        #[test]
        fn best_match_independent_of_parallelism(
            q in arb_series(16, 3),
            templates in proptest::collection::vec(arb_series(10, 3), 1..6),
        ) {
            let reference = best_match(&q, &templates, 1).unwrap();
            for l in [2usize, 4, 8] {
                let got = best_match(&q, &templates, l).unwrap();
                prop_assert_eq!(got.template_index, reference.template_index);
                prop_assert_eq!(got.distance.to_bits(), reference.distance.to_bits());
            }
        }
    }
}
