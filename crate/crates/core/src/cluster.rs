//! DTW distance, barycenter averaging and K-means over action sequences.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::te::TePeak;

const KMEANS_MAX_ITERS: usize = 60;
pub const DEFAULT_DBA_ITERATIONS: usize = 10;

/// One influential action window projected onto a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSequence<R: Real> {
    pub values: Vec<R>,
    pub anchor_t: usize,
    pub experiment_id: String,
    pub channel: usize,
}

/// K-means output: per-sequence assignments, barycenter centroids, and the
/// sum of DTW distances to assigned centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult<R: Real> {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<R>>,
    pub inertia: R,
    /// Inertia after each assignment/update round of the winning restart.
    pub inertia_trace: Vec<R>,
}

/// One row of the clusters CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRow {
    pub sequence_id: usize,
    pub experiment_id: String,
    pub anchor_t: usize,
    pub cluster_id: usize,
}

/// Classic dynamic time warping distance: absolute-difference local cost,
/// steps {diagonal, up, left}, no warping-window constraint.
pub fn dtw_distance<R: Real>(a: &[R], b: &[R]) -> Result<R> {
    dtw_distance_with_band(a, b, None)
}

/// DTW with an optional Sakoe-Chiba band: cells with `|i - j| > band` are
/// excluded. The band must be at least the length difference, otherwise no
/// path exists.
pub fn dtw_distance_with_band<R: Real>(a: &[R], b: &[R], band: Option<usize>) -> Result<R> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid_argument(
            "DTW requires non-empty sequences",
        ));
    }
    if let Some(w) = band {
        if a.len().abs_diff(b.len()) > w {
            return Err(Error::invalid_argument(format!(
                "band {w} is narrower than the length difference {}",
                a.len().abs_diff(b.len())
            )));
        }
    }
    let (n, m) = (a.len(), b.len());
    let inf = R::infinity();
    let mut prev = vec![inf; m + 1];
    let mut curr = vec![inf; m + 1];
    prev[0] = R::zero();
    for i in 1..=n {
        curr[0] = inf;
        let (lo, hi) = match band {
            Some(w) => (i.saturating_sub(w).max(1), (i + w).min(m)),
            None => (1, m),
        };
        for j in 1..lo {
            curr[j] = inf;
        }
        for j in lo..=hi {
            let cost = (a[i - 1] - b[j - 1]).abs();
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = cost + best;
        }
        for j in (hi + 1)..=m {
            curr[j] = inf;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// DTW with traceback. Ties prefer the diagonal step, then up, then left, so
/// alignments are deterministic.
fn dtw_path<R: Real>(a: &[R], b: &[R]) -> (R, Vec<(usize, usize)>) {
    let (n, m) = (a.len(), b.len());
    let inf = R::infinity();
    let mut d = vec![inf; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    d[idx(0, 0)] = R::zero();
    for i in 1..=n {
        for j in 1..=m {
            let cost = (a[i - 1] - b[j - 1]).abs();
            let best = d[idx(i - 1, j - 1)].min(d[idx(i - 1, j)]).min(d[idx(i, j - 1)]);
            d[idx(i, j)] = cost + best;
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        path.push((i - 1, j - 1));
        if i == 1 && j == 1 {
            break;
        }
        let diag = d[idx(i - 1, j - 1)];
        let up = d[idx(i - 1, j)];
        let left = d[idx(i, j - 1)];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    path.reverse();
    (d[idx(n, m)], path)
}

fn total_distance<R: Real>(center: &[R], sequences: &[&[R]]) -> Result<R> {
    let mut total = R::zero();
    for s in sequences {
        total += dtw_distance(center, s)?;
    }
    Ok(total)
}

/// DTW barycenter averaging over equal-length sequences.
///
/// Starts from the pointwise mean and refines for up to `iterations` rounds:
/// every sequence is aligned to the current barycenter and each barycenter
/// position is re-estimated as the mean of the values aligned to it. An
/// update is kept only if the total DTW distance to the members does not
/// increase, so the total is non-increasing over iterations.
pub fn dba_average<R: Real>(sequences: &[&[R]], iterations: usize) -> Result<Vec<R>> {
    if sequences.is_empty() {
        return Err(Error::invalid_argument(
            "cannot average an empty set of sequences",
        ));
    }
    let len = sequences[0].len();
    if len == 0 {
        return Err(Error::invalid_argument("sequences must be non-empty"));
    }
    if sequences.iter().any(|s| s.len() != len) {
        return Err(Error::invalid_argument(
            "barycenter averaging requires equal-length sequences",
        ));
    }
    if sequences.len() == 1 {
        return Ok(sequences[0].to_vec());
    }

    let n = real::<R>(sequences.len() as f64);
    let mut center: Vec<R> = (0..len)
        .map(|i| sequences.iter().map(|s| s[i]).sum::<R>() / n)
        .collect();
    let mut best_total = total_distance(&center, sequences)?;

    for _ in 0..iterations {
        let mut sums = vec![R::zero(); len];
        let mut counts = vec![0usize; len];
        for s in sequences {
            let (_, path) = dtw_path(&center, s);
            for (ci, sj) in path {
                sums[ci] += s[sj];
                counts[ci] += 1;
            }
        }
        let candidate: Vec<R> = sums
            .iter()
            .zip(&counts)
            .map(|(&sum, &c)| if c > 0 { sum / real::<R>(c as f64) } else { R::zero() })
            .collect();
        let candidate_total = total_distance(&candidate, sequences)?;
        if candidate_total < best_total {
            center = candidate;
            best_total = candidate_total;
        } else {
            break;
        }
    }
    Ok(center)
}

/// K-means under DTW distance with barycenter centroid updates.
///
/// Initialization is k-means++-style: the first centroid is a random member,
/// later ones are drawn with probability proportional to the squared DTW
/// distance to the nearest chosen centroid. Best inertia over `restarts`
/// wins; deterministic given `seed`.
pub fn kmeans_dtw<R: Real>(
    sequences: &[Vec<R>],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusterResult<R>> {
    if k == 0 {
        return Err(Error::invalid_argument("k must be at least 1"));
    }
    if sequences.len() < k {
        return Err(Error::invalid_argument(format!(
            "cannot form {k} clusters from {} sequences",
            sequences.len()
        )));
    }
    if restarts == 0 {
        return Err(Error::invalid_argument("restarts must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterResult<R>> = None;
    for _ in 0..restarts {
        let result = kmeans_single(sequences, k, &mut rng)?;
        let better = match &best {
            None => true,
            Some(b) => result.inertia < b.inertia,
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart ran"))
}

fn kmeans_single<R: Real>(
    sequences: &[Vec<R>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ClusterResult<R>> {
    let n = sequences.len();
    let mut centroids: Vec<Vec<R>> = Vec::with_capacity(k);
    centroids.push(sequences[rng.random_range(0..n)].clone());
    let mut min_d2 = vec![R::zero(); n];
    while centroids.len() < k {
        let newest = centroids.last().unwrap();
        for (i, s) in sequences.iter().enumerate() {
            let d = dtw_distance(newest, s)?;
            let d2 = d * d;
            if centroids.len() == 1 || d2 < min_d2[i] {
                min_d2[i] = d2;
            }
        }
        let weights: Vec<f64> = min_d2.iter().map(|d| d.to_f64().unwrap_or(0.0)).collect();
        let next = match WeightedIndex::new(&weights) {
            Ok(dist) => dist.sample(rng),
            // All-zero weights (duplicate sequences): take the first
            // sequence that is not already a centroid.
            Err(_) => (0..n)
                .find(|i| !centroids.iter().any(|c| c == &sequences[*i]))
                .unwrap_or(0),
        };
        centroids.push(sequences[next].clone());
    }

    let mut assignments = vec![0usize; n];
    let mut inertia_trace: Vec<R> = Vec::new();
    let mut inertia = R::zero();
    for _iter in 0..KMEANS_MAX_ITERS {
        // Assignment step (ties go to the lower cluster id).
        let mut changed = false;
        let mut dists = vec![R::zero(); n];
        for (i, s) in sequences.iter().enumerate() {
            let mut best_c = 0usize;
            let mut best_d = R::infinity();
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dtw_distance(centroid, s)?;
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            if assignments[i] != best_c {
                changed = true;
                assignments[i] = best_c;
            }
            dists[i] = best_d;
        }

        // Repair empty clusters with the farthest point; its distance drops
        // to zero so inertia cannot increase.
        loop {
            let mut sizes = vec![0usize; k];
            for &a in &assignments {
                sizes[a] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                break;
            };
            let far = (0..n)
                .max_by(|&i, &j| {
                    dists[i]
                        .partial_cmp(&dists[j])
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("n >= k >= 1");
            centroids[empty] = sequences[far].clone();
            assignments[far] = empty;
            dists[far] = R::zero();
            changed = true;
        }

        inertia = dists.iter().copied().sum();
        inertia_trace.push(inertia);
        if !changed && inertia_trace.len() > 1 {
            break;
        }

        // Update step: barycenter per cluster, kept only if it does not
        // worsen that cluster's total distance.
        for c in 0..k {
            let members: Vec<&[R]> = sequences
                .iter()
                .enumerate()
                .filter(|(i, _)| assignments[*i] == c)
                .map(|(_, s)| s.as_slice())
                .collect();
            if members.is_empty() {
                continue;
            }
            let current_total = total_distance(&centroids[c], &members)?;
            let candidate = dba_average(&members, DEFAULT_DBA_ITERATIONS)?;
            if total_distance(&candidate, &members)? <= current_total {
                centroids[c] = candidate;
            }
        }
    }

    Ok(ClusterResult {
        k,
        assignments,
        centroids,
        inertia,
        inertia_trace,
    })
}

/// Pointwise mean per cluster, the simpler reporting alternative to the
/// barycenter centroids.
pub fn pointwise_cluster_means<R: Real>(
    sequences: &[Vec<R>],
    assignments: &[usize],
    k: usize,
) -> Result<Vec<Vec<R>>> {
    if sequences.len() != assignments.len() {
        return Err(Error::invalid_argument(
            "sequences and assignments must have equal length",
        ));
    }
    let len = sequences.first().map(|s| s.len()).unwrap_or(0);
    let mut means = vec![vec![R::zero(); len]; k];
    let mut counts = vec![0usize; k];
    for (s, &a) in sequences.iter().zip(assignments) {
        for (acc, &v) in means[a].iter_mut().zip(s.iter()) {
            *acc += v;
        }
        counts[a] += 1;
    }
    for (mean, &c) in means.iter_mut().zip(&counts) {
        if c > 0 {
            for v in mean.iter_mut() {
                *v /= real::<R>(c as f64);
            }
        }
    }
    Ok(means)
}

/// Project each peak's attributed action window onto one action channel.
pub fn select_channel<R: Real>(
    peaks: &[TePeak<R>],
    channel: usize,
    experiment_id: &str,
) -> Result<Vec<ActionSequence<R>>> {
    if peaks.is_empty() {
        return Ok(Vec::new());
    }
    let d_a = peaks[0].action_window.first().map(|f| f.len()).unwrap_or(0);
    if channel >= d_a {
        return Err(Error::invalid_argument(format!(
            "unknown action channel {channel}; windows have {d_a} channels"
        )));
    }
    peaks
        .iter()
        .map(|p| {
            if p.action_window.iter().any(|f| f.len() != d_a) {
                return Err(Error::invalid_argument(
                    "ragged action window in peak",
                ));
            }
            Ok(ActionSequence {
                values: p.action_window.iter().map(|f| f[channel]).collect(),
                anchor_t: p.anchor_t,
                experiment_id: experiment_id.to_string(),
                channel,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dtw_identity_is_zero() {
        let a = [0.1f64, 0.5, 0.9];
        assert_eq!(dtw_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dtw_constant_offset() {
        let a = [0.0f64, 0.0, 0.0];
        let b = [1.0f64, 1.0, 1.0];
        assert_abs_diff_eq!(dtw_distance(&a, &b).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn dtw_warps_across_lengths() {
        let a = [0.0f64, 1.0];
        let b = [0.0f64, 0.0, 1.0];
        assert_eq!(dtw_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn dtw_rejects_empty() {
        assert!(dtw_distance::<f64>(&[], &[1.0]).is_err());
        assert!(dtw_distance::<f64>(&[1.0], &[]).is_err());
    }

    #[test]
    fn dtw_is_symmetric() {
        let a = [0.2f64, 0.8, 0.4, 0.1];
        let b = [0.5f64, 0.3, 0.9];
        assert_abs_diff_eq!(
            dtw_distance(&a, &b).unwrap(),
            dtw_distance(&b, &a).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dtw_band_matches_full_when_wide() {
        let a = [0.2f64, 0.8, 0.4, 0.1];
        let b = [0.5f64, 0.3, 0.9, 0.2];
        assert_eq!(
            dtw_distance_with_band(&a, &b, Some(4)).unwrap(),
            dtw_distance(&a, &b).unwrap()
        );
        assert!(dtw_distance_with_band(&a, &[0.1], Some(1)).is_err());
    }

    #[test]
    fn dtw_path_cost_matches_distance() {
        let a = [0.0f64, 0.3, 0.7, 1.0];
        let b = [0.0f64, 0.5, 1.0];
        let (cost, path) = dtw_path(&a, &b);
        assert_abs_diff_eq!(cost, dtw_distance(&a, &b).unwrap(), epsilon = 1e-12);
        assert_eq!(path.first(), Some(&(0usize, 0usize)));
        assert_eq!(path.last(), Some(&(3usize, 2usize)));
    }

    #[test]
    fn dba_single_sequence_is_fixed_point() {
        let s = vec![0.1f64, 0.4, 0.9];
        let avg = dba_average(&[s.as_slice()], 10).unwrap();
        assert_eq!(avg, s);
    }

    #[test]
    fn dba_identical_sequences_return_them() {
        let s = vec![0.1f64, 0.4, 0.9];
        let avg = dba_average(&[s.as_slice(), s.as_slice()], 10).unwrap();
        for (a, b) in avg.iter().zip(&s) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn dba_beats_or_matches_pointwise_mean() {
        let a = vec![0.0f64, 0.0, 1.0];
        let b = vec![0.0f64, 1.0, 1.0];
        let members = [a.as_slice(), b.as_slice()];
        let bary = dba_average(&members, 10).unwrap();
        let mean = [0.0f64, 0.5, 1.0];
        let bary_total = total_distance(&bary, &members).unwrap();
        let mean_total = total_distance(&mean, &members).unwrap();
        assert!(
            bary_total <= mean_total,
            "barycenter total {bary_total} should not exceed mean total {mean_total}"
        );
    }

    #[test]
    fn dba_rejects_empty_and_ragged() {
        assert!(dba_average::<f64>(&[], 5).is_err());
        let a = [0.0f64, 1.0];
        let b = [0.0f64, 1.0, 0.5];
        assert!(dba_average(&[&a[..], &b[..]], 5).is_err());
    }

    #[test]
    fn kmeans_k1_matches_dba_of_all() {
        // Noisy copies of one shape: the barycenter beats any single member.
        let seqs: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                (0..8)
                    .map(|j| 0.5 + 0.3 * (j as f64 * 0.5).sin() + 0.02 * ((i * 13 + j * 7) as f64).sin())
                    .collect()
            })
            .collect();
        let result = kmeans_dtw(&seqs, 1, 3, 9).unwrap();
        let refs: Vec<&[f64]> = seqs.iter().map(|s| s.as_slice()).collect();
        let expected = dba_average(&refs, DEFAULT_DBA_ITERATIONS).unwrap();
        assert_eq!(result.centroids.len(), 1);
        for (a, b) in result.centroids[0].iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert!(result.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn kmeans_k_equals_n_has_zero_inertia() {
        let seqs: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..6).map(|j| (i as f64) * 0.2 + (j as f64) * 0.01).collect())
            .collect();
        let result = kmeans_dtw(&seqs, 5, 5, 4).unwrap();
        assert_abs_diff_eq!(result.inertia, 0.0, epsilon = 1e-12);
        let mut assigned = result.assignments.clone();
        assigned.sort_unstable();
        assert_eq!(assigned, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn kmeans_rejects_k_larger_than_n() {
        let seqs = vec![vec![0.0f64, 1.0], vec![1.0, 0.0]];
        assert!(kmeans_dtw(&seqs, 3, 2, 0).is_err());
        assert!(kmeans_dtw(&seqs, 0, 2, 0).is_err());
        assert!(kmeans_dtw(&seqs, 2, 0, 0).is_err());
    }

    #[test]
    fn kmeans_is_deterministic() {
        let seqs: Vec<Vec<f64>> = (0..12)
            .map(|i| (0..10).map(|j| ((i * 3 + j) as f64 * 0.21).sin().abs()).collect())
            .collect();
        let a = kmeans_dtw(&seqs, 3, 4, 77).unwrap();
        let b = kmeans_dtw(&seqs, 3, 4, 77).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.centroids, b.centroids);
    }

    #[test]
    fn select_channel_projects_one_column() {
        let peak = TePeak {
            anchor_t: 30,
            te_value: 0.4,
            window_start_t: 11,
            window_end_t: 25,
            action_window: (0..15).map(|i| vec![i as f64 * 0.05, 0.5]).collect(),
        };
        let seqs = select_channel(&[peak], 0, "exp0").unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].values.len(), 15);
        assert_abs_diff_eq!(seqs[0].values[3], 0.15, epsilon = 1e-12);
        assert_eq!(seqs[0].experiment_id, "exp0");
    }

    #[test]
    fn select_channel_empty_and_unknown() {
        assert!(select_channel::<f64>(&[], 0, "e").unwrap().is_empty());
        let peak = TePeak {
            anchor_t: 30,
            te_value: 0.4,
            window_start_t: 11,
            window_end_t: 25,
            action_window: vec![vec![0.5, 0.5]; 15],
        };
        assert!(select_channel(&[peak], 2, "e").is_err());
    }
}
