//! k-means grouping of primitive feature vectors and cluster-count
//! selection diagnostics.
//!
//! Lloyd's algorithm with k-means++ seeding. Runs are deterministic given a
//! seed and independent of input order: seeding walks the candidates in a
//! stable lexicographic order of the vectors themselves. Assignment ties
//! break toward the lowest cluster index and empty clusters are reseeded
//! with the point farthest from its centroid, so every returned cluster is
//! nonempty.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, PrimitiveSource};

/// Fitted k-means model.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input point, in input order.
    pub assignments: Vec<usize>,
    /// Sum of squared distances of every point to its assigned centroid.
    pub objective: f64,
    /// Within-cluster distance; `None` when N = k leaves it undefined.
    pub lambda_w: Option<f64>,
    /// Between-cluster distance; `None` when k = 1 leaves it undefined.
    pub lambda_b: Option<f64>,
    pub seed: u64,
    pub iterations: usize,
}

const MAX_LLOYD_ITERATIONS: usize = 300;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn validate_points(points: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = points.first() else {
        return Err(Error::Cluster("empty input".to_owned()));
    };
    let dim = first.len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::Cluster(format!(
                "mixed vector lengths: point {i} has {} components, expected {dim}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Cluster(format!("non-finite component in point {i}")));
        }
    }
    Ok(dim)
}

fn lex_order(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// k-means++ seeding over candidates visited in lexicographic value order,
/// which makes the chosen centroids independent of input permutation.
fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let order = lex_order(points);
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = order[rng.random_range(0..n)];
    centroids.push(points[first].clone());

    let mut d2: Vec<f64> = order
        .iter()
        .map(|&i| squared_distance(&points[i], &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = order.len() - 1;
            for (pos, w) in d2.iter().enumerate() {
                acc += w;
                if acc >= target {
                    pick = pos;
                    break;
                }
            }
            pick
        } else {
            // All candidates coincide with a centroid; any choice is the same.
            rng.random_range(0..n)
        };
        let c = points[order[chosen]].clone();
        for (pos, &i) in order.iter().enumerate() {
            d2[pos] = d2[pos].min(squared_distance(&points[i], &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Nearest-centroid assignment; ties break toward the lowest cluster index.
fn assign_step(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = squared_distance(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn update_step(points: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (c, count) in counts.iter().enumerate() {
        if *count > 0 {
            for s in &mut sums[c] {
                *s /= *count as f64;
            }
        }
    }
    sums
}

fn objective_of(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum()
}

/// Independent k-means++ restarts per fit; the best final objective wins.
const KMEANS_RESTARTS: usize = 10;

/// Lloyd's algorithm from k-means++ initializations.
///
/// Runs ten restarts with sub-seeds derived from `seed` and keeps the run
/// with the lowest objective (first on ties). Each run iterates to an
/// assignment fixpoint or 300 iterations. Deterministic for a fixed seed
/// and, because seeding orders candidates by value, invariant to
/// permutations of distinct input points.
pub fn kmeans_fit(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterModel> {
    let mut best: Option<ClusterModel> = None;
    for restart in 0..KMEANS_RESTARTS {
        let sub_seed = crate::pipeline::derive_seed(seed, &format!("kmeans-restart/{restart}"));
        let mut model = kmeans_single_start(points, k, sub_seed)?;
        model.seed = seed;
        if best
            .as_ref()
            .map(|b| model.objective < b.objective)
            .unwrap_or(true)
        {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn kmeans_single_start(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterModel> {
    let n = points.len();
    if k == 0 {
        return Err(Error::Cluster("k must be positive".to_owned()));
    }
    if k > n {
        return Err(Error::Cluster(format!("k = {k} exceeds N = {n}")));
    }
    let dim = validate_points(points)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let mut assignments = assign_step(points, &centroids);
    let mut prev_objective = f64::INFINITY;
    let mut iterations = 0usize;

    loop {
        iterations += 1;

        // Keep every cluster populated: the point farthest from its centroid
        // seeds an empty cluster and is moved there outright. Repair can only
        // lower the objective, so the monotonicity assertion below survives.
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let (far_idx, _) = points
                .iter()
                .enumerate()
                .filter(|(i, _)| counts[assignments[*i]] > 1)
                .map(|(i, p)| (i, squared_distance(p, &centroids[assignments[i]])))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("k <= N leaves a donor cluster with at least two members");
            counts[assignments[far_idx]] -= 1;
            assignments[far_idx] = c;
            counts[c] = 1;
            centroids[c] = points[far_idx].clone();
        }

        let objective = objective_of(points, &centroids, &assignments);
        debug_assert!(
            objective <= prev_objective * (1.0 + 1e-12) + 1e-12,
            "Lloyd objective increased: {prev_objective} -> {objective}"
        );
        prev_objective = objective;

        if iterations >= MAX_LLOYD_ITERATIONS {
            break;
        }
        centroids = update_step(points, &assignments, k, dim);
        let next = assign_step(points, &centroids);
        if next == assignments {
            break;
        }
        assignments = next;
    }

    // Final centroids are the means of the final (repaired) assignment; on a
    // fixpoint exit this recomputation is a no-op.
    centroids = update_step(points, &assignments, k, dim);
    let objective = objective_of(points, &centroids, &assignments);
    let mut model = ClusterModel {
        k,
        centroids,
        assignments,
        objective,
        lambda_w: None,
        lambda_b: None,
        seed,
        iterations,
    };
    if k >= 2 && n > k {
        let (w, b) = cluster_quality(&model, points)?;
        model.lambda_w = Some(w);
        model.lambda_b = Some(b);
    }
    Ok(model)
}

/// Feature-vector front end for [`kmeans_fit`].
pub fn kmeans_fit_features(vectors: &[FeatureVector], k: usize, seed: u64) -> Result<ClusterModel> {
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| v.phi.clone()).collect();
    kmeans_fit(&points, k, seed)
}

/// Reconstructs a model from a stored assignment: centroids become the
/// cluster means of the given labels.
pub fn model_from_assignments(
    points: &[Vec<f64>],
    assignments: &[usize],
    k: usize,
) -> Result<ClusterModel> {
    if assignments.len() != points.len() {
        return Err(Error::LengthMismatch {
            left: assignments.len(),
            right: points.len(),
        });
    }
    let dim = validate_points(points)?;
    if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::Cluster(format!("assignment {bad} out of range for k = {k}")));
    }
    let centroids = update_step(points, assignments, k, dim);
    let objective = objective_of(points, &centroids, assignments);
    let mut model = ClusterModel {
        k,
        centroids,
        assignments: assignments.to_vec(),
        objective,
        lambda_w: None,
        lambda_b: None,
        seed: 0,
        iterations: 0,
    };
    if k >= 2 && points.len() > k {
        let (w, b) = cluster_quality(&model, points)?;
        model.lambda_w = Some(w);
        model.lambda_b = Some(b);
    }
    Ok(model)
}

/// Within distance λ_w = Σᵢ Σ_{φ∈Cᵢ} ‖φ − μᵢ‖² / (N − k) and between
/// distance λ_b = Σᵢ nᵢ ‖μᵢ − μ̄‖² / (k − 1), with μᵢ the mean of cluster i
/// and μ̄ the mean of all vectors.
pub fn cluster_quality(model: &ClusterModel, points: &[Vec<f64>]) -> Result<(f64, f64)> {
    let n = points.len();
    let k = model.k;
    if k < 2 {
        return Err(Error::Cluster(
            "lambda_b undefined for k = 1".to_owned(),
        ));
    }
    if n <= k {
        return Err(Error::Cluster(
            "lambda_w undefined for N = k".to_owned(),
        ));
    }
    if model.assignments.len() != n {
        return Err(Error::LengthMismatch {
            left: model.assignments.len(),
            right: n,
        });
    }
    let dim = validate_points(points)?;

    let means = update_step(points, &model.assignments, k, dim);
    let mut counts = vec![0usize; k];
    for &a in &model.assignments {
        counts[a] += 1;
    }

    let within: f64 = points
        .iter()
        .zip(&model.assignments)
        .map(|(p, &a)| squared_distance(p, &means[a]))
        .sum();
    let lambda_w = within / (n - k) as f64;

    let mut grand = vec![0.0; dim];
    for p in points {
        for (g, v) in grand.iter_mut().zip(p) {
            *g += v;
        }
    }
    for g in &mut grand {
        *g /= n as f64;
    }
    let between: f64 = means
        .iter()
        .zip(&counts)
        .map(|(mu, &ni)| ni as f64 * squared_distance(mu, &grand))
        .sum();
    let lambda_b = between / (k - 1) as f64;

    Ok((lambda_w, lambda_b))
}

/// One row of an elbow sweep: medians across seeds plus backward
/// change rates Δλ/Δk (zero on the first row).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub lambda_w: f64,
    pub lambda_b: f64,
    pub objective: f64,
    pub d_lambda_w: f64,
    pub d_lambda_b: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs k-means over `k_min..=k_max`, `seeds_per_k` seeds each, and reports
/// median quality metrics per k.
pub fn elbow_sweep(
    points: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    seeds_per_k: usize,
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    let n = points.len();
    if !(2 <= k_min && k_min < k_max && k_max < n) {
        return Err(Error::Cluster(format!(
            "invalid sweep range: need 2 <= k_min < k_max < N, got k_min={k_min}, k_max={k_max}, N={n}"
        )));
    }
    if seeds_per_k == 0 {
        return Err(Error::Cluster("seeds_per_k must be positive".to_owned()));
    }
    let mut rows = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let mut ws = Vec::with_capacity(seeds_per_k);
        let mut bs = Vec::with_capacity(seeds_per_k);
        let mut objs = Vec::with_capacity(seeds_per_k);
        for s in 0..seeds_per_k {
            let seed = crate::pipeline::derive_seed(base_seed, &format!("sweep/k{k}/s{s}"));
            let model = kmeans_fit(points, k, seed)?;
            let (w, b) = cluster_quality(&model, points)?;
            ws.push(w);
            bs.push(b);
            objs.push(model.objective);
        }
        let lambda_w = median(&mut ws);
        let lambda_b = median(&mut bs);
        let objective = median(&mut objs);
        let (d_lambda_w, d_lambda_b) = match rows.last() {
            Some(prev @ SweepRow { .. }) => {
                let dk = (k - prev.k) as f64;
                (
                    (lambda_w - prev.lambda_w) / dk,
                    (lambda_b - prev.lambda_b) / dk,
                )
            }
            None => (0.0, 0.0),
        };
        rows.push(SweepRow {
            k,
            lambda_w,
            lambda_b,
            objective,
            d_lambda_w,
            d_lambda_b,
        });
    }
    Ok(rows)
}

/// Picks the elbow of a sweep: the interior k with the largest positive
/// second difference of the median objective, i.e. where the decrease rate
/// flattens the hardest.
pub fn detect_elbow(rows: &[SweepRow]) -> Option<usize> {
    if rows.len() < 3 {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for w in rows.windows(3) {
        let second_diff = w[0].objective - 2.0 * w[1].objective + w[2].objective;
        if best.map(|(_, v)| second_diff > v).unwrap_or(true) {
            best = Some((w[1].k, second_diff));
        }
    }
    best.map(|(k, _)| k)
}

/// Per-cluster member counts and fractions, ordered by cluster index.
pub fn cluster_distribution(model: &ClusterModel) -> Vec<(usize, usize, f64)> {
    let n = model.assignments.len();
    let mut counts = vec![0usize; model.k];
    for &a in &model.assignments {
        counts[a] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(c, count)| (c, count, count as f64 / n as f64))
        .collect()
}

/// Writes the centroid matrix as CSV, one row per cluster.
pub fn write_centroids_csv(model: &ClusterModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let dim = model.centroids.first().map(Vec::len).unwrap_or(0);
    let mut header = String::from("cluster");
    for i in 0..dim {
        header.push_str(&format!(",c{i}"));
    }
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for (c, centroid) in model.centroids.iter().enumerate() {
        let mut row = format!("{c}");
        for v in centroid {
            row.push(',');
            row.push_str(&format!("{v}"));
        }
        writeln!(w, "{row}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Writes per-primitive assignments as CSV `encounter_id,m,n,label,cluster`.
pub fn write_assignments_csv(
    model: &ClusterModel,
    sources: &[PrimitiveSource],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if sources.len() != model.assignments.len() {
        return Err(Error::LengthMismatch {
            left: sources.len(),
            right: model.assignments.len(),
        });
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "encounter_id,m,n,label,cluster").map_err(|e| Error::io(path, e))?;
    for (src, &cluster) in sources.iter().zip(&model.assignments) {
        writeln!(
            w,
            "{},{},{},{},{cluster}",
            src.encounter_id, src.m, src.n, src.label
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Reads an assignments CSV back as `(source, cluster)` pairs.
pub fn read_assignments_csv(path: impl AsRef<Path>) -> Result<Vec<(PrimitiveSource, usize)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid integer `{s}`"),
            })
        };
        out.push((
            PrimitiveSource {
                encounter_id: fields[0].to_owned(),
                m: parse(fields[1])?,
                n: parse(fields[2])?,
                label: parse(fields[3])?,
            },
            parse(fields[4])?,
        ));
    }
    Ok(out)
}

/// Reads a sweep table written by [`write_sweep_csv`].
pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let bad = |what: &str, s: &str| Error::Parse {
            line: line_no,
            message: format!("invalid {what} `{s}`"),
        };
        out.push(SweepRow {
            k: fields[0].parse().map_err(|_| bad("k", fields[0]))?,
            lambda_w: fields[1].parse().map_err(|_| bad("lambda_w", fields[1]))?,
            lambda_b: fields[2].parse().map_err(|_| bad("lambda_b", fields[2]))?,
            objective: fields[3].parse().map_err(|_| bad("objective", fields[3]))?,
            d_lambda_w: fields[4].parse().map_err(|_| bad("d_lambda_w", fields[4]))?,
            d_lambda_b: fields[5].parse().map_err(|_| bad("d_lambda_b", fields[5]))?,
        });
    }
    Ok(out)
}

/// Writes a sweep table as CSV
/// `k,lambda_w,lambda_b,objective,d_lambda_w,d_lambda_b`.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "k,lambda_w,lambda_b,objective,d_lambda_w,d_lambda_b")
        .map_err(|e| Error::io(path, e))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.k, r.lambda_w, r.lambda_b, r.objective, r.d_lambda_w, r.d_lambda_b
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pts_1d(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|v| vec![*v]).collect()
    }

    #[test]
    fn separates_two_obvious_groups() {
        let points = pts_1d(&[0.0, 0.1, 10.0, 10.1]);
        let model = kmeans_fit(&points, 2, 7).unwrap();
        assert_eq!(model.assignments[0], model.assignments[1]);
        assert_eq!(model.assignments[2], model.assignments[3]);
        assert_ne!(model.assignments[0], model.assignments[2]);
        let mut centroids: Vec<f64> = model.centroids.iter().map(|c| c[0]).collect();
        centroids.sort_by(f64::total_cmp);
        assert_relative_eq!(centroids[0], 0.05, max_relative = 1e-12);
        assert_relative_eq!(centroids[1], 10.05, max_relative = 1e-12);
        assert_relative_eq!(model.objective, 0.01, max_relative = 1e-9);
    }

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let points = pts_1d(&[1.0, 2.0, 5.0, 9.0]);
        let model = kmeans_fit(&points, 4, 3).unwrap();
        assert_eq!(model.objective, 0.0);
        let mut seen: Vec<usize> = model.assignments.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_equals_one_recovers_global_mean() {
        let points = pts_1d(&[1.0, 2.0, 3.0, 6.0]);
        let model = kmeans_fit(&points, 1, 0).unwrap();
        assert_relative_eq!(model.centroids[0][0], 3.0, max_relative = 1e-12);
        let tss: f64 = [1.0f64, 2.0, 3.0, 6.0]
            .iter()
            .map(|v| (v - 3.0) * (v - 3.0))
            .sum();
        assert_relative_eq!(model.objective, tss, max_relative = 1e-12);
    }

    #[test]
    fn k_larger_than_n_errors() {
        assert!(kmeans_fit(&pts_1d(&[1.0, 2.0]), 3, 0).is_err());
    }

    #[test]
    fn mixed_lengths_error() {
        let points = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(kmeans_fit(&points, 1, 0).is_err());
    }

    #[test]
    fn identical_points_keep_all_clusters_populated() {
        let points = pts_1d(&[2.5; 6]);
        let model = kmeans_fit(&points, 3, 11).unwrap();
        let mut counts = vec![0usize; 3];
        for &a in &model.assignments {
            counts[a] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0), "counts {counts:?}");
        assert_eq!(model.objective, 0.0);
        let (w, b) = cluster_quality(&model, &points).unwrap();
        assert_eq!(w, 0.0);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn assignment_ties_break_to_lowest_index() {
        let centroids = vec![vec![0.0], vec![0.0], vec![4.0]];
        let got = assign_step(&pts_1d(&[0.0, 2.0, 4.0]), &centroids);
        assert_eq!(got, vec![0, 0, 2]);
    }

    #[test]
    fn quality_matches_hand_computation() {
        // Two clusters, each two copies of one point, means 0 and 1.
        let points = pts_1d(&[0.0, 0.0, 1.0, 1.0]);
        let model = kmeans_fit(&points, 2, 5).unwrap();
        let (w, b) = cluster_quality(&model, &points).unwrap();
        assert_eq!(w, 0.0);
        assert_relative_eq!(b, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn quality_undefined_cases_error() {
        let points = pts_1d(&[0.0, 1.0, 2.0]);
        let m1 = kmeans_fit(&points, 1, 0).unwrap();
        assert!(cluster_quality(&m1, &points).is_err());
        let m3 = kmeans_fit(&points, 3, 0).unwrap();
        assert!(cluster_quality(&m3, &points).is_err());
    }

    /// Independent re-implementation of the two quality formulas.
    fn quality_oracle(points: &[Vec<f64>], assignments: &[usize], k: usize) -> (f64, f64) {
        let n = points.len();
        let dim = points[0].len();
        let mut means = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(assignments) {
            counts[a] += 1;
            for d in 0..dim {
                means[a][d] += p[d];
            }
        }
        for c in 0..k {
            for d in 0..dim {
                means[c][d] /= counts[c] as f64;
            }
        }
        let mut grand = vec![0.0; dim];
        for p in points {
            for d in 0..dim {
                grand[d] += p[d] / n as f64;
            }
        }
        let mut within = 0.0;
        for (p, &a) in points.iter().zip(assignments) {
            for d in 0..dim {
                within += (p[d] - means[a][d]).powi(2);
            }
        }
        let mut between = 0.0;
        for c in 0..k {
            let mut dist = 0.0;
            for d in 0..dim {
                dist += (means[c][d] - grand[d]).powi(2);
            }
            between += counts[c] as f64 * dist;
        }
        (within / (n - k) as f64, between / (k - 1) as f64)
    }

    #[test]
    fn quality_matches_direct_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..20 {
            let n = 30;
            let dim = 4;
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random::<f64>() * 10.0).collect())
                .collect();
            let k = 2 + trial % 4;
            let model = kmeans_fit(&points, k, trial as u64).unwrap();
            let (w, b) = cluster_quality(&model, &points).unwrap();
            let (ow, ob) = quality_oracle(&points, &model.assignments, k);
            assert_relative_eq!(w, ow, max_relative = 1e-9);
            assert_relative_eq!(b, ob, max_relative = 1e-9);
        }
    }

    /// Unit-variance blobs at mutually equidistant centers (scaled basis
    /// vectors), so the objective knee sits exactly at the blob count.
    fn planted_blobs(blobs: usize, per_blob: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        use rand_distr::{Distribution, Normal};
        assert!(dim >= blobs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut points = Vec::new();
        for b in 0..blobs {
            let mut center = vec![0.0; dim];
            center[b] = 120.0;
            for _ in 0..per_blob {
                points.push(center.iter().map(|c| c + noise.sample(&mut rng)).collect());
            }
        }
        points
    }

    #[test]
    fn sweep_objective_elbow_at_planted_blob_count() {
        let points = planted_blobs(5, 30, 8, 4242);
        let rows = elbow_sweep(&points, 2, 10, 3, 17).unwrap();
        assert_eq!(detect_elbow(&rows), Some(5));
        // Objective drops sharply until k = 5, then flattens.
        let obj: Vec<f64> = rows.iter().map(|r| r.objective).collect();
        assert!(obj[3] / obj[0] < 0.2, "no sharp drop: {obj:?}");
        assert!(obj[4] / obj[3] > 0.5, "still dropping after k=5: {obj:?}");
    }

    #[test]
    fn sweep_medians_non_increasing_in_k() {
        let points = planted_blobs(4, 20, 5, 7);
        let rows = elbow_sweep(&points, 2, 10, 5, 23).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].objective <= w[0].objective * (1.0 + 1e-9),
                "objective increased from k={} to k={}",
                w[0].k,
                w[1].k
            );
        }
    }

    #[test]
    fn sweep_validates_range() {
        let points = pts_1d(&[0.0, 1.0, 2.0, 3.0]);
        assert!(elbow_sweep(&points, 2, 4, 1, 0).is_err());
        assert!(elbow_sweep(&points, 3, 2, 1, 0).is_err());
        assert!(elbow_sweep(&points, 2, 3, 1, 0).is_ok());
    }

    #[test]
    fn distribution_counts_and_fractions() {
        let points = planted_blobs(4, 10, 4, 1);
        let model = kmeans_fit(&points, 4, 2).unwrap();
        let dist = cluster_distribution(&model);
        assert_eq!(dist.len(), 4);
        let total: usize = dist.iter().map(|d| d.1).sum();
        assert_eq!(total, 40);
        let frac_sum: f64 = dist.iter().map(|d| d.2).sum();
        assert!((frac_sum - 1.0).abs() < 1e-12);
        // Well-separated equal blobs split evenly.
        assert!(dist.iter().all(|d| d.1 == 10), "{dist:?}");
    }

    #[test]
    fn single_cluster_distribution() {
        let points = pts_1d(&[1.0, 2.0, 3.0]);
        let model = kmeans_fit(&points, 1, 0).unwrap();
        let dist = cluster_distribution(&model);
        assert_eq!(dist, vec![(0, 3, 1.0)]);
    }

    proptest! {
        /// For a fixed seed on distinct points, permuting the input changes
        /// neither the objective nor the partition.
        #[test]
        fn permutation_invariance(
            values in proptest::collection::btree_set(-1000i64..1000, 5..20),
            seed in 0u64..u64::MAX,
            k in 2usize..4,
        ) {
            let values: Vec<f64> = values.into_iter().map(|v| v as f64 / 7.0).collect();
            prop_assume!(k < values.len());
            let points = pts_1d(&values);
            let mut shuffled_idx: Vec<usize> = (0..points.len()).collect();
            // Deterministic rotation stands in for an arbitrary permutation.
            shuffled_idx.rotate_left(points.len() / 2);
            let shuffled: Vec<Vec<f64>> = shuffled_idx.iter().map(|&i| points[i].clone()).collect();

            let a = kmeans_fit(&points, k, seed).unwrap();
            let b = kmeans_fit(&shuffled, k, seed).unwrap();
            prop_assert!((a.objective - b.objective).abs() <= 1e-9 * (1.0 + a.objective));

            // Compare partitions as sets of point-value groups.
            let group = |model: &ClusterModel, pts: &[Vec<f64>]| {
                let mut clusters: Vec<Vec<u64>> = vec![Vec::new(); k];
                for (p, &c) in pts.iter().zip(&model.assignments) {
                    clusters[c].push(p[0].to_bits());
                }
                let mut clusters: Vec<Vec<u64>> = clusters.into_iter().map(|mut c| { c.sort_unstable(); c }).collect();
                clusters.sort();
                clusters
            };
            prop_assert_eq!(group(&a, &points), group(&b, &shuffled));
        }

        /// Every point ends up with a nearest centroid (up to ties) and all
        /// clusters are nonempty.
        #[test]
        fn fit_postconditions(
            values in proptest::collection::btree_set(-10_000i64..10_000, 4..24),
            seed in 0u64..u64::MAX,
        ) {
            let values: Vec<f64> = values.iter().map(|v| *v as f64 / 13.0).collect();
            let points = pts_1d(&values);
            let k = 3.min(points.len());
            let model = kmeans_fit(&points, k, seed).unwrap();
            let mut counts = vec![0usize; k];
            for &a in &model.assignments {
                counts[a] += 1;
            }
            prop_assert!(counts.iter().all(|&c| c > 0));
            for (p, &a) in points.iter().zip(&model.assignments) {
                let assigned = squared_distance(p, &model.centroids[a]);
                let best = model
                    .centroids
                    .iter()
                    .map(|c| squared_distance(p, c))
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(assigned <= best + 1e-9 * (1.0 + best));
            }
            // Stored objective is exactly the sum of squared distances.
            let recomputed = objective_of(&points, &model.centroids, &model.assignments);
            prop_assert!((model.objective - recomputed).abs() <= 1e-9 * (1.0 + recomputed));
        }
    }
}
