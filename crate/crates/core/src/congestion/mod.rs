//! Crowd-congestion detection: seeded k-means over ground points followed
//! by a nearest-distance congestion test per cluster.
//!
//! The clustering loop uses strict `<` comparisons, so the lowest-indexed
//! centroid keeps ties; empty clusters retain their previous centroid; the
//! loop runs while any assignment changed, capped at `max_iters`. The
//! congestion test sorts each cluster's member-to-centroid distances,
//! keeps the closest `c_neighbors`, counts those strictly below
//! `safe_dist`, and flags the cluster when that count strictly exceeds
//! `c_neighbors / crowding_factor` (real-valued division).

mod oracle;

pub use oracle::oracle_detect;

use crate::geometry::GroundPoint;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CongestionError {
    #[error("need at least {k} points, got {points}")]
    NotEnoughPoints { points: usize, k: usize },
    #[error("invalid congestion config: {message}")]
    InvalidConfig { message: String },
}

/// Inputs of the congestion detector.
///
/// `safe_dist` defaults to 0.7 m. `c_neighbors` (5) and `crowding_factor`
/// (2) have no published values; the defaults are this crate's choices,
/// with `c_neighbors = 5` echoing the five-people-per-square-meter
/// crowding anchor behind the 0.7 m safety distance.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionConfig {
    pub k: usize,
    pub c_neighbors: usize,
    pub safe_dist: f64,
    pub crowding_factor: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for CongestionConfig {
    fn default() -> Self {
        Self {
            k: 3,
            c_neighbors: 5,
            safe_dist: 0.7,
            crowding_factor: 2.0,
            max_iters: 100,
            seed: 0,
        }
    }
}

impl CongestionConfig {
    pub fn validate(&self) -> Result<(), CongestionError> {
        let mut problems = Vec::new();
        if self.k == 0 {
            problems.push("k must be at least 1");
        }
        if self.c_neighbors == 0 {
            problems.push("c_neighbors must be at least 1");
        }
        if !(self.safe_dist > 0.0) {
            problems.push("safe_dist must be positive");
        }
        if !(self.crowding_factor > 0.0) {
            problems.push("crowding_factor must be positive");
        }
        if self.max_iters == 0 {
            problems.push("max_iters must be at least 1");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CongestionError::InvalidConfig {
                message: problems.join("; "),
            })
        }
    }
}

/// Cluster index and distance to that centroid for one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterAssignment {
    pub cluster_index: usize,
    pub dist_to_centroid: f64,
}

/// Everything one detection run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionReport {
    pub centroids: Vec<GroundPoint>,
    pub assignments: Vec<ClusterAssignment>,
    /// Flagged cluster indices, strictly increasing.
    pub congested_clusters: Vec<usize>,
    pub iterations_used: usize,
}

impl CongestionReport {
    /// Number of members assigned to `cluster`.
    pub fn member_count(&self, cluster: usize) -> usize {
        self.assignments
            .iter()
            .filter(|a| a.cluster_index == cluster)
            .count()
    }
}

/// Euclidean distance between two ground points.
pub fn k_dist(p: &GroundPoint, q: &GroundPoint) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    (dx * dx + dy * dy).sqrt()
}

/// Initial centroids: `k` distinct points sampled uniformly without
/// replacement via the seeded generator, in sampled order.
pub fn init_centroids(
    points: &[GroundPoint],
    k: usize,
    seed: u64,
) -> Result<Vec<GroundPoint>, CongestionError> {
    if points.len() < k {
        return Err(CongestionError::NotEnoughPoints {
            points: points.len(),
            k,
        });
    }
    let mut rng = SplitMix64::new(seed);
    Ok(rng
        .sample_distinct(points.len(), k)
        .into_iter()
        .map(|i| points[i])
        .collect())
}

/// Result of the clustering stage.
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub centroids: Vec<GroundPoint>,
    pub assignments: Vec<ClusterAssignment>,
    pub iterations_used: usize,
    /// Sum of squared member-to-centroid distances after each pass; the
    /// quantity Lloyd's update provably never increases.
    pub objective_trace: Vec<f64>,
}

/// Lloyd iteration: assign every point to its nearest centroid (strict
/// `<`, so the lowest index keeps ties), recompute centroids as member
/// means, and repeat while any assignment changed, up to `max_iters`.
pub fn cluster_crowd(
    points: &[GroundPoint],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterOutcome, CongestionError> {
    let mut centroids = init_centroids(points, k, seed)?;
    let mut assignments = vec![
        ClusterAssignment {
            cluster_index: 0,
            dist_to_centroid: 0.0,
        };
        points.len()
    ];
    let mut iterations_used = 0;
    let mut objective_trace = Vec::new();

    for _ in 0..max_iters {
        iterations_used += 1;
        let mut changed = false;
        let mut objective = 0.0;
        for (i, point) in points.iter().enumerate() {
            let mut best_dist = f64::INFINITY;
            let mut best_cluster = 0;
            for (j, centroid) in centroids.iter().enumerate() {
                let d = k_dist(centroid, point);
                if best_dist > d {
                    best_dist = d;
                    best_cluster = j;
                }
            }
            if assignments[i].cluster_index != best_cluster {
                changed = true;
            }
            assignments[i] = ClusterAssignment {
                cluster_index: best_cluster,
                dist_to_centroid: best_dist,
            };
            objective += best_dist * best_dist;
        }
        objective_trace.push(objective);

        for (c, centroid) in centroids.iter_mut().enumerate() {
            let mut sum_x = 0.0;
            let mut sum_y = 0.0;
            let mut count = 0usize;
            for (point, assignment) in points.iter().zip(&assignments) {
                if assignment.cluster_index == c {
                    sum_x += point.x;
                    sum_y += point.y;
                    count += 1;
                }
            }
            if count > 0 {
                *centroid = GroundPoint {
                    x: sum_x / count as f64,
                    y: sum_y / count as f64,
                };
            }
        }

        if !changed {
            break;
        }
    }

    Ok(ClusterOutcome {
        centroids,
        assignments,
        iterations_used,
        objective_trace,
    })
}

/// Congestion test described in the module docs; returns the flagged
/// cluster indices in increasing order.
pub fn flag_congestion(
    centroids: &[GroundPoint],
    assignments: &[ClusterAssignment],
    points: &[GroundPoint],
    cfg: &CongestionConfig,
) -> Vec<usize> {
    let mut congested = Vec::new();
    for (c, centroid) in centroids.iter().enumerate() {
        let mut member_distances: Vec<f64> = points
            .iter()
            .zip(assignments)
            .filter(|(_, a)| a.cluster_index == c)
            .map(|(p, _)| k_dist(centroid, p))
            .collect();
        member_distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
        member_distances.truncate(cfg.c_neighbors);
        let count_less_than = member_distances
            .iter()
            .filter(|&&d| d < cfg.safe_dist)
            .count();
        if count_less_than as f64 > cfg.c_neighbors as f64 / cfg.crowding_factor {
            congested.push(c);
        }
    }
    congested
}

/// Full detection: cluster, then flag. Deterministic given `cfg.seed`.
pub fn detect(
    points: &[GroundPoint],
    cfg: &CongestionConfig,
) -> Result<CongestionReport, CongestionError> {
    cfg.validate()?;
    let outcome = cluster_crowd(points, cfg.k, cfg.seed, cfg.max_iters)?;
    let congested = flag_congestion(&outcome.centroids, &outcome.assignments, points, cfg);
    Ok(CongestionReport {
        centroids: outcome.centroids,
        assignments: outcome.assignments,
        congested_clusters: congested,
        iterations_used: outcome.iterations_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp(x: f64, y: f64) -> GroundPoint {
        GroundPoint { x, y }
    }

    #[test]
    fn distance_is_the_three_four_five_triangle() {
        assert_eq!(k_dist(&gp(0.0, 0.0), &gp(3.0, 4.0)), 5.0);
    }

    #[test]
    fn distance_to_self_is_zero() {
        let p = gp(1.25, -9.0);
        assert_eq!(k_dist(&p, &p), 0.0);
    }

    #[test]
    fn random_distance_matches_scalar_recomputation() {
        let mut rng = SplitMix64::new(4);
        for _ in 0..50 {
            let p = gp(10.0 * rng.next_symmetric(), 10.0 * rng.next_symmetric());
            let q = gp(10.0 * rng.next_symmetric(), 10.0 * rng.next_symmetric());
            let expected = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
            assert!((k_dist(&p, &q) - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampling_all_points_permutes_them() {
        let points: Vec<GroundPoint> = (0..6).map(|i| gp(i as f64, 0.0)).collect();
        let init = init_centroids(&points, 6, 99).unwrap();
        let mut xs: Vec<f64> = init.iter().map(|p| p.x).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let points: Vec<GroundPoint> = (0..10).map(|i| gp(i as f64, 1.0)).collect();
        assert_eq!(
            init_centroids(&points, 3, 7).unwrap(),
            init_centroids(&points, 3, 7).unwrap()
        );
    }

    #[test]
    fn init_indices_match_an_independent_generator_trace() {
        // Independently re-coded SplitMix64 + partial Fisher-Yates for
        // seed 1, n = 10, k = 3.
        fn mix(state: &mut u64) -> u64 {
            *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = *state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        }
        let mut state = 1u64;
        let mut pool: Vec<usize> = (0..10).collect();
        for i in 0..3 {
            let j = i + (mix(&mut state) % (10 - i) as u64) as usize;
            pool.swap(i, j);
        }
        let expected: Vec<GroundPoint> =
            pool[..3].iter().map(|&i| gp(i as f64, 0.0)).collect();

        let points: Vec<GroundPoint> = (0..10).map(|i| gp(i as f64, 0.0)).collect();
        assert_eq!(init_centroids(&points, 3, 1).unwrap(), expected);
    }

    #[test]
    fn too_few_points_is_an_input_error() {
        let points = vec![gp(0.0, 0.0)];
        assert!(matches!(
            init_centroids(&points, 2, 0),
            Err(CongestionError::NotEnoughPoints { .. })
        ));
    }

    #[test]
    fn n_equals_k_assigns_each_point_to_itself() {
        let points = vec![gp(0.0, 0.0), gp(5.0, 0.0), gp(0.0, 5.0)];
        let outcome = cluster_crowd(&points, 3, 13, 100).unwrap();
        // Each point sits on its own centroid.
        for a in &outcome.assignments {
            assert_eq!(a.dist_to_centroid, 0.0);
        }
        let mut seen: Vec<usize> = outcome
            .assignments
            .iter()
            .map(|a| a.cluster_index)
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn two_separated_pairs_center_on_their_midpoints() {
        let points = vec![gp(0.0, 0.0), gp(0.0, 1.0), gp(10.0, 0.0), gp(10.0, 1.0)];
        let outcome = cluster_crowd(&points, 2, 5, 100).unwrap();
        let mut centroids = outcome.centroids.clone();
        centroids.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        assert!((centroids[0].x - 0.0).abs() < 1e-12 && (centroids[0].y - 0.5).abs() < 1e-12);
        assert!((centroids[1].x - 10.0).abs() < 1e-12 && (centroids[1].y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn members_beyond_safe_distance_never_flag() {
        let centroids = vec![gp(0.0, 0.0)];
        let points = vec![gp(5.0, 0.0), gp(0.0, 5.0), gp(-5.0, 0.0)];
        let assignments = vec![
            ClusterAssignment {
                cluster_index: 0,
                dist_to_centroid: 5.0
            };
            3
        ];
        let cfg = CongestionConfig::default();
        assert!(flag_congestion(&centroids, &assignments, &points, &cfg).is_empty());
    }

    #[test]
    fn four_of_five_close_members_flag_at_default_factor() {
        // count = 4 > 5 / 2 = 2.5.
        let centroids = vec![gp(0.0, 0.0)];
        let mut points = vec![
            gp(0.1, 0.0),
            gp(0.0, 0.2),
            gp(-0.3, 0.0),
            gp(0.0, -0.4),
            gp(3.0, 0.0),
        ];
        points.push(gp(4.0, 0.0));
        let assignments: Vec<ClusterAssignment> = points
            .iter()
            .map(|p| ClusterAssignment {
                cluster_index: 0,
                dist_to_centroid: k_dist(&gp(0.0, 0.0), p),
            })
            .collect();
        let cfg = CongestionConfig::default();
        assert_eq!(
            flag_congestion(&centroids, &assignments, &points, &cfg),
            vec![0]
        );
    }

    #[test]
    fn singleton_cluster_does_not_flag_itself() {
        // A singleton sits on its own centroid: count = 1, and 1 > 2.5 is
        // false at the defaults.
        let centroids = vec![gp(2.0, 2.0)];
        let points = vec![gp(2.0, 2.0)];
        let assignments = vec![ClusterAssignment {
            cluster_index: 0,
            dist_to_centroid: 0.0,
        }];
        let cfg = CongestionConfig::default();
        assert!(flag_congestion(&centroids, &assignments, &points, &cfg).is_empty());
    }

    #[test]
    fn well_spaced_triads_raise_no_flags() {
        // Three clusters of three points spaced 5 m within-cluster: every
        // member ends far beyond safe_dist from its centroid.
        let mut points = Vec::new();
        for cx in [0.0, 100.0, 200.0] {
            points.push(gp(cx - 5.0, 0.0));
            points.push(gp(cx + 5.0, 0.0));
            points.push(gp(cx, 5.0));
        }
        let cfg = CongestionConfig {
            k: 3,
            seed: 2,
            ..CongestionConfig::default()
        };
        let report = detect(&points, &cfg).unwrap();
        assert!(report.congested_clusters.is_empty());
    }

    #[test]
    fn squared_distance_objective_never_increases() {
        let mut rng = SplitMix64::new(31);
        for trial in 0..30 {
            let n = 10 + rng.next_index(120);
            let k = 1 + rng.next_index(5);
            let points: Vec<GroundPoint> = (0..n)
                .map(|_| gp(20.0 * rng.next_f64(), 20.0 * rng.next_f64()))
                .collect();
            let outcome = cluster_crowd(&points, k, trial as u64, 100).unwrap();
            for pair in outcome.objective_trace.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-9,
                    "objective rose from {} to {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }
}
