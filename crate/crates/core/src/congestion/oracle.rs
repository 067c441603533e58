//! Independent reference implementation of the congestion detector.
//!
//! A deliberately naive, allocation-heavy transliteration of the same
//! procedure, kept as a separate code path for cross-checking: it shares
//! only [`k_dist`] with the production implementation and re-derives its
//! own seeded initialization, so any drift between the two shows up as a
//! field-for-field mismatch in tests.

use super::{k_dist, CongestionConfig, CongestionError, CongestionReport, ClusterAssignment};
use crate::geometry::GroundPoint;

/// Same generator contract as `rng::SplitMix64`, re-coded locally so the
/// oracle does not lean on the production implementation.
fn mix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn point_cent(points: &[GroundPoint], k: usize, seed: u64) -> Vec<GroundPoint> {
    let mut state = seed;
    let n = points.len();
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + (mix64(&mut state) % (n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool[..k].iter().map(|&i| points[i]).collect()
}

/// Reference detection run; must agree with `detect` exactly, field for
/// field, given the same inputs and seed.
pub fn oracle_detect(
    points: &[GroundPoint],
    cfg: &CongestionConfig,
) -> Result<CongestionReport, CongestionError> {
    cfg.validate()?;
    let m = points.len();
    if m < cfg.k {
        return Err(CongestionError::NotEnoughPoints {
            points: m,
            k: cfg.k,
        });
    }

    let mut gather_point = point_cent(points, cfg.k, cfg.seed);
    // (class, distance) per point, starting as zeros.
    let mut group_assment: Vec<(usize, f64)> = vec![(0, 0.0); m];
    let mut group_change = true;
    let mut iterations_used = 0;

    while group_change && iterations_used < cfg.max_iters {
        iterations_used += 1;
        group_change = false;
        for i in 0..m {
            let mut min_k_dist = f64::INFINITY;
            let mut min_class = usize::MAX;
            for (j, center) in gather_point.iter().enumerate() {
                let k_dist_ji = k_dist(center, &points[i]);
                if min_k_dist > k_dist_ji {
                    min_k_dist = k_dist_ji;
                    min_class = j;
                }
            }
            if group_assment[i].0 != min_class {
                group_change = true;
            }
            group_assment[i] = (min_class, min_k_dist);
        }

        for center_i in 0..cfg.k {
            let group: Vec<GroundPoint> = (0..m)
                .filter(|&i| group_assment[i].0 == center_i)
                .map(|i| points[i])
                .collect();
            if !group.is_empty() {
                let sx: f64 = group.iter().map(|p| p.x).sum();
                let sy: f64 = group.iter().map(|p| p.y).sum();
                gather_point[center_i] = GroundPoint {
                    x: sx / group.len() as f64,
                    y: sy / group.len() as f64,
                };
            }
        }
    }

    let mut congestion_degree: Vec<usize> = Vec::new();
    for cent_i in 0..cfg.k {
        let mut crowding_distances: Vec<f64> = Vec::new();
        for i in 0..m {
            if group_assment[i].0 == cent_i {
                crowding_distances.push(k_dist(&gather_point[cent_i], &points[i]));
            }
        }
        crowding_distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let c_crowding_distances: Vec<f64> = crowding_distances
            .into_iter()
            .take(cfg.c_neighbors)
            .collect();
        let count_less_than = c_crowding_distances
            .iter()
            .filter(|&&d| d < cfg.safe_dist)
            .count();
        if count_less_than as f64 > cfg.c_neighbors as f64 / cfg.crowding_factor {
            congestion_degree.push(cent_i);
        }
    }

    Ok(CongestionReport {
        centroids: gather_point,
        assignments: group_assment
            .into_iter()
            .map(|(cluster_index, dist_to_centroid)| ClusterAssignment {
                cluster_index,
                dist_to_centroid,
            })
            .collect(),
        congested_clusters: congestion_degree,
        iterations_used,
    })
}
