//! Lloyd's k-means over light positions.

use crate::math::Vec3;
use crate::rng::Rng;

pub const MAX_ITERATIONS: usize = 100;

/// Partition of the lights into clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub centroids: Vec<Vec3>,
    /// Light ids of each cluster, ascending.
    pub members: Vec<Vec<u32>>,
    /// Cluster index of each light.
    pub assignment: Vec<u32>,
}

impl ClusterSet {
    /// Number of clusters `m`.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sum of squared distances of every point to its centroid.
    pub fn inertia(&self, points: &[Vec3]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| (*p - self.centroids[c as usize]).length_squared())
            .sum()
    }

    /// One cluster per light, in light order.
    pub fn singletons(n: usize, points: &[Vec3]) -> Self {
        ClusterSet {
            centroids: points[..n].to_vec(),
            members: (0..n as u32).map(|i| vec![i]).collect(),
            assignment: (0..n as u32).collect(),
        }
    }
}

/// Clusters `points` into at most `k` groups. When `k` is at least the
/// number of points every point becomes its own cluster and the cluster
/// count drops to the point count.
pub fn kmeans_cluster(points: &[Vec3], k: usize, rng: &mut Rng) -> ClusterSet {
    kmeans_with_history(points, k, rng).0
}

/// [`kmeans_cluster`] that also reports the inertia after every iteration.
pub fn kmeans_with_history(points: &[Vec3], k: usize, rng: &mut Rng) -> (ClusterSet, Vec<f64>) {
    let n = points.len();
    let k = k.max(1);
    if k >= n {
        return (ClusterSet::singletons(n, points), vec![0.0]);
    }
    // distinct random seeds: partial Fisher-Yates over the point indices
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below(n - i);
        order.swap(i, j);
    }
    let mut centroids: Vec<Vec3> = order[..k].iter().map(|&i| points[i]).collect();
    let mut assignment = vec![u32::MAX; n];
    let mut history = Vec::new();

    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (p, a) in points.iter().zip(assignment.iter_mut()) {
            let mut nearest = nearest_centroid(*p, &centroids);
            // ties keep the current cluster so that repaired clusters stay filled
            if *a != u32::MAX && (*p - centroids[*a as usize]).length_squared() <= (*p - centroids[nearest as usize]).length_squared() {
                nearest = *a;
            }
            if *a != nearest {
                *a = nearest;
                changed = true;
            }
        }
        repair_empty(points, &mut centroids, &mut assignment);
        update_centroids(points, &assignment, &mut centroids);
        history.push(inertia(points, &assignment, &centroids));
        if !changed {
            break;
        }
    }

    let mut members = vec![Vec::new(); k];
    for (i, &a) in assignment.iter().enumerate() {
        members[a as usize].push(i as u32);
    }
    (ClusterSet { centroids, members, assignment }, history)
}

fn nearest_centroid(p: Vec3, centroids: &[Vec3]) -> u32 {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = (p - *c).length_squared();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best as u32
}

/// Gives every empty cluster the member of the largest cluster that lies
/// farthest from that cluster's centroid.
fn repair_empty(points: &[Vec3], centroids: &mut [Vec3], assignment: &mut [u32]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a as usize] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).unwrap_or(0);
        let far = (0..points.len())
            .filter(|&i| assignment[i] as usize == largest)
            .max_by(|&a, &b| {
                let da = (points[a] - centroids[largest]).length_squared();
                let db = (points[b] - centroids[largest]).length_squared();
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("largest cluster is non-empty");
        assignment[far] = empty as u32;
        centroids[empty] = points[far];
    }
}

fn update_centroids(points: &[Vec3], assignment: &[u32], centroids: &mut [Vec3]) {
    let k = centroids.len();
    let mut sums = vec![Vec3::ZERO; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        sums[a as usize] += *p;
        counts[a as usize] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            centroids[j] = sums[j] / counts[j] as f64;
        }
    }
}

fn inertia(points: &[Vec3], assignment: &[u32], centroids: &[Vec3]) -> f64 {
    points.iter().zip(assignment).map(|(p, &a)| (*p - centroids[a as usize]).length_squared()).sum()
}
