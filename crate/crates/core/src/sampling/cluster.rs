//! Two-step light selection through light clusters.
//!
//! A cluster is picked by weighted reservoir sampling over the predicted
//! average cluster visibilities, then one member light is resampled by its
//! unshadowed contribution. Each member is a candidate drawn with source
//! probability `P(cluster) / m_y`, so the final contribution weight is the
//! inverse of the exact two-step selection probability.

use super::{unshadowed_weight, Candidate, ClusterSet, Reservoir, ShadingPoint};
use crate::rng::Rng;
use crate::scene::Scene;

fn cluster_weight(v: f32, floor: Option<f64>) -> f64 {
    match floor {
        Some(f) => (v as f64).max(f),
        None => (v as f64).max(0.0),
    }
}

/// Picks a light and a point on it; the returned reservoir holds a single
/// candidate with `w = 1 / P(light)` and `m = 1`, ready for spatiotemporal
/// reuse. An empty reservoir means no contribution.
pub fn clustered_sample(
    sp: &ShadingPoint,
    scene: &Scene,
    clusters: &ClusterSet,
    cluster_vis: &[f32],
    floor: Option<f64>,
    rng: &mut Rng,
) -> Reservoir<Candidate> {
    debug_assert_eq!(cluster_vis.len(), clusters.len());
    let m = clusters.len() as f64;
    let mut first = Reservoir::<usize>::empty();
    for (j, &v) in cluster_vis.iter().enumerate() {
        let w = cluster_weight(v, floor);
        first.update(j, w * m, w, rng.uniform());
    }
    first.finalize();
    let Some(y) = first.sample else {
        return Reservoir { m: 1, ..Reservoir::empty() };
    };
    let p_cluster = 1.0 / first.w;

    let members = &clusters.members[y];
    let source = p_cluster / members.len() as f64;
    let mut second = Reservoir::<u32>::empty();
    for &id in members {
        let target = unshadowed_weight(sp, &scene.lights[id as usize]);
        second.update(id, target / source, target, rng.uniform());
    }
    second.finalize();
    let Some(id) = second.sample else {
        return Reservoir { m: 1, ..Reservoir::empty() };
    };
    let c = Candidate::draw(id as usize, &scene.lights[id as usize], rng);
    Reservoir::single(c, second.target, 1.0 / second.w)
}

/// Initial candidates for spatiotemporal reuse: the clustered sample
/// itself. Visibility is already part of the selection, so no validation
/// shadow ray is cast.
pub fn cnvc_initial_candidates(
    sp: &ShadingPoint,
    scene: &Scene,
    clusters: &ClusterSet,
    cluster_vis: &[f32],
    floor: Option<f64>,
    rng: &mut Rng,
) -> Reservoir<Candidate> {
    clustered_sample(sp, scene, clusters, cluster_vis, floor, rng)
}

/// Exact probability of [`clustered_sample`] selecting each light.
pub fn clustered_pmf(
    sp: &ShadingPoint,
    scene: &Scene,
    clusters: &ClusterSet,
    cluster_vis: &[f32],
    floor: Option<f64>,
) -> Vec<f64> {
    let weights: Vec<f64> = cluster_vis.iter().map(|&v| cluster_weight(v, floor)).collect();
    let total: f64 = weights.iter().sum();
    let mut pmf = vec![0.0; scene.lights.len()];
    if !(total > 0.0) {
        return pmf;
    }
    for (members, w) in clusters.members.iter().zip(&weights) {
        let targets: Vec<f64> = members.iter().map(|&id| unshadowed_weight(sp, &scene.lights[id as usize])).collect();
        let sum: f64 = targets.iter().sum();
        if sum > 0.0 {
            for (&id, t) in members.iter().zip(&targets) {
                pmf[id as usize] = w / total * t / sum;
            }
        }
    }
    pmf
}
