//! Per-frame training data generation and the fused training step.
//!
//! Training positions are drawn uniformly inside the scene bounds (world
//! space) and on surfaces seen by the camera (screen space). Each position
//! gets one binary shadow-ray outcome per network output: toward a random
//! point on each light, or on a random member of each light cluster. The
//! network thereby regresses the mean visibility over the emitter area.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::NeuralCache;
use crate::geometry::Ray;
use crate::math::{Aabb, Vec3};
use crate::rng::{Purpose, Rng};
use crate::sampling::{candidate_radiance, Candidate, ClusterSet, ShadingPoint};
use crate::scene::{Camera, Scene, SurfaceHit};

/// Chunk size for parallel example generation. Fixed so that results do
/// not depend on the worker count.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub world_samples: usize,
    pub screen_samples: usize,
    pub steps_per_frame: u32,
    /// Replace the world-space half with points on scene surfaces.
    pub surface_samples: bool,
    /// Extra primary rays tried for a screen sample before it is dropped.
    pub retry_cap: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { world_samples: 4096, screen_samples: 4096, steps_per_frame: 1, surface_samples: false, retry_cap: 8 }
    }
}

impl TrainConfig {
    /// Larger batch used when outputs are light clusters.
    pub fn clustered() -> Self {
        TrainConfig { world_samples: 24_576, screen_samples: 24_576, ..TrainConfig::default() }
    }

    pub fn batch_size(&self) -> usize {
        self.world_samples + self.screen_samples
    }
}

/// What the network outputs are trained to predict.
#[derive(Debug, Clone, Copy)]
pub enum TargetKind<'a> {
    /// One visibility per light.
    Lights,
    /// One average visibility per light cluster.
    Clusters(&'a ClusterSet),
    /// Shadowed RGB radiance at surface points.
    Radiance,
}

impl TargetKind<'_> {
    pub fn outputs(&self, scene: &Scene) -> usize {
        match self {
            TargetKind::Lights => scene.lights.len(),
            TargetKind::Clusters(c) => c.len(),
            TargetKind::Radiance => 3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainingBatch {
    pub positions: Vec<Vec3>,
    /// Row-major, `positions.len() × outputs`.
    pub targets: Vec<f32>,
    pub n_world: usize,
    pub n_screen: usize,
}

/// Uniform points inside `bounds`.
pub fn gen_world_samples(bounds: &Aabb, n: usize, rng: &mut Rng) -> Vec<Vec3> {
    let e = bounds.extent();
    (0..n)
        .map(|_| {
            let p = bounds.min + Vec3::new(rng.uniform() * e.x, rng.uniform() * e.y, rng.uniform() * e.z);
            bounds.clamp(p)
        })
        .collect()
}

/// Hits of primary rays through uniformly random sub-pixel positions.
/// A ray that misses is redrawn up to `retry_cap` times; after that the
/// sample is dropped, so the result may hold fewer than `n` entries.
pub fn gen_screen_samples(scene: &Scene, camera: &Camera, n: usize, retry_cap: u32, rng: &mut Rng) -> Vec<(Ray, SurfaceHit)> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..=retry_cap {
            let px = rng.below(camera.width as usize) as u32;
            let py = rng.below(camera.height as usize) as u32;
            let ray = camera.primary_ray(px, py, rng.uniform(), rng.uniform());
            if let Some(hit) = scene.intersect(&ray) {
                out.push((ray, hit));
                break;
            }
        }
    }
    out
}

/// Area-uniform points on non-emitting scene triangles.
pub fn gen_surface_samples(scene: &Scene, n: usize, rng: &mut Rng) -> Vec<Vec3> {
    let tris: Vec<_> = scene.triangles.iter().filter(|t| matches!(t.surface, crate::geometry::Surface::Material(_))).collect();
    let mut cdf = Vec::with_capacity(tris.len());
    let mut acc = 0.0;
    for t in &tris {
        acc += t.area();
        cdf.push(acc);
    }
    if tris.is_empty() || !(acc > 0.0) {
        return Vec::new();
    }
    (0..n)
        .map(|_| {
            let u = rng.uniform() * acc;
            let i = cdf.partition_point(|&c| c <= u).min(tris.len() - 1);
            crate::geometry::sample_triangle_uniform(tris[i], rng.uniform(), rng.uniform()).0
        })
        .collect()
}

/// One binary shadow-ray outcome per output for every position.
pub fn compute_visibility_targets(positions: &[Vec3], scene: &Scene, kind: TargetKind<'_>, seed: u64, frame: u64) -> Vec<f32> {
    let k = kind.outputs(scene);
    let mut targets = vec![0.0f32; positions.len() * k];
    targets.par_chunks_mut(CHUNK * k).zip(positions.par_chunks(CHUNK)).enumerate().for_each(|(c, (out, pos))| {
        for (j, (&p, row)) in pos.iter().zip(out.chunks_mut(k)).enumerate() {
            let mut rng = Rng::stream(seed, (c * CHUNK + j) as u64, frame, Purpose::ShadowTargets);
            fill_visibility_row(p, scene, kind, &mut rng, row);
        }
    });
    targets
}

fn fill_visibility_row(p: Vec3, scene: &Scene, kind: TargetKind<'_>, rng: &mut Rng, row: &mut [f32]) {
    match kind {
        TargetKind::Lights => {
            for (i, t) in row.iter_mut().enumerate() {
                let c = Candidate::draw(i, &scene.lights[i], rng);
                *t = scene.visibility(p, c.point) as f32;
            }
        }
        TargetKind::Clusters(clusters) => {
            for (members, t) in clusters.members.iter().zip(row.iter_mut()) {
                let id = members[rng.below(members.len())] as usize;
                let c = Candidate::draw(id, &scene.lights[id], rng);
                *t = scene.visibility(p, c.point) as f32;
            }
        }
        TargetKind::Radiance => unreachable!("radiance targets need shading points"),
    }
}

/// One-sample-per-light estimate of the shadowed direct illumination at
/// each shading point, as RGB rows.
pub fn radiance_targets(points: &[ShadingPoint], scene: &Scene, seed: u64, frame: u64) -> Vec<f32> {
    let mut targets = vec![0.0f32; points.len() * 3];
    targets.par_chunks_mut(CHUNK * 3).zip(points.par_chunks(CHUNK)).enumerate().for_each(|(c, (out, pts))| {
        for (j, (sp, row)) in pts.iter().zip(out.chunks_mut(3)).enumerate() {
            let mut rng = Rng::stream(seed, (c * CHUNK + j) as u64, frame, Purpose::ShadowTargets);
            let mut sum = Vec3::ZERO;
            for (i, light) in scene.lights.iter().enumerate() {
                let cand = Candidate::draw(i, light, &mut rng);
                let f = candidate_radiance(sp, light, cand.point);
                if f != Vec3::ZERO && scene.visibility(sp.position, cand.point) > 0.0 {
                    sum += f;
                }
            }
            row.copy_from_slice(&[sum.x as f32, sum.y as f32, sum.z as f32]);
        }
    });
    targets
}

fn screen_hits(scene: &Scene, n: usize, retry_cap: u32, seed: u64, frame: u64, offset: u64) -> Vec<(Ray, SurfaceHit)> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            let mut rng = Rng::stream(seed, offset + c as u64, frame, Purpose::ScreenSamples);
            gen_screen_samples(scene, &scene.camera, len, retry_cap, &mut rng)
        })
        .flatten()
        .collect()
}

/// Builds one training batch for `frame`.
pub fn build_batch(scene: &Scene, cfg: &TrainConfig, kind: TargetKind<'_>, seed: u64, frame: u64) -> TrainingBatch {
    if let TargetKind::Radiance = kind {
        // radiance only exists on surfaces, so both halves come from the screen
        let hits = screen_hits(scene, cfg.batch_size(), cfg.retry_cap, seed, frame, 0);
        let points: Vec<ShadingPoint> = hits.iter().map(|(r, h)| ShadingPoint::from_hit(h, -r.dir)).collect();
        let targets = radiance_targets(&points, scene, seed, frame);
        return TrainingBatch {
            positions: points.iter().map(|p| p.position).collect(),
            targets,
            n_world: 0,
            n_screen: points.len(),
        };
    }
    let mut world_rng = Rng::stream(seed, 0, frame, Purpose::WorldSamples);
    let mut positions = if cfg.surface_samples {
        gen_surface_samples(scene, cfg.world_samples, &mut world_rng)
    } else {
        gen_world_samples(&scene.bounds, cfg.world_samples, &mut world_rng)
    };
    let n_world = positions.len();
    positions.extend(screen_hits(scene, cfg.screen_samples, cfg.retry_cap, seed, frame, 1 << 32).iter().map(|(_, h)| h.position));
    let n_screen = positions.len() - n_world;
    let targets = compute_visibility_targets(&positions, scene, kind, seed, frame);
    TrainingBatch { positions, targets, n_world, n_screen }
}

/// Generates fresh data and takes `steps_per_frame` optimizer steps;
/// returns the loss of the last batch.
pub fn train_frame(scene: &Scene, cache: &mut NeuralCache<f32>, cfg: &TrainConfig, kind: TargetKind<'_>, seed: u64, frame: u64) -> f64 {
    let mut loss = 0.0;
    for step in 0..cfg.steps_per_frame.max(1) as u64 {
        let key = frame.wrapping_mul(1 << 20).wrapping_add(step);
        let batch = build_batch(scene, cfg, kind, seed, key);
        if batch.positions.is_empty() {
            continue;
        }
        loss = cache.train_step(&batch.positions, &batch.targets);
    }
    loss
}
