//! Screen-space spatiotemporal reservoir reuse.
//!
//! Initial candidates come from resampling a handful of uniformly chosen
//! lights (or from any other sampler that fills a [`Reservoir`]); they are
//! then merged with the pixel's previous-frame reservoir and with a few
//! random neighbours on similar geometry. Reuse is the classic biased
//! variant: no visibility reuse and no cross-pixel MIS weights.

use serde::{Deserialize, Serialize};

use super::{unshadowed_weight, Candidate, Reservoir, ShadingPoint};
use crate::render::GBuffer;
use crate::rng::Rng;
use crate::scene::Scene;

/// How the previous frame's reservoir is limited during temporal reuse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalClamp {
    /// Cap the previous stream count at `factor × current.m`.
    Count,
    /// Cap the previous resampling weight at `factor × current.w_sum`.
    Contribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestirConfig {
    pub candidates: u32,
    pub temporal_factor: f64,
    pub temporal_clamp: TemporalClamp,
    pub radius: u32,
    pub neighbors: u32,
    /// Minimum dot product between neighbour and pixel normals.
    pub normal_threshold: f64,
    /// Allowed relative depth difference of a neighbour.
    pub depth_tolerance: f64,
    /// Run the spatial pass before the temporal merge.
    pub spatial_first: bool,
}

impl Default for RestirConfig {
    fn default() -> Self {
        RestirConfig {
            candidates: 8,
            temporal_factor: 20.0,
            temporal_clamp: TemporalClamp::Count,
            radius: 32,
            neighbors: 4,
            normal_threshold: 0.9,
            depth_tolerance: 0.1,
            spatial_first: false,
        }
    }
}

/// Streaming resampling of `m` candidates, each a uniformly chosen light
/// and a uniform point on it, against the unshadowed light weight.
pub fn ris_initial_candidates(sp: &ShadingPoint, scene: &Scene, m: u32, rng: &mut Rng) -> Reservoir<Candidate> {
    let n = scene.lights.len();
    let mut r = Reservoir::empty();
    for _ in 0..m {
        let id = rng.below(n);
        let c = Candidate::draw(id, &scene.lights[id], rng);
        let target = unshadowed_weight(sp, &scene.lights[id]);
        r.update(c, target * n as f64, target, rng.uniform());
    }
    r.finalize();
    r
}

fn target_at(sp: &ShadingPoint, scene: &Scene, r: &Reservoir<Candidate>) -> f64 {
    r.sample.map_or(0.0, |c| unshadowed_weight(sp, &scene.lights[c.light as usize]))
}

/// Merges the pixel's previous reservoir into the current one. A missing
/// previous reservoir (first frame, invalidated history) returns `current`.
pub fn restir_temporal(
    current: &Reservoir<Candidate>,
    previous: Option<&Reservoir<Candidate>>,
    sp: &ShadingPoint,
    scene: &Scene,
    cfg: &RestirConfig,
    rng: &mut Rng,
) -> Reservoir<Candidate> {
    let Some(prev) = previous.filter(|p| p.m > 0) else {
        return *current;
    };
    let prev_target = target_at(sp, scene, prev);
    let cap = (cfg.temporal_factor * current.m.max(1) as f64).floor().max(1.0) as u32;
    let prev_m = match cfg.temporal_clamp {
        TemporalClamp::Count => prev.m.min(cap),
        TemporalClamp::Contribution => {
            let unit = prev_target * prev.w;
            let limit = cfg.temporal_factor * current.w_sum;
            if unit > 0.0 && unit * prev.m as f64 > limit {
                ((limit / unit).floor() as u32).clamp(1, prev.m)
            } else {
                prev.m
            }
        }
    };
    let mut r = Reservoir::empty();
    r.merge(current, current.target, current.m, rng.uniform());
    r.merge(prev, prev_target, prev_m, rng.uniform());
    r.finalize();
    r
}

/// Merges up to `cfg.neighbors` random reservoirs within `cfg.radius`
/// pixels whose geometry resembles the pixel's. Returns the pixel's own
/// reservoir unchanged when every neighbour is rejected.
pub fn restir_spatial(
    pixel: usize,
    reservoirs: &[Reservoir<Candidate>],
    gbuffer: &GBuffer,
    scene: &Scene,
    cfg: &RestirConfig,
    rng: &mut Rng,
) -> Reservoir<Candidate> {
    let own = &reservoirs[pixel];
    let Some(sp) = gbuffer.points[pixel] else {
        return *own;
    };
    let depth = gbuffer.depth[pixel];
    let (w, h) = (gbuffer.width as i64, gbuffer.height as i64);
    let (px, py) = ((pixel as i64) % w, (pixel as i64) / w);
    let radius = cfg.radius as f64;

    let mut r = Reservoir::empty();
    r.merge(own, own.target, own.m, rng.uniform());
    let mut accepted = 0;
    for _ in 0..cfg.neighbors {
        // uniform offset in the disk of the given radius
        let rad = radius * rng.uniform().sqrt();
        let phi = 2.0 * std::f64::consts::PI * rng.uniform();
        let qx = px + (rad * phi.cos()).round() as i64;
        let qy = py + (rad * phi.sin()).round() as i64;
        let u = rng.uniform();
        if qx < 0 || qy < 0 || qx >= w || qy >= h || (qx == px && qy == py) {
            continue;
        }
        let q = (qy * w + qx) as usize;
        let Some(nsp) = gbuffer.points[q] else { continue };
        if nsp.normal.dot(sp.normal) < cfg.normal_threshold {
            continue;
        }
        let ratio = gbuffer.depth[q] / depth;
        if !(ratio >= 1.0 - cfg.depth_tolerance && ratio <= 1.0 + cfg.depth_tolerance) {
            continue;
        }
        let nb = &reservoirs[q];
        r.merge(nb, target_at(&sp, scene, nb), nb.m, u);
        accepted += 1;
    }
    if accepted == 0 {
        return *own;
    }
    r.finalize();
    r
}
