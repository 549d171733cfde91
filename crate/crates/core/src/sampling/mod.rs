//! Light selection: reservoirs, analytic unshadowed weights, neural light
//! sampling, clustered sampling and the screen-space reuse baselines.
//!
//! Every sampler produces a [`Reservoir`] over [`Candidate`]s whose
//! contribution weight `w` turns the single-sample integrand into an
//! unbiased estimate of the direct illumination at a shading point.

pub mod cluster;
pub mod kmeans;
pub mod ltc;
pub mod nls;
pub mod reservoir;
pub mod restir;

pub use cluster::{clustered_pmf, clustered_sample, cnvc_initial_candidates};
pub use kmeans::{kmeans_cluster, ClusterSet};
pub use ltc::{unshadowed_rgb, unshadowed_weight};
pub use nls::{clamp_visibility, neural_di_shade, nls_sample, nls_weights, VISIBILITY_FLOOR};
pub use reservoir::{wrs_select, Reservoir};
pub use restir::{ris_initial_candidates, restir_spatial, restir_temporal, RestirConfig, TemporalClamp};

use crate::math::Vec3;
use crate::rng::Rng;
use crate::scene::{geometry_term, Light, Scene, SurfaceHit};

/// Surface point being shaded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingPoint {
    pub position: Vec3,
    /// Unit normal on the side facing the viewer.
    pub normal: Vec3,
    pub albedo: Vec3,
    /// Unit direction toward the viewer.
    pub wo: Vec3,
}

impl ShadingPoint {
    pub fn new(position: Vec3, normal: Vec3, albedo: Vec3) -> Self {
        ShadingPoint { position, normal: normal.normalize(), albedo, wo: normal.normalize() }
    }

    pub fn from_hit(hit: &SurfaceHit, wo: Vec3) -> Self {
        ShadingPoint { position: hit.position, normal: hit.normal, albedo: hit.albedo, wo }
    }
}

/// A light together with a point on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub light: u32,
    pub point: Vec3,
}

impl Candidate {
    /// Draws a uniform point on `light`.
    pub fn draw(light_id: usize, light: &Light, rng: &mut Rng) -> Self {
        let (u1, u2) = (rng.uniform(), rng.uniform());
        Candidate { light: light_id as u32, point: light.sample(u1, u2).point }
    }
}

/// Unshadowed integrand over the area density, `f_r · L_e · G / pdf_area`.
pub fn candidate_radiance(sp: &ShadingPoint, light: &Light, point: Vec3) -> Vec3 {
    let pdf_area = if light.is_point() { 1.0 } else { 1.0 / light.area };
    let g = geometry_term(sp.position, sp.normal, point, light.normal);
    if g <= 0.0 {
        return Vec3::ZERO;
    }
    (sp.albedo / std::f64::consts::PI).mul_elem(light.radiance) * (g / pdf_area)
}

/// One shadow ray toward the reservoir's sample, weighted by its
/// contribution weight. Empty reservoirs shade black.
pub fn shade_sample(sp: &ShadingPoint, scene: &Scene, r: &Reservoir<Candidate>) -> Vec3 {
    match r.sample {
        Some(c) if r.w > 0.0 => {
            let light = &scene.lights[c.light as usize];
            let f = candidate_radiance(sp, light, c.point);
            if f == Vec3::ZERO || scene.visibility(sp.position, c.point) == 0.0 {
                Vec3::ZERO
            } else {
                f * r.w
            }
        }
        _ => Vec3::ZERO,
    }
}
