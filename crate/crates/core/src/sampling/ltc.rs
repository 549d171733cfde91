//! Analytic unshadowed light contribution at a diffuse shading point.
//!
//! For a Lambertian BRDF the linearly transformed cosine collapses to the
//! clamped cosine itself, whose integral over a polygon has the closed
//! edge-sum form `½ Σ θ_e (n · ê_e)`. The polygon is clipped to the upper
//! hemisphere first so that lights straddling the horizon are handled.

use std::f64::consts::PI;

use super::ShadingPoint;
use crate::math::Vec3;
use crate::scene::{Light, LightShape};

/// Reflected radiance the light would contribute without any occluder.
pub fn unshadowed_rgb(sp: &ShadingPoint, light: &Light) -> Vec3 {
    let brdf = sp.albedo / PI;
    match light.shape {
        LightShape::Point { position } => {
            let d = position - sp.position;
            let dist2 = d.length_squared();
            if dist2 == 0.0 {
                return Vec3::ZERO;
            }
            let cos = sp.normal.dot(d) / dist2.sqrt();
            if cos <= 0.0 {
                return Vec3::ZERO;
            }
            brdf.mul_elem(light.radiance) * (cos / dist2)
        }
        LightShape::Rect { corner, .. } => {
            // one-sided emitter: nothing reaches points behind it
            if (sp.position - corner).dot(light.normal) <= 0.0 {
                return Vec3::ZERO;
            }
            let integral = polygon_cosine_integral(sp.position, sp.normal, &light.vertices());
            brdf.mul_elem(light.radiance) * integral
        }
    }
}

/// Luminance of [`unshadowed_rgb`], the scalar weight used for resampling.
pub fn unshadowed_weight(sp: &ShadingPoint, light: &Light) -> f64 {
    unshadowed_rgb(sp, light).luminance()
}

/// `∫ max(0, n·ω) dω` over the solid angle subtended by a planar convex
/// polygon seen from `x`.
pub fn polygon_cosine_integral(x: Vec3, n: Vec3, vertices: &[Vec3]) -> f64 {
    let mut local = [Vec3::ZERO; 8];
    let count = clip_to_hemisphere(x, n, vertices, &mut local);
    if count < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..count {
        let a = local[i].normalize();
        let b = local[(i + 1) % count].normalize();
        let c = a.cross(b);
        let s = c.length();
        if s > 0.0 {
            sum += s.atan2(a.dot(b)) / s * n.dot(c);
        }
    }
    0.5 * sum.abs()
}

/// Sutherland-Hodgman clip of the polygon (relative to `x`) against the
/// plane `n · p ≥ 0`; returns the number of vertices written to `out`.
fn clip_to_hemisphere(x: Vec3, n: Vec3, vertices: &[Vec3], out: &mut [Vec3; 8]) -> usize {
    let mut count = 0;
    let len = vertices.len();
    for i in 0..len {
        let p = vertices[i] - x;
        let q = vertices[(i + 1) % len] - x;
        let (hp, hq) = (n.dot(p), n.dot(q));
        if hp >= 0.0 {
            out[count] = p;
            count += 1;
        }
        if (hp >= 0.0) != (hq >= 0.0) {
            let t = hp / (hp - hq);
            out[count] = p + (q - p) * t;
            count += 1;
        }
    }
    count
}
