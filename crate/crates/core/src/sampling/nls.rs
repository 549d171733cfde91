//! Neural light sampling and neural direct illumination.
//!
//! Both consume the per-light visibilities inferred at a shading point and
//! the per-light unshadowed contributions there. Sampling multiplies the two
//! into resampling weights; neural DI sums the products directly.

use super::{Candidate, Reservoir, ShadingPoint};
use crate::math::Vec3;
use crate::rng::Rng;
use crate::scene::Scene;

/// Smallest visibility used for weighting, which keeps every light with a
/// nonzero contribution selectable.
pub const VISIBILITY_FLOOR: f64 = 0.001;

pub fn clamp_visibility(v: f64) -> f64 {
    v.max(VISIBILITY_FLOOR)
}

/// Resampling weights `max(v, floor) · luminance(unshadowed)`. With no
/// floor, negative predictions are still cut to zero so that weights stay
/// valid, but a light predicted fully occluded can never be picked.
pub fn nls_weights(vis: &[f32], unshadowed: &[Vec3], floor: Option<f64>, out: &mut [f64]) {
    debug_assert_eq!(vis.len(), unshadowed.len());
    for ((o, &v), u) in out.iter_mut().zip(vis).zip(unshadowed) {
        let v = match floor {
            Some(f) => (v as f64).max(f),
            None => (v as f64).max(0.0),
        };
        *o = v * u.luminance();
    }
}

/// Exhaustive weighted reservoir selection over all lights, followed by a
/// uniform point on the selected light. Weights are resampled under a
/// uniform source over the `K` lights, so the returned contribution weight
/// is `Σw / w_y`, the inverse probability of the selected light.
pub fn nls_sample(scene: &Scene, weights: &[f64], rng: &mut Rng) -> Reservoir<Candidate> {
    let k = weights.len() as f64;
    let mut r = Reservoir::<usize>::empty();
    for (i, &w) in weights.iter().enumerate() {
        r.update(i, w * k, w, rng.uniform());
    }
    r.finalize();
    let Some(id) = r.sample else {
        return Reservoir { m: r.m, ..Reservoir::empty() };
    };
    let c = Candidate::draw(id, &scene.lights[id], rng);
    Reservoir { sample: Some(c), target: r.target, w_sum: r.w_sum, m: r.m, w: r.w }
}

/// Noise-free approximate direct illumination: each light's unshadowed
/// contribution scaled by its raw predicted visibility. No shadow rays.
pub fn neural_di_shade(vis: &[f32], unshadowed: &[Vec3]) -> Vec3 {
    vis.iter().zip(unshadowed).fold(Vec3::ZERO, |acc, (&v, &u)| acc + u * v as f64)
}

/// Exact expectation of the one-sample estimator over every outcome of the
/// light selection. `per_light[i]` is the conditional expectation of the
/// shadowed integrand given light `i` (already divided by its area pdf);
/// lights that can never be picked contribute nothing.
pub fn nls_expectation(weights: &[f64], per_light: &[Vec3]) -> Vec3 {
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return Vec3::ZERO;
    }
    let mut acc = Vec3::ZERO;
    for (&w, &f) in weights.iter().zip(per_light) {
        if w > 0.0 {
            let probability = w / sum;
            let contribution_weight = sum / w;
            acc += f * contribution_weight * probability;
        }
    }
    acc
}

/// Unshadowed contributions of every light at a shading point.
pub fn unshadowed_all(sp: &ShadingPoint, scene: &Scene, out: &mut Vec<Vec3>) {
    out.clear();
    out.extend(scene.lights.iter().map(|l| super::unshadowed_rgb(sp, l)));
}
