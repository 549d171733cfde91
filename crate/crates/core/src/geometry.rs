//! Rays, triangles and the intersection primitives everything else is built on.

use crate::math::{Aabb, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub dir: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    /// Builds a ray, normalizing `dir`.
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Ray { origin, dir: dir.normalize(), t_min: 0.0, t_max: f64::INFINITY }
    }

    pub fn with_range(origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Self {
        debug_assert!(t_min >= 0.0 && t_min < t_max);
        Ray { origin, dir: dir.normalize(), t_min, t_max }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }

    pub fn is_valid(&self) -> bool {
        (self.dir.length() - 1.0).abs() <= 1e-6 && self.t_min >= 0.0 && self.t_min < self.t_max
    }
}

/// What a triangle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Material(u32),
    Light(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
    pub surface: Surface,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub t: f64,
    /// Barycentric weights of `v1` and `v2`; `v0` gets `1 - u - v`.
    pub u: f64,
    pub v: f64,
}

impl Triangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3, surface: Surface) -> Self {
        Triangle { v0, v1, v2, surface }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.v1 - self.v0).cross(self.v2 - self.v0).length()
    }

    /// Unit geometric normal following the `v0, v1, v2` winding.
    pub fn normal(&self) -> Vec3 {
        (self.v1 - self.v0).cross(self.v2 - self.v0).normalize()
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v0 + self.v1 + self.v2) / 3.0
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points([self.v0, self.v1, self.v2])
    }

    pub fn point_at(&self, u: f64, v: f64) -> Vec3 {
        self.v0 * (1.0 - u - v) + self.v1 * u + self.v2 * v
    }

    pub fn is_degenerate(&self) -> bool {
        let a = self.area();
        !(a > 1e-14) || !a.is_finite()
    }
}

/// Möller–Trumbore with inclusive edge tests (`u >= 0`, `v >= 0`, `u + v <= 1`),
/// so rays through a shared edge hit both neighbours rather than neither.
#[inline]
pub fn ray_triangle_intersect(ray: &Ray, tri: &Triangle) -> Option<TriangleHit> {
    let e1 = tri.v1 - tri.v0;
    let e2 = tri.v2 - tri.v0;
    let p = ray.dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 * e1.length() * e2.length() {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - tri.v0;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.dir.dot(q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv_det;
    if t >= ray.t_min && t <= ray.t_max {
        Some(TriangleHit { t, u, v })
    } else {
        None
    }
}

/// Uniform point on the triangle using the square-root warp.
/// Returns the point and its area-measure density.
pub fn sample_triangle_uniform(tri: &Triangle, u1: f64, u2: f64) -> (Vec3, f64) {
    let su = u1.sqrt();
    let p = tri.v0 * (1.0 - su) + tri.v1 * (su * (1.0 - u2)) + tri.v2 * (su * u2);
    (p, 1.0 / tri.area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn tri(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Triangle {
        Triangle::new(a.into(), b.into(), c.into(), Surface::Material(0))
    }

    #[test]
    fn axis_aligned_hit_at_unit_distance() {
        let t = tri([-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, 0.0]);
        let r = Ray::new(Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 1.0));
        let hit = ray_triangle_intersect(&r, &t).expect("hit");
        assert!((hit.t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_ray_misses() {
        let t = tri([-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, 0.0]);
        let r = Ray::new(Vec3::new(0.0, 0.0, -1.0), Vec3::new(1.0, 0.0, 0.0));
        assert!(ray_triangle_intersect(&r, &t).is_none());
    }

    #[test]
    fn respects_t_range() {
        let t = tri([-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, 0.0]);
        let r = Ray::with_range(Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 1.0), 0.0, 0.5);
        assert!(ray_triangle_intersect(&r, &t).is_none());
    }

    /// Independent oracle: intersect the supporting plane, then compare
    /// sub-triangle areas to get barycentrics.
    fn plane_oracle(ray: &Ray, t: &Triangle) -> Option<f64> {
        let n = (t.v1 - t.v0).cross(t.v2 - t.v0);
        let denom = n.dot(ray.dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let dist = n.dot(t.v0 - ray.origin) / denom;
        if dist < ray.t_min || dist > ray.t_max {
            return None;
        }
        let p = ray.at(dist);
        let total = n.length_squared();
        let w0 = (t.v1 - p).cross(t.v2 - p).dot(n) / total;
        let w1 = (t.v2 - p).cross(t.v0 - p).dot(n) / total;
        let w2 = 1.0 - w0 - w1;
        (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0).then_some(dist)
    }

    #[test]
    fn agrees_with_plane_barycentric_oracle() {
        let mut rng = Rng::new(99);
        let mut pt = || Vec3::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
        let mut hits = 0;
        for _ in 0..10_000 {
            let t = tri(pt().into(), pt().into(), pt().into());
            let origin = pt() * 3.0;
            let target = t.point_at(0.3, 0.3) + pt() * 0.6;
            let r = Ray::new(origin, target - origin);
            let a = ray_triangle_intersect(&r, &t);
            let b = plane_oracle(&r, &t);
            match (a, b) {
                (Some(h), Some(d)) => {
                    hits += 1;
                    assert!((h.t - d).abs() <= 1e-5 * d.max(1.0), "{} vs {}", h.t, d);
                }
                (None, None) => {}
                // Grazing the edge is allowed to differ by rounding only.
                (a, b) => {
                    let t_any = a.map(|h| h.t).or(b).unwrap();
                    let p = r.at(t_any);
                    let n = (t.v1 - t.v0).cross(t.v2 - t.v0);
                    let total = n.length_squared();
                    let w0 = (t.v1 - p).cross(t.v2 - p).dot(n) / total;
                    let w1 = (t.v2 - p).cross(t.v0 - p).dot(n) / total;
                    let w2 = 1.0 - w0 - w1;
                    assert!(w0.min(w1).min(w2).abs() < 1e-9, "disagreement away from an edge");
                }
            }
        }
        assert!(hits > 1000, "oracle test exercised too few hits: {hits}");
    }

    #[test]
    fn sample_at_origin_is_v0() {
        let t = tri([1.0, 2.0, 3.0], [4.0, 2.0, 3.0], [1.0, 5.0, 3.0]);
        let (p, _) = sample_triangle_uniform(&t, 0.0, 0.0);
        assert!((p - t.v0).length() < 1e-12);
    }

    #[test]
    fn unit_area_pdf_is_one() {
        let t = tri([0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let (_, pdf) = sample_triangle_uniform(&t, 0.3, 0.6);
        assert!((pdf - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_centroid_converges() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let mut rng = Rng::new(5);
        let n = 100_000;
        let mut acc = Vec3::ZERO;
        for _ in 0..n {
            let (p, _) = sample_triangle_uniform(&t, rng.uniform(), rng.uniform());
            acc += p;
        }
        let mean = acc / n as f64;
        assert!((mean - t.centroid()).length() < 1e-2, "{mean:?}");
    }
}
