//! Median-split bounding volume hierarchy over the scene triangles.

use crate::geometry::{ray_triangle_intersect, Ray, Triangle};
use crate::math::{Aabb, Vec3};

pub const MAX_LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`. Interior: index of the right child
    /// (the left child is always the next node).
    offset: u32,
    /// Zero for interior nodes.
    count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneHit {
    pub t: f64,
    pub triangle: usize,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle index permutation; leaves reference contiguous ranges of it.
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(triangles: &[Triangle]) -> Self {
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..triangles.len() as u32).collect() };
        if triangles.is_empty() {
            return bvh;
        }
        let centroids: Vec<Vec3> = triangles.iter().map(Triangle::centroid).collect();
        let bounds: Vec<Aabb> = triangles.iter().map(|t| pad(t.bounds())).collect();
        bvh.nodes.reserve(2 * triangles.len() / MAX_LEAF_SIZE + 1);
        bvh.build_range(0, triangles.len(), &centroids, &bounds);
        bvh
    }

    fn build_range(&mut self, start: usize, end: usize, centroids: &[Vec3], bounds: &[Aabb]) -> usize {
        let node_bounds = self.order[start..end]
            .iter()
            .fold(Aabb::EMPTY, |b, &i| b.union(bounds[i as usize]));
        let index = self.nodes.len();
        let count = end - start;
        if count <= MAX_LEAF_SIZE {
            self.nodes.push(Node { bounds: node_bounds, offset: start as u32, count: count as u32 });
            return index;
        }
        let centroid_bounds = Aabb::from_points(self.order[start..end].iter().map(|&i| centroids[i as usize]));
        let axis = centroid_bounds.extent().max_axis();
        let mid = start + count / 2;
        self.order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
            centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
        });
        self.nodes.push(Node { bounds: node_bounds, offset: 0, count: 0 });
        self.build_range(start, mid, centroids, bounds);
        let right = self.build_range(mid, end, centroids, bounds);
        self.nodes[index].offset = right as u32;
        index
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nearest hit along the ray.
    pub fn intersect(&self, ray: &Ray, triangles: &[Triangle]) -> Option<SceneHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut ray = *ray;
        let mut best: Option<SceneHit> = None;
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !node.bounds.hit(ray.origin, inv, ray.t_min, ray.t_max) {
                continue;
            }
            if node.count > 0 {
                for &ti in &self.order[node.offset as usize..(node.offset + node.count) as usize] {
                    if let Some(h) = ray_triangle_intersect(&ray, &triangles[ti as usize]) {
                        // ties resolve to the lowest triangle id, like a linear scan
                        let better = match best {
                            None => true,
                            Some(b) => h.t < b.t || (h.t == b.t && (ti as usize) < b.triangle),
                        };
                        if better {
                            ray.t_max = h.t;
                            best = Some(SceneHit { t: h.t, triangle: ti as usize, u: h.u, v: h.v });
                        }
                    }
                }
            } else {
                let here = stack[sp] as usize;
                stack[sp] = node.offset;
                stack[sp + 1] = (here + 1) as u32;
                sp += 2;
            }
        }
        best
    }

    /// Any-hit query used for shadow rays.
    pub fn occluded(&self, ray: &Ray, triangles: &[Triangle]) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !node.bounds.hit(ray.origin, inv, ray.t_min, ray.t_max) {
                continue;
            }
            if node.count > 0 {
                let leaf = &self.order[node.offset as usize..(node.offset + node.count) as usize];
                if leaf.iter().any(|&ti| ray_triangle_intersect(ray, &triangles[ti as usize]).is_some()) {
                    return true;
                }
            } else {
                let here = stack[sp] as usize;
                stack[sp] = node.offset;
                stack[sp + 1] = (here + 1) as u32;
                sp += 2;
            }
        }
        false
    }

    /// Structural checks: every triangle in exactly one leaf and parents
    /// enclosing their children.
    pub fn validate(&self, triangle_count: usize) -> Result<(), String> {
        let mut seen = vec![0u32; triangle_count];
        if self.nodes.is_empty() {
            return if triangle_count == 0 { Ok(()) } else { Err("empty tree".into()) };
        }
        self.validate_node(0, &mut seen)?;
        match seen.iter().position(|&c| c != 1) {
            Some(i) => Err(format!("triangle {i} appears in {} leaves", seen[i])),
            None => Ok(()),
        }
    }

    fn validate_node(&self, index: usize, seen: &mut [u32]) -> Result<(), String> {
        let node = &self.nodes[index];
        if node.count > 0 {
            for &ti in &self.order[node.offset as usize..(node.offset + node.count) as usize] {
                seen[ti as usize] += 1;
            }
            return Ok(());
        }
        for child in [index + 1, node.offset as usize] {
            if !node.bounds.contains_box(&self.nodes[child].bounds) {
                return Err(format!("node {index} does not contain child {child}"));
            }
            self.validate_node(child, seen)?;
        }
        Ok(())
    }
}

/// Nearest hit by brute force over all triangles.
pub fn intersect_linear(ray: &Ray, triangles: &[Triangle]) -> Option<SceneHit> {
    let mut best: Option<SceneHit> = None;
    for (i, tri) in triangles.iter().enumerate() {
        if let Some(h) = ray_triangle_intersect(ray, tri) {
            if best.is_none_or(|b| h.t < b.t) {
                best = Some(SceneHit { t: h.t, triangle: i, u: h.u, v: h.v });
            }
        }
    }
    best
}

fn pad(b: Aabb) -> Aabb {
    let e = (b.extent().max_component() + b.min.x.abs().max(b.max.x.abs()) + 1.0) * 1e-9;
    Aabb::new(b.min - Vec3::splat(e), b.max + Vec3::splat(e))
}
