//! Multi-resolution hash-grid positional encoding.
//!
//! Each level is a lattice of trainable feature vectors over the scene
//! bounds. A query interpolates the eight surrounding lattice vertices
//! trilinearly; coarse levels that fit in the table are stored densely,
//! finer ones are addressed through [`spatial_hash`]. The per-level
//! outputs are concatenated into a vector of length `levels * features`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};
use crate::real::Real;
use crate::rng::Rng;

pub const HASH_PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

/// Table index of lattice vertex `(0, 0, 0)` under [`spatial_hash`].
pub const HASH_OF_ORIGIN: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashGridConfig {
    pub levels: usize,
    pub base_resolution: usize,
    pub per_level_scale: f64,
    pub features_per_level: usize,
    pub table_size: usize,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        HashGridConfig::with_finest(10, 16, 512, 4, 1 << 14)
    }
}

impl HashGridConfig {
    /// Picks the growth factor so that the last level has `finest` cells per axis.
    pub fn with_finest(levels: usize, base_resolution: usize, finest: usize, features: usize, table_size: usize) -> Self {
        let per_level_scale = if levels > 1 {
            (finest as f64 / base_resolution as f64).powf(1.0 / (levels - 1) as f64)
        } else {
            2.0
        };
        HashGridConfig { levels, base_resolution, per_level_scale, features_per_level: features, table_size }
    }

    /// Lower-frequency preset used when outputs are light clusters.
    pub fn clustered() -> Self {
        HashGridConfig::with_finest(8, 2, 256, 4, 1 << 14)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("hash grid: {m}")));
        if self.levels < 1 {
            return bad("levels must be at least 1");
        }
        if self.base_resolution < 1 {
            return bad("base resolution must be at least 1");
        }
        if !(self.per_level_scale > 1.0) {
            return bad("per-level scale must exceed 1");
        }
        if self.features_per_level < 1 {
            return bad("features per level must be at least 1");
        }
        if !self.table_size.is_power_of_two() {
            return bad("table size must be a power of two");
        }
        if self.table_size > u32::MAX as usize {
            return bad("table size too large");
        }
        Ok(())
    }

    /// Cells per axis at `level`.
    pub fn resolution(&self, level: usize) -> usize {
        // the small nudge keeps exact powers (e.g. 16 * 2^(1/9 * 9) = 512) from flooring one short
        ((self.base_resolution as f64 * self.per_level_scale.powi(level as i32)) * (1.0 + 1e-12)).floor() as usize
    }

    pub fn output_dim(&self) -> usize {
        self.levels * self.features_per_level
    }

    pub fn param_count(&self) -> usize {
        self.levels * self.table_size * self.features_per_level
    }

    /// Whether `level` stores every lattice vertex without hashing.
    pub fn is_dense(&self, level: usize) -> bool {
        let side = self.resolution(level) as u128 + 1;
        side * side * side <= self.table_size as u128
    }
}

/// XOR of per-axis prime products, masked to the table size. Products are
/// taken over GF(2) so that an aligned box of `2^k` vertices per axis maps
/// onto the table with equal occupancy whenever it holds at least as many
/// vertices as the table has slots.
#[inline]
pub fn spatial_hash(coords: [u32; 3], table_size: usize) -> usize {
    let h = carryless_mul(coords[0], HASH_PRIMES[0])
        ^ carryless_mul(coords[1], HASH_PRIMES[1])
        ^ carryless_mul(coords[2], HASH_PRIMES[2]);
    h as usize & (table_size - 1)
}

/// Product over GF(2) truncated to 32 bits. Low output bits only depend on
/// low input bits, so the hash is linear over aligned power-of-two boxes and
/// spreads them evenly across the table.
#[inline]
fn carryless_mul(a: u32, b: u32) -> u32 {
    let mut acc = 0u32;
    let mut a = a;
    let mut b = b;
    while a != 0 && b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    acc
}

/// Lattice vertices touched by one query: `(first parameter index, weight)`
/// per corner with nonzero weight, grouped by level.
#[derive(Debug, Clone, Default)]
pub struct Footprint<T> {
    pub entries: Vec<(u32, T)>,
    /// Exclusive end of each level's run in `entries`.
    pub level_ends: Vec<u16>,
}

#[derive(Debug, Clone)]
pub struct HashGrid<T: Real> {
    cfg: HashGridConfig,
    domain: Aabb,
    inv_extent: Vec3,
    resolutions: Vec<usize>,
    dense: Vec<bool>,
    params: Vec<T>,
}

impl<T: Real> HashGrid<T> {
    /// Features start uniform in `[-1e-4, 1e-4]`.
    pub fn new(cfg: HashGridConfig, domain: Aabb, rng: &mut Rng) -> Result<Self> {
        let mut grid = HashGrid::zeroed(cfg, domain)?;
        for p in grid.params.iter_mut() {
            *p = T::of(rng.range(-1e-4, 1e-4));
        }
        Ok(grid)
    }

    pub fn zeroed(cfg: HashGridConfig, domain: Aabb) -> Result<Self> {
        cfg.validate()?;
        if domain.is_empty() {
            return Err(Error::Config("hash grid domain is empty".into()));
        }
        let ext = domain.extent().max(Vec3::splat(1e-9));
        Ok(HashGrid {
            cfg,
            domain,
            inv_extent: Vec3::new(1.0 / ext.x, 1.0 / ext.y, 1.0 / ext.z),
            resolutions: (0..cfg.levels).map(|l| cfg.resolution(l)).collect(),
            dense: (0..cfg.levels).map(|l| cfg.is_dense(l)).collect(),
            params: vec![T::zero(); cfg.param_count()],
        })
    }

    pub fn config(&self) -> &HashGridConfig {
        &self.cfg
    }

    pub fn domain(&self) -> Aabb {
        self.domain
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn output_dim(&self) -> usize {
        self.cfg.output_dim()
    }

    /// Table slot of lattice vertex `coords` at `level`.
    pub fn slot(&self, level: usize, coords: [u32; 3]) -> usize {
        if self.dense[level] {
            let side = self.resolutions[level] + 1;
            coords[0] as usize + side * (coords[1] as usize + side * coords[2] as usize)
        } else {
            spatial_hash(coords, self.cfg.table_size)
        }
    }

    /// First parameter index of the feature vector at `(level, slot)`.
    pub fn feature_offset(&self, level: usize, slot: usize) -> usize {
        (level * self.cfg.table_size + slot) * self.cfg.features_per_level
    }

    /// Position mapped into the unit cube, clamped to the domain.
    pub fn normalize(&self, pos: Vec3) -> Vec3 {
        (self.domain.clamp(pos) - self.domain.min).mul_elem(self.inv_extent).max(Vec3::ZERO).min(Vec3::ONE)
    }

    pub fn footprint(&self, pos: Vec3, out: &mut Footprint<T>) {
        out.entries.clear();
        out.level_ends.clear();
        let p = self.normalize(pos);
        for level in 0..self.cfg.levels {
            let res = self.resolutions[level];
            let mut cell = [0u32; 3];
            let mut frac = [0.0f64; 3];
            for a in 0..3 {
                let s = p[a] * res as f64;
                let c = (s.floor() as usize).min(res - 1);
                cell[a] = c as u32;
                frac[a] = s - c as f64;
            }
            for corner in 0..8u32 {
                let mut w = 1.0;
                let mut coords = cell;
                for a in 0..3 {
                    if corner >> a & 1 == 1 {
                        w *= frac[a];
                        coords[a] += 1;
                    } else {
                        w *= 1.0 - frac[a];
                    }
                }
                if w != 0.0 {
                    let offset = self.feature_offset(level, self.slot(level, coords));
                    out.entries.push((offset as u32, T::of(w)));
                }
            }
            out.level_ends.push(out.entries.len() as u16);
        }
    }

    /// Interpolates features for a precomputed footprint into `out` (length `output_dim`).
    pub fn gather(&self, fp: &Footprint<T>, out: &mut [T]) {
        let f = self.cfg.features_per_level;
        debug_assert_eq!(out.len(), self.output_dim());
        out.iter_mut().for_each(|o| *o = T::zero());
        let mut start = 0;
        for (level, &end) in fp.level_ends.iter().enumerate() {
            let dst = &mut out[level * f..(level + 1) * f];
            for &(offset, w) in &fp.entries[start..end as usize] {
                let src = &self.params[offset as usize..offset as usize + f];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
            start = end as usize;
        }
    }

    pub fn encode(&self, pos: Vec3) -> Vec<T> {
        let mut fp = Footprint::default();
        self.footprint(pos, &mut fp);
        let mut out = vec![T::zero(); self.output_dim()];
        self.gather(&fp, &mut out);
        out
    }

    /// Adds `weight * upstream` for every touched feature into a dense gradient buffer.
    pub fn scatter_grad(fp: &Footprint<T>, features: usize, upstream: &[T], grad: &mut [T]) {
        let mut start = 0;
        for (level, &end) in fp.level_ends.iter().enumerate() {
            let up = &upstream[level * features..(level + 1) * features];
            for &(offset, w) in &fp.entries[start..end as usize] {
                let dst = &mut grad[offset as usize..offset as usize + features];
                for (d, &u) in dst.iter_mut().zip(up) {
                    *d += w * u;
                }
            }
            start = end as usize;
        }
    }

    /// Sparse gradient of `<upstream, encode(pos)>` with respect to the table:
    /// `(parameter index, value)` pairs, one per touched feature.
    pub fn encode_backward(&self, pos: Vec3, upstream: &[T]) -> Vec<(usize, T)> {
        let f = self.cfg.features_per_level;
        let mut fp = Footprint::default();
        self.footprint(pos, &mut fp);
        let mut grads = Vec::with_capacity(fp.entries.len() * f);
        let mut start = 0;
        for (level, &end) in fp.level_ends.iter().enumerate() {
            for &(offset, w) in &fp.entries[start..end as usize] {
                for k in 0..f {
                    grads.push((offset as usize + k, w * upstream[level * f + k]));
                }
            }
            start = end as usize;
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid<T: Real>(cfg: HashGridConfig, seed: u64) -> HashGrid<T> {
        let mut rng = Rng::new(seed);
        let mut g = HashGrid::<T>::new(cfg, Aabb::new(Vec3::ZERO, Vec3::ONE), &mut rng).unwrap();
        // spread the features out so interpolation is visible
        for p in g.params_mut() {
            *p = T::of(rng.range(-1.0, 1.0));
        }
        g
    }

    #[test]
    fn default_matches_reference_architecture() {
        let cfg = HashGridConfig::default();
        assert_eq!(cfg.levels, 10);
        assert_eq!(cfg.base_resolution, 16);
        assert_eq!(cfg.features_per_level, 4);
        assert_eq!(cfg.output_dim(), 40);
        assert_eq!(cfg.param_count(), 10 * 16384 * 4);
        assert_eq!(cfg.resolution(0), 16);
        assert_eq!(cfg.resolution(9), 512);
        assert!((cfg.per_level_scale - 1.47).abs() < 0.01);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = HashGridConfig::default();
        c.table_size = 1000;
        assert!(c.validate().is_err());
        let mut c = HashGridConfig::default();
        c.per_level_scale = 1.0;
        assert!(c.validate().is_err());
        let mut c = HashGridConfig::default();
        c.levels = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_of_origin_is_documented_constant() {
        assert_eq!(spatial_hash([0, 0, 0], 1 << 14), HASH_OF_ORIGIN);
        assert_eq!(spatial_hash([5, 7, 9], 1 << 14), spatial_hash([5, 7, 9], 1 << 14));
    }

    #[test]
    fn hash_occupancy_is_roughly_uniform() {
        let t = 1 << 14;
        let mut counts = vec![0u32; t];
        for x in 0..64 {
            for y in 0..64 {
                for z in 0..64 {
                    counts[spatial_hash([x, y, z], t)] += 1;
                }
            }
        }
        let expected = 64.0 * 64.0 * 64.0 / t as f64;
        let (lo, hi) = counts.iter().fold((u32::MAX, 0), |(lo, hi), &c| (lo.min(c), hi.max(c)));
        assert!(lo as f64 >= 0.5 * expected && hi as f64 <= 2.0 * expected, "{lo}..{hi} vs {expected}");
    }

    #[test]
    fn vertex_query_returns_stored_feature() {
        let cfg = HashGridConfig::default();
        let g = unit_grid::<f64>(cfg, 1);
        let f = cfg.features_per_level;
        for pos in [Vec3::ZERO, Vec3::ONE, Vec3::new(0.0, 1.0, 0.5)] {
            let enc = g.encode(pos);
            for level in 0..cfg.levels {
                let res = cfg.resolution(level);
                let coords = [0, 1, 2].map(|a| (pos[a] * res as f64).round() as u32);
                let on_vertex = (0..3).all(|a| (pos[a] * res as f64 - coords[a] as f64).abs() < 1e-12);
                if !on_vertex {
                    continue;
                }
                let off = g.feature_offset(level, g.slot(level, coords));
                assert_eq!(&enc[level * f..(level + 1) * f], &g.params()[off..off + f]);
            }
        }
    }

    #[test]
    fn cell_center_is_mean_of_corners() {
        let cfg = HashGridConfig::default();
        let g = unit_grid::<f64>(cfg, 2);
        let res = cfg.resolution(0) as f64;
        let pos = Vec3::new(3.5 / res, 7.5 / res, 11.5 / res);
        let enc = g.encode(pos);
        let f = cfg.features_per_level;
        let mut mean = vec![0.0; f];
        for corner in 0..8u32 {
            let coords = [3 + (corner & 1), 7 + (corner >> 1 & 1), 11 + (corner >> 2 & 1)];
            let off = g.feature_offset(0, g.slot(0, coords));
            for k in 0..f {
                mean[k] += g.params()[off + k] / 8.0;
            }
        }
        for k in 0..f {
            assert!((enc[k] - mean[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_levels_are_collision_free() {
        let cfg = HashGridConfig::default();
        assert!(cfg.is_dense(0));
        assert!(!cfg.is_dense(9));
        let g = HashGrid::<f32>::zeroed(cfg, Aabb::new(Vec3::ZERO, Vec3::ONE)).unwrap();
        let side = cfg.resolution(0) as u32 + 1;
        let mut seen = std::collections::HashSet::new();
        for x in 0..side {
            for y in 0..side {
                for z in 0..side {
                    assert!(seen.insert(g.slot(0, [x, y, z])));
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let g = unit_grid::<f64>(HashGridConfig::default(), 3);
        let grads = g.encode_backward(Vec3::new(0.3, 0.2, 0.9), &[0.0; 40]);
        assert!(grads.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn vertex_gradient_hits_one_entry_per_level() {
        let cfg = HashGridConfig::default();
        let g = unit_grid::<f64>(cfg, 4);
        let grads = g.encode_backward(Vec3::ZERO, &[1.0; 40]);
        assert_eq!(grads.len(), cfg.levels * cfg.features_per_level);
        assert!(grads.iter().all(|&(_, v)| v == 1.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let cfg = HashGridConfig::with_finest(4, 4, 64, 2, 1 << 10);
        let mut g = unit_grid::<f64>(cfg, 5);
        let mut rng = Rng::new(6);
        let mut max_rel: f64 = 0.0;
        for _ in 0..100 {
            let pos = Vec3::new(rng.uniform(), rng.uniform(), rng.uniform());
            let upstream: Vec<f64> = (0..cfg.output_dim()).map(|_| rng.range(-1.0, 1.0)).collect();
            let mut analytic = std::collections::HashMap::new();
            for (i, v) in g.encode_backward(pos, &upstream) {
                *analytic.entry(i).or_insert(0.0) += v;
            }
            let objective = |g: &HashGrid<f64>| -> f64 { g.encode(pos).iter().zip(&upstream).map(|(a, b)| a * b).sum() };
            for (&i, &a) in &analytic {
                // the encoding is linear in the table, so a large step is exact
                let h = 1e-2;
                let orig = g.params()[i];
                g.params_mut()[i] = orig + h;
                let up = objective(&g);
                g.params_mut()[i] = orig - h;
                let down = objective(&g);
                g.params_mut()[i] = orig;
                let fd = (up - down) / (2.0 * h);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                max_rel = max_rel.max(rel);
            }
        }
        assert!(max_rel < 1e-5, "max relative error {max_rel}");
    }

    #[test]
    fn continuous_across_cell_boundaries() {
        let cfg = HashGridConfig::default();
        let g = unit_grid::<f64>(cfg, 7);
        let edge = 5.0 / cfg.resolution(0) as f64;
        let a = g.encode(Vec3::new(edge - 1e-9, 0.4, 0.6));
        let b = g.encode(Vec3::new(edge + 1e-9, 0.4, 0.6));
        let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-5, "{diff}");
    }

    #[test]
    fn out_of_domain_positions_clamp() {
        let g = unit_grid::<f64>(HashGridConfig::default(), 8);
        assert_eq!(g.encode(Vec3::new(-3.0, 0.5, 0.5)), g.encode(Vec3::new(0.0, 0.5, 0.5)));
    }
}
