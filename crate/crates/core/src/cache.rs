//! The neural cache: hash-grid encoding followed by the MLP, trained online.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashgrid::{Footprint, HashGrid, HashGridConfig};
use crate::math::{Aabb, Vec3};
use crate::mlp::{AdamState, ForwardPass, LrSchedule, Mlp, MlpConfig, OutputActivation};
use crate::real::Real;
use crate::rng::{Purpose, Rng};

/// Examples per data-parallel work item. Fixed so gradient sums are
/// reproducible regardless of thread count.
const CHUNK: usize = 256;

/// Saturated visibility outputs otherwise stop learning: a region wrongly
/// pushed to near-zero visibility receives almost no gradient back.
pub const DEFAULT_SIGMOID_GRAD_FLOOR: f64 = 0.001;

const SNAPSHOT_MAGIC: &[u8; 8] = b"NVCSNAP1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub grid: HashGridConfig,
    pub outputs: usize,
    pub output_activation: OutputActivation,
    pub schedule: LrSchedule,
    /// See [`MlpConfig::sigmoid_grad_floor`].
    #[serde(default)]
    pub sigmoid_grad_floor: f64,
}

impl CacheConfig {
    pub fn visibility(outputs: usize) -> Self {
        CacheConfig {
            grid: HashGridConfig::default(),
            outputs,
            output_activation: OutputActivation::Sigmoid,
            schedule: LrSchedule::default(),
            sigmoid_grad_floor: DEFAULT_SIGMOID_GRAD_FLOOR,
        }
    }

    pub fn clustered(clusters: usize) -> Self {
        CacheConfig { grid: HashGridConfig::clustered(), ..CacheConfig::visibility(clusters) }
    }

    /// Three unbounded outputs for cached RGB radiance.
    pub fn radiance() -> Self {
        CacheConfig { output_activation: OutputActivation::LeakyRelu, ..CacheConfig::visibility(3) }
    }

    pub fn mlp_config(&self) -> MlpConfig {
        MlpConfig {
            sigmoid_grad_floor: self.sigmoid_grad_floor,
            ..MlpConfig::new(self.grid.output_dim(), self.outputs, self.output_activation)
        }
    }
}

/// Reusable per-thread buffers for inference and training.
#[derive(Debug, Clone, Default)]
pub struct Scratch<T> {
    footprint: Footprint<T>,
    features: Vec<T>,
    pass: ForwardPass<T>,
    input_grad: Vec<T>,
    delta: Vec<T>,
    next: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct NeuralCache<T: Real = f32> {
    cfg: CacheConfig,
    grid: HashGrid<T>,
    mlp: Mlp<T>,
    grid_adam: AdamState<T>,
    mlp_adam: AdamState<T>,
    grid_grad: Vec<T>,
    steps: u64,
}

struct ChunkGrad<T> {
    mlp: Vec<T>,
    grid: Vec<(u32, T)>,
    loss: f64,
}

impl<T: Real> NeuralCache<T> {
    pub fn new(cfg: CacheConfig, domain: Aabb, seed: u64) -> Result<Self> {
        cfg.schedule.validate()?;
        let mut rng = Rng::stream(seed, 0, 0, Purpose::Init);
        let grid = HashGrid::new(cfg.grid, domain, &mut rng)?;
        let mlp = Mlp::he_init(cfg.mlp_config(), &mut rng)?;
        Ok(NeuralCache::from_parts(cfg, grid, mlp))
    }

    fn from_parts(cfg: CacheConfig, grid: HashGrid<T>, mlp: Mlp<T>) -> Self {
        NeuralCache {
            grid_adam: AdamState::new(grid.params().len()),
            mlp_adam: AdamState::new(mlp.params().len()),
            grid_grad: vec![T::zero(); grid.params().len()],
            cfg,
            grid,
            mlp,
            steps: 0,
        }
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    pub fn outputs(&self) -> usize {
        self.cfg.outputs
    }

    pub fn grid(&self) -> &HashGrid<T> {
        &self.grid
    }

    pub fn grid_mut(&mut self) -> &mut HashGrid<T> {
        &mut self.grid
    }

    pub fn mlp(&self) -> &Mlp<T> {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp<T> {
        &mut self.mlp
    }

    /// Training steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn param_count(&self) -> usize {
        self.grid.params().len() + self.mlp.params().len()
    }

    pub fn scratch(&self) -> Scratch<T> {
        Scratch {
            features: vec![T::zero(); self.grid.output_dim()],
            pass: self.mlp.new_pass(),
            input_grad: vec![T::zero(); self.grid.output_dim()],
            ..Scratch::default()
        }
    }

    /// Network outputs at `pos`, written into `out`.
    pub fn infer_into(&self, pos: Vec3, scratch: &mut Scratch<T>, out: &mut [T]) {
        self.forward_scratch(pos, scratch);
        out.copy_from_slice(scratch.pass.output());
    }

    pub fn infer(&self, pos: Vec3) -> Vec<T> {
        let mut scratch = self.scratch();
        let mut out = vec![T::zero(); self.outputs()];
        self.infer_into(pos, &mut scratch, &mut out);
        out
    }

    fn forward_scratch(&self, pos: Vec3, s: &mut Scratch<T>) {
        if s.features.len() != self.grid.output_dim() {
            *s = self.scratch();
        }
        self.grid.footprint(pos, &mut s.footprint);
        self.grid.gather(&s.footprint, &mut s.features);
        s.pass.inputs[0].copy_from_slice(&s.features);
        self.mlp.propagate(&mut s.pass);
    }

    /// Mean per-example loss of `positions` against row-major `targets`
    /// (`positions.len() × outputs`), without updating anything.
    pub fn loss(&self, positions: &[Vec3], targets: &[T]) -> f64 {
        let k = self.outputs();
        let mut s = self.scratch();
        let mut total = 0.0;
        for (i, &p) in positions.iter().enumerate() {
            self.forward_scratch(p, &mut s);
            let out = s.pass.output();
            total += out
                .iter()
                .zip(&targets[i * k..(i + 1) * k])
                .map(|(&o, &t)| (o - t).as_f64().powi(2))
                .sum::<f64>()
                / k as f64;
        }
        total / positions.len().max(1) as f64
    }

    /// Analytic gradient of the batch-mean L2 loss with respect to every
    /// parameter, hash-grid table first and MLP second. Returns the loss.
    pub fn gradients(&self, positions: &[Vec3], targets: &[T], grid_grad: &mut [T], mlp_grad: &mut [T]) -> f64 {
        let k = self.outputs();
        assert_eq!(targets.len(), positions.len() * k);
        let n = positions.len();
        if n == 0 {
            return 0.0;
        }
        let scale = T::of(1.0 / n as f64);
        let chunks: Vec<ChunkGrad<T>> = positions
            .par_chunks(CHUNK)
            .zip(targets.par_chunks(CHUNK * k))
            .map(|(pos, tgt)| self.chunk_gradient(pos, tgt, scale))
            .collect();
        grid_grad.iter_mut().for_each(|g| *g = T::zero());
        mlp_grad.iter_mut().for_each(|g| *g = T::zero());
        let mut loss = 0.0;
        for c in &chunks {
            loss += c.loss;
            for (g, &v) in mlp_grad.iter_mut().zip(&c.mlp) {
                *g += v;
            }
            for &(i, v) in &c.grid {
                grid_grad[i as usize] += v;
            }
        }
        loss / n as f64
    }

    fn chunk_gradient(&self, positions: &[Vec3], targets: &[T], scale: T) -> ChunkGrad<T> {
        let k = self.outputs();
        let f = self.grid.config().features_per_level;
        let mut s = self.scratch();
        let mut mlp = vec![T::zero(); self.mlp.params().len()];
        let mut grid = Vec::with_capacity(positions.len() * self.grid.config().levels * 8 * f);
        let mut loss = 0.0;
        for (i, &p) in positions.iter().enumerate() {
            self.forward_scratch(p, &mut s);
            let l = self.mlp.backward_l2_into(
                &s.pass,
                &targets[i * k..(i + 1) * k],
                None,
                scale,
                &mut mlp,
                &mut s.input_grad,
                &mut s.delta,
                &mut s.next,
            );
            loss += l.as_f64();
            let mut start = 0;
            for (level, &end) in s.footprint.level_ends.iter().enumerate() {
                let up = &s.input_grad[level * f..(level + 1) * f];
                for &(offset, w) in &s.footprint.entries[start..end as usize] {
                    for (j, &u) in up.iter().enumerate() {
                        grid.push((offset + j as u32, w * u));
                    }
                }
                start = end as usize;
            }
        }
        ChunkGrad { mlp, grid, loss }
    }

    /// One optimizer step on the batch. Returns the batch loss before the update.
    pub fn train_step(&mut self, positions: &[Vec3], targets: &[T]) -> f64 {
        let mut grid_grad = std::mem::take(&mut self.grid_grad);
        let mut mlp_grad = vec![T::zero(); self.mlp.params().len()];
        let loss = self.gradients(positions, targets, &mut grid_grad, &mut mlp_grad);
        let lr = self.cfg.schedule.lr_at(self.steps);
        self.grid_adam.step_sparse(self.grid.params_mut(), &grid_grad, lr);
        self.mlp_adam.step(self.mlp.params_mut(), &mlp_grad, lr);
        self.grid_grad = grid_grad;
        self.steps += 1;
        loss
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotHeader {
    config: CacheConfig,
    domain_min: Vec3,
    domain_max: Vec3,
    grid_params: usize,
    mlp_params: usize,
    steps: u64,
}

impl NeuralCache<f32> {
    /// Writes `NVCSNAP1`, a little-endian u32 header length, the JSON header,
    /// then all parameters as little-endian f32 (hash table first, then MLP).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf).expect("in-memory write");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let header = SnapshotHeader {
            config: self.cfg.clone(),
            domain_min: self.grid.domain().min,
            domain_max: self.grid.domain().max,
            grid_params: self.grid.params().len(),
            mlp_params: self.mlp.params().len(),
            steps: self.steps,
        };
        let json = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_u32::<LittleEndian>(json.len() as u32)?;
        w.write_all(&json)?;
        for &v in self.grid.params().iter().chain(self.mlp.params()) {
            w.write_f32::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        NeuralCache::read_snapshot(&mut bytes.as_slice())
    }

    pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Self> {
        let bad = |m: String| Error::Snapshot(m);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| bad(e.to_string()))?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let len = r.read_u32::<LittleEndian>().map_err(|e| bad(e.to_string()))? as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json).map_err(|e| bad(e.to_string()))?;
        let header: SnapshotHeader = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
        let domain = Aabb::new(header.domain_min, header.domain_max);
        let mut grid = HashGrid::zeroed(header.config.grid, domain)?;
        let mut mlp = Mlp::zeroed(header.config.mlp_config())?;
        if grid.params().len() != header.grid_params || mlp.params().len() != header.mlp_params {
            return Err(bad("parameter counts do not match the configuration".into()));
        }
        for v in grid.params_mut().iter_mut().chain(mlp.params_mut().iter_mut()) {
            *v = r.read_f32::<LittleEndian>().map_err(|e| bad(e.to_string()))?;
        }
        let mut cache = NeuralCache::from_parts(header.config, grid, mlp);
        cache.steps = header.steps;
        Ok(cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(outputs: usize) -> CacheConfig {
        CacheConfig {
            grid: HashGridConfig::with_finest(3, 2, 8, 2, 1 << 8),
            ..CacheConfig::visibility(outputs)
        }
    }

    fn unit_box() -> Aabb {
        Aabb::new(Vec3::ZERO, Vec3::ONE)
    }

    #[test]
    fn parameter_budget_of_default_configuration() {
        let c = NeuralCache::<f32>::new(CacheConfig::visibility(32), unit_box(), 1).unwrap();
        // 655,360 table entries plus the 40-32-32-32 network
        assert_eq!(c.param_count(), 655_360 + (40 * 32 + 32) + (32 * 32 + 32) * 2);
    }

    /// Loss as an explicit function of all parameters, for finite differences.
    fn total_loss(c: &NeuralCache<f64>, pos: &[Vec3], tgt: &[f64]) -> f64 {
        c.loss(pos, tgt)
    }

    #[test]
    fn full_chain_gradient_check() {
        let mut rng = Rng::new(9);
        // the exact gradient, so finite differences apply
        let cfg = CacheConfig { sigmoid_grad_floor: 0.0, ..small_cfg(3) };
        let mut c = NeuralCache::<f64>::new(cfg, unit_box(), 2).unwrap();
        for p in c.grid_mut().params_mut() {
            *p = rng.range(-0.5, 0.5);
        }
        let pos: Vec<Vec3> = (0..4).map(|_| Vec3::new(rng.uniform(), rng.uniform(), rng.uniform())).collect();
        let tgt: Vec<f64> = (0..12).map(|_| (rng.uniform() > 0.5) as u8 as f64).collect();
        let mut gg = vec![0.0; c.grid().params().len()];
        let mut mg = vec![0.0; c.mlp().params().len()];
        c.gradients(&pos, &tgt, &mut gg, &mut mg);
        let h = 1e-6;
        let mut max_rel: f64 = 0.0;
        for i in 0..gg.len() {
            if gg[i] == 0.0 {
                continue;
            }
            let o = c.grid().params()[i];
            c.grid_mut().params_mut()[i] = o + h;
            let up = total_loss(&c, &pos, &tgt);
            c.grid_mut().params_mut()[i] = o - h;
            let dn = total_loss(&c, &pos, &tgt);
            c.grid_mut().params_mut()[i] = o;
            let fd = (up - dn) / (2.0 * h);
            max_rel = max_rel.max((gg[i] - fd).abs() / gg[i].abs().max(fd.abs()).max(1e-6));
        }
        for i in 0..mg.len() {
            let o = c.mlp().params()[i];
            c.mlp_mut().params_mut()[i] = o + h;
            let up = total_loss(&c, &pos, &tgt);
            c.mlp_mut().params_mut()[i] = o - h;
            let dn = total_loss(&c, &pos, &tgt);
            c.mlp_mut().params_mut()[i] = o;
            let fd = (up - dn) / (2.0 * h);
            max_rel = max_rel.max((mg[i] - fd).abs() / mg[i].abs().max(fd.abs()).max(1e-6));
        }
        assert!(max_rel < 1e-4, "{max_rel}");
    }

    #[test]
    fn training_reduces_loss_on_fixed_batch() {
        let mut rng = Rng::new(4);
        let mut c = NeuralCache::<f32>::new(small_cfg(2), unit_box(), 3).unwrap();
        let pos: Vec<Vec3> = (0..512).map(|_| Vec3::new(rng.uniform(), rng.uniform(), rng.uniform())).collect();
        let tgt: Vec<f32> = pos.iter().flat_map(|p| [(p.x > 0.5) as u8 as f32, (p.y > 0.5) as u8 as f32]).collect();
        let first = c.train_step(&pos, &tgt);
        let mut last = first;
        for _ in 0..100 {
            last = c.train_step(&pos, &tgt);
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
        assert_eq!(c.steps(), 101);
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut rng = Rng::new(5);
            let mut c = NeuralCache::<f32>::new(small_cfg(2), unit_box(), 8).unwrap();
            let pos: Vec<Vec3> = (0..700).map(|_| Vec3::new(rng.uniform(), rng.uniform(), rng.uniform())).collect();
            let tgt: Vec<f32> = pos.iter().flat_map(|p| [(p.z > 0.3) as u8 as f32, 1.0]).collect();
            for _ in 0..5 {
                c.train_step(&pos, &tgt);
            }
            c
        };
        let a = run();
        let b = run();
        assert_eq!(a.grid().params(), b.grid().params());
        assert_eq!(a.mlp().params(), b.mlp().params());
    }

    #[test]
    fn snapshot_round_trip() {
        let c = NeuralCache::<f32>::new(small_cfg(4), unit_box(), 6).unwrap();
        let mut buf = Vec::new();
        c.write_snapshot(&mut buf).unwrap();
        let d = NeuralCache::read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(c.grid().params(), d.grid().params());
        assert_eq!(c.mlp().params(), d.mlp().params());
        assert_eq!(c.config(), d.config());
        let p = Vec3::new(0.2, 0.4, 0.9);
        assert_eq!(c.infer(p), d.infer(p));
        buf[0] = b'X';
        assert!(NeuralCache::read_snapshot(&mut buf.as_slice()).is_err());
    }
}
