//! Frame loop: G-buffer, online training, inference and light sampling,
//! shading and accumulation, plus the brute-force reference renderer.
//!
//! The camera is static, so the G-buffer is traced once through pixel
//! centres and reused by every frame. Network outputs per pixel are cached
//! and only recomputed after the parameters change.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{CacheConfig, NeuralCache, DEFAULT_SIGMOID_GRAD_FLOOR};
use crate::error::{Error, Result};
use crate::hashgrid::HashGridConfig;
use crate::image::{metrics_row, Image, MetricsRow};
use crate::math::Vec3;
use crate::mlp::LrSchedule;
use crate::rng::{Purpose, Rng};
use crate::sampling::nls::unshadowed_all;
use crate::sampling::{
    candidate_radiance, clustered_sample, cnvc_initial_candidates, kmeans_cluster, neural_di_shade, nls_sample,
    nls_weights, restir_spatial, restir_temporal, ris_initial_candidates, shade_sample, unshadowed_rgb, Candidate,
    ClusterSet, Reservoir, RestirConfig, ShadingPoint, VISIBILITY_FLOOR,
};
use crate::scene::Scene;
use crate::trainer::{train_frame, TargetKind, TrainConfig};

/// Largest light count for which per-pixel unshadowed contributions of all
/// lights are tabulated up front.
const TABULATE_LIGHTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Uniform,
    Ris,
    Restir,
    Nls,
    NeuralDi,
    Cnvc,
    CnvcRestir,
    NrcDi,
    Reference,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::Uniform,
        Mode::Ris,
        Mode::Restir,
        Mode::Nls,
        Mode::NeuralDi,
        Mode::Cnvc,
        Mode::CnvcRestir,
        Mode::NrcDi,
        Mode::Reference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Uniform => "uniform",
            Mode::Ris => "ris",
            Mode::Restir => "restir",
            Mode::Nls => "nls",
            Mode::NeuralDi => "neural-di",
            Mode::Cnvc => "cnvc",
            Mode::CnvcRestir => "cnvc-restir",
            Mode::NrcDi => "nrc-di",
            Mode::Reference => "reference",
        }
    }

    /// Modes that train a network every frame.
    pub fn is_neural(self) -> bool {
        matches!(self, Mode::Nls | Mode::NeuralDi | Mode::Cnvc | Mode::CnvcRestir | Mode::NrcDi)
    }

    pub fn uses_clusters(self) -> bool {
        matches!(self, Mode::Cnvc | Mode::CnvcRestir)
    }

    pub fn uses_reuse(self) -> bool {
        matches!(self, Mode::Restir | Mode::CnvcRestir)
    }

    /// Modes with one network output per light.
    pub fn per_light_outputs(self) -> bool {
        matches!(self, Mode::Nls | Mode::NeuralDi)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Visibility floor for resampling weights; `None` disables it.
    pub visibility_floor: Option<f64>,
    /// Requested k-means cluster count for clustered modes.
    pub clusters: usize,
    pub restir: RestirConfig,
    pub train: TrainConfig,
    /// Encoding override; the mode's preset is used when absent.
    pub grid: Option<HashGridConfig>,
    pub schedule: LrSchedule,
    /// Lower bound on the sigmoid derivative during training.
    pub sigmoid_grad_floor: f64,
    /// Stop training after this many frames and keep the cache frozen.
    pub train_frames: Option<u64>,
    /// Samples per light per frame in reference mode.
    pub reference_spp: u32,
    pub invalidate_reservoirs_at: Option<u64>,
}

impl RenderConfig {
    pub fn new(mode: Mode, seed: u64) -> Self {
        RenderConfig {
            mode,
            seed,
            visibility_floor: Some(VISIBILITY_FLOOR),
            clusters: 32,
            restir: RestirConfig::default(),
            train: if mode.uses_clusters() { TrainConfig::clustered() } else { TrainConfig::default() },
            grid: None,
            schedule: LrSchedule::default(),
            sigmoid_grad_floor: DEFAULT_SIGMOID_GRAD_FLOOR,
            train_frames: None,
            reference_spp: 1,
            invalidate_reservoirs_at: None,
        }
    }
}

/// Per-pixel primary-hit attributes.
#[derive(Debug, Clone)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    /// Shading point of each pixel; `None` where the primary ray missed or
    /// hit an emitter.
    pub points: Vec<Option<ShadingPoint>>,
    /// Primary-ray distance, infinite on misses.
    pub depth: Vec<f64>,
}

impl GBuffer {
    /// Traces one primary ray through the centre of every pixel.
    pub fn build(scene: &Scene) -> GBuffer {
        let cam = &scene.camera;
        let (w, h) = (cam.width as usize, cam.height as usize);
        let hits: Vec<(Option<ShadingPoint>, f64)> = (0..w * h)
            .into_par_iter()
            .map(|i| {
                let ray = cam.primary_ray((i % w) as u32, (i / w) as u32, 0.5, 0.5);
                match scene.intersect(&ray) {
                    Some(hit) if matches!(hit.surface, crate::geometry::Surface::Material(_)) => {
                        (Some(ShadingPoint::from_hit(&hit, -ray.dir)), hit.t)
                    }
                    Some(hit) => (None, hit.t),
                    None => (None, f64::INFINITY),
                }
            })
            .collect();
        let (points, depth) = hits.into_iter().unzip();
        GBuffer { width: w, height: h, points, depth }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Accumulation and reuse state carried between frames.
#[derive(Debug, Clone)]
pub struct FrameState {
    pub frame: u64,
    pub sum: Vec<Vec3>,
    pub count: u64,
    /// Estimate of the most recent frame alone.
    pub last: Vec<Vec3>,
    /// Reservoirs kept for temporal reuse.
    pub previous: Option<Vec<Reservoir<Candidate>>>,
    pub metrics: Vec<MetricsRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameReport {
    pub frame: u64,
    pub loss: Option<f64>,
    pub seconds: f64,
}

pub struct Renderer {
    scene: Scene,
    cfg: RenderConfig,
    gbuffer: GBuffer,
    cache: Option<NeuralCache<f32>>,
    clusters: Option<ClusterSet>,
    state: FrameState,
    reference: Option<Image>,
    /// `pixels × lights` unshadowed contributions, when tabulated.
    unshadowed: Option<Vec<Vec3>>,
    /// `pixels × outputs` network outputs at each pixel.
    outputs: Vec<f32>,
    outputs_version: Option<u64>,
}

impl Renderer {
    pub fn new(scene: Scene, cfg: RenderConfig) -> Result<Renderer> {
        let mode = cfg.mode;
        if mode.per_light_outputs() && scene.lights.len() > crate::mlp::MAX_OUTPUTS {
            return Err(Error::Config(format!(
                "mode {mode} needs one network output per light but the scene has {} lights; use a clustered mode",
                scene.lights.len()
            )));
        }
        let clusters = if mode.uses_clusters() {
            let centers: Vec<Vec3> = scene.lights.iter().map(|l| l.center()).collect();
            let mut rng = Rng::stream(cfg.seed, 0, 0, Purpose::Clustering);
            let k = cfg.clusters.min(crate::mlp::MAX_OUTPUTS);
            Some(kmeans_cluster(&centers, k, &mut rng))
        } else {
            None
        };
        let cache = if mode.is_neural() {
            let mut cc = match mode {
                Mode::NrcDi => CacheConfig::radiance(),
                Mode::Cnvc | Mode::CnvcRestir => CacheConfig::clustered(clusters.as_ref().map_or(1, |c| c.len())),
                _ => CacheConfig::visibility(scene.lights.len()),
            };
            if let Some(g) = cfg.grid {
                cc.grid = g;
            }
            cc.schedule = cfg.schedule;
            cc.sigmoid_grad_floor = cfg.sigmoid_grad_floor;
            Some(NeuralCache::new(cc, scene.bounds, cfg.seed)?)
        } else {
            None
        };
        let gbuffer = GBuffer::build(&scene);
        let n = gbuffer.len();
        let mut r = Renderer {
            scene,
            cfg,
            gbuffer,
            cache,
            clusters,
            state: FrameState {
                frame: 0,
                sum: vec![Vec3::ZERO; n],
                count: 0,
                last: vec![Vec3::ZERO; n],
                previous: None,
                metrics: Vec::new(),
            },
            reference: None,
            unshadowed: None,
            outputs: Vec::new(),
            outputs_version: None,
        };
        r.tabulate_unshadowed();
        Ok(r)
    }

    fn tabulate_unshadowed(&mut self) {
        let k = self.scene.lights.len();
        if !self.cfg.mode.per_light_outputs() || k > TABULATE_LIGHTS {
            self.unshadowed = None;
            return;
        }
        let scene = &self.scene;
        let table: Vec<Vec<Vec3>> = self
            .gbuffer
            .points
            .par_iter()
            .map(|p| {
                let mut row = Vec::with_capacity(k);
                match p {
                    Some(sp) => unshadowed_all(sp, scene, &mut row),
                    None => row.resize(k, Vec3::ZERO),
                }
                row
            })
            .collect();
        self.unshadowed = Some(table.concat());
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn config(&self) -> &RenderConfig {
        &self.cfg
    }

    pub fn gbuffer(&self) -> &GBuffer {
        &self.gbuffer
    }

    pub fn state(&self) -> &FrameState {
        &self.state
    }

    pub fn cache(&self) -> Option<&NeuralCache<f32>> {
        self.cache.as_ref()
    }

    /// Replaces the network; the per-pixel outputs are recomputed lazily.
    pub fn set_cache(&mut self, cache: NeuralCache<f32>) {
        self.cache = Some(cache);
        self.outputs_version = None;
    }

    pub fn clusters(&self) -> Option<&ClusterSet> {
        self.clusters.as_ref()
    }

    /// Error metrics are recorded against this image after every frame.
    pub fn set_reference(&mut self, reference: Image) -> Result<()> {
        if reference.width != self.gbuffer.width || reference.height != self.gbuffer.height {
            return Err(Error::Dimension("reference image does not match the camera".into()));
        }
        self.reference = Some(reference);
        Ok(())
    }

    /// Swaps the light list between frames (same count), e.g. to script an
    /// abrupt lighting change. Training continues from the current state.
    pub fn set_lights(&mut self, lights: Vec<crate::scene::Light>) -> Result<()> {
        if lights.len() != self.scene.lights.len() {
            return Err(Error::Config("the light count must stay fixed while rendering".into()));
        }
        self.scene = self.scene.with_lights(lights);
        self.tabulate_unshadowed();
        Ok(())
    }

    /// Mean of all accumulated frames.
    pub fn image(&self) -> Image {
        let n = self.state.count.max(1) as f64;
        let px: Vec<Vec3> = self.state.sum.iter().map(|s| *s / n).collect();
        Image::from_vec3(self.gbuffer.width, self.gbuffer.height, &px)
    }

    /// The most recent frame on its own.
    pub fn frame_image(&self) -> Image {
        Image::from_vec3(self.gbuffer.width, self.gbuffer.height, &self.state.last)
    }

    fn training_active(&self) -> bool {
        self.cache.is_some() && self.cfg.train_frames.is_none_or(|cap| self.state.frame < cap)
    }

    /// Passes 2 and 3: fresh training data and the optimizer step(s).
    fn train(&mut self) -> Option<f64> {
        if !self.training_active() {
            return None;
        }
        let kind = match self.cfg.mode {
            Mode::NrcDi => TargetKind::Radiance,
            Mode::Cnvc | Mode::CnvcRestir => TargetKind::Clusters(self.clusters.as_ref().expect("clusters")),
            _ => TargetKind::Lights,
        };
        let cache = self.cache.as_mut().expect("neural mode has a cache");
        Some(train_frame(&self.scene, cache, &self.cfg.train, kind, self.cfg.seed, self.state.frame))
    }

    /// Runs only the training passes of the current frame and advances the
    /// frame counter without producing an image.
    pub fn train_only(&mut self) -> Option<f64> {
        let loss = self.train();
        self.state.frame += 1;
        loss
    }

    /// Network outputs of every pixel, recomputed when the parameters moved.
    fn refresh_outputs(&mut self) {
        let Some(cache) = self.cache.as_ref() else { return };
        if self.outputs_version == Some(cache.steps()) {
            return;
        }
        let k = cache.outputs();
        let mut out = vec![0.0f32; self.gbuffer.len() * k];
        let points = &self.gbuffer.points;
        out.par_chunks_mut(k * 64).enumerate().for_each_init(
            || cache.scratch(),
            |scratch, (c, rows)| {
                for (j, row) in rows.chunks_mut(k).enumerate() {
                    if let Some(sp) = points[c * 64 + j] {
                        cache.infer_into(sp.position, scratch, row);
                    }
                }
            },
        );
        self.outputs = out;
        self.outputs_version = Some(cache.steps());
    }

    /// Network outputs at one pixel (empty for non-neural modes).
    pub fn pixel_outputs(&mut self, pixel: usize) -> &[f32] {
        self.refresh_outputs();
        let k = self.cache.as_ref().map_or(0, |c| c.outputs());
        if k == 0 {
            return &[];
        }
        &self.outputs[pixel * k..(pixel + 1) * k]
    }

    fn unshadowed_row(&self, pixel: usize, sp: &ShadingPoint, scratch: &mut Vec<Vec3>) -> Vec<Vec3> {
        match &self.unshadowed {
            Some(t) => {
                let k = self.scene.lights.len();
                t[pixel * k..(pixel + 1) * k].to_vec()
            }
            None => {
                unshadowed_all(sp, &self.scene, scratch);
                scratch.clone()
            }
        }
    }

    /// Pass 4 for a non-reuse mode at one pixel: the sampled light and its
    /// contribution weight. Returns `None` for modes that do not sample.
    fn sample_pixel(&self, pixel: usize, sp: &ShadingPoint, rng: &mut Rng) -> Option<Reservoir<Candidate>> {
        let scene = &self.scene;
        let k_out = self.cache.as_ref().map_or(0, |c| c.outputs());
        let outputs = || &self.outputs[pixel * k_out..(pixel + 1) * k_out];
        match self.cfg.mode {
            Mode::Uniform => {
                let n = scene.lights.len();
                let id = rng.below(n);
                let c = Candidate::draw(id, &scene.lights[id], rng);
                Some(Reservoir { sample: Some(c), target: 1.0, w_sum: n as f64, m: 1, w: n as f64 })
            }
            Mode::Ris => Some(ris_initial_candidates(sp, scene, self.cfg.restir.candidates, rng)),
            Mode::Nls => {
                let mut scratch = Vec::new();
                let unsh = self.unshadowed_row(pixel, sp, &mut scratch);
                let mut weights = vec![0.0; unsh.len()];
                nls_weights(outputs(), &unsh, self.cfg.visibility_floor, &mut weights);
                Some(nls_sample(scene, &weights, rng))
            }
            Mode::Cnvc => Some(clustered_sample(
                sp,
                scene,
                self.clusters.as_ref().expect("clusters"),
                outputs(),
                self.cfg.visibility_floor,
                rng,
            )),
            _ => None,
        }
    }

    /// One independent estimate at `pixel` for every mode without
    /// cross-pixel reuse, using the current (frozen) network.
    pub fn estimate_pixel(&mut self, pixel: usize, rng: &mut Rng) -> Vec3 {
        self.refresh_outputs();
        self.estimate_pixel_frozen(pixel, rng)
    }

    fn estimate_pixel_frozen(&self, pixel: usize, rng: &mut Rng) -> Vec3 {
        let Some(sp) = self.gbuffer.points[pixel] else {
            return Vec3::ZERO;
        };
        let scene = &self.scene;
        match self.cfg.mode {
            Mode::Reference => reference_pixel(&sp, scene, self.cfg.reference_spp, rng),
            Mode::NeuralDi => {
                let k = scene.lights.len();
                let mut scratch = Vec::new();
                let unsh = self.unshadowed_row(pixel, &sp, &mut scratch);
                neural_di_shade(&self.outputs[pixel * k..(pixel + 1) * k], &unsh)
            }
            Mode::NrcDi => {
                let o = &self.outputs[pixel * 3..pixel * 3 + 3];
                Vec3::new(o[0].max(0.0) as f64, o[1].max(0.0) as f64, o[2].max(0.0) as f64)
            }
            Mode::Restir | Mode::CnvcRestir => panic!("reuse modes need a whole frame"),
            _ => {
                let r = self.sample_pixel(pixel, &sp, rng).expect("sampling mode");
                shade_sample(&sp, scene, &r)
            }
        }
    }

    /// Initial reservoir of a reuse mode at one pixel.
    fn initial_reservoir(&self, pixel: usize, sp: &ShadingPoint, rng: &mut Rng) -> Reservoir<Candidate> {
        match self.cfg.mode {
            Mode::CnvcRestir => {
                let k = self.cache.as_ref().map_or(0, |c| c.outputs());
                cnvc_initial_candidates(
                    sp,
                    &self.scene,
                    self.clusters.as_ref().expect("clusters"),
                    &self.outputs[pixel * k..(pixel + 1) * k],
                    self.cfg.visibility_floor,
                    rng,
                )
            }
            _ => {
                let mut r = ris_initial_candidates(sp, &self.scene, self.cfg.restir.candidates, rng);
                // the selected candidate is validated with a shadow ray
                if let Some(c) = r.sample {
                    if self.scene.visibility(sp.position, c.point) == 0.0 {
                        r.invalidate_sample();
                    }
                }
                r
            }
        }
    }

    /// Pass 4 of the reuse modes: initial candidates, then temporal and
    /// spatial reuse in the configured order.
    fn reuse_pass(&mut self) -> Vec<Reservoir<Candidate>> {
        let frame = self.state.frame;
        let seed = self.cfg.seed;
        if self.cfg.invalidate_reservoirs_at == Some(frame) {
            self.state.previous = None;
        }
        let this = &*self;
        let restir = &this.cfg.restir;
        let previous = this.state.previous.as_ref();
        let temporal = |pixel: usize, r: Reservoir<Candidate>| -> Reservoir<Candidate> {
            let Some(sp) = this.gbuffer.points[pixel] else { return r };
            let mut rng = Rng::stream(seed, pixel as u64, frame, Purpose::Temporal);
            restir_temporal(&r, previous.map(|p| &p[pixel]), &sp, &this.scene, restir, &mut rng)
        };
        let spatial = |grid: &[Reservoir<Candidate>]| -> Vec<Reservoir<Candidate>> {
            (0..grid.len())
                .into_par_iter()
                .map(|pixel| {
                    let mut rng = Rng::stream(seed, pixel as u64, frame, Purpose::Spatial);
                    restir_spatial(pixel, grid, &this.gbuffer, &this.scene, restir, &mut rng)
                })
                .collect()
        };
        let initial: Vec<Reservoir<Candidate>> = (0..this.gbuffer.len())
            .into_par_iter()
            .map(|pixel| match this.gbuffer.points[pixel] {
                Some(sp) => {
                    let mut rng = Rng::stream(seed, pixel as u64, frame, Purpose::LightSelect);
                    this.initial_reservoir(pixel, &sp, &mut rng)
                }
                None => Reservoir::empty(),
            })
            .collect();
        if restir.spatial_first {
            let s = spatial(&initial);
            s.into_par_iter().enumerate().map(|(p, r)| temporal(p, r)).collect()
        } else {
            let t: Vec<_> = initial.into_par_iter().enumerate().map(|(p, r)| temporal(p, r)).collect();
            spatial(&t)
        }
    }

    fn independent_estimates(&self, seed: u64, frame: u64) -> Vec<Vec3> {
        let purpose = if self.cfg.mode == Mode::Reference { Purpose::Reference } else { Purpose::LightSelect };
        (0..self.gbuffer.len())
            .into_par_iter()
            .map(|pixel| {
                let mut rng = Rng::stream(seed, pixel as u64, frame, purpose);
                self.estimate_pixel_frozen(pixel, &mut rng)
            })
            .collect()
    }

    /// A single-frame image at the current parameters, drawn with the
    /// random streams of `frame`, without training or accumulating. Modes
    /// with reservoir reuse depend on history and are rejected.
    pub fn preview_frame(&mut self, frame: u64) -> Result<Image> {
        if self.cfg.mode.uses_reuse() {
            return Err(Error::Config(format!("mode {} has no stateless preview", self.cfg.mode)));
        }
        self.refresh_outputs();
        let est = self.independent_estimates(self.cfg.seed, frame);
        Ok(Image::from_vec3(self.gbuffer.width, self.gbuffer.height, &est))
    }

    /// Runs the five passes of one frame and accumulates its estimate.
    pub fn render_frame(&mut self) -> Result<FrameReport> {
        let start = Instant::now();
        // pass 1, the G-buffer, is static and was traced at construction
        let loss = self.train();
        self.refresh_outputs();
        let frame = self.state.frame;
        let seed = self.cfg.seed;

        let estimates: Vec<Vec3> = if self.cfg.mode.uses_reuse() {
            let reservoirs = self.reuse_pass();
            let this = &*self;
            let shaded = reservoirs
                .par_iter()
                .enumerate()
                .map(|(pixel, r)| match this.gbuffer.points[pixel] {
                    Some(sp) => shade_sample(&sp, &this.scene, r),
                    None => Vec3::ZERO,
                })
                .collect();
            self.state.previous = Some(reservoirs);
            shaded
        } else {
            self.independent_estimates(seed, frame)
        };

        for ((s, l), e) in self.state.sum.iter_mut().zip(self.state.last.iter_mut()).zip(&estimates) {
            *s += *e;
            *l = *e;
        }
        self.state.count += 1;
        self.state.frame += 1;
        let seconds = start.elapsed().as_secs_f64();
        if let Some(reference) = &self.reference {
            let row = metrics_row(frame, &self.image(), reference, seconds)?;
            self.state.metrics.push(row);
        }
        Ok(FrameReport { frame, loss, seconds })
    }
}

/// Shadowed direct illumination at one point, unbiased for the shadowed
/// sum. A light whose centre is visible contributes its analytic
/// unshadowed value minus an area-sampled estimate of the occluded part,
/// which is exact when the light is entirely visible. Any other light is
/// estimated directly, which is exact when it is entirely hidden. The
/// choice depends only on the geometry, so either way the estimate is
/// unbiased.
pub fn reference_pixel(sp: &ShadingPoint, scene: &Scene, spp_per_light: u32, rng: &mut Rng) -> Vec3 {
    let spp = spp_per_light.max(1);
    let mut total = Vec3::ZERO;
    for (i, light) in scene.lights.iter().enumerate() {
        let unshadowed = unshadowed_rgb(sp, light);
        if unshadowed == Vec3::ZERO {
            continue;
        }
        let subtract = scene.visibility(sp.position, light.center()) > 0.0;
        let mut sum = Vec3::ZERO;
        for _ in 0..spp {
            let c = Candidate::draw(i, light, rng);
            let f = candidate_radiance(sp, light, c.point);
            if f == Vec3::ZERO {
                continue;
            }
            let visible = scene.visibility(sp.position, c.point) > 0.0;
            if visible != subtract {
                sum += f;
            }
        }
        let mean = sum / spp as f64;
        total += if subtract { unshadowed - mean } else { mean };
    }
    total
}

/// Brute-force ground truth over the scene's camera.
pub fn reference_render(scene: &Scene, spp_per_light: u32, seed: u64) -> Image {
    let g = GBuffer::build(scene);
    let px: Vec<Vec3> = (0..g.len())
        .into_par_iter()
        .map(|pixel| match g.points[pixel] {
            Some(sp) => {
                let mut rng = Rng::stream(seed, pixel as u64, u64::MAX, Purpose::Reference);
                reference_pixel(&sp, scene, spp_per_light, &mut rng)
            }
            None => Vec3::ZERO,
        })
        .collect();
    Image::from_vec3(g.width, g.height, &px)
}
