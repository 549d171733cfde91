//! `nvc`: renders a scene with one of the light-sampling modes and writes
//! the accumulated image, a preview and per-frame metrics.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::Parser;

use nvc::cache::NeuralCache;
use nvc::hashgrid::HashGridConfig;
use nvc::image::{Image, METRICS_HEADER};
use nvc::presets::{preset, PRESET_NAMES};
use nvc::render::{Mode, RenderConfig, Renderer};
use nvc::sampling::{TemporalClamp, VISIBILITY_FLOOR};
use nvc::scene::Scene;

fn parse_mode(s: String) -> Mode {
    s.parse().expect("restricted to known names")
}

#[derive(Debug, Parser)]
#[command(name = "nvc", version, about = "Many-light direct illumination with a neural visibility cache")]
struct Args {
    /// Scene JSON file, or the name of a built-in scene (boxes-8, boxes-32, rooms-1k).
    #[arg(long)]
    scene: String,

    #[arg(long, default_value = "nls",
          value_parser = PossibleValuesParser::new(Mode::ALL.map(Mode::name)).map(parse_mode))]
    mode: Mode,

    /// Frames to render and accumulate.
    #[arg(long, default_value_t = 64)]
    frames: u64,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Override the camera resolution (both or neither).
    #[arg(long, requires = "height")]
    width: Option<u32>,

    #[arg(long, requires = "width")]
    height: Option<u32>,

    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Reference image for the RMSE and MAE columns of the metrics file.
    #[arg(long)]
    reference: Option<PathBuf>,

    /// Area samples per light per frame in reference mode.
    #[arg(long, default_value_t = 1)]
    spp: u32,

    /// Frames (1-based counts) after which the running image is written and reported.
    #[arg(long, value_delimiter = ',')]
    checkpoint_frames: Vec<u64>,

    /// Visibility floor applied before resampling.
    #[arg(long, default_value_t = VISIBILITY_FLOOR)]
    clamp_visibility: f64,

    /// Disable the visibility floor. Lights predicted invisible can then never be chosen, which biases the result.
    #[arg(long)]
    no_clamp: bool,

    /// Light clusters for cnvc and cnvc-restir [default: 32].
    #[arg(long)]
    clusters: Option<usize>,

    /// Initial candidates per pixel for restir [default: 8].
    #[arg(long)]
    restir_candidates: Option<u32>,

    /// Spatial reuse radius in pixels [default: 32].
    #[arg(long)]
    restir_radius: Option<u32>,

    /// Spatial neighbours merged per pixel [default: 4].
    #[arg(long)]
    restir_neighbors: Option<u32>,

    /// Cap on the previous reservoir relative to the current one [default: 20].
    #[arg(long)]
    restir_temporal_clamp: Option<f64>,

    /// Clamp the previous reservoir by contribution instead of by stream count.
    #[arg(long)]
    restir_clamp_contribution: bool,

    /// Run spatial reuse before the temporal merge.
    #[arg(long)]
    spatial_first: bool,

    /// Drop all reservoirs at this frame (0-based), as after a full disocclusion.
    #[arg(long)]
    invalidate_reservoirs_at: Option<u64>,

    /// Hash-grid levels.
    #[arg(long)]
    hash_levels: Option<usize>,

    /// Coarsest hash-grid resolution per axis.
    #[arg(long)]
    hash_base_res: Option<usize>,

    /// Finest hash-grid resolution per axis.
    #[arg(long)]
    hash_finest_res: Option<usize>,

    /// Features per hash-grid level.
    #[arg(long)]
    hash_features: Option<usize>,

    /// Hash-table entries per level (power of two).
    #[arg(long)]
    hash_table_size: Option<usize>,

    /// Learning rate at the first step [default: 0.05].
    #[arg(long)]
    lr_start: Option<f64>,

    /// Learning rate after the warm-down [default: 0.001].
    #[arg(long)]
    lr_end: Option<f64>,

    /// Steps of the linear warm-down [default: 200].
    #[arg(long)]
    lr_warm_steps: Option<u64>,

    /// Optimizer steps per frame [default: 1].
    #[arg(long)]
    train_steps_per_frame: Option<u32>,

    /// World-space training samples per step [default: 4096, 24576 for clustered modes].
    #[arg(long)]
    train_world_samples: Option<usize>,

    /// Screen-space training samples per step [default: 4096, 24576 for clustered modes].
    #[arg(long)]
    train_screen_samples: Option<usize>,

    /// Draw the world-space half of each batch on scene surfaces.
    #[arg(long)]
    train_surface_samples: bool,

    /// Stop training after this many frames.
    #[arg(long)]
    train_frames: Option<u64>,

    /// Lower bound on the sigmoid derivative during training [default: 0.001].
    #[arg(long)]
    sigmoid_grad_floor: Option<f64>,

    /// Start from a saved cache instead of a fresh one.
    #[arg(long)]
    load_cache: Option<PathBuf>,

    /// Save the cache after the last frame.
    #[arg(long)]
    save_cache: Option<PathBuf>,

    /// Suppress progress output.
    #[arg(long, short)]
    quiet: bool,
}

fn load_scene(spec: &str) -> Result<Scene> {
    let path = Path::new(spec);
    if path.exists() {
        return Scene::load(path).with_context(|| format!("loading scene {}", path.display()));
    }
    match preset(spec) {
        Some(desc) => Ok(Scene::from_desc(&desc)?),
        None => bail!("scene '{spec}' is neither a file nor one of {}", PRESET_NAMES.join(", ")),
    }
}

/// Flags that only make sense for some modes.
fn validate(args: &Args) -> Result<()> {
    let mode = args.mode;
    let reject = |set: bool, flag: &str, needs: &str| -> Result<()> {
        ensure!(!set, "--{flag} requires {needs} (mode is {mode})");
        Ok(())
    };
    reject(args.clusters.is_some() && !mode.uses_clusters(), "clusters", "--mode cnvc or cnvc-restir")?;
    let restir = "--mode restir or cnvc-restir";
    reject(args.restir_candidates.is_some() && mode != Mode::Restir, "restir-candidates", "--mode restir")?;
    for (set, flag) in [
        (args.restir_radius.is_some(), "restir-radius"),
        (args.restir_neighbors.is_some(), "restir-neighbors"),
        (args.restir_temporal_clamp.is_some(), "restir-temporal-clamp"),
        (args.restir_clamp_contribution, "restir-clamp-contribution"),
        (args.spatial_first, "spatial-first"),
        (args.invalidate_reservoirs_at.is_some(), "invalidate-reservoirs-at"),
    ] {
        reject(set && !mode.uses_reuse(), flag, restir)?;
    }
    let neural = "a neural mode (nls, neural-di, cnvc, cnvc-restir, nrc-di)";
    for (set, flag) in [
        (args.hash_levels.is_some(), "hash-levels"),
        (args.hash_base_res.is_some(), "hash-base-res"),
        (args.hash_finest_res.is_some(), "hash-finest-res"),
        (args.hash_features.is_some(), "hash-features"),
        (args.hash_table_size.is_some(), "hash-table-size"),
        (args.lr_start.is_some(), "lr-start"),
        (args.lr_end.is_some(), "lr-end"),
        (args.lr_warm_steps.is_some(), "lr-warm-steps"),
        (args.train_steps_per_frame.is_some(), "train-steps-per-frame"),
        (args.train_world_samples.is_some(), "train-world-samples"),
        (args.train_screen_samples.is_some(), "train-screen-samples"),
        (args.train_surface_samples, "train-surface-samples"),
        (args.train_frames.is_some(), "train-frames"),
        (args.sigmoid_grad_floor.is_some(), "sigmoid-grad-floor"),
        (args.load_cache.is_some(), "load-cache"),
        (args.save_cache.is_some(), "save-cache"),
    ] {
        reject(set && !mode.is_neural(), flag, neural)?;
    }
    reject(args.spp != 1 && mode != Mode::Reference, "spp", "--mode reference")?;
    ensure!(args.frames >= 1, "--frames must be at least 1");
    ensure!(args.spp >= 1, "--spp must be at least 1");
    ensure!(
        args.clamp_visibility > 0.0 && args.clamp_visibility <= 1.0,
        "--clamp-visibility must lie in (0, 1]"
    );
    if let Some(k) = args.clusters {
        ensure!((1..=nvc::mlp::MAX_OUTPUTS).contains(&k), "--clusters must lie in 1..={}", nvc::mlp::MAX_OUTPUTS);
    }
    ensure!(args.restir_candidates != Some(0), "--restir-candidates must be positive");
    ensure!(args.train_steps_per_frame != Some(0), "--train-steps-per-frame must be positive");
    if let Some(c) = args.restir_temporal_clamp {
        ensure!(c > 0.0, "--restir-temporal-clamp must be positive");
    }
    Ok(())
}

fn render_config(args: &Args, scene: &Scene) -> Result<RenderConfig> {
    let mode = args.mode;
    let mut cfg = RenderConfig::new(mode, args.seed);
    cfg.visibility_floor = if args.no_clamp { None } else { Some(args.clamp_visibility) };
    if let Some(k) = args.clusters {
        cfg.clusters = k;
    }
    let r = &mut cfg.restir;
    r.candidates = args.restir_candidates.unwrap_or(r.candidates);
    r.radius = args.restir_radius.unwrap_or(r.radius);
    r.neighbors = args.restir_neighbors.unwrap_or(r.neighbors);
    r.temporal_factor = args.restir_temporal_clamp.unwrap_or(r.temporal_factor);
    if args.restir_clamp_contribution {
        r.temporal_clamp = TemporalClamp::Contribution;
    }
    r.spatial_first = args.spatial_first;
    cfg.invalidate_reservoirs_at = args.invalidate_reservoirs_at;

    let t = &mut cfg.train;
    t.world_samples = args.train_world_samples.unwrap_or(t.world_samples);
    t.screen_samples = args.train_screen_samples.unwrap_or(t.screen_samples);
    t.steps_per_frame = args.train_steps_per_frame.unwrap_or(t.steps_per_frame);
    t.surface_samples = args.train_surface_samples;
    ensure!(t.batch_size() > 0, "the training batch is empty");
    cfg.train_frames = args.train_frames;
    cfg.sigmoid_grad_floor = args.sigmoid_grad_floor.unwrap_or(cfg.sigmoid_grad_floor);

    let s = &mut cfg.schedule;
    s.lr_start = args.lr_start.unwrap_or(s.lr_start);
    s.lr_end = args.lr_end.unwrap_or(s.lr_end);
    s.warm_steps = args.lr_warm_steps.unwrap_or(s.warm_steps);

    let grid_flags = [args.hash_levels, args.hash_base_res, args.hash_finest_res, args.hash_features, args.hash_table_size];
    if grid_flags.iter().any(Option::is_some) {
        let base = if mode.uses_clusters() { HashGridConfig::clustered() } else { HashGridConfig::default() };
        let finest = base.resolution(base.levels - 1);
        let g = HashGridConfig::with_finest(
            args.hash_levels.unwrap_or(base.levels),
            args.hash_base_res.unwrap_or(base.base_resolution),
            args.hash_finest_res.unwrap_or(finest),
            args.hash_features.unwrap_or(base.features_per_level),
            args.hash_table_size.unwrap_or(base.table_size),
        );
        g.validate()?;
        cfg.grid = Some(g);
    }
    cfg.reference_spp = args.spp;
    if mode.per_light_outputs() && scene.lights.len() > nvc::mlp::MAX_OUTPUTS {
        bail!(
            "--mode {mode} predicts one visibility per light, but the scene has {} lights (at most {}); use cnvc or cnvc-restir",
            scene.lights.len(),
            nvc::mlp::MAX_OUTPUTS
        );
    }
    Ok(cfg)
}

fn write_images(image: &Image, out: &Path, stem: &str) -> Result<()> {
    image.write_pfm(out.join(format!("{stem}.pfm")))?;
    image.write_ppm(out.join(format!("{stem}.ppm")))?;
    Ok(())
}

fn run(args: Args) -> Result<()> {
    validate(&args)?;
    let mut scene = load_scene(&args.scene)?;
    if let (Some(w), Some(h)) = (args.width, args.height) {
        ensure!(w > 0 && h > 0, "--width and --height must be positive");
        scene = scene.with_resolution(w, h);
    }
    let cfg = render_config(&args, &scene)?;
    let mut renderer = Renderer::new(scene, cfg)?;

    if let Some(path) = &args.load_cache {
        let cache = NeuralCache::load(path).with_context(|| format!("loading cache {}", path.display()))?;
        let expected = renderer.cache().map(NeuralCache::outputs).unwrap_or(0);
        ensure!(
            cache.outputs() == expected,
            "cache {} has {} outputs but --mode {} on this scene needs {expected}",
            path.display(),
            cache.outputs(),
            args.mode
        );
        renderer.set_cache(cache);
    }
    let reference = match &args.reference {
        Some(path) => {
            let img = Image::read_pfm(path).with_context(|| format!("reading reference {}", path.display()))?;
            renderer.set_reference(img.clone())?;
            Some(img)
        }
        None => None,
    };

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mode = args.mode.name();
    let mut rows = Vec::with_capacity(args.frames as usize);
    for done in 1..=args.frames {
        let report = renderer.render_frame()?;
        rows.push(report);
        if args.checkpoint_frames.contains(&done) {
            let image = renderer.image();
            write_images(&image, &args.out, &format!("{mode}-{done:05}"))?;
            if !args.quiet {
                match &reference {
                    Some(r) => eprintln!("frame {done}: rmse {:.6}", nvc::image::rmse(&image, r)?),
                    None => eprintln!("frame {done}"),
                }
            }
        }
    }

    let image = renderer.image();
    write_images(&image, &args.out, mode)?;

    let mut csv = String::from(METRICS_HEADER);
    csv.push('\n');
    if reference.is_some() {
        for m in &renderer.state().metrics {
            csv.push_str(&m.to_csv());
            csv.push('\n');
        }
    } else {
        for r in &rows {
            csv.push_str(&format!("{},,,{:.6}\n", r.frame, r.seconds));
        }
    }
    let csv_path = args.out.join(format!("{mode}.csv"));
    std::fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;

    if let Some(path) = &args.save_cache {
        renderer.cache().expect("neural modes own a cache").save(path)?;
    }
    if !args.quiet {
        let seconds: f64 = rows.iter().map(|r| r.seconds).sum();
        eprintln!("{mode}: {} frames in {seconds:.1} s, wrote {}", args.frames, args.out.join(format!("{mode}.pfm")).display());
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var("NVC_THREADS") {
        let n: usize = value.trim().parse().with_context(|| format!("NVC_THREADS='{value}' is not a thread count"))?;
        ensure!(n > 0, "NVC_THREADS must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match configure_threads().and_then(|()| run(args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
