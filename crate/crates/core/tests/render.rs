use nvc::image::rmse;
use nvc::math::Vec3;
use nvc::presets::{preset, PRESET_NAMES};
use nvc::render::{reference_render, Mode, RenderConfig, Renderer};
use nvc::sampling::unshadowed_rgb;
use nvc::scene::Scene;
use nvc::trainer::TrainConfig;

fn tiny(name: &str) -> Scene {
    Scene::from_desc(&preset(name).unwrap()).unwrap().with_resolution(16, 9)
}

fn small_batch(mode: Mode, seed: u64) -> RenderConfig {
    let mut cfg = RenderConfig::new(mode, seed);
    cfg.train = TrainConfig { world_samples: 256, screen_samples: 256, ..TrainConfig::default() };
    cfg
}

#[test]
fn shipped_scene_files_match_the_presets() {
    for name in PRESET_NAMES {
        let path = format!("{}/../../scenes/{name}.json", env!("CARGO_MANIFEST_DIR"));
        let from_file = Scene::load(&path).unwrap();
        let built = Scene::from_desc(&preset(name).unwrap()).unwrap();
        assert_eq!(from_file.triangles.len(), built.triangles.len(), "{name}");
        assert_eq!(from_file.lights.len(), built.lights.len(), "{name}");
        for (a, b) in from_file.lights.iter().zip(&built.lights) {
            assert!((a.center() - b.center()).length() < 1e-12, "{name}");
        }
    }
}

#[test]
fn mode_names_round_trip() {
    for mode in Mode::ALL {
        assert_eq!(mode.name().parse::<Mode>().unwrap(), mode);
    }
    assert!("nope".parse::<Mode>().is_err());
}

#[test]
fn accumulated_image_is_the_mean_of_frames() {
    let mut r = Renderer::new(tiny("boxes-8"), RenderConfig::new(Mode::Ris, 3)).unwrap();
    let mut sum = vec![Vec3::ZERO; 16 * 9];
    for _ in 0..4 {
        r.render_frame().unwrap();
        for (s, p) in sum.iter_mut().zip(r.frame_image().to_vec3()) {
            *s += p;
        }
    }
    for (a, s) in r.image().to_vec3().iter().zip(&sum) {
        assert!((*a - *s / 4.0).length() <= 1e-5 * (1.0 + s.length()));
    }
    assert_eq!(r.state().count, 4);
}

#[test]
fn lights_facing_away_give_a_black_image() {
    let v = Vec3::new;
    let floor = vec![
        [v(-5.0, 0.0, -5.0), v(5.0, 0.0, -5.0), v(5.0, 0.0, 5.0)],
        [v(-5.0, 0.0, -5.0), v(5.0, 0.0, 5.0), v(-5.0, 0.0, 5.0)],
    ];
    let mut desc = preset("boxes-8").unwrap();
    desc.meshes = vec![nvc::scene::MeshDesc { material: 0, triangles: floor }];
    for l in &mut desc.lights {
        let nvc::scene::LightDesc::Rect { edge_u, edge_v, .. } = l else { unreachable!() };
        std::mem::swap(edge_u, edge_v);
    }
    let scene = Scene::from_desc(&desc).unwrap().with_resolution(16, 9);
    assert!(reference_render(&scene, 4, 1).pixels.iter().all(|p| *p == [0.0; 3]));
    for mode in [Mode::Uniform, Mode::Ris, Mode::Restir] {
        let mut r = Renderer::new(scene.clone(), RenderConfig::new(mode, 1)).unwrap();
        r.render_frame().unwrap();
        assert!(r.image().pixels.iter().all(|p| *p == [0.0; 3]), "{mode}");
    }
}

#[test]
fn preview_leaves_the_state_alone() {
    let mut r = Renderer::new(tiny("boxes-8"), small_batch(Mode::Nls, 2)).unwrap();
    r.render_frame().unwrap();
    let before = r.image();
    let steps = r.cache().unwrap().steps();
    let a = r.preview_frame(77).unwrap();
    let b = r.preview_frame(77).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, r.preview_frame(78).unwrap());
    assert_eq!(r.image(), before);
    assert_eq!(r.state().frame, 1);
    assert_eq!(r.cache().unwrap().steps(), steps);

    let mut reuse = Renderer::new(tiny("boxes-8"), RenderConfig::new(Mode::Restir, 2)).unwrap();
    assert!(reuse.preview_frame(0).is_err());
}

#[test]
fn training_stops_after_the_cap() {
    let mut cfg = small_batch(Mode::Nls, 4);
    cfg.train_frames = Some(2);
    let mut r = Renderer::new(tiny("boxes-8"), cfg).unwrap();
    let losses: Vec<_> = (0..4).map(|_| r.render_frame().unwrap().loss).collect();
    assert!(losses[0].is_some() && losses[1].is_some());
    assert!(losses[2].is_none() && losses[3].is_none());
}

#[test]
fn per_light_modes_reject_many_lights() {
    let scene = tiny("rooms-1k");
    assert!(Renderer::new(scene.clone(), RenderConfig::new(Mode::Nls, 1)).is_err());
    assert!(Renderer::new(scene, small_batch(Mode::Cnvc, 1)).is_ok());
}

#[test]
fn light_count_is_fixed_while_rendering() {
    let scene = tiny("boxes-8");
    let mut r = Renderer::new(scene.clone(), RenderConfig::new(Mode::Uniform, 1)).unwrap();
    assert!(r.set_lights(scene.lights[..4].to_vec()).is_err());
    assert!(r.set_lights(scene.lights.clone()).is_ok());
}

#[test]
fn neural_di_never_exceeds_the_unshadowed_sum() {
    let mut r = Renderer::new(tiny("boxes-8"), small_batch(Mode::NeuralDi, 1)).unwrap();
    for _ in 0..3 {
        r.render_frame().unwrap();
    }
    let img = r.image().to_vec3();
    let scene = r.scene().clone();
    for (pixel, p) in r.gbuffer().points.iter().enumerate() {
        let bound = p.map_or(Vec3::ZERO, |sp| scene.lights.iter().fold(Vec3::ZERO, |a, l| a + unshadowed_rgb(&sp, l)));
        for c in 0..3 {
            assert!(img[pixel][c] <= bound[c] * (1.0 + 1e-5) + 1e-9);
        }
    }
}

#[test]
fn unbiased_modes_approach_the_reference() {
    let scene = tiny("boxes-8");
    let reference = reference_render(&scene, 256, 99);
    for mode in [Mode::Uniform, Mode::Ris, Mode::Nls, Mode::Cnvc] {
        let mut cfg = small_batch(mode, 1);
        cfg.train_frames = Some(16);
        let mut r = Renderer::new(scene.clone(), cfg).unwrap();
        let mut errors = Vec::new();
        for frame in 1..=256 {
            r.render_frame().unwrap();
            if frame == 16 || frame == 256 {
                errors.push(rmse(&r.image(), &reference).unwrap());
            }
        }
        assert!(errors[1] < errors[0], "{mode}: {errors:?}");
    }
}

#[test]
fn renders_are_reproducible() {
    let run = |seed| {
        let mut r = Renderer::new(tiny("boxes-8"), small_batch(Mode::CnvcRestir, seed)).unwrap();
        for _ in 0..3 {
            r.render_frame().unwrap();
        }
        r.image()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}
