//! Procedurally built test scenes. The same descriptions are shipped as
//! JSON under `scenes/`.
//!
//! * `boxes-8` and `boxes-32`: a floor split into a 2×2 grid of cells by
//!   walls, with a box in each cell and 8 or 32 downward-facing rect
//!   lights hanging inside the cells below the wall tops, so that
//!   every light is hidden from three quarters of the floor.
//! * `rooms-1k`: three rooms in a row joined by doorways, with 1024 small
//!   ceiling lights. From the camera room most lights are hidden behind
//!   walls.

use crate::math::Vec3;
use crate::scene::{CameraDesc, LightDesc, MaterialDesc, MeshDesc, SceneDesc};

pub const PRESET_NAMES: [&str; 3] = ["boxes-8", "boxes-32", "rooms-1k"];

/// Builds a named preset, or `None` for an unknown name.
pub fn preset(name: &str) -> Option<SceneDesc> {
    match name {
        "boxes-8" => Some(boxes(8)),
        "boxes-32" => Some(boxes(32)),
        "rooms-1k" => Some(rooms()),
        _ => None,
    }
}

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

/// Two triangles spanning `corner`, `corner + a`, `corner + a + b`, `corner + b`.
fn quad(corner: Vec3, a: Vec3, b: Vec3) -> [[Vec3; 3]; 2] {
    [[corner, corner + a, corner + a + b], [corner, corner + a + b, corner + b]]
}

/// Axis-aligned box resting on the floor, without its bottom face.
fn open_box(min: Vec3, max: Vec3) -> Vec<[Vec3; 3]> {
    let e = max - min;
    let (dx, dy, dz) = (v(e.x, 0.0, 0.0), v(0.0, e.y, 0.0), v(0.0, 0.0, e.z));
    let faces = [
        quad(v(min.x, max.y, min.z), dx, dz),
        quad(min, dx, dy),
        quad(v(min.x, min.y, max.z), dx, dy),
        quad(min, dz, dy),
        quad(v(max.x, min.y, min.z), dz, dy),
    ];
    faces.into_iter().flatten().collect()
}

/// Downward-facing square light centred at `center`.
fn ceiling_light(center: Vec3, size: f64, radiance: [f64; 3]) -> LightDesc {
    let h = size * 0.5;
    LightDesc::Rect {
        corner: center - v(h, 0.0, h),
        edge_u: v(size, 0.0, 0.0),
        edge_v: v(0.0, 0.0, size),
        radiance,
    }
}

fn hue(i: usize, n: usize, scale: f64) -> [f64; 3] {
    let t = i as f64 / n as f64 * std::f64::consts::TAU;
    let c = |phase: f64| scale * (0.6 + 0.4 * (t + phase).cos());
    [c(0.0), c(2.1), c(4.2)]
}

fn boxes(light_count: usize) -> SceneDesc {
    const WALL_HEIGHT: f64 = 2.6;
    let materials = vec![
        MaterialDesc { albedo: [0.7, 0.7, 0.7] },
        MaterialDesc { albedo: [0.6, 0.55, 0.5] },
        MaterialDesc { albedo: [0.75, 0.3, 0.25] },
        MaterialDesc { albedo: [0.25, 0.5, 0.75] },
    ];
    let mut floor = Vec::new();
    floor.extend(quad(v(-5.0, 0.0, -5.0), v(10.0, 0.0, 0.0), v(0.0, 0.0, 10.0)));
    // walls split the floor into a 2×2 grid of cells
    let mut walls = Vec::new();
    for c in [-5.0, 0.0, 5.0] {
        walls.extend(quad(v(c, 0.0, -5.0), v(0.0, 0.0, 10.0), v(0.0, WALL_HEIGHT, 0.0)));
        walls.extend(quad(v(-5.0, 0.0, c), v(10.0, 0.0, 0.0), v(0.0, WALL_HEIGHT, 0.0)));
    }
    // a box in the middle of each cell
    let mut red = Vec::new();
    let mut blue = Vec::new();
    for cell in 0..4 {
        let cx = -2.5 + 5.0 * (cell % 2) as f64;
        let cz = -2.5 + 5.0 * (cell / 2) as f64;
        let height = 0.6 + 0.1 * cell as f64;
        let target = if cell % 2 == 0 { &mut red } else { &mut blue };
        target.extend(open_box(v(cx - 0.45, 0.0, cz - 0.45), v(cx + 0.45, height, cz + 0.45)));
    }
    let meshes = vec![
        MeshDesc { material: 0, triangles: floor },
        MeshDesc { material: 1, triangles: walls },
        MeshDesc { material: 2, triangles: red },
        MeshDesc { material: 3, triangles: blue },
    ];

    // the lights hang inside the cells below the wall tops, so each one is
    // hidden from the other three cells
    let per_cell = light_count / 4;
    let (size, power) = if light_count == 8 { (0.6, 10.0) } else { (0.4, 12.0) };
    let mut lights = Vec::with_capacity(light_count);
    for i in 0..light_count {
        let (cell, slot) = (i / per_cell, i % per_cell);
        let (cx, cz) = (-2.5 + 5.0 * (cell % 2) as f64, -2.5 + 5.0 * (cell / 2) as f64);
        let angle = std::f64::consts::TAU * (slot as f64 + 0.25 * cell as f64) / per_cell as f64;
        let radius = if per_cell > 2 && slot % 2 == 1 { 1.0 } else { 1.6 };
        let y = 1.9 + 0.1 * ((i * 3) % 4) as f64;
        let c = v(cx + radius * angle.cos(), y, cz + radius * angle.sin());
        lights.push(ceiling_light(c, size, hue(i, light_count, power)));
    }

    SceneDesc {
        camera: CameraDesc {
            position: v(0.0, 12.0, 6.0),
            look_at: v(0.0, 0.0, 0.5),
            up: v(0.0, 1.0, 0.0),
            fov_deg: 55.0,
            width: 320,
            height: 180,
        },
        materials,
        meshes,
        lights,
    }
}

fn rooms() -> SceneDesc {
    const HEIGHT: f64 = 3.0;
    const DOOR_HALF: f64 = 0.75;
    const DOOR_TOP: f64 = 2.2;
    let materials = vec![
        MaterialDesc { albedo: [0.7, 0.7, 0.7] },
        MaterialDesc { albedo: [0.65, 0.6, 0.55] },
        MaterialDesc { albedo: [0.5, 0.5, 0.55] },
    ];
    let mut floor = Vec::new();
    floor.extend(quad(v(-9.0, 0.0, -3.0), v(18.0, 0.0, 0.0), v(0.0, 0.0, 6.0)));
    let mut ceiling = Vec::new();
    ceiling.extend(quad(v(-9.0, HEIGHT, -3.0), v(18.0, 0.0, 0.0), v(0.0, 0.0, 6.0)));
    let mut walls = Vec::new();
    walls.extend(quad(v(-9.0, 0.0, -3.0), v(18.0, 0.0, 0.0), v(0.0, HEIGHT, 0.0)));
    walls.extend(quad(v(-9.0, 0.0, 3.0), v(18.0, 0.0, 0.0), v(0.0, HEIGHT, 0.0)));
    walls.extend(quad(v(-9.0, 0.0, -3.0), v(0.0, 0.0, 6.0), v(0.0, HEIGHT, 0.0)));
    walls.extend(quad(v(9.0, 0.0, -3.0), v(0.0, 0.0, 6.0), v(0.0, HEIGHT, 0.0)));
    for x in [-3.0, 3.0] {
        let side = 3.0 - DOOR_HALF;
        walls.extend(quad(v(x, 0.0, -3.0), v(0.0, 0.0, side), v(0.0, HEIGHT, 0.0)));
        walls.extend(quad(v(x, 0.0, DOOR_HALF), v(0.0, 0.0, side), v(0.0, HEIGHT, 0.0)));
        walls.extend(quad(v(x, DOOR_TOP, -DOOR_HALF), v(0.0, 0.0, 2.0 * DOOR_HALF), v(0.0, HEIGHT - DOOR_TOP, 0.0)));
    }
    let meshes = vec![
        MeshDesc { material: 0, triangles: floor },
        MeshDesc { material: 1, triangles: ceiling },
        MeshDesc { material: 2, triangles: walls },
    ];

    // 256 + 512 + 256 lights on the three ceilings
    let rooms = [(-9.0, 16, [1.0, 0.8, 0.6], 3.0), (-3.0, 32, [0.9, 0.9, 0.9], 1.5), (3.0, 16, [0.6, 0.8, 1.0], 3.0)];
    let mut lights = Vec::with_capacity(1024);
    for (x0, nz, tint, scale) in rooms {
        for iz in 0..nz {
            for ix in 0..16 {
                let x = x0 + 6.0 * (ix as f64 + 0.5) / 16.0;
                let z = -3.0 + 6.0 * (iz as f64 + 0.5) / nz as f64;
                let radiance = tint.map(|t| t * scale);
                lights.push(ceiling_light(v(x, HEIGHT - 0.02, z), 0.12, radiance));
            }
        }
    }

    SceneDesc {
        camera: CameraDesc {
            position: v(-8.5, 1.6, 2.2),
            look_at: v(0.0, 1.0, 0.0),
            up: v(0.0, 1.0, 0.0),
            fov_deg: 70.0,
            width: 320,
            height: 180,
        },
        materials,
        meshes,
        lights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Scene;

    #[test]
    fn presets_build_valid_scenes() {
        for (name, count) in PRESET_NAMES.iter().zip([8, 32, 1024]) {
            let scene = Scene::from_desc(&preset(name).unwrap()).unwrap();
            assert_eq!(scene.lights.len(), count, "{name}");
            for l in &scene.lights {
                assert!((l.normal - v(0.0, -1.0, 0.0)).length() < 1e-12);
            }
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn camera_sees_geometry() {
        for name in PRESET_NAMES {
            let scene = Scene::from_desc(&preset(name).unwrap()).unwrap();
            let cam = &scene.camera;
            let hit = scene.intersect(&cam.primary_ray(cam.width / 2, cam.height / 2, 0.5, 0.5));
            assert!(hit.is_some(), "{name}");
        }
    }
}
