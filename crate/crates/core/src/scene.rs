//! Scene description, JSON loading and emitter queries.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bvh::{Bvh, SceneHit};
use crate::error::{Error, Result};
use crate::geometry::{Ray, Surface, Triangle};
use crate::math::{Aabb, Vec3};

/// Shadow rays are shortened at both ends by this fraction of the scene diagonal.
pub const SHADOW_EPSILON_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraDesc {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialDesc {
    pub albedo: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDesc {
    pub material: usize,
    pub triangles: Vec<[Vec3; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LightDesc {
    Rect { corner: Vec3, edge_u: Vec3, edge_v: Vec3, radiance: [f64; 3] },
    Point { position: Vec3, intensity: [f64; 3] },
}

/// On-disk scene schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDesc {
    pub camera: CameraDesc,
    pub materials: Vec<MaterialDesc>,
    pub meshes: Vec<MeshDesc>,
    pub lights: Vec<LightDesc>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightShape {
    Rect { corner: Vec3, edge_u: Vec3, edge_v: Vec3 },
    Point { position: Vec3 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Light {
    pub shape: LightShape,
    /// Emitted radiance for area lights, intensity for point lights (linear RGB).
    pub radiance: Vec3,
    /// Zero for point lights.
    pub area: f64,
    /// Emitting side of an area light; zero for point lights.
    pub normal: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSample {
    pub point: Vec3,
    /// Area-measure density; 1 for point lights by convention.
    pub pdf_area: f64,
}

impl Light {
    pub fn rect(corner: Vec3, edge_u: Vec3, edge_v: Vec3, radiance: Vec3) -> Self {
        let n = edge_u.cross(edge_v);
        Light {
            shape: LightShape::Rect { corner, edge_u, edge_v },
            radiance,
            area: n.length(),
            normal: n.normalize(),
        }
    }

    pub fn point(position: Vec3, intensity: Vec3) -> Self {
        Light { shape: LightShape::Point { position }, radiance: intensity, area: 0.0, normal: Vec3::ZERO }
    }

    pub fn is_point(&self) -> bool {
        matches!(self.shape, LightShape::Point { .. })
    }

    pub fn center(&self) -> Vec3 {
        match self.shape {
            LightShape::Rect { corner, edge_u, edge_v } => corner + (edge_u + edge_v) * 0.5,
            LightShape::Point { position } => position,
        }
    }

    /// Polygon vertices in emission-consistent winding; empty for point lights.
    pub fn vertices(&self) -> Vec<Vec3> {
        match self.shape {
            LightShape::Rect { corner, edge_u, edge_v } => {
                vec![corner, corner + edge_u, corner + edge_u + edge_v, corner + edge_v]
            }
            LightShape::Point { .. } => Vec::new(),
        }
    }

    /// Uniform point on the emitter.
    pub fn sample(&self, u1: f64, u2: f64) -> LightSample {
        match self.shape {
            LightShape::Rect { corner, edge_u, edge_v } => {
                LightSample { point: corner + edge_u * u1 + edge_v * u2, pdf_area: 1.0 / self.area }
            }
            LightShape::Point { position } => LightSample { point: position, pdf_area: 1.0 },
        }
    }

    /// The two triangles of a rect light, tagged with its id.
    pub fn triangles(&self, id: u32) -> Vec<Triangle> {
        match self.shape {
            LightShape::Rect { corner, edge_u, edge_v } => {
                let s = Surface::Light(id);
                let (a, b, c, d) = (corner, corner + edge_u, corner + edge_u + edge_v, corner + edge_v);
                vec![Triangle::new(a, b, c, s), Triangle::new(a, c, d, s)]
            }
            LightShape::Point { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub albedo: Vec3,
}

impl Material {
    /// Lambertian BRDF value ρ/π.
    pub fn brdf(&self) -> Vec3 {
        self.albedo / PI
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
    tan_half: f64,
}

impl Camera {
    pub fn new(desc: &CameraDesc) -> Result<Self> {
        if !(desc.fov_deg > 0.0 && desc.fov_deg < 180.0) {
            return Err(Error::invalid("camera.fov_deg", format!("{} is outside (0, 180)", desc.fov_deg)));
        }
        if desc.width < 1 || desc.height < 1 {
            return Err(Error::invalid("camera.width/height", "image dimensions must be at least 1"));
        }
        let forward = desc.look_at - desc.position;
        if !(forward.length() > 0.0) {
            return Err(Error::invalid("camera.look_at", "coincides with camera.position"));
        }
        let forward = forward.normalize();
        let right = forward.cross(desc.up);
        if !(right.length() > 1e-9) {
            return Err(Error::invalid("camera.up", "parallel to the view direction"));
        }
        let right = right.normalize();
        let up = right.cross(forward);
        Ok(Camera {
            position: desc.position,
            forward,
            right,
            up,
            fov_deg: desc.fov_deg,
            width: desc.width,
            height: desc.height,
            tan_half: (desc.fov_deg.to_radians() * 0.5).tan(),
        })
    }

    pub fn with_resolution(&self, width: u32, height: u32) -> Camera {
        Camera { width, height, ..*self }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    /// Pinhole ray through sub-pixel position `(px + u1, py + u2)`; row 0 is the top.
    pub fn primary_ray(&self, px: u32, py: u32, u1: f64, u2: f64) -> Ray {
        let sx = ((px as f64 + u1) / self.width as f64) * 2.0 - 1.0;
        let sy = 1.0 - ((py as f64 + u2) / self.height as f64) * 2.0;
        let dir = self.forward
            + self.right * (sx * self.tan_half * self.aspect())
            + self.up * (sy * self.tan_half);
        Ray::new(self.position, dir)
    }
}

/// Surface attributes at a ray hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub position: Vec3,
    /// Geometric normal flipped to face the incoming ray.
    pub normal: Vec3,
    pub albedo: Vec3,
    pub t: f64,
    pub surface: Surface,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub triangles: Vec<Triangle>,
    pub materials: Vec<Material>,
    pub lights: Vec<Light>,
    pub camera: Camera,
    pub bounds: Aabb,
    bvh: Bvh,
    shadow_eps: f64,
}

impl Scene {
    pub fn load(path: impl AsRef<Path>) -> Result<Scene> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scene::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        let desc: SceneDesc = serde_json::from_str(text).map_err(|e| Error::SceneParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Scene::from_desc(&desc)
    }

    pub fn from_desc(desc: &SceneDesc) -> Result<Scene> {
        let camera = Camera::new(&desc.camera)?;
        let mut materials = Vec::with_capacity(desc.materials.len());
        for (i, m) in desc.materials.iter().enumerate() {
            if m.albedo.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
                return Err(Error::invalid(format!("materials[{i}].albedo"), "components must lie in [0, 1]"));
            }
            materials.push(Material { albedo: m.albedo.into() });
        }

        let mut triangles = Vec::new();
        for (mi, mesh) in desc.meshes.iter().enumerate() {
            if mesh.material >= materials.len() {
                return Err(Error::invalid(
                    format!("meshes[{mi}].material"),
                    format!("index {} but only {} materials", mesh.material, materials.len()),
                ));
            }
            for (ti, t) in mesh.triangles.iter().enumerate() {
                let tri = Triangle::new(t[0], t[1], t[2], Surface::Material(mesh.material as u32));
                if !(t[0].is_finite() && t[1].is_finite() && t[2].is_finite()) || tri.is_degenerate() {
                    return Err(Error::invalid(format!("meshes[{mi}].triangles[{ti}]"), "degenerate triangle"));
                }
                triangles.push(tri);
            }
        }

        if desc.lights.is_empty() {
            return Err(Error::invalid("lights", "scene must contain at least one light"));
        }
        let mut lights = Vec::with_capacity(desc.lights.len());
        for (li, l) in desc.lights.iter().enumerate() {
            let light = match *l {
                LightDesc::Rect { corner, edge_u, edge_v, radiance } => {
                    let light = Light::rect(corner, edge_u, edge_v, radiance.into());
                    if !(light.area > 1e-14) || !light.area.is_finite() {
                        return Err(Error::invalid(format!("lights[{li}]"), "rect light has zero area"));
                    }
                    light
                }
                LightDesc::Point { position, intensity } => Light::point(position, intensity.into()),
            };
            if !light.radiance.is_finite() || light.radiance.min_component() < 0.0 {
                return Err(Error::invalid(format!("lights[{li}].radiance"), "must be finite and non-negative"));
            }
            triangles.extend(light.triangles(li as u32));
            lights.push(light);
        }

        Ok(Scene::assemble(triangles, materials, lights, camera))
    }

    fn assemble(triangles: Vec<Triangle>, materials: Vec<Material>, lights: Vec<Light>, camera: Camera) -> Scene {
        let bounds = triangles
            .iter()
            .flat_map(|t| [t.v0, t.v1, t.v2])
            .chain(lights.iter().map(Light::center))
            .fold(Aabb::EMPTY, Aabb::grow);
        let bvh = Bvh::build(&triangles);
        let shadow_eps = SHADOW_EPSILON_SCALE * bounds.diagonal().max(1e-6);
        Scene { triangles, materials, lights, camera, bounds, bvh, shadow_eps }
    }

    /// Replaces the emitters, keeping geometry and camera. Used for scripted light changes.
    pub fn with_lights(&self, lights: Vec<Light>) -> Scene {
        let mut triangles: Vec<Triangle> =
            self.triangles.iter().copied().filter(|t| matches!(t.surface, Surface::Material(_))).collect();
        for (i, l) in lights.iter().enumerate() {
            triangles.extend(l.triangles(i as u32));
        }
        Scene::assemble(triangles, self.materials.clone(), lights, self.camera)
    }

    pub fn with_resolution(&self, width: u32, height: u32) -> Scene {
        let mut s = self.clone();
        s.camera = self.camera.with_resolution(width, height);
        s
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn shadow_epsilon(&self) -> f64 {
        self.shadow_eps
    }

    pub fn light_count(&self) -> usize {
        self.lights.len()
    }

    pub fn intersect_raw(&self, ray: &Ray) -> Option<SceneHit> {
        self.bvh.intersect(ray, &self.triangles)
    }

    pub fn intersect(&self, ray: &Ray) -> Option<SurfaceHit> {
        let hit = self.intersect_raw(ray)?;
        let tri = &self.triangles[hit.triangle];
        let mut normal = tri.normal();
        if normal.dot(ray.dir) > 0.0 {
            normal = -normal;
        }
        let albedo = match tri.surface {
            Surface::Material(m) => self.materials[m as usize].albedo,
            Surface::Light(_) => Vec3::ZERO,
        };
        Some(SurfaceHit { position: ray.at(hit.t), normal, albedo, t: hit.t, surface: tri.surface })
    }

    /// Binary visibility of the open segment between `x` and `y`.
    pub fn visibility(&self, x: Vec3, y: Vec3) -> f64 {
        let d = y - x;
        let dist = d.length();
        let eps = self.shadow_eps;
        if dist <= 2.0 * eps {
            return 1.0;
        }
        let dir = d / dist;
        let ray = Ray { origin: x + dir * eps, dir, t_min: 0.0, t_max: dist - 2.0 * eps };
        if self.bvh.occluded(&ray, &self.triangles) {
            0.0
        } else {
            1.0
        }
    }
}

/// Geometry term `cosθx · cosθy / |x - y|²`, clamped below the horizon.
/// A zero `n_y` marks a point light, whose cosine factor is dropped.
pub fn geometry_term(x: Vec3, n_x: Vec3, y: Vec3, n_y: Vec3) -> f64 {
    let d = y - x;
    let dist2 = d.length_squared();
    if dist2 == 0.0 {
        return 0.0;
    }
    let w = d / dist2.sqrt();
    let cos_x = n_x.dot(w).max(0.0);
    let cos_y = if n_y == Vec3::ZERO { 1.0 } else { (-n_y.dot(w)).max(0.0) };
    cos_x * cos_y / dist2
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    Scene::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_json() -> &'static str {
        r#"{
          "camera": {"position":[0,1,3], "look_at":[0,0,0], "up":[0,1,0], "fov_deg":60, "width":16, "height":9},
          "materials": [{"albedo":[0.8,0.8,0.8]}],
          "meshes": [{"material":0, "triangles":[
              [[-1,0,-1],[1,0,1],[1,0,-1]],
              [[-1,0,-1],[-1,0,1],[1,0,1]]]}],
          "lights": [{"type":"rect","corner":[-0.25,1,-0.25],"edge_u":[0.5,0,0],"edge_v":[0,0,0.5],"radiance":[5,5,5]}]
        }"#
    }

    #[test]
    fn loads_minimal_scene() {
        let s = Scene::from_json(minimal_json()).unwrap();
        assert_eq!(s.lights.len(), 1);
        assert_eq!(s.triangles.len(), 4);
        assert!((s.lights[0].area - 0.25).abs() < 1e-12);
        // edge_u × edge_v points down, towards the floor
        assert!((s.lights[0].normal - Vec3::new(0.0, -1.0, 0.0)).length() < 1e-12);
        for t in &s.triangles {
            assert!(s.bounds.contains(t.v0) && s.bounds.contains(t.v1) && s.bounds.contains(t.v2));
        }
    }

    #[test]
    fn zero_lights_rejected() {
        let text = minimal_json().replace(
            r#"[{"type":"rect","corner":[-0.25,1,-0.25],"edge_u":[0.5,0,0],"edge_v":[0,0,0.5],"radiance":[5,5,5]}]"#,
            "[]",
        );
        match Scene::from_json(&text) {
            Err(Error::SceneValidation { field, .. }) => assert_eq!(field, "lights"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_light_rejected() {
        let text = minimal_json().replace(r#""edge_v":[0,0,0.5]"#, r#""edge_v":[1,0,0]"#);
        assert!(matches!(Scene::from_json(&text), Err(Error::SceneValidation { .. })));
    }

    #[test]
    fn bad_fov_rejected() {
        let text = minimal_json().replace(r#""fov_deg":60"#, r#""fov_deg":180"#);
        match Scene::from_json(&text) {
            Err(Error::SceneValidation { field, .. }) => assert_eq!(field, "camera.fov_deg"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_location() {
        let text = minimal_json().replace(r#""width":16"#, r#""width":"#);
        match Scene::from_json(&text) {
            Err(Error::SceneParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn center_ray_follows_look_at() {
        let s = Scene::from_json(minimal_json()).unwrap();
        let cam = s.camera.with_resolution(17, 9);
        let r = cam.primary_ray(8, 4, 0.5, 0.5);
        assert!((r.dir - cam.forward).length() < 1e-12);
    }

    #[test]
    fn corner_rays_span_the_frustum() {
        let s = Scene::from_json(minimal_json()).unwrap();
        let cam = s.camera;
        let half_v = (cam.fov_deg * 0.5).to_radians();
        let half_h = (half_v.tan() * cam.aspect()).atan();
        let r = cam.primary_ray(0, 0, 0.0, 0.0);
        let vert = r.dir.dot(cam.up).atan2(r.dir.dot(cam.forward));
        let horiz = r.dir.dot(cam.right).atan2(r.dir.dot(cam.forward));
        assert!((vert - half_v).abs() < 1e-6);
        assert!((horiz + half_h).abs() < 1e-6);
        let r = cam.primary_ray(cam.width - 1, cam.height - 1, 1.0, 1.0);
        let vert = r.dir.dot(cam.up).atan2(r.dir.dot(cam.forward));
        let horiz = r.dir.dot(cam.right).atan2(r.dir.dot(cam.forward));
        assert!((vert + half_v).abs() < 1e-6);
        assert!((horiz - half_h).abs() < 1e-6);
    }

    #[test]
    fn geometry_term_cases() {
        let x = Vec3::ZERO;
        let y = Vec3::new(0.0, 1.0, 0.0);
        let up = Vec3::new(0.0, 1.0, 0.0);
        assert!((geometry_term(x, up, y, -up) - 1.0).abs() < 1e-12);
        assert_eq!(geometry_term(x, -up, y, -up), 0.0);
        let g1 = geometry_term(x, up, y, -up);
        let g2 = geometry_term(x, up, y * 2.0, -up);
        assert!((g2 - g1 / 4.0).abs() < 1e-12);
        // point light drops the emitter cosine
        assert!((geometry_term(x, up, y * 2.0, Vec3::ZERO) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn visibility_blocked_by_quad() {
        let s = Scene::from_json(minimal_json()).unwrap();
        let above = Vec3::new(0.0, 0.5, 0.0);
        let below = Vec3::new(0.0, -0.5, 0.0);
        assert_eq!(s.visibility(above, below), 0.0);
        assert_eq!(s.visibility(below, above), 0.0);
        assert_eq!(s.visibility(above, Vec3::new(0.3, 0.7, 0.1)), 1.0);
    }
}
