//! Tabletop placement and image rendering: a side RGB-D camera and the orthographic
//! top-down depth image used for grasp selection.

use std::f64::consts::PI;

use nalgebra::{Point3, Unit, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Ray, TriMesh};

pub const TABLE_GREY: u8 = 100;
pub const BACKGROUND_GREY: u8 = 30;
pub const AMBIENT: f64 = 0.2;
pub const DIFFUSE: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("object footprint {footprint:.4} m exceeds workspace side {side:.4} m")]
    DoesNotFit { footprint: f64, side: f64 },
    #[error("invalid scene config: {0}")]
    BadConfig(String),
}

/// Axis-aligned rectangle on the table plane z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Workspace {
    pub fn centered(width: f64, depth: f64) -> Self {
        Self {
            x_min: -width / 2.0,
            x_max: width / 2.0,
            y_min: -depth / 2.0,
            y_max: depth / 2.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn depth(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::new(
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
            0.0,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// Pinhole camera. Local axes: +z forward, +x right, +y down (image rows grow downward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    pub vfov_deg: f64,
    /// Camera-to-world.
    #[serde(with = "pose_serde")]
    pub pose: Pose,
    /// Depth written for pixels that see no object (m).
    pub far: f64,
}

impl CameraConfig {
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        width: usize,
        height: usize,
        vfov_deg: f64,
        far: f64,
    ) -> Self {
        let f = (target - eye).normalize();
        let mut up = Vector3::z();
        if f.cross(&up).norm() < 1e-9 {
            up = Vector3::y();
        }
        let x = f.cross(&up).normalize();
        let y = f.cross(&x);
        Self {
            width,
            height,
            vfov_deg,
            pose: Pose::from_axes(x, y, f, eye.coords),
            far,
        }
    }

    /// Desk default: 45° elevation, 0.45 m from the workspace center, looking along +x.
    pub fn side_default(ws: &Workspace) -> Self {
        let c = ws.center();
        let el = 45f64.to_radians();
        let eye = c + Vector3::new(-0.45 * el.cos(), 0.0, 0.45 * el.sin());
        Self::look_at(eye, c, 64, 64, 45.0, 2.0)
    }

    /// World-space ray through the center of pixel (u, v).
    pub fn pixel_ray(&self, u: usize, v: usize) -> Ray {
        let s = (self.vfov_deg.to_radians() / 2.0).tan() / (self.height as f64 / 2.0);
        let x = (u as f64 + 0.5 - self.width as f64 / 2.0) * s;
        let y = (v as f64 + 0.5 - self.height as f64 / 2.0) * s;
        let dir = self.pose.apply_vector(&Vector3::new(x, y, 1.0));
        Ray::new(Point3::from(self.pose.translation), dir)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopdownConfig {
    pub width: usize,
    pub height: usize,
    /// Height of the orthographic image plane above the table (m).
    pub h0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub workspace: Workspace,
    pub camera: CameraConfig,
    pub topdown: TopdownConfig,
    /// Unit vector pointing toward the light.
    pub light_direction: Vector3<f64>,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let workspace = Workspace::centered(0.30, 0.30);
        Self {
            workspace,
            camera: CameraConfig::side_default(&workspace),
            topdown: TopdownConfig {
                width: 96,
                height: 96,
                h0: 0.5,
            },
            light_direction: Vector3::new(-0.5, -0.3, 1.0).normalize(),
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::BadConfig(m));
        if !(self.workspace.width() > 0.0 && self.workspace.depth() > 0.0) {
            return bad("workspace area must be positive".into());
        }
        let c = &self.camera;
        if c.width < 16 || c.height < 16 {
            return bad(format!("camera resolution {}x{} below 16x16", c.width, c.height));
        }
        if !(c.vfov_deg > 10.0 && c.vfov_deg < 170.0) {
            return bad(format!("camera fov {} outside (10, 170)", c.vfov_deg));
        }
        if !(c.far > 0.0) {
            return bad("camera far must be positive".into());
        }
        let t = &self.topdown;
        if t.width < 16 || t.height < 16 {
            return bad(format!("topdown resolution {}x{} below 16x16", t.width, t.height));
        }
        if !(t.h0 > 0.0) {
            return bad("topdown h0 must be positive".into());
        }
        if (self.light_direction.norm() - 1.0).abs() > 1e-6 {
            return bad("light direction must be a unit vector".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SceneState<'a> {
    pub object_id: &'a str,
    pub mesh: &'a TriMesh,
    /// Object-to-world.
    pub pose: Pose,
}

impl SceneState<'_> {
    /// Nearest hit of a world-space ray; the hit is reported in world coordinates.
    pub fn raycast_world(&self, ray: &Ray) -> Option<crate::geometry::Hit> {
        let inv = self.pose.inverse();
        let local = Ray {
            origin: inv.apply_point(&ray.origin),
            direction: inv.apply_unit(&ray.direction),
        };
        self.mesh.raycast(&local).map(|mut h| {
            h.point = self.pose.apply_point(&h.point);
            h.normal = self.pose.apply_vector(&h.normal);
            h
        })
    }
}

/// Radius of the smallest origin-centered circle containing the horizontal footprint.
pub fn footprint_radius(mesh: &TriMesh) -> f64 {
    mesh.vertices()
        .iter()
        .map(|v| v.x.hypot(v.y))
        .fold(0.0, f64::max)
}

/// Uniform position and yaw on the table, resting at z such that the lowest vertex touches it.
pub fn place_object<R: Rng + ?Sized>(
    mesh: &TriMesh,
    cfg: &SceneConfig,
    rng: &mut R,
) -> Result<Pose, SceneError> {
    let ws = &cfg.workspace;
    let footprint = 2.0 * footprint_radius(mesh);
    let side = ws.width().min(ws.depth());
    if footprint > side {
        return Err(SceneError::DoesNotFit { footprint, side });
    }
    let x = ws.x_min + rng.random::<f64>() * ws.width();
    let y = ws.y_min + rng.random::<f64>() * ws.depth();
    let yaw = rng.random::<f64>() * 2.0 * PI;
    Ok(resting_pose(mesh, x, y, yaw))
}

/// Yaw-only pose with the lowest vertex at z = 0.
pub fn resting_pose(mesh: &TriMesh, x: f64, y: f64, yaw: f64) -> Pose {
    let min_z = mesh
        .vertices()
        .iter()
        .map(|v| v.z)
        .fold(f64::INFINITY, f64::min);
    Pose::from_yaw(yaw, Vector3::new(x, y, -min_z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major, 3 bytes per pixel.
    pub rgb: Vec<u8>,
    /// Row-major distance along each pixel ray (m).
    pub depth: Vec<f32>,
}

pub fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

pub fn shade(normal: &Vector3<f64>, light: &Vector3<f64>) -> u8 {
    let s = AMBIENT + DIFFUSE * normal.dot(light).max(0.0);
    round_half_up(255.0 * s).clamp(0.0, 255.0) as u8
}

pub fn render_camera(scene: Option<&SceneState>, cfg: &SceneConfig) -> CameraFrame {
    let cam = &cfg.camera;
    let n = cam.width * cam.height;
    let mut rgb = Vec::with_capacity(3 * n);
    let mut depth = Vec::with_capacity(n);
    for v in 0..cam.height {
        for u in 0..cam.width {
            let ray = cam.pixel_ray(u, v);
            let hit = scene.and_then(|s| s.raycast_world(&ray));
            let (grey, d) = match hit {
                Some(h) => (shade(&h.normal, &cfg.light_direction), h.t.min(cam.far)),
                None if ray.direction.z < 0.0 && ray.origin.z > 0.0 => (TABLE_GREY, cam.far),
                None => (BACKGROUND_GREY, cam.far),
            };
            rgb.extend([grey; 3]);
            depth.push(d as f32);
        }
    }
    CameraFrame {
        width: cam.width,
        height: cam.height,
        rgb,
        depth,
    }
}

/// Orthographic depth below the plane z = h0; the window spans the workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub h0: f64,
    pub workspace: Workspace,
    /// Row-major; row index grows with y, column index with x.
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn pitch_x(&self) -> f64 {
        self.workspace.width() / self.width as f64
    }

    pub fn pitch_y(&self) -> f64 {
        self.workspace.depth() / self.height as f64
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.workspace.x_min + (col as f64 + 0.5) * self.pitch_x(),
            self.workspace.y_min + (row as f64 + 0.5) * self.pitch_y(),
        )
    }

    /// Continuous pixel coordinates (col, row) of a world point.
    pub fn world_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.workspace.x_min) / self.pitch_x() - 0.5,
            (y - self.workspace.y_min) / self.pitch_y() - 0.5,
        )
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.data[row * self.width + col]
    }

    /// Height of the top surface above the table at a pixel (0 for background).
    pub fn height_at(&self, col: usize, row: usize) -> f64 {
        self.h0 - self.get(col, row) as f64
    }

    pub fn is_object(&self, col: usize, row: usize) -> bool {
        self.height_at(col, row) > 1e-6
    }

    pub fn object_pixels(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| (c, r)))
            .filter(|&(c, r)| self.is_object(c, r))
            .collect()
    }
}

pub fn render_topdown_depth(scene: Option<&SceneState>, cfg: &SceneConfig) -> DepthImage {
    let td = &cfg.topdown;
    let mut img = DepthImage {
        width: td.width,
        height: td.height,
        h0: td.h0,
        workspace: cfg.workspace,
        data: vec![td.h0 as f32; td.width * td.height],
    };
    if let Some(s) = scene {
        let down = Vector3::new(0.0, 0.0, -1.0);
        for r in 0..td.height {
            for c in 0..td.width {
                let (x, y) = img.pixel_center(c, r);
                let ray = Ray {
                    origin: Point3::new(x, y, td.h0),
                    direction: Unit::new_unchecked(down),
                };
                if let Some(h) = s.raycast_world(&ray) {
                    img.data[r * td.width + c] = h.t.min(td.h0) as f32;
                }
            }
        }
    }
    img
}

/// Binary PGM/PPM encoders for inspection output.
pub mod export {
    use super::{CameraFrame, DepthImage};

    pub fn pgm8(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
        let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
        out.extend_from_slice(pixels);
        out
    }

    /// 16-bit big-endian PGM of values scaled so that `max_value` maps to 65535.
    pub fn pgm16(width: usize, height: usize, values: &[f32], max_value: f64) -> Vec<u8> {
        let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
        for &v in values {
            let q = super::round_half_up(v as f64 / max_value * 65535.0).clamp(0.0, 65535.0) as u16;
            out.extend_from_slice(&q.to_be_bytes());
        }
        out
    }

    pub fn ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
        let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
        out.extend_from_slice(rgb);
        out
    }

    pub fn camera_rgb(frame: &CameraFrame) -> Vec<u8> {
        ppm(frame.width, frame.height, &frame.rgb)
    }

    pub fn camera_depth(frame: &CameraFrame, far: f64) -> Vec<u8> {
        pgm16(frame.width, frame.height, &frame.depth, far)
    }

    pub fn topdown(img: &DepthImage) -> Vec<u8> {
        pgm16(img.width, img.height, &img.data, img.h0)
    }
}

mod pose_serde {
    use super::Pose;
    use nalgebra::{Quaternion, UnitQuaternion, Vector3};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Raw {
        /// (w, x, y, z)
        rotation: [f64; 4],
        translation: [f64; 3],
    }

    pub fn serialize<S: Serializer>(p: &Pose, s: S) -> Result<S::Ok, S::Error> {
        let q = p.rotation.quaternion();
        Raw {
            rotation: [q.w, q.i, q.j, q.k],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Pose, D::Error> {
        let r = Raw::deserialize(d)?;
        let [w, i, j, k] = r.rotation;
        Ok(Pose::new(
            UnitQuaternion::from_quaternion(Quaternion::new(w, i, j, k)),
            Vector3::from(r.translation),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_primitive, Primitive};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube(side: f64) -> TriMesh {
        make_primitive(&Primitive::Box { x: side, y: side, z: side }, 0).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        SceneConfig::default().validate().unwrap();
    }

    #[test]
    fn unit_cube_rests_at_half_extent() {
        let mut cfg = SceneConfig::default();
        cfg.workspace = Workspace::centered(3.0, 3.0);
        let m = cube(1.0);
        for seed in 0..5 {
            let p = place_object(&m, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!((p.translation.z - 0.5).abs() < 1e-12);
            let min_z = m
                .vertices()
                .iter()
                .map(|v| p.apply_point(v).z)
                .fold(f64::INFINITY, f64::min);
            assert!(min_z.abs() < 1e-6);
        }
    }

    #[test]
    fn placement_is_deterministic_and_checks_fit() {
        let cfg = SceneConfig::default();
        let m = cube(0.05);
        let a = place_object(&m, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = place_object(&m, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            place_object(&cube(0.5), &cfg, &mut ChaCha8Rng::seed_from_u64(3)),
            Err(SceneError::DoesNotFit { .. })
        ));
    }

    #[test]
    fn empty_scene_renders_constants() {
        let cfg = SceneConfig::default();
        let f = render_camera(None, &cfg);
        assert!(f.depth.iter().all(|&d| d == cfg.camera.far as f32));
        assert!(f.rgb.iter().all(|&g| g == TABLE_GREY || g == BACKGROUND_GREY));
        let td = render_topdown_depth(None, &cfg);
        assert!(td.data.iter().all(|&d| d == 0.5));
        assert!(td.object_pixels().is_empty());
    }

    #[test]
    fn center_pixel_depth_matches_face_distance() {
        let mut cfg = SceneConfig::default();
        cfg.camera = CameraConfig::look_at(
            Point3::new(-0.3, 0.0, 0.025),
            Point3::new(0.0, 0.0, 0.025),
            63,
            63,
            45.0,
            2.0,
        );
        let m = cube(0.05);
        let scene = SceneState {
            object_id: "cube",
            mesh: &m,
            pose: resting_pose(&m, 0.0, 0.0, 0.0),
        };
        let f = render_camera(Some(&scene), &cfg);
        let d = f.depth[31 * 63 + 31] as f64;
        assert!((d - 0.275).abs() < 1e-6, "{d}");
        // the face normal is -x, the light is not; check the stated shading rule
        let expect = shade(&Vector3::new(-1.0, 0.0, 0.0), &cfg.light_direction);
        assert_eq!(f.rgb[3 * (31 * 63 + 31)], expect);
        assert!(f.rgb.chunks(3).all(|p| p[0] == p[1] && p[1] == p[2]));
    }

    #[test]
    fn face_toward_light_is_full_white() {
        let l = Vector3::new(0.0, 0.0, 1.0);
        assert_eq!(shade(&l, &l), 255);
        assert_eq!(shade(&-l, &l), round_half_up(255.0 * 0.2) as u8);
    }

    #[test]
    fn topdown_cube_and_sphere_apex() {
        let cfg = SceneConfig::default();
        let m = cube(0.05);
        let s = SceneState {
            object_id: "cube",
            mesh: &m,
            pose: resting_pose(&m, 0.0, 0.0, 0.0),
        };
        let td = render_topdown_depth(Some(&s), &cfg);
        let obj = td.object_pixels();
        assert!(!obj.is_empty());
        for &(c, r) in &obj {
            assert!((td.get(c, r) as f64 - 0.45).abs() < 1e-6);
        }

        let sphere = make_primitive(&Primitive::Sphere { radius: 0.03 }, 64).unwrap();
        let s = SceneState {
            object_id: "sphere",
            mesh: &sphere,
            pose: resting_pose(&sphere, 0.0, 0.0, 0.0),
        };
        let td = render_topdown_depth(Some(&s), &cfg);
        let min = td.data.iter().copied().fold(f32::INFINITY, f32::min) as f64;
        // one pixel of quantization: the sphere's drop over a full pixel diagonal
        let diag = td.pitch_x().hypot(td.pitch_y());
        let worst = 0.03 - (0.03f64.powi(2) - diag.powi(2)).sqrt();
        assert!(min >= 0.44 - 1e-6 && min <= 0.44 + worst + 1e-6, "{min}");
    }

    #[test]
    fn topdown_pixels_back_project_into_aabb() {
        let cfg = SceneConfig::default();
        let m = make_primitive(
            &Primitive::LBlock { length: 0.08, width: 0.06, thickness: 0.02, height: 0.03 },
            0,
        )
        .unwrap();
        let pose = resting_pose(&m, 0.03, -0.02, 0.7);
        let s = SceneState {
            object_id: "l",
            mesh: &m,
            pose,
        };
        let td = render_topdown_depth(Some(&s), &cfg);
        let world_box = crate::geometry::Aabb::from_points(
            m.vertices().iter().map(|v| pose.apply_point(v)).collect::<Vec<_>>().iter(),
        )
        .inflated(td.pitch_x().max(td.pitch_y()));
        for (c, r) in td.object_pixels() {
            let (x, y) = td.pixel_center(c, r);
            let p = Point3::new(x, y, td.height_at(c, r));
            assert!(world_box.contains(&p));
        }
    }

    #[test]
    fn topdown_invariant_under_yaw_of_symmetric_object() {
        let cfg = SceneConfig::default();
        let m = make_primitive(&Primitive::Cylinder { radius: 0.03, height: 0.06 }, 64).unwrap();
        let a = render_topdown_depth(
            Some(&SceneState { object_id: "c", mesh: &m, pose: resting_pose(&m, 0.0, 0.0, 0.0) }),
            &cfg,
        );
        let b = render_topdown_depth(
            Some(&SceneState { object_id: "c", mesh: &m, pose: resting_pose(&m, 0.0, 0.0, 1.1) }),
            &cfg,
        );
        let (w, h) = (a.width as i64, a.height as i64);
        for r in 0..h {
            for c in 0..w {
                let v = b.data[(r * w + c) as usize];
                let matched = (-1..=1).any(|dr| {
                    (-1..=1).any(|dc| {
                        let (rr, cc) = (r + dr, c + dc);
                        rr >= 0 && cc >= 0 && rr < h && cc < w
                            && (a.data[(rr * w + cc) as usize] - v).abs() < 1e-6
                    })
                });
                assert!(matched, "pixel ({c},{r})");
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let cfg = SceneConfig::default();
        let m = cube(0.05);
        let s = SceneState { object_id: "c", mesh: &m, pose: resting_pose(&m, 0.01, 0.02, 0.3) };
        assert_eq!(render_camera(Some(&s), &cfg), render_camera(Some(&s), &cfg));
    }

    #[test]
    fn export_headers() {
        let cfg = SceneConfig::default();
        let f = render_camera(None, &cfg);
        let ppm = export::camera_rgb(&f);
        assert!(ppm.starts_with(b"P6\n64 64\n255\n"));
        assert_eq!(ppm.len(), 13 + 64 * 64 * 3);
        let pgm = export::camera_depth(&f, cfg.camera.far);
        assert!(pgm.starts_with(b"P5\n64 64\n65535\n"));
        assert_eq!(pgm.len(), 15 + 64 * 64 * 2);
    }
}
