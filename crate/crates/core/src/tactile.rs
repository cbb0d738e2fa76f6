//! Gel tactile sensor model.
//!
//! The sensor frame puts the undeformed gel surface on the plane x = 0 with the outward
//! normal along +x. Pixels tile the (y, z) rectangle; row 0 is the top edge (largest z)
//! and column 0 the most negative y. A pixel's displacement is how far the object reaches
//! behind the gel surface, clamped to the gel thickness.

use nalgebra::{Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Ray, TriMesh};
use crate::scene::round_half_up;

pub const DEFAULT_MIN_PIXELS: usize = 100;
pub const DEFAULT_MIN_DEPTH: f64 = 0.0001;

#[derive(Debug, thiserror::Error)]
pub enum TactileError {
    #[error("invalid sensor geometry: {0}")]
    BadGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorGeom {
    pub gel_width: f64,
    pub gel_height: f64,
    pub gel_thickness: f64,
    /// Pixels along the gel width (sensor y).
    pub width_px: usize,
    /// Pixels along the gel height (sensor z).
    pub height_px: usize,
    /// N per (m displacement · m² area).
    pub stiffness: f64,
    /// Gaussian blur of the rendered heightmap in pixels; 0 disables it.
    pub smoothing_sigma_px: f64,
}

impl Default for SensorGeom {
    fn default() -> Self {
        Self {
            gel_width: 0.016,
            gel_height: 0.024,
            gel_thickness: 0.002,
            width_px: 40,
            height_px: 60,
            stiffness: 4e7,
            smoothing_sigma_px: 0.0,
        }
    }
}

impl SensorGeom {
    pub fn validate(&self) -> Result<(), TactileError> {
        let dims = [self.gel_width, self.gel_height, self.gel_thickness, self.stiffness];
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) || self.width_px == 0 || self.height_px == 0 {
            return Err(TactileError::BadGeometry("all dimensions must be positive".into()));
        }
        let px = self.gel_width / self.width_px as f64;
        let py = self.gel_height / self.height_px as f64;
        if (px - py).abs() > 1e-9 {
            return Err(TactileError::BadGeometry(format!("non-square pixels {px} vs {py}")));
        }
        if !(self.smoothing_sigma_px >= 0.0) {
            return Err(TactileError::BadGeometry("smoothing sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn pitch(&self) -> f64 {
        self.gel_width / self.width_px as f64
    }

    pub fn pixel_area(&self) -> f64 {
        self.pitch() * self.pitch()
    }

    pub fn pixel_count(&self) -> usize {
        self.width_px * self.height_px
    }

    /// Sensor-frame (y, z) of a pixel center.
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        let p = self.pitch();
        (
            -self.gel_width / 2.0 + (col as f64 + 0.5) * p,
            self.gel_height / 2.0 - (row as f64 + 0.5) * p,
        )
    }

    /// Sensor-frame point on the gel surface for fractional pixel coordinates.
    pub fn pixel_to_sensor(&self, col: f64, row: f64) -> Point3<f64> {
        let p = self.pitch();
        Point3::new(
            0.0,
            -self.gel_width / 2.0 + (col + 0.5) * p,
            self.gel_height / 2.0 - (row + 0.5) * p,
        )
    }
}

/// Per-pixel gel displacement in meters, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl TactileFrame {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.data[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Miss,
    /// Ray origin is already inside the object.
    Inside,
    /// Distance from the ray origin to the first entry surface.
    Gap(f64),
}

/// First-surface distances for every gel pixel, with rays starting one gel thickness
/// behind the gel surface. Moving the sensor along its normal by `δ` shortens every gap by
/// `δ`, so a closing sweep needs a single cast.
#[derive(Debug, Clone)]
pub struct GelProfile {
    sensor: SensorGeom,
    columns: Vec<Column>,
}

impl GelProfile {
    /// `object_in_sensor` maps object coordinates into the sensor frame.
    pub fn cast(mesh: &TriMesh, object_in_sensor: &Pose, sensor: &SensorGeom) -> Self {
        let to_object = object_in_sensor.inverse();
        let dir = Unit::new_unchecked(to_object.apply_vector(&Vector3::x()));
        let mut columns = Vec::with_capacity(sensor.pixel_count());
        for row in 0..sensor.height_px {
            for col in 0..sensor.width_px {
                let (y, z) = sensor.pixel_center(col, row);
                let origin = to_object.apply_point(&Point3::new(-sensor.gel_thickness, y, z));
                let c = match mesh.raycast(&Ray { origin, direction: dir }) {
                    None => Column::Miss,
                    Some(h) if !h.front_face => Column::Inside,
                    Some(h) => Column::Gap(h.t),
                };
                columns.push(c);
            }
        }
        Self {
            sensor: *sensor,
            columns,
        }
    }

    /// Heightmap after pushing the sensor `advance` meters along its outward normal.
    pub fn frame_at(&self, advance: f64) -> TactileFrame {
        let th = self.sensor.gel_thickness;
        let data = self
            .columns
            .iter()
            .map(|c| match *c {
                Column::Miss => 0.0,
                Column::Inside => th as f32,
                Column::Gap(t) => (th - t + advance).clamp(0.0, th) as f32,
            })
            .collect();
        let frame = TactileFrame {
            width: self.sensor.width_px,
            height: self.sensor.height_px,
            data,
        };
        if self.sensor.smoothing_sigma_px > 0.0 {
            smooth(&frame, self.sensor.smoothing_sigma_px, th)
        } else {
            frame
        }
    }
}

pub fn render_tactile(mesh: &TriMesh, object_in_sensor: &Pose, sensor: &SensorGeom) -> TactileFrame {
    GelProfile::cast(mesh, object_in_sensor, sensor).frame_at(0.0)
}

/// At least `min_pixels` pixels strictly deeper than `min_depth`.
pub fn contact_valid(frame: &TactileFrame, min_pixels: usize, min_depth: f64) -> bool {
    count_deeper(frame, min_depth) >= min_pixels
}

fn count_deeper(frame: &TactileFrame, min_depth: f64) -> usize {
    frame.data.iter().filter(|&&d| d as f64 > min_depth).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSummary {
    /// N
    pub normal_force: f64,
    /// Pixels deeper than the default contact depth.
    pub contact_pixels: usize,
    /// Displacement-weighted mean (col, row); `None` without displacement.
    pub centroid: Option<(f64, f64)>,
    /// RMS distance of contact pixels from the centroid, in pixels.
    pub rms_radius_px: f64,
}

/// Linear per-pixel spring: `k · Σ d · pixel_area`.
pub fn contact_force(frame: &TactileFrame, sensor: &SensorGeom) -> ContactSummary {
    let mut sum = 0.0f64;
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for row in 0..frame.height {
        for col in 0..frame.width {
            let d = frame.get(col, row) as f64;
            sum += d;
            sx += d * col as f64;
            sy += d * row as f64;
        }
    }
    let centroid = (sum > 0.0).then(|| (sx / sum, sy / sum));
    let mut n = 0usize;
    let mut r2 = 0.0f64;
    if let Some((cx, cy)) = centroid {
        for row in 0..frame.height {
            for col in 0..frame.width {
                if frame.get(col, row) as f64 > DEFAULT_MIN_DEPTH {
                    n += 1;
                    r2 += (col as f64 - cx).powi(2) + (row as f64 - cy).powi(2);
                }
            }
        }
    }
    ContactSummary {
        normal_force: sensor.stiffness * sum * sensor.pixel_area(),
        contact_pixels: n,
        centroid,
        rms_radius_px: if n > 0 { (r2 / n as f64).sqrt() } else { 0.0 },
    }
}

/// Bright where the gel is undisturbed, dark where it is pressed in.
pub fn to_intensity_image(frame: &TactileFrame, sensor: &SensorGeom) -> Vec<u8> {
    frame
        .data
        .iter()
        .map(|&d| {
            let q = round_half_up(255.0 * d as f64 / sensor.gel_thickness).clamp(0.0, 255.0);
            255 - q as u8
        })
        .collect()
}

/// Separable Gaussian blur with clamped borders; output stays within `[0, max]`.
pub fn smooth(frame: &TactileFrame, sigma_px: f64, max: f64) -> TactileFrame {
    let radius = (3.0 * sigma_px).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma_px * sigma_px)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let (w, h) = (frame.width as isize, frame.height as isize);
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for (i, kv) in kernel.iter().enumerate() {
                    let o = i as isize - radius;
                    let (cc, rr) = if horizontal {
                        ((c + o).clamp(0, w - 1), r)
                    } else {
                        (c, (r + o).clamp(0, h - 1))
                    };
                    acc += kv * src[(rr * w + cc) as usize];
                }
                out[(r * w + c) as usize] = acc / norm;
            }
        }
        out
    };
    let src: Vec<f64> = frame.data.iter().map(|&d| d as f64).collect();
    let out = pass(&pass(&src, true), false);
    TactileFrame {
        width: frame.width,
        height: frame.height,
        data: out.into_iter().map(|d| d.clamp(0.0, max) as f32).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_primitive, Primitive};
    use proptest::prelude::*;

    fn sensor() -> SensorGeom {
        SensorGeom::default()
    }

    fn slab() -> TriMesh {
        // wide enough to cover the gel in y and z
        make_primitive(&Primitive::Box { x: 0.01, y: 0.05, z: 0.05 }, 0).unwrap()
    }

    /// Places the slab so its -x face sits `depth` meters behind the gel surface.
    fn pressed_slab(depth: f64) -> Pose {
        Pose::from_translation(Vector3::new(0.005 - depth, 0.0, 0.0))
    }

    #[test]
    fn default_geometry_has_square_pixels() {
        let s = sensor();
        s.validate().unwrap();
        assert!((s.pitch() - 0.0004).abs() < 1e-12);
        let mut bad = s;
        bad.height_px = 50;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn no_touch_means_zero_frame() {
        let f = render_tactile(&slab(), &Pose::from_translation(Vector3::new(0.02, 0.0, 0.0)), &sensor());
        assert!(f.data.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn plane_indentation_is_uniform() {
        let f = render_tactile(&slab(), &pressed_slab(0.0005), &sensor());
        for &d in &f.data {
            assert!((d as f64 - 0.0005).abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn deep_press_clamps_to_thickness() {
        let s = sensor();
        for depth in [0.0019, 0.002, 0.003, 0.008] {
            let f = render_tactile(&slab(), &pressed_slab(depth), &s);
            assert!(f.data.iter().all(|&d| d >= 0.0 && d <= s.gel_thickness as f32));
            let expect = depth.min(s.gel_thickness);
            assert!((f.data[0] as f64 - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_advance_matches_rerender() {
        let s = sensor();
        let sphere = make_primitive(&Primitive::Sphere { radius: 0.01 }, 48).unwrap();
        let start = Pose::from_translation(Vector3::new(0.0105, 0.001, -0.002));
        let profile = GelProfile::cast(&sphere, &start, &s);
        for adv in [0.0, 0.0003, 0.0007, 0.0015] {
            let moved = Pose::from_translation(start.translation - Vector3::new(adv, 0.0, 0.0));
            let direct = render_tactile(&sphere, &moved, &s);
            let swept = profile.frame_at(adv);
            for (a, b) in direct.data.iter().zip(&swept.data) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn validity_boundaries() {
        let mut f = TactileFrame::zeros(40, 60);
        for d in f.data.iter_mut().take(100) {
            *d = 0.0002;
        }
        assert!(contact_valid(&f, 100, 0.0001));
        f.data[99] = 0.0;
        assert!(!contact_valid(&f, 100, 0.0001));
        let mut g = TactileFrame::zeros(40, 60);
        for d in g.data.iter_mut().take(500) {
            *d = 0.00009;
        }
        assert!(!contact_valid(&g, 100, 0.0001));
    }

    #[test]
    fn force_closed_forms() {
        let s = sensor();
        let z = contact_force(&TactileFrame::zeros(40, 60), &s);
        assert_eq!(z.normal_force, 0.0);
        assert_eq!(z.contact_pixels, 0);
        assert!(z.centroid.is_none());

        let d = 0.0005f32;
        let f = TactileFrame {
            width: 40,
            height: 60,
            data: vec![d; 2400],
        };
        let c = contact_force(&f, &s);
        let expect = s.stiffness * d as f64 * s.gel_width * s.gel_height;
        assert!(((c.normal_force - expect) / expect).abs() < 1e-12);
        assert_eq!(c.contact_pixels, 2400);
        let (cx, cy) = c.centroid.unwrap();
        assert!((cx - 19.5).abs() < 1e-9 && (cy - 29.5).abs() < 1e-9);
    }

    #[test]
    fn intensity_mapping() {
        let s = sensor();
        let th = s.gel_thickness as f32;
        let f = TactileFrame {
            width: 3,
            height: 1,
            data: vec![0.0, th, th / 2.0],
        };
        assert_eq!(to_intensity_image(&f, &s), vec![255, 0, 127]);
    }

    #[test]
    fn smoothing_preserves_bounds_and_constants() {
        let th = 0.002;
        let f = TactileFrame {
            width: 10,
            height: 8,
            data: vec![0.0007; 80],
        };
        let g = smooth(&f, 1.5, th);
        assert!(g.data.iter().all(|&d| (d - 0.0007).abs() < 1e-9));
        let mut spike = TactileFrame::zeros(10, 8);
        spike.data[35] = 0.002;
        let g = smooth(&spike, 1.0, th);
        assert!(g.data.iter().all(|&d| (0.0..=0.002).contains(&d)));
        assert!(g.data[35] < 0.002 && g.data[36] > 0.0);
    }

    proptest! {
        #[test]
        fn deeper_never_reduces_force(
            data in prop::collection::vec(0.0f32..0.002, 24),
            idx in 0usize..24,
            extra in 0.0f32..0.001,
        ) {
            let s = SensorGeom { gel_width: 0.0024, gel_height: 0.0016, width_px: 6, height_px: 4, ..SensorGeom::default() };
            let a = TactileFrame { width: 6, height: 4, data: data.clone() };
            let mut b = a.clone();
            b.data[idx] = (b.data[idx] + extra).min(0.002);
            let (fa, fb) = (contact_force(&a, &s), contact_force(&b, &s));
            prop_assert!(fb.normal_force >= fa.normal_force);
            prop_assert!(fb.contact_pixels >= fa.contact_pixels);
        }

        #[test]
        fn validity_monotone_in_thresholds(
            data in prop::collection::vec(0.0f32..0.0005, 60),
            n in 0usize..60,
            depth in 0.0f64..0.0005,
            dn in 0usize..10,
            dd in 0.0f64..0.0002,
        ) {
            let f = TactileFrame { width: 6, height: 10, data };
            if !contact_valid(&f, n, depth) {
                prop_assert!(!contact_valid(&f, n + dn, depth));
                prop_assert!(!contact_valid(&f, n, depth + dd));
            }
        }
    }
}
