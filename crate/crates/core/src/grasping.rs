//! Top-down parallel-jaw grasp attempts: pick a grasp from the depth image, close until
//! both gel pads read enough force, then lift and label by how far the object rose.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::geometry::{mass_properties, GeometryError, MassProperties, Pose, TriMesh};
use crate::scene::{
    place_object, render_camera, render_topdown_depth, DepthImage, SceneConfig, SceneError,
    SceneState,
};
use crate::tactile::{
    contact_force, contact_valid, ContactSummary, GelProfile, SensorGeom, TactileFrame,
    DEFAULT_MIN_DEPTH, DEFAULT_MIN_PIXELS,
};

pub const YAW_BINS: usize = 18;

#[derive(Debug, thiserror::Error)]
pub enum GraspError {
    #[error("no grasp found")]
    NoGraspFound,
    #[error("gripper closed without reaching the force threshold")]
    NoContact,
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    /// Opening between the undeformed gel surfaces (m).
    pub max_width: f64,
    /// Width reduction per closing step (m).
    pub close_step: f64,
    /// Per-finger normal force that ends closing (N).
    pub force_threshold: f64,
    pub sensor: SensorGeom,
    pub num_candidates: usize,
}

impl Default for Gripper {
    fn default() -> Self {
        Self {
            max_width: 0.085,
            close_step: 0.0002,
            force_threshold: 2.0,
            sensor: SensorGeom::default(),
            num_candidates: 64,
        }
    }
}

impl Gripper {
    pub fn validate(&self) -> Result<(), GraspError> {
        if !(self.max_width > 0.0 && self.close_step > 0.0 && self.force_threshold > 0.0) {
            return Err(GraspError::BadConfig(
                "max_width, close_step and force_threshold must be positive".into(),
            ));
        }
        if self.num_candidates == 0 {
            return Err(GraspError::BadConfig("num_candidates must be >= 1".into()));
        }
        self.sensor
            .validate()
            .map_err(|e| GraspError::BadConfig(e.to_string()))
    }

    pub fn pad_half_height(&self) -> f64 {
        self.sensor.gel_height / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub x: f64,
    pub y: f64,
    /// Height of the pad centers (m).
    pub z: f64,
    /// Closing axis direction angle about +z.
    pub yaw: f64,
}

impl GraspPose {
    pub fn closing_axis(&self) -> Vector3<f64> {
        Vector3::new(self.yaw.cos(), self.yaw.sin(), 0.0)
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::new(self.x, self.y, self.z)
    }

    /// Sensor-to-world poses of the left (−axis side) and right (+axis side) gels at `width`.
    pub fn sensor_poses(&self, width: f64) -> (Pose, Pose) {
        let a = self.closing_axis();
        let up = Vector3::z();
        let c = self.center().coords;
        let left = Pose::from_axes(a, up.cross(&a), up, c - a * (width / 2.0));
        let right = Pose::from_axes(-a, up.cross(&-a), up, c + a * (width / 2.0));
        (left, right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftParams {
    /// m/s
    pub speed: f64,
    /// s
    pub duration: f64,
    pub mu_static: f64,
    pub mu_kinetic: f64,
    pub gravity: f64,
    /// Fraction of the commanded rise required for success.
    pub success_fraction: f64,
}

impl Default for LiftParams {
    fn default() -> Self {
        Self {
            speed: 0.1,
            duration: 1.5,
            mu_static: 0.6,
            mu_kinetic: 0.5,
            gravity: 9.81,
            success_fraction: 0.8,
        }
    }
}

impl LiftParams {
    pub fn validate(&self) -> Result<(), GraspError> {
        if !(self.mu_kinetic > 0.0 && self.mu_kinetic <= self.mu_static) {
            return Err(GraspError::BadConfig("need 0 < mu_kinetic <= mu_static".into()));
        }
        if !(self.speed > 0.0 && self.duration > 0.0 && self.gravity > 0.0) {
            return Err(GraspError::BadConfig("speed, duration and gravity must be positive".into()));
        }
        if !(self.success_fraction > 0.0 && self.success_fraction <= 1.0) {
            return Err(GraspError::BadConfig("success_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn lift_target(&self) -> f64 {
        self.speed * self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub success: bool,
    /// Both tactile frames passed the validity gate.
    pub valid: bool,
    pub left_force: f64,
    pub right_force: f64,
    pub final_object_rise: f64,
    pub lift_target: f64,
    /// The COM lever arm exceeded the torsional friction capacity of the contact patches.
    pub rotational_slip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub score: f64,
    pub antipodality: f64,
    pub width_fit: f64,
    /// Object extent along the closing axis (m).
    pub width: f64,
    /// Midpoint between the two contact boundaries (m).
    pub center: (f64, f64),
}

/// Scores one (pixel, yaw) candidate; `None` when the pixel is background.
pub fn score_candidate(
    depth: &DepthImage,
    col: usize,
    row: usize,
    yaw: f64,
    max_width: f64,
) -> Option<CandidateScore> {
    if !depth.is_object(col, row) {
        return None;
    }
    let a = (yaw.cos(), yaw.sin());
    let step = 0.25 * depth.pitch_x().min(depth.pitch_y());
    let (x0, y0) = depth.pixel_center(col, row);
    let march = |sign: f64| -> (f64, (usize, usize)) {
        let mut last = (0.0, (col, row));
        let mut k = 1usize;
        loop {
            let s = k as f64 * step;
            let (x, y) = (x0 + sign * s * a.0, y0 + sign * s * a.1);
            match nearest_pixel(depth, x, y) {
                Some((c, r)) if depth.is_object(c, r) => last = (s, (c, r)),
                _ => return last,
            }
            k += 1;
        }
    };
    let (s_right, px_right) = march(1.0);
    let (s_left, px_left) = march(-1.0);
    let width = s_right + s_left + depth.pitch_x().min(depth.pitch_y());
    let n_left = outward_normal(depth, px_left.0, px_left.1);
    let n_right = outward_normal(depth, px_right.0, px_right.1);
    let antipodality = 0.5 * (-(n_left.0 * a.0 + n_left.1 * a.1) + (n_right.0 * a.0 + n_right.1 * a.1));
    let width_fit = if width < max_width { 1.0 - width / max_width } else { 0.0 };
    let mid = (s_right - s_left) / 2.0;
    Some(CandidateScore {
        score: antipodality * width_fit,
        antipodality,
        width_fit,
        width,
        center: (x0 + mid * a.0, y0 + mid * a.1),
    })
}

fn nearest_pixel(depth: &DepthImage, x: f64, y: f64) -> Option<(usize, usize)> {
    let (c, r) = depth.world_to_pixel(x, y);
    let (c, r) = (c.round(), r.round());
    (c >= 0.0 && r >= 0.0 && (c as usize) < depth.width && (r as usize) < depth.height)
        .then_some((c as usize, r as usize))
}

/// Unit outward normal in the table plane from the Sobel gradient of the height field.
fn outward_normal(depth: &DepthImage, col: usize, row: usize) -> (f64, f64) {
    let h = |dc: isize, dr: isize| -> f64 {
        let (c, r) = (col as isize + dc, row as isize + dr);
        if c < 0 || r < 0 || c >= depth.width as isize || r >= depth.height as isize {
            0.0
        } else {
            depth.height_at(c as usize, r as usize)
        }
    };
    let gx = (h(1, -1) + 2.0 * h(1, 0) + h(1, 1)) - (h(-1, -1) + 2.0 * h(-1, 0) + h(-1, 1));
    let gy = (h(-1, 1) + 2.0 * h(0, 1) + h(1, 1)) - (h(-1, -1) + 2.0 * h(0, -1) + h(1, -1));
    let (gx, gy) = (gx / depth.pitch_x(), gy / depth.pitch_y());
    let n = gx.hypot(gy);
    if n < 1e-12 {
        (0.0, 0.0)
    } else {
        (-gx / n, -gy / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspCandidate {
    pub col: usize,
    pub row: usize,
    pub yaw_bin: usize,
    pub score: Option<CandidateScore>,
}

pub fn yaw_of_bin(bin: usize) -> f64 {
    bin as f64 * PI / YAW_BINS as f64
}

/// Draws `gripper.num_candidates` candidates: pixels uniform over object pixels and yaw
/// uniform over the discrete bins.
pub fn sample_candidates<R: Rng + ?Sized>(
    depth: &DepthImage,
    gripper: &Gripper,
    rng: &mut R,
) -> Vec<GraspCandidate> {
    let pixels = depth.object_pixels();
    if pixels.is_empty() {
        return Vec::new();
    }
    (0..gripper.num_candidates)
        .map(|_| {
            let (col, row) = pixels[rng.random_range(0..pixels.len())];
            let yaw_bin = rng.random_range(0..YAW_BINS);
            GraspCandidate {
                col,
                row,
                yaw_bin,
                score: score_candidate(depth, col, row, yaw_of_bin(yaw_bin), gripper.max_width),
            }
        })
        .collect()
}

/// Index of the best fitting candidate; ties go to the lower index.
pub fn best_candidate(candidates: &[GraspCandidate]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let Some(s) = c.score else { continue };
        if s.width_fit <= 0.0 {
            continue;
        }
        if best.is_none_or(|(_, b)| s.score > b) {
            best = Some((i, s.score));
        }
    }
    best.map(|b| b.0)
}

pub fn select_grasp<R: Rng + ?Sized>(
    depth: &DepthImage,
    gripper: &Gripper,
    rng: &mut R,
) -> Result<GraspPose, GraspError> {
    let candidates = sample_candidates(depth, gripper, rng);
    let i = best_candidate(&candidates).ok_or(GraspError::NoGraspFound)?;
    let c = &candidates[i];
    let s = c.score.expect("best candidate is scored");
    let half = gripper.pad_half_height();
    Ok(GraspPose {
        x: s.center.0,
        y: s.center.1,
        z: (depth.height_at(c.col, c.row) - half).max(half),
        yaw: yaw_of_bin(c.yaw_bin),
    })
}

#[derive(Debug, Clone)]
pub struct ClosingResult {
    pub left: TactileFrame,
    pub right: TactileFrame,
    pub width: f64,
    pub left_force: f64,
    pub right_force: f64,
    pub left_contact: ContactSummary,
    pub right_contact: ContactSummary,
    pub steps: usize,
}

/// Gel profiles of both fingers with the gripper fully open.
pub fn finger_profiles(scene: &SceneState, grasp: &GraspPose, gripper: &Gripper) -> (GelProfile, GelProfile) {
    let (l, r) = grasp.sensor_poses(gripper.max_width);
    let left = GelProfile::cast(scene.mesh, &l.inverse().compose(&scene.pose), &gripper.sensor);
    let right = GelProfile::cast(scene.mesh, &r.inverse().compose(&scene.pose), &gripper.sensor);
    (left, right)
}

/// Closes by `close_step` from `max_width` until both fingers read `force_threshold`.
pub fn close_gripper(
    scene: &SceneState,
    grasp: &GraspPose,
    gripper: &Gripper,
) -> Result<ClosingResult, GraspError> {
    let (lp, rp) = finger_profiles(scene, grasp, gripper);
    let last = (gripper.max_width / gripper.close_step + 1e-9).floor() as usize;
    for k in 0..=last {
        let width = gripper.max_width - k as f64 * gripper.close_step;
        let advance = (gripper.max_width - width) / 2.0;
        let left = lp.frame_at(advance);
        let right = rp.frame_at(advance);
        let lc = contact_force(&left, &gripper.sensor);
        let rc = contact_force(&right, &gripper.sensor);
        if lc.normal_force.min(rc.normal_force) >= gripper.force_threshold {
            return Ok(ClosingResult {
                left,
                right,
                width,
                left_force: lc.normal_force,
                right_force: rc.normal_force,
                left_contact: lc,
                right_contact: rc,
                steps: k,
            });
        }
    }
    Err(GraspError::NoContact)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftResult {
    pub final_object_rise: f64,
    pub success: bool,
    /// Static friction held for the whole lift.
    pub stuck: bool,
}

/// Quasi-static vertical stick-slip.
///
/// The object is carried at gripper speed when the lift starts. If static friction
/// `μs·Fn` supports its weight it rides along for the full `v·T`. Otherwise it slides
/// under kinetic friction with net acceleration `(μk·Fn − m·g)/m` and comes to rest on
/// the table if it falls back down.
pub fn lift_object(forces: (f64, f64), mass: f64, lp: &LiftParams) -> LiftResult {
    let fn_total = forces.0 + forces.1;
    let weight = mass * lp.gravity;
    let target = lp.lift_target();
    let (rise, stuck) = if lp.mu_static * fn_total >= weight {
        (target, true)
    } else {
        let a = (lp.mu_kinetic * fn_total - weight) / mass;
        let t = lp.duration;
        ((lp.speed * t + 0.5 * a * t * t).clamp(0.0, target), false)
    };
    LiftResult {
        final_object_rise: rise,
        success: rise >= lp.success_fraction * target,
        stuck,
    }
}

/// Fixed-step integration of the same model, used to cross-check `lift_object`.
pub fn simulate_lift(forces: (f64, f64), mass: f64, lp: &LiftParams, steps: usize) -> LiftResult {
    let fn_total = forces.0 + forces.1;
    let weight = mass * lp.gravity;
    let dt = lp.duration / steps as f64;
    let (mut z, mut vel) = (0.0f64, lp.speed);
    let mut stuck = true;
    let mut landed = false;
    for i in 0..steps {
        let gripper_z = lp.speed * i as f64 * dt;
        if landed {
            break;
        }
        // stuck: object rides with the gripper while static friction holds
        if stuck && (z - gripper_z).abs() < 1e-12 && lp.mu_static * fn_total >= weight {
            z += lp.speed * dt;
            vel = lp.speed;
            continue;
        }
        stuck = false;
        let a = (lp.mu_kinetic * fn_total - weight) / mass;
        let mut next_v = vel + a * dt;
        let mut next_z = z + vel * dt + 0.5 * a * dt * dt;
        if next_v > lp.speed {
            // cannot outrun the fingers
            next_v = lp.speed;
            next_z = z + lp.speed * dt;
        }
        if next_z <= 0.0 {
            next_z = 0.0;
            next_v = 0.0;
            landed = true;
        }
        z = next_z;
        vel = next_v;
    }
    let target = lp.lift_target();
    let rise = z.clamp(0.0, target);
    LiftResult {
        final_object_rise: rise,
        success: rise >= lp.success_fraction * target,
        stuck,
    }
}

/// True when gravity's moment about the contact centroid exceeds what torsional friction
/// over the contact patches can resist.
pub fn rotational_slip(com_offset: f64, mass: f64, normal_force: f64, patch_radius: f64, lp: &LiftParams) -> bool {
    com_offset * mass * lp.gravity > lp.mu_static * normal_force * patch_radius
}

/// A graspable object: id, scaled mesh and its mass properties.
#[derive(Debug, Clone)]
pub struct ObjectModel {
    pub id: String,
    pub scale: f64,
    pub mesh: TriMesh,
    pub mass: MassProperties,
}

impl ObjectModel {
    pub fn new(id: impl Into<String>, base: &TriMesh, scale: f64, density: f64) -> Result<Self, GraspError> {
        let mesh = base.scaled(scale)?;
        let mass = mass_properties(&mesh, density)?;
        Ok(Self {
            id: id.into(),
            scale,
            mesh,
            mass,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scene: SceneConfig,
    pub gripper: Gripper,
    pub lift: LiftParams,
    /// kg/m³
    pub density: f64,
    pub min_contact_pixels: usize,
    pub min_contact_depth: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            gripper: Gripper::default(),
            lift: LiftParams::default(),
            density: 500.0,
            min_contact_pixels: DEFAULT_MIN_PIXELS,
            min_contact_depth: DEFAULT_MIN_DEPTH,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), GraspError> {
        self.scene.validate()?;
        self.gripper.validate()?;
        self.lift.validate()?;
        if !(self.density > 0.0) {
            return Err(GraspError::BadConfig("density must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    NoGrasp,
    NoContact,
    InvalidTactile,
}

#[derive(Debug, Clone)]
pub enum AttemptOutcome {
    Recorded(Box<Sample>),
    Discarded(DiscardReason),
}

/// Close, check both pads, and lift, for an already chosen grasp.
pub fn grasp_and_lift(
    scene: &SceneState,
    object: &ObjectModel,
    grasp: &GraspPose,
    cfg: &SimConfig,
) -> Result<(ClosingResult, GraspOutcome), DiscardReason> {
    let closing = close_gripper(scene, grasp, &cfg.gripper).map_err(|_| DiscardReason::NoContact)?;
    let valid = contact_valid(&closing.left, cfg.min_contact_pixels, cfg.min_contact_depth)
        && contact_valid(&closing.right, cfg.min_contact_pixels, cfg.min_contact_depth);
    if !valid {
        return Err(DiscardReason::InvalidTactile);
    }
    let lift = lift_object((closing.left_force, closing.right_force), object.mass.mass, &cfg.lift);

    let sensor = &cfg.gripper.sensor;
    let (lpose, rpose) = grasp.sensor_poses(closing.width);
    let world_centroid = |pose: &Pose, c: &ContactSummary| {
        let (col, row) = c.centroid.expect("valid contact has a centroid");
        pose.apply_point(&sensor.pixel_to_sensor(col, row))
    };
    let lc = world_centroid(&lpose, &closing.left_contact);
    let rc = world_centroid(&rpose, &closing.right_contact);
    let contact_center = nalgebra::center(&lc, &rc);
    let com = scene.pose.apply_point(&object.mass.center_of_mass);
    let offset = (com.x - contact_center.x).hypot(com.y - contact_center.y);
    let patch_radius = 0.5 * (closing.left_contact.rms_radius_px + closing.right_contact.rms_radius_px) * sensor.pitch();
    let slip = rotational_slip(
        offset,
        object.mass.mass,
        closing.left_force + closing.right_force,
        patch_radius,
        &cfg.lift,
    );

    let outcome = GraspOutcome {
        success: lift.success && !slip,
        valid,
        left_force: closing.left_force,
        right_force: closing.right_force,
        final_object_rise: if slip { 0.0 } else { lift.final_object_rise },
        lift_target: cfg.lift.lift_target(),
        rotational_slip: slip,
    };
    Ok((closing, outcome))
}

/// One full attempt: place, render, select, close, validate, lift.
pub fn execute_attempt<R: Rng + ?Sized>(
    object: &ObjectModel,
    cfg: &SimConfig,
    attempt_index: u64,
    rng: &mut R,
) -> Result<AttemptOutcome, GraspError> {
    let pose = place_object(&object.mesh, &cfg.scene, rng)?;
    let scene = SceneState {
        object_id: &object.id,
        mesh: &object.mesh,
        pose,
    };
    let topdown = render_topdown_depth(Some(&scene), &cfg.scene);
    let grasp = match select_grasp(&topdown, &cfg.gripper, rng) {
        Ok(g) => g,
        Err(GraspError::NoGraspFound) => return Ok(AttemptOutcome::Discarded(DiscardReason::NoGrasp)),
        Err(e) => return Err(e),
    };
    let (closing, outcome) = match grasp_and_lift(&scene, object, &grasp, cfg) {
        Ok(r) => r,
        Err(reason) => return Ok(AttemptOutcome::Discarded(reason)),
    };
    let camera = render_camera(Some(&scene), &cfg.scene);
    Ok(AttemptOutcome::Recorded(Box::new(Sample {
        object_id: object.id.clone(),
        scale: object.scale,
        attempt_index,
        grasp,
        tactile_left: closing.left,
        tactile_right: closing.right,
        rgb: camera.rgb,
        depth: camera.depth,
        left_force: outcome.left_force,
        right_force: outcome.right_force,
        success: outcome.success,
    })))
}
