use nalgebra::{Point3, Unit, UnitQuaternion, Vector3};

/// Rigid transform: rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// Rotation about world +z followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        Self::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            translation,
        )
    }

    /// Pose whose local axes are the given orthonormal columns.
    pub fn from_axes(
        x: Vector3<f64>,
        y: Vector3<f64>,
        z: Vector3<f64>,
        origin: Vector3<f64>,
    ) -> Self {
        let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
        let rot = nalgebra::Rotation3::from_matrix(&m);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), origin)
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn apply_unit(&self, v: &Unit<Vector3<f64>>) -> Unit<Vector3<f64>> {
        Unit::new_unchecked(self.rotation * v.into_inner())
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose::new(inv, -(inv * self.translation))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn yaw(&self) -> f64 {
        self.rotation.euler_angles().2
    }
}
