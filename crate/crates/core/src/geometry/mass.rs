use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    /// kg
    pub mass: f64,
    pub center_of_mass: Point3<f64>,
    /// m³
    pub volume: f64,
}

/// Volume and centroid by summing signed tetrahedra against the origin.
pub fn mass_properties(mesh: &TriMesh, density: f64) -> Result<MassProperties, GeometryError> {
    if !(density.is_finite() && density > 0.0) {
        return Err(GeometryError::BadDims(format!("density {density}")));
    }
    if !mesh.is_watertight() {
        return Err(GeometryError::NotWatertight);
    }
    let mut six_volume = 0.0;
    let mut moment = Vector3::zeros();
    for id in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle_points(id);
        let v6 = a.coords.dot(&b.coords.cross(&c.coords));
        six_volume += v6;
        moment += v6 * (a.coords + b.coords + c.coords);
    }
    // an inward-wound closed mesh yields a negative volume; the centroid ratio is unaffected
    let volume = (six_volume / 6.0).abs();
    let com = moment / (4.0 * six_volume);
    Ok(MassProperties {
        mass: density * volume,
        center_of_mass: Point3::from(com),
        volume,
    })
}
