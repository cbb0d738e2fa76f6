//! Triangle meshes, ray casting, rigid poses and mass properties.

mod bvh;
mod io;
mod mass;
mod mesh;
mod pose;
mod primitives;

pub use bvh::{Aabb, Bvh, MAX_LEAF_SIZE};
pub use io::{load_mesh, parse_mesh, write_mesh};
pub use mass::{mass_properties, MassProperties};
pub use mesh::{
    classify_edges, edge_count, Hit, Ray, TriMesh, Watertightness, DEGENERATE_AREA, RAY_T_MIN,
};
pub use pose::Pose;
pub use primitives::{icosphere, make_primitive, Primitive, MIN_TESSELLATION};

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("mesh has no valid triangles")]
    EmptyMesh,
    #[error("non-finite vertex coordinate")]
    NonFinite,
    #[error("triangle {triangle} references a missing vertex")]
    BadIndex { triangle: usize },
    #[error("bad dimensions: {0}")]
    BadDims(String),
    #[error("mesh is not watertight")]
    NotWatertight,
}
